//! Parse and render A1 references.
//!
//! cargo run --example a1_addressing

use gridaudit::grid::{col_to_letters, letters_to_col, parse_a1, A1Target};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for col in [1, 7, 26, 27, 66, 16_384] {
        let letters = col_to_letters(col)?;
        println!(
            "column {col:>5} = {letters:<3} -> {}",
            letters_to_col(&letters)?
        );
    }

    for text in [
        "G41",
        "Model!$H$41:$BN$41",
        "'My Sheet'!D26:D37",
        "'O''Brien'!A1",
    ] {
        let a1 = parse_a1(text)?;
        let range = a1.to_range("Model");
        let kind = match a1.target {
            A1Target::Cell(_) => "cell",
            A1Target::Range(..) => "range",
        };
        println!(
            "{text:<22} {kind:<5} {} cells, renders as {range}",
            range.cell_count()
        );
    }

    match parse_a1("Model!G0") {
        Err(e) => println!("rejected: {e}"),
        Ok(r) => println!("unexpected: {r:?}"),
    }
    Ok(())
}
