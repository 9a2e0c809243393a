//! Open an .xlsx workbook and read inputs and series from it.
//!
//! cargo run --example read_workbook [path.xlsx]

use gridaudit::grid::{parse_a1, Extent, Orientation};
use gridaudit::open_workbook;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/tests/fixtures/solar_model.xlsx"
        )
        .to_string()
    });
    let book = open_workbook(&path)?;
    println!("sheets: {:?}", book.sheet_names().collect::<Vec<_>>());
    for (name, range) in book.defined_names() {
        println!("  {name:<12} {range}");
    }

    let irradiance = book.read_range(book.resolve_name("irradiance")?)?;
    println!("irradiance: {irradiance}");

    let anchor = parse_a1("Model!G43")?.to_cell("Model")?;
    let net_gen = book.read_series(&anchor, Orientation::Row, Extent::Expand)?;
    println!(
        "net generation from {anchor}: {} months, first {:.2}, last {:.2}",
        net_gen.len(),
        net_gen[0],
        net_gen[net_gen.len() - 1]
    );
    if let Some(f) = book.sheet("Model")?.formula(anchor.addr()) {
        println!("  formula at {anchor}: ={f}");
    }
    Ok(())
}
