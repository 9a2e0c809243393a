//! Compare a spreadsheet row with reference values and name the bad cells.
//!
//! cargo run --example compare_ranges

use gridaudit::compare::runs_to_a1;
use gridaudit::grid::{CellAddr, Orientation};
use gridaudit::{isclose, NumericSeries, ToleranceSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reference: NumericSeries = (1..=24)
        .map(|m| 1000.0 * 1.005f64.powf(m as f64 / 12.0))
        .collect();
    let mut actual = reference.clone().into_vec();
    actual[5] += 0.001; // within tolerance
    for v in &mut actual[9..14] {
        *v = 0.0;
    }
    actual[20] *= 1.1;
    let actual = NumericSeries::new(actual);

    let tol = ToleranceSpec::default();
    let cmp = isclose(&actual, &reference, &tol)?;
    println!("tolerance {tol:?}");
    println!("mismatching indices: {:?}", cmp.mismatch_indices);
    println!("mismatch runs: {:?}", cmp.mismatch_runs);

    let anchor = CellAddr::new(41, 7)?;
    println!(
        "error ranges:   {:?}",
        runs_to_a1(anchor, Orientation::Row, 0, &cmp.mismatch_runs)?
    );
    println!(
        "correct ranges: {:?}",
        runs_to_a1(anchor, Orientation::Row, 0, &cmp.match_runs)?
    );
    Ok(())
}
