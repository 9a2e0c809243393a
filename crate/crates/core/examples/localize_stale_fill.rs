//! Audit a workbook whose net generation row was pasted from a stale run.
//!
//! cargo run --example localize_stale_fill [spec.json]

use std::path::PathBuf;

use gridaudit::{audit, open_workbook, validate, AuditOptions, BindingSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec_path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR"))
                .join("tests/fixtures/solar_model_stale.spec.json")
        });
    let spec = BindingSpec::load(&spec_path)?;
    let book = open_workbook(spec.workbook.as_ref().ok_or("spec names no workbook")?)?;
    let opts = AuditOptions::default();

    let v = validate(&book, &spec, &opts);
    println!("validate: {:?}\n", v.verdict);
    print!("{}", audit(&book, &spec, &opts).to_text());
    Ok(())
}
