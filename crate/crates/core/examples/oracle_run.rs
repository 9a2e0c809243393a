//! Evaluate the solar EBITDA model and print the first year.
//!
//! cargo run --example oracle_run

use gridaudit::{run_model, ModelInputs, Node};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inputs = ModelInputs {
        plant_size: 500.0,
        derate: 0.8,
        irradiance: vec![
            112.0, 130.0, 168.0, 190.0, 210.0, 221.0, 225.0, 208.0, 176.0, 150.0, 115.0, 101.0,
        ],
        start_month: 4,
        model_years: 25,
        ppa_price: 0.08,
        om_cost: 0.02,
        degradation_rate: 0.005,
        inflation_rate: 0.02,
    };
    let run = run_model(&inputs)?;

    print!("{:<11}", "month");
    for m in 1..=12 {
        print!("{m:>10}");
    }
    println!();
    for (node, series) in run.iter() {
        print!("{:<11}", node.name());
        for v in series.iter().take(12) {
            print!("{v:>10.3}");
        }
        println!();
    }
    let first_year: f64 = run.get(Node::EbitdaN).iter().take(12).sum();
    println!("first 12 months nominal EBITDA: {first_year:.2}");
    println!(
        "lifetime nominal EBITDA: {:.2}",
        run.get(Node::EbitdaN).sum()
    );
    Ok(())
}
