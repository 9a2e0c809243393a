#![allow(dead_code)]

use std::path::PathBuf;

use gridaudit::audit::{Binding, BindingSpec, InputsSource};
use gridaudit::grid::{CellAddr, Orientation};
use gridaudit::{ModelInputs, Node};
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn sample_inputs() -> ModelInputs {
    ModelInputs {
        plant_size: 500.0,
        derate: 0.8,
        irradiance: vec![
            112.0, 130.0, 168.0, 190.0, 210.0, 221.0, 225.0, 208.0, 176.0, 150.0, 115.0, 101.0,
        ],
        start_month: 1,
        model_years: 5,
        ppa_price: 0.08,
        om_cost: 0.02,
        degradation_rate: 0.005,
        inflation_rate: 0.02,
    }
}

/// Inputs drawn from the ranges the model is specified over.
pub fn random_inputs(rng: &mut impl Rng, max_years: u32) -> ModelInputs {
    ModelInputs {
        plant_size: rng.random_range(1.0..=1e4),
        derate: rng.random_range(0.5..=1.0),
        irradiance: (0..12).map(|_| rng.random_range(20.0..=300.0)).collect(),
        start_month: rng.random_range(1..=12),
        model_years: rng.random_range(1..=max_years),
        ppa_price: rng.random_range(0.03..=0.2),
        om_cost: rng.random_range(0.0..=0.02),
        degradation_rate: rng.random_range(-0.05..=0.10),
        inflation_rate: rng.random_range(-0.05..=0.10),
    }
}

/// Plain per-month loop over the model, one scalar at a time. Returns the
/// node series in `Node::ALL` order.
pub fn brute_force(inputs: &ModelInputs) -> [Vec<f64>; 7] {
    let mut out: [Vec<f64>; 7] = Default::default();
    let n = 12 * inputs.model_years as usize;
    for i in 0..n {
        let month = (i + 1) as f64;
        let cal = (inputs.start_month as usize - 1 + i) % 12;
        let nom = inputs.plant_size * inputs.derate * inputs.irradiance[cal];
        let deg = (1.0 + inputs.degradation_rate).powf(month / 12.0);
        let net = nom / deg;
        let inf = (1.0 + inputs.inflation_rate).powf(month / 12.0);
        let revenue = net * inputs.ppa_price;
        let opex = net * inputs.om_cost;
        let values = [
            month,
            nom,
            deg,
            net,
            inf,
            revenue - opex,
            revenue * inf - opex * inf,
        ];
        for (series, v) in out.iter_mut().zip(values) {
            series.push(v);
        }
    }
    out
}

pub const FIXTURE_ROWS: [(Node, u32); 7] = [
    (Node::OpsMonths, 13),
    (Node::NomGen, 41),
    (Node::DegIndex, 42),
    (Node::NetGen, 43),
    (Node::InfIndex, 45),
    (Node::EbitdaR, 51),
    (Node::EbitdaN, 56),
];

/// Every node on its own row of sheet "Model", starting at column G.
pub fn fixture_layout(inputs: ModelInputs) -> BindingSpec {
    BindingSpec {
        workbook: None,
        inputs: InputsSource::Inline(inputs),
        model_years_source: None,
        bindings: FIXTURE_ROWS
            .iter()
            .map(|&(node, row)| {
                Binding::anchored(
                    node,
                    "Model",
                    CellAddr::new(row, 7).unwrap(),
                    Orientation::Row,
                )
            })
            .collect(),
    }
}

/// All nodes bound, at a random orientation, origin and per-node offset.
/// Nodes sit on distinct rows (or columns) so they never overlap.
pub fn random_layout(rng: &mut impl Rng, inputs: ModelInputs) -> BindingSpec {
    let orientation = if rng.random_bool(0.5) {
        Orientation::Row
    } else {
        Orientation::Col
    };
    let lane0: u32 = rng.random_range(1..=50);
    let start: u32 = rng.random_range(1..=30);
    let mut lanes: Vec<u32> = (0..7).map(|i| lane0 + 2 * i).collect();
    for i in (1..lanes.len()).rev() {
        lanes.swap(i, rng.random_range(0..=i));
    }
    let bindings = Node::ALL
        .iter()
        .zip(lanes)
        .map(|(&node, lane)| {
            let anchor = match orientation {
                Orientation::Row => CellAddr::new(lane, start).unwrap(),
                Orientation::Col => CellAddr::new(start, lane).unwrap(),
            };
            Binding::anchored(node, "Model", anchor, orientation)
                .with_offset(rng.random_range(0..=3))
        })
        .collect();
    BindingSpec {
        workbook: None,
        inputs: InputsSource::Inline(inputs),
        model_years_source: None,
        bindings,
    }
}

/// Expand absolute range strings on `sheet` into single-cell references.
pub fn expand_ranges(sheet: &str, ranges: &[String]) -> Vec<String> {
    ranges
        .iter()
        .flat_map(|r| {
            gridaudit::parse_a1(r)
                .unwrap()
                .to_range(sheet)
                .cells()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
        })
        .collect()
}
