//! Build a consistent synthetic workbook, inject each kind of fault, and
//! check that the audit finds exactly the tampered cells.
//!
//! cargo run --example fault_lab

use gridaudit::audit::InputsSource;
use gridaudit::faultlab::{build_consistent_gridbook, diff_cells, inject, FaultKind, FaultSpec};
use gridaudit::grid::{CellAddr, Orientation};
use gridaudit::{audit, AuditOptions, Binding, BindingSpec, ModelInputs, Node, ToleranceSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inputs = ModelInputs {
        plant_size: 2500.0,
        derate: 0.82,
        irradiance: vec![
            80.0, 95.0, 140.0, 170.0, 200.0, 215.0, 220.0, 200.0, 160.0, 120.0, 85.0, 70.0,
        ],
        start_month: 7,
        model_years: 3,
        ppa_price: 0.11,
        om_cost: 0.015,
        degradation_rate: 0.006,
        inflation_rate: 0.025,
    };
    // one column per node, two pre-operations cells above month 1
    let bindings = Node::ALL
        .iter()
        .enumerate()
        .map(|(i, &node)| {
            Binding::anchored(
                node,
                "Calc",
                CellAddr::new(5, 3 + i as u32).unwrap(),
                Orientation::Col,
            )
            .with_offset(2)
        })
        .collect();
    let layout = BindingSpec {
        workbook: None,
        inputs: InputsSource::Inline(inputs.clone()),
        model_years_source: None,
        bindings,
    };
    let book = build_consistent_gridbook(&inputs, &layout)?;
    let tol = ToleranceSpec::default();

    let faults = [
        FaultSpec::new(FaultKind::StaleFill, Node::NomGen).seed(1),
        FaultSpec::new(FaultKind::ConstantOverwrite, Node::InfIndex).indices(10, 14),
        FaultSpec::new(FaultKind::ScaleError, Node::EbitdaR)
            .parameter(1000.0)
            .seed(3),
    ];
    for fault in faults {
        let inj = inject(&book, &fault, &layout, &tol)?;
        let report = audit(&inj.book, &layout, &AuditOptions::default());
        let culprit = &report.culprits[0];
        let exact = diff_cells(&book, &inj.book) == inj.record.tampered_cells
            && culprit.error_ranges == inj.record.error_ranges;
        println!(
            "{:?} on {}: injected {:?}, audit blames {} at {:?} ({})",
            fault.kind,
            fault.node,
            inj.record.error_ranges,
            culprit.node,
            culprit.error_ranges,
            if exact { "exact" } else { "MISMATCH" }
        );
    }
    Ok(())
}
