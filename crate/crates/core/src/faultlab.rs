//! Deterministic fault injection into consistent gridbooks.
//!
//! [`build_consistent_gridbook`] writes the oracle's own values at every
//! bound location, so the result passes validation by construction.
//! [`inject`] then tampers with one node's cells and returns a record of
//! exactly which cells changed, which is what an audit must recover.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{placement, AuditError, BindingSpec, InputRef, InputsSource, Placement, Target};
use crate::compare::{runs_to_a1, CompareError, ComparisonResult, ToleranceSpec};
use crate::grid::{
    parse_a1, CellAddr, CellRef, CellValue, GridBook, GridError, Orientation, RangeRef,
};
use crate::oracle::{evaluate, run_model, ModelInputs, ModelRun, Node, OracleError};

#[derive(Debug, Error)]
pub enum FaultError {
    #[error("bindings overlap: {0}")]
    Overlap(String),
    #[error("node {0} is not bound in the layout")]
    Unbound(Node),
    #[error("invalid fault: {0}")]
    InvalidFault(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Compare(#[from] CompareError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// Cells recomputed from an outdated assumption and pasted across.
    StaleFill,
    /// Hard-coded value typed over formulas.
    ConstantOverwrite,
    /// Values off by a constant factor, e.g. a units slip.
    ScaleError,
}

impl FaultKind {
    pub const ALL: [FaultKind; 3] = [
        FaultKind::StaleFill,
        FaultKind::ConstantOverwrite,
        FaultKind::ScaleError,
    ];
}

/// Which input a stale fill was computed from: `input * scale + shift`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub input: String,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub shift: f64,
}

fn one() -> f64 {
    1.0
}

impl Perturbation {
    /// Default stale assumption for each node.
    pub fn default_for(node: Node) -> Option<Self> {
        let (input, scale, shift) = match node {
            Node::OpsMonths => return None,
            Node::NomGen | Node::NetGen | Node::EbitdaR | Node::EbitdaN => ("derate", 1.05, 0.0),
            Node::DegIndex => ("degradation_rate", 1.0, 0.01),
            Node::InfIndex => ("inflation_rate", 1.0, 0.01),
        };
        Some(Perturbation {
            input: input.to_string(),
            scale,
            shift,
        })
    }

    pub fn apply(&self, inputs: &ModelInputs) -> Result<ModelInputs, FaultError> {
        let mut out = inputs.clone();
        let field = match self.input.as_str() {
            "plant_size" => &mut out.plant_size,
            "derate" => &mut out.derate,
            "ppa_price" => &mut out.ppa_price,
            "om_cost" => &mut out.om_cost,
            "degradation_rate" => &mut out.degradation_rate,
            "inflation_rate" => &mut out.inflation_rate,
            other => {
                return Err(FaultError::InvalidFault(format!(
                    "cannot perturb input {other:?}"
                )))
            }
        };
        *field = *field * self.scale + self.shift;
        Ok(out)
    }
}

/// One fault to inject. `indices` is an inclusive range over the node's
/// series; when absent it is drawn from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub node: Node,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<(usize, usize)>,
    /// Overwrite value or scale factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Stale-fill assumption; defaults per node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
}

impl FaultSpec {
    pub fn new(kind: FaultKind, node: Node) -> Self {
        FaultSpec {
            kind,
            node,
            indices: None,
            parameter: None,
            seed: 0,
            perturbation: None,
        }
    }

    pub fn indices(mut self, start: usize, end: usize) -> Self {
        self.indices = Some((start, end));
        self
    }

    pub fn parameter(mut self, p: f64) -> Self {
        self.parameter = Some(p);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn from_json(text: &str) -> Result<Self, FaultError> {
        serde_json::from_str(text).map_err(|e| FaultError::InvalidFault(e.to_string()))
    }

    fn resolve_indices(&self, n: usize) -> Result<(usize, usize), FaultError> {
        if n == 0 {
            return Err(FaultError::InvalidFault(format!(
                "{} has no values",
                self.node
            )));
        }
        if let Some((start, end)) = self.indices {
            if start > end || end >= n {
                return Err(FaultError::InvalidFault(format!(
                    "indices {start}..={end} outside 0..{n} for {}",
                    self.node
                )));
            }
            if self.kind == FaultKind::StaleFill && start == 0 {
                return Err(FaultError::InvalidFault(
                    "stale_fill keeps the first cell intact; start at index 1 or later".into(),
                ));
            }
            return Ok((start, end));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let draw = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| -> usize {
            rng.random_range(lo as u64..=hi as u64) as usize
        };
        match self.kind {
            FaultKind::StaleFill => {
                if n < 2 {
                    return Err(FaultError::InvalidFault(
                        "stale_fill needs at least two values".into(),
                    ));
                }
                Ok((draw(&mut rng, 1, n - 1), n - 1))
            }
            _ => {
                let a = draw(&mut rng, 0, n - 1);
                let b = draw(&mut rng, 0, n - 1);
                Ok((a.min(b), a.max(b)))
            }
        }
    }
}

/// What [`inject`] did, in enough detail to check an audit against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultRecord {
    pub fault: FaultSpec,
    pub node: Node,
    pub sheet: String,
    /// Resolved inclusive index range.
    pub indices: (usize, usize),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    /// Every changed cell, in series order.
    pub tampered_cells: Vec<String>,
    /// The changed cells as maximal absolute ranges.
    pub error_ranges: Vec<String>,
}

impl FaultRecord {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("record serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub book: GridBook,
    pub record: FaultRecord,
}

fn resolve_model(book: &GridBook, layout: &BindingSpec) -> Result<ModelInputs, FaultError> {
    Ok(crate::audit::resolve_inputs(book, layout)?)
}

/// Tamper with one bound node. The input book is left untouched and the
/// returned book differs from it only at the targeted cells.
pub fn inject(
    book: &GridBook,
    fault: &FaultSpec,
    layout: &BindingSpec,
    tol: &ToleranceSpec,
) -> Result<Injection, FaultError> {
    let binding = layout
        .binding(fault.node)
        .ok_or(FaultError::Unbound(fault.node))?;
    let inputs = resolve_model(book, layout)?;
    let run = run_model(&inputs)?;
    let truth = run.get(fault.node);
    let n = truth.len();
    let (start, end) = fault.resolve_indices(n)?;
    let tol = binding.tolerance(tol)?;

    let (parameter, perturbation, stale) = match fault.kind {
        FaultKind::StaleFill => {
            if fault.parameter.is_some() {
                return Err(FaultError::InvalidFault(
                    "stale_fill takes a perturbation, not a parameter".into(),
                ));
            }
            let p = match &fault.perturbation {
                Some(p) => p.clone(),
                None => Perturbation::default_for(fault.node).ok_or_else(|| {
                    FaultError::InvalidFault(format!(
                        "{} does not depend on any input; stale_fill cannot apply",
                        fault.node
                    ))
                })?,
            };
            let stale_run: ModelRun = evaluate(&p.apply(&inputs)?)?;
            (None, Some(p), Some(stale_run.get(fault.node).clone()))
        }
        FaultKind::ConstantOverwrite => (Some(fault.parameter.unwrap_or(0.0)), None, None),
        FaultKind::ScaleError => {
            let factor = fault.parameter.unwrap_or(1.1);
            if factor == 1.0 {
                return Err(FaultError::InvalidFault(
                    "scale factor must not be 1".into(),
                ));
            }
            (Some(factor), None, None)
        }
    };
    if fault.kind != FaultKind::StaleFill && fault.perturbation.is_some() {
        return Err(FaultError::InvalidFault(format!(
            "{:?} takes no perturbation",
            fault.kind
        )));
    }

    let place = placement(book, binding)?;
    let mut builder = book.to_builder();
    let mut tampered_cells = Vec::with_capacity(end - start + 1);
    for i in start..=end {
        let new = match (fault.kind, parameter, &stale) {
            (FaultKind::StaleFill, _, Some(s)) => s[i],
            (FaultKind::ConstantOverwrite, Some(v), _) => v,
            (FaultKind::ScaleError, Some(f), _) => truth[i] * f,
            _ => unreachable!("parameters resolved above"),
        };
        if !new.is_finite() || tol.close(new, truth[i]) {
            return Err(FaultError::InvalidFault(format!(
                "value {new} at index {i} of {} is within tolerance of the true {}",
                fault.node, truth[i]
            )));
        }
        let cell = cell_at(&place, i)?;
        builder.set(&cell, CellValue::Number(new));
        tampered_cells.push(cell.to_string());
    }

    let mask = (0..n).map(|i| i < start || i > end).collect();
    let runs = ComparisonResult::from_mask(mask).mismatch_runs;
    let record = FaultRecord {
        fault: fault.clone(),
        node: fault.node,
        sheet: place.sheet.clone(),
        indices: (start, end),
        parameter,
        perturbation,
        tampered_cells,
        error_ranges: runs_to_a1(place.anchor, place.orientation, place.offset, &runs)?,
    };
    Ok(Injection {
        book: builder.build()?,
        record,
    })
}

fn cell_at(place: &Placement, i: usize) -> Result<CellRef, FaultError> {
    place.cell(i).ok_or_else(|| {
        FaultError::Grid(GridError::Domain(format!(
            "index {i} from {} runs past the grid edge",
            place.anchor
        )))
    })
}

/// Cells whose values differ between two books, in sheet then row-major
/// order.
pub fn diff_cells(a: &GridBook, b: &GridBook) -> Vec<String> {
    let mut out = Vec::new();
    let names: BTreeSet<&str> = a.sheet_names().chain(b.sheet_names()).collect();
    let empty = CellValue::Empty;
    for name in names {
        let (sa, sb) = (a.sheet(name).ok(), b.sheet(name).ok());
        let addrs: BTreeSet<(u32, u32)> = sa
            .into_iter()
            .chain(sb)
            .flat_map(|s| s.cells().map(|(addr, _)| (addr.row, addr.col)))
            .collect();
        for (row, col) in addrs {
            let addr = CellAddr { row, col };
            let va = sa.map_or(&empty, |s| s.get(addr));
            let vb = sb.map_or(&empty, |s| s.get(addr));
            if !same_cell(va, vb) {
                out.push(CellRef::new(name, addr).to_string());
            }
        }
    }
    out
}

fn same_cell(a: &CellValue, b: &CellValue) -> bool {
    match (a, b) {
        (CellValue::Number(x), CellValue::Number(y)) => x.to_bits() == y.to_bits(),
        _ => a == b,
    }
}

struct Footprint {
    label: String,
    range: RangeRef,
}

fn overlaps(a: &RangeRef, b: &RangeRef) -> bool {
    a.sheet == b.sheet
        && a.start.row <= b.end.row
        && b.start.row <= a.end.row
        && a.start.col <= b.end.col
        && b.start.col <= a.end.col
}

fn footprint_end(
    anchor: CellAddr,
    orientation: Orientation,
    cells: usize,
) -> Result<CellAddr, FaultError> {
    anchor
        .step(orientation, cells.saturating_sub(1))
        .ok_or_else(|| {
            FaultError::Grid(GridError::Domain(format!(
                "{cells} cells from {anchor} run past the grid edge"
            )))
        })
}

/// Write the oracle's values, and any cell-referenced inputs, at the
/// locations named in `layout`. Leading offset cells are filled with 0.
pub fn build_consistent_gridbook(
    inputs: &ModelInputs,
    layout: &BindingSpec,
) -> Result<GridBook, FaultError> {
    let run = run_model(inputs)?;
    let n = inputs.months();
    let mut footprints: Vec<Footprint> = Vec::new();
    let mut builder = GridBook::builder();

    for binding in &layout.bindings {
        let Target::Anchor {
            sheet,
            anchor,
            orientation,
        } = &binding.target
        else {
            return Err(FaultError::Unsupported(format!(
                "{} is bound by name; synthetic books need anchored bindings",
                binding.node
            )));
        };
        if let Some(len) = binding.length {
            if len != n {
                return Err(FaultError::Audit(AuditError::Spec(format!(
                    "binding {} declares length {len} but the model has {n} months",
                    binding.node
                ))));
            }
        }
        let end = footprint_end(*anchor, *orientation, binding.offset + n)?;
        footprints.push(Footprint {
            label: binding.node.to_string(),
            range: RangeRef::new(sheet.clone(), *anchor, end),
        });
        builder.sheet(sheet);
        let values = run.get(binding.node);
        let lead = std::iter::repeat_n(0.0, binding.offset);
        for (i, v) in lead.chain(values.iter().copied()).enumerate() {
            let addr = anchor
                .step(*orientation, i)
                .expect("checked by footprint_end");
            builder.set(&CellRef::new(sheet.clone(), addr), CellValue::Number(v));
        }
    }

    if let InputsSource::FromWorkbook(refs) = &layout.inputs {
        let mut all = refs.clone();
        if let Some(src) = &layout.model_years_source {
            all.insert("model_years".into(), InputRef::parse(src)?);
        }
        let default_sheet = footprints
            .first()
            .map(|f| f.range.sheet.clone())
            .ok_or_else(|| FaultError::Unsupported("layout binds no nodes".into()))?;
        for (field, r) in &all {
            let InputRef::Cell(text) = r else {
                return Err(FaultError::Unsupported(format!(
                    "input {field} is read from a defined name; synthetic books need cell: references"
                )));
            };
            let range = parse_a1(text)?.to_range(&default_sheet);
            let values = input_values(inputs, field);
            let range = if range.cell_count() == 1 && values.len() > 1 {
                let end = footprint_end(range.start, Orientation::Col, values.len())?;
                RangeRef::new(range.sheet.clone(), range.start, end)
            } else {
                range
            };
            if range.cell_count() != values.len() {
                return Err(FaultError::Unsupported(format!(
                    "input {field} has {} values but {range} holds {}",
                    values.len(),
                    range.cell_count()
                )));
            }
            builder.sheet(&range.sheet);
            for (cell, v) in range.cells().zip(values) {
                builder.set(&cell, CellValue::Number(v));
            }
            footprints.push(Footprint {
                label: format!("input {field}"),
                range,
            });
        }
    }

    for (i, a) in footprints.iter().enumerate() {
        for b in &footprints[i + 1..] {
            if overlaps(&a.range, &b.range) {
                return Err(FaultError::Overlap(format!(
                    "{} at {} collides with {} at {}",
                    a.label, a.range, b.label, b.range
                )));
            }
        }
    }
    Ok(builder.build()?)
}

fn input_values(inputs: &ModelInputs, field: &str) -> Vec<f64> {
    match field {
        "plant_size" => vec![inputs.plant_size],
        "derate" => vec![inputs.derate],
        "irradiance" => inputs.irradiance.clone(),
        "start_month" => vec![f64::from(inputs.start_month)],
        "model_years" => vec![f64::from(inputs.model_years)],
        "ppa_price" => vec![inputs.ppa_price],
        "om_cost" => vec![inputs.om_cost],
        "degradation_rate" => vec![inputs.degradation_rate],
        "inflation_rate" => vec![inputs.inflation_rate],
        _ => unreachable!("input names are checked when the spec is parsed"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::{audit, extract_bound_series, validate, AuditOptions, Binding, Verdict};

    fn inputs() -> ModelInputs {
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

    fn layout() -> BindingSpec {
        let rows = [
            (Node::OpsMonths, 13),
            (Node::NomGen, 41),
            (Node::DegIndex, 42),
            (Node::NetGen, 43),
            (Node::InfIndex, 45),
            (Node::EbitdaR, 51),
            (Node::EbitdaN, 56),
        ];
        BindingSpec {
            workbook: None,
            inputs: InputsSource::Inline(inputs()),
            model_years_source: None,
            bindings: rows
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

    #[test]
    fn consistent_book_round_trips() {
        let spec = layout();
        let book = build_consistent_gridbook(&inputs(), &spec).unwrap();
        let run = run_model(&inputs()).unwrap();
        for b in &spec.bindings {
            let s = extract_bound_series(&book, b, 60).unwrap();
            assert_eq!(&s, run.get(b.node));
        }
        let opts = AuditOptions::default();
        assert_eq!(validate(&book, &spec, &opts).verdict, Verdict::Pass);
        let report = audit(&book, &spec, &opts);
        assert_eq!(report.verdict, Verdict::Pass);
        assert!(report.culprits.is_empty());
    }

    #[test]
    fn overlapping_bindings_are_rejected() {
        let mut spec = layout();
        spec.bindings[1] = Binding::anchored(
            Node::NomGen,
            "Model",
            CellAddr::new(1, 10).unwrap(),
            Orientation::Col,
        );
        // the column G..BN row 13 footprint of ops_months covers J13
        match build_consistent_gridbook(&inputs(), &spec) {
            Err(FaultError::Overlap(msg)) => {
                assert!(
                    msg.contains("ops_months") && msg.contains("nom_gen"),
                    "{msg}"
                );
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stale_fill_matches_the_worked_scenario() {
        let mut spec = layout();
        spec.bindings[1] = Binding::anchored(
            Node::NomGen,
            "Model",
            CellAddr::new(40, 7).unwrap(),
            Orientation::Row,
        );
        spec.bindings[3] = Binding::anchored(
            Node::NetGen,
            "Model",
            CellAddr::new(41, 7).unwrap(),
            Orientation::Row,
        );
        let book = build_consistent_gridbook(&inputs(), &spec).unwrap();
        let fault = FaultSpec::new(FaultKind::StaleFill, Node::NetGen).indices(1, 59);
        let inj = inject(&book, &fault, &spec, &ToleranceSpec::default()).unwrap();
        assert_eq!(inj.record.error_ranges, vec!["$H$41:$BN$41"]);
        assert_eq!(
            inj.record.perturbation,
            Some(Perturbation {
                input: "derate".into(),
                scale: 1.05,
                shift: 0.0
            })
        );

        let report = audit(&inj.book, &spec, &AuditOptions::default());
        assert_eq!(report.culprit_nodes(), vec![Node::NetGen]);
        assert_eq!(report.culprits[0].error_ranges, vec!["$H$41:$BN$41"]);
        assert_eq!(report.culprits[0].correct_ranges, vec!["$G$41"]);
        assert_eq!(diff_cells(&book, &inj.book), inj.record.tampered_cells);
        // the original is untouched
        assert_eq!(
            validate(&book, &spec, &AuditOptions::default()).verdict,
            Verdict::Pass
        );
    }

    #[test]
    fn middle_window_overwrite() {
        let spec = layout();
        let book = build_consistent_gridbook(&inputs(), &spec).unwrap();
        let fault = FaultSpec::new(FaultKind::ConstantOverwrite, Node::EbitdaR).indices(10, 14);
        let inj = inject(&book, &fault, &spec, &ToleranceSpec::default()).unwrap();
        assert_eq!(inj.record.error_ranges, vec!["$Q$51:$U$51"]);
        assert_eq!(inj.record.tampered_cells.len(), 5);
        let report = audit(&inj.book, &spec, &AuditOptions::default());
        assert_eq!(report.culprit_nodes(), vec![Node::EbitdaR]);
        assert_eq!(report.culprits[0].error_ranges, inj.record.error_ranges);
        assert_eq!(
            report.culprits[0].correct_ranges,
            vec!["$G$51:$P$51", "$V$51:$BN$51"]
        );
    }

    #[test]
    fn invalid_faults() {
        let spec = layout();
        let book = build_consistent_gridbook(&inputs(), &spec).unwrap();
        let tol = ToleranceSpec::default();
        let bad = [
            FaultSpec::new(FaultKind::ScaleError, Node::NetGen).parameter(1.0 + 1e-9),
            FaultSpec::new(FaultKind::ScaleError, Node::NetGen).parameter(1.0),
            FaultSpec::new(FaultKind::ConstantOverwrite, Node::NetGen).indices(50, 60),
            FaultSpec::new(FaultKind::StaleFill, Node::NetGen).indices(0, 5),
            FaultSpec::new(FaultKind::StaleFill, Node::OpsMonths),
            FaultSpec::new(FaultKind::ConstantOverwrite, Node::OpsMonths)
                .indices(3, 3)
                .parameter(4.0),
        ];
        for f in bad {
            assert!(
                matches!(
                    inject(&book, &f, &spec, &tol),
                    Err(FaultError::InvalidFault(_))
                ),
                "{f:?}"
            );
        }
        let mut partial = layout();
        partial.bindings.retain(|b| b.node != Node::DegIndex);
        assert!(matches!(
            inject(
                &book,
                &FaultSpec::new(FaultKind::ScaleError, Node::DegIndex),
                &partial,
                &tol
            ),
            Err(FaultError::Unbound(Node::DegIndex))
        ));
    }

    #[test]
    fn seeded_placement_is_reproducible() {
        let spec = layout();
        let book = build_consistent_gridbook(&inputs(), &spec).unwrap();
        let tol = ToleranceSpec::default();
        for kind in FaultKind::ALL {
            let f = FaultSpec::new(kind, Node::NetGen).seed(42);
            let a = inject(&book, &f, &spec, &tol).unwrap();
            let b = inject(&book, &f, &spec, &tol).unwrap();
            assert_eq!(a, b);
            let (s, e) = a.record.indices;
            assert!(s <= e && e < 60);
            if kind == FaultKind::StaleFill {
                assert!(s >= 1);
                assert_eq!(e, 59);
            }
        }
    }

    #[test]
    fn fault_spec_json() {
        let f = FaultSpec::from_json(
            r#"{"kind": "constant_overwrite", "node": "ebitda_r", "indices": [10, 14], "parameter": 0, "seed": 3}"#,
        )
        .unwrap();
        assert_eq!(f.indices, Some((10, 14)));
        assert!(FaultSpec::from_json(r#"{"kind": "typo", "node": "net_gen"}"#).is_err());
        assert!(FaultSpec::from_json(r#"{"kind": "scale_error", "node": "revenue"}"#).is_err());
    }
}
