//! Binding oracle nodes to workbook ranges, validating the terminal output,
//! and localizing discrepancies.
//!
//! Localization walks the calculation graph backwards: a *culprit* is a
//! bound node that fails while every nearest bound ancestor passes. Unbound
//! intermediate nodes are transparent, so blame passes through them to the
//! next bound frontier. Each culprit is then compared elementwise and its
//! mismatching index runs are mapped back to absolute cell ranges.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::compare::{isclose, runs_to_a1, CompareError, ToleranceSpec};
use crate::grid::{
    parse_a1, A1Target, CellAddr, CellRef, CellValue, Extent, GridBook, GridError, Orientation,
    RangeRef,
};
use crate::oracle::{run_model, ModelInputs, ModelRun, Node, OracleError};
use crate::series::NumericSeries;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("invalid binding spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Compare(#[from] CompareError),
    #[error("{node}: range at {at} has {found} cells, needed {needed}")]
    LengthError {
        node: String,
        at: String,
        found: usize,
        needed: usize,
    },
    #[error("type mismatch at {cell}: expected a number, found {found}")]
    TypeMismatch { cell: String, found: &'static str },
    #[error("{field}: expected a whole number, got {value}")]
    NotAnInteger { field: String, value: f64 },
    #[error("the terminal node {} must be bound", Node::TERMINAL)]
    TerminalUnbound,
}

// ---------------------------------------------------------------------------
// Binding spec
// ---------------------------------------------------------------------------

/// Where a bound series lives in the workbook.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// A defined name covering a single row or column.
    Name(String),
    /// Read from `anchor` along `orientation` until the first empty cell.
    Anchor {
        sheet: String,
        anchor: CellAddr,
        orientation: Orientation,
    },
}

/// One oracle node mapped onto a workbook range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBinding", into = "RawBinding")]
pub struct Binding {
    pub node: Node,
    pub target: Target,
    /// Leading cells to skip, e.g. pre-operations columns.
    pub offset: usize,
    /// Expected number of values; defaults to `12 * model_years`.
    pub length: Option<usize>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBinding {
    node: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sheet: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anchor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    orientation: Option<Orientation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    atol: Option<f64>,
}

impl TryFrom<RawBinding> for Binding {
    type Error = String;

    fn try_from(raw: RawBinding) -> Result<Self, String> {
        let node: Node = raw.node.parse().map_err(|e: OracleError| e.to_string())?;
        let target = match (raw.name, raw.anchor) {
            (Some(name), None) => {
                if raw.sheet.is_some() || raw.orientation.is_some() {
                    return Err(format!(
                        "binding {node}: a name binding takes no sheet or orientation"
                    ));
                }
                Target::Name(name)
            }
            (None, Some(anchor)) => {
                let a1 = parse_a1(&anchor).map_err(|e| format!("binding {node}: {e}"))?;
                let A1Target::Cell(addr) = a1.target else {
                    return Err(format!("binding {node}: anchor must be a single cell"));
                };
                let sheet = match (a1.sheet, raw.sheet) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(format!("binding {node}: anchor sheet {a:?} != sheet {b:?}"))
                    }
                    (Some(s), _) | (None, Some(s)) => s,
                    (None, None) => return Err(format!("binding {node}: anchor needs a sheet")),
                };
                Target::Anchor {
                    sheet,
                    anchor: addr,
                    orientation: raw.orientation.unwrap_or(Orientation::Row),
                }
            }
            (Some(_), Some(_)) => {
                return Err(format!(
                    "binding {node}: give either name or anchor, not both"
                ))
            }
            (None, None) => return Err(format!("binding {node}: needs a name or an anchor")),
        };
        let binding = Binding {
            node,
            target,
            offset: raw.offset.unwrap_or(0),
            length: raw.length,
            rtol: raw.rtol,
            atol: raw.atol,
        };
        binding
            .tolerance(&ToleranceSpec::default())
            .map_err(|e| format!("binding {node}: {e}"))?;
        Ok(binding)
    }
}

impl From<Binding> for RawBinding {
    fn from(b: Binding) -> Self {
        let mut raw = RawBinding {
            node: b.node.name().to_string(),
            offset: Some(b.offset),
            length: b.length,
            rtol: b.rtol,
            atol: b.atol,
            ..RawBinding::default()
        };
        match b.target {
            Target::Name(n) => raw.name = Some(n),
            Target::Anchor {
                sheet,
                anchor,
                orientation,
            } => {
                raw.sheet = Some(sheet);
                raw.anchor = Some(anchor.relative());
                raw.orientation = Some(orientation);
            }
        }
        raw
    }
}

impl Binding {
    pub fn anchored(node: Node, sheet: &str, anchor: CellAddr, orientation: Orientation) -> Self {
        Binding {
            node,
            target: Target::Anchor {
                sheet: sheet.to_string(),
                anchor,
                orientation,
            },
            offset: 0,
            length: None,
            rtol: None,
            atol: None,
        }
    }

    pub fn named(node: Node, name: &str) -> Self {
        Binding {
            node,
            target: Target::Name(name.to_string()),
            offset: 0,
            length: None,
            rtol: None,
            atol: None,
        }
    }

    pub fn with_offset(mut self, offset: usize) -> Self {
        self.offset = offset;
        self
    }

    /// Per-binding overrides on top of `default`.
    pub fn tolerance(&self, default: &ToleranceSpec) -> Result<ToleranceSpec, CompareError> {
        ToleranceSpec::new(
            self.rtol.unwrap_or(default.rtol),
            self.atol.unwrap_or(default.atol),
        )
    }
}

/// Reference to an input value inside the workbook: `name:<defined name>`
/// or `cell:<A1 reference>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputRef {
    Name(String),
    Cell(String),
}

impl InputRef {
    pub fn parse(text: &str) -> Result<Self, AuditError> {
        if let Some(n) = text.strip_prefix("name:") {
            Ok(InputRef::Name(n.to_string()))
        } else if let Some(c) = text.strip_prefix("cell:") {
            parse_a1(c)?;
            Ok(InputRef::Cell(c.to_string()))
        } else {
            Err(AuditError::Spec(format!(
                "input reference {text:?} must start with name: or cell:"
            )))
        }
    }
}

impl fmt::Display for InputRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputRef::Name(n) => write!(f, "name:{n}"),
            InputRef::Cell(c) => write!(f, "cell:{c}"),
        }
    }
}

pub const INPUT_FIELDS: [&str; 9] = [
    "plant_size",
    "derate",
    "irradiance",
    "start_month",
    "model_years",
    "ppa_price",
    "om_cost",
    "degradation_rate",
    "inflation_rate",
];

/// Where the model assumptions come from.
#[derive(Debug, Clone, PartialEq)]
pub enum InputsSource {
    Inline(ModelInputs),
    FromWorkbook(BTreeMap<String, InputRef>),
}

impl Serialize for InputsSource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            InputsSource::Inline(inputs) => inputs.serialize(s),
            InputsSource::FromWorkbook(refs) => {
                let map: BTreeMap<&str, String> = refs
                    .iter()
                    .map(|(k, v)| (k.as_str(), v.to_string()))
                    .collect();
                let mut outer = BTreeMap::new();
                outer.insert("from_workbook", map);
                outer.serialize(s)
            }
        }
    }
}

impl<'de> Deserialize<'de> for InputsSource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let value = Value::deserialize(d)?;
        match value.get("from_workbook") {
            Some(refs) => {
                if value.as_object().is_some_and(|o| o.len() != 1) {
                    return Err(D::Error::custom(
                        "from_workbook inputs cannot be mixed with inline values",
                    ));
                }
                let raw: BTreeMap<String, String> =
                    serde_json::from_value(refs.clone()).map_err(D::Error::custom)?;
                let mut refs = BTreeMap::new();
                for (field, text) in raw {
                    if !INPUT_FIELDS.contains(&field.as_str()) {
                        return Err(D::Error::custom(format!("unknown input {field:?}")));
                    }
                    let r = InputRef::parse(&text).map_err(D::Error::custom)?;
                    refs.insert(field, r);
                }
                Ok(InputsSource::FromWorkbook(refs))
            }
            None => serde_json::from_value(value)
                .map(InputsSource::Inline)
                .map_err(D::Error::custom),
        }
    }
}

/// Declarative description of how a workbook lines up with the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workbook: Option<PathBuf>,
    pub inputs: InputsSource,
    /// Optional override for where `model_years` is read from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_years_source: Option<String>,
    pub bindings: Vec<Binding>,
}

impl BindingSpec {
    pub fn from_json(text: &str) -> Result<Self, AuditError> {
        let spec: BindingSpec =
            serde_json::from_str(text).map_err(|e| AuditError::Spec(e.to_string()))?;
        spec.check()?;
        Ok(spec)
    }

    /// Load a spec file; a relative `workbook` path is taken relative to
    /// the spec file's directory.
    pub fn load(path: &Path) -> Result<Self, AuditError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AuditError::Spec(format!("cannot read {}: {e}", path.display())))?;
        let mut spec = Self::from_json(&text)?;
        if let (Some(wb), Some(dir)) = (spec.workbook.as_mut(), path.parent()) {
            if wb.is_relative() {
                *wb = dir.join(&*wb);
            }
        }
        Ok(spec)
    }

    fn check(&self) -> Result<(), AuditError> {
        let mut seen = [false; 7];
        for b in &self.bindings {
            if std::mem::replace(&mut seen[b.node.index()], true) {
                return Err(AuditError::Spec(format!("node {} is bound twice", b.node)));
            }
        }
        if let Some(src) = &self.model_years_source {
            InputRef::parse(src)?;
        }
        Ok(())
    }

    pub fn binding(&self, node: Node) -> Option<&Binding> {
        self.bindings.iter().find(|b| b.node == node)
    }

    pub fn is_bound(&self, node: Node) -> bool {
        self.binding(node).is_some()
    }
}

// ---------------------------------------------------------------------------
// Input resolution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Float,
    Integer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coerced {
    Float(f64),
    Integer(i64),
}

/// Turn a cell into a model input. Integer inputs must be whole numbers to
/// within 1e-9 and are then truncated.
pub fn coerce_input_cell(
    field: &str,
    value: &CellValue,
    kind: InputKind,
) -> Result<Coerced, AuditError> {
    let CellValue::Number(v) = *value else {
        return Err(AuditError::TypeMismatch {
            cell: field.to_string(),
            found: value.kind(),
        });
    };
    match kind {
        InputKind::Float => Ok(Coerced::Float(v)),
        InputKind::Integer => {
            if !v.is_finite() || v.fract().abs() >= 1e-9 || v.abs() > i64::MAX as f64 {
                return Err(AuditError::NotAnInteger {
                    field: field.to_string(),
                    value: v,
                });
            }
            Ok(Coerced::Integer(v.trunc() as i64))
        }
    }
}

fn input_range(book: &GridBook, r: &InputRef) -> Result<RangeRef, AuditError> {
    Ok(match r {
        InputRef::Name(n) => book.resolve_name(n)?.clone(),
        InputRef::Cell(c) => {
            let range = parse_a1(c)?.to_range(book.first_sheet().name());
            book.sheet(&range.sheet)?;
            range
        }
    })
}

fn read_scalar(
    book: &GridBook,
    field: &str,
    r: &InputRef,
    kind: InputKind,
) -> Result<Coerced, AuditError> {
    let range = input_range(book, r)?;
    if range.cell_count() != 1 {
        return Err(AuditError::Spec(format!(
            "input {field} ({r}) must be a single cell, got {range}"
        )));
    }
    let cell = range.top_left();
    let value = book.read_cell(&cell)?;
    coerce_input_cell(&cell.to_string(), value, kind).map_err(|e| match e {
        AuditError::NotAnInteger { value, .. } => AuditError::NotAnInteger {
            field: format!("{field} ({cell})"),
            value,
        },
        other => other,
    })
}

fn read_irradiance(book: &GridBook, r: &InputRef) -> Result<Vec<f64>, AuditError> {
    let range = input_range(book, r)?;
    let series = if range.cell_count() == 1 {
        book.read_series(&range.top_left(), Orientation::Col, Extent::Expand)?
    } else {
        if range.orientation().is_none() {
            return Err(AuditError::Spec(format!(
                "irradiance range {range} must be a single row or column"
            )));
        }
        book.read_range(&range)?
    };
    Ok(series.into_vec())
}

fn to_u32(field: &str, c: Coerced) -> Result<u32, AuditError> {
    match c {
        Coerced::Integer(i) => u32::try_from(i).map_err(|_| {
            AuditError::Oracle(OracleError::InvalidInput {
                field: "integer input",
                reason: format!("{field} = {i} is out of range"),
            })
        }),
        Coerced::Float(v) => Err(AuditError::NotAnInteger {
            field: field.to_string(),
            value: v,
        }),
    }
}

fn to_f64(c: Coerced) -> f64 {
    match c {
        Coerced::Float(v) => v,
        Coerced::Integer(i) => i as f64,
    }
}

/// Materialize the model inputs named by `spec`, reading from `book` where
/// the spec points into the workbook.
pub fn resolve_inputs(book: &GridBook, spec: &BindingSpec) -> Result<ModelInputs, AuditError> {
    let mut inputs = match &spec.inputs {
        InputsSource::Inline(i) => i.clone(),
        InputsSource::FromWorkbook(refs) => {
            let get = |field: &str| {
                refs.get(field).ok_or_else(|| {
                    AuditError::Spec(format!("from_workbook is missing input {field:?}"))
                })
            };
            let float = |field: &str| -> Result<f64, AuditError> {
                Ok(to_f64(read_scalar(
                    book,
                    field,
                    get(field)?,
                    InputKind::Float,
                )?))
            };
            let int = |field: &str| -> Result<u32, AuditError> {
                to_u32(
                    field,
                    read_scalar(book, field, get(field)?, InputKind::Integer)?,
                )
            };
            let model_years = match (&spec.model_years_source, refs.get("model_years")) {
                (Some(_), None) => 0, // filled in below
                _ => int("model_years")?,
            };
            ModelInputs {
                plant_size: float("plant_size")?,
                derate: float("derate")?,
                irradiance: read_irradiance(book, get("irradiance")?)?,
                start_month: int("start_month")?,
                model_years,
                ppa_price: float("ppa_price")?,
                om_cost: float("om_cost")?,
                degradation_rate: float("degradation_rate")?,
                inflation_rate: float("inflation_rate")?,
            }
        }
    };
    if let Some(src) = &spec.model_years_source {
        let r = InputRef::parse(src)?;
        inputs.model_years = to_u32(
            "model_years",
            read_scalar(book, "model_years", &r, InputKind::Integer)?,
        )?;
    }
    inputs.validate()?;
    Ok(inputs)
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

/// Resolved location of a bound series: index `i` lives at `anchor` moved
/// `offset + i` cells along `orientation`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub sheet: String,
    pub anchor: CellAddr,
    pub orientation: Orientation,
    pub offset: usize,
}

impl Placement {
    pub fn cell(&self, index: usize) -> Option<CellRef> {
        self.anchor
            .step(self.orientation, self.offset + index)
            .map(|a| CellRef::new(self.sheet.clone(), a))
    }
}

pub fn placement(book: &GridBook, binding: &Binding) -> Result<Placement, AuditError> {
    let (sheet, anchor, orientation) = match &binding.target {
        Target::Name(name) => {
            let range = book.resolve_name(name)?;
            let orientation = range.orientation().ok_or_else(|| {
                AuditError::Spec(format!(
                    "name {name:?} ({range}) spans several rows and columns"
                ))
            })?;
            (range.sheet.clone(), range.start, orientation)
        }
        Target::Anchor {
            sheet,
            anchor,
            orientation,
        } => (sheet.clone(), *anchor, *orientation),
    };
    Ok(Placement {
        sheet,
        anchor,
        orientation,
        offset: binding.offset,
    })
}

/// Read a bound range, drop `offset` leading cells and keep exactly
/// `length` values.
pub fn extract_bound_series(
    book: &GridBook,
    binding: &Binding,
    length: usize,
) -> Result<NumericSeries, AuditError> {
    let (full, at) = match &binding.target {
        Target::Name(name) => {
            let range = book.resolve_name(name)?;
            if range.orientation().is_none() {
                return Err(AuditError::Spec(format!(
                    "name {name:?} ({range}) spans several rows and columns"
                )));
            }
            (book.read_range(range), range.to_string())
        }
        Target::Anchor {
            sheet,
            anchor,
            orientation,
        } => {
            let cell = CellRef::new(sheet.clone(), *anchor);
            (
                book.read_series(&cell, *orientation, Extent::Expand),
                cell.to_string(),
            )
        }
    };
    let full = full.map_err(|e| match e {
        GridError::TypeMismatch { cell, found } => AuditError::TypeMismatch { cell, found },
        other => other.into(),
    })?;
    let needed = binding.offset + length;
    if full.len() < needed {
        return Err(AuditError::LengthError {
            node: binding.node.to_string(),
            at,
            found: full.len(),
            needed,
        });
    }
    Ok(NumericSeries::new(
        full.values()[binding.offset..needed].to_vec(),
    ))
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeResult {
    pub node: Node,
    pub bound: bool,
    /// `None` when the node was not compared.
    pub pass: Option<bool>,
    pub mismatch_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Culprit {
    pub node: Node,
    pub sheet: String,
    pub error_ranges: Vec<String>,
    pub correct_ranges: Vec<String>,
    /// Some ancestor of this node was not bound, so the fault may lie
    /// further upstream.
    pub upstream_unverified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub verdict: Verdict,
    pub nodes: Vec<NodeResult>,
    pub culprits: Vec<Culprit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AuditReport {
    fn failed(err: AuditError) -> Self {
        AuditReport {
            verdict: Verdict::Error,
            nodes: Vec::new(),
            culprits: Vec::new(),
            error: Some(err.to_string()),
        }
    }

    pub fn node(&self, node: Node) -> Option<&NodeResult> {
        self.nodes.iter().find(|n| n.node == node)
    }

    pub fn culprit_nodes(&self) -> Vec<Node> {
        self.culprits.iter().map(|c| c.node).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Human-readable rendering: the per-node table, then culprit ranges.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let verdict = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Error => "ERROR",
        };
        let _ = writeln!(out, "verdict: {verdict}");
        if let Some(e) = &self.error {
            let _ = writeln!(out, "error: {e}");
        }
        if !self.nodes.is_empty() {
            let _ = writeln!(out, "node         bound   result mismatch");
            for n in &self.nodes {
                let result = match n.pass {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "-",
                };
                let mismatch = n
                    .mismatch_fraction
                    .map_or_else(|| "-".to_string(), |f| format!("{:.2}%", f * 100.0));
                let _ = writeln!(
                    out,
                    "{:<12} {:<7} {:<6} {}",
                    n.node.name(),
                    if n.bound { "yes" } else { "no" },
                    result,
                    mismatch
                );
            }
        }
        for c in &self.culprits {
            let _ = write!(
                out,
                "culprit: {}  error: {}",
                c.node,
                c.error_ranges.join(",")
            );
            if !c.correct_ranges.is_empty() {
                let _ = write!(out, "  correct: {}", c.correct_ranges.join(","));
            }
            if c.upstream_unverified {
                out.push_str("  (upstream unverified)");
            }
            out.push('\n');
        }
        out
    }
}

/// Tolerance used when a binding does not override it.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AuditOptions {
    pub tolerance: ToleranceSpec,
}

struct Checked {
    series: NumericSeries,
    tol: ToleranceSpec,
    pass: bool,
    mismatch_fraction: f64,
}

fn check_node(
    book: &GridBook,
    binding: &Binding,
    run: &ModelRun,
    opts: &AuditOptions,
) -> Result<Checked, AuditError> {
    let oracle = run.get(binding.node);
    if let Some(len) = binding.length {
        if len != oracle.len() {
            return Err(AuditError::Spec(format!(
                "binding {} declares length {len} but the model has {} months",
                binding.node,
                oracle.len()
            )));
        }
    }
    let tol = binding.tolerance(&opts.tolerance)?;
    let series = extract_bound_series(book, binding, oracle.len())?;
    let cmp = isclose(&series, oracle, &tol)?;
    Ok(Checked {
        pass: cmp.all_close(),
        mismatch_fraction: cmp.mismatch_fraction(),
        series,
        tol,
    })
}

fn prepare(book: &GridBook, spec: &BindingSpec) -> Result<ModelRun, AuditError> {
    if !spec.is_bound(Node::TERMINAL) {
        return Err(AuditError::TerminalUnbound);
    }
    spec.check()?;
    let inputs = resolve_inputs(book, spec)?;
    Ok(run_model(&inputs)?)
}

/// Compare only the terminal node.
pub fn validate(book: &GridBook, spec: &BindingSpec, opts: &AuditOptions) -> AuditReport {
    try_validate(book, spec, opts).unwrap_or_else(AuditReport::failed)
}

pub fn try_validate(
    book: &GridBook,
    spec: &BindingSpec,
    opts: &AuditOptions,
) -> Result<AuditReport, AuditError> {
    let run = prepare(book, spec)?;
    let binding = spec.binding(Node::TERMINAL).expect("checked in prepare");
    let checked = check_node(book, binding, &run, opts)?;
    Ok(AuditReport {
        verdict: if checked.pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        nodes: vec![NodeResult {
            node: Node::TERMINAL,
            bound: true,
            pass: Some(checked.pass),
            mismatch_fraction: Some(checked.mismatch_fraction),
        }],
        culprits: Vec::new(),
        error: None,
    })
}

/// Compare every bound node and localize culprits.
pub fn audit(book: &GridBook, spec: &BindingSpec, opts: &AuditOptions) -> AuditReport {
    try_audit(book, spec, opts).unwrap_or_else(AuditReport::failed)
}

pub fn try_audit(
    book: &GridBook,
    spec: &BindingSpec,
    opts: &AuditOptions,
) -> Result<AuditReport, AuditError> {
    let run = prepare(book, spec)?;

    let mut checked: [Option<Checked>; 7] = Default::default();
    for node in Node::ALL {
        if let Some(binding) = spec.binding(node) {
            checked[node.index()] = Some(check_node(book, binding, &run, opts)?);
        }
    }

    let nodes = Node::ALL
        .iter()
        .map(|&node| {
            let c = checked[node.index()].as_ref();
            NodeResult {
                node,
                bound: c.is_some(),
                pass: c.map(|c| c.pass),
                mismatch_fraction: c.map(|c| c.mismatch_fraction),
            }
        })
        .collect();

    let passes = |n: Node| checked[n.index()].as_ref().map(|c| c.pass);
    let mut culprits = Vec::new();
    for node in Node::ALL {
        let Some(c) = checked[node.index()].as_ref() else {
            continue;
        };
        if c.pass {
            continue;
        }
        let frontier = bound_frontier(node, &|n| passes(n).is_some());
        if !frontier.iter().all(|&n| passes(n) == Some(true)) {
            continue;
        }
        let binding = spec.binding(node).expect("checked nodes are bound");
        let place = placement(book, binding)?;
        let cmp = isclose(&c.series, run.get(node), &c.tol)?;
        culprits.push(Culprit {
            node,
            sheet: place.sheet.clone(),
            error_ranges: runs_to_a1(
                place.anchor,
                place.orientation,
                place.offset,
                &cmp.mismatch_runs,
            )?,
            correct_ranges: runs_to_a1(
                place.anchor,
                place.orientation,
                place.offset,
                &cmp.match_runs,
            )?,
            upstream_unverified: node.ancestors().iter().any(|&a| passes(a).is_none()),
        });
    }

    let verdict = if passes(Node::TERMINAL) == Some(true) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(AuditReport {
        verdict,
        nodes,
        culprits,
        error: None,
    })
}

/// Nearest bound ancestors of `node`, looking through unbound ones.
fn bound_frontier(node: Node, is_bound: &dyn Fn(Node) -> bool) -> Vec<Node> {
    let mut out = Vec::new();
    let mut stack: Vec<Node> = node.parents().collect();
    let mut seen = [false; 7];
    while let Some(n) = stack.pop() {
        if std::mem::replace(&mut seen[n.index()], true) {
            continue;
        }
        if is_bound(n) {
            out.push(n);
        } else {
            stack.extend(n.parents());
        }
    }
    out.sort();
    out
}
