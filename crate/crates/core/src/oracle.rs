//! Trusted re-implementation of a monthly solar PPA EBITDA model.
//!
//! Each calculation step is a small pure function over [`NumericSeries`],
//! and [`run_model`] wires them into a fixed seven-node calculation graph:
//!
//! ```text
//! ops_months ──► deg_index ──┐
//!      │                     ▼
//!      │      nom_gen ──► net_gen ──► ebitda_r
//!      │                     │
//!      └──► inf_index ───────┴──────► ebitda_n
//! ```
//!
//! Degradation and inflation share one index formula, `(1 + rate)^(m / 12)`,
//! over operating months `m = 1, 2, ...`, so both compound monthly and the
//! first operating month already carries one month of each.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{pow_broadcast, ArithOp, NumericSeries, SeriesError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid input {field}: {reason}")]
    InvalidInput { field: &'static str, reason: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("computing {node}: {source}")]
    Node {
        node: Node,
        #[source]
        source: Box<OracleError>,
    },
}

/// A named node of the calculation graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    OpsMonths,
    NomGen,
    DegIndex,
    NetGen,
    InfIndex,
    EbitdaR,
    EbitdaN,
}

impl Node {
    /// All nodes in evaluation order (a topological order of [`DAG_EDGES`]).
    pub const ALL: [Node; 7] = [
        Node::OpsMonths,
        Node::NomGen,
        Node::DegIndex,
        Node::NetGen,
        Node::InfIndex,
        Node::EbitdaR,
        Node::EbitdaN,
    ];

    pub const TERMINAL: Node = Node::EbitdaN;

    pub fn name(self) -> &'static str {
        match self {
            Node::OpsMonths => "ops_months",
            Node::NomGen => "nom_gen",
            Node::DegIndex => "deg_index",
            Node::NetGen => "net_gen",
            Node::InfIndex => "inf_index",
            Node::EbitdaR => "ebitda_r",
            Node::EbitdaN => "ebitda_n",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Direct upstream nodes.
    pub fn parents(self) -> impl Iterator<Item = Node> {
        DAG_EDGES
            .iter()
            .filter(move |(_, to)| *to == self)
            .map(|(from, _)| *from)
    }

    pub fn children(self) -> impl Iterator<Item = Node> {
        DAG_EDGES
            .iter()
            .filter(move |(from, _)| *from == self)
            .map(|(_, to)| *to)
    }

    /// All transitive upstream nodes, in evaluation order.
    pub fn ancestors(self) -> Vec<Node> {
        let mut seen = [false; 7];
        let mut stack: Vec<Node> = self.parents().collect();
        while let Some(n) = stack.pop() {
            if !seen[n.index()] {
                seen[n.index()] = true;
                stack.extend(n.parents());
            }
        }
        Node::ALL.into_iter().filter(|n| seen[n.index()]).collect()
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Node {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Node::ALL
            .into_iter()
            .find(|n| n.name() == s)
            .ok_or_else(|| OracleError::InvalidInput {
                field: "node",
                reason: format!(
                    "unknown node {s:?}; expected one of {}",
                    Node::ALL.map(Node::name).join(", ")
                ),
            })
    }
}

/// `(from, to)` dependency edges of the model.
pub const DAG_EDGES: [(Node, Node); 7] = [
    (Node::NomGen, Node::NetGen),
    (Node::DegIndex, Node::NetGen),
    (Node::NetGen, Node::EbitdaR),
    (Node::NetGen, Node::EbitdaN),
    (Node::InfIndex, Node::EbitdaN),
    (Node::OpsMonths, Node::DegIndex),
    (Node::OpsMonths, Node::InfIndex),
];

/// Model assumptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelInputs {
    /// Nameplate capacity, kWp.
    pub plant_size: f64,
    /// DC to AC conversion factor in (0, 1].
    pub derate: f64,
    /// Monthly average irradiance, kWh/m², January first.
    pub irradiance: Vec<f64>,
    /// Calendar month operations begin, 1-12.
    pub start_month: u32,
    pub model_years: u32,
    /// Sale price, $/kWh.
    pub ppa_price: f64,
    /// Operations and maintenance cost, $/kWh.
    pub om_cost: f64,
    pub degradation_rate: f64,
    pub inflation_rate: f64,
}

impl ModelInputs {
    pub fn months(&self) -> usize {
        12 * self.model_years as usize
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        fn bad(field: &'static str, reason: impl Into<String>) -> OracleError {
            OracleError::InvalidInput {
                field,
                reason: reason.into(),
            }
        }
        let finite = [
            ("plant_size", self.plant_size),
            ("derate", self.derate),
            ("ppa_price", self.ppa_price),
            ("om_cost", self.om_cost),
            ("degradation_rate", self.degradation_rate),
            ("inflation_rate", self.inflation_rate),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(bad(field, format!("must be finite, got {v}")));
            }
        }
        if self.plant_size < 0.0 {
            return Err(bad("plant_size", "must be >= 0"));
        }
        if !(self.derate > 0.0 && self.derate <= 1.0) {
            return Err(bad(
                "derate",
                format!("must be in (0, 1], got {}", self.derate),
            ));
        }
        if self.irradiance.len() != 12 {
            return Err(bad(
                "irradiance",
                format!(
                    "needs exactly 12 monthly values, got {}",
                    self.irradiance.len()
                ),
            ));
        }
        if let Some(v) = self
            .irradiance
            .iter()
            .find(|v| !(v.is_finite() && **v >= 0.0))
        {
            return Err(bad(
                "irradiance",
                format!("values must be finite and >= 0, got {v}"),
            ));
        }
        if !(1..=12).contains(&self.start_month) {
            return Err(bad(
                "start_month",
                format!("must be 1-12, got {}", self.start_month),
            ));
        }
        if self.model_years < 1 {
            return Err(bad("model_years", "must be >= 1"));
        }
        if self.ppa_price < 0.0 {
            return Err(bad("ppa_price", "must be >= 0"));
        }
        if self.om_cost < 0.0 {
            return Err(bad("om_cost", "must be >= 0"));
        }
        if self.degradation_rate <= -1.0 {
            return Err(bad("degradation_rate", "must be > -1"));
        }
        if self.inflation_rate <= -1.0 {
            return Err(bad("inflation_rate", "must be > -1"));
        }
        Ok(())
    }
}

/// Monthly AC generation before degradation, kWh.
///
/// The 12-month irradiance profile is rotated so the start month comes
/// first, then repeated for every model year.
pub fn nom_generation(
    plant_size: f64,
    derate: f64,
    irradiance: &NumericSeries,
    start_month: u32,
    model_years: u32,
) -> Result<NumericSeries, OracleError> {
    if !(1..=12).contains(&start_month) {
        return Err(OracleError::InvalidInput {
            field: "start_month",
            reason: format!("must be 1-12, got {start_month}"),
        });
    }
    let start = i64::from(start_month) - 1;
    let first_year = irradiance.roll(-start);
    let model_irradiance = first_year.tile(model_years as usize)?;
    Ok(model_irradiance.zip_arith(plant_size * derate, ArithOp::Mul)?)
}

/// `(1 + rate)^(m / 12)` for every operating month `m`.
pub fn discount_index(ops_months: &NumericSeries, rate: f64) -> Result<NumericSeries, OracleError> {
    if rate.is_nan() || rate <= -1.0 {
        return Err(OracleError::Domain(format!(
            "rate must be > -1, got {rate}"
        )));
    }
    let years = ops_months.zip_arith(12.0, ArithOp::Div)?;
    Ok(pow_broadcast(1.0 + rate, &years)?)
}

pub fn net_generation(
    nominal_gen: &NumericSeries,
    degradation: &NumericSeries,
) -> Result<NumericSeries, OracleError> {
    Ok(nominal_gen.zip_arith(degradation, ArithOp::Div)?)
}

/// Revenue minus expenses, each computed as its own product.
pub fn real_ebitda(
    net_gen: &NumericSeries,
    ppa_price: f64,
    om_cost: f64,
) -> Result<NumericSeries, OracleError> {
    let revenue = net_gen.zip_arith(ppa_price, ArithOp::Mul)?;
    let expenses = net_gen.zip_arith(om_cost, ArithOp::Mul)?;
    Ok(revenue.zip_arith(&expenses, ArithOp::Sub)?)
}

pub fn nominal_ebitda(
    net_gen: &NumericSeries,
    ppa_price: f64,
    om_cost: f64,
    inflation: &NumericSeries,
) -> Result<NumericSeries, OracleError> {
    let revenue = net_gen
        .zip_arith(ppa_price, ArithOp::Mul)?
        .zip_arith(inflation, ArithOp::Mul)?;
    let expenses = net_gen
        .zip_arith(om_cost, ArithOp::Mul)?
        .zip_arith(inflation, ArithOp::Mul)?;
    Ok(revenue.zip_arith(&expenses, ArithOp::Sub)?)
}

/// All node values from one evaluation of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRun {
    values: [NumericSeries; 7],
}

impl ModelRun {
    pub fn get(&self, node: Node) -> &NumericSeries {
        &self.values[node.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Node, &NumericSeries)> {
        Node::ALL.into_iter().map(move |n| (n, self.get(n)))
    }

    pub fn dag_edges(&self) -> &'static [(Node, Node)] {
        &DAG_EDGES
    }
}

pub fn run_model(inputs: &ModelInputs) -> Result<ModelRun, OracleError> {
    inputs.validate()?;
    evaluate(inputs)
}

/// Evaluate without the input range checks. Used to produce "stale"
/// series from deliberately out-of-spec assumptions.
pub(crate) fn evaluate(inputs: &ModelInputs) -> Result<ModelRun, OracleError> {
    let at = |node: Node| {
        move |e: OracleError| OracleError::Node {
            node,
            source: Box::new(e),
        }
    };

    let ops_months = NumericSeries::range_from_one(inputs.months());
    let irradiance = NumericSeries::new(inputs.irradiance.clone());
    let nom_gen = nom_generation(
        inputs.plant_size,
        inputs.derate,
        &irradiance,
        inputs.start_month,
        inputs.model_years,
    )
    .map_err(at(Node::NomGen))?;
    let deg_index =
        discount_index(&ops_months, inputs.degradation_rate).map_err(at(Node::DegIndex))?;
    let net_gen = net_generation(&nom_gen, &deg_index).map_err(at(Node::NetGen))?;
    let inf_index =
        discount_index(&ops_months, inputs.inflation_rate).map_err(at(Node::InfIndex))?;
    let ebitda_r =
        real_ebitda(&net_gen, inputs.ppa_price, inputs.om_cost).map_err(at(Node::EbitdaR))?;
    let ebitda_n = nominal_ebitda(&net_gen, inputs.ppa_price, inputs.om_cost, &inf_index)
        .map_err(at(Node::EbitdaN))?;

    Ok(ModelRun {
        values: [
            ops_months, nom_gen, deg_index, net_gen, inf_index, ebitda_r, ebitda_n,
        ],
    })
}
