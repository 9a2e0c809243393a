//! Audit spreadsheet models against a trusted re-implementation.
//!
//! The crate reads workbooks (`.xlsx` or gridbook-JSON) into a [`grid::GridBook`],
//! evaluates a monthly solar EBITDA model in [`oracle`], compares workbook
//! ranges with the oracle under a tolerance in [`compare`], and walks the
//! calculation graph in [`audit`] to report which node, and which cells,
//! went wrong. [`faultlab`] generates tampered books for testing audits.

pub mod audit;
pub mod cli;
pub mod compare;
pub mod faultlab;
pub mod grid;
pub mod oracle;
pub mod series;

pub use audit::{audit, validate, AuditOptions, AuditReport, Binding, BindingSpec, Verdict};
pub use compare::{isclose, ToleranceSpec};
pub use grid::{open_workbook, parse_a1, GridBook};
pub use oracle::{run_model, ModelInputs, Node};
pub use series::NumericSeries;
