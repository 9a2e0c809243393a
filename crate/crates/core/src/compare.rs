//! Tolerance comparison and conversion of mismatch indices to cell ranges.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{range_address, CellAddr, GridError, Orientation};
use crate::series::NumericSeries;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompareError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
    #[error("domain error: {0}")]
    Domain(String),
}

impl From<GridError> for CompareError {
    fn from(e: GridError) -> Self {
        CompareError::Domain(e.to_string())
    }
}

/// `|a - b| <= atol + rtol * |b|`, with `b` the reference side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        ToleranceSpec {
            rtol: 1e-5,
            atol: 1e-8,
        }
    }
}

impl ToleranceSpec {
    pub fn new(rtol: f64, atol: f64) -> Result<Self, CompareError> {
        let tol = ToleranceSpec { rtol, atol };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<(), CompareError> {
        for (name, v) in [("rtol", self.rtol), ("atol", self.atol)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CompareError::InvalidTolerance(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Scalar closeness. NaN is never close; an infinity is close only to
    /// the identical infinity.
    #[inline]
    pub fn close(&self, a: f64, b: f64) -> bool {
        if a.is_infinite() || b.is_infinite() {
            return a == b;
        }
        (a - b).abs() <= self.atol + self.rtol * b.abs()
    }
}

/// Inclusive index interval `[start, end]`.
pub type Run = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonResult {
    pub mask: Vec<bool>,
    pub mismatch_indices: Vec<usize>,
    pub match_runs: Vec<Run>,
    pub mismatch_runs: Vec<Run>,
}

impl ComparisonResult {
    pub fn from_mask(mask: Vec<bool>) -> Self {
        let mismatch_indices = mask
            .iter()
            .enumerate()
            .filter(|(_, ok)| !**ok)
            .map(|(i, _)| i)
            .collect();
        ComparisonResult {
            match_runs: runs_of(&mask, true),
            mismatch_runs: runs_of(&mask, false),
            mismatch_indices,
            mask,
        }
    }

    pub fn all_close(&self) -> bool {
        self.mismatch_indices.is_empty()
    }

    pub fn mismatch_fraction(&self) -> f64 {
        if self.mask.is_empty() {
            0.0
        } else {
            self.mismatch_indices.len() as f64 / self.mask.len() as f64
        }
    }
}

/// Maximal blocks of consecutive positions where `mask == value`.
fn runs_of(mask: &[bool], value: bool) -> Vec<Run> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &m) in mask.iter().enumerate() {
        match (m == value, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, mask.len() - 1));
    }
    runs
}

/// Elementwise closeness of `actual` against the `reference` series.
pub fn isclose(
    actual: &NumericSeries,
    reference: &NumericSeries,
    tol: &ToleranceSpec,
) -> Result<ComparisonResult, CompareError> {
    if actual.len() != reference.len() {
        return Err(CompareError::LengthMismatch(actual.len(), reference.len()));
    }
    let mask = actual
        .iter()
        .zip(reference)
        .map(|(&a, &b)| tol.close(a, b))
        .collect();
    Ok(ComparisonResult::from_mask(mask))
}

pub fn allclose(
    actual: &NumericSeries,
    reference: &NumericSeries,
    tol: &ToleranceSpec,
) -> Result<bool, CompareError> {
    if actual.len() != reference.len() {
        return Err(CompareError::LengthMismatch(actual.len(), reference.len()));
    }
    Ok(actual.iter().zip(reference).all(|(&a, &b)| tol.close(a, b)))
}

pub fn mismatch_runs(result: &ComparisonResult) -> Vec<Run> {
    result.mismatch_runs.clone()
}

/// Render index runs as absolute A1 ranges.
///
/// Index `i` lives at `anchor` moved `offset + i` cells along `orientation`.
/// Single-cell runs render as `$G$41`, longer runs as `$H$41:$BN$41`.
pub fn runs_to_a1(
    anchor: CellAddr,
    orientation: Orientation,
    offset: usize,
    runs: &[Run],
) -> Result<Vec<String>, CompareError> {
    let locate = |i: usize| {
        offset
            .checked_add(i)
            .and_then(|steps| anchor.step(orientation, steps))
            .ok_or_else(|| {
                CompareError::Domain(format!(
                    "index {i} (offset {offset}) from {anchor} runs past the grid edge"
                ))
            })
    };
    runs.iter()
        .map(|&(start, end)| {
            if end < start {
                return Err(CompareError::Domain(format!(
                    "inverted run ({start}, {end})"
                )));
            }
            Ok(range_address(locate(start)?, locate(end)?))
        })
        .collect()
}
