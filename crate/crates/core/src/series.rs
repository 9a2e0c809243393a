//! A deliberately small 1-D numeric kernel.
//!
//! Only the operations the model formulas need are provided, so the whole
//! arithmetic surface of the oracle can be reviewed in one sitting. There is
//! no implicit length coercion anywhere: mismatched lengths are errors.

use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("division by zero at index {0}")]
    DivisionByZero(usize),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Ordered, fixed-length sequence of `f64`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NumericSeries(Vec<f64>);

/// Elementwise binary operation for [`zip_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            ArithOp::Add => a + b,
            ArithOp::Sub => a - b,
            ArithOp::Mul => a * b,
            ArithOp::Div => a / b,
        }
    }
}

/// Right-hand side of [`zip_arith`]: another series or a broadcast scalar.
#[derive(Debug, Clone, Copy)]
pub enum Operand<'a> {
    Series(&'a NumericSeries),
    Scalar(f64),
}

impl<'a> From<&'a NumericSeries> for Operand<'a> {
    fn from(s: &'a NumericSeries) -> Self {
        Operand::Series(s)
    }
}

impl From<f64> for Operand<'_> {
    fn from(v: f64) -> Self {
        Operand::Scalar(v)
    }
}

impl NumericSeries {
    pub fn new(values: Vec<f64>) -> Self {
        NumericSeries(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Cyclic shift: `out[i] = self[(i - shift) mod n]`.
    ///
    /// A negative shift moves elements toward the front, so `roll(-1)` of
    /// `[1, 2, 3]` is `[2, 3, 1]`. The empty series rolls to itself.
    pub fn roll(&self, shift: i64) -> NumericSeries {
        let n = self.0.len();
        if n == 0 {
            return self.clone();
        }
        // rem_euclid keeps the split point in [0, n) for any sign of shift.
        let k = shift.rem_euclid(n as i64) as usize;
        let mut out = Vec::with_capacity(n);
        out.extend_from_slice(&self.0[n - k..]);
        out.extend_from_slice(&self.0[..n - k]);
        NumericSeries(out)
    }

    /// Repeat the series `reps` times end to end.
    pub fn tile(&self, reps: usize) -> Result<NumericSeries, SeriesError> {
        if reps < 1 {
            return Err(SeriesError::Domain(format!(
                "tile repetitions must be >= 1, got {reps}"
            )));
        }
        Ok(NumericSeries(self.0.repeat(reps)))
    }

    /// `[1, 2, ..., n]`.
    pub fn range_from_one(n: usize) -> NumericSeries {
        NumericSeries((1..=n).map(|i| i as f64).collect())
    }

    pub fn zip_arith<'a>(
        &self,
        rhs: impl Into<Operand<'a>>,
        op: ArithOp,
    ) -> Result<NumericSeries, SeriesError> {
        zip_arith(self, rhs.into(), op)
    }
}

/// Elementwise arithmetic with scalar broadcast.
///
/// Division checks every divisor up front and reports the first zero.
pub fn zip_arith(
    a: &NumericSeries,
    b: Operand<'_>,
    op: ArithOp,
) -> Result<NumericSeries, SeriesError> {
    match b {
        Operand::Scalar(s) => {
            if op == ArithOp::Div && s == 0.0 {
                if a.is_empty() {
                    return Ok(NumericSeries::default());
                }
                return Err(SeriesError::DivisionByZero(0));
            }
            Ok(NumericSeries(a.0.iter().map(|&x| op.apply(x, s)).collect()))
        }
        Operand::Series(b) => {
            if a.len() != b.len() {
                return Err(SeriesError::LengthMismatch(a.len(), b.len()));
            }
            if op == ArithOp::Div {
                if let Some(i) = b.0.iter().position(|&v| v == 0.0) {
                    return Err(SeriesError::DivisionByZero(i));
                }
            }
            Ok(NumericSeries(
                a.0.iter()
                    .zip(&b.0)
                    .map(|(&x, &y)| op.apply(x, y))
                    .collect(),
            ))
        }
    }
}

/// `out[i] = base.powf(exponents[i])`, for a strictly positive base.
pub fn pow_broadcast(base: f64, exponents: &NumericSeries) -> Result<NumericSeries, SeriesError> {
    if base.is_nan() || base <= 0.0 {
        return Err(SeriesError::Domain(format!(
            "power base must be > 0, got {base}"
        )));
    }
    Ok(NumericSeries(
        exponents.0.iter().map(|&e| base.powf(e)).collect(),
    ))
}

impl From<Vec<f64>> for NumericSeries {
    fn from(v: Vec<f64>) -> Self {
        NumericSeries(v)
    }
}

impl FromIterator<f64> for NumericSeries {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        NumericSeries(iter.into_iter().collect())
    }
}

impl Index<usize> for NumericSeries {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<'a> IntoIterator for &'a NumericSeries {
    type Item = &'a f64;
    type IntoIter = std::slice::Iter<'a, f64>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for NumericSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("]")
    }
}
