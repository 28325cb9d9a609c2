//! Two-sided norm estimates.

use serde::{Serialize, Serializer};

use crate::matrix::ComplexMatrix;

/// What attains a lower bound, so it can be replayed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// An input element (coefficients per basis vector) whose norm ratio is the bound.
    Element { coeffs: Vec<ComplexMatrix> },
    /// A norming functional given by its coefficients per basis vector.
    Functional { coeffs: Vec<ComplexMatrix> },
    /// Contractions or unit-ball weights used by a supremum formula.
    Weights { left: ComplexMatrix, right: ComplexMatrix },
    /// A contraction placed between the two legs of a tensor.
    Multiplier { w: ComplexMatrix },
    /// The bound is an exact value with nothing to replay.
    Exact,
}

/// `lower <= true value <= upper`; `upper` may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormBracket {
    pub lower: f64,
    #[serde(serialize_with = "serialize_bound")]
    pub upper: f64,
    pub lower_witness: Option<Witness>,
    pub upper_certificate: String,
}

impl NormBracket {
    pub fn exact(value: f64, why: impl Into<String>) -> Self {
        Self { lower: value, upper: value, lower_witness: Some(Witness::Exact), upper_certificate: why.into() }
    }

    pub fn zero() -> Self {
        Self::exact(0.0, "zero element")
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// `(upper - lower) / lower`, or infinity if `lower` vanishes with a positive gap.
    pub fn relative_width(&self) -> f64 {
        if self.upper == self.lower {
            0.0
        } else if self.lower > 0.0 {
            (self.upper - self.lower) / self.lower
        } else {
            f64::INFINITY
        }
    }

    pub fn contains(&self, x: f64, rel_tol: f64) -> bool {
        let slack = rel_tol * x.abs().max(self.upper.min(1e300).abs());
        x >= self.lower - slack && x <= self.upper + slack
    }

    pub fn overlaps(&self, other: &NormBracket, rel_tol: f64) -> bool {
        let scale = self.lower.max(other.lower).max(1e-300);
        self.lower <= other.upper + rel_tol * scale && other.lower <= self.upper + rel_tol * scale
    }

    /// Multiply both ends by a nonnegative constant.
    pub fn scaled(mut self, c: f64) -> Self {
        self.lower *= c;
        self.upper *= c;
        self
    }
}

pub(crate) fn serialize_bound<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_none()
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}
