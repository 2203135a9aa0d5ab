//! The scalar abstraction differentiable functions are written against.
//!
//! A function is differentiated by evaluating it on a non-`f64` scalar type:
//! dual numbers (forward mode), tape variables (reverse mode) or dependency
//! tracers (sparsity detection). All of those implement [`Scalar`], so a
//! function written once against this trait works with every backend.
//!
//! Comparisons (`PartialOrd`/`PartialEq`) always act on the primal value.
//! Branching on a comparison is therefore well-defined for every scalar
//! type, with the usual taping caveat that a recorded tape freezes the
//! branch taken at recording time.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic and primitive operations required of a differentiation scalar.
///
/// The primitive set matches the forward backend's rule table: `+ - * /`,
/// powers, `exp`, `ln`, `sin`, `cos`, `tanh`, `sqrt`, `abs`, `max`/`min`,
/// primal-valued comparisons, and reductions built from `+`. `atan2` is part
/// of the trait but not every backend registers a rule for it; applying it
/// under a backend without a rule reports `UnsupportedPrimitive`.
pub trait Scalar:
    Copy
    + PartialEq
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Lift a constant. Constants carry no derivative information.
    fn from_f64(value: f64) -> Self;

    /// The underlying primal value (innermost value for nested scalars).
    fn primal(&self) -> f64;

    fn powi(self, n: i32) -> Self;
    fn powf(self, e: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;

    /// `max` with a deterministic tie rule: on equality the first argument
    /// is taken (relevant for derivative routing).
    fn max(self, other: Self) -> Self;
    /// `min` with the same first-argument tie rule.
    fn min(self, other: Self) -> Self;

    /// Two-argument arctangent. Registered by the reverse-mode and
    /// finite-difference backends; the forward dual backend has no rule
    /// for it.
    fn atan2(self, other: Self) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(value: f64) -> Self {
        value
    }

    #[inline]
    fn primal(&self) -> f64 {
        *self
    }

    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }

    #[inline]
    fn powf(self, e: f64) -> Self {
        f64::powf(self, e)
    }

    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }

    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }

    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }

    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }

    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }

    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }

    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }

    #[inline]
    fn max(self, other: Self) -> Self {
        // Not f64::max: the tie/NaN rule must match the AD backends bitwise.
        if self >= other {
            self
        } else {
            other
        }
    }

    #[inline]
    fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    #[inline]
    fn atan2(self, other: Self) -> Self {
        f64::atan2(self, other)
    }
}

/// Left-fold sum with a fixed accumulation order, usable on any scalar.
#[inline]
pub fn sum<S: Scalar>(values: &[S]) -> S {
    let mut acc = S::from_f64(0.0);
    for &v in values {
        acc = acc + v;
    }
    acc
}
