//! Lane-vector dual numbers.
//!
//! A [`Dual`] carries a value and a fixed-width vector of tangent lanes; one
//! forward pass propagates up to `W` directional derivatives at once. Each
//! lane is computed independently with a fixed operation order, so per-lane
//! results are bitwise identical no matter how directions are packed into
//! passes. Nesting (`Dual<Dual<f64, 1>, W>`) yields exact second-order
//! derivatives for the forward-over-forward path.

use crate::scalar::Scalar;
use std::cell::Cell;
use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

thread_local! {
    static UNSUPPORTED: Cell<Option<&'static str>> = const { Cell::new(None) };
}

/// Record that the current evaluation applied a primitive the dual rule
/// table does not cover. Checked by the forward driver after each pass.
fn poison(primitive: &'static str) {
    UNSUPPORTED.with(|c| {
        if c.get().is_none() {
            c.set(Some(primitive));
        }
    });
}

/// Clear the unsupported-primitive flag before an evaluation.
pub(crate) fn clear_unsupported() {
    UNSUPPORTED.with(|c| c.set(None));
}

/// The first unsupported primitive hit since the last clear, if any.
pub(crate) fn take_unsupported() -> Option<&'static str> {
    UNSUPPORTED.with(|c| c.take())
}

/// Dual number with `W` tangent lanes over a base scalar `S`.
#[derive(Debug, Clone, Copy)]
pub struct Dual<S, const W: usize> {
    pub value: S,
    pub tangents: [S; W],
}

impl<S: Scalar, const W: usize> Dual<S, W> {
    #[inline]
    pub fn constant(value: S) -> Self {
        Dual {
            value,
            tangents: [S::from_f64(0.0); W],
        }
    }

    /// A variable seeded with a single unit tangent in `lane`.
    #[inline]
    pub fn seeded(value: S, lane: usize) -> Self {
        let mut tangents = [S::from_f64(0.0); W];
        tangents[lane] = S::from_f64(1.0);
        Dual { value, tangents }
    }

    #[inline]
    fn map_tangents(self, mut f: impl FnMut(S) -> S) -> [S; W] {
        let mut out = self.tangents;
        for t in &mut out {
            *t = f(*t);
        }
        out
    }
}

impl<S: Scalar, const W: usize> Add for Dual<S, W> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        let mut tangents = self.tangents;
        for (t, r) in tangents.iter_mut().zip(rhs.tangents) {
            *t = *t + r;
        }
        Dual {
            value: self.value + rhs.value,
            tangents,
        }
    }
}

impl<S: Scalar, const W: usize> Sub for Dual<S, W> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        let mut tangents = self.tangents;
        for (t, r) in tangents.iter_mut().zip(rhs.tangents) {
            *t = *t - r;
        }
        Dual {
            value: self.value - rhs.value,
            tangents,
        }
    }
}

impl<S: Scalar, const W: usize> Mul for Dual<S, W> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut tangents = [S::from_f64(0.0); W];
        for i in 0..W {
            tangents[i] = self.value * rhs.tangents[i] + self.tangents[i] * rhs.value;
        }
        Dual {
            value: self.value * rhs.value,
            tangents,
        }
    }
}

impl<S: Scalar, const W: usize> Div for Dual<S, W> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let denom = rhs.value * rhs.value;
        let mut tangents = [S::from_f64(0.0); W];
        for i in 0..W {
            tangents[i] =
                (self.tangents[i] * rhs.value - self.value * rhs.tangents[i]) / denom;
        }
        Dual {
            value: self.value / rhs.value,
            tangents,
        }
    }
}

impl<S: Scalar, const W: usize> Neg for Dual<S, W> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual {
            value: -self.value,
            tangents: self.map_tangents(|t| -t),
        }
    }
}

impl<S: Scalar, const W: usize> Add<f64> for Dual<S, W> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: f64) -> Self {
        Dual {
            value: self.value + rhs,
            tangents: self.tangents,
        }
    }
}

impl<S: Scalar, const W: usize> Sub<f64> for Dual<S, W> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: f64) -> Self {
        Dual {
            value: self.value - rhs,
            tangents: self.tangents,
        }
    }
}

impl<S: Scalar, const W: usize> Mul<f64> for Dual<S, W> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        Dual {
            value: self.value * rhs,
            tangents: self.map_tangents(|t| t * rhs),
        }
    }
}

impl<S: Scalar, const W: usize> Div<f64> for Dual<S, W> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        Dual {
            value: self.value / rhs,
            tangents: self.map_tangents(|t| t / rhs),
        }
    }
}

impl<S: Scalar, const W: usize> PartialEq for Dual<S, W> {
    /// Comparisons use the primal value only.
    #[inline]
    fn eq(&self, other: &Self) -> bool {
        self.value.primal() == other.value.primal()
    }
}

impl<S: Scalar, const W: usize> PartialOrd for Dual<S, W> {
    /// Comparisons use the primal value only.
    #[inline]
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.primal().partial_cmp(&other.value.primal())
    }
}

impl<S: Scalar, const W: usize> Scalar for Dual<S, W> {
    #[inline]
    fn from_f64(value: f64) -> Self {
        Dual::constant(S::from_f64(value))
    }

    #[inline]
    fn primal(&self) -> f64 {
        self.value.primal()
    }

    #[inline]
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Dual::constant(self.value.powi(0));
        }
        let deriv = self.value.powi(n - 1) * (n as f64);
        Dual {
            value: self.value.powi(n),
            tangents: self.map_tangents(|t| t * deriv),
        }
    }

    #[inline]
    fn powf(self, e: f64) -> Self {
        let deriv = self.value.powf(e - 1.0) * e;
        Dual {
            value: self.value.powf(e),
            tangents: self.map_tangents(|t| t * deriv),
        }
    }

    #[inline]
    fn exp(self) -> Self {
        let value = self.value.exp();
        Dual {
            value,
            tangents: self.map_tangents(|t| t * value),
        }
    }

    #[inline]
    fn ln(self) -> Self {
        Dual {
            value: self.value.ln(),
            tangents: self.map_tangents(|t| t / self.value),
        }
    }

    #[inline]
    fn sin(self) -> Self {
        let deriv = self.value.cos();
        Dual {
            value: self.value.sin(),
            tangents: self.map_tangents(|t| t * deriv),
        }
    }

    #[inline]
    fn cos(self) -> Self {
        let deriv = -self.value.sin();
        Dual {
            value: self.value.cos(),
            tangents: self.map_tangents(|t| t * deriv),
        }
    }

    #[inline]
    fn tanh(self) -> Self {
        let value = self.value.tanh();
        let deriv = S::from_f64(1.0) - value * value;
        Dual {
            value,
            tangents: self.map_tangents(|t| t * deriv),
        }
    }

    #[inline]
    fn sqrt(self) -> Self {
        let value = self.value.sqrt();
        let deriv = S::from_f64(1.0) / (value * 2.0);
        Dual {
            value,
            tangents: self.map_tangents(|t| t * deriv),
        }
    }

    #[inline]
    fn abs(self) -> Self {
        // abs'(0) = 0: the subgradient choice is deterministic and documented.
        let p = self.value.primal();
        let sign = if p > 0.0 {
            1.0
        } else if p < 0.0 {
            -1.0
        } else {
            0.0
        };
        Dual {
            value: self.value.abs(),
            tangents: self.map_tangents(|t| t * sign),
        }
    }

    #[inline]
    fn max(self, other: Self) -> Self {
        // Ties take the first argument's value and tangent.
        if self.value.primal() >= other.value.primal() {
            self
        } else {
            other
        }
    }

    #[inline]
    fn min(self, other: Self) -> Self {
        if self.value.primal() <= other.value.primal() {
            self
        } else {
            other
        }
    }

    fn atan2(self, _other: Self) -> Self {
        // No dual rule registered for atan2.
        poison("atan2");
        Dual::constant(S::from_f64(f64::NAN))
    }
}
