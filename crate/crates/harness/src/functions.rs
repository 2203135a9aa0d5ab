//! The built-in scenario functions.
//!
//! Every function is written against the scalar trait once and reused by all
//! backends; each also has plain-`f64` closed forms used as references.

use adkit_core::{EvalContexts, Function, Scalar};

/// `f(x) = sum x_i^2`
pub struct SquaredNorm;

impl Function for SquaredNorm {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        let mut acc = x[0] * x[0];
        for &v in &x[1..] {
            acc = acc + v * v;
        }
        y[0] = acc;
    }
}

/// `f(x)_i = x_{i-1} - 2 x_i + x_{i+1}` with truncated boundaries.
pub struct TridiagonalStencil;

impl Function for TridiagonalStencil {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        let n = x.len();
        for i in 0..n {
            let mut acc = x[i] * -2.0;
            if i > 0 {
                acc = acc + x[i - 1];
            }
            if i + 1 < n {
                acc = acc + x[i + 1];
            }
            y[i] = acc;
        }
    }
}

/// Apply the stencil's Jacobian (it is constant) to a vector.
pub fn stencil_apply(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let mut acc = -2.0 * v[i];
            if i > 0 {
                acc += v[i - 1];
            }
            if i + 1 < n {
                acc += v[i + 1];
            }
            acc
        })
        .collect()
}

/// `f(x) = x^T A x` with the matrix supplied as a `Constant` context
/// (row-major, length n*n).
pub struct QuadraticFormConstant;

impl Function for QuadraticFormConstant {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], ctx: &mut EvalContexts<'_, S>) {
        let n = x.len();
        let a = ctx.constant(0);
        let mut acc = S::from_f64(0.0);
        for i in 0..n {
            for j in 0..n {
                let c = a[i * n + j];
                if c != 0.0 {
                    acc = acc + x[i] * x[j] * c;
                }
            }
        }
        y[0] = acc;
    }
}

/// The same quadratic form with the matrix baked into the function, for the
/// inlined-versus-context comparison.
pub struct QuadraticFormInlined {
    pub a: Vec<f64>,
    pub n: usize,
}

impl Function for QuadraticFormInlined {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        let n = self.n;
        let mut acc = S::from_f64(0.0);
        for i in 0..n {
            for j in 0..n {
                let c = self.a[i * n + j];
                if c != 0.0 {
                    acc = acc + x[i] * x[j] * c;
                }
            }
        }
        y[0] = acc;
    }
}

/// `(A + A^T) x` for a row-major matrix.
pub fn quadratic_form_gradient(a: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| (0..n).map(|j| (a[i * n + j] + a[j * n + i]) * x[j]).sum())
        .collect()
}

/// In-place smoothed-square stencil using a cache scratch buffer:
/// `cache_i = x_i^2`, `y_i = cache_{i-1} + cache_i + cache_{i+1}`.
pub struct CacheStencil;

impl Function for CacheStencil {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], ctx: &mut EvalContexts<'_, S>) {
        let n = x.len();
        let cache = ctx.cache(0);
        for (slot, &v) in cache.iter_mut().zip(x) {
            *slot = v * v;
        }
        let cache = ctx.cache(0);
        for i in 0..n {
            let mut acc = cache[i];
            if i > 0 {
                acc = acc + cache[i - 1];
            }
            if i + 1 < n {
                acc = acc + cache[i + 1];
            }
            y[i] = acc;
        }
    }
}

/// Jacobian of the cache stencil: band of `2 x_j` entries.
pub fn cache_stencil_jacobian(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut jac = vec![0.0; n * n];
    for i in 0..n {
        for j in i.saturating_sub(1)..(i + 2).min(n) {
            jac[i * n + j] = 2.0 * x[j];
        }
    }
    jac
}

/// Per-element branch: `x_i^2` above the threshold, `2 sin x_i` below.
/// Demonstrates the tape-reuse caveat: a recorded tape is only valid while
/// every input stays on its recorded side of the branch.
pub struct Branchy;

pub const BRANCH_THRESHOLD: f64 = 1.0;

impl Function for Branchy {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        let threshold = S::from_f64(BRANCH_THRESHOLD);
        let mut acc = S::from_f64(0.0);
        for &v in x {
            acc = acc + if v > threshold { v * v } else { v.sin() * 2.0 };
        }
        y[0] = acc;
    }
}

pub fn branchy_gradient(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            if v > BRANCH_THRESHOLD {
                2.0 * v
            } else {
                2.0 * v.cos()
            }
        })
        .collect()
}

/// `f(x) = sum_i atan2(x_i, 1 + i)`: atan2 is registered by the tape and
/// finite-difference backends but not by the dual rule table.
pub struct Atan2Field;

impl Function for Atan2Field {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        let mut acc = S::from_f64(0.0);
        for (i, &v) in x.iter().enumerate() {
            let c = 1.0 + i as f64;
            acc = acc + v.atan2(S::from_f64(c));
        }
        y[0] = acc;
    }
}

pub fn atan2_field_gradient(x: &[f64]) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = 1.0 + i as f64;
            c / (v * v + c * c)
        })
        .collect()
}

/// `f(x) = sin(3x) e^{x/2}`, the scalar chain for derivative scenarios.
pub struct SineExp;

impl Function for SineExp {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        y[0] = (x[0] * 3.0).sin() * (x[0] * 0.5).exp();
    }
}

pub fn sine_exp_derivative(x: f64) -> f64 {
    (3.0 * (3.0 * x).cos() + 0.5 * (3.0 * x).sin()) * (0.5 * x).exp()
}

pub fn sine_exp_second_derivative(x: f64) -> f64 {
    // d/dx of (3 cos(3x) + 0.5 sin(3x)) e^{x/2}
    ((-9.0 + 0.25) * (3.0 * x).sin() + 3.0 * (3.0 * x).cos()) * (0.5 * x).exp()
}

/// `f(x) = sum_i x_i x_{i+1}`, whose Hessian is the off-diagonal
/// tridiagonal matrix of ones.
pub struct PairwiseProducts;

impl Function for PairwiseProducts {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        let mut acc = x[0] * x[1];
        for i in 1..x.len() - 1 {
            acc = acc + x[i] * x[i + 1];
        }
        y[0] = acc;
    }
}

pub fn pairwise_products_hessian(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n - 1 {
        h[i * n + i + 1] = 1.0;
        h[(i + 1) * n + i] = 1.0;
    }
    h
}

/// Deterministic "random-looking" inputs without an RNG dependency at the
/// call site: `x_i = sin(seed + 0.7 i)`.
pub fn wavy_input(n: usize, seed: f64) -> Vec<f64> {
    (0..n).map(|i| (seed + 0.7 * i as f64).sin()).collect()
}
