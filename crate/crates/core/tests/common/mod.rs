//! Shared test functions and independent numerical oracles.
//!
//! The oracles here (central differences on closed-form values) deliberately
//! avoid the library's own finite-difference backend so they stay
//! independent of the implementation paths they check.

#![allow(dead_code)]

use adkit_core::{EvalContexts, Function, Matrix, Scalar};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Polynomial map `f_j(x) = c_j + sum_i a_ji x_i + sum_{i,k} b_jik x_i x_k`
/// with a closed-form Jacobian.
#[derive(Clone)]
pub struct PolyMap {
    pub n: usize,
    pub m: usize,
    constant: Vec<f64>,
    linear: Vec<f64>, // m * n
    quad: Vec<f64>,   // m * n * n
}

impl PolyMap {
    pub fn random(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Self {
        PolyMap {
            n,
            m,
            constant: (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            linear: (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            quad: (0..m * n * n).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        }
    }

    /// A plain linear map `x -> A x` (no quadratic part).
    pub fn linear_map(a: &Matrix) -> Self {
        PolyMap {
            n: a.ncols(),
            m: a.nrows(),
            constant: vec![0.0; a.nrows()],
            linear: a.as_slice().to_vec(),
            quad: vec![0.0; a.nrows() * a.ncols() * a.ncols()],
        }
    }

    pub fn eval_f64(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        let mut ctx = EvalContexts::<f64>::empty();
        Function::eval(self, x, &mut y, &mut ctx);
        y
    }

    /// Closed-form Jacobian: `J_ji = a_ji + sum_k (b_jik + b_jki) x_k`.
    pub fn jacobian_at(&self, x: &[f64]) -> Matrix {
        let (n, m) = (self.n, self.m);
        let mut jac = Matrix::zeros(m, n);
        for j in 0..m {
            for i in 0..n {
                let mut v = self.linear[j * n + i];
                for k in 0..n {
                    v += (self.quad[j * n * n + i * n + k] + self.quad[j * n * n + k * n + i])
                        * x[k];
                }
                jac.set(j, i, v);
            }
        }
        jac
    }
}

impl Function for PolyMap {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        let n = self.n;
        for j in 0..self.m {
            let mut acc = S::from_f64(self.constant[j]);
            for i in 0..n {
                acc = acc + x[i] * self.linear[j * n + i];
            }
            for i in 0..n {
                for k in 0..n {
                    let c = self.quad[j * n * n + i * n + k];
                    if c != 0.0 {
                        acc = acc + x[i] * x[k] * c;
                    }
                }
            }
            y[j] = acc;
        }
    }
}

/// Scalar quartic field `f(x) = sum_t (w_t . x + c_t)^4` with closed-form
/// gradient and Hessian.
#[derive(Clone)]
pub struct QuarticField {
    pub n: usize,
    terms: Vec<(Vec<f64>, f64)>,
}

impl QuarticField {
    pub fn random(rng: &mut ChaCha8Rng, n: usize, terms: usize) -> Self {
        QuarticField {
            n,
            terms: (0..terms)
                .map(|_| {
                    (
                        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        rng.gen_range(-0.5..0.5),
                    )
                })
                .collect(),
        }
    }

    /// Banded variant: term `t` couples only coordinates `t` and `t + 1`,
    /// giving a tridiagonal Hessian pattern.
    pub fn banded(n: usize) -> Self {
        QuarticField {
            n,
            terms: (0..n - 1)
                .map(|t| {
                    let mut w = vec![0.0; n];
                    w[t] = 1.0;
                    w[t + 1] = 0.5;
                    (w, 0.1 * t as f64 + 0.3)
                })
                .collect(),
        }
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(w, c)| {
                let z: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + c;
                z.powi(4)
            })
            .sum()
    }

    pub fn gradient_at(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for (w, c) in &self.terms {
            let z: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + c;
            let s = 4.0 * z.powi(3);
            for (gi, wi) in g.iter_mut().zip(w) {
                *gi += s * wi;
            }
        }
        g
    }

    pub fn hessian_at(&self, x: &[f64]) -> Matrix {
        let mut h = Matrix::zeros(self.n, self.n);
        for (w, c) in &self.terms {
            let z: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + c;
            let s = 12.0 * z.powi(2);
            for i in 0..self.n {
                for j in 0..self.n {
                    h.set(i, j, h.get(i, j) + s * w[i] * w[j]);
                }
            }
        }
        h
    }
}

impl Function for QuarticField {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        let mut acc = S::from_f64(0.0);
        for (w, c) in &self.terms {
            let mut z = S::from_f64(*c);
            for (xi, wi) in x.iter().zip(w) {
                if *wi != 0.0 {
                    z = z + *xi * *wi;
                }
            }
            acc = acc + z.powi(4);
        }
        y[0] = acc;
    }
}

/// Scalar quadratic form `x^T A x` with the matrix baked into the function.
#[derive(Clone)]
pub struct QuadraticForm {
    pub a: Matrix,
}

impl QuadraticForm {
    pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Self {
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.gen_range(-1.0..1.0);
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        QuadraticForm { a }
    }

    /// `(A + A^T) x`
    pub fn gradient_at(&self, x: &[f64]) -> Vec<f64> {
        let n = self.a.nrows();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (self.a.get(i, j) + self.a.get(j, i)) * x[j])
                    .sum()
            })
            .collect()
    }
}

impl Function for QuadraticForm {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        let n = self.a.nrows();
        let mut acc = S::from_f64(0.0);
        for i in 0..n {
            for j in 0..n {
                acc = acc + x[i] * x[j] * self.a.get(i, j);
            }
        }
        y[0] = acc;
    }
}

/// `f(x) = sum x_i^2` written as multiply-accumulate from the first element.
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

// --- numerical oracles -------------------------------------------------------

const ORACLE_STEP: f64 = 1e-6;

/// Central-difference Jacobian of a plain closure.
pub fn oracle_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Matrix {
    let n = x.len();
    let m = f(x).len();
    let mut jac = Matrix::zeros(m, n);
    let mut xp = x.to_vec();
    for i in 0..n {
        xp[i] = x[i] + h;
        let plus = f(&xp);
        xp[i] = x[i] - h;
        let minus = f(&xp);
        xp[i] = x[i];
        for j in 0..m {
            jac.set(j, i, (plus[j] - minus[j]) / (2.0 * h));
        }
    }
    jac
}

pub fn oracle_jacobian_default(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> Matrix {
    oracle_jacobian(f, x, ORACLE_STEP)
}

/// Central-difference gradient of a scalar closure.
pub fn oracle_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let plus = f(&xp);
        xp[i] = x[i] - h;
        let minus = f(&xp);
        xp[i] = x[i];
        g[i] = (plus - minus) / (2.0 * h);
    }
    g
}

/// Second-order central-difference Hessian of a scalar closure.
pub fn oracle_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Matrix {
    let n = x.len();
    let mut hess = Matrix::zeros(n, n);
    let mut xp = x.to_vec();
    let eval = |xp: &mut Vec<f64>, i: usize, j: usize, si: f64, sj: f64| {
        xp[i] += si * h;
        xp[j] += sj * h;
        let v = f(xp);
        xp[i] = x[i];
        xp[j] = x[j];
        v
    };
    for i in 0..n {
        for j in 0..n {
            let pp = eval(&mut xp, i, j, 1.0, 1.0);
            let pm = eval(&mut xp, i, j, 1.0, -1.0);
            let mp = eval(&mut xp, i, j, -1.0, 1.0);
            let mm = eval(&mut xp, i, j, -1.0, -1.0);
            hess.set(i, j, (pp - pm - mp + mm) / (4.0 * h * h));
        }
    }
    hess
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-12))
        .fold(0.0, f64::max)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

pub fn assert_bits_eq(a: &[f64], b: &[f64], what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: length");
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert_eq!(x.to_bits(), y.to_bits(), "{what}: entry {i}: {x} vs {y}");
    }
}
