//! The public differentiation operators.
//!
//! Eight operators, each in four variants: out-of-place returning the
//! derivative, out-of-place returning `(value, derivative)`, in-place
//! writing the derivative into a caller buffer, and in-place with the
//! primal value. All four variants of an operator produce identical
//! derivative values.
//!
//! Every variant takes `(function, preparation, backend, input, contexts)`.
//! The preparation must have been built by [`prepare`] for the same
//! operator, backend and input signature; the in-place variants are the
//! allocation-free steady-state path.

use crate::backend::Backend;
use crate::context::Context;
use crate::error::{Error, Result};
use crate::exec;
use crate::fallback::Op;
use crate::function::{DifferentiableFunction, Function};
use crate::matrix::Matrix;
use crate::prep::Preparation;
use crate::seed::Seeds;
use crate::sparse::SparseMatrix;

/// A Jacobian or Hessian in the storage the preparation's plan produces:
/// dense for dense plans, compressed-column for sparse plans.
#[derive(Debug, Clone, PartialEq)]
pub enum DerivativeMatrix {
    Dense(Matrix),
    Sparse(SparseMatrix),
}

impl DerivativeMatrix {
    pub fn to_dense(&self) -> Matrix {
        match self {
            DerivativeMatrix::Dense(m) => m.clone(),
            DerivativeMatrix::Sparse(m) => m.to_dense(),
        }
    }

    pub fn as_dense(&self) -> Option<&Matrix> {
        match self {
            DerivativeMatrix::Dense(m) => Some(m),
            DerivativeMatrix::Sparse(_) => None,
        }
    }

    pub fn as_sparse(&self) -> Option<&SparseMatrix> {
        match self {
            DerivativeMatrix::Sparse(m) => Some(m),
            DerivativeMatrix::Dense(_) => None,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        match self {
            DerivativeMatrix::Dense(m) => m.get(row, col),
            DerivativeMatrix::Sparse(m) => m.get(row, col),
        }
    }
}

/// Build a [`Preparation`] for `op` at a typical input.
///
/// The typical input's values are only used where the backend needs them
/// (tape recording, sparsity detection); the preparation is valid for every
/// input of the same shape afterwards.
pub fn prepare<F: Function>(
    op: Op,
    func: &DifferentiableFunction<F>,
    backend: &Backend,
    typical_input: &[f64],
    contexts: &[Context],
) -> Result<Preparation> {
    exec::build(op, func, backend, typical_input, contexts)
}

fn validate_call<F: Function>(
    op: Op,
    func: &DifferentiableFunction<F>,
    prep: &Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
) -> Result<()> {
    func.check_call(op, backend, x, contexts)?;
    if prep.op != op {
        return Err(Error::prep_mismatch(
            op,
            &backend.id(),
            format!("preparation was built for `{}`", prep.op),
        ));
    }
    if prep.backend != *backend {
        return Err(Error::prep_mismatch(
            op,
            &backend.id(),
            format!(
                "preparation was built for backend `{}` (including parameters)",
                prep.backend.id()
            ),
        ));
    }
    if prep.input_len != x.len()
        || prep.output_len != func.output_len()
        || prep.context_sig != func.context_spec()
    {
        return Err(Error::prep_mismatch(
            op,
            &backend.id(),
            format!(
                "prepared signature is {} -> {}, call signature is {} -> {}",
                prep.input_len,
                prep.output_len,
                x.len(),
                func.output_len()
            ),
        ));
    }
    Ok(())
}

fn check_seed_batch(op: Op, backend: &Backend, seeds: &Seeds, expected: usize) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::shape(op, &backend.id(), "seed batch", 1, 0));
    }
    for (i, dir) in seeds.directions().iter().enumerate() {
        if dir.len() != expected {
            return Err(Error::shape(
                op,
                &backend.id(),
                &format!("seed direction {i}"),
                expected,
                dir.len(),
            ));
        }
    }
    Ok(())
}

fn check_out_len(op: Op, backend: &Backend, what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::shape(op, &backend.id(), what, expected, got));
    }
    Ok(())
}

fn check_batch_out(
    op: Op,
    backend: &Backend,
    outs: &[Vec<f64>],
    batch: usize,
    each: usize,
) -> Result<()> {
    check_out_len(op, backend, "output batch length", batch, outs.len())?;
    for (i, out) in outs.iter().enumerate() {
        if out.len() != each {
            return Err(Error::shape(
                op,
                &backend.id(),
                &format!("output batch entry {i}"),
                each,
                out.len(),
            ));
        }
    }
    Ok(())
}

fn check_dense_out(
    op: Op,
    backend: &Backend,
    out: &DerivativeMatrix,
    nrows: usize,
    ncols: usize,
) -> Result<()> {
    if let DerivativeMatrix::Dense(m) = out {
        check_out_len(op, backend, "result rows", nrows, m.nrows())?;
        check_out_len(op, backend, "result cols", ncols, m.ncols())?;
    }
    Ok(())
}

// --- pushforward -----------------------------------------------------------

/// `J(x) v` for every seed direction `v`, batch order preserved.
pub fn pushforward<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    seeds: &Seeds,
    contexts: &[Context],
) -> Result<Vec<Vec<f64>>> {
    let mut outs = vec![vec![0.0; func.output_len()]; seeds.len()];
    pushforward_into(func, prep, backend, x, seeds, contexts, &mut outs)?;
    Ok(outs)
}

pub fn value_and_pushforward<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    seeds: &Seeds,
    contexts: &[Context],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut outs = vec![vec![0.0; func.output_len()]; seeds.len()];
    let value = value_and_pushforward_into(func, prep, backend, x, seeds, contexts, &mut outs)?;
    Ok((value, outs))
}

pub fn pushforward_into<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    seeds: &Seeds,
    contexts: &[Context],
    outs: &mut [Vec<f64>],
) -> Result<()> {
    validate_call(Op::Pushforward, func, prep, backend, x, contexts)?;
    check_seed_batch(Op::Pushforward, backend, seeds, func.input_len())?;
    check_batch_out(Op::Pushforward, backend, outs, seeds.len(), func.output_len())?;
    exec::exec_pushforward(func, prep, x, seeds, contexts, outs, None)
}

pub fn value_and_pushforward_into<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    seeds: &Seeds,
    contexts: &[Context],
    outs: &mut [Vec<f64>],
) -> Result<Vec<f64>> {
    validate_call(Op::Pushforward, func, prep, backend, x, contexts)?;
    check_seed_batch(Op::Pushforward, backend, seeds, func.input_len())?;
    check_batch_out(Op::Pushforward, backend, outs, seeds.len(), func.output_len())?;
    let mut value = Vec::new();
    exec::exec_pushforward(func, prep, x, seeds, contexts, outs, Some(&mut value))?;
    Ok(value)
}

// --- pullback ---------------------------------------------------------------

/// `J(x)^T w` for every seed direction `w`.
pub fn pullback<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    seeds: &Seeds,
    contexts: &[Context],
) -> Result<Vec<Vec<f64>>> {
    let mut outs = vec![vec![0.0; func.input_len()]; seeds.len()];
    pullback_into(func, prep, backend, x, seeds, contexts, &mut outs)?;
    Ok(outs)
}

pub fn value_and_pullback<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    seeds: &Seeds,
    contexts: &[Context],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut outs = vec![vec![0.0; func.input_len()]; seeds.len()];
    let mut value = Vec::new();
    validate_call(Op::Pullback, func, prep, backend, x, contexts)?;
    check_seed_batch(Op::Pullback, backend, seeds, func.output_len())?;
    exec::exec_pullback(func, prep, x, seeds, contexts, &mut outs, Some(&mut value))?;
    Ok((value, outs))
}

pub fn pullback_into<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    seeds: &Seeds,
    contexts: &[Context],
    outs: &mut [Vec<f64>],
) -> Result<()> {
    validate_call(Op::Pullback, func, prep, backend, x, contexts)?;
    check_seed_batch(Op::Pullback, backend, seeds, func.output_len())?;
    check_batch_out(Op::Pullback, backend, outs, seeds.len(), func.input_len())?;
    exec::exec_pullback(func, prep, x, seeds, contexts, outs, None)
}

pub fn value_and_pullback_into<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    seeds: &Seeds,
    contexts: &[Context],
    outs: &mut [Vec<f64>],
) -> Result<Vec<f64>> {
    validate_call(Op::Pullback, func, prep, backend, x, contexts)?;
    check_seed_batch(Op::Pullback, backend, seeds, func.output_len())?;
    check_batch_out(Op::Pullback, backend, outs, seeds.len(), func.input_len())?;
    let mut value = Vec::new();
    exec::exec_pullback(func, prep, x, seeds, contexts, outs, Some(&mut value))?;
    Ok(value)
}

// --- derivative --------------------------------------------------------------

/// Derivative of a scalar-input function; equals a pushforward with seed 1.
pub fn derivative<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; func.output_len()];
    derivative_into(func, prep, backend, x, contexts, &mut out)?;
    Ok(out)
}

pub fn value_and_derivative<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut out = vec![0.0; func.output_len()];
    let value = value_and_derivative_into(func, prep, backend, x, contexts, &mut out)?;
    Ok((value, out))
}

pub fn derivative_into<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
    out: &mut [f64],
) -> Result<()> {
    validate_call(Op::Derivative, func, prep, backend, x, contexts)?;
    check_out_len(Op::Derivative, backend, "derivative buffer", func.output_len(), out.len())?;
    exec::exec_derivative(func, prep, x, contexts, out, None)
}

pub fn value_and_derivative_into<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
    out: &mut [f64],
) -> Result<Vec<f64>> {
    validate_call(Op::Derivative, func, prep, backend, x, contexts)?;
    check_out_len(Op::Derivative, backend, "derivative buffer", func.output_len(), out.len())?;
    let mut value = Vec::new();
    exec::exec_derivative(func, prep, x, contexts, out, Some(&mut value))?;
    Ok(value)
}

// --- gradient ----------------------------------------------------------------

/// Gradient of a scalar-output function; equals a pullback with seed 1.
pub fn gradient<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; func.input_len()];
    gradient_into(func, prep, backend, x, contexts, &mut out)?;
    Ok(out)
}

pub fn value_and_gradient<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
) -> Result<(f64, Vec<f64>)> {
    let mut out = vec![0.0; func.input_len()];
    let value = value_and_gradient_into(func, prep, backend, x, contexts, &mut out)?;
    Ok((value, out))
}

pub fn gradient_into<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
    out: &mut [f64],
) -> Result<()> {
    validate_call(Op::Gradient, func, prep, backend, x, contexts)?;
    check_out_len(Op::Gradient, backend, "gradient buffer", func.input_len(), out.len())?;
    exec::exec_gradient(func, prep, x, contexts, out, None)
}

pub fn value_and_gradient_into<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
    out: &mut [f64],
) -> Result<f64> {
    validate_call(Op::Gradient, func, prep, backend, x, contexts)?;
    check_out_len(Op::Gradient, backend, "gradient buffer", func.input_len(), out.len())?;
    let mut value = Vec::new();
    exec::exec_gradient(func, prep, x, contexts, out, Some(&mut value))?;
    Ok(value[0])
}

// --- jacobian ----------------------------------------------------------------

/// Full Jacobian; sparse plans return a compressed-column matrix with
/// identical entries.
pub fn jacobian<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
) -> Result<DerivativeMatrix> {
    let mut out = prep
        .new_result_matrix()
        .expect("jacobian preparation provides a result buffer");
    jacobian_into(func, prep, backend, x, contexts, &mut out)?;
    Ok(out)
}

pub fn value_and_jacobian<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
) -> Result<(Vec<f64>, DerivativeMatrix)> {
    let mut out = prep
        .new_result_matrix()
        .expect("jacobian preparation provides a result buffer");
    let value = value_and_jacobian_into(func, prep, backend, x, contexts, &mut out)?;
    Ok((value, out))
}

pub fn jacobian_into<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
    out: &mut DerivativeMatrix,
) -> Result<()> {
    validate_call(Op::Jacobian, func, prep, backend, x, contexts)?;
    check_dense_out(Op::Jacobian, backend, out, func.output_len(), func.input_len())?;
    exec::exec_jacobian(func, prep, x, contexts, out, None)
}

pub fn value_and_jacobian_into<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
    out: &mut DerivativeMatrix,
) -> Result<Vec<f64>> {
    validate_call(Op::Jacobian, func, prep, backend, x, contexts)?;
    check_dense_out(Op::Jacobian, backend, out, func.output_len(), func.input_len())?;
    let mut value = Vec::new();
    exec::exec_jacobian(func, prep, x, contexts, out, Some(&mut value))?;
    Ok(value)
}

// --- second derivative ---------------------------------------------------------

/// Second derivative of a scalar-input function (derivative of the
/// derivative through the resolved second-order plan).
pub fn second_derivative<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; func.output_len()];
    second_derivative_into(func, prep, backend, x, contexts, &mut out)?;
    Ok(out)
}

pub fn value_and_second_derivative<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut out = vec![0.0; func.output_len()];
    let value = value_and_second_derivative_into(func, prep, backend, x, contexts, &mut out)?;
    Ok((value, out))
}

pub fn second_derivative_into<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
    out: &mut [f64],
) -> Result<()> {
    validate_call(Op::SecondDerivative, func, prep, backend, x, contexts)?;
    check_out_len(
        Op::SecondDerivative,
        backend,
        "second-derivative buffer",
        func.output_len(),
        out.len(),
    )?;
    exec::exec_second_derivative(func, prep, x, contexts, out, None)
}

pub fn value_and_second_derivative_into<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
    out: &mut [f64],
) -> Result<Vec<f64>> {
    validate_call(Op::SecondDerivative, func, prep, backend, x, contexts)?;
    check_out_len(
        Op::SecondDerivative,
        backend,
        "second-derivative buffer",
        func.output_len(),
        out.len(),
    )?;
    let mut value = Vec::new();
    exec::exec_second_derivative(func, prep, x, contexts, out, Some(&mut value))?;
    Ok(value)
}

// --- hvp -------------------------------------------------------------------------

/// `H(x) v` for every seed direction, by pushing the seed through the
/// gradient map (forward-over-reverse by default).
pub fn hvp<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    seeds: &Seeds,
    contexts: &[Context],
) -> Result<Vec<Vec<f64>>> {
    let mut outs = vec![vec![0.0; func.input_len()]; seeds.len()];
    hvp_into(func, prep, backend, x, seeds, contexts, &mut outs)?;
    Ok(outs)
}

pub fn value_and_hvp<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    seeds: &Seeds,
    contexts: &[Context],
) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut outs = vec![vec![0.0; func.input_len()]; seeds.len()];
    validate_call(Op::Hvp, func, prep, backend, x, contexts)?;
    check_seed_batch(Op::Hvp, backend, seeds, func.input_len())?;
    let mut value = Vec::new();
    exec::exec_hvp(func, prep, x, seeds, contexts, &mut outs, Some(&mut value))?;
    Ok((value[0], outs))
}

pub fn hvp_into<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    seeds: &Seeds,
    contexts: &[Context],
    outs: &mut [Vec<f64>],
) -> Result<()> {
    validate_call(Op::Hvp, func, prep, backend, x, contexts)?;
    check_seed_batch(Op::Hvp, backend, seeds, func.input_len())?;
    check_batch_out(Op::Hvp, backend, outs, seeds.len(), func.input_len())?;
    exec::exec_hvp(func, prep, x, seeds, contexts, outs, None)
}

pub fn value_and_hvp_into<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    seeds: &Seeds,
    contexts: &[Context],
    outs: &mut [Vec<f64>],
) -> Result<f64> {
    validate_call(Op::Hvp, func, prep, backend, x, contexts)?;
    check_seed_batch(Op::Hvp, backend, seeds, func.input_len())?;
    check_batch_out(Op::Hvp, backend, outs, seeds.len(), func.input_len())?;
    let mut value = Vec::new();
    exec::exec_hvp(func, prep, x, seeds, contexts, outs, Some(&mut value))?;
    Ok(value[0])
}

// --- hessian -----------------------------------------------------------------------

/// Full Hessian, symmetrized as `(M + M^T) / 2` after assembly (sparse
/// plans mirror-average the recovered off-diagonal pairs).
pub fn hessian<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
) -> Result<DerivativeMatrix> {
    let mut out = prep
        .new_result_matrix()
        .expect("hessian preparation provides a result buffer");
    hessian_into(func, prep, backend, x, contexts, &mut out)?;
    Ok(out)
}

pub fn value_and_hessian<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
) -> Result<(f64, DerivativeMatrix)> {
    let mut out = prep
        .new_result_matrix()
        .expect("hessian preparation provides a result buffer");
    let value = value_and_hessian_into(func, prep, backend, x, contexts, &mut out)?;
    Ok((value, out))
}

pub fn hessian_into<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
    out: &mut DerivativeMatrix,
) -> Result<()> {
    validate_call(Op::Hessian, func, prep, backend, x, contexts)?;
    check_dense_out(Op::Hessian, backend, out, func.input_len(), func.input_len())?;
    exec::exec_hessian(func, prep, x, contexts, out, None)
}

pub fn value_and_hessian_into<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    backend: &Backend,
    x: &[f64],
    contexts: &[Context],
    out: &mut DerivativeMatrix,
) -> Result<f64> {
    validate_call(Op::Hessian, func, prep, backend, x, contexts)?;
    check_dense_out(Op::Hessian, backend, out, func.input_len(), func.input_len())?;
    let mut value = Vec::new();
    exec::exec_hessian(func, prep, x, contexts, out, Some(&mut value))?;
    Ok(value[0])
}
