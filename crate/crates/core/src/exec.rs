//! Preparation construction and operator execution.
//!
//! `build` turns a resolved plan into a concrete payload (recording tapes,
//! detecting sparsity, allocating workspaces); the `exec_*` functions run a
//! prepared operator. Execution dispatches purely on the payload, which is
//! what makes `differentiate_with` substitution transparent: once prepared,
//! the outer backend no longer matters.

use crate::backend::Backend;
use crate::context::Context;
use crate::error::{Error, Result};
use crate::fallback::{resolve, second_order_pair, Op, OperatorPlan, PlanStep, SecondOrderPair};
use crate::finitediff::{
    fd_jacobian_into, fd_pushforward_into, fd_second_derivative_into, FdWorkspace, Scheme,
};
use crate::forward::{ForwardWorkspace, SeedBank};
use crate::function::{DifferentiableFunction, Function};
use crate::matrix::Matrix;
use crate::ops::DerivativeMatrix;
use crate::prep::{
    CallStats, Dual1, FdPrep, ForwardPrep, HessianScratch, Payload, Preparation, ReversePrep,
    SecondOrderPrep, SparsePrep,
};
use crate::reverse::record_function;
use crate::seed::Seeds;
use crate::sparse::{
    detect_hessian_pattern, detect_jacobian_pattern, greedy_color, Partition, RecoverySource,
    SparseMatrix,
};

fn constant_payloads(contexts: &[Context]) -> Vec<Vec<f64>> {
    contexts
        .iter()
        .filter_map(|c| match c {
            Context::Constant(v) => Some(v.clone()),
            Context::Cache(_) => None,
        })
        .collect()
}

/// The tape embeds constants as literals, so reusing it with different
/// constant payloads would silently compute with stale values. Reject that.
fn check_constants(op: Op, recorded: &[Vec<f64>], contexts: &[Context]) -> Result<()> {
    let current = contexts.iter().filter_map(|c| match c {
        Context::Constant(v) => Some(v),
        Context::Cache(_) => None,
    });
    for (i, (rec, cur)) in recorded.iter().zip(current).enumerate() {
        let same = rec.len() == cur.len()
            && rec
                .iter()
                .zip(cur)
                .all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            return Err(Error::prep_mismatch(
                op,
                "tape",
                format!(
                    "constant context {i} differs from the value captured at recording time; \
                     the tape embeds constants as literals, rebuild the preparation"
                ),
            ));
        }
    }
    Ok(())
}

fn ensure_finite(op: Op, backend: &Backend, label: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::non_finite(
            op,
            &backend.id(),
            format!("{label} has a non-finite entry at index {i}"),
        )),
        None => Ok(()),
    }
}

fn unsupported_primitive(op: Op, primitive: &'static str) -> Error {
    Error::UnsupportedPrimitive {
        op,
        backend: "dual".into(),
        primitive,
    }
}

fn fd_error(op: Op, detail: String) -> Error {
    Error::non_finite(op, "fd", detail)
}

// ---------------------------------------------------------------------------
// preparation construction
// ---------------------------------------------------------------------------

fn check_op_shape<F: Function>(
    op: Op,
    func: &DifferentiableFunction<F>,
    backend: &Backend,
) -> Result<()> {
    match op {
        Op::Derivative | Op::SecondDerivative if func.input_len() != 1 => Err(Error::shape(
            op,
            &backend.id(),
            "scalar input required",
            1,
            func.input_len(),
        )),
        Op::Gradient | Op::Hvp | Op::Hessian if func.output_len() != 1 => Err(Error::shape(
            op,
            &backend.id(),
            "scalar output required",
            1,
            func.output_len(),
        )),
        _ => Ok(()),
    }
}

/// Build a preparation for `op` on `backend` at `typical`.
pub(crate) fn build<F: Function>(
    op: Op,
    func: &DifferentiableFunction<F>,
    backend: &Backend,
    typical: &[f64],
    contexts: &[Context],
) -> Result<Preparation> {
    func.check_call(op, backend, typical, contexts)?;
    check_op_shape(op, func, backend)?;

    // DifferentiateWith: all derivative work routes through the substitute
    let exec_backend = func.substitute_backend().unwrap_or(backend);
    let mut plan = resolve(op, exec_backend, &func.sig())?;
    if func.substitute_backend().is_some() {
        let mut steps = vec![PlanStep::Substitute {
            backend: exec_backend.id(),
        }];
        steps.extend(plan.steps().iter().cloned());
        plan = OperatorPlan::new(op, steps);
    }

    let payload = build_payload(op, func, exec_backend, typical, contexts)?;
    if let Payload::Sparse(sp) = &payload {
        plan.set_colors(
            sp.coloring.n_forward_colors(),
            sp.coloring.n_reverse_colors(),
        );
    }

    Ok(Preparation {
        op,
        backend: backend.clone(),
        input_len: func.input_len(),
        output_len: func.output_len(),
        context_sig: func.context_spec().to_vec(),
        plan,
        payload,
        stats: CallStats::default(),
    })
}

fn build_payload<F: Function>(
    op: Op,
    func: &DifferentiableFunction<F>,
    backend: &Backend,
    typical: &[f64],
    contexts: &[Context],
) -> Result<Payload> {
    let n = func.input_len();
    let m = func.output_len();
    match backend {
        Backend::Sparse { inner } => match op {
            Op::Jacobian => build_sparse_jacobian(func, inner, typical, contexts),
            Op::Hessian => build_sparse_hessian(func, inner, typical, contexts),
            _ => build_payload(op, func, inner, typical, contexts),
        },
        Backend::SecondOrder { inner, .. } if !op.is_second_order() => {
            build_payload(op, func, inner, typical, contexts)
        }
        Backend::FiniteDiff(rule) if !op.is_second_order() || op == Op::SecondDerivative => {
            Ok(Payload::FiniteDiff(FdPrep {
                rule: *rule,
                ws: FdWorkspace::new(n, m, func.context_spec()),
                basis: vec![0.0; n],
                column: vec![0.0; m],
                base_value: vec![0.0; m],
                jac: (op == Op::Pullback).then(|| Matrix::zeros(m, n)),
            }))
        }
        _ if op.is_second_order() => {
            let pair = second_order_pair(op, backend)?;
            let so = build_second_order(op, func, &pair, typical, contexts)?;
            Ok(Payload::SecondOrder(
                Box::new(so),
                HessianScratch {
                    direction: vec![0.0; n],
                    column: vec![0.0; n],
                },
            ))
        }
        Backend::Forward(opts) => Ok(Payload::Forward(ForwardPrep {
            chunk: opts.chunk,
            ws: ForwardWorkspace::new(n, m, func.context_spec()),
        })),
        Backend::Reverse => {
            let tape = record_function(func, typical, contexts);
            let n_slots = tape.n_slots();
            Ok(Payload::Reverse(ReversePrep {
                tape,
                values: vec![0.0; n_slots],
                adjoints: vec![0.0; n_slots],
                seed: vec![0.0; m],
                y_buf: vec![0.0; m],
                x_bar: vec![0.0; n],
                recorded_constants: constant_payloads(contexts),
                jac_rows: (op == Op::Pushforward).then(|| Matrix::zeros(m, n)),
            }))
        }
        _ => Err(Error::unsupported(
            op,
            &backend.id(),
            "backend cannot realize this operator",
        )),
    }
}

fn build_second_order<F: Function>(
    op: Op,
    func: &DifferentiableFunction<F>,
    pair: &SecondOrderPair<'_>,
    typical: &[f64],
    contexts: &[Context],
) -> Result<SecondOrderPrep> {
    let n = func.input_len();
    let m = func.output_len();
    match (pair.outer, pair.inner) {
        (Backend::Forward(_), Backend::Reverse) => {
            let tape = record_function(func, typical, contexts);
            let n_slots = tape.n_slots();
            let zero = Dual1::constant(0.0);
            Ok(SecondOrderPrep::DualOverTape {
                tape,
                values: vec![zero; n_slots],
                adjoints: vec![zero; n_slots],
                seed: vec![zero; m],
                x_dual: vec![zero; n],
                x_bar: vec![zero; n],
                recorded_constants: constant_payloads(contexts),
            })
        }
        (Backend::Forward(_), Backend::Forward(inner_opts)) => Ok(SecondOrderPrep::DualOverDual {
            chunk: inner_opts.chunk,
            ws: ForwardWorkspace::new(n, m, func.context_spec()),
            x_dual: vec![Dual1::constant(0.0); n],
        }),
        (Backend::FiniteDiff(rule), inner) => {
            let inner_op = if op == Op::SecondDerivative {
                Op::Derivative
            } else {
                Op::Gradient
            };
            let inner_payload = build_payload(inner_op, func, inner, typical, contexts)?;
            let d_len = if op == Op::SecondDerivative { m } else { n };
            Ok(SecondOrderPrep::FdOverInner {
                rule: *rule,
                inner: Box::new(inner_payload),
                x_pert: vec![0.0; n],
                d_plus: vec![0.0; d_len],
                d_minus: vec![0.0; d_len],
            })
        }
        _ => Err(Error::unsupported(
            op,
            &pair.outer.id(),
            "unsupported second-order pairing",
        )),
    }
}

fn recovery_indices(sp_structure: &SparseMatrix, coloring: &crate::sparse::Coloring) -> Vec<usize> {
    coloring
        .recovery()
        .iter()
        .map(|e| {
            sp_structure
                .value_index(e.row, e.col)
                .expect("recovery entry outside pattern")
        })
        .collect()
}

fn build_sparse_jacobian<F: Function>(
    func: &DifferentiableFunction<F>,
    inner: &Backend,
    typical: &[f64],
    contexts: &[Context],
) -> Result<Payload> {
    let n = func.input_len();
    let m = func.output_len();
    let pattern = detect_jacobian_pattern(func, typical, contexts);
    let partition = match inner {
        Backend::MixedMode { .. } => Partition::Bidirectional,
        _ if inner.capabilities().native_pushforward => Partition::Column,
        _ => Partition::Row,
    };
    let coloring = greedy_color(&pattern, partition);
    let structure = SparseMatrix::from_pattern(&pattern);
    let recovery_idx = recovery_indices(&structure, &coloring);

    let (fwd_backend, rev_backend) = match inner {
        Backend::MixedMode { forward, reverse } => {
            (Some(forward.as_ref()), Some(reverse.as_ref()))
        }
        _ if inner.capabilities().native_pushforward => (Some(inner), None),
        _ => (None, Some(inner)),
    };
    let inner_fwd = match fwd_backend {
        Some(b) if coloring.n_forward_colors() > 0 || rev_backend.is_none() => Some(Box::new(
            build_payload(Op::Pushforward, func, b, typical, contexts)?,
        )),
        _ => None,
    };
    let inner_rev = match rev_backend {
        Some(b) if coloring.n_reverse_colors() > 0 || fwd_backend.is_none() => Some(Box::new(
            build_payload(Op::Pullback, func, b, typical, contexts)?,
        )),
        _ => None,
    };

    Ok(Payload::Sparse(Box::new(SparsePrep {
        fwd_product: Matrix::zeros(m, coloring.n_forward_colors()),
        rev_product: Matrix::zeros(coloring.n_reverse_colors(), n),
        fwd_pass_out: vec![0.0; m],
        sym_pairs: Vec::new(),
        pattern,
        coloring,
        structure,
        recovery_idx,
        inner_fwd,
        inner_rev,
        inner_hvp: None,
    })))
}

fn build_sparse_hessian<F: Function>(
    func: &DifferentiableFunction<F>,
    inner: &Backend,
    typical: &[f64],
    contexts: &[Context],
) -> Result<Payload> {
    let n = func.input_len();
    let pattern = detect_hessian_pattern(func, typical, contexts);
    let coloring = greedy_color(&pattern, Partition::Symmetric);
    let structure = SparseMatrix::from_pattern(&pattern);
    let recovery_idx = recovery_indices(&structure, &coloring);
    let sym_pairs = pattern
        .iter()
        .filter(|(r, c)| r < c)
        .map(|(r, c)| {
            (
                structure.value_index(r, c).unwrap(),
                structure.value_index(c, r).unwrap(),
            )
        })
        .collect();

    let pair = second_order_pair(Op::Hessian, inner)?;
    let inner_hvp = build_second_order(Op::Hvp, func, &pair, typical, contexts)?;

    Ok(Payload::Sparse(Box::new(SparsePrep {
        fwd_product: Matrix::zeros(n, coloring.n_forward_colors()),
        rev_product: Matrix::zeros(0, 0),
        fwd_pass_out: vec![0.0; n],
        sym_pairs,
        pattern,
        coloring,
        structure,
        recovery_idx,
        inner_fwd: None,
        inner_rev: None,
        inner_hvp: Some(Box::new(inner_hvp)),
    })))
}

// ---------------------------------------------------------------------------
// forward drivers
// ---------------------------------------------------------------------------

/// Basis-seeded chunked passes: direction `d` is the standard basis `e_d`.
fn fwd_basis_drive<F: Function>(
    func: &DifferentiableFunction<F>,
    fp: &mut ForwardPrep,
    op: Op,
    x: &[f64],
    contexts: &[Context],
    stats: &mut CallStats,
    mut primal: Option<&mut Vec<f64>>,
    mut emit: impl FnMut(usize, usize, f64),
) -> Result<()> {
    fp.ws.load_values(x);
    let bank = SeedBank::new(x.len(), fp.chunk);
    for range in bank.chunk_ranges() {
        fp.ws
            .eval_basis_chunk(func, contexts, range.clone())
            .map_err(|p| unsupported_primitive(op, p))?;
        stats.forward_passes += 1;
        stats.function_evals += 1;
        if let Some(buf) = primal.take() {
            buf.clear();
            buf.extend(fp.ws.y.iter().map(|d| d.value));
        }
        for (lane, dir) in range.enumerate() {
            for (j, out) in fp.ws.y.iter().enumerate() {
                emit(dir, j, out.tangents[lane]);
            }
        }
    }
    stats.pushforwards += x.len() as u64;
    Ok(())
}

/// Dense-seeded chunked passes over an explicit direction batch.
fn fwd_dense_drive<F: Function>(
    func: &DifferentiableFunction<F>,
    fp: &mut ForwardPrep,
    op: Op,
    x: &[f64],
    contexts: &[Context],
    seeds: &[Vec<f64>],
    stats: &mut CallStats,
    mut primal: Option<&mut Vec<f64>>,
    mut emit: impl FnMut(usize, usize, f64),
) -> Result<()> {
    fp.ws.load_values(x);
    let bank = SeedBank::new(seeds.len(), fp.chunk);
    for range in bank.chunk_ranges() {
        fp.ws
            .eval_dense_chunk(func, contexts, seeds, range.clone())
            .map_err(|p| unsupported_primitive(op, p))?;
        stats.forward_passes += 1;
        stats.function_evals += 1;
        if let Some(buf) = primal.take() {
            buf.clear();
            buf.extend(fp.ws.y.iter().map(|d| d.value));
        }
        for (lane, dir) in range.enumerate() {
            for (j, out) in fp.ws.y.iter().enumerate() {
                emit(dir, j, out.tangents[lane]);
            }
        }
    }
    stats.pushforwards += seeds.len() as u64;
    Ok(())
}

impl ReversePrep {
    /// Sweep with the current contents of `self.seed` into `self.x_bar`.
    fn sweep_current(&mut self) {
        self.tape
            .sweep(&self.values, &self.seed, &mut self.adjoints, &mut self.x_bar);
    }

    fn replay_at(&mut self, op: Op, x: &[f64], contexts: &[Context], stats: &mut CallStats) -> Result<()> {
        check_constants(op, &self.recorded_constants, contexts)?;
        self.tape.replay(x, &mut self.values).map_err(|guard| Error::TraceEscape {
            op,
            backend: "tape".into(),
            detail: format!(
                "comparison guard {guard} resolves differently at this input than at \
                 recording time; the tape is only valid on the recorded branch"
            ),
        })?;
        stats.function_evals += 1;
        Ok(())
    }

    fn read_primal(&mut self) {
        let (tape, values, y_buf) = (&self.tape, &self.values, &mut self.y_buf);
        tape.read_outputs(values, y_buf);
    }
}

// ---------------------------------------------------------------------------
// first-order building blocks reused by composite payloads
// ---------------------------------------------------------------------------

/// Plain function value through whatever payload is at hand.
fn primal_into<F: Function>(
    func: &DifferentiableFunction<F>,
    payload: &mut Payload,
    op: Op,
    x: &[f64],
    contexts: &[Context],
    out: &mut Vec<f64>,
    stats: &mut CallStats,
) -> Result<()> {
    out.resize(func.output_len(), 0.0);
    match payload {
        Payload::Forward(fp) => {
            fp.ws.load_values(x);
            fp.ws
                .eval_once(func, contexts)
                .map_err(|p| unsupported_primitive(op, p))?;
            stats.function_evals += 1;
            for (o, d) in out.iter_mut().zip(&fp.ws.y) {
                *o = d.value;
            }
        }
        Payload::Reverse(rp) => {
            rp.replay_at(op, x, contexts, stats)?;
            rp.read_primal();
            out.copy_from_slice(&rp.y_buf);
        }
        Payload::FiniteDiff(fd) => {
            fd.ws.eval_value(func, contexts, x, out);
            stats.function_evals += 1;
        }
        Payload::SecondOrder(..) | Payload::Sparse(..) => {
            unreachable!("primal extraction goes through first-order payloads")
        }
    }
    Ok(())
}

/// Gradient of the scalar-output `func` through a first-order payload.
fn grad_into<F: Function>(
    func: &DifferentiableFunction<F>,
    payload: &mut Payload,
    op: Op,
    x: &[f64],
    contexts: &[Context],
    out: &mut [f64],
    stats: &mut CallStats,
) -> Result<()> {
    match payload {
        Payload::Forward(fp) => {
            fwd_basis_drive(func, fp, op, x, contexts, stats, None, |dir, _, v| {
                out[dir] = v;
            })?;
        }
        Payload::Reverse(rp) => {
            rp.replay_at(op, x, contexts, stats)?;
            rp.seed[0] = 1.0;
            rp.sweep_current();
            stats.pullbacks += 1;
            out.copy_from_slice(&rp.x_bar);
        }
        Payload::FiniteDiff(fd) => {
            for i in 0..x.len() {
                fd.basis[i] = 1.0;
                fd_pushforward_into(func, &mut fd.ws, &fd.rule, contexts, x, &fd.basis, &mut fd.column)
                    .map_err(|d| fd_error(op, d))?;
                fd.basis[i] = 0.0;
                out[i] = fd.column[0];
                stats.function_evals += 2;
            }
            stats.pushforwards += x.len() as u64;
            stats.pullbacks += 1;
        }
        _ => unreachable!("gradient runs on first-order payloads"),
    }
    Ok(())
}

/// Derivative (scalar input) through a first-order payload.
fn deriv_into<F: Function>(
    func: &DifferentiableFunction<F>,
    payload: &mut Payload,
    op: Op,
    x: &[f64],
    contexts: &[Context],
    out: &mut [f64],
    stats: &mut CallStats,
) -> Result<()> {
    match payload {
        Payload::Forward(fp) => {
            fwd_basis_drive(func, fp, op, x, contexts, stats, None, |_, j, v| {
                out[j] = v;
            })?;
        }
        Payload::Reverse(rp) => {
            rp.replay_at(op, x, contexts, stats)?;
            for j in 0..func.output_len() {
                rp.seed.fill(0.0);
                rp.seed[j] = 1.0;
                rp.sweep_current();
                out[j] = rp.x_bar[0];
            }
            stats.pullbacks += func.output_len() as u64;
        }
        Payload::FiniteDiff(fd) => {
            fd.basis[0] = 1.0;
            fd_pushforward_into(func, &mut fd.ws, &fd.rule, contexts, x, &fd.basis, out)
                .map_err(|d| fd_error(op, d))?;
            fd.basis[0] = 0.0;
            stats.function_evals += 2;
            stats.pushforwards += 1;
        }
        _ => unreachable!("derivative runs on first-order payloads"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// operator executors
// ---------------------------------------------------------------------------

pub(crate) fn exec_pushforward<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    x: &[f64],
    seeds: &Seeds,
    contexts: &[Context],
    outs: &mut [Vec<f64>],
    mut primal: Option<&mut Vec<f64>>,
) -> Result<()> {
    let op = Op::Pushforward;
    let (backend, payload, stats) = prep.parts();
    match payload {
        Payload::Forward(fp) => {
            fwd_dense_drive(
                func,
                fp,
                op,
                x,
                contexts,
                seeds.directions(),
                stats,
                primal.take(),
                |dir, j, v| outs[dir][j] = v,
            )?;
        }
        Payload::Reverse(rp) => {
            rp.replay_at(op, x, contexts, stats)?;
            let m = func.output_len();
            for j in 0..m {
                rp.seed.fill(0.0);
                rp.seed[j] = 1.0;
                rp.sweep_current();
                let jac = rp.jac_rows.as_mut().expect("pushforward prep has row assembly");
                jac.row_mut(j).copy_from_slice(&rp.x_bar);
            }
            stats.pullbacks += m as u64;
            let jac = rp.jac_rows.as_ref().unwrap();
            for (dir, v) in seeds.directions().iter().enumerate() {
                for j in 0..m {
                    outs[dir][j] = jac.row(j).iter().zip(v).map(|(a, b)| a * b).sum();
                }
            }
            stats.pushforwards += seeds.len() as u64;
            if let Some(buf) = primal.take() {
                rp.read_primal();
                buf.resize(m, 0.0);
                buf.copy_from_slice(&rp.y_buf);
            }
        }
        Payload::FiniteDiff(fd) => {
            for (dir, v) in seeds.directions().iter().enumerate() {
                fd_pushforward_into(func, &mut fd.ws, &fd.rule, contexts, x, v, &mut outs[dir])
                    .map_err(|d| fd_error(op, d))?;
                stats.function_evals += 2;
            }
            stats.pushforwards += seeds.len() as u64;
            if let Some(buf) = primal.take() {
                buf.resize(func.output_len(), 0.0);
                fd.ws.eval_value(func, contexts, x, buf);
                stats.function_evals += 1;
            }
        }
        _ => unreachable!("pushforward prep carries a first-order payload"),
    }
    for out in outs.iter() {
        ensure_finite(op, backend, "tangent", out)?;
    }
    if let Some(buf) = primal {
        ensure_finite(op, backend, "primal value", buf)?;
    }
    Ok(())
}

pub(crate) fn exec_pullback<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    x: &[f64],
    seeds: &Seeds,
    contexts: &[Context],
    outs: &mut [Vec<f64>],
    mut primal: Option<&mut Vec<f64>>,
) -> Result<()> {
    let op = Op::Pullback;
    let (backend, payload, stats) = prep.parts();
    match payload {
        Payload::Reverse(rp) => {
            rp.replay_at(op, x, contexts, stats)?;
            for (dir, w) in seeds.directions().iter().enumerate() {
                rp.seed.copy_from_slice(w);
                rp.sweep_current();
                outs[dir].copy_from_slice(&rp.x_bar);
            }
            stats.pullbacks += seeds.len() as u64;
            if let Some(buf) = primal.take() {
                rp.read_primal();
                buf.resize(func.output_len(), 0.0);
                buf.copy_from_slice(&rp.y_buf);
            }
        }
        Payload::FiniteDiff(fd) => {
            let jac = fd.jac.as_mut().expect("pullback prep has row assembly");
            fd_jacobian_into(
                func,
                &mut fd.ws,
                &fd.rule,
                contexts,
                x,
                &mut fd.basis,
                &mut fd.column,
                jac,
            )
            .map_err(|d| fd_error(op, d))?;
            stats.function_evals += 2 * x.len() as u64;
            for (dir, w) in seeds.directions().iter().enumerate() {
                for i in 0..x.len() {
                    outs[dir][i] = (0..func.output_len()).map(|j| w[j] * jac.get(j, i)).sum();
                }
            }
            stats.pullbacks += seeds.len() as u64;
            if let Some(buf) = primal.take() {
                buf.resize(func.output_len(), 0.0);
                fd.ws.eval_value(func, contexts, x, buf);
                stats.function_evals += 1;
            }
        }
        _ => unreachable!("pullback prep carries a reverse or fd payload"),
    }
    for out in outs.iter() {
        ensure_finite(op, backend, "cotangent", out)?;
    }
    if let Some(buf) = primal {
        ensure_finite(op, backend, "primal value", buf)?;
    }
    Ok(())
}

pub(crate) fn exec_derivative<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    x: &[f64],
    contexts: &[Context],
    out: &mut [f64],
    mut primal: Option<&mut Vec<f64>>,
) -> Result<()> {
    let op = Op::Derivative;
    let (backend, payload, stats) = prep.parts();
    deriv_into(func, payload, op, x, contexts, out, stats)?;
    if let Some(buf) = primal.take() {
        primal_into(func, payload, op, x, contexts, buf, stats)?;
        ensure_finite(op, backend, "primal value", buf)?;
    }
    ensure_finite(op, backend, "derivative", out)
}

pub(crate) fn exec_gradient<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    x: &[f64],
    contexts: &[Context],
    out: &mut [f64],
    mut primal: Option<&mut Vec<f64>>,
) -> Result<()> {
    let op = Op::Gradient;
    let (backend, payload, stats) = prep.parts();
    grad_into(func, payload, op, x, contexts, out, stats)?;
    if let Some(buf) = primal.take() {
        match payload {
            // the tape already replayed at x; read the outputs off it
            Payload::Reverse(rp) => {
                rp.read_primal();
                buf.resize(1, 0.0);
                buf.copy_from_slice(&rp.y_buf);
            }
            _ => primal_into(func, payload, op, x, contexts, buf, stats)?,
        }
        ensure_finite(op, backend, "primal value", buf)?;
    }
    ensure_finite(op, backend, "gradient", out)
}

pub(crate) fn exec_jacobian<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    x: &[f64],
    contexts: &[Context],
    out: &mut DerivativeMatrix,
    mut primal: Option<&mut Vec<f64>>,
) -> Result<()> {
    let op = Op::Jacobian;
    let (backend, payload, stats) = prep.parts();
    match payload {
        Payload::Sparse(sp) => {
            let DerivativeMatrix::Sparse(mat) = out else {
                return Err(Error::prep_mismatch(
                    op,
                    &backend.id(),
                    "this preparation carries a sparse plan; pass a sparse result buffer",
                ));
            };
            if !mat.same_structure(&sp.structure) {
                return Err(Error::prep_mismatch(
                    op,
                    &backend.id(),
                    "result buffer structure differs from the prepared pattern",
                ));
            }
            exec_sparse_jacobian(func, sp, op, x, contexts, mat, primal.take(), stats)?;
            ensure_finite(op, backend, "jacobian", mat.values())?;
        }
        _ => {
            let DerivativeMatrix::Dense(mat) = out else {
                return Err(Error::prep_mismatch(
                    op,
                    &backend.id(),
                    "this preparation carries a dense plan; pass a dense result buffer",
                ));
            };
            match payload {
                Payload::Forward(fp) => {
                    fwd_basis_drive(func, fp, op, x, contexts, stats, primal.take(), |col, row, v| {
                        mat.set(row, col, v);
                    })?;
                }
                Payload::Reverse(rp) => {
                    rp.replay_at(op, x, contexts, stats)?;
                    for j in 0..func.output_len() {
                        rp.seed.fill(0.0);
                        rp.seed[j] = 1.0;
                        rp.sweep_current();
                        mat.row_mut(j).copy_from_slice(&rp.x_bar);
                    }
                    stats.pullbacks += func.output_len() as u64;
                    if let Some(buf) = primal.take() {
                        rp.read_primal();
                        buf.resize(func.output_len(), 0.0);
                        buf.copy_from_slice(&rp.y_buf);
                    }
                }
                Payload::FiniteDiff(fd) => {
                    fd_jacobian_into(
                        func,
                        &mut fd.ws,
                        &fd.rule,
                        contexts,
                        x,
                        &mut fd.basis,
                        &mut fd.column,
                        mat,
                    )
                    .map_err(|d| fd_error(op, d))?;
                    stats.function_evals += 2 * x.len() as u64;
                    stats.pushforwards += x.len() as u64;
                    if let Some(buf) = primal.take() {
                        buf.resize(func.output_len(), 0.0);
                        fd.ws.eval_value(func, contexts, x, buf);
                        stats.function_evals += 1;
                    }
                }
                _ => unreachable!("dense jacobian payloads"),
            }
            ensure_finite(op, backend, "jacobian", mat.as_slice())?;
        }
    }
    if let Some(buf) = primal {
        ensure_finite(op, backend, "primal value", buf)?;
    }
    Ok(())
}

fn exec_sparse_jacobian<F: Function>(
    func: &DifferentiableFunction<F>,
    sp: &mut SparsePrep,
    op: Op,
    x: &[f64],
    contexts: &[Context],
    out: &mut SparseMatrix,
    mut primal: Option<&mut Vec<f64>>,
    stats: &mut CallStats,
) -> Result<()> {
    let kf = sp.coloring.n_forward_colors();
    let kr = sp.coloring.n_reverse_colors();

    if kf > 0 {
        match sp.inner_fwd.as_deref_mut().expect("forward half prepared") {
            Payload::Forward(fp) => {
                let product = &mut sp.fwd_product;
                fwd_dense_drive(
                    func,
                    fp,
                    op,
                    x,
                    contexts,
                    sp.coloring.forward_seeds(),
                    stats,
                    primal.take(),
                    |color, row, v| product.set(row, color, v),
                )?;
            }
            Payload::FiniteDiff(fd) => {
                for color in 0..kf {
                    fd_pushforward_into(
                        func,
                        &mut fd.ws,
                        &fd.rule,
                        contexts,
                        x,
                        &sp.coloring.forward_seeds()[color],
                        &mut sp.fwd_pass_out,
                    )
                    .map_err(|d| fd_error(op, d))?;
                    stats.function_evals += 2;
                    for (row, &v) in sp.fwd_pass_out.iter().enumerate() {
                        sp.fwd_product.set(row, color, v);
                    }
                }
                stats.pushforwards += kf as u64;
                if let Some(buf) = primal.take() {
                    buf.resize(func.output_len(), 0.0);
                    fd.ws.eval_value(func, contexts, x, buf);
                    stats.function_evals += 1;
                }
            }
            _ => unreachable!("forward half is dual or fd"),
        }
    }

    if kr > 0 {
        match sp.inner_rev.as_deref_mut().expect("reverse half prepared") {
            Payload::Reverse(rp) => {
                rp.replay_at(op, x, contexts, stats)?;
                for color in 0..kr {
                    rp.seed
                        .copy_from_slice(&sp.coloring.reverse_seeds()[color]);
                    rp.sweep_current();
                    sp.rev_product.row_mut(color).copy_from_slice(&rp.x_bar);
                }
                stats.pullbacks += kr as u64;
                if let Some(buf) = primal.take() {
                    rp.read_primal();
                    buf.resize(func.output_len(), 0.0);
                    buf.copy_from_slice(&rp.y_buf);
                }
            }
            Payload::FiniteDiff(fd) => {
                let jac = fd.jac.as_mut().expect("fd reverse half assembles rows");
                fd_jacobian_into(
                    func,
                    &mut fd.ws,
                    &fd.rule,
                    contexts,
                    x,
                    &mut fd.basis,
                    &mut fd.column,
                    jac,
                )
                .map_err(|d| fd_error(op, d))?;
                stats.function_evals += 2 * x.len() as u64;
                for color in 0..kr {
                    let w = &sp.coloring.reverse_seeds()[color];
                    for i in 0..x.len() {
                        let v = (0..func.output_len()).map(|j| w[j] * jac.get(j, i)).sum();
                        sp.rev_product.set(color, i, v);
                    }
                }
                stats.pullbacks += kr as u64;
                if let Some(buf) = primal.take() {
                    buf.resize(func.output_len(), 0.0);
                    fd.ws.eval_value(func, contexts, x, buf);
                    stats.function_evals += 1;
                }
            }
            _ => unreachable!("reverse half is tape or fd"),
        }
    }

    // primal still wanted here means no pass ran (empty pattern)
    if let Some(buf) = primal.take() {
        let inner = sp
            .inner_fwd
            .as_deref_mut()
            .or(sp.inner_rev.as_deref_mut())
            .expect("sparse jacobian prep carries an inner payload");
        primal_into(func, inner, op, x, contexts, buf, stats)?;
    }

    decompress(sp, out);
    Ok(())
}

/// Scatter the compressed products into the result through the recovery map.
fn decompress(sp: &SparsePrep, out: &mut SparseMatrix) {
    let values = out.values_mut();
    for (entry, &vi) in sp.coloring.recovery().iter().zip(&sp.recovery_idx) {
        values[vi] = match entry.source {
            RecoverySource::Forward { color } => sp.fwd_product.get(entry.row, color),
            RecoverySource::Reverse { color } => sp.rev_product.get(color, entry.col),
        };
    }
}

pub(crate) fn exec_second_derivative<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    x: &[f64],
    contexts: &[Context],
    out: &mut [f64],
    mut primal: Option<&mut Vec<f64>>,
) -> Result<()> {
    let op = Op::SecondDerivative;
    let (backend, payload, stats) = prep.parts();
    match payload {
        Payload::FiniteDiff(fd) => {
            fd_second_derivative_into(
                func,
                &mut fd.ws,
                &fd.rule,
                contexts,
                x,
                &mut fd.base_value,
                out,
            )
            .map_err(|d| fd_error(op, d))?;
            stats.function_evals += 3;
            if let Some(buf) = primal.take() {
                buf.resize(func.output_len(), 0.0);
                buf.copy_from_slice(&fd.base_value);
            }
        }
        Payload::SecondOrder(so, _) => match so.as_mut() {
            SecondOrderPrep::DualOverTape {
                tape,
                values,
                adjoints,
                seed,
                x_dual,
                x_bar,
                recorded_constants,
            } => {
                check_constants(op, recorded_constants, contexts)?;
                x_dual[0] = Dual1 {
                    value: x[0],
                    tangents: [1.0],
                };
                tape.replay(x_dual, values).map_err(|guard| Error::TraceEscape {
                    op,
                    backend: "tape".into(),
                    detail: format!("comparison guard {guard} resolves differently at this input"),
                })?;
                stats.function_evals += 1;
                if let Some(buf) = primal.take() {
                    tape.read_outputs(values, seed);
                    buf.clear();
                    buf.extend(seed.iter().map(|d| d.value));
                }
                for j in 0..func.output_len() {
                    seed.fill(Dual1::constant(0.0));
                    seed[j] = Dual1::constant(1.0);
                    tape.sweep(values, seed, adjoints, x_bar);
                    out[j] = x_bar[0].tangents[0];
                }
                stats.pullbacks += func.output_len() as u64;
            }
            SecondOrderPrep::DualOverDual { ws, x_dual, .. } => {
                x_dual[0] = Dual1 {
                    value: x[0],
                    tangents: [1.0],
                };
                ws.load_values(x_dual);
                ws.eval_basis_chunk(func, contexts, 0..1)
                    .map_err(|p| unsupported_primitive(op, p))?;
                stats.forward_passes += 1;
                stats.function_evals += 1;
                for (j, y) in ws.y.iter().enumerate() {
                    out[j] = y.tangents[0].tangents[0];
                }
                if let Some(buf) = primal.take() {
                    buf.clear();
                    buf.extend(ws.y.iter().map(|d| d.value.value));
                }
            }
            SecondOrderPrep::FdOverInner {
                rule,
                inner,
                x_pert,
                d_plus,
                d_minus,
            } => {
                let h = rule.step_for(x);
                x_pert[0] = x[0] + h;
                deriv_into(func, inner, op, x_pert, contexts, d_plus, stats)?;
                match rule.scheme {
                    Scheme::Central => {
                        x_pert[0] = x[0] - h;
                        deriv_into(func, inner, op, x_pert, contexts, d_minus, stats)?;
                        for (o, (&p, &m)) in out.iter_mut().zip(d_plus.iter().zip(d_minus.iter())) {
                            *o = (p - m) / (2.0 * h);
                        }
                    }
                    Scheme::Forward => {
                        deriv_into(func, inner, op, x, contexts, d_minus, stats)?;
                        for (o, (&p, &m)) in out.iter_mut().zip(d_plus.iter().zip(d_minus.iter())) {
                            *o = (p - m) / h;
                        }
                    }
                }
                if let Some(buf) = primal.take() {
                    primal_into(func, inner, op, x, contexts, buf, stats)?;
                }
            }
        },
        _ => unreachable!("second_derivative payloads"),
    }
    if let Some(buf) = primal {
        ensure_finite(op, backend, "primal value", buf)?;
    }
    ensure_finite(op, backend, "second derivative", out)
}

/// Plain function value through a second-order payload. Used when a value
/// variant runs without any HVP pass (an empty Hessian pattern).
fn so_primal<F: Function>(
    func: &DifferentiableFunction<F>,
    so: &mut SecondOrderPrep,
    op: Op,
    x: &[f64],
    contexts: &[Context],
    out: &mut Vec<f64>,
    stats: &mut CallStats,
) -> Result<()> {
    out.resize(func.output_len(), 0.0);
    match so {
        SecondOrderPrep::DualOverTape {
            tape,
            values,
            seed,
            x_dual,
            recorded_constants,
            ..
        } => {
            check_constants(op, recorded_constants, contexts)?;
            for (slot, &xi) in x_dual.iter_mut().zip(x) {
                *slot = Dual1::constant(xi);
            }
            tape.replay(x_dual, values).map_err(|guard| Error::TraceEscape {
                op,
                backend: "tape".into(),
                detail: format!("comparison guard {guard} resolves differently at this input"),
            })?;
            stats.function_evals += 1;
            tape.read_outputs(values, seed);
            for (o, d) in out.iter_mut().zip(seed.iter()) {
                *o = d.value;
            }
        }
        SecondOrderPrep::DualOverDual { ws, x_dual, .. } => {
            for (slot, &xi) in x_dual.iter_mut().zip(x) {
                *slot = Dual1::constant(xi);
            }
            ws.load_values(x_dual);
            ws.eval_once(func, contexts)
                .map_err(|p| unsupported_primitive(op, p))?;
            stats.function_evals += 1;
            for (o, d) in out.iter_mut().zip(&ws.y) {
                *o = d.value.value;
            }
        }
        SecondOrderPrep::FdOverInner { inner, .. } => {
            primal_into(func, inner, op, x, contexts, out, stats)?;
        }
    }
    Ok(())
}

/// One Hessian-vector product along `v`. `primal` is filled from the same
/// nested evaluation when requested.
fn hvp_single<F: Function>(
    func: &DifferentiableFunction<F>,
    so: &mut SecondOrderPrep,
    op: Op,
    x: &[f64],
    v: &[f64],
    contexts: &[Context],
    out: &mut [f64],
    mut primal: Option<&mut Vec<f64>>,
    stats: &mut CallStats,
) -> Result<()> {
    stats.hvp_calls += 1;
    match so {
        SecondOrderPrep::DualOverTape {
            tape,
            values,
            adjoints,
            seed,
            x_dual,
            x_bar,
            recorded_constants,
        } => {
            check_constants(op, recorded_constants, contexts)?;
            for (slot, (&xi, &vi)) in x_dual.iter_mut().zip(x.iter().zip(v)) {
                *slot = Dual1 {
                    value: xi,
                    tangents: [vi],
                };
            }
            tape.replay(x_dual, values).map_err(|guard| Error::TraceEscape {
                op,
                backend: "tape".into(),
                detail: format!("comparison guard {guard} resolves differently at this input"),
            })?;
            stats.function_evals += 1;
            if let Some(buf) = primal.take() {
                tape.read_outputs(values, seed);
                buf.clear();
                buf.extend(seed.iter().map(|d| d.value));
            }
            seed[0] = Dual1::constant(1.0);
            tape.sweep(values, seed, adjoints, x_bar);
            stats.pullbacks += 1;
            for (o, d) in out.iter_mut().zip(x_bar.iter()) {
                *o = d.tangents[0];
            }
        }
        SecondOrderPrep::DualOverDual { chunk, ws, x_dual } => {
            for (slot, (&xi, &vi)) in x_dual.iter_mut().zip(x.iter().zip(v)) {
                *slot = Dual1 {
                    value: xi,
                    tangents: [vi],
                };
            }
            ws.load_values(x_dual);
            let bank = SeedBank::new(x.len(), *chunk);
            let mut first = true;
            for range in bank.chunk_ranges() {
                ws.eval_basis_chunk(func, contexts, range.clone())
                    .map_err(|p| unsupported_primitive(op, p))?;
                stats.forward_passes += 1;
                stats.function_evals += 1;
                if first {
                    if let Some(buf) = primal.take() {
                        buf.clear();
                        buf.push(ws.y[0].value.value);
                    }
                    first = false;
                }
                for (lane, idx) in range.enumerate() {
                    out[idx] = ws.y[0].tangents[lane].tangents[0];
                }
            }
        }
        SecondOrderPrep::FdOverInner {
            rule,
            inner,
            x_pert,
            d_plus,
            d_minus,
        } => {
            let h = rule.step_for(x);
            for (slot, (&xi, &vi)) in x_pert.iter_mut().zip(x.iter().zip(v)) {
                *slot = xi + h * vi;
            }
            grad_into(func, inner, op, x_pert, contexts, d_plus, stats)?;
            match rule.scheme {
                Scheme::Central => {
                    for (slot, (&xi, &vi)) in x_pert.iter_mut().zip(x.iter().zip(v)) {
                        *slot = xi - h * vi;
                    }
                    grad_into(func, inner, op, x_pert, contexts, d_minus, stats)?;
                    for (o, (&p, &m)) in out.iter_mut().zip(d_plus.iter().zip(d_minus.iter())) {
                        *o = (p - m) / (2.0 * h);
                    }
                }
                Scheme::Forward => {
                    grad_into(func, inner, op, x, contexts, d_minus, stats)?;
                    for (o, (&p, &m)) in out.iter_mut().zip(d_plus.iter().zip(d_minus.iter())) {
                        *o = (p - m) / h;
                    }
                }
            }
            if let Some(buf) = primal.take() {
                primal_into(func, inner, op, x, contexts, buf, stats)?;
            }
        }
    }
    Ok(())
}

pub(crate) fn exec_hvp<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    x: &[f64],
    seeds: &Seeds,
    contexts: &[Context],
    outs: &mut [Vec<f64>],
    mut primal: Option<&mut Vec<f64>>,
) -> Result<()> {
    let op = Op::Hvp;
    let (backend, payload, stats) = prep.parts();
    let Payload::SecondOrder(so, _) = payload else {
        unreachable!("hvp preps carry a second-order payload")
    };
    for (dir, v) in seeds.directions().iter().enumerate() {
        hvp_single(func, so, op, x, v, contexts, &mut outs[dir], primal.take(), stats)?;
    }
    for out in outs.iter() {
        ensure_finite(op, backend, "hvp", out)?;
    }
    Ok(())
}

pub(crate) fn exec_hessian<F: Function>(
    func: &DifferentiableFunction<F>,
    prep: &mut Preparation,
    x: &[f64],
    contexts: &[Context],
    out: &mut DerivativeMatrix,
    mut primal: Option<&mut Vec<f64>>,
) -> Result<()> {
    let op = Op::Hessian;
    let (backend, payload, stats) = prep.parts();
    match payload {
        Payload::SecondOrder(so, scratch) => {
            let DerivativeMatrix::Dense(mat) = out else {
                return Err(Error::prep_mismatch(
                    op,
                    &backend.id(),
                    "this preparation carries a dense plan; pass a dense result buffer",
                ));
            };
            let n = x.len();
            for i in 0..n {
                scratch.direction[i] = 1.0;
                hvp_single(
                    func,
                    so,
                    op,
                    x,
                    &scratch.direction,
                    contexts,
                    &mut scratch.column,
                    primal.take(),
                    stats,
                )?;
                scratch.direction[i] = 0.0;
                for r in 0..n {
                    mat.set(r, i, scratch.column[r]);
                }
            }
            // per-column HVPs can differ in the last ulp across the diagonal
            mat.symmetrize();
            ensure_finite(op, backend, "hessian", mat.as_slice())?;
        }
        Payload::Sparse(sp) => {
            let DerivativeMatrix::Sparse(mat) = out else {
                return Err(Error::prep_mismatch(
                    op,
                    &backend.id(),
                    "this preparation carries a sparse plan; pass a sparse result buffer",
                ));
            };
            if !mat.same_structure(&sp.structure) {
                return Err(Error::prep_mismatch(
                    op,
                    &backend.id(),
                    "result buffer structure differs from the prepared pattern",
                ));
            }
            let so = sp.inner_hvp.as_deref_mut().expect("sparse hessian has an hvp payload");
            for color in 0..sp.coloring.n_forward_colors() {
                hvp_single(
                    func,
                    so,
                    op,
                    x,
                    &sp.coloring.forward_seeds()[color],
                    contexts,
                    &mut sp.fwd_pass_out,
                    primal.take(),
                    stats,
                )?;
                for (row, &v) in sp.fwd_pass_out.iter().enumerate() {
                    sp.fwd_product.set(row, color, v);
                }
            }
            if let Some(buf) = primal.take() {
                so_primal(func, so, op, x, contexts, buf, stats)?;
            }
            decompress(sp, mat);
            // mirror-average the off-diagonal pairs
            let values = mat.values_mut();
            for &(a, b) in &sp.sym_pairs {
                let avg = (values[a] + values[b]) / 2.0;
                values[a] = avg;
                values[b] = avg;
            }
            ensure_finite(op, backend, "hessian", mat.values())?;
        }
        _ => unreachable!("hessian payloads"),
    }
    if let Some(buf) = primal {
        ensure_finite(op, backend, "primal value", buf)?;
    }
    Ok(())
}
