//! Reverse-backend properties: tape reuse, adjoint completeness, trace
//! escapes, zero-allocation steady state.

mod common;

use adkit_core::alloccount::{self, CountingAllocator};
use adkit_core::{
    gradient, gradient_into, jacobian, prepare, pullback, value_and_pullback, Backend, Context,
    ContextSpec, DifferentiableFunction, Error, EvalContexts, Function, Op, Scalar, Seeds,
};
use common::*;

#[global_allocator]
static ALLOC: CountingAllocator = CountingAllocator;

/// For branch-free functions, a tape recorded once gives bitwise-identical
/// results to freshly recorded tapes at 50 random inputs.
#[test]
fn tape_reuse_matches_fresh_recordings() {
    let mut r = rng(300);
    let map = PolyMap::random(&mut r, 6, 3);
    let func = DifferentiableFunction::new(map, 6, 3);
    let backend = Backend::reverse();
    let mut reused = prepare(Op::Pullback, &func, &backend, &[0.0; 6], &[]).unwrap();

    for _ in 0..50 {
        let x = random_vec(&mut r, 6);
        let w = Seeds::single(random_vec(&mut r, 3));
        let mut fresh = prepare(Op::Pullback, &func, &backend, &x, &[]).unwrap();
        let a = pullback(&func, &mut reused, &backend, &x, &w, &[]).unwrap();
        let b = pullback(&func, &mut fresh, &backend, &x, &w, &[]).unwrap();
        assert_bits_eq(&a[0], &b[0], "reused vs fresh");
    }
}

/// Replay at a new input reproduces the function value exactly for
/// branch-free functions (tape recorded at zeros).
#[test]
fn replay_refreshes_values() {
    let mut r = rng(301);
    let map = PolyMap::random(&mut r, 4, 2);
    let func = DifferentiableFunction::new(map.clone(), 4, 2);
    let backend = Backend::reverse();
    let mut prep = prepare(Op::Pullback, &func, &backend, &[0.0; 4], &[]).unwrap();

    for _ in 0..10 {
        let x = random_vec(&mut r, 4);
        let (value, _) = value_and_pullback(
            &func,
            &mut prep,
            &backend,
            &x,
            &Seeds::single(vec![1.0, 0.0]),
            &[],
        )
        .unwrap();
        assert_bits_eq(&value, &map.eval_f64(&x), "replayed value");
    }
}

/// The sum function's reverse sweep returns all ones at any input.
#[test]
fn adjoint_completeness_on_sum() {
    struct SumAll;
    impl Function for SumAll {
        fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
            y[0] = adkit_core::sum(x);
        }
    }
    let mut r = rng(302);
    let func = DifferentiableFunction::new(SumAll, 8, 1);
    let backend = Backend::reverse();
    let mut prep = prepare(Op::Gradient, &func, &backend, &[0.0; 8], &[]).unwrap();
    for _ in 0..5 {
        let x = random_vec(&mut r, 8);
        let g = gradient(&func, &mut prep, &backend, &x, &[]).unwrap();
        assert_bits_eq(&g, &[1.0; 8], "sum adjoints");
    }
}

/// No heap allocation in the prepared replay + sweep path.
#[test]
fn zero_allocation_steady_state() {
    let n = 128;
    let func = DifferentiableFunction::new(SquaredNorm, n, 1);
    let x = vec![0.25; n];
    let backend = Backend::reverse();
    let mut prep = prepare(Op::Gradient, &func, &backend, &x, &[]).unwrap();
    let mut out = vec![0.0; n];

    gradient_into(&func, &mut prep, &backend, &x, &[], &mut out).unwrap();
    assert!(alloccount::installed());
    let ((), allocs) = alloccount::count_allocations(|| {
        for _ in 0..10 {
            gradient_into(&func, &mut prep, &backend, &x, &[], &mut out).unwrap();
        }
    });
    assert_eq!(allocs, 0, "prepared tape gradient_into must not allocate");
}

/// Per-element branch on the comparison API: the guard detects a replay on
/// the wrong side of the branch.
struct Branchy;
impl Function for Branchy {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        let threshold = S::from_f64(1.0);
        let mut acc = S::from_f64(0.0);
        for &v in x {
            acc = acc + if v > threshold { v * v } else { v.sin() * 2.0 };
        }
        y[0] = acc;
    }
}

#[test]
fn trace_escape_reported_on_flipped_branch() {
    let func = DifferentiableFunction::new(Branchy, 3, 1);
    let backend = Backend::reverse();
    let x0 = [2.0, 0.5, 3.0];
    let mut prep = prepare(Op::Gradient, &func, &backend, &x0, &[]).unwrap();

    // same branch pattern: fine, and correct
    let x1 = [4.0, -0.5, 1.5];
    let g = gradient(&func, &mut prep, &backend, &x1, &[]).unwrap();
    let expected = [2.0 * 4.0, 2.0 * (-0.5f64).cos(), 2.0 * 1.5];
    assert!(max_abs_diff(&g, &expected) < 1e-14);

    // x[1] crosses the threshold: the guard fires instead of returning the
    // stale branch's derivative
    let x2 = [4.0, 1.5, 3.0];
    let err = gradient(&func, &mut prep, &backend, &x2, &[]).unwrap_err();
    assert!(matches!(err, Error::TraceEscape { .. }), "{err:?}");

    // the forward backend has no such restriction
    let fwd = Backend::forward();
    let mut fwd_prep = prepare(Op::Gradient, &func, &fwd, &x0, &[]).unwrap();
    let g = gradient(&func, &mut fwd_prep, &fwd, &x2, &[]).unwrap();
    let expected = [2.0 * 4.0, 2.0 * 1.5, 2.0 * 3.0];
    assert!(max_abs_diff(&g, &expected) < 1e-14);
}

/// Changed constant payloads are rejected instead of replayed stale.
#[test]
fn changed_constants_invalidate_preparation() {
    struct ScaleBy;
    impl Function for ScaleBy {
        fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], ctx: &mut EvalContexts<'_, S>) {
            let c = ctx.constant(0)[0];
            y[0] = x[0] * c;
        }
    }
    let func = DifferentiableFunction::new(ScaleBy, 1, 1)
        .with_context(ContextSpec::Constant { len: 1 });
    let backend = Backend::reverse();
    let ctx_a = [Context::Constant(vec![4.0])];
    let mut prep = prepare(Op::Gradient, &func, &backend, &[2.0], &ctx_a).unwrap();
    let g = gradient(&func, &mut prep, &backend, &[2.0], &ctx_a).unwrap();
    assert_eq!(g, vec![4.0]);

    let ctx_b = [Context::Constant(vec![5.0])];
    let err = gradient(&func, &mut prep, &backend, &[2.0], &ctx_b).unwrap_err();
    assert!(matches!(err, Error::PreparationMismatch { .. }));

    // the dual backend reads constants live, so no restriction there
    let fwd = Backend::forward();
    let mut prep = prepare(Op::Gradient, &func, &fwd, &[2.0], &ctx_a).unwrap();
    let g = gradient(&func, &mut prep, &fwd, &[2.0], &ctx_b).unwrap();
    assert_eq!(g, vec![5.0]);
}

/// atan2 is a registered tape primitive.
#[test]
fn atan2_gradient_through_tape() {
    struct Atan2Sum;
    impl Function for Atan2Sum {
        fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
            y[0] = x[0].atan2(x[1]);
        }
    }
    let func = DifferentiableFunction::new(Atan2Sum, 2, 1);
    let backend = Backend::reverse();
    let x = [1.0, 2.0];
    let mut prep = prepare(Op::Gradient, &func, &backend, &x, &[]).unwrap();
    let g = gradient(&func, &mut prep, &backend, &x, &[]).unwrap();
    let denom = x[0] * x[0] + x[1] * x[1];
    assert!(max_abs_diff(&g, &[x[1] / denom, -x[0] / denom]) < 1e-15);
}

/// In-place functions trace and differentiate through the tape.
#[test]
fn in_place_function_jacobian() {
    struct Stencil;
    impl Function for Stencil {
        fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
            let n = x.len();
            for i in 0..n {
                let left = if i > 0 { x[i - 1] } else { S::from_f64(0.0) };
                let right = if i + 1 < n { x[i + 1] } else { S::from_f64(0.0) };
                y[i] = left - x[i] * 2.0 + right;
            }
        }
    }
    let func = DifferentiableFunction::new_in_place(Stencil, 4, 4);
    let backend = Backend::reverse();
    let x = [1.0, 2.0, 3.0, 4.0];
    let mut prep = prepare(Op::Jacobian, &func, &backend, &x, &[]).unwrap();
    let jac = jacobian(&func, &mut prep, &backend, &x, &[]).unwrap().to_dense();
    for i in 0..4usize {
        for j in 0..4usize {
            let expected = if i == j {
                -2.0
            } else if i.abs_diff(j) == 1 {
                1.0
            } else {
                0.0
            };
            assert_eq!(jac.get(i, j), expected);
        }
    }
}
