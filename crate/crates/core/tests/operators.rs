//! Per-operator contract tests against hand values, closed forms and
//! independent central-difference oracles.

mod common;

use adkit_core::{
    derivative, gradient, hessian, hvp, jacobian, prepare, pullback, pushforward,
    second_derivative, Backend, DifferentiableFunction, Error, EvalContexts, Function,
    Matrix, Op, Scalar, Seeds,
};
use common::*;

struct ElementwiseSquare;
impl Function for ElementwiseSquare {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        for (out, &v) in y.iter_mut().zip(x) {
            *out = v * v;
        }
    }
}

/// `f(x) = [x1 x2, x2 + x3]`, the worked 2x3 example.
struct ProductAndSum;
impl Function for ProductAndSum {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        y[0] = x[0] * x[1];
        y[1] = x[1] + x[2];
    }
}

struct SinX;
impl Function for SinX {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        y[0] = x[0].sin();
    }
}

struct XAndXSquared;
impl Function for XAndXSquared {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        y[0] = x[0];
        y[1] = x[0] * x[0];
    }
}

struct ExpScaled(f64);
impl Function for ExpScaled {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        y[0] = (x[0] * self.0).exp();
    }
}

struct Cube;
impl Function for Cube {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        y[0] = x[0].powi(3);
    }
}

struct SumOfInputs;
impl Function for SumOfInputs {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        y[0] = adkit_core::sum(x);
    }
}

/// `f(x) = x1^2 x2`, hand Hessian `[[2 x2, 2 x1], [2 x1, 0]]`.
struct SquareTimes;
impl Function for SquareTimes {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        y[0] = x[0] * x[0] * x[1];
    }
}

struct Identity;
impl Function for Identity {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
        y.copy_from_slice(x);
    }
}

fn first_order_backends() -> Vec<Backend> {
    vec![Backend::forward(), Backend::reverse(), Backend::finite_diff()]
}

fn second_order_backends() -> Vec<Backend> {
    vec![
        Backend::second_order(Backend::forward(), Backend::reverse()),
        Backend::forward(),
    ]
}

fn tol_for(backend: &Backend) -> f64 {
    match backend.id().as_str() {
        "fd" => 1e-6,
        _ => 1e-12,
    }
}

// --- prepare -----------------------------------------------------------------

#[test]
fn prepare_gradient_on_forward_builds_basis_plan() {
    let func = DifferentiableFunction::new(SquaredNorm, 10, 1);
    let prep = prepare(Op::Gradient, &func, &Backend::forward(), &[0.0; 10], &[]).unwrap();
    assert_eq!(
        prep.plan().steps(),
        &[
            adkit_core::PlanStep::BasisPushforwards { count: 10 },
            adkit_core::PlanStep::Pushforward {
                backend: "dual".into()
            }
        ]
    );
}

#[test]
fn prepare_rejects_mismatched_typical_input() {
    let func = DifferentiableFunction::new(ProductAndSum, 3, 2);
    for backend in first_order_backends() {
        let err = prepare(Op::Jacobian, &func, &backend, &[0.0; 4], &[]).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }), "{backend:?}");
    }
}

// --- pushforward --------------------------------------------------------------

#[test]
fn pushforward_elementwise_square() {
    let func = DifferentiableFunction::new(ElementwiseSquare, 1, 1);
    for backend in first_order_backends() {
        let x = [3.0];
        let mut prep = prepare(Op::Pushforward, &func, &backend, &x, &[]).unwrap();
        let t = pushforward(&func, &mut prep, &backend, &x, &Seeds::single(vec![1.0]), &[])
            .unwrap();
        assert!((t[0][0] - 6.0).abs() <= tol_for(&backend) * 10.0, "{backend:?}");
    }
}

#[test]
fn pushforward_first_jacobian_column() {
    let func = DifferentiableFunction::new(ProductAndSum, 3, 2);
    let x = [1.0, 2.0, 3.0];
    for backend in first_order_backends() {
        let mut prep = prepare(Op::Pushforward, &func, &backend, &x, &[]).unwrap();
        let t = pushforward(
            &func,
            &mut prep,
            &backend,
            &x,
            &Seeds::single(vec![1.0, 0.0, 0.0]),
            &[],
        )
        .unwrap();
        assert!(max_abs_diff(&t[0], &[2.0, 0.0]) <= tol_for(&backend) * 10.0, "{backend:?}");
    }
}

#[test]
fn pushforward_extracts_columns_of_linear_map() {
    let mut r = rng(41);
    let a = {
        let mut m = Matrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                m.set(i, j, random_vec(&mut r, 1)[0]);
            }
        }
        m
    };
    let map = PolyMap::linear_map(&a);
    let func = DifferentiableFunction::new(map, 4, 4);
    let x = random_vec(&mut r, 4);
    let e2: Vec<f64> = (0..4).map(|i| if i == 1 { 1.0 } else { 0.0 }).collect();
    let expected: Vec<f64> = (0..4).map(|i| a.get(i, 1)).collect();
    for backend in first_order_backends() {
        let mut prep = prepare(Op::Pushforward, &func, &backend, &x, &[]).unwrap();
        let t = pushforward(&func, &mut prep, &backend, &x, &Seeds::single(e2.clone()), &[])
            .unwrap();
        assert!(max_abs_diff(&t[0], &expected) <= tol_for(&backend) * 10.0, "{backend:?}");
    }
}

// --- pullback -----------------------------------------------------------------

#[test]
fn pullback_scalar_square() {
    let func = DifferentiableFunction::new(ElementwiseSquare, 1, 1);
    let x = [3.0];
    for backend in [Backend::reverse(), Backend::finite_diff()] {
        let mut prep = prepare(Op::Pullback, &func, &backend, &x, &[]).unwrap();
        let c = pullback(&func, &mut prep, &backend, &x, &Seeds::single(vec![1.0]), &[]).unwrap();
        assert!((c[0][0] - 6.0).abs() <= tol_for(&backend) * 10.0, "{backend:?}");
    }
}

#[test]
fn pullback_first_jacobian_row() {
    let func = DifferentiableFunction::new(ProductAndSum, 3, 2);
    let x = [1.0, 2.0, 3.0];
    for backend in [Backend::reverse(), Backend::finite_diff()] {
        let mut prep = prepare(Op::Pullback, &func, &backend, &x, &[]).unwrap();
        let c = pullback(
            &func,
            &mut prep,
            &backend,
            &x,
            &Seeds::single(vec![1.0, 0.0]),
            &[],
        )
        .unwrap();
        assert!(max_abs_diff(&c[0], &[2.0, 1.0, 0.0]) <= tol_for(&backend) * 10.0, "{backend:?}");
    }
}

#[test]
fn pullback_row_matches_central_difference_oracle() {
    let mut r = rng(42);
    let map = PolyMap::random(&mut r, 5, 3);
    let x = random_vec(&mut r, 5);
    let func = DifferentiableFunction::new(map.clone(), 5, 3);
    let jac = oracle_jacobian_default(|x| map.eval_f64(x), &x);
    let expected: Vec<f64> = (0..5).map(|i| jac.get(0, i)).collect();

    let backend = Backend::reverse();
    let mut prep = prepare(Op::Pullback, &func, &backend, &x, &[]).unwrap();
    let c = pullback(
        &func,
        &mut prep,
        &backend,
        &x,
        &Seeds::single(vec![1.0, 0.0, 0.0]),
        &[],
    )
    .unwrap();
    assert!(max_abs_diff(&c[0], &expected) < 1e-6);
}

// --- derivative ---------------------------------------------------------------

#[test]
fn derivative_of_sin_at_zero() {
    let func = DifferentiableFunction::new(SinX, 1, 1);
    for backend in first_order_backends() {
        let mut prep = prepare(Op::Derivative, &func, &backend, &[0.0], &[]).unwrap();
        let d = derivative(&func, &mut prep, &backend, &[0.0], &[]).unwrap();
        assert!((d[0] - 1.0).abs() <= tol_for(&backend) * 100.0, "{backend:?}");
    }
}

#[test]
fn derivative_of_vector_valued_function() {
    let func = DifferentiableFunction::new(XAndXSquared, 1, 2);
    for backend in first_order_backends() {
        let mut prep = prepare(Op::Derivative, &func, &backend, &[2.0], &[]).unwrap();
        let d = derivative(&func, &mut prep, &backend, &[2.0], &[]).unwrap();
        assert!(max_abs_diff(&d, &[1.0, 4.0]) <= tol_for(&backend) * 100.0, "{backend:?}");
    }
}

#[test]
fn derivative_of_exp_closed_form() {
    // d/dx exp(3x) at 0.5 is 3 e^{1.5}
    let func = DifferentiableFunction::new(ExpScaled(3.0), 1, 1);
    let expected = 3.0 * 1.5f64.exp();
    for backend in first_order_backends() {
        let mut prep = prepare(Op::Derivative, &func, &backend, &[0.5], &[]).unwrap();
        let d = derivative(&func, &mut prep, &backend, &[0.5], &[]).unwrap();
        assert!(
            (d[0] - expected).abs() <= tol_for(&backend) * 100.0,
            "{backend:?}: {} vs {expected}",
            d[0]
        );
    }
}

#[test]
fn derivative_rejects_non_scalar_input() {
    let func = DifferentiableFunction::new(ProductAndSum, 3, 2);
    let err = prepare(Op::Derivative, &func, &Backend::forward(), &[0.0; 3], &[]).unwrap_err();
    assert!(matches!(err, Error::ShapeMismatch { .. }));
}

// --- gradient -----------------------------------------------------------------

#[test]
fn gradient_of_squared_norm() {
    let func = DifferentiableFunction::new(SquaredNorm, 3, 1);
    let x = [1.0, 2.0, 3.0];
    for backend in first_order_backends() {
        let mut prep = prepare(Op::Gradient, &func, &backend, &x, &[]).unwrap();
        let g = gradient(&func, &mut prep, &backend, &x, &[]).unwrap();
        assert!(max_abs_diff(&g, &[2.0, 4.0, 6.0]) <= tol_for(&backend) * 10.0, "{backend:?}");
    }
}

#[test]
fn gradient_of_plain_sum_is_all_ones() {
    let func = DifferentiableFunction::new(SumOfInputs, 4, 1);
    let mut r = rng(7);
    let x = random_vec(&mut r, 4);
    for backend in first_order_backends() {
        let mut prep = prepare(Op::Gradient, &func, &backend, &x, &[]).unwrap();
        let g = gradient(&func, &mut prep, &backend, &x, &[]).unwrap();
        assert!(max_abs_diff(&g, &[1.0; 4]) <= tol_for(&backend), "{backend:?}");
    }
}

#[test]
fn gradient_of_quadratic_form_matches_matrix_formula() {
    let mut r = rng(11);
    let qf = QuadraticForm::random_symmetric(&mut r, 6);
    let x = random_vec(&mut r, 6);
    let expected = qf.gradient_at(&x);
    let func = DifferentiableFunction::new(qf.clone(), 6, 1);
    for backend in first_order_backends() {
        let mut prep = prepare(Op::Gradient, &func, &backend, &x, &[]).unwrap();
        let g = gradient(&func, &mut prep, &backend, &x, &[]).unwrap();
        assert!(max_abs_diff(&g, &expected) <= tol_for(&backend) * 100.0, "{backend:?}");
    }
}

#[test]
fn gradient_rejects_non_scalar_output() {
    let func = DifferentiableFunction::new(ProductAndSum, 3, 2);
    let err = prepare(Op::Gradient, &func, &Backend::reverse(), &[0.0; 3], &[]).unwrap_err();
    assert!(matches!(err, Error::ShapeMismatch { .. }));
}

// --- jacobian -----------------------------------------------------------------

#[test]
fn jacobian_of_identity() {
    let func = DifferentiableFunction::new(Identity, 3, 3);
    let x = [4.0, -1.0, 0.5];
    for backend in first_order_backends() {
        let mut prep = prepare(Op::Jacobian, &func, &backend, &x, &[]).unwrap();
        let jac = jacobian(&func, &mut prep, &backend, &x, &[]).unwrap();
        let expected = Matrix::identity(3);
        assert!(jac.to_dense().max_abs_diff(&expected) <= tol_for(&backend), "{backend:?}");
    }
}

#[test]
fn jacobian_hand_example() {
    let func = DifferentiableFunction::new(ProductAndSum, 3, 2);
    let x = [1.0, 2.0, 3.0];
    let expected = Matrix::from_rows(2, 3, vec![2.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
    for backend in first_order_backends() {
        let mut prep = prepare(Op::Jacobian, &func, &backend, &x, &[]).unwrap();
        let jac = jacobian(&func, &mut prep, &backend, &x, &[]).unwrap();
        assert!(jac.to_dense().max_abs_diff(&expected) <= tol_for(&backend) * 10.0, "{backend:?}");
    }
}

#[test]
fn jacobian_matches_central_difference_oracle() {
    let mut r = rng(12);
    let map = PolyMap::random(&mut r, 6, 4);
    let x = random_vec(&mut r, 6);
    let func = DifferentiableFunction::new(map.clone(), 6, 4);
    let reference = oracle_jacobian_default(|x| map.eval_f64(x), &x);
    for backend in first_order_backends() {
        let mut prep = prepare(Op::Jacobian, &func, &backend, &x, &[]).unwrap();
        let jac = jacobian(&func, &mut prep, &backend, &x, &[]).unwrap();
        assert!(jac.to_dense().max_abs_diff(&reference) < 1e-6, "{backend:?}");
    }
}

// --- second derivative -----------------------------------------------------------

#[test]
fn second_derivative_of_cube() {
    let func = DifferentiableFunction::new(Cube, 1, 1);
    for backend in second_order_backends() {
        let mut prep = prepare(Op::SecondDerivative, &func, &backend, &[2.0], &[]).unwrap();
        let d2 = second_derivative(&func, &mut prep, &backend, &[2.0], &[]).unwrap();
        assert!((d2[0] - 12.0).abs() < 1e-10, "{backend:?}: {}", d2[0]);
    }
    // fd uses its native stencil
    let backend = Backend::finite_diff();
    let func = DifferentiableFunction::new(Cube, 1, 1);
    let mut prep = prepare(Op::SecondDerivative, &func, &backend, &[2.0], &[]).unwrap();
    let d2 = second_derivative(&func, &mut prep, &backend, &[2.0], &[]).unwrap();
    assert!((d2[0] - 12.0).abs() < 1e-4, "fd stencil: {}", d2[0]);
}

#[test]
fn second_derivative_of_sin_at_zero() {
    let func = DifferentiableFunction::new(SinX, 1, 1);
    for backend in second_order_backends() {
        let mut prep = prepare(Op::SecondDerivative, &func, &backend, &[0.0], &[]).unwrap();
        let d2 = second_derivative(&func, &mut prep, &backend, &[0.0], &[]).unwrap();
        assert!(d2[0].abs() < 1e-10, "{backend:?}");
    }
}

#[test]
fn second_derivative_exp_closed_form() {
    // d2/dx2 exp(2x) at 0.3 is 4 e^{0.6}
    let func = DifferentiableFunction::new(ExpScaled(2.0), 1, 1);
    let expected = 4.0 * 0.6f64.exp();
    for backend in second_order_backends() {
        let mut prep = prepare(Op::SecondDerivative, &func, &backend, &[0.3], &[]).unwrap();
        let d2 = second_derivative(&func, &mut prep, &backend, &[0.3], &[]).unwrap();
        assert!((d2[0] - expected).abs() < 1e-10, "{backend:?}");
    }
}

// --- hvp -----------------------------------------------------------------------

#[test]
fn hvp_of_squared_norm_is_twice_seed() {
    let func = DifferentiableFunction::new(SquaredNorm, 5, 1);
    let mut r = rng(13);
    let x = random_vec(&mut r, 5);
    let e3: Vec<f64> = (0..5).map(|i| if i == 2 { 1.0 } else { 0.0 }).collect();
    for backend in second_order_backends() {
        let mut prep = prepare(Op::Hvp, &func, &backend, &x, &[]).unwrap();
        let h = hvp(&func, &mut prep, &backend, &x, &Seeds::single(e3.clone()), &[]).unwrap();
        let expected: Vec<f64> = e3.iter().map(|v| 2.0 * v).collect();
        assert!(max_abs_diff(&h[0], &expected) < 1e-12, "{backend:?}");
    }
}

#[test]
fn hvp_hand_hessian_example() {
    let func = DifferentiableFunction::new(SquareTimes, 2, 1);
    let x = [1.0, 1.0];
    for backend in second_order_backends() {
        let mut prep = prepare(Op::Hvp, &func, &backend, &x, &[]).unwrap();
        let h = hvp(
            &func,
            &mut prep,
            &backend,
            &x,
            &Seeds::single(vec![1.0, 0.0]),
            &[],
        )
        .unwrap();
        assert!(max_abs_diff(&h[0], &[2.0, 2.0]) < 1e-12, "{backend:?}");
    }
}

#[test]
fn hvp_matches_gradient_difference_oracle() {
    let mut r = rng(14);
    let field = QuarticField::random(&mut r, 6, 4);
    let x = random_vec(&mut r, 6);
    let v = random_vec(&mut r, 6);
    let func = DifferentiableFunction::new(field.clone(), 6, 1);

    // (grad(x + eps v) - grad(x - eps v)) / (2 eps) on the closed-form gradient
    let eps = 1e-6;
    let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
    let xm: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - eps * b).collect();
    let gp = field.gradient_at(&xp);
    let gm = field.gradient_at(&xm);
    let expected: Vec<f64> = gp
        .iter()
        .zip(&gm)
        .map(|(p, m)| (p - m) / (2.0 * eps))
        .collect();

    for backend in second_order_backends() {
        let mut prep = prepare(Op::Hvp, &func, &backend, &x, &[]).unwrap();
        let h = hvp(&func, &mut prep, &backend, &x, &Seeds::single(v.clone()), &[]).unwrap();
        assert!(max_abs_diff(&h[0], &expected) < 1e-5, "{backend:?}");
    }
}

// --- hessian ---------------------------------------------------------------------

#[test]
fn hessian_of_squared_norm() {
    let func = DifferentiableFunction::new(SquaredNorm, 4, 1);
    let mut r = rng(15);
    let x = random_vec(&mut r, 4);
    let mut expected = Matrix::identity(4);
    for i in 0..4 {
        expected.set(i, i, 2.0);
    }
    for backend in second_order_backends() {
        let mut prep = prepare(Op::Hessian, &func, &backend, &x, &[]).unwrap();
        let h = hessian(&func, &mut prep, &backend, &x, &[]).unwrap();
        assert!(h.to_dense().max_abs_diff(&expected) < 1e-12, "{backend:?}");
    }
}

#[test]
fn hessian_hand_example() {
    let func = DifferentiableFunction::new(SquareTimes, 2, 1);
    let x = [1.0, 1.0];
    let expected = Matrix::from_rows(2, 2, vec![2.0, 2.0, 2.0, 0.0]);
    for backend in second_order_backends() {
        let mut prep = prepare(Op::Hessian, &func, &backend, &x, &[]).unwrap();
        let h = hessian(&func, &mut prep, &backend, &x, &[]).unwrap();
        assert!(h.to_dense().max_abs_diff(&expected) < 1e-12, "{backend:?}");
    }
}

#[test]
fn hessian_matches_second_difference_oracle() {
    let mut r = rng(16);
    let field = QuarticField::random(&mut r, 5, 3);
    let x = random_vec(&mut r, 5);
    let func = DifferentiableFunction::new(field.clone(), 5, 1);
    let reference = oracle_hessian(|x| field.eval_f64(x), &x, 1e-4);
    for backend in second_order_backends() {
        let mut prep = prepare(Op::Hessian, &func, &backend, &x, &[]).unwrap();
        let h = hessian(&func, &mut prep, &backend, &x, &[]).unwrap();
        assert!(h.to_dense().max_abs_diff(&reference) < 1e-4, "{backend:?}");
    }
}

#[test]
fn hessian_is_exactly_symmetric() {
    let mut r = rng(17);
    let field = QuarticField::random(&mut r, 6, 4);
    let x = random_vec(&mut r, 6);
    let func = DifferentiableFunction::new(field, 6, 1);
    let backend = Backend::second_order(Backend::forward(), Backend::reverse());
    let mut prep = prepare(Op::Hessian, &func, &backend, &x, &[]).unwrap();
    let h = hessian(&func, &mut prep, &backend, &x, &[]).unwrap().to_dense();
    for i in 0..6 {
        for j in 0..6 {
            assert_eq!(h.get(i, j).to_bits(), h.get(j, i).to_bits());
        }
    }
}

// --- preparation misuse -----------------------------------------------------------

#[test]
fn preparation_mismatch_is_detected() {
    let func3 = DifferentiableFunction::new(SquaredNorm, 3, 1);
    let func4 = DifferentiableFunction::new(SquaredNorm, 4, 1);
    let backend = Backend::reverse();
    let mut prep = prepare(Op::Gradient, &func3, &backend, &[0.0; 3], &[]).unwrap();

    // wrong input length
    let err = gradient(&func4, &mut prep, &backend, &[0.0; 4], &[]).unwrap_err();
    assert!(matches!(err, Error::PreparationMismatch { .. }));

    // wrong backend
    let err = gradient(&func3, &mut prep, &Backend::forward(), &[0.0; 3], &[]).unwrap_err();
    assert!(matches!(err, Error::PreparationMismatch { .. }));

    // wrong backend parameters count as a different backend
    let err = gradient(
        &func3,
        &mut prep,
        &Backend::forward_with_chunk(4),
        &[0.0; 3],
        &[],
    )
    .unwrap_err();
    assert!(matches!(err, Error::PreparationMismatch { .. }));

    // wrong operator
    let err = derivative(
        &DifferentiableFunction::new(SinX, 1, 1),
        &mut prep,
        &backend,
        &[0.0],
        &[],
    )
    .unwrap_err();
    assert!(matches!(err, Error::PreparationMismatch { .. }));
}

#[test]
fn empty_seed_batch_is_rejected() {
    let func = DifferentiableFunction::new(ElementwiseSquare, 2, 2);
    let backend = Backend::forward();
    let x = [1.0, 2.0];
    let mut prep = prepare(Op::Pushforward, &func, &backend, &x, &[]).unwrap();
    let err = pushforward(&func, &mut prep, &backend, &x, &Seeds::new(vec![]), &[]).unwrap_err();
    assert!(matches!(err, Error::ShapeMismatch { .. }));
}

#[test]
fn non_finite_results_are_flagged() {
    struct InvX;
    impl Function for InvX {
        fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
            y[0] = S::from_f64(1.0) / x[0];
        }
    }
    let func = DifferentiableFunction::new(InvX, 1, 1);
    let backend = Backend::forward();
    let mut prep = prepare(Op::Gradient, &func, &backend, &[1.0], &[]).unwrap();
    let err = gradient(&func, &mut prep, &backend, &[0.0], &[]).unwrap_err();
    assert!(matches!(err, Error::NonFiniteResult { .. }));
}

#[test]
fn in_place_functions_run_on_tape_and_fd_only() {
    struct Doubler;
    impl Function for Doubler {
        fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _: &mut EvalContexts<'_, S>) {
            for (out, &v) in y.iter_mut().zip(x) {
                *out = v * 2.0;
            }
        }
    }
    let func = DifferentiableFunction::new_in_place(Doubler, 3, 3);
    let x = [1.0, 2.0, 3.0];
    let err = prepare(Op::Jacobian, &func, &Backend::forward(), &x, &[]).unwrap_err();
    assert!(matches!(err, Error::UnsupportedOperator { .. }));

    for backend in [Backend::reverse(), Backend::finite_diff()] {
        let mut prep = prepare(Op::Jacobian, &func, &backend, &x, &[]).unwrap();
        let jac = jacobian(&func, &mut prep, &backend, &x, &[]).unwrap().to_dense();
        let mut expected = Matrix::zeros(3, 3);
        for i in 0..3 {
            expected.set(i, i, 2.0);
        }
        assert!(jac.max_abs_diff(&expected) < 1e-8, "{backend:?}");
    }
}
