//! Backend-agnostic automatic differentiation.
//!
//! One set of differentiation operators — pushforward, pullback,
//! derivative, gradient, jacobian, second_derivative, hvp, hessian — runs
//! on interchangeable backends: dual-number forward mode, tape-recording
//! reverse mode, and finite differences, plus composite wrappers for
//! stacking modes, mixing them in sparse Jacobians, and translating a
//! function to a different backend.
//!
//! Repeated differentiation goes through a preparation step that amortizes
//! one-time work (tape recording, seed and workspace allocation, sparsity
//! detection and coloring):
//!
//! ```
//! use adkit_core::{
//!     gradient, prepare, Backend, DifferentiableFunction, EvalContexts, Function, Op, Scalar,
//! };
//!
//! struct SquaredNorm;
//!
//! impl Function for SquaredNorm {
//!     fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], _ctx: &mut EvalContexts<'_, S>) {
//!         let mut acc = x[0] * x[0];
//!         for &v in &x[1..] {
//!             acc = acc + v * v;
//!         }
//!         y[0] = acc;
//!     }
//! }
//!
//! let func = DifferentiableFunction::new(SquaredNorm, 3, 1);
//! let backend = Backend::reverse();
//! let x = [1.0, 2.0, 3.0];
//! let mut prep = prepare(Op::Gradient, &func, &backend, &x, &[]).unwrap();
//! let grad = gradient(&func, &mut prep, &backend, &x, &[]).unwrap();
//! assert_eq!(grad, vec![2.0, 4.0, 6.0]);
//! ```

pub mod alloccount;
mod backend;
mod context;
mod error;
mod exec;
mod fallback;
pub mod finitediff;
pub mod forward;
mod function;
mod matrix;
mod ops;
mod prep;
pub mod reverse;
mod scalar;
mod seed;
pub mod sparse;

pub use backend::{Backend, Capabilities, ForwardOptions, Mode};
pub use context::{Context, ContextSpec, EvalContexts};
pub use error::{Error, Result};
pub use fallback::{resolve, FunctionSig, Op, OperatorPlan, PlanStep};
pub use finitediff::{Scheme, StepRule};
pub use function::{Arity, DifferentiableFunction, Function};
pub use matrix::Matrix;
pub use ops::{
    derivative, derivative_into, gradient, gradient_into, hessian, hessian_into, hvp, hvp_into,
    jacobian, jacobian_into, prepare, pullback, pullback_into, pushforward, pushforward_into,
    second_derivative, second_derivative_into, value_and_derivative, value_and_derivative_into,
    value_and_second_derivative, value_and_second_derivative_into,
    value_and_gradient, value_and_gradient_into, value_and_hessian, value_and_hessian_into,
    value_and_hvp, value_and_hvp_into, value_and_jacobian, value_and_jacobian_into,
    value_and_pullback, value_and_pullback_into, value_and_pushforward,
    value_and_pushforward_into, DerivativeMatrix,
};
pub use prep::{CallStats, Preparation};
pub use scalar::{sum, Scalar};
pub use seed::Seeds;
