//! The differentiable-function representation.
//!
//! A [`Function`] is a computation written generically against the
//! [`Scalar`](crate::scalar::Scalar) trait; evaluating it on dual numbers,
//! tape variables or tracers is what the backends do under the hood.
//! [`DifferentiableFunction`] bundles a `Function` with its signature:
//! input/output element counts, arity (out-of-place `f(x) -> y` versus
//! in-place `f!(y, x)`), and the declared context list.
//!
//! Evaluation must be deterministic for fixed inputs and contexts; recorded
//! tapes and finite differences rely on it.

use crate::backend::Backend;
use crate::context::{Context, ContextSpec, EvalContexts};
use crate::error::{Error, Result};
use crate::fallback::Op;
use crate::scalar::Scalar;

/// A computation evaluable on any differentiation scalar.
///
/// The output is always written into a caller-provided buffer `y`; whether
/// the *user-facing* function is out-of-place or in-place is declared on the
/// [`DifferentiableFunction`] wrapper.
pub trait Function {
    fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], ctx: &mut EvalContexts<'_, S>);
}

/// Whether the user's function allocates its output or writes into a
/// caller-provided buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    OutOfPlace,
    InPlace,
}

/// A function plus the signature every backend needs to differentiate it.
#[derive(Debug, Clone)]
pub struct DifferentiableFunction<F> {
    f: F,
    input_len: usize,
    output_len: usize,
    arity: Arity,
    context_spec: Vec<ContextSpec>,
    substitute: Option<Box<Backend>>,
}

impl<F: Function> DifferentiableFunction<F> {
    /// An out-of-place function mapping `input_len` elements to `output_len`.
    pub fn new(f: F, input_len: usize, output_len: usize) -> Self {
        DifferentiableFunction {
            f,
            input_len,
            output_len,
            arity: Arity::OutOfPlace,
            context_spec: Vec::new(),
            substitute: None,
        }
    }

    /// An in-place function `f!(y, x)` writing into a caller buffer. Only
    /// backends advertising in-place support accept it.
    pub fn new_in_place(f: F, input_len: usize, output_len: usize) -> Self {
        DifferentiableFunction {
            arity: Arity::InPlace,
            ..Self::new(f, input_len, output_len)
        }
    }

    /// Declare one context argument (in positional order).
    pub fn with_context(mut self, spec: ContextSpec) -> Self {
        self.context_spec.push(spec);
        self
    }

    /// Route every derivative query through `substitute` instead of the
    /// backend the operator is called with. The primal evaluation is
    /// untouched, so values are bitwise identical to the unwrapped function;
    /// derivative values are identical to running `substitute` directly.
    pub fn differentiate_with(mut self, substitute: Backend) -> Self {
        self.substitute = Some(Box::new(substitute));
        self
    }

    #[inline]
    pub fn input_len(&self) -> usize {
        self.input_len
    }

    #[inline]
    pub fn output_len(&self) -> usize {
        self.output_len
    }

    #[inline]
    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn sig(&self) -> crate::fallback::FunctionSig {
        crate::fallback::FunctionSig {
            input_len: self.input_len,
            output_len: self.output_len,
            arity: self.arity,
        }
    }

    pub fn context_spec(&self) -> &[ContextSpec] {
        &self.context_spec
    }

    pub fn substitute_backend(&self) -> Option<&Backend> {
        self.substitute.as_deref()
    }

    #[inline]
    pub fn eval<S: Scalar>(&self, x: &[S], y: &mut [S], ctx: &mut EvalContexts<'_, S>) {
        debug_assert_eq!(x.len(), self.input_len);
        debug_assert_eq!(y.len(), self.output_len);
        self.f.eval(x, y, ctx);
    }

    /// Validate an input/context combination against the declared signature.
    pub(crate) fn check_call(
        &self,
        op: Op,
        backend: &Backend,
        x: &[f64],
        contexts: &[Context],
    ) -> Result<()> {
        if x.len() != self.input_len {
            return Err(Error::shape(
                op,
                &backend.id(),
                "input length",
                self.input_len,
                x.len(),
            ));
        }
        if contexts.len() != self.context_spec.len() {
            return Err(Error::shape(
                op,
                &backend.id(),
                "context count",
                self.context_spec.len(),
                contexts.len(),
            ));
        }
        for (i, (spec, ctx)) in self.context_spec.iter().zip(contexts).enumerate() {
            if !spec.matches(ctx) {
                return Err(Error::shape(
                    op,
                    &backend.id(),
                    &format!("context {i} kind/length"),
                    spec.len(),
                    ctx.len(),
                ));
            }
        }
        Ok(())
    }
}
