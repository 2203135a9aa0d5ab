//! Finite-difference backend: derivative-free directional derivatives.
//!
//! Serves both as a baseline backend and as the universal reference oracle
//! for the correctness harness. Pushforwards are directional differences;
//! pullbacks are read from a row assembly of the Jacobian built from the
//! same directional evaluations.

use crate::context::{alloc_cache_bufs, Context, ContextSpec, EvalContexts};
use crate::function::{DifferentiableFunction, Function};
use crate::matrix::Matrix;

/// Differencing scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// `(f(x + h v) - f(x)) / h`
    Forward,
    /// `(f(x + h v) - f(x - h v)) / (2 h)`
    Central,
}

/// Step-size rule for directional differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    pub scheme: Scheme,
    pub base_step: f64,
    /// Scale the step by `max(1, |x_i|)` over the coordinates when set.
    pub relative: bool,
}

impl Default for StepRule {
    /// Central differences at the cube root of machine epsilon (~6.06e-6)
    /// with relative stepping: the standard optimal-order heuristic.
    fn default() -> Self {
        StepRule {
            scheme: Scheme::Central,
            base_step: f64::EPSILON.cbrt(),
            relative: true,
        }
    }
}

impl StepRule {
    pub fn central(base_step: f64) -> Self {
        StepRule {
            scheme: Scheme::Central,
            base_step,
            relative: false,
        }
    }

    pub fn forward(base_step: f64) -> Self {
        StepRule {
            scheme: Scheme::Forward,
            base_step,
            relative: false,
        }
    }

    /// Effective step at `x`: the base step, scaled by the largest
    /// coordinate magnitude (floored at 1) when `relative` is set.
    pub fn step_for(&self, x: &[f64]) -> f64 {
        assert!(self.base_step > 0.0, "step must be positive");
        if self.relative {
            self.base_step * x.iter().fold(1.0f64, |m, v| m.max(v.abs()))
        } else {
            self.base_step
        }
    }
}

/// Preallocated evaluation buffers for one function signature.
#[derive(Debug, Clone)]
pub(crate) struct FdWorkspace {
    x_pert: Vec<f64>,
    y_plus: Vec<f64>,
    y_minus: Vec<f64>,
    cache_bufs: Vec<Vec<f64>>,
}

impl FdWorkspace {
    pub fn new(input_len: usize, output_len: usize, context_spec: &[ContextSpec]) -> Self {
        FdWorkspace {
            x_pert: vec![0.0; input_len],
            y_plus: vec![0.0; output_len],
            y_minus: vec![0.0; output_len],
            cache_bufs: alloc_cache_bufs(context_spec),
        }
    }

    fn eval_pert<F: Function>(
        &mut self,
        func: &DifferentiableFunction<F>,
        contexts: &[Context],
        x: &[f64],
        direction: &[f64],
        scale: f64,
        into_plus: bool,
    ) -> Result<(), String> {
        for (slot, (&xi, &vi)) in self.x_pert.iter_mut().zip(x.iter().zip(direction)) {
            *slot = xi + scale * vi;
        }
        let y = if into_plus {
            &mut self.y_plus
        } else {
            &mut self.y_minus
        };
        let mut ctx = EvalContexts::new(contexts, &mut self.cache_bufs);
        func.eval(&self.x_pert, y, &mut ctx);
        if let Some(j) = y.iter().position(|v| !v.is_finite()) {
            return Err(format!(
                "perturbed evaluation at x {:+} {} * v is non-finite in output {}",
                scale.signum(),
                scale.abs(),
                j
            ));
        }
        Ok(())
    }

    /// Plain evaluation at `x` into the minus buffer (used by the forward
    /// scheme and by value-returning variants).
    pub fn eval_value<F: Function>(
        &mut self,
        func: &DifferentiableFunction<F>,
        contexts: &[Context],
        x: &[f64],
        y: &mut [f64],
    ) {
        self.x_pert.copy_from_slice(x);
        let mut ctx = EvalContexts::new(contexts, &mut self.cache_bufs);
        func.eval(&self.x_pert, y, &mut ctx);
    }
}

/// Directional derivative `J(x) v` by differencing, written into `out`.
pub(crate) fn fd_pushforward_into<F: Function>(
    func: &DifferentiableFunction<F>,
    ws: &mut FdWorkspace,
    rule: &StepRule,
    contexts: &[Context],
    x: &[f64],
    direction: &[f64],
    out: &mut [f64],
) -> Result<(), String> {
    let h = rule.step_for(x);
    match rule.scheme {
        Scheme::Central => {
            ws.eval_pert(func, contexts, x, direction, h, true)?;
            ws.eval_pert(func, contexts, x, direction, -h, false)?;
            for ((o, &p), &m) in out.iter_mut().zip(&ws.y_plus).zip(&ws.y_minus) {
                *o = (p - m) / (2.0 * h);
            }
        }
        Scheme::Forward => {
            ws.eval_pert(func, contexts, x, direction, h, true)?;
            ws.eval_pert(func, contexts, x, direction, 0.0, false)?;
            for ((o, &p), &m) in out.iter_mut().zip(&ws.y_plus).zip(&ws.y_minus) {
                *o = (p - m) / h;
            }
        }
    }
    Ok(())
}

/// Assemble the full Jacobian column by column: column `i` is the
/// pushforward along the `i`-th basis vector, using identical evaluations.
pub(crate) fn fd_jacobian_into<F: Function>(
    func: &DifferentiableFunction<F>,
    ws: &mut FdWorkspace,
    rule: &StepRule,
    contexts: &[Context],
    x: &[f64],
    basis: &mut [f64],
    column: &mut [f64],
    jac: &mut Matrix,
) -> Result<(), String> {
    basis.fill(0.0);
    for i in 0..x.len() {
        basis[i] = 1.0;
        fd_pushforward_into(func, ws, rule, contexts, x, basis, column)?;
        basis[i] = 0.0;
        for (r, &v) in column.iter().enumerate() {
            jac.set(r, i, v);
        }
    }
    Ok(())
}

/// Second derivative of a scalar-input function by the three-point stencil
/// `(f(x + h) - 2 f(x) + f(x - h)) / h^2`, per output component.
pub(crate) fn fd_second_derivative_into<F: Function>(
    func: &DifferentiableFunction<F>,
    ws: &mut FdWorkspace,
    rule: &StepRule,
    contexts: &[Context],
    x: &[f64],
    base_value: &mut [f64],
    out: &mut [f64],
) -> Result<(), String> {
    // fourth root of epsilon is the optimal-order step for this stencil
    let h = if rule.relative {
        f64::EPSILON.powf(0.25) * x[0].abs().max(1.0)
    } else {
        rule.base_step
    };
    let dir = [1.0];
    ws.eval_pert(func, contexts, x, &dir, h, true)?;
    ws.eval_pert(func, contexts, x, &dir, -h, false)?;
    ws.eval_value(func, contexts, x, base_value);
    for (i, o) in out.iter_mut().enumerate() {
        *o = (ws.y_plus[i] - 2.0 * base_value[i] + ws.y_minus[i]) / (h * h);
    }
    Ok(())
}
