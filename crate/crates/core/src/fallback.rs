//! Operator resolution: mapping each of the eight operators onto a backend's
//! native capabilities through the default derivation chain.
//!
//! The chain bottoms out at the two lowest-level operators, pushforward and
//! pullback: gradient reduces to a pullback, derivative to a pushforward,
//! a Jacobian to batched pushforwards or pullbacks over a basis, an HVP to a
//! pushforward of the gradient map (forward-over-reverse by default), a
//! Hessian to one HVP per input dimension, and a second derivative to a
//! derivative of the derivative. A backend that declares a native
//! implementation pre-empts the chain (the finite-difference backend's
//! three-point second-derivative stencil is the one built-in case).
//!
//! Resolution is a pure function of the operator, the backend's capability
//! set and parameters, and the function signature. The resolved plan is
//! recorded inside every `Preparation` for introspection.

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::function::Arity;
use std::fmt;
use std::str::FromStr;

/// The eight differentiation operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Pushforward,
    Pullback,
    Derivative,
    Gradient,
    Jacobian,
    SecondDerivative,
    Hvp,
    Hessian,
}

impl Op {
    pub const ALL: [Op; 8] = [
        Op::Pushforward,
        Op::Pullback,
        Op::Derivative,
        Op::Gradient,
        Op::Jacobian,
        Op::SecondDerivative,
        Op::Hvp,
        Op::Hessian,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Op::Pushforward => "pushforward",
            Op::Pullback => "pullback",
            Op::Derivative => "derivative",
            Op::Gradient => "gradient",
            Op::Jacobian => "jacobian",
            Op::SecondDerivative => "second_derivative",
            Op::Hvp => "hvp",
            Op::Hessian => "hessian",
        }
    }

    pub fn is_second_order(&self) -> bool {
        matches!(self, Op::SecondDerivative | Op::Hvp | Op::Hessian)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Op {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Op::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| format!("unknown operator `{s}`"))
    }
}

/// Input/output element counts and arity of a function, as resolution sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FunctionSig {
    pub input_len: usize,
    pub output_len: usize,
    pub arity: Arity,
}

/// One step of a resolved chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanStep {
    /// Terminal native pushforward executed by `backend`.
    Pushforward { backend: String },
    /// Terminal native pullback executed by `backend`.
    Pullback { backend: String },
    /// Terminal three-point stencil (finite differences only).
    SecondDerivativeStencil { backend: String },
    /// Gradient of the inner map inside a second-order chain.
    Gradient { backend: String },
    /// Derivative of the inner map inside a second-order chain.
    Derivative { backend: String },
    /// Batched pushforwards over the input basis.
    BasisPushforwards { count: usize },
    /// Batched pullbacks over the output basis.
    BasisPullbacks { count: usize },
    /// One HVP per input basis vector (dense Hessian assembly).
    HvpPerBasis { count: usize },
    /// One HVP per color of a symmetric coloring. The color count is
    /// determined during preparation; standalone resolution reports 0.
    HvpPerColor { colors: usize },
    /// One pushforward per column color of a sparse Jacobian plan.
    PushforwardPerColor { colors: usize },
    /// One pullback per row color of a sparse Jacobian plan.
    PullbackPerColor { colors: usize },
    /// All derivative work routed through a substitute backend.
    Substitute { backend: String },
}

/// The resolved chain for one (operator, backend, signature) combination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorPlan {
    op: Op,
    steps: Vec<PlanStep>,
}

impl OperatorPlan {
    pub(crate) fn new(op: Op, steps: Vec<PlanStep>) -> Self {
        OperatorPlan { op, steps }
    }

    pub fn op(&self) -> Op {
        self.op
    }

    pub fn steps(&self) -> &[PlanStep] {
        &self.steps
    }

    /// Replace placeholder color counts once preparation has run coloring.
    pub(crate) fn set_colors(&mut self, fwd: usize, rev: usize) {
        for step in &mut self.steps {
            match step {
                PlanStep::PushforwardPerColor { colors } | PlanStep::HvpPerColor { colors } => {
                    *colors = fwd;
                }
                PlanStep::PullbackPerColor { colors } => *colors = rev,
                _ => {}
            }
        }
    }
}

/// The outer/inner pairing a second-order operator runs with.
pub(crate) struct SecondOrderPair<'a> {
    pub outer: &'a Backend,
    pub inner: &'a Backend,
}

/// Resolve which backends take the outer and inner role for a second-order
/// operator, validating the supported pairings.
pub(crate) fn second_order_pair<'a>(op: Op, backend: &'a Backend) -> Result<SecondOrderPair<'a>> {
    let id = backend.id();
    match backend {
        Backend::SecondOrder { outer, inner } => {
            match outer.as_ref() {
                Backend::Forward(_) => {}
                Backend::FiniteDiff(_) => {}
                other => {
                    return Err(Error::unsupported(
                        op,
                        &id,
                        format!(
                            "outer backend `{}` has no native pushforward to differentiate the inner derivative",
                            other.id()
                        ),
                    ))
                }
            }
            if matches!(outer.as_ref(), Backend::Forward(_))
                && !matches!(inner.as_ref(), Backend::Forward(_) | Backend::Reverse)
            {
                return Err(Error::unsupported(
                    op,
                    &id,
                    format!(
                        "inner backend `{}` cannot run on dual scalars; supported pairings are \
                         dual-over-tape and dual-over-dual",
                        inner.id()
                    ),
                ));
            }
            if matches!(outer.as_ref(), Backend::FiniteDiff(_))
                && matches!(
                    inner.as_ref(),
                    Backend::SecondOrder { .. } | Backend::MixedMode { .. } | Backend::Sparse { .. }
                )
            {
                return Err(Error::unsupported(
                    op,
                    &id,
                    "composite inner backends are not supported under a finite-difference outer",
                ));
            }
            Ok(SecondOrderPair { outer, inner })
        }
        Backend::Forward(_) => Ok(SecondOrderPair {
            outer: backend,
            inner: backend,
        }),
        Backend::Reverse => Err(Error::unsupported(
            op,
            &id,
            "the tape backend has no native pushforward for the outer half; \
             stack it as second_order(forward, tape)",
        )),
        Backend::FiniteDiff(_) => Err(Error::unsupported(
            op,
            &id,
            "double finite differences are disabled by default; \
             compose second_order(fd, <ad backend>) explicitly",
        )),
        _ => Err(Error::unsupported(
            op,
            &id,
            "backend cannot realize a second-order operator",
        )),
    }
}

/// Resolve the derivation chain for `op` on `backend` for a function with
/// signature `sig`.
pub fn resolve(op: Op, backend: &Backend, sig: &FunctionSig) -> Result<OperatorPlan> {
    let id = backend.id();
    let caps = backend.capabilities();
    let (n, m) = (sig.input_len, sig.output_len);

    if sig.arity == Arity::InPlace && !caps.in_place_functions {
        return Err(Error::unsupported(
            op,
            &id,
            "backend does not support in-place functions",
        ));
    }

    match backend {
        Backend::MixedMode { .. } => {
            return Err(Error::unsupported(
                op,
                &id,
                "mixed-mode backends are only used inside sparse jacobian plans",
            ))
        }
        Backend::Sparse { inner } => {
            return match op {
                Op::Jacobian => {
                    let mut steps = Vec::new();
                    let inner_caps = inner.capabilities();
                    match inner.as_ref() {
                        Backend::MixedMode { forward, reverse } => {
                            steps.push(PlanStep::PushforwardPerColor { colors: 0 });
                            steps.push(PlanStep::PullbackPerColor { colors: 0 });
                            steps.push(PlanStep::Pushforward {
                                backend: forward.id(),
                            });
                            steps.push(PlanStep::Pullback {
                                backend: reverse.id(),
                            });
                        }
                        _ if inner_caps.native_pushforward => {
                            steps.push(PlanStep::PushforwardPerColor { colors: 0 });
                            steps.push(PlanStep::Pushforward { backend: inner.id() });
                        }
                        _ => {
                            steps.push(PlanStep::PullbackPerColor { colors: 0 });
                            steps.push(PlanStep::Pullback { backend: inner.id() });
                        }
                    }
                    Ok(OperatorPlan::new(op, steps))
                }
                Op::Hessian => {
                    let pair = second_order_pair(op, inner)?;
                    let mut steps = vec![PlanStep::HvpPerColor { colors: 0 }];
                    steps.extend(hvp_steps(&pair, sig)?);
                    Ok(OperatorPlan::new(op, steps))
                }
                // sparsity only changes jacobian and hessian
                _ => resolve(op, inner, sig),
            };
        }
        Backend::SecondOrder { inner, .. } if !op.is_second_order() => {
            // first-order operators run on the inner backend
            return resolve(op, inner, sig);
        }
        _ => {}
    }

    let steps = match op {
        Op::Pushforward => {
            if caps.native_pushforward {
                vec![PlanStep::Pushforward { backend: id }]
            } else {
                // assemble rows by pullback, then contract with each seed
                vec![
                    PlanStep::BasisPullbacks { count: m },
                    PlanStep::Pullback { backend: id },
                ]
            }
        }
        Op::Pullback => {
            if caps.native_pullback {
                vec![PlanStep::Pullback { backend: id }]
            } else {
                return Err(Error::unsupported(
                    op,
                    &id,
                    "backend has no native pullback; jacobian-transpose assembly is \
                     disabled by default",
                ));
            }
        }
        Op::Derivative => {
            if caps.native_pushforward {
                vec![PlanStep::Pushforward { backend: id }]
            } else {
                vec![
                    PlanStep::BasisPullbacks { count: m },
                    PlanStep::Pullback { backend: id },
                ]
            }
        }
        Op::Gradient => {
            if caps.native_pullback {
                vec![PlanStep::Pullback { backend: id }]
            } else {
                vec![
                    PlanStep::BasisPushforwards { count: n },
                    PlanStep::Pushforward { backend: id },
                ]
            }
        }
        Op::Jacobian => {
            // native pushforward wins on square shapes; otherwise the side
            // with fewer seeds
            let push = if caps.native_pushforward && caps.native_pullback {
                n <= m
            } else {
                caps.native_pushforward
            };
            if push {
                vec![
                    PlanStep::BasisPushforwards { count: n },
                    PlanStep::Pushforward { backend: id },
                ]
            } else {
                vec![
                    PlanStep::BasisPullbacks { count: m },
                    PlanStep::Pullback { backend: id },
                ]
            }
        }
        Op::SecondDerivative => {
            if let Backend::FiniteDiff(_) = backend {
                vec![PlanStep::SecondDerivativeStencil { backend: id }]
            } else {
                let pair = second_order_pair(op, backend)?;
                let mut steps = vec![
                    PlanStep::Derivative {
                        backend: pair.outer.id(),
                    },
                    PlanStep::Derivative {
                        backend: pair.inner.id(),
                    },
                ];
                steps.extend(inner_terminal(Op::Derivative, pair.inner, sig)?);
                steps
            }
        }
        Op::Hvp => {
            let pair = second_order_pair(op, backend)?;
            hvp_steps(&pair, sig)?
        }
        Op::Hessian => {
            let pair = second_order_pair(op, backend)?;
            let mut steps = vec![PlanStep::HvpPerBasis { count: n }];
            steps.extend(hvp_steps(&pair, sig)?);
            steps
        }
    };
    Ok(OperatorPlan::new(op, steps))
}

/// `hvp => pushforward(outer) . gradient(inner) => <inner terminal>`
fn hvp_steps(pair: &SecondOrderPair<'_>, sig: &FunctionSig) -> Result<Vec<PlanStep>> {
    let mut steps = vec![
        PlanStep::Pushforward {
            backend: pair.outer.id(),
        },
        PlanStep::Gradient {
            backend: pair.inner.id(),
        },
    ];
    steps.extend(inner_terminal(Op::Gradient, pair.inner, sig)?);
    Ok(steps)
}

/// Terminal step(s) the inner first-order operator bottoms out in.
fn inner_terminal(op: Op, inner: &Backend, sig: &FunctionSig) -> Result<Vec<PlanStep>> {
    let plan = resolve(op, inner, sig)?;
    // keep only the terminal pushforward/pullback of the inner chain
    Ok(plan
        .steps()
        .iter()
        .filter(|s| matches!(s, PlanStep::Pushforward { .. } | PlanStep::Pullback { .. }))
        .cloned()
        .collect())
}
