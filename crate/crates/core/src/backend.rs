//! Backend values: which differentiation implementation runs an operator,
//! with its parameters and capability set.
//!
//! Three built-in backends cover the classic paradigms:
//!
//! * `dual` — operator-overloading forward mode on lane-vector dual numbers,
//! * `tape` — operator-overloading reverse mode on a recorded tape,
//! * `fd` — finite differences, also serving as a derivative-free baseline.
//!
//! Composite wrappers combine them: [`Backend::second_order`] stacks an
//! outer backend over an inner one for second-order operators,
//! [`Backend::mixed_mode`] pairs a forward and a reverse backend for
//! bidirectional sparse Jacobians, and [`Backend::sparse`] adds sparsity
//! detection, coloring and compressed evaluation around an inner backend.

use crate::finitediff::StepRule;

/// Differentiation mode of a backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Forward,
    Reverse,
    FiniteDifference,
    Composite,
}

/// What a backend can natively do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Capabilities {
    pub native_pushforward: bool,
    pub native_pullback: bool,
    pub batched_seeds: bool,
    pub in_place_functions: bool,
}

/// Parameters of the forward dual-number backend.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOptions {
    /// Directions handled per forward pass, between 1 and
    /// [`MAX_CHUNK`](crate::forward::MAX_CHUNK).
    pub chunk: usize,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        ForwardOptions {
            chunk: crate::forward::MAX_CHUNK,
        }
    }
}

/// A value selecting one differentiation implementation plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Forward(ForwardOptions),
    Reverse,
    FiniteDiff(StepRule),
    SecondOrder {
        outer: Box<Backend>,
        inner: Box<Backend>,
    },
    MixedMode {
        forward: Box<Backend>,
        reverse: Box<Backend>,
    },
    Sparse {
        inner: Box<Backend>,
    },
}

impl Backend {
    /// The forward dual-number backend with default chunk size.
    pub fn forward() -> Self {
        Backend::Forward(ForwardOptions::default())
    }

    pub fn forward_with_chunk(chunk: usize) -> Self {
        assert!(
            (1..=crate::forward::MAX_CHUNK).contains(&chunk),
            "chunk size must be in 1..={}",
            crate::forward::MAX_CHUNK
        );
        Backend::Forward(ForwardOptions { chunk })
    }

    /// The tape-recording reverse-mode backend.
    pub fn reverse() -> Self {
        Backend::Reverse
    }

    /// The finite-difference backend with the default central step rule.
    pub fn finite_diff() -> Self {
        Backend::FiniteDiff(StepRule::default())
    }

    pub fn finite_diff_with(rule: StepRule) -> Self {
        Backend::FiniteDiff(rule)
    }

    /// Stack `outer` over `inner`: `outer` differentiates the derivative
    /// computed by `inner`. Used for second-order operators.
    pub fn second_order(outer: Backend, inner: Backend) -> Self {
        Backend::SecondOrder {
            outer: Box::new(outer),
            inner: Box::new(inner),
        }
    }

    /// Pair a forward-capable and a reverse-capable backend for
    /// bidirectional sparse Jacobians.
    pub fn mixed_mode(forward: Backend, reverse: Backend) -> Self {
        Backend::MixedMode {
            forward: Box::new(forward),
            reverse: Box::new(reverse),
        }
    }

    /// Enable sparsity handling (pattern detection, coloring, compressed
    /// evaluation) for Jacobians and Hessians computed through `inner`.
    pub fn sparse(inner: Backend) -> Self {
        Backend::Sparse {
            inner: Box::new(inner),
        }
    }

    /// Stable identifier used in diagnostics and reports.
    pub fn id(&self) -> String {
        match self {
            Backend::Forward(_) => "dual".to_string(),
            Backend::Reverse => "tape".to_string(),
            Backend::FiniteDiff(_) => "fd".to_string(),
            Backend::SecondOrder { outer, inner } => {
                format!("secondorder({},{})", outer.id(), inner.id())
            }
            Backend::MixedMode { forward, reverse } => {
                format!("mixed({},{})", forward.id(), reverse.id())
            }
            Backend::Sparse { inner } => format!("sparse({})", inner.id()),
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            Backend::Forward(_) => Mode::Forward,
            Backend::Reverse => Mode::Reverse,
            Backend::FiniteDiff(_) => Mode::FiniteDifference,
            _ => Mode::Composite,
        }
    }

    pub fn capabilities(&self) -> Capabilities {
        match self {
            Backend::Forward(_) => Capabilities {
                native_pushforward: true,
                native_pullback: false,
                batched_seeds: true,
                in_place_functions: false,
            },
            Backend::Reverse => Capabilities {
                native_pushforward: false,
                native_pullback: true,
                batched_seeds: false,
                in_place_functions: true,
            },
            // Pullback on the finite-difference backend is realized by
            // assembling Jacobian rows from directional differences.
            Backend::FiniteDiff(_) => Capabilities {
                native_pushforward: true,
                native_pullback: true,
                batched_seeds: false,
                in_place_functions: true,
            },
            // First-order operators on a composite delegate to the inner
            // (or forward) half; capabilities mirror that delegation.
            Backend::SecondOrder { inner, .. } => inner.capabilities(),
            Backend::MixedMode { forward, reverse } => Capabilities {
                native_pushforward: forward.capabilities().native_pushforward,
                native_pullback: reverse.capabilities().native_pullback,
                batched_seeds: false,
                in_place_functions: forward.capabilities().in_place_functions
                    && reverse.capabilities().in_place_functions,
            },
            Backend::Sparse { inner } => inner.capabilities(),
        }
    }
}
