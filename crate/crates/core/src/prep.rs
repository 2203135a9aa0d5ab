//! Preparations: the per-(operator, function, signature) records that
//! amortize one-time derivative setup.
//!
//! A `Preparation` owns everything a backend needs for zero-additional-setup
//! execution: recorded tapes, seed banks, sparsity patterns and colorings,
//! and preallocated workspaces. It is only valid for inputs matching the
//! signature it was built for; any mismatch is an error, never a silent
//! reinterpretation. Reusing a preparation yields bitwise-identical results
//! to building a fresh one.
//!
//! A preparation holds mutable workspace, so every operator call takes it by
//! exclusive (`&mut`) reference; it may move between threads between calls.

use crate::backend::Backend;
use crate::context::ContextSpec;
use crate::fallback::{Op, OperatorPlan};
use crate::finitediff::{FdWorkspace, StepRule};
use crate::forward::{Dual, ForwardWorkspace, MAX_CHUNK};
use crate::matrix::Matrix;
use crate::reverse::Tape;
use crate::sparse::{Coloring, SparseMatrix, SparsityPattern};

/// Single-lane dual over `f64`: the outer scalar of nested second-order
/// evaluation.
pub(crate) type Dual1 = Dual<f64, 1>;

/// Counters of the derivative work performed through one preparation.
///
/// `pushforwards`, `pullbacks` and `hvp_calls` count J·v, J^T·w and H·v
/// products respectively (one per seed direction); `forward_passes` counts
/// physical chunked dual evaluations; `function_evals` counts function
/// evaluations on any scalar type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CallStats {
    pub function_evals: u64,
    pub forward_passes: u64,
    pub pushforwards: u64,
    pub pullbacks: u64,
    pub hvp_calls: u64,
}

/// Forward-backend payload: dual buffers sized for the function signature.
pub(crate) struct ForwardPrep {
    pub chunk: usize,
    pub ws: ForwardWorkspace<f64, MAX_CHUNK>,
}

/// Reverse-backend payload: the recorded tape plus replay/sweep buffers.
pub(crate) struct ReversePrep {
    pub tape: Tape,
    pub values: Vec<f64>,
    pub adjoints: Vec<f64>,
    pub seed: Vec<f64>,
    pub y_buf: Vec<f64>,
    pub x_bar: Vec<f64>,
    /// Constant payloads captured at recording time; calls must pass
    /// bitwise-identical constants because the tape embeds them as literals.
    pub recorded_constants: Vec<Vec<f64>>,
    /// Row assembly for pushforward-by-pullback.
    pub jac_rows: Option<Matrix>,
}

/// Finite-difference payload.
pub(crate) struct FdPrep {
    pub rule: StepRule,
    pub ws: FdWorkspace,
    pub basis: Vec<f64>,
    pub column: Vec<f64>,
    pub base_value: Vec<f64>,
    /// Row assembly for pullback.
    pub jac: Option<Matrix>,
}

/// Second-order payloads: how the outer backend differentiates the inner
/// derivative map.
pub(crate) enum SecondOrderPrep {
    /// Forward-over-reverse: replay and sweep the tape on one-lane duals.
    DualOverTape {
        tape: Tape,
        values: Vec<Dual1>,
        adjoints: Vec<Dual1>,
        seed: Vec<Dual1>,
        x_dual: Vec<Dual1>,
        x_bar: Vec<Dual1>,
        recorded_constants: Vec<Vec<f64>>,
    },
    /// Forward-over-forward: nested dual evaluation.
    DualOverDual {
        chunk: usize,
        ws: ForwardWorkspace<Dual1, MAX_CHUNK>,
        x_dual: Vec<Dual1>,
    },
    /// Differences of the inner derivative at perturbed inputs.
    FdOverInner {
        rule: StepRule,
        inner: Box<Payload>,
        x_pert: Vec<f64>,
        d_plus: Vec<f64>,
        d_minus: Vec<f64>,
    },
}

/// Shared scratch for dense Hessian assembly (basis direction + column).
pub(crate) struct HessianScratch {
    pub direction: Vec<f64>,
    pub column: Vec<f64>,
}

/// Sparse-evaluation payload: pattern, coloring, compressed products,
/// decompression map, and the inner backend workspaces.
pub(crate) struct SparsePrep {
    pub pattern: SparsityPattern,
    pub coloring: Coloring,
    /// Zero-valued template with the detected structure.
    pub structure: SparseMatrix,
    /// Value-array position of each recovery entry, parallel to
    /// `coloring.recovery()`.
    pub recovery_idx: Vec<usize>,
    /// Mirrored value-index pairs (upper, lower) for Hessian symmetrization.
    pub sym_pairs: Vec<(usize, usize)>,
    pub fwd_product: Matrix,
    pub rev_product: Matrix,
    pub fwd_pass_out: Vec<f64>,
    pub inner_fwd: Option<Box<Payload>>,
    pub inner_rev: Option<Box<Payload>>,
    pub inner_hvp: Option<Box<SecondOrderPrep>>,
}

pub(crate) enum Payload {
    Forward(ForwardPrep),
    Reverse(ReversePrep),
    FiniteDiff(FdPrep),
    SecondOrder(Box<SecondOrderPrep>, HessianScratch),
    Sparse(Box<SparsePrep>),
}

/// Opaque, process-local record amortizing one-time derivative setup.
///
/// Built by [`prepare`](crate::ops::prepare) for one operator, backend and
/// typical input; serialization is unsupported.
pub struct Preparation {
    pub(crate) op: Op,
    pub(crate) backend: Backend,
    pub(crate) input_len: usize,
    pub(crate) output_len: usize,
    pub(crate) context_sig: Vec<ContextSpec>,
    pub(crate) plan: OperatorPlan,
    pub(crate) payload: Payload,
    pub(crate) stats: CallStats,
}

impl std::fmt::Debug for Preparation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Preparation")
            .field("op", &self.op)
            .field("backend", &self.backend.id())
            .field("input_len", &self.input_len)
            .field("output_len", &self.output_len)
            .field("plan", &self.plan)
            .finish_non_exhaustive()
    }
}

impl Preparation {
    pub fn op(&self) -> Op {
        self.op
    }

    pub fn backend_id(&self) -> String {
        self.backend.id()
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    /// The resolved fallback chain, with color counts filled in when the
    /// preparation carries a sparse plan.
    pub fn plan(&self) -> &OperatorPlan {
        &self.plan
    }

    /// Work counters accumulated since construction (or the last reset).
    pub fn stats(&self) -> CallStats {
        self.stats
    }

    pub fn reset_stats(&mut self) {
        self.stats = CallStats::default();
    }

    /// The sparsity pattern detected at preparation time, if this
    /// preparation carries a sparse plan.
    pub fn sparsity_pattern(&self) -> Option<&SparsityPattern> {
        match &self.payload {
            Payload::Sparse(sp) => Some(&sp.pattern),
            _ => None,
        }
    }

    /// The coloring computed at preparation time, if any.
    pub fn coloring(&self) -> Option<&Coloring> {
        match &self.payload {
            Payload::Sparse(sp) => Some(&sp.coloring),
            _ => None,
        }
    }

    /// An empty result buffer of the right storage kind for the in-place
    /// jacobian/hessian variants: dense for dense plans, a structure-matched
    /// sparse matrix for sparse plans.
    pub fn new_result_matrix(&self) -> Option<crate::ops::DerivativeMatrix> {
        match self.op {
            Op::Jacobian | Op::Hessian => Some(match &self.payload {
                Payload::Sparse(sp) => {
                    crate::ops::DerivativeMatrix::Sparse(sp.structure.clone())
                }
                _ => crate::ops::DerivativeMatrix::Dense(Matrix::zeros(
                    if self.op == Op::Jacobian {
                        self.output_len
                    } else {
                        self.input_len
                    },
                    self.input_len,
                )),
            }),
            _ => None,
        }
    }

    pub(crate) fn parts(&mut self) -> (&Backend, &mut Payload, &mut CallStats) {
        (&self.backend, &mut self.payload, &mut self.stats)
    }
}
