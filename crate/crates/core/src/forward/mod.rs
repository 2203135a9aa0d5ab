//! Forward-mode backend: operator overloading on lane-vector dual numbers.
//!
//! Preparation allocates dual-valued input/output buffers and dual-valued
//! copies of every cache context, so that repeated pushforwards run without
//! heap allocation. A batch of directions is processed chunk by chunk, at
//! most [`MAX_CHUNK`] lanes per pass; per-direction results do not depend on
//! the chunking.

mod dual;

pub use dual::Dual;
pub(crate) use dual::{clear_unsupported, take_unsupported};

use crate::context::{alloc_cache_bufs, Context, ContextSpec, EvalContexts};
use crate::function::{DifferentiableFunction, Function};
use crate::scalar::Scalar;
use std::ops::Range;

/// Physical tangent lane count of one forward pass.
pub const MAX_CHUNK: usize = 8;

/// Partition of a direction batch into chunks of at most `chunk` lanes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedBank {
    total: usize,
    chunk: usize,
}

impl SeedBank {
    pub fn new(total: usize, chunk: usize) -> Self {
        assert!((1..=MAX_CHUNK).contains(&chunk));
        SeedBank { total, chunk }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn chunk(&self) -> usize {
        self.chunk
    }

    pub fn pass_count(&self) -> usize {
        self.total.div_ceil(self.chunk)
    }

    /// The direction ranges of the passes, in order. Their union is the full
    /// direction set.
    pub fn chunk_ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.total)
            .step_by(self.chunk.max(1))
            .map(move |start| start..(start + self.chunk).min(self.total))
    }
}

/// Preallocated dual-valued buffers for one function signature.
#[derive(Debug, Clone)]
pub(crate) struct ForwardWorkspace<S, const W: usize> {
    pub x: Vec<Dual<S, W>>,
    pub y: Vec<Dual<S, W>>,
    cache_bufs: Vec<Vec<Dual<S, W>>>,
}

impl<S: Scalar, const W: usize> ForwardWorkspace<S, W> {
    pub fn new(input_len: usize, output_len: usize, context_spec: &[ContextSpec]) -> Self {
        ForwardWorkspace {
            x: vec![Dual::constant(S::from_f64(0.0)); input_len],
            y: vec![Dual::constant(S::from_f64(0.0)); output_len],
            cache_bufs: alloc_cache_bufs(context_spec),
        }
    }

    /// Load input values, leaving all tangent lanes untouched (the basis
    /// paths keep them zeroed between passes).
    pub fn load_values(&mut self, x: &[S]) {
        for (slot, &v) in self.x.iter_mut().zip(x) {
            slot.value = v;
        }
    }

    /// Run one forward pass. Returns the name of an unsupported primitive if
    /// the function applied one.
    pub fn eval_once<F: Function>(
        &mut self,
        func: &DifferentiableFunction<F>,
        contexts: &[Context],
    ) -> Result<(), &'static str> {
        clear_unsupported();
        let mut ctx = EvalContexts::new(contexts, &mut self.cache_bufs);
        func.eval(&self.x, &mut self.y, &mut ctx);
        match take_unsupported() {
            Some(p) => Err(p),
            None => Ok(()),
        }
    }

    /// Seed the basis lanes `base..base+width` (direction `base + l` is the
    /// standard basis vector `e_{base+l}`), evaluate, then clear the lanes.
    pub fn eval_basis_chunk<F: Function>(
        &mut self,
        func: &DifferentiableFunction<F>,
        contexts: &[Context],
        range: Range<usize>,
    ) -> Result<(), &'static str> {
        let one = S::from_f64(1.0);
        let zero = S::from_f64(0.0);
        for (lane, index) in range.clone().enumerate() {
            self.x[index].tangents[lane] = one;
        }
        let result = self.eval_once(func, contexts);
        for (lane, index) in range.enumerate() {
            self.x[index].tangents[lane] = zero;
        }
        result
    }
}

impl ForwardWorkspace<f64, MAX_CHUNK> {
    /// Pack `seeds[range]` into tangent lanes (unused lanes zeroed) and run
    /// one pass.
    pub fn eval_dense_chunk<F: Function>(
        &mut self,
        func: &DifferentiableFunction<F>,
        contexts: &[Context],
        seeds: &[Vec<f64>],
        range: Range<usize>,
    ) -> Result<(), &'static str> {
        let width = range.len();
        for (i, slot) in self.x.iter_mut().enumerate() {
            let mut tangents = [0.0; MAX_CHUNK];
            for lane in 0..width {
                tangents[lane] = seeds[range.start + lane][i];
            }
            slot.tangents = tangents;
        }
        self.eval_once(func, contexts)
    }
}

/// A value rule paired with its tangent rule.
#[derive(Clone, Copy)]
pub enum Rule {
    Unary {
        value: fn(f64) -> f64,
        /// `tangent(x, value(x), t)` for input tangent `t`.
        tangent: fn(f64, f64, f64) -> f64,
    },
    Binary {
        value: fn(f64, f64) -> f64,
        /// `tangent(a, b, ta, tb)`.
        tangent: fn(f64, f64, f64, f64) -> f64,
    },
    /// Tangent-free: branching uses primal values only.
    Comparison { value: fn(f64, f64) -> bool },
    Reduction {
        value: fn(&[f64]) -> f64,
        tangent: fn(&[f64]) -> f64,
    },
}

pub struct PrimitiveRule {
    pub name: &'static str,
    pub rule: Rule,
}

/// The forward backend's registered primitives. Applying anything outside
/// this table (for example `atan2`) under the dual backend reports
/// `UnsupportedPrimitive` naming the operation.
pub fn primitive_rules() -> &'static [PrimitiveRule] {
    static RULES: &[PrimitiveRule] = &[
        PrimitiveRule {
            name: "add",
            rule: Rule::Binary {
                value: |a, b| a + b,
                tangent: |_, _, ta, tb| ta + tb,
            },
        },
        PrimitiveRule {
            name: "sub",
            rule: Rule::Binary {
                value: |a, b| a - b,
                tangent: |_, _, ta, tb| ta - tb,
            },
        },
        PrimitiveRule {
            name: "mul",
            rule: Rule::Binary {
                value: |a, b| a * b,
                tangent: |a, b, ta, tb| a * tb + ta * b,
            },
        },
        PrimitiveRule {
            name: "div",
            rule: Rule::Binary {
                value: |a, b| a / b,
                tangent: |a, b, ta, tb| (ta * b - a * tb) / (b * b),
            },
        },
        PrimitiveRule {
            name: "pow",
            rule: Rule::Binary {
                value: |a, e| a.powf(e),
                // constant exponent
                tangent: |a, e, ta, _| e * a.powf(e - 1.0) * ta,
            },
        },
        PrimitiveRule {
            name: "exp",
            rule: Rule::Unary {
                value: |x| x.exp(),
                tangent: |_, y, t| t * y,
            },
        },
        PrimitiveRule {
            name: "log",
            rule: Rule::Unary {
                value: |x| x.ln(),
                tangent: |x, _, t| t / x,
            },
        },
        PrimitiveRule {
            name: "sin",
            rule: Rule::Unary {
                value: |x| x.sin(),
                tangent: |x, _, t| t * x.cos(),
            },
        },
        PrimitiveRule {
            name: "cos",
            rule: Rule::Unary {
                value: |x| x.cos(),
                tangent: |x, _, t| -t * x.sin(),
            },
        },
        PrimitiveRule {
            name: "tanh",
            rule: Rule::Unary {
                value: |x| x.tanh(),
                tangent: |_, y, t| t * (1.0 - y * y),
            },
        },
        PrimitiveRule {
            name: "sqrt",
            rule: Rule::Unary {
                value: |x| x.sqrt(),
                tangent: |_, y, t| t / (2.0 * y),
            },
        },
        PrimitiveRule {
            name: "abs",
            rule: Rule::Unary {
                value: |x| x.abs(),
                tangent: |x, _, t| {
                    if x > 0.0 {
                        t
                    } else if x < 0.0 {
                        -t
                    } else {
                        0.0
                    }
                },
            },
        },
        PrimitiveRule {
            name: "max",
            rule: Rule::Binary {
                value: |a, b| if a >= b { a } else { b },
                tangent: |a, b, ta, tb| if a >= b { ta } else { tb },
            },
        },
        PrimitiveRule {
            name: "min",
            rule: Rule::Binary {
                value: |a, b| if a <= b { a } else { b },
                tangent: |a, b, ta, tb| if a <= b { ta } else { tb },
            },
        },
        PrimitiveRule {
            name: "lt",
            rule: Rule::Comparison { value: |a, b| a < b },
        },
        PrimitiveRule {
            name: "le",
            rule: Rule::Comparison {
                value: |a, b| a <= b,
            },
        },
        PrimitiveRule {
            name: "gt",
            rule: Rule::Comparison { value: |a, b| a > b },
        },
        PrimitiveRule {
            name: "ge",
            rule: Rule::Comparison {
                value: |a, b| a >= b,
            },
        },
        PrimitiveRule {
            name: "sum",
            rule: Rule::Reduction {
                value: |xs| xs.iter().fold(0.0, |acc, &v| acc + v),
                tangent: |ts| ts.iter().fold(0.0, |acc, &v| acc + v),
            },
        },
    ];
    RULES
}

/// Look up a registered primitive by name.
pub fn lookup_rule(name: &str) -> Option<&'static PrimitiveRule> {
    primitive_rules().iter().find(|r| r.name == name)
}
