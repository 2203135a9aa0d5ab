//! Non-differentiated extra arguments: constants and scratch caches.
//!
//! Only the first argument of a function is differentiated. Everything else
//! is passed as a [`Context`]: either a `Constant` (a fixed parameter that
//! operator execution never writes) or a `Cache` (scratch storage the
//! function may freely overwrite, carrying no information across calls).

use crate::scalar::Scalar;

/// A non-differentiated argument supplied alongside the input.
#[derive(Debug, Clone, PartialEq)]
pub enum Context {
    /// Fixed parameter, read-only for the duration of every call.
    Constant(Vec<f64>),
    /// Scratch buffer. Pre-call contents are irrelevant; the function must
    /// write a cache slot before reading it.
    Cache(Vec<f64>),
}

impl Context {
    pub fn len(&self) -> usize {
        match self {
            Context::Constant(v) | Context::Cache(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Context::Constant(_))
    }
}

/// Declared kind and length of one context slot of a function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextSpec {
    Constant { len: usize },
    Cache { len: usize },
}

impl ContextSpec {
    pub fn len(&self) -> usize {
        match self {
            ContextSpec::Constant { len } | ContextSpec::Cache { len } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matches(&self, ctx: &Context) -> bool {
        match (self, ctx) {
            (ContextSpec::Constant { len }, Context::Constant(v)) => v.len() == *len,
            (ContextSpec::Cache { len }, Context::Cache(v)) => v.len() == *len,
            _ => false,
        }
    }
}

/// The view of the contexts a function sees during one evaluation.
///
/// Constants are exposed as plain `f64` slices (they carry no derivative
/// information). Caches are exposed as buffers of the evaluation scalar so
/// that derivative lanes propagate through scratch storage. The backend owns
/// the widened cache buffers; they are allocated once at preparation time.
pub struct EvalContexts<'a, S> {
    contexts: &'a [Context],
    cache_bufs: &'a mut [Vec<S>],
}

impl<'a, S: Scalar> EvalContexts<'a, S> {
    pub fn new(contexts: &'a [Context], cache_bufs: &'a mut [Vec<S>]) -> Self {
        EvalContexts {
            contexts,
            cache_bufs,
        }
    }

    pub fn empty() -> EvalContexts<'static, S> {
        EvalContexts {
            contexts: &[],
            cache_bufs: &mut [],
        }
    }

    /// The `i`-th `Constant` context (counting constants only).
    pub fn constant(&self, i: usize) -> &[f64] {
        let mut seen = 0;
        for ctx in self.contexts {
            if let Context::Constant(v) = ctx {
                if seen == i {
                    return v;
                }
                seen += 1;
            }
        }
        panic!("constant context {i} not supplied (have {seen})");
    }

    /// The `i`-th `Cache` context (counting caches only), as scalar storage.
    pub fn cache(&mut self, i: usize) -> &mut [S] {
        &mut self.cache_bufs[i]
    }
}

/// Allocate the scalar-valued cache buffers for a declared context list.
pub(crate) fn alloc_cache_bufs<S: Scalar>(spec: &[ContextSpec]) -> Vec<Vec<S>> {
    spec.iter()
        .filter_map(|c| match c {
            ContextSpec::Cache { len } => Some(vec![S::from_f64(0.0); *len]),
            ContextSpec::Constant { .. } => None,
        })
        .collect()
}
