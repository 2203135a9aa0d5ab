//! Sparse Jacobians and Hessians.
//!
//! The expensive steps — pattern detection by index-set tracing and greedy
//! coloring — run once at preparation time. Each subsequent evaluation
//! performs one derivative pass per color (pushforward, pullback or HVP),
//! then decompresses the products through the recovery map into a
//! compressed-column matrix.

mod ccs;
mod coloring;
mod pattern;
mod tracer;

pub use ccs::SparseMatrix;
pub use coloring::{greedy_color, Coloring, Partition, RecoveryEntry, RecoverySource};
pub use pattern::SparsityPattern;
pub use tracer::{detect_hessian_pattern, detect_jacobian_pattern, DepArena, DepTracer, HessTracer};
