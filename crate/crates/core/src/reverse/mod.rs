//! Reverse-mode backend: pullbacks through a recorded tape.
//!
//! Preparation records the tape once at the typical input; each call then
//! replays the tape at the actual input (refreshing saved values) and runs
//! one reverse sweep per cotangent seed. Value-dependent `if` branches are
//! frozen at recording time; comparisons routed through the scalar API are
//! guarded and a flipped guard surfaces as a trace-escape diagnostic on
//! replay.

mod tape;

pub use tape::{Recorder, Tape, Var};

use crate::context::{Context, EvalContexts};
use crate::function::{DifferentiableFunction, Function};
use crate::scalar::Scalar;

/// Record the primitive trace of `func` at `x`.
///
/// Constants are captured by value (embedded as literals); cache contexts
/// are traced through like any other intermediate storage.
pub(crate) fn record_function<F: Function>(
    func: &DifferentiableFunction<F>,
    x: &[f64],
    contexts: &[Context],
) -> Tape {
    let rec = Recorder::new(x.len());
    let outputs = {
        let xs: Vec<Var> = x.iter().enumerate().map(|(i, &v)| rec.input(i, v)).collect();
        let mut y = vec![Var::from_f64(0.0); func.output_len()];
        let mut cache_bufs: Vec<Vec<Var>> = func
            .context_spec()
            .iter()
            .filter_map(|spec| match spec {
                crate::context::ContextSpec::Cache { len } => {
                    Some(vec![Var::from_f64(0.0); *len])
                }
                crate::context::ContextSpec::Constant { .. } => None,
            })
            .collect();
        let mut ctx = EvalContexts::new(contexts, &mut cache_bufs);
        func.eval(&xs, &mut y, &mut ctx);
        y.iter().map(|v| v.out_slot()).collect()
    };
    rec.freeze(outputs)
}
