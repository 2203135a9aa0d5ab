//! Correctness checking of prepared operators against scenario references.

use crate::drive;
use crate::scenario::Scenario;
use adkit_core::{Backend, Error, Function, Op};

/// Outcome of one correctness check. Failures are data, not errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The backend cannot realize this scenario's operator.
    Skip(String),
}

impl CheckStatus {
    pub fn label(&self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Skip(_) => "skip",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub scenario: String,
    pub backend: String,
    pub op: Op,
    pub size: usize,
    pub status: CheckStatus,
    pub tolerance: f64,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    /// Populated on failures caused by a runtime diagnostic.
    pub detail: Option<String>,
}

/// Default absolute tolerance: 1e-8 for the AD backends, 1e-4 for finite
/// differences.
pub fn default_tolerance(backend: &Backend) -> f64 {
    fn has_fd(backend: &Backend) -> bool {
        match backend {
            Backend::FiniteDiff(_) => true,
            Backend::SecondOrder { outer, inner } => has_fd(outer) || has_fd(inner),
            Backend::MixedMode { forward, reverse } => has_fd(forward) || has_fd(reverse),
            Backend::Sparse { inner } => has_fd(inner),
            _ => false,
        }
    }
    if has_fd(backend) {
        1e-4
    } else {
        1e-8
    }
}

fn skippable(err: &Error) -> bool {
    matches!(
        err,
        Error::UnsupportedOperator { .. } | Error::UnsupportedPrimitive { .. }
    )
}

/// Compare all four operator variants against the scenario reference.
pub(crate) fn run_check<F: Function>(
    scenario: &Scenario<F>,
    backend: &Backend,
    tolerance: Option<f64>,
) -> CheckReport {
    let tolerance = tolerance.unwrap_or_else(|| default_tolerance(backend));
    let mut report = CheckReport {
        scenario: scenario.name.clone(),
        backend: backend.id(),
        op: scenario.op,
        size: scenario.func.input_len(),
        status: CheckStatus::Pass,
        tolerance,
        max_abs_err: 0.0,
        max_rel_err: 0.0,
        detail: None,
    };

    let mut prep = match drive::prepare_scenario(scenario, backend) {
        Ok(prep) => prep,
        Err(err) if skippable(&err) => {
            report.status = CheckStatus::Skip(err.to_string());
            return report;
        }
        Err(err) => {
            report.status = CheckStatus::Fail;
            report.detail = Some(err.to_string());
            return report;
        }
    };

    let variants = match drive::run_all_variants(scenario, &mut prep, backend) {
        Ok(v) => v,
        Err(err) if skippable(&err) => {
            report.status = CheckStatus::Skip(err.to_string());
            return report;
        }
        Err(err) => {
            report.status = CheckStatus::Fail;
            report.detail = Some(err.to_string());
            return report;
        }
    };

    let reference = scenario.reference_values();
    for got in &variants {
        if got.len() != reference.len() {
            report.status = CheckStatus::Fail;
            report.detail = Some(format!(
                "result length {} does not match reference length {}",
                got.len(),
                reference.len()
            ));
            return report;
        }
        for (a, b) in got.iter().zip(&reference) {
            let abs = (a - b).abs();
            let rel = abs / a.abs().max(b.abs()).max(1e-300);
            report.max_abs_err = report.max_abs_err.max(abs);
            report.max_rel_err = report.max_rel_err.max(rel);
        }
    }
    if report.max_abs_err > tolerance {
        report.status = CheckStatus::Fail;
    }
    report
}
