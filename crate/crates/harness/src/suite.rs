//! Cross-product suite execution: scenarios x backends x sizes x prepared.

use crate::bench::{BenchConfig, BenchmarkRecord};
use crate::check::{CheckReport, CheckStatus};
use crate::error::HarnessError;
use crate::scenario::{build_scenario, default_size, resolve_scenario_names, RunnableScenario};
use adkit_core::Backend;
use rayon::prelude::*;

/// Which prepared flags a suite runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreparedMode {
    Both,
    True,
    False,
}

impl PreparedMode {
    fn flags(self) -> &'static [bool] {
        match self {
            PreparedMode::Both => &[true, false],
            PreparedMode::True => &[true],
            PreparedMode::False => &[false],
        }
    }
}

impl std::str::FromStr for PreparedMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "both" => Ok(PreparedMode::Both),
            "true" => Ok(PreparedMode::True),
            "false" => Ok(PreparedMode::False),
            other => Err(format!("expected both|true|false, got `{other}`")),
        }
    }
}

/// Parse a backend identifier: `dual`, `tape`, `fd`, or the composite forms
/// `secondorder(a,b)`, `mixed(a,b)`, `sparse(a)`.
pub fn parse_backend(id: &str) -> Result<Backend, HarnessError> {
    let id = id.trim();
    match id {
        "dual" => return Ok(Backend::forward()),
        "tape" => return Ok(Backend::reverse()),
        "fd" => return Ok(Backend::finite_diff()),
        _ => {}
    }
    let bad = || HarnessError::Config(format!("unknown backend `{id}`"));
    let inner_of = |prefix: &str| -> Option<&str> {
        id.strip_prefix(prefix)
            .and_then(|rest| rest.strip_prefix('('))
            .and_then(|rest| rest.strip_suffix(')'))
    };
    if let Some(args) = inner_of("secondorder") {
        let (a, b) = split_two(args).ok_or_else(bad)?;
        return Ok(Backend::second_order(parse_backend(a)?, parse_backend(b)?));
    }
    if let Some(args) = inner_of("mixed") {
        let (a, b) = split_two(args).ok_or_else(bad)?;
        return Ok(Backend::mixed_mode(parse_backend(a)?, parse_backend(b)?));
    }
    if let Some(arg) = inner_of("sparse") {
        return Ok(Backend::sparse(parse_backend(arg)?));
    }
    Err(bad())
}

/// Re-join comma-split backend arguments whose parentheses ended up
/// unbalanced, so `secondorder(dual,tape)` survives a comma-delimited
/// command line.
pub fn rejoin_backend_args(tokens: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut depth = 0usize;
    for token in tokens {
        if depth > 0 {
            let last = out.last_mut().unwrap();
            last.push(',');
            last.push_str(token);
        } else {
            out.push(token.clone());
        }
        for c in token.chars() {
            match c {
                '(' => depth += 1,
                ')' => depth = depth.saturating_sub(1),
                _ => {}
            }
        }
    }
    out
}

/// Split `a,b` at the top-level comma (commas inside parentheses nest).
fn split_two(s: &str) -> Option<(&str, &str)> {
    let mut depth = 0usize;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.checked_sub(1)?,
            ',' if depth == 0 => return Some((&s[..i], &s[i + 1..])),
            _ => {}
        }
    }
    None
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    /// Scenario names, or the single entry `all`.
    pub scenarios: Vec<String>,
    pub backends: Vec<String>,
    pub sizes: Vec<usize>,
    pub prepared: PreparedMode,
    pub bench: BenchConfig,
    /// Deliberately offset every reference (testing hook).
    pub corrupt_references: bool,
    /// Run cells in parallel. Off by default to avoid timing contention.
    pub parallel: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            scenarios: vec!["all".into()],
            backends: vec!["dual".into(), "tape".into(), "fd".into()],
            sizes: vec![],
            prepared: PreparedMode::Both,
            bench: BenchConfig::default(),
            corrupt_references: false,
            parallel: false,
        }
    }
}

pub struct SuiteOutcome {
    pub records: Vec<BenchmarkRecord>,
    pub any_failure: bool,
}

fn parse_backends(ids: &[String]) -> Result<Vec<(String, Backend)>, HarnessError> {
    if ids.is_empty() {
        return Err(HarnessError::Config("empty backend list".into()));
    }
    ids.iter()
        .map(|id| parse_backend(id).map(|b| (id.clone(), b)))
        .collect()
}

/// Run the benchmark cross-product and collect one record per cell.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteOutcome, HarnessError> {
    let names = resolve_scenario_names(&cfg.scenarios)?;
    let backends = parse_backends(&cfg.backends)?;

    // one scenario instance per (name, size)
    let mut instances: Vec<Box<dyn RunnableScenario>> = Vec::new();
    for name in &names {
        let sizes: Vec<usize> = if cfg.sizes.is_empty() {
            vec![default_size(name)]
        } else {
            cfg.sizes.clone()
        };
        for size in sizes {
            let mut scenario = build_scenario(name, size)?;
            if cfg.corrupt_references {
                scenario.corrupt_reference();
            }
            instances.push(scenario);
        }
    }

    let cells: Vec<(usize, usize, bool)> = instances
        .iter()
        .enumerate()
        .flat_map(|(si, _)| {
            backends.iter().enumerate().flat_map(move |(bi, _)| {
                cfg.prepared.flags().iter().map(move |&p| (si, bi, p))
            })
        })
        .collect();

    let run_cell = |&(si, bi, prepared): &(usize, usize, bool)| -> BenchmarkRecord {
        instances[si].bench(&backends[bi].1, prepared, &cfg.bench)
    };

    let records: Vec<BenchmarkRecord> = if cfg.parallel {
        cells.par_iter().map(run_cell).collect()
    } else {
        cells.iter().map(run_cell).collect()
    };

    let any_failure = records.iter().any(|r| r.status == CheckStatus::Fail);
    Ok(SuiteOutcome { records, any_failure })
}

/// Run correctness checks over scenarios x backends at default sizes.
pub fn run_checks(
    scenarios: &[String],
    backends: &[String],
    tolerance: Option<f64>,
    parallel: bool,
) -> Result<Vec<CheckReport>, HarnessError> {
    let names = resolve_scenario_names(scenarios)?;
    let backends = parse_backends(backends)?;

    let mut instances: Vec<Box<dyn RunnableScenario>> = Vec::new();
    for name in &names {
        instances.push(build_scenario(name, default_size(name))?);
    }
    let cells: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|si| (0..backends.len()).map(move |bi| (si, bi)))
        .collect();
    let run_cell = |&(si, bi): &(usize, usize)| instances[si].check(&backends[bi].1, tolerance);

    Ok(if parallel {
        cells.par_iter().map(run_cell).collect()
    } else {
        cells.iter().map(run_cell).collect()
    })
}
