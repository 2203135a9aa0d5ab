//! Standardized result reporting: the fixed-schema CSV and a readable table.

use crate::bench::BenchmarkRecord;
use crate::check::CheckReport;
use std::fmt::Write as _;

/// The CSV header, fixed by contract.
pub const CSV_HEADER: &str =
    "scenario,backend,operator,size,prepared,samples,time_ns_min,time_ns_median,allocs,status,max_abs_err";

pub fn records_to_csv(records: &[BenchmarkRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CSV_HEADER}");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.backend,
            r.op,
            r.size,
            r.prepared,
            r.samples,
            r.time_ns_min,
            r.time_ns_median,
            r.allocs,
            r.status.label(),
            r.max_abs_err,
        );
    }
    out
}

pub fn records_to_markdown(records: &[BenchmarkRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "| scenario | backend | operator | size | prepared | samples | min (ns) | median (ns) | allocs | status | max abs err |"
    );
    let _ = writeln!(
        out,
        "|---|---|---|---:|---|---:|---:|---:|---:|---|---:|"
    );
    for r in records {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {:.3e} |",
            r.scenario,
            r.backend,
            r.op,
            r.size,
            r.prepared,
            r.samples,
            r.time_ns_min,
            r.time_ns_median,
            r.allocs,
            r.status.label(),
            r.max_abs_err,
        );
    }
    out
}

/// Human-readable check table for terminal output.
pub fn checks_to_table(reports: &[CheckReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<28} {:<22} {:<18} {:>6}  {:<6} {:>12} {:>12}",
        "scenario", "backend", "operator", "size", "status", "max_abs_err", "tolerance"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<28} {:<22} {:<18} {:>6}  {:<6} {:>12.3e} {:>12.1e}",
            r.scenario,
            r.backend,
            r.op.to_string(),
            r.size,
            r.status.label(),
            r.max_abs_err,
            r.tolerance
        );
        if let crate::check::CheckStatus::Skip(reason) = &r.status {
            let _ = writeln!(out, "    skipped: {reason}");
        } else if let Some(detail) = &r.detail {
            let _ = writeln!(out, "    detail: {detail}");
        }
    }
    out
}
