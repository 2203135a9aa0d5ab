//! Harness behavior: check outcomes, bench semantics, suite execution.

use adkit_core::alloccount::CountingAllocator;
use adkit_harness::{
    build_scenario, default_size, parse_backend, records_to_csv, run_checks, run_suite,
    scenario_names, BenchConfig, CheckStatus, PreparedMode, SuiteConfig, CSV_HEADER,
};
use std::time::Duration;

#[global_allocator]
static ALLOC: CountingAllocator = CountingAllocator;

fn quick_bench() -> BenchConfig {
    BenchConfig {
        max_samples: 40,
        budget: Duration::from_millis(250),
        warmup: 2,
        tolerance: None,
    }
}

#[test]
fn check_sum_of_squares_exact_on_ad_backends() {
    let scenario = build_scenario("sum_of_squares", 32).unwrap();
    for id in ["dual", "tape"] {
        let backend = parse_backend(id).unwrap();
        let report = scenario.check(&backend, Some(1e-10));
        assert_eq!(report.status, CheckStatus::Pass, "{id}: {report:?}");
        assert_eq!(report.max_abs_err, 0.0, "{id} is exact on polynomials");
    }
}

#[test]
fn check_fd_fails_tight_tolerance_passes_loose() {
    let scenario = build_scenario("sum_of_squares", 32).unwrap();
    let backend = parse_backend("fd").unwrap();

    let tight = scenario.check(&backend, Some(1e-10));
    assert_eq!(tight.status, CheckStatus::Fail, "{tight:?}");
    assert!(tight.max_abs_err > 1e-10);

    let loose = scenario.check(&backend, Some(1e-5));
    assert_eq!(loose.status, CheckStatus::Pass, "{loose:?}");
}

#[test]
fn check_skips_unrealizable_operators() {
    // pullback on the forward-only dual backend
    let scenario = build_scenario("stencil_vjp", 16).unwrap();
    let report = scenario.check(&parse_backend("dual").unwrap(), None);
    match &report.status {
        CheckStatus::Skip(reason) => assert!(reason.contains("unsupported"), "{reason}"),
        other => panic!("expected skip, got {other:?}"),
    }

    // hvp runs on dual (forward-over-forward) but not on plain tape or fd
    let scenario = build_scenario("sum_of_squares_hvp", 16).unwrap();
    assert_eq!(
        scenario.check(&parse_backend("dual").unwrap(), None).status,
        CheckStatus::Pass
    );
    assert!(matches!(
        scenario.check(&parse_backend("tape").unwrap(), None).status,
        CheckStatus::Skip(_)
    ));
    assert!(matches!(
        scenario.check(&parse_backend("fd").unwrap(), None).status,
        CheckStatus::Skip(_)
    ));
}

#[test]
fn check_atan2_skips_on_dual_passes_when_translated() {
    let plain = build_scenario("atan2_field", 8).unwrap();
    let report = plain.check(&parse_backend("dual").unwrap(), None);
    match &report.status {
        CheckStatus::Skip(reason) => assert!(reason.contains("atan2"), "{reason}"),
        other => panic!("expected skip, got {other:?}"),
    }
    assert_eq!(
        plain.check(&parse_backend("tape").unwrap(), None).status,
        CheckStatus::Pass
    );

    let translated = build_scenario("atan2_translated", 8).unwrap();
    assert_eq!(
        translated.check(&parse_backend("dual").unwrap(), None).status,
        CheckStatus::Pass
    );
}

#[test]
fn builtin_scenarios_cover_all_operators() {
    let mut ops: Vec<adkit_core::Op> = scenario_names()
        .iter()
        .map(|name| build_scenario(name, default_size(name)).unwrap().operator())
        .collect();
    ops.sort_by_key(|op| op.name());
    ops.dedup();
    assert_eq!(ops.len(), adkit_core::Op::ALL.len(), "{ops:?}");
}

#[test]
fn every_scenario_passes_on_a_suitable_backend() {
    // each built-in scenario has at least one passing backend, and backends
    // that cannot realize an operator report skip, never fail
    let backends: Vec<_> = ["dual", "tape", "fd"]
        .iter()
        .map(|id| parse_backend(id).unwrap())
        .collect();
    for name in scenario_names() {
        let scenario = build_scenario(name, default_size(name)).unwrap();
        let reports: Vec<_> = backends
            .iter()
            .map(|b| scenario.check(b, None))
            .collect();
        assert!(
            reports.iter().any(|r| r.status == CheckStatus::Pass),
            "{name}: {reports:?}"
        );
        for report in &reports {
            assert_ne!(report.status, CheckStatus::Fail, "{name}: {report:?}");
        }
    }
}

#[test]
fn check_outcomes_are_deterministic() {
    let scenarios: Vec<String> = scenario_names().iter().map(|s| s.to_string()).collect();
    let backends = vec!["dual".to_string(), "tape".to_string(), "fd".to_string()];
    let a = run_checks(&scenarios, &backends, None, false).unwrap();
    let b = run_checks(&scenarios, &backends, None, false).unwrap();
    assert_eq!(a.len(), b.len());
    for (ra, rb) in a.iter().zip(&b) {
        assert_eq!(ra.status, rb.status, "{}", ra.scenario);
        assert_eq!(ra.max_abs_err.to_bits(), rb.max_abs_err.to_bits());
    }
}

#[test]
fn bench_prepared_tape_beats_recording_every_call() {
    let scenario = build_scenario("sum_of_squares", 1000).unwrap();
    let backend = parse_backend("tape").unwrap();
    let cfg = quick_bench();
    let prepared = scenario.bench(&backend, true, &cfg);
    let unprepared = scenario.bench(&backend, false, &cfg);
    assert_eq!(prepared.status, CheckStatus::Pass);
    assert_eq!(unprepared.status, CheckStatus::Pass);
    assert!(
        prepared.time_ns_median < unprepared.time_ns_median,
        "prepared {} vs unprepared {}",
        prepared.time_ns_median,
        unprepared.time_ns_median
    );
}

#[test]
fn bench_prepared_dual_does_not_allocate() {
    let scenario = build_scenario("sum_of_squares", 1000).unwrap();
    let backend = parse_backend("dual").unwrap();
    let record = scenario.bench(&backend, true, &quick_bench());
    assert_eq!(record.status, CheckStatus::Pass);
    assert_eq!(record.allocs, 0, "{record:?}");
}

#[test]
fn bench_fd_preparation_is_cheap() {
    // preparation only allocates buffers for fd, so both modes should land
    // within a factor of two of each other
    let scenario = build_scenario("sum_of_squares", 200).unwrap();
    let backend = parse_backend("fd").unwrap();
    let cfg = quick_bench();
    let prepared = scenario.bench(&backend, true, &cfg);
    let unprepared = scenario.bench(&backend, false, &cfg);
    let ratio = unprepared.time_ns_median as f64 / prepared.time_ns_median.max(1) as f64;
    assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn bench_skip_records_unrealizable_cells() {
    let scenario = build_scenario("stencil_vjp", 8).unwrap();
    let record = scenario.bench(&parse_backend("dual").unwrap(), true, &quick_bench());
    assert!(matches!(record.status, CheckStatus::Skip(_)));
    assert_eq!(record.samples, 0);
}

#[test]
fn suite_emits_full_cross_product() {
    let cfg = SuiteConfig {
        scenarios: vec!["sum_of_squares".into()],
        backends: vec!["dual".into(), "tape".into(), "fd".into()],
        sizes: vec![8, 16, 24],
        prepared: PreparedMode::Both,
        bench: quick_bench(),
        ..Default::default()
    };
    let outcome = run_suite(&cfg).unwrap();
    assert_eq!(outcome.records.len(), 18);
    assert!(!outcome.any_failure);

    let csv = records_to_csv(&outcome.records);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 19);
    assert_eq!(lines[0], CSV_HEADER);
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 11, "row: {line}");
    }
}

#[test]
fn suite_with_corrupted_reference_reports_failure() {
    let cfg = SuiteConfig {
        scenarios: vec!["sum_of_squares".into()],
        backends: vec!["dual".into()],
        sizes: vec![16],
        prepared: PreparedMode::True,
        bench: quick_bench(),
        corrupt_references: true,
        ..Default::default()
    };
    let outcome = run_suite(&cfg).unwrap();
    assert!(outcome.any_failure);
}

#[test]
fn suite_runs_in_parallel_when_asked() {
    let cfg = SuiteConfig {
        scenarios: vec!["sum_of_squares".into(), "tridiagonal_stencil".into()],
        backends: vec!["dual".into(), "tape".into()],
        sizes: vec![8],
        prepared: PreparedMode::Both,
        bench: quick_bench(),
        parallel: true,
        ..Default::default()
    };
    let outcome = run_suite(&cfg).unwrap();
    assert_eq!(outcome.records.len(), 8);
    assert!(!outcome.any_failure);
}

#[test]
fn branchy_tape_reuse_caveat_is_observable() {
    use adkit_core::{gradient, prepare, DifferentiableFunction, Op};
    use adkit_harness::functions::{branchy_gradient, Branchy};

    // prepare on one side of the branch, evaluate on the other: the tape
    // reports a trace escape where dual and fd just recompute
    let n = 4;
    let func = DifferentiableFunction::new(Branchy, n, 1);
    let x_record = vec![2.0, 2.5, 0.2, 3.0];
    let x_flipped = vec![2.0, 0.5, 0.2, 3.0];

    let tape = parse_backend("tape").unwrap();
    let mut prep = prepare(Op::Gradient, &func, &tape, &x_record, &[]).unwrap();
    assert!(gradient(&func, &mut prep, &tape, &x_record, &[]).is_ok());
    let err = gradient(&func, &mut prep, &tape, &x_flipped, &[]).unwrap_err();
    assert!(matches!(err, adkit_core::Error::TraceEscape { .. }));

    for id in ["dual", "fd"] {
        let backend = parse_backend(id).unwrap();
        let mut prep = prepare(Op::Gradient, &func, &backend, &x_record, &[]).unwrap();
        let g = gradient(&func, &mut prep, &backend, &x_flipped, &[]).unwrap();
        let expected = branchy_gradient(&x_flipped);
        let err = g
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-4, "{id}: {err}");
    }
}

/// The constant-matrix quadratic form gives bitwise-identical gradients
/// whether the matrix is inlined or passed as a Constant context.
#[test]
fn constant_context_matches_inlined_matrix_bitwise() {
    use adkit_core::{gradient, prepare, Context, ContextSpec, DifferentiableFunction, Op};
    use adkit_harness::functions::{QuadraticFormConstant, QuadraticFormInlined, wavy_input};

    let n = 12;
    let a: Vec<f64> = (0..n * n).map(|k| (0.17 * k as f64).sin() * 0.5).collect();
    let x = wavy_input(n, 0.5);

    for id in ["dual", "tape", "fd"] {
        let backend = parse_backend(id).unwrap();

        let with_ctx = DifferentiableFunction::new(QuadraticFormConstant, n, 1)
            .with_context(ContextSpec::Constant { len: n * n });
        let contexts = [Context::Constant(a.clone())];
        let mut prep = prepare(Op::Gradient, &with_ctx, &backend, &x, &contexts).unwrap();
        let g_ctx = gradient(&with_ctx, &mut prep, &backend, &x, &contexts).unwrap();

        let inlined = DifferentiableFunction::new(
            QuadraticFormInlined { a: a.clone(), n },
            n,
            1,
        );
        let mut prep = prepare(Op::Gradient, &inlined, &backend, &x, &[]).unwrap();
        let g_inl = gradient(&inlined, &mut prep, &backend, &x, &[]).unwrap();

        for (u, v) in g_ctx.iter().zip(&g_inl) {
            assert_eq!(u.to_bits(), v.to_bits(), "{id}");
        }
    }
}
