//! Golden-file tests for the plain-text pattern and coloring exports.

use adkit_core::sparse::{
    detect_hessian_pattern, detect_jacobian_pattern, greedy_color, Partition,
};
use adkit_core::DifferentiableFunction;
use adkit_harness::functions::{PairwiseProducts, TridiagonalStencil};
use adkit_harness::{build_scenario, default_size, scenario_names};

fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

#[test]
fn stencil_jacobian_pattern_text() {
    let func = DifferentiableFunction::new(TridiagonalStencil, 6, 6);
    let pattern = detect_jacobian_pattern(&func, &[0.0; 6], &[]);
    assert_eq!(pattern.to_text(), golden("stencil_pattern.txt"));
    let coloring = greedy_color(&pattern, Partition::Column);
    assert_eq!(coloring.to_text(), golden("stencil_coloring.txt"));
}

#[test]
fn pairwise_hessian_pattern_text() {
    let func = DifferentiableFunction::new(PairwiseProducts, 6, 1);
    let pattern = detect_hessian_pattern(&func, &[1.0; 6], &[]);
    assert_eq!(pattern.to_text(), golden("pairwise_hessian_pattern.txt"));
    let coloring = greedy_color(&pattern, Partition::Symmetric);
    assert_eq!(coloring.to_text(), golden("pairwise_hessian_coloring.txt"));
}

#[test]
fn scenario_pattern_text_matches_direct_detection() {
    let scenario = build_scenario("tridiagonal_stencil", 6).unwrap();
    assert_eq!(scenario.pattern_text(), golden("stencil_pattern.txt"));
}

#[test]
fn every_scenario_exports_a_pattern() {
    for name in scenario_names() {
        let scenario = build_scenario(name, default_size(name)).unwrap();
        let text = scenario.pattern_text();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().unwrap())
            .collect();
        assert_eq!(dims.len(), 2, "{name}");
        for line in lines {
            let pair: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse().unwrap())
                .collect();
            assert_eq!(pair.len(), 2, "{name}");
            assert!(pair[0] < dims[0] && pair[1] < dims[1], "{name}: {line}");
        }
    }
}
