//! Test scenarios: a function, a typical input, contexts, one operator and
//! a reference, bundled for correctness checks and benchmarks.

use crate::error::HarnessError;
use crate::functions::*;
use adkit_core::sparse::SparsityPattern;
use adkit_core::{Backend, Context, ContextSpec, DifferentiableFunction, Function, Op, Seeds};

/// The concrete inputs of one scenario instance.
pub struct ScenarioData {
    pub x: Vec<f64>,
    pub contexts: Vec<Context>,
    pub seeds: Option<Seeds>,
}

/// How expected derivative values are produced. References are evaluable
/// with plain `f64` arithmetic, independently of any backend under test.
pub enum Reference {
    /// Closed-form derivative, flattened in the operator's canonical order.
    ClosedForm(Box<dyn Fn(&ScenarioData) -> Vec<f64> + Send + Sync>),
    /// Central finite differences at the default oracle step (~6.06e-6).
    FiniteDifference,
}

/// A named test case for one operator.
pub struct Scenario<F: Function> {
    pub(crate) name: String,
    pub(crate) op: Op,
    pub(crate) func: DifferentiableFunction<F>,
    pub(crate) data: ScenarioData,
    pub(crate) reference: Reference,
    pub(crate) corrupted: bool,
}

impl<F: Function> Scenario<F> {
    pub fn new(
        name: impl Into<String>,
        op: Op,
        func: DifferentiableFunction<F>,
        data: ScenarioData,
        reference: Reference,
    ) -> Self {
        Scenario {
            name: name.into(),
            op,
            func,
            data,
            reference,
            corrupted: false,
        }
    }

    /// Expected derivative values, flattened.
    pub(crate) fn reference_values(&self) -> Vec<f64> {
        let mut values = match &self.reference {
            Reference::ClosedForm(f) => f(&self.data),
            Reference::FiniteDifference => crate::drive::fd_reference(&self.func, self.op, &self.data),
        };
        if self.corrupted {
            for v in &mut values {
                *v += 1.0;
            }
        }
        values
    }
}

/// Object-safe view of a scenario, so heterogeneous scenario sets can run
/// through one harness loop.
pub trait RunnableScenario: Send + Sync {
    fn name(&self) -> &str;
    fn operator(&self) -> Op;
    fn size(&self) -> usize;
    fn check(&self, backend: &Backend, tolerance: Option<f64>) -> crate::check::CheckReport;
    fn bench(
        &self,
        backend: &Backend,
        prepared: bool,
        cfg: &crate::bench::BenchConfig,
    ) -> crate::bench::BenchmarkRecord;
    /// Pattern text for the `pattern` subcommand: the Hessian pattern for
    /// scalar-output second-order operators, the Jacobian pattern otherwise.
    fn pattern_text(&self) -> String;
    /// Deliberately offset the reference values (testing hook).
    fn corrupt_reference(&mut self);
}

impl<F: Function + Send + Sync> RunnableScenario for Scenario<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn operator(&self) -> Op {
        self.op
    }

    fn size(&self) -> usize {
        self.func.input_len()
    }

    fn check(&self, backend: &Backend, tolerance: Option<f64>) -> crate::check::CheckReport {
        crate::check::run_check(self, backend, tolerance)
    }

    fn bench(
        &self,
        backend: &Backend,
        prepared: bool,
        cfg: &crate::bench::BenchConfig,
    ) -> crate::bench::BenchmarkRecord {
        crate::bench::run_bench(self, backend, prepared, cfg)
    }

    fn pattern_text(&self) -> String {
        let pattern: SparsityPattern = match self.op {
            Op::Hessian | Op::Hvp => adkit_core::sparse::detect_hessian_pattern(
                &self.func,
                &self.data.x,
                &self.data.contexts,
            ),
            _ => adkit_core::sparse::detect_jacobian_pattern(
                &self.func,
                &self.data.x,
                &self.data.contexts,
            ),
        };
        pattern.to_text()
    }

    fn corrupt_reference(&mut self) {
        self.corrupted = true;
    }
}

/// Names of the built-in scenarios, in registry order.
pub fn scenario_names() -> &'static [&'static str] {
    &[
        "sum_of_squares",
        "tridiagonal_stencil",
        "quadratic_form_constant",
        "cache_stencil",
        "branchy",
        "atan2_field",
        "atan2_translated",
        "stencil_jvp",
        "stencil_vjp",
        "sine_exp_derivative",
        "sine_exp_second_derivative",
        "sum_of_squares_hvp",
        "pairwise_product_hessian",
    ]
}

/// Sensible default input size per scenario (scalar scenarios are fixed
/// at size 1 regardless of the requested size).
pub fn default_size(name: &str) -> usize {
    match name {
        "sine_exp_derivative" | "sine_exp_second_derivative" => 1,
        "quadratic_form_constant" | "atan2_field" | "atan2_translated" => 16,
        "pairwise_product_hessian" => 16,
        _ => 32,
    }
}

/// Instantiate a built-in scenario at the given input size.
pub fn build_scenario(name: &str, size: usize) -> Result<Box<dyn RunnableScenario>, HarnessError> {
    let n = size.max(2);
    match name {
        "sum_of_squares" => {
            let x = wavy_input(n, 0.3);
            Ok(Box::new(Scenario::new(
                name,
                Op::Gradient,
                DifferentiableFunction::new(SquaredNorm, n, 1),
                ScenarioData {
                    x,
                    contexts: vec![],
                    seeds: None,
                },
                Reference::ClosedForm(Box::new(|d| d.x.iter().map(|v| 2.0 * v).collect())),
            )))
        }
        "tridiagonal_stencil" => {
            let x = wavy_input(n, 0.9);
            Ok(Box::new(Scenario::new(
                name,
                Op::Jacobian,
                DifferentiableFunction::new(TridiagonalStencil, n, n),
                ScenarioData {
                    x,
                    contexts: vec![],
                    seeds: None,
                },
                Reference::ClosedForm(Box::new(move |d| {
                    let n = d.x.len();
                    let mut jac = vec![0.0; n * n];
                    for i in 0..n {
                        jac[i * n + i] = -2.0;
                        if i > 0 {
                            jac[i * n + i - 1] = 1.0;
                        }
                        if i + 1 < n {
                            jac[i * n + i + 1] = 1.0;
                        }
                    }
                    jac
                })),
            )))
        }
        "quadratic_form_constant" => {
            let x = wavy_input(n, 1.7);
            let a = symmetric_matrix_payload(n);
            Ok(Box::new(Scenario::new(
                name,
                Op::Gradient,
                DifferentiableFunction::new(QuadraticFormConstant, n, 1)
                    .with_context(ContextSpec::Constant { len: n * n }),
                ScenarioData {
                    x,
                    contexts: vec![Context::Constant(a)],
                    seeds: None,
                },
                Reference::ClosedForm(Box::new(|d| {
                    let Context::Constant(a) = &d.contexts[0] else {
                        unreachable!()
                    };
                    quadratic_form_gradient(a, &d.x)
                })),
            )))
        }
        "cache_stencil" => {
            let x = wavy_input(n, 2.4);
            Ok(Box::new(Scenario::new(
                name,
                Op::Jacobian,
                DifferentiableFunction::new_in_place(CacheStencil, n, n)
                    .with_context(ContextSpec::Cache { len: n }),
                ScenarioData {
                    x,
                    contexts: vec![Context::Cache(vec![0.0; n])],
                    seeds: None,
                },
                Reference::ClosedForm(Box::new(|d| cache_stencil_jacobian(&d.x))),
            )))
        }
        "branchy" => {
            // inputs straddle the branch threshold on both sides
            let x: Vec<f64> = (0..n).map(|i| (0.2 + 0.9 * i as f64).sin() + 1.0).collect();
            Ok(Box::new(Scenario::new(
                name,
                Op::Gradient,
                DifferentiableFunction::new(Branchy, n, 1),
                ScenarioData {
                    x,
                    contexts: vec![],
                    seeds: None,
                },
                Reference::ClosedForm(Box::new(|d| branchy_gradient(&d.x))),
            )))
        }
        "atan2_field" => {
            let x = wavy_input(n, 3.1);
            Ok(Box::new(Scenario::new(
                name,
                Op::Gradient,
                DifferentiableFunction::new(Atan2Field, n, 1),
                ScenarioData {
                    x,
                    contexts: vec![],
                    seeds: None,
                },
                Reference::ClosedForm(Box::new(|d| atan2_field_gradient(&d.x))),
            )))
        }
        "atan2_translated" => {
            let x = wavy_input(n, 3.1);
            Ok(Box::new(Scenario::new(
                name,
                Op::Gradient,
                DifferentiableFunction::new(Atan2Field, n, 1)
                    .differentiate_with(Backend::reverse()),
                ScenarioData {
                    x,
                    contexts: vec![],
                    seeds: None,
                },
                Reference::ClosedForm(Box::new(|d| atan2_field_gradient(&d.x))),
            )))
        }
        "stencil_jvp" => {
            let x = wavy_input(n, 4.2);
            let seeds = Seeds::new(vec![wavy_input(n, 5.0), wavy_input(n, 6.1)]);
            Ok(Box::new(Scenario::new(
                name,
                Op::Pushforward,
                DifferentiableFunction::new(TridiagonalStencil, n, n),
                ScenarioData {
                    x,
                    contexts: vec![],
                    seeds: Some(seeds),
                },
                Reference::ClosedForm(Box::new(|d| {
                    let seeds = d.seeds.as_ref().unwrap();
                    seeds
                        .directions()
                        .iter()
                        .flat_map(|v| stencil_apply(v))
                        .collect()
                })),
            )))
        }
        "stencil_vjp" => {
            let x = wavy_input(n, 4.5);
            let seeds = Seeds::single(wavy_input(n, 7.3));
            Ok(Box::new(Scenario::new(
                name,
                Op::Pullback,
                DifferentiableFunction::new(TridiagonalStencil, n, n),
                ScenarioData {
                    x,
                    contexts: vec![],
                    seeds: Some(seeds),
                },
                // the stencil Jacobian is symmetric, so J^T w = J w
                Reference::ClosedForm(Box::new(|d| {
                    let seeds = d.seeds.as_ref().unwrap();
                    seeds
                        .directions()
                        .iter()
                        .flat_map(|w| stencil_apply(w))
                        .collect()
                })),
            )))
        }
        "sine_exp_derivative" => Ok(Box::new(Scenario::new(
            name,
            Op::Derivative,
            DifferentiableFunction::new(SineExp, 1, 1),
            ScenarioData {
                x: vec![0.4],
                contexts: vec![],
                seeds: None,
            },
            Reference::ClosedForm(Box::new(|d| vec![sine_exp_derivative(d.x[0])])),
        ))),
        "sine_exp_second_derivative" => Ok(Box::new(Scenario::new(
            name,
            Op::SecondDerivative,
            DifferentiableFunction::new(SineExp, 1, 1),
            ScenarioData {
                x: vec![0.4],
                contexts: vec![],
                seeds: None,
            },
            Reference::ClosedForm(Box::new(|d| vec![sine_exp_second_derivative(d.x[0])])),
        ))),
        "sum_of_squares_hvp" => {
            let x = wavy_input(n, 8.8);
            let seeds = Seeds::single(wavy_input(n, 9.9));
            Ok(Box::new(Scenario::new(
                name,
                Op::Hvp,
                DifferentiableFunction::new(SquaredNorm, n, 1),
                ScenarioData {
                    x,
                    contexts: vec![],
                    seeds: Some(seeds),
                },
                // H = 2I
                Reference::ClosedForm(Box::new(|d| {
                    let seeds = d.seeds.as_ref().unwrap();
                    seeds
                        .directions()
                        .iter()
                        .flat_map(|v| v.iter().map(|e| 2.0 * e))
                        .collect()
                })),
            )))
        }
        "pairwise_product_hessian" => {
            let x = wavy_input(n, 10.4);
            Ok(Box::new(Scenario::new(
                name,
                Op::Hessian,
                DifferentiableFunction::new(PairwiseProducts, n, 1),
                ScenarioData {
                    x,
                    contexts: vec![],
                    seeds: None,
                },
                Reference::ClosedForm(Box::new(|d| pairwise_products_hessian(d.x.len()))),
            )))
        }
        other => Err(HarnessError::Config(format!("unknown scenario `{other}`"))),
    }
}

/// Deterministic symmetric matrix payload for the quadratic-form scenario.
fn symmetric_matrix_payload(n: usize) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = (1.3 + 0.31 * i as f64 + 0.17 * j as f64).sin() * 0.5;
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    a
}

/// Expand scenario name arguments, resolving the `all` keyword.
pub fn resolve_scenario_names(requested: &[String]) -> Result<Vec<String>, HarnessError> {
    if requested.is_empty() {
        return Err(HarnessError::Config("empty scenario list".into()));
    }
    if requested.len() == 1 && requested[0] == "all" {
        return Ok(scenario_names().iter().map(|s| s.to_string()).collect());
    }
    for name in requested {
        if !scenario_names().contains(&name.as_str()) {
            return Err(HarnessError::Config(format!("unknown scenario `{name}`")));
        }
    }
    Ok(requested.to_vec())
}
