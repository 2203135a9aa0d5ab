//! Shared execution plumbing: running operator variants on a scenario and
//! producing finite-difference reference values.

use crate::scenario::{Scenario, ScenarioData};
use adkit_core::{
    derivative, derivative_into, gradient, gradient_into, hessian, hessian_into, hvp, hvp_into,
    jacobian, jacobian_into, prepare, pullback, pullback_into, pushforward, pushforward_into,
    second_derivative, second_derivative_into, value_and_derivative, value_and_gradient,
    value_and_hessian, value_and_hvp, value_and_jacobian, value_and_pullback,
    value_and_pushforward, value_and_second_derivative, Backend, Context, ContextSpec,
    DerivativeMatrix, DifferentiableFunction, EvalContexts, Function, Op, Preparation, Result,
    Seeds,
};

pub(crate) fn prepare_scenario<F: Function>(
    scenario: &Scenario<F>,
    backend: &Backend,
) -> Result<Preparation> {
    prepare(
        scenario.op,
        &scenario.func,
        backend,
        &scenario.data.x,
        &scenario.data.contexts,
    )
}

fn flatten_batch(batch: &[Vec<f64>]) -> Vec<f64> {
    batch.iter().flatten().copied().collect()
}

fn flatten_matrix(m: &DerivativeMatrix) -> Vec<f64> {
    m.to_dense().as_slice().to_vec()
}

fn seeds_of<F: Function>(scenario: &Scenario<F>) -> &Seeds {
    scenario
        .data
        .seeds
        .as_ref()
        .expect("seeded operator scenario carries seeds")
}

/// Run all four variants of the scenario's operator; returns the flattened
/// derivative of each variant (the primal outputs of the value variants are
/// checked for consistency by the caller through the derivative agreement).
pub(crate) fn run_all_variants<F: Function>(
    scenario: &Scenario<F>,
    prep: &mut Preparation,
    backend: &Backend,
) -> Result<Vec<Vec<f64>>> {
    let func = &scenario.func;
    let (x, ctx) = (&scenario.data.x[..], &scenario.data.contexts[..]);
    let mut variants = Vec::with_capacity(4);
    match scenario.op {
        Op::Pushforward => {
            let seeds = seeds_of(scenario);
            let a = pushforward(func, prep, backend, x, seeds, ctx)?;
            let (_, b) = value_and_pushforward(func, prep, backend, x, seeds, ctx)?;
            let mut c = vec![vec![0.0; func.output_len()]; seeds.len()];
            pushforward_into(func, prep, backend, x, seeds, ctx, &mut c)?;
            let mut d = vec![vec![0.0; func.output_len()]; seeds.len()];
            adkit_core::value_and_pushforward_into(func, prep, backend, x, seeds, ctx, &mut d)?;
            variants.push(flatten_batch(&a));
            variants.push(flatten_batch(&b));
            variants.push(flatten_batch(&c));
            variants.push(flatten_batch(&d));
        }
        Op::Pullback => {
            let seeds = seeds_of(scenario);
            let a = pullback(func, prep, backend, x, seeds, ctx)?;
            let (_, b) = value_and_pullback(func, prep, backend, x, seeds, ctx)?;
            let mut c = vec![vec![0.0; func.input_len()]; seeds.len()];
            pullback_into(func, prep, backend, x, seeds, ctx, &mut c)?;
            let mut d = vec![vec![0.0; func.input_len()]; seeds.len()];
            adkit_core::value_and_pullback_into(func, prep, backend, x, seeds, ctx, &mut d)?;
            variants.push(flatten_batch(&a));
            variants.push(flatten_batch(&b));
            variants.push(flatten_batch(&c));
            variants.push(flatten_batch(&d));
        }
        Op::Derivative => {
            let a = derivative(func, prep, backend, x, ctx)?;
            let (_, b) = value_and_derivative(func, prep, backend, x, ctx)?;
            let mut c = vec![0.0; func.output_len()];
            derivative_into(func, prep, backend, x, ctx, &mut c)?;
            let mut d = vec![0.0; func.output_len()];
            adkit_core::value_and_derivative_into(func, prep, backend, x, ctx, &mut d)?;
            variants.extend([a, b, c, d]);
        }
        Op::Gradient => {
            let a = gradient(func, prep, backend, x, ctx)?;
            let (_, b) = value_and_gradient(func, prep, backend, x, ctx)?;
            let mut c = vec![0.0; func.input_len()];
            gradient_into(func, prep, backend, x, ctx, &mut c)?;
            let mut d = vec![0.0; func.input_len()];
            adkit_core::value_and_gradient_into(func, prep, backend, x, ctx, &mut d)?;
            variants.extend([a, b, c, d]);
        }
        Op::Jacobian => {
            let a = jacobian(func, prep, backend, x, ctx)?;
            let (_, b) = value_and_jacobian(func, prep, backend, x, ctx)?;
            let mut c = prep.new_result_matrix().unwrap();
            jacobian_into(func, prep, backend, x, ctx, &mut c)?;
            let mut d = prep.new_result_matrix().unwrap();
            adkit_core::value_and_jacobian_into(func, prep, backend, x, ctx, &mut d)?;
            variants.push(flatten_matrix(&a));
            variants.push(flatten_matrix(&b));
            variants.push(flatten_matrix(&c));
            variants.push(flatten_matrix(&d));
        }
        Op::SecondDerivative => {
            let a = second_derivative(func, prep, backend, x, ctx)?;
            let (_, b) = value_and_second_derivative(func, prep, backend, x, ctx)?;
            let mut c = vec![0.0; func.output_len()];
            second_derivative_into(func, prep, backend, x, ctx, &mut c)?;
            let mut d = vec![0.0; func.output_len()];
            adkit_core::value_and_second_derivative_into(func, prep, backend, x, ctx, &mut d)?;
            variants.extend([a, b, c, d]);
        }
        Op::Hvp => {
            let seeds = seeds_of(scenario);
            let a = hvp(func, prep, backend, x, seeds, ctx)?;
            let (_, b) = value_and_hvp(func, prep, backend, x, seeds, ctx)?;
            let mut c = vec![vec![0.0; func.input_len()]; seeds.len()];
            hvp_into(func, prep, backend, x, seeds, ctx, &mut c)?;
            let mut d = vec![vec![0.0; func.input_len()]; seeds.len()];
            adkit_core::value_and_hvp_into(func, prep, backend, x, seeds, ctx, &mut d)?;
            variants.push(flatten_batch(&a));
            variants.push(flatten_batch(&b));
            variants.push(flatten_batch(&c));
            variants.push(flatten_batch(&d));
        }
        Op::Hessian => {
            let a = hessian(func, prep, backend, x, ctx)?;
            let (_, b) = value_and_hessian(func, prep, backend, x, ctx)?;
            let mut c = prep.new_result_matrix().unwrap();
            hessian_into(func, prep, backend, x, ctx, &mut c)?;
            let mut d = prep.new_result_matrix().unwrap();
            adkit_core::value_and_hessian_into(func, prep, backend, x, ctx, &mut d)?;
            variants.push(flatten_matrix(&a));
            variants.push(flatten_matrix(&b));
            variants.push(flatten_matrix(&c));
            variants.push(flatten_matrix(&d));
        }
    }
    Ok(variants)
}

/// Preallocated output storage for the timed in-place variant.
pub(crate) struct IntoBuffers {
    vec_out: Vec<f64>,
    batch_out: Vec<Vec<f64>>,
    mat_out: Option<DerivativeMatrix>,
}

impl IntoBuffers {
    pub(crate) fn for_scenario<F: Function>(
        scenario: &Scenario<F>,
        prep: &Preparation,
    ) -> IntoBuffers {
        let func = &scenario.func;
        let batch = scenario.data.seeds.as_ref().map_or(0, Seeds::len);
        match scenario.op {
            Op::Pushforward => IntoBuffers {
                vec_out: Vec::new(),
                batch_out: vec![vec![0.0; func.output_len()]; batch],
                mat_out: None,
            },
            Op::Pullback | Op::Hvp => IntoBuffers {
                vec_out: Vec::new(),
                batch_out: vec![vec![0.0; func.input_len()]; batch],
                mat_out: None,
            },
            Op::Derivative | Op::SecondDerivative => IntoBuffers {
                vec_out: vec![0.0; func.output_len()],
                batch_out: Vec::new(),
                mat_out: None,
            },
            Op::Gradient => IntoBuffers {
                vec_out: vec![0.0; func.input_len()],
                batch_out: Vec::new(),
                mat_out: None,
            },
            Op::Jacobian | Op::Hessian => IntoBuffers {
                vec_out: Vec::new(),
                batch_out: Vec::new(),
                mat_out: prep.new_result_matrix(),
            },
        }
    }

    pub(crate) fn flattened<F: Function>(&self, scenario: &Scenario<F>) -> Vec<f64> {
        match scenario.op {
            Op::Pushforward | Op::Pullback | Op::Hvp => flatten_batch(&self.batch_out),
            Op::Derivative | Op::Gradient | Op::SecondDerivative => self.vec_out.clone(),
            Op::Jacobian | Op::Hessian => flatten_matrix(self.mat_out.as_ref().unwrap()),
        }
    }
}

/// Run the scenario's operator through the in-place derivative variant —
/// the allocation-free steady-state path the benchmarks time.
pub(crate) fn run_into<F: Function>(
    scenario: &Scenario<F>,
    prep: &mut Preparation,
    backend: &Backend,
    bufs: &mut IntoBuffers,
) -> Result<()> {
    let func = &scenario.func;
    let (x, ctx) = (&scenario.data.x[..], &scenario.data.contexts[..]);
    match scenario.op {
        Op::Pushforward => {
            pushforward_into(func, prep, backend, x, seeds_of(scenario), ctx, &mut bufs.batch_out)
        }
        Op::Pullback => {
            pullback_into(func, prep, backend, x, seeds_of(scenario), ctx, &mut bufs.batch_out)
        }
        Op::Derivative => derivative_into(func, prep, backend, x, ctx, &mut bufs.vec_out),
        Op::Gradient => gradient_into(func, prep, backend, x, ctx, &mut bufs.vec_out),
        Op::Jacobian => {
            jacobian_into(func, prep, backend, x, ctx, bufs.mat_out.as_mut().unwrap())
        }
        Op::SecondDerivative => {
            second_derivative_into(func, prep, backend, x, ctx, &mut bufs.vec_out)
        }
        Op::Hvp => hvp_into(func, prep, backend, x, seeds_of(scenario), ctx, &mut bufs.batch_out),
        Op::Hessian => {
            hessian_into(func, prep, backend, x, ctx, bufs.mat_out.as_mut().unwrap())
        }
    }
}

// --- finite-difference reference -----------------------------------------------

fn eval_f64<F: Function>(
    func: &DifferentiableFunction<F>,
    x: &[f64],
    contexts: &[Context],
    cache_bufs: &mut [Vec<f64>],
) -> Vec<f64> {
    let mut y = vec![0.0; func.output_len()];
    let mut ctx = EvalContexts::new(contexts, cache_bufs);
    func.eval(x, &mut y, &mut ctx);
    y
}

fn reference_step(x: &[f64]) -> f64 {
    f64::EPSILON.cbrt() * x.iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

/// Default reference oracle: central finite differences at the standard step.
pub(crate) fn fd_reference<F: Function>(
    func: &DifferentiableFunction<F>,
    op: Op,
    data: &ScenarioData,
) -> Vec<f64> {
    let x = &data.x;
    let contexts = &data.contexts;
    let mut cache_bufs: Vec<Vec<f64>> = func
        .context_spec()
        .iter()
        .filter_map(|c| match c {
            ContextSpec::Cache { len } => Some(vec![0.0; *len]),
            ContextSpec::Constant { .. } => None,
        })
        .collect();
    let h = reference_step(x);
    let n = func.input_len();
    let m = func.output_len();

    let directional = |v: &[f64], h: f64, bufs: &mut [Vec<f64>]| -> Vec<f64> {
        let xp: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - h * b).collect();
        let yp = eval_f64(func, &xp, contexts, bufs);
        let ym = eval_f64(func, &xm, contexts, bufs);
        yp.iter().zip(&ym).map(|(p, q)| (p - q) / (2.0 * h)).collect()
    };

    let fd_jacobian = |bufs: &mut [Vec<f64>]| -> Vec<Vec<f64>> {
        let mut cols = Vec::with_capacity(n);
        let mut basis = vec![0.0; n];
        for i in 0..n {
            basis[i] = 1.0;
            let xp: Vec<f64> = x.iter().zip(&basis).map(|(a, b)| a + h * b).collect();
            let xm: Vec<f64> = x.iter().zip(&basis).map(|(a, b)| a - h * b).collect();
            let yp = eval_f64(func, &xp, contexts, bufs);
            let ym = eval_f64(func, &xm, contexts, bufs);
            basis[i] = 0.0;
            cols.push(
                yp.iter()
                    .zip(&ym)
                    .map(|(p, q)| (p - q) / (2.0 * h))
                    .collect(),
            );
        }
        cols
    };

    let fd_gradient = |x0: &[f64], bufs: &mut [Vec<f64>]| -> Vec<f64> {
        let mut g = vec![0.0; n];
        let mut xp = x0.to_vec();
        for i in 0..n {
            xp[i] = x0[i] + h;
            let p = eval_f64(func, &xp, contexts, bufs)[0];
            xp[i] = x0[i] - h;
            let q = eval_f64(func, &xp, contexts, bufs)[0];
            xp[i] = x0[i];
            g[i] = (p - q) / (2.0 * h);
        }
        g
    };

    match op {
        Op::Derivative => directional(&[1.0], h, &mut cache_bufs),
        Op::Gradient => fd_gradient(x, &mut cache_bufs),
        Op::Jacobian => {
            let cols = fd_jacobian(&mut cache_bufs);
            let mut flat = vec![0.0; m * n];
            for (i, col) in cols.iter().enumerate() {
                for (j, v) in col.iter().enumerate() {
                    flat[j * n + i] = *v;
                }
            }
            flat
        }
        Op::Pushforward => {
            let seeds = data.seeds.as_ref().expect("seeded scenario");
            seeds
                .directions()
                .iter()
                .flat_map(|v| directional(v, h, &mut cache_bufs))
                .collect()
        }
        Op::Pullback => {
            let cols = fd_jacobian(&mut cache_bufs);
            let seeds = data.seeds.as_ref().expect("seeded scenario");
            seeds
                .directions()
                .iter()
                .flat_map(|w| {
                    (0..n)
                        .map(|i| w.iter().zip(&cols[i]).map(|(a, b)| a * b).sum::<f64>())
                        .collect::<Vec<f64>>()
                })
                .collect()
        }
        Op::SecondDerivative => {
            let hh = f64::EPSILON.powf(0.25) * x[0].abs().max(1.0);
            let yp = eval_f64(func, &[x[0] + hh], contexts, &mut cache_bufs);
            let y0 = eval_f64(func, x, contexts, &mut cache_bufs);
            let ym = eval_f64(func, &[x[0] - hh], contexts, &mut cache_bufs);
            (0..m)
                .map(|j| (yp[j] - 2.0 * y0[j] + ym[j]) / (hh * hh))
                .collect()
        }
        Op::Hvp => {
            // differences of finite-difference gradients; coarser step
            let hh = 1e-4 * x.iter().fold(1.0f64, |mx, v| mx.max(v.abs()));
            let seeds = data.seeds.as_ref().expect("seeded scenario");
            let mut out = Vec::new();
            for v in seeds.directions() {
                let xp: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + hh * b).collect();
                let xm: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - hh * b).collect();
                let gp = fd_gradient(&xp, &mut cache_bufs);
                let gm = fd_gradient(&xm, &mut cache_bufs);
                out.extend(gp.iter().zip(&gm).map(|(p, q)| (p - q) / (2.0 * hh)));
            }
            out
        }
        Op::Hessian => {
            let hh = 1e-4 * x.iter().fold(1.0f64, |mx, v| mx.max(v.abs()));
            let mut flat = vec![0.0; n * n];
            let mut xp = x.to_vec();
            for j in 0..n {
                xp[j] = x[j] + hh;
                let gp = fd_gradient(&xp, &mut cache_bufs);
                xp[j] = x[j] - hh;
                let gm = fd_gradient(&xp, &mut cache_bufs);
                xp[j] = x[j];
                for i in 0..n {
                    flat[i * n + j] = (gp[i] - gm[i]) / (2.0 * hh);
                }
            }
            flat
        }
    }
}
