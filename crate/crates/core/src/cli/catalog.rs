//! Built-in scenarios. Each one fixes the data of a run and, where the answer
//! is known, the reference it is measured against.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fmt_real, Command, Outcome, RunConfig, Table};
use crate::error::Result;
use crate::forward::{
    mode_solution, pde_residual, solve_forward, solve_forward_with_depth, SourceSpec, SpaceTimeFn,
};
use crate::inverse_initial::{log10_amplification, reconstruct, InverseInitialProblem};
use crate::inverse_source::{solve_volterra, InverseSourceProblem};
use crate::qcore::{q_number, small_e_q_neg, QLattice, QParams, ScalarFn};
use crate::spectral::{find_eigenvalues, ModalSeries, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scenario {
    pub command: Command,
    pub name: &'static str,
    pub description: &'static str,
}

const fn scenario(command: Command, name: &'static str, description: &'static str) -> Scenario {
    Scenario {
        command,
        name,
        description,
    }
}

const CATALOG: [Scenario; 11] = [
    scenario(
        Command::SelfTest,
        "default",
        "identity checks of every module",
    ),
    scenario(
        Command::Forward,
        "decay",
        "phi = first eigenfunction, no source",
    ),
    scenario(
        Command::Forward,
        "mms",
        "manufactured solution (1 + t^2) times the first eigenfunction",
    ),
    scenario(
        Command::Forward,
        "mixed",
        "phi = x(1 - x), f = first + second eigenfunction, v = 1 + t/2",
    ),
    scenario(
        Command::InverseSource,
        "constant-v",
        "v = 1, f = 1 + first eigenfunction",
    ),
    scenario(
        Command::InverseSource,
        "affine-v",
        "v = 1 + t/2, f = 1 + first eigenfunction",
    ),
    scenario(
        Command::InverseSource,
        "eq-v",
        "v = e_q^{-t}, f = 1 + first eigenfunction",
    ),
    scenario(
        Command::InverseSource,
        "zero-mean",
        "f = x - 1/[2]_q, violates the mean bound",
    ),
    scenario(
        Command::InverseInitial,
        "two-mode",
        "gamma = phi_1 + 0.1 phi_2, v = 1, f = phi_1",
    ),
    scenario(Command::InverseInitial, "decay", "gamma = phi_1, no source"),
    scenario(
        Command::InverseInitial,
        "smooth",
        "gamma = x(1 - x), v = 1 + t/2, f = 1",
    ),
];

/// Scenarios available to `command`.
pub fn scenarios(command: Command) -> Vec<Scenario> {
    CATALOG
        .iter()
        .copied()
        .filter(|s| s.command == command)
        .collect()
}

pub(super) fn lookup(command: Command, name: &str) -> Option<Scenario> {
    CATALOG
        .iter()
        .copied()
        .find(|s| s.command == command && s.name == name)
}

pub(super) fn default_scenario(command: Command) -> &'static str {
    match command {
        Command::SelfTest => "default",
        Command::Forward => "mms",
        Command::InverseSource => "affine-v",
        Command::InverseInitial => "two-mode",
    }
}

/// Multiplies each value by `1 + noise·U(-1, 1)`.
fn perturb(values: &mut [f64], config: &RunConfig) {
    let Some(noise) = config.noise.filter(|&n| n > 0.0) else {
        return;
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for v in values {
        *v *= 1.0 + noise * rng.gen_range(-1.0..=1.0);
    }
}

fn time_fn(horizon: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<ScalarFn> {
    ScalarFn::new(0.0, horizon, f)
}

/// First `len` entries of `coeffs`, zero padded.
fn series(coeffs: &[f64], len: usize) -> ModalSeries {
    let mut c = coeffs.to_vec();
    c.resize(len, 0.0);
    ModalSeries::new(c)
}

fn modal_value(m: &ModalSeries, spec: &Spectrum, index: usize) -> f64 {
    m.coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| c * spec.basis_samples(k + 1)[index])
        .sum()
}

pub(super) fn run_forward(
    scenario: Scenario,
    config: &RunConfig,
    ctx: &QParams,
) -> Result<Outcome> {
    let spec = find_eigenvalues(ctx, config.k)?;
    let horizon = config.horizon;
    let phi1 = spec.basis_fn(1)?;
    let lambda1 = spec.lambdas()[0];
    let ctx_c = *ctx;
    type Exact = Box<dyn Fn(f64, usize) -> f64>;
    let (phi, src, exact): (ScalarFn, SourceSpec, Option<Exact>) = match scenario.name {
        "decay" => {
            let samples = spec.basis_samples(1).to_vec();
            let exact: Exact = Box::new(move |t, m| {
                small_e_q_neg(t * lambda1, &ctx_c).unwrap_or(f64::NAN) * samples[m]
            });
            (phi1, SourceSpec::zero(horizon)?, Some(exact))
        }
        "mms" => {
            let bracket2 = q_number(2.0, ctx);
            let shape = phi1.clone();
            let v = time_fn(horizon, move |t| bracket2 * t + lambda1 * (1.0 + t * t))?;
            let samples = spec.basis_samples(1).to_vec();
            let exact: Exact = Box::new(move |t, m| (1.0 + t * t) * samples[m]);
            let src = SourceSpec::new(move |_, x| shape.call(x), v, horizon)?;
            (phi1, src, Some(exact))
        }
        _ => {
            let phi2 = spec.basis_fn(2.min(spec.len()))?;
            let shape = phi1.clone();
            let v = time_fn(horizon, |t| 1.0 + t / 2.0)?;
            let src = SourceSpec::new(move |_, x| shape.call(x) + phi2.call(x), v, horizon)?;
            (ScalarFn::on_unit(|x| x * (1.0 - x)), src, None)
        }
    };
    let bundle = solve_forward(&phi, &src, &spec, ctx)?;
    let space = spec.space_lattice();
    let times = bundle.time_lattice();
    let mut table = Table::new(vec!["t", "x", "u"]);
    let mut max_err: f64 = 0.0;
    for (j, &t) in times.points().iter().enumerate() {
        for (m, &x) in space.points().iter().enumerate() {
            let u = modal_value(bundle.modal_u(j), &spec, m);
            if let Some(exact) = &exact {
                max_err = max_err.max((u - exact(t, m)).abs());
            }
            table.push(vec![fmt_real(t), fmt_real(x), fmt_real(u)]);
        }
    }
    if exact.is_none() {
        for &t in times.points().iter().take(times.depth().min(20)) {
            for &x in space.points().iter().skip(1).take(10) {
                max_err = max_err.max(pde_residual(&bundle, &src, t, x, &spec, ctx)?.abs());
            }
        }
    }
    Ok(Outcome {
        command: Command::Forward,
        table,
        max_err,
        checks: None,
    })
}

pub(super) fn run_inverse_source(
    scenario: Scenario,
    config: &RunConfig,
    ctx: &QParams,
) -> Result<Outcome> {
    let spec = find_eigenvalues(ctx, config.k)?;
    let horizon = config.horizon;
    let phi1 = spec.basis_fn(1)?;
    let ctx_c = *ctx;
    let truth = match scenario.name {
        "affine-v" => time_fn(horizon, |t| 1.0 + t / 2.0)?,
        "eq-v" => time_fn(horizon, move |t| {
            small_e_q_neg(t, &ctx_c).unwrap_or(f64::NAN)
        })?,
        _ => ScalarFn::constant(0.0, horizon, 1.0)?,
    };
    let f: SpaceTimeFn = if scenario.name == "zero-mean" {
        let center = 1.0 / q_number(2.0, ctx);
        Arc::new(move |_, x| x - center)
    } else {
        let shape = phi1.clone();
        Arc::new(move |_, x| 1.0 + shape.call(x))
    };
    let src = SourceSpec::from_shared(f.clone(), truth.clone(), horizon)?;
    let depth = QLattice::new(horizon, ctx)?.depth();
    let bundle = solve_forward_with_depth(&phi1, &src, &spec, ctx, depth + 1)?;
    let mut mass = bundle.mass().to_vec();
    perturb(&mut mass, config);
    let psi = ScalarFn::from_lattice_samples(bundle.time_lattice(), mass)?;
    let prob = InverseSourceProblem::new(phi1, f, psi, horizon, config.m1, ctx)?;
    let rec = solve_volterra(&prob, &spec, ctx)?;

    let mut table = Table::new(vec!["t", "v_true", "v_rec", "abs_err"]);
    let mut max_err: f64 = 0.0;
    for (&t, &v) in rec.times().iter().zip(rec.values()) {
        let want = truth.call(t);
        let err = (v - want).abs();
        max_err = max_err.max(err);
        table.push(vec![
            fmt_real(t),
            fmt_real(want),
            fmt_real(v),
            fmt_real(err),
        ]);
    }
    Ok(Outcome {
        command: Command::InverseSource,
        table,
        max_err,
        checks: None,
    })
}

pub(super) fn run_inverse_initial(
    scenario: Scenario,
    config: &RunConfig,
    ctx: &QParams,
) -> Result<Outcome> {
    let spec = find_eigenvalues(ctx, config.k)?;
    let horizon = config.horizon;
    let n = spec.len();
    let (truth, src) = match scenario.name {
        "decay" => (series(&[1.0], n), SourceSpec::zero(horizon)?),
        "smooth" => {
            let gamma = crate::spectral::analyze(&ScalarFn::on_unit(|x| x * (1.0 - x)), &spec)?;
            let v = time_fn(horizon, |t| 1.0 + t / 2.0)?;
            (gamma, SourceSpec::new(|_, _| 1.0, v, horizon)?)
        }
        _ => {
            let phi1 = spec.basis_fn(1)?;
            let v = ScalarFn::constant(0.0, horizon, 1.0)?;
            (
                series(&[1.0, 0.1], n),
                SourceSpec::new(move |_, x| phi1.call(x), v, horizon)?,
            )
        }
    };
    let xi0 = config.xi0();
    let mut nu: Vec<f64> = (1..=n)
        .map(|k| mode_solution(k, xi0, truth.coeffs()[k - 1], &src, &spec, ctx))
        .collect::<Result<_>>()?;
    perturb(&mut nu, config);
    let nu = spec.synthesis_fn(&ModalSeries::new(nu));
    let prob = InverseInitialProblem::new(src, config.alpha, xi0, nu, config.k_reg)?;
    let rec = reconstruct(&prob, &spec, ctx)?;

    let logs = log10_amplification(xi0, &spec, ctx);
    let mut table = Table::new(vec!["k", "lambda_k", "gamma_k", "tau_k", "amplification_k"]);
    for (k, log) in logs.iter().enumerate().take(n) {
        table.push(vec![
            (k + 1).to_string(),
            fmt_real(spec.lambdas()[k]),
            fmt_real(rec.gamma().coeffs()[k]),
            fmt_real(rec.tau().coeffs()[k]),
            fmt_real(10f64.powf(*log)),
        ]);
    }
    let max_err = (0..config.k_reg)
        .map(|k| (rec.gamma().coeffs()[k] - truth.coeffs()[k]).abs())
        .fold(0.0, f64::max);
    Ok(Outcome {
        command: Command::InverseInitial,
        table,
        max_err,
        checks: None,
    })
}
