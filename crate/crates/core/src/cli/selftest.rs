//! Identity checks run by `qheat selftest`.

use super::catalog::{lookup, run_forward, run_inverse_initial, run_inverse_source};
use super::{fmt_real, Command, Outcome, RunConfig, Table};
use crate::error::Result;
use crate::qcore::{
    apply_l, big_e_q, q_derivative, q_integral, q_integration_by_parts_residual, small_e_q,
    QParams, ScalarFn,
};
use crate::spectral::find_eigenvalues;

struct Check {
    name: String,
    residual: f64,
    tolerance: f64,
}

impl Check {
    fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
        }
    }

    fn passed(&self) -> bool {
        self.residual <= self.tolerance
    }
}

fn max_over(points: &[f64], mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &x in points {
        worst = worst.max(f(x)?.abs());
    }
    Ok(worst)
}

fn calculus_checks(ctx: &QParams) -> Result<Vec<Check>> {
    let tol = 10.0 * ctx.tail_tol();
    let q = ctx.q();
    let points = [0.9, 0.5, 0.3, 0.1];
    let f = ScalarFn::on_unit(|x| x * x + 1.0);
    let g = ScalarFn::on_unit(|x| x * x * x - 2.0 * x);
    let (f1, g1) = (f.clone(), g.clone());
    let fg = ScalarFn::on_unit(move |x| f1.call(x) * g1.call(x));

    let leibniz = max_over(&points, |x| {
        Ok(q_derivative(&fg, x, ctx)?
            - f.call(q * x) * q_derivative(&g, x, ctx)?
            - g.call(x) * q_derivative(&f, x, ctx)?)
    })?;
    let parts = q_integration_by_parts_residual(&f, &g, 0.0, 1.0, ctx)?;
    let duality = max_over(&[0.25, 0.5, 1.0], |x| {
        Ok(small_e_q(x, ctx)? * big_e_q(-x, ctx)? - 1.0)
    })?;
    let ctx_c = *ctx;
    let e = ScalarFn::new(0.0, 1.0, move |x| small_e_q(x, &ctx_c).unwrap_or(f64::NAN))?;
    let derivative = max_over(&[0.25, 0.5, 1.0], |x| {
        Ok((q_derivative(&e, x, ctx)? - e.call(x)) / e.call(x))
    })?;
    let g2 = g.clone();
    let dg = ScalarFn::on_unit(move |x| {
        if x == 0.0 {
            -2.0
        } else {
            (g2.call(x) - g2.call(q * x)) / (x * (1.0 - q))
        }
    });
    let fundamental = max_over(&points, |x| {
        Ok(q_integral(&dg, 0.0, x, ctx)? - g.call(x) + g.call(0.0))
    })?;
    Ok(vec![
        Check::new("q-leibniz", leibniz, tol),
        Check::new("integration-by-parts", parts.abs(), tol),
        Check::new("exponential-duality", duality, tol),
        Check::new("exponential-derivative", derivative, tol),
        Check::new("fundamental-theorem", fundamental, tol),
    ])
}

fn spectral_checks(config: &RunConfig, ctx: &QParams) -> Result<Vec<Check>> {
    let spec = find_eigenvalues(ctx, config.k)?;
    let mut checks = Vec::new();
    let mut characteristic: f64 = 0.0;
    for k in 1..=spec.len() {
        characteristic = characteristic.max(spec.characteristic_residual(k)?.abs());
    }
    checks.push(Check::new("characteristic-residual", characteristic, 1e-10));
    let gram = spec.gram(spec.len());
    let mut gram_err: f64 = 0.0;
    for (i, row) in gram.iter().enumerate() {
        for (j, g) in row.iter().enumerate() {
            gram_err = gram_err.max((g - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    checks.push(Check::new("gram-identity", gram_err, 1e-8));
    let q = ctx.q();
    let mut relation: f64 = 0.0;
    for k in 1..=spec.len().min(3) {
        let phi = spec.basis_fn(k)?;
        let lambda = spec.lambdas()[k - 1];
        let scale = (1..=10)
            .map(|m| phi.call(q.powi(m)).abs())
            .fold(0.0, f64::max)
            * lambda;
        for m in 1..=10 {
            let x = q.powi(m);
            relation = relation.max((apply_l(&phi, x, ctx)? - lambda * phi.call(x)).abs() / scale);
        }
    }
    checks.push(Check::new("eigen-relation", relation, 1e-6));
    Ok(checks)
}

fn scenario_check(
    name: &str,
    command: Command,
    scenario: &str,
    tolerance: f64,
    config: &RunConfig,
    ctx: &QParams,
) -> Result<Check> {
    let s = lookup(command, scenario).expect("built-in scenario");
    let mut sub = config.clone();
    sub.command = Some(command);
    sub.noise = None;
    sub.xi0 = None;
    sub.alpha = 0.0;
    sub.k_reg = 2.min(config.k);
    let outcome = match command {
        Command::Forward => run_forward(s, &sub, ctx)?,
        Command::InverseSource => run_inverse_source(s, &sub, ctx)?,
        _ => run_inverse_initial(s, &sub, ctx)?,
    };
    Ok(Check::new(name, outcome.max_err, tolerance))
}

pub(super) fn run(config: &RunConfig, ctx: &QParams) -> Result<Outcome> {
    let mut checks = calculus_checks(ctx)?;
    checks.extend(spectral_checks(config, ctx)?);
    checks.push(scenario_check(
        "forward-mms",
        Command::Forward,
        "mms",
        1e-8,
        config,
        ctx,
    )?);
    checks.push(scenario_check(
        "inverse-source-round-trip",
        Command::InverseSource,
        "affine-v",
        1e-6,
        config,
        ctx,
    )?);
    checks.push(scenario_check(
        "inverse-initial-round-trip",
        Command::InverseInitial,
        "two-mode",
        1e-6,
        config,
        ctx,
    )?);

    let mut table = Table::new(vec!["check", "residual", "tolerance", "passed"]);
    for c in &checks {
        table.push(vec![
            c.name.clone(),
            fmt_real(c.residual),
            fmt_real(c.tolerance),
            c.passed().to_string(),
        ]);
    }
    let passed = checks.iter().filter(|c| c.passed()).count();
    let max_err = checks.iter().map(|c| c.residual).fold(0.0, f64::max);
    Ok(Outcome {
        command: Command::SelfTest,
        table,
        max_err,
        checks: Some((passed, checks.len())),
    })
}
