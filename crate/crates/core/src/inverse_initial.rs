//! Recovery of the initial state `γ = u(0, ·)` and the non-local datum `τ`
//! in `u(T, ·) = α u(0, ·) + τ` from the observation `u(ξ₀, ·) = ν`.
//!
//! Per mode, with `w_k(t) = e_q^{-tλ_k} ∫_0^t E_q^{qsλ_k} v(s) f_k(s) d_q s`,
//!
//! ```text
//! γ_k = A_k (ν_k - w_k(ξ₀)),            A_k = E_q^{ξ₀λ_k} = 1 / e_q^{-ξ₀λ_k}
//! τ_k = (e_q^{-Tλ_k} - α) γ_k + w_k(T)
//! ```
//!
//! `A_k` grows like `exp(c k²)`, so only the first `K_reg` modes are
//! recovered and any mode whose amplification exceeds the budget is refused.

use crate::error::{Error, Result};
use crate::forward::{mode_solution, SourceSpec};
use crate::qcore::{log_big_e_q_nonneg, QParams, ScalarFn};
use crate::spectral::{analyze, ModalSeries, Spectrum};

/// Default ceiling on `log10 A_k`.
pub const DEFAULT_LOG10_BUDGET: f64 = 12.0;

#[derive(Debug, Clone)]
pub struct InverseInitialProblem {
    src: SourceSpec,
    alpha: f64,
    xi0: f64,
    nu: ScalarFn,
    k_reg: usize,
    log10_budget: f64,
}

impl InverseInitialProblem {
    pub fn new(src: SourceSpec, alpha: f64, xi0: f64, nu: ScalarFn, k_reg: usize) -> Result<Self> {
        if !(alpha.abs() <= 1.0) {
            return Err(Error::InvalidParameter {
                key: "alpha",
                reason: format!("need |alpha| <= 1, got {alpha}"),
            });
        }
        let horizon = src.horizon();
        if !(xi0 > 0.0 && xi0 <= horizon) {
            return Err(Error::InvalidParameter {
                key: "xi0",
                reason: format!("need 0 < xi0 <= T = {horizon}, got {xi0}"),
            });
        }
        if k_reg == 0 {
            return Err(Error::InvalidParameter {
                key: "K_reg",
                reason: "must be at least 1".into(),
            });
        }
        if nu.domain().0 > 0.0 || !nu.contains(1.0) {
            return Err(Error::InvalidParameter {
                key: "nu",
                reason: "observation must be defined on [0, 1]".into(),
            });
        }
        Ok(Self {
            src,
            alpha,
            xi0,
            nu,
            k_reg,
            log10_budget: DEFAULT_LOG10_BUDGET,
        })
    }

    pub fn with_log10_budget(mut self, budget: f64) -> Self {
        self.log10_budget = budget;
        self
    }

    pub fn source(&self) -> &SourceSpec {
        &self.src
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn xi0(&self) -> f64 {
        self.xi0
    }

    pub fn nu(&self) -> &ScalarFn {
        &self.nu
    }

    pub fn k_reg(&self) -> usize {
        self.k_reg
    }

    pub fn log10_budget(&self) -> f64 {
        self.log10_budget
    }

    fn checked_k_reg(&self, spec: &Spectrum) -> Result<usize> {
        if self.k_reg > spec.len() {
            return Err(Error::InvalidParameter {
                key: "K_reg",
                reason: format!("{} exceeds the {} retained modes", self.k_reg, spec.len()),
            });
        }
        Ok(self.k_reg)
    }
}

/// `log10 E_q^{ξ₀λ_k}` for every retained mode.
pub fn log10_amplification(xi0: f64, spec: &Spectrum, ctx: &QParams) -> Vec<f64> {
    spec.lambdas()
        .iter()
        .map(|&lambda| log_big_e_q_nonneg(xi0 * lambda, ctx) / std::f64::consts::LN_10)
        .collect()
}

/// `γ`, `τ` and the amplification factors `A_k`, `k <= K_reg`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialReconstruction {
    gamma: ModalSeries,
    tau: ModalSeries,
    amplification: Vec<f64>,
}

impl InitialReconstruction {
    pub fn gamma(&self) -> &ModalSeries {
        &self.gamma
    }

    pub fn tau(&self) -> &ModalSeries {
        &self.tau
    }

    pub fn amplification(&self) -> &[f64] {
        &self.amplification
    }
}

/// Per-mode forced response `w_k(t)`, `k = 1..=n`.
fn forced(n: usize, t: f64, src: &SourceSpec, spec: &Spectrum, ctx: &QParams) -> Result<Vec<f64>> {
    (1..=n)
        .map(|k| mode_solution(k, t, 0.0, src, spec, ctx))
        .collect()
}

fn gamma_and_amplification(
    prob: &InverseInitialProblem,
    spec: &Spectrum,
    ctx: &QParams,
) -> Result<(ModalSeries, Vec<f64>)> {
    let k_reg = prob.checked_k_reg(spec)?;
    let logs = log10_amplification(prob.xi0, spec, ctx);
    if let Some(k) = (0..k_reg).find(|&k| logs[k] > prob.log10_budget) {
        return Err(Error::ModeUnrecoverable {
            k: k + 1,
            log10_amplification: logs[k],
            budget: prob.log10_budget,
        });
    }
    let nu = analyze(&prob.nu, spec)?;
    let w = forced(k_reg, prob.xi0, &prob.src, spec, ctx)?;
    let amplification: Vec<f64> = logs[..k_reg].iter().map(|l| 10f64.powf(*l)).collect();
    let mut gamma = vec![0.0; spec.len()];
    for k in 0..k_reg {
        gamma[k] = amplification[k] * (nu.coeffs()[k] - w[k]);
    }
    Ok((ModalSeries::new(gamma), amplification))
}

/// Modal coefficients of `γ`; modes above `K_reg` are zero.
pub fn reconstruct_gamma(
    prob: &InverseInitialProblem,
    spec: &Spectrum,
    ctx: &QParams,
) -> Result<ModalSeries> {
    gamma_and_amplification(prob, spec, ctx).map(|(g, _)| g)
}

/// Modal coefficients of `τ` given `γ`.
pub fn reconstruct_tau(
    prob: &InverseInitialProblem,
    gamma: &ModalSeries,
    spec: &Spectrum,
    ctx: &QParams,
) -> Result<ModalSeries> {
    let k_reg = prob.checked_k_reg(spec)?;
    if gamma.len() != spec.len() {
        return Err(Error::IndexOutOfRange {
            k: gamma.len(),
            len: spec.len(),
        });
    }
    let horizon = prob.src.horizon();
    let w = forced(k_reg, horizon, &prob.src, spec, ctx)?;
    let mut tau = vec![0.0; spec.len()];
    for k in 0..k_reg {
        let decay = (-log_big_e_q_nonneg(horizon * spec.lambdas()[k], ctx)).exp();
        tau[k] = (decay - prob.alpha) * gamma.coeffs()[k] + w[k];
    }
    Ok(ModalSeries::new(tau))
}

pub fn reconstruct(
    prob: &InverseInitialProblem,
    spec: &Spectrum,
    ctx: &QParams,
) -> Result<InitialReconstruction> {
    let (gamma, amplification) = gamma_and_amplification(prob, spec, ctx)?;
    let tau = reconstruct_tau(prob, &gamma, spec, ctx)?;
    Ok(InitialReconstruction {
        gamma,
        tau,
        amplification,
    })
}

/// Residual norms of both conditions over the first `K_reg` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    /// `‖u(T) - α γ - τ‖`.
    pub nonlocal_residual: f64,
    /// `‖u(ξ₀) - ν‖`.
    pub observation_residual: f64,
    /// `log10 A_k` for every retained mode, recovered or not.
    pub log10_amplification: Vec<f64>,
}

impl VerificationReport {
    pub fn amplification_increasing(&self) -> bool {
        self.log10_amplification.windows(2).all(|w| w[1] > w[0])
    }
}

pub fn verify_reconstruction(
    prob: &InverseInitialProblem,
    rec: &InitialReconstruction,
    spec: &Spectrum,
    ctx: &QParams,
) -> Result<VerificationReport> {
    let k_reg = prob.checked_k_reg(spec)?;
    let nu = analyze(&prob.nu, spec)?;
    let horizon = prob.src.horizon();
    let mut nonlocal = 0.0;
    let mut observed = 0.0;
    for k in 1..=k_reg {
        let g = rec.gamma.coeffs()[k - 1];
        let u_end = mode_solution(k, horizon, g, &prob.src, spec, ctx)?;
        let u_obs = mode_solution(k, prob.xi0, g, &prob.src, spec, ctx)?;
        nonlocal += (u_end - prob.alpha * g - rec.tau.coeffs()[k - 1]).powi(2);
        observed += (u_obs - nu.coeffs()[k - 1]).powi(2);
    }
    Ok(VerificationReport {
        nonlocal_residual: nonlocal.sqrt(),
        observation_residual: observed.sqrt(),
        log10_amplification: log10_amplification(prob.xi0, spec, ctx),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::small_e_q_neg;
    use crate::spectral::find_eigenvalues;
    use approx::assert_abs_diff_eq;

    fn setup(k: usize) -> (QParams, Spectrum) {
        let ctx = QParams::default();
        (ctx, find_eigenvalues(&ctx, k).unwrap())
    }

    #[test]
    fn single_mode_decay_is_inverted() {
        let (ctx, spec) = setup(4);
        let lam = spec.lambdas()[0];
        let xi0 = 0.5;
        let scale = small_e_q_neg(xi0 * lam, &ctx).unwrap();
        let phi1 = spec.basis_fn(1).unwrap();
        let nu = ScalarFn::on_unit(move |x| scale * phi1.call(x));
        let prob =
            InverseInitialProblem::new(SourceSpec::zero(1.0).unwrap(), 0.0, xi0, nu, 2).unwrap();
        let gamma = reconstruct_gamma(&prob, &spec, &ctx).unwrap();
        assert_abs_diff_eq!(gamma.coeffs()[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(gamma.coeffs()[1], 0.0, epsilon = 1e-8);
        assert_eq!(gamma.coeffs()[2], 0.0);
    }

    #[test]
    fn zero_data_gives_zero() {
        let (ctx, spec) = setup(3);
        let prob = InverseInitialProblem::new(
            SourceSpec::zero(1.0).unwrap(),
            0.3,
            1.0,
            ScalarFn::on_unit(|_| 0.0),
            2,
        )
        .unwrap();
        let rec = reconstruct(&prob, &spec, &ctx).unwrap();
        assert!(rec.gamma().coeffs().iter().all(|&c| c == 0.0));
        assert!(rec.tau().coeffs().iter().all(|&c| c == 0.0));
        let report = verify_reconstruction(&prob, &rec, &spec, &ctx).unwrap();
        assert_eq!(report.nonlocal_residual, 0.0);
        assert_eq!(report.observation_residual, 0.0);
    }

    #[test]
    fn tau_for_pure_decay_with_unit_alpha() {
        let (ctx, spec) = setup(3);
        let prob = InverseInitialProblem::new(
            SourceSpec::zero(1.0).unwrap(),
            1.0,
            1.0,
            ScalarFn::on_unit(|_| 0.0),
            1,
        )
        .unwrap();
        let gamma = ModalSeries::unit(3, 1);
        let tau = reconstruct_tau(&prob, &gamma, &spec, &ctx).unwrap();
        let want = small_e_q_neg(spec.lambdas()[0], &ctx).unwrap() - 1.0;
        assert_abs_diff_eq!(tau.coeffs()[0], want, epsilon = 1e-14);
        assert!(tau.coeffs()[0] < 0.0);
    }

    #[test]
    fn amplification_is_reciprocal_of_decay() {
        let (ctx, spec) = setup(6);
        for xi0 in [1.0, 0.5, 0.125] {
            let logs = log10_amplification(xi0, &spec, &ctx);
            for (k, l) in logs.iter().enumerate() {
                let decay = small_e_q_neg(xi0 * spec.lambdas()[k], &ctx).unwrap();
                if *l < 250.0 {
                    let product = decay * 10f64.powf(*l);
                    assert_abs_diff_eq!(product, 1.0, epsilon = 1e-12);
                }
            }
            assert!(logs.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn budget_rejects_deep_modes() {
        let (ctx, spec) = setup(6);
        let prob = InverseInitialProblem::new(
            SourceSpec::zero(1.0).unwrap(),
            0.0,
            1.0,
            ScalarFn::on_unit(|_| 0.0),
            4,
        )
        .unwrap();
        match reconstruct_gamma(&prob, &spec, &ctx).unwrap_err() {
            Error::ModeUnrecoverable {
                k,
                log10_amplification,
                ..
            } => {
                assert_eq!(k, 4);
                assert!(log10_amplification > 12.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        let relaxed = prob.clone().with_log10_budget(20.0);
        assert!(reconstruct_gamma(&relaxed, &spec, &ctx).is_ok());
    }

    #[test]
    fn constructor_validation() {
        let src = SourceSpec::zero(1.0).unwrap();
        let nu = ScalarFn::on_unit(|_| 0.0);
        assert!(InverseInitialProblem::new(src.clone(), 1.5, 1.0, nu.clone(), 1).is_err());
        assert!(InverseInitialProblem::new(src.clone(), 0.0, 0.0, nu.clone(), 1).is_err());
        assert!(InverseInitialProblem::new(src.clone(), 0.0, 1.5, nu.clone(), 1).is_err());
        assert!(InverseInitialProblem::new(src.clone(), 0.0, 1.0, nu.clone(), 0).is_err());
        let (ctx, spec) = setup(2);
        let prob = InverseInitialProblem::new(src, 0.0, 1.0, nu, 3).unwrap();
        assert!(reconstruct_gamma(&prob, &spec, &ctx).is_err());
    }
}
