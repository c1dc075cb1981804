//! Recovery of the time factor `v(t)` of the source from the mass
//! `ψ(t) = ∫_0^1 u(t, x) d_q x`.
//!
//! Integrating the equation over `[0, 1]` and substituting the modal solution
//! gives a Volterra equation of the second kind,
//!
//! ```text
//! v(t) = ψ̂(t) - ∫_0^t v(s) K(t, s) d_q s
//! ψ̂(t)   = ( D_q ψ(t) + Σ_k e_q^{-tλ_k} φ_k λ_k I_k ) / m(t)
//! K(t, s) = -Σ_k e_q^{-tλ_k} E_q^{qsλ_k} λ_k I_k f_k(s) / m(t)
//! ```
//!
//! with `I_k = ∫ φ̃_k d_q x` and `m(t)` the q-mean of `f(t, ·)`. On the time
//! lattice the Jackson integral at `t = T q^j` only touches `T q^{j+m}`, so
//! the equation is lower triangular and is solved exactly from the deepest
//! point upwards.
//!
//! `D_q ψ(t)` loses about `ε / t` to cancellation, so the lattice stops near
//! `t = √ε T` by default, and the part of the integral below the deepest
//! point is closed with the kernel and `v` frozen at that point.

use crate::error::{Error, Result};
use crate::forward::SpaceTimeFn;
use crate::qcore::{log_big_e_q_nonneg, q_derivative, q_integral, QLattice, QParams, ScalarFn};
use crate::spectral::{analyze, Spectrum};

/// Pivots below this magnitude make the triangular solve meaningless.
const PIVOT_FLOOR: f64 = 1e-12;

/// Default depth of the time lattice used by the inverse solver: the shallower
/// of the forward depth and the point where `T q^M` reaches `√ε T`.
pub fn default_inverse_depth(ctx: &QParams) -> usize {
    let balanced = (f64::EPSILON.sqrt().ln() / ctx.q().ln()).ceil() as usize;
    let forward = (ctx.tail_tol().ln() / ctx.q().ln()).ceil() as usize;
    balanced.min(forward).min(ctx.m_max()).max(1)
}

/// Which q-mean of `f(t, ·)` divides the mass balance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanMode {
    /// `Σ_k f_k(t) I_k`, the mean of the projection onto the retained modes.
    /// This is the mean a `K`-mode forward solution actually carries.
    #[default]
    Projected,
    /// `∫_0^1 f(t, x) d_q x` as a Jackson integral.
    Exact,
}

#[derive(Clone)]
pub struct InverseSourceProblem {
    phi: ScalarFn,
    f: SpaceTimeFn,
    psi: ScalarFn,
    horizon: f64,
    m1: f64,
    mean: MeanMode,
    depth: Option<usize>,
}

impl std::fmt::Debug for InverseSourceProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InverseSourceProblem")
            .field("horizon", &self.horizon)
            .field("m1", &self.m1)
            .field("mean", &self.mean)
            .finish()
    }
}

impl InverseSourceProblem {
    /// Validates domains and the bound `|∫ f(t, ·) d_q x|^{-1} <= m1` on the
    /// time lattice.
    pub fn new(
        phi: ScalarFn,
        f: SpaceTimeFn,
        psi: ScalarFn,
        horizon: f64,
        m1: f64,
        ctx: &QParams,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter {
                key: "T",
                reason: format!("horizon must be positive, got {horizon}"),
            });
        }
        if !(m1 > 0.0) {
            return Err(Error::InvalidParameter {
                key: "M1",
                reason: format!("must be positive, got {m1}"),
            });
        }
        if phi.domain().0 > 0.0 || !phi.contains(1.0) {
            return Err(Error::InvalidParameter {
                key: "phi",
                reason: "initial data must be defined on [0, 1]".into(),
            });
        }
        if psi.domain().0 > 0.0 || !psi.contains(horizon) {
            return Err(Error::InvalidParameter {
                key: "psi",
                reason: format!("mass data must be defined on [0, {horizon}]"),
            });
        }
        let prob = Self {
            phi,
            f,
            psi,
            horizon,
            m1,
            mean: MeanMode::default(),
            depth: None,
        };
        check_hypothesis(&prob, ctx)?;
        Ok(prob)
    }

    pub fn with_mean_mode(mut self, mean: MeanMode) -> Self {
        self.mean = mean;
        self
    }

    /// Overrides the depth of the inverse time lattice.
    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = Some(depth);
        self
    }

    pub fn mean_mode(&self) -> MeanMode {
        self.mean
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    /// `{T q^j : j = 0..=M}` on which `v` is reconstructed.
    pub fn time_lattice(&self, ctx: &QParams) -> Result<QLattice> {
        let depth = self.depth.unwrap_or_else(|| default_inverse_depth(ctx));
        QLattice::with_depth(self.horizon, ctx.q(), depth)
    }

    fn exact_mean(&self, t: f64, ctx: &QParams) -> Result<f64> {
        let f = self.f.clone();
        q_integral(&ScalarFn::on_unit(move |x| f(t, x)), 0.0, 1.0, ctx)
    }

    fn projected_mean(&self, t: f64, spec: &Spectrum) -> f64 {
        let samples: Vec<f64> = spec
            .space_lattice()
            .points()
            .iter()
            .map(|&x| (self.f)(t, x))
            .collect();
        spec.analyze_samples(&samples)
            .coeffs()
            .iter()
            .zip(spec.phi_integrals())
            .map(|(c, i)| c * i)
            .sum()
    }

    /// The denominator `m(t)` in use, checked against `m1`.
    pub fn mean_at(&self, t: f64, spec: &Spectrum, ctx: &QParams) -> Result<f64> {
        let mean = match self.mean {
            MeanMode::Exact => self.exact_mean(t, ctx)?,
            MeanMode::Projected => self.projected_mean(t, spec),
        };
        let inverse = 1.0 / mean.abs();
        if !(inverse <= self.m1) {
            return Err(Error::HypothesisViolated {
                t,
                inverse_mean: inverse,
                m1: self.m1,
            });
        }
        Ok(mean)
    }
}

/// Largest `|∫_0^1 f(t, x) d_q x|^{-1}` over the time lattice; fails if it
/// exceeds `M1`.
pub fn check_hypothesis(prob: &InverseSourceProblem, ctx: &QParams) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in prob.time_lattice(ctx)?.points() {
        let inverse = 1.0 / prob.exact_mean(t, ctx)?.abs();
        if !(inverse <= prob.m1) {
            return Err(Error::HypothesisViolated {
                t,
                inverse_mean: inverse,
                m1: prob.m1,
            });
        }
        worst = worst.max(inverse);
    }
    Ok(worst)
}

/// `ψ̂(t)` for `t > 0`.
pub fn psi_hat(prob: &InverseSourceProblem, t: f64, spec: &Spectrum, ctx: &QParams) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter {
            key: "t",
            reason: format!("psi_hat needs t > 0, got {t}"),
        });
    }
    let mean = prob.mean_at(t, spec, ctx)?;
    let d_psi = q_derivative(&prob.psi, t, ctx)?;
    let phi = analyze(&prob.phi, spec)?;
    let decay: f64 = (0..spec.len())
        .map(|k| {
            let lambda = spec.lambdas()[k];
            (-log_big_e_q_nonneg(t * lambda, ctx)).exp()
                * phi.coeffs()[k]
                * lambda
                * spec.phi_integrals()[k]
        })
        .sum();
    Ok((d_psi + decay) / mean)
}

/// `K(t, s)` for `0 < s <= t <= T`.
pub fn kernel_k(
    prob: &InverseSourceProblem,
    t: f64,
    s: f64,
    spec: &Spectrum,
    ctx: &QParams,
) -> Result<f64> {
    if !(s > 0.0 && s <= t && t <= prob.horizon * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter {
            key: "s",
            reason: format!("kernel needs 0 < s <= t <= T, got s={s}, t={t}"),
        });
    }
    let mean = prob.mean_at(t, spec, ctx)?;
    let samples: Vec<f64> = spec
        .space_lattice()
        .points()
        .iter()
        .map(|&x| (prob.f)(s, x))
        .collect();
    let fk = spec.analyze_samples(&samples);
    let q = ctx.q();
    let sum: f64 = (0..spec.len())
        .map(|k| {
            let lambda = spec.lambdas()[k];
            let ratio = (log_big_e_q_nonneg(q * s * lambda, ctx)
                - log_big_e_q_nonneg(t * lambda, ctx))
            .exp();
            ratio * lambda * spec.phi_integrals()[k] * fk.coeffs()[k]
        })
        .sum();
    Ok(-sum / mean)
}

/// `v` on the time lattice with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedSource {
    times: Vec<f64>,
    values: Vec<f64>,
    residuals: Vec<f64>,
    iteration_diffs: Vec<f64>,
    psi_hat_tail: f64,
    kernel_tail: f64,
}

impl ReconstructedSource {
    /// Lattice times `T q^j`, largest first.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `|v - ψ̂ + ∫ v K|` at each lattice point.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Largest residual scaled by `1 + |v|`.
    pub fn max_scaled_residual(&self) -> f64 {
        self.residuals
            .iter()
            .zip(&self.values)
            .map(|(r, v)| r / (1.0 + v.abs()))
            .fold(0.0, f64::max)
    }

    /// Successive sup-differences of a Picard run; empty for the direct solve.
    pub fn iteration_diffs(&self) -> &[f64] {
        &self.iteration_diffs
    }

    /// Largest magnitude of the last retained modal term in `ψ̂`.
    pub fn psi_hat_tail(&self) -> f64 {
        self.psi_hat_tail
    }

    /// Largest magnitude of the last retained modal term in `K`.
    pub fn kernel_tail(&self) -> f64 {
        self.kernel_tail
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `ψ̂` and `K` sampled on the time lattice.
struct VolterraSystem {
    lattice: QLattice,
    psi_hat: Vec<f64>,
    /// `kernel[j][m] = K(t_j, t_{j+m})` for `j + m <= M`.
    kernel: Vec<Vec<f64>>,
    psi_hat_tail: f64,
    kernel_tail: f64,
}

impl VolterraSystem {
    fn build(prob: &InverseSourceProblem, spec: &Spectrum, ctx: &QParams) -> Result<Self> {
        let lattice = prob.time_lattice(ctx)?;
        let depth = lattice.depth();
        let q = ctx.q();
        let n_modes = spec.len();
        let last = n_modes - 1;
        let phi = analyze(&prob.phi, spec)?;

        let mut means = Vec::with_capacity(depth + 1);
        let mut shape = Vec::with_capacity(depth + 1);
        for &t in lattice.points() {
            means.push(prob.mean_at(t, spec, ctx)?);
            let samples: Vec<f64> = spec
                .space_lattice()
                .points()
                .iter()
                .map(|&x| (prob.f)(t, x))
                .collect();
            shape.push(spec.analyze_samples(&samples));
        }
        // ln E_q^{t_i λ_k}, i = 0..=depth+1
        let log_e: Vec<Vec<f64>> = spec
            .lambdas()
            .iter()
            .map(|&lambda| {
                (0..=depth + 1)
                    .map(|i| log_big_e_q_nonneg(prob.horizon * q.powi(i as i32) * lambda, ctx))
                    .collect()
            })
            .collect();
        let weight = |k: usize| spec.lambdas()[k] * spec.phi_integrals()[k];

        let mut psi_hat = Vec::with_capacity(depth + 1);
        let mut psi_hat_tail: f64 = 0.0;
        for (j, &t) in lattice.points().iter().enumerate() {
            let d_psi = q_derivative(&prob.psi, t, ctx)?;
            let terms: Vec<f64> = (0..n_modes)
                .map(|k| (-log_e[k][j]).exp() * phi.coeffs()[k] * weight(k))
                .collect();
            psi_hat.push((d_psi + terms.iter().sum::<f64>()) / means[j]);
            psi_hat_tail = psi_hat_tail.max((terms[last] / means[j]).abs());
        }

        let mut kernel = Vec::with_capacity(depth + 1);
        let mut kernel_tail: f64 = 0.0;
        for j in 0..=depth {
            let row: Vec<f64> = (j..=depth)
                .map(|i| {
                    let mut sum = 0.0;
                    for (k, log_k) in log_e.iter().enumerate().take(n_modes) {
                        let term =
                            (log_k[i + 1] - log_k[j]).exp() * weight(k) * shape[i].coeffs()[k];
                        if k == last {
                            kernel_tail = kernel_tail.max((term / means[j]).abs());
                        }
                        sum += term;
                    }
                    -sum / means[j]
                })
                .collect();
            kernel.push(row);
        }
        Ok(Self {
            lattice,
            psi_hat,
            kernel,
            psi_hat_tail,
            kernel_tail,
        })
    }

    /// Weight of `t_i` in the closed Jackson sum: the deepest point also
    /// carries the tail `Σ_{i>M} (1-q) t_i = q t_M`.
    fn weight(&self, i: usize) -> f64 {
        let depth = self.lattice.depth();
        let w = self.lattice.weight(i);
        if i == depth {
            w + self.lattice.q() * self.lattice.point(i)
        } else {
            w
        }
    }

    /// `∫_0^{t_j} v(s) K(t_j, s) d_q s` over the lattice, optionally
    /// without the diagonal term.
    fn integral(&self, j: usize, v: &[f64], skip_diagonal: bool) -> f64 {
        let start = usize::from(skip_diagonal);
        self.kernel[j]
            .iter()
            .enumerate()
            .skip(start)
            .map(|(m, k)| self.weight(j + m) * k * v[j + m])
            .sum()
    }

    fn residuals(&self, v: &[f64]) -> Vec<f64> {
        (0..v.len())
            .map(|j| (v[j] - self.psi_hat[j] + self.integral(j, v, false)).abs())
            .collect()
    }

    fn finish(&self, values: Vec<f64>, iteration_diffs: Vec<f64>) -> ReconstructedSource {
        ReconstructedSource {
            times: self.lattice.points().to_vec(),
            residuals: self.residuals(&values),
            values,
            iteration_diffs,
            psi_hat_tail: self.psi_hat_tail,
            kernel_tail: self.kernel_tail,
        }
    }
}

/// Exact triangular solve of the lattice Volterra equation.
pub fn solve_volterra(
    prob: &InverseSourceProblem,
    spec: &Spectrum,
    ctx: &QParams,
) -> Result<ReconstructedSource> {
    let sys = VolterraSystem::build(prob, spec, ctx)?;
    let depth = sys.lattice.depth();
    let mut v = vec![0.0; depth + 1];
    for j in (0..=depth).rev() {
        let rhs = sys.psi_hat[j] - sys.integral(j, &v, true);
        let pivot = 1.0 + sys.weight(j) * sys.kernel[j][0];
        if pivot.abs() < PIVOT_FLOOR {
            return Err(Error::DegenerateDiagonal {
                t: sys.lattice.point(j),
                pivot,
            });
        }
        v[j] = rhs / pivot;
    }
    Ok(sys.finish(v, Vec::new()))
}

/// Successive substitution `v ← ψ̂ - ∫ v K`, starting from `ψ̂`.
///
/// Stops after `n_iter` sweeps or once the sup-difference falls below
/// `1e-14 (1 + sup|v|)`. Five consecutive growing differences that also
/// exceed the first difference are reported as divergence.
pub fn picard_iterate(
    prob: &InverseSourceProblem,
    spec: &Spectrum,
    ctx: &QParams,
    n_iter: usize,
) -> Result<ReconstructedSource> {
    if n_iter == 0 {
        return Err(Error::InvalidParameter {
            key: "n_iter",
            reason: "need at least one iteration".into(),
        });
    }
    let sys = VolterraSystem::build(prob, spec, ctx)?;
    let mut v = sys.psi_hat.clone();
    let mut diffs: Vec<f64> = Vec::new();
    let mut growing = 0;
    for n in 1..=n_iter {
        let next: Vec<f64> = (0..v.len())
            .map(|j| sys.psi_hat[j] - sys.integral(j, &v, false))
            .collect();
        let diff = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = next.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if diffs.last().is_some_and(|&prev| diff > prev) {
            growing += 1;
        } else {
            growing = 0;
        }
        diffs.push(diff);
        v = next;
        if !diff.is_finite() || (growing >= 5 && diff > diffs[0]) {
            return Err(Error::PicardDiverging {
                iterations: n,
                diff,
            });
        }
        if diff <= 1e-14 * (1.0 + scale) {
            break;
        }
    }
    Ok(sys.finish(v, diffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{solve_forward_with_depth, SourceSpec};
    use crate::qcore::small_e_q_neg;
    use crate::spectral::find_eigenvalues;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn setup(k: usize) -> (QParams, Spectrum) {
        let ctx = QParams::default();
        (ctx, find_eigenvalues(&ctx, k).unwrap())
    }

    fn zero_psi() -> ScalarFn {
        ScalarFn::constant(0.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn hypothesis_examples() {
        let (ctx, spec) = setup(3);
        let one: SpaceTimeFn = Arc::new(|_, _| 1.0);
        let prob =
            InverseSourceProblem::new(ScalarFn::on_unit(|_| 0.0), one, zero_psi(), 1.0, 10.0, &ctx)
                .unwrap();
        assert_abs_diff_eq!(check_hypothesis(&prob, &ctx).unwrap(), 1.0, epsilon = 1e-13);

        let phi1 = spec.basis_fn(1).unwrap();
        let f: SpaceTimeFn = Arc::new(move |_, x| phi1.call(x));
        let prob =
            InverseSourceProblem::new(ScalarFn::on_unit(|_| 0.0), f, zero_psi(), 1.0, 10.0, &ctx)
                .unwrap();
        let bound = check_hypothesis(&prob, &ctx).unwrap();
        assert_abs_diff_eq!(bound, 1.0 / spec.phi_integrals()[0], epsilon = 1e-10);

        let bracket2 = 1.5;
        let zero_mean: SpaceTimeFn = Arc::new(move |_, x| x - 1.0 / bracket2);
        let err = InverseSourceProblem::new(
            ScalarFn::on_unit(|_| 0.0),
            zero_mean,
            zero_psi(),
            1.0,
            1e6,
            &ctx,
        )
        .unwrap_err();
        assert!(matches!(err, Error::HypothesisViolated { .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn psi_hat_vanishes_without_data() {
        let (ctx, spec) = setup(3);
        let one: SpaceTimeFn = Arc::new(|_, _| 1.0);
        let prob = InverseSourceProblem::new(
            ScalarFn::on_unit(|_| 0.0),
            one,
            ScalarFn::constant(0.0, 1.0, 4.0).unwrap(),
            1.0,
            10.0,
            &ctx,
        )
        .unwrap();
        assert_eq!(psi_hat(&prob, 0.5, &spec, &ctx).unwrap(), 0.0);
        assert!(psi_hat(&prob, 0.0, &spec, &ctx).is_err());
    }

    #[test]
    fn psi_hat_single_mode_closed_form() {
        let (ctx, spec) = setup(4);
        let one: SpaceTimeFn = Arc::new(|_, _| 1.0);
        let prob =
            InverseSourceProblem::new(spec.basis_fn(1).unwrap(), one, zero_psi(), 1.0, 10.0, &ctx)
                .unwrap()
                .with_mean_mode(MeanMode::Exact);
        let lam = spec.lambdas()[0];
        let int1 = spec.phi_integrals()[0];
        for t in [1.0, 0.25, 0.0625] {
            let want = small_e_q_neg(t * lam, &ctx).unwrap() * lam * int1;
            assert_abs_diff_eq!(
                psi_hat(&prob, t, &spec, &ctx).unwrap(),
                want,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn kernel_examples() {
        let (ctx, spec) = setup(3);
        let phi1 = spec.basis_fn(1).unwrap();
        let f: SpaceTimeFn = Arc::new(move |_, x| phi1.call(x));
        let prob =
            InverseSourceProblem::new(ScalarFn::on_unit(|_| 0.0), f, zero_psi(), 1.0, 10.0, &ctx)
                .unwrap();
        let lam = spec.lambdas()[0];
        let int1 = spec.phi_integrals()[0];
        for t in [1.0, 0.5, 0.125] {
            // e_q^{-tλ} E_q^{qtλ} = 1 / (1 + (1-q) t λ)
            let ratio = 1.0 / (1.0 + 0.5 * t * lam);
            let want = -ratio * lam * int1 / int1;
            assert_abs_diff_eq!(
                kernel_k(&prob, t, t, &spec, &ctx).unwrap(),
                want,
                epsilon = 1e-10
            );
        }
        assert!(kernel_k(&prob, 0.5, 0.75, &spec, &ctx).is_err());

        // orthogonal to every retained mode: f = φ̃_4 against K = 3
        let spec4 = find_eigenvalues(&ctx, 4).unwrap();
        let phi4 = spec4.basis_fn(4).unwrap();
        let f: SpaceTimeFn = Arc::new(move |_, x| 1.0 + phi4.call(x));
        let prob =
            InverseSourceProblem::new(ScalarFn::on_unit(|_| 0.0), f, zero_psi(), 1.0, 10.0, &ctx)
                .unwrap()
                .with_mean_mode(MeanMode::Exact);
        // f_k(s) for k <= 3 is ⟨1, φ̃_k⟩ only; compare against that kernel
        let g: SpaceTimeFn = Arc::new(|_, _| 1.0);
        let reference =
            InverseSourceProblem::new(ScalarFn::on_unit(|_| 0.0), g, zero_psi(), 1.0, 10.0, &ctx)
                .unwrap()
                .with_mean_mode(MeanMode::Exact);
        let t = 0.5;
        let s = 0.125;
        let scale = (1.0 + spec4.phi_integrals()[3]) / 1.0;
        let a = kernel_k(&prob, t, s, &spec, &ctx).unwrap() * scale;
        let b = kernel_k(&reference, t, s, &spec, &ctx).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
    }

    #[test]
    fn decoupled_equation_returns_psi_hat() {
        // f = φ̃_4 has no component on the 3 retained modes, so K ≡ 0; the
        // exact mean keeps the denominator away from zero
        let (ctx, spec) = setup(3);
        let spec4 = find_eigenvalues(&ctx, 4).unwrap();
        let phi4 = spec4.basis_fn(4).unwrap();
        let f: SpaceTimeFn = Arc::new(move |_, x| phi4.call(x));
        let psi = ScalarFn::new(0.0, 1.0, |t| t * t).unwrap();
        let prob = InverseSourceProblem::new(ScalarFn::on_unit(|_| 0.0), f, psi, 1.0, 100.0, &ctx)
            .unwrap()
            .with_mean_mode(MeanMode::Exact);
        let rec = solve_volterra(&prob, &spec, &ctx).unwrap();
        for (t, v) in rec.times().iter().zip(rec.values()).take(10) {
            let want = psi_hat(&prob, *t, &spec, &ctx).unwrap();
            assert_abs_diff_eq!(*v, want, epsilon = 1e-9 * (1.0 + want.abs()));
        }
        let pic = picard_iterate(&prob, &spec, &ctx, 50).unwrap();
        assert!(pic.iteration_diffs().len() <= 2);
        assert!(pic.max_abs_diff(&rec) < 1e-9);
    }

    #[test]
    fn lattice_kernel_matches_pointwise_kernel() {
        let (ctx, spec) = setup(4);
        let f: SpaceTimeFn = Arc::new(|t, x| (1.0 + t) * (1.0 + x * x));
        let psi = ScalarFn::new(0.0, 1.0, |t| 0.3 + t).unwrap();
        let prob =
            InverseSourceProblem::new(spec.basis_fn(2).unwrap(), f, psi, 1.0, 10.0, &ctx).unwrap();
        let sys = VolterraSystem::build(&prob, &spec, &ctx).unwrap();
        for (j, m) in [(0, 0), (0, 3), (2, 5), (10, 1)] {
            let t = sys.lattice.point(j);
            let s = sys.lattice.point(j + m);
            let k = kernel_k(&prob, t, s, &spec, &ctx).unwrap();
            assert_abs_diff_eq!(sys.kernel[j][m], k, epsilon = 1e-12 * (1.0 + k.abs()));
        }
        for j in [0, 4, 11] {
            let t = sys.lattice.point(j);
            let p = psi_hat(&prob, t, &spec, &ctx).unwrap();
            assert_abs_diff_eq!(sys.psi_hat[j], p, epsilon = 1e-12 * (1.0 + p.abs()));
        }
    }

    #[test]
    fn round_trip_small() {
        let (ctx, spec) = setup(4);
        let phi1 = spec.basis_fn(1).unwrap();
        let shape = phi1.clone();
        let src = SourceSpec::new(
            move |_, x| 1.0 + shape.call(x),
            ScalarFn::new(0.0, 1.0, |t| 1.0 + t / 2.0).unwrap(),
            1.0,
        )
        .unwrap();
        let depth = QLattice::new(1.0, &ctx).unwrap().depth();
        let bundle = solve_forward_with_depth(&phi1, &src, &spec, &ctx, depth + 1).unwrap();
        let prob = InverseSourceProblem::new(
            phi1,
            src.shape().clone(),
            bundle.mass_fn().unwrap(),
            1.0,
            10.0,
            &ctx,
        )
        .unwrap();
        let rec = solve_volterra(&prob, &spec, &ctx).unwrap();
        for (t, v) in rec.times().iter().zip(rec.values()) {
            let want = 1.0 + t / 2.0;
            assert!((v - want).abs() <= 1e-6 * want, "t={t}: {v} vs {want}");
        }
        assert!(rec.max_scaled_residual() <= 1e-9);
    }

    #[test]
    fn constructor_validation() {
        let ctx = QParams::default();
        let one: SpaceTimeFn = Arc::new(|_, _| 1.0);
        let phi = ScalarFn::on_unit(|_| 0.0);
        assert!(
            InverseSourceProblem::new(phi.clone(), one.clone(), zero_psi(), 0.0, 10.0, &ctx)
                .is_err()
        );
        assert!(
            InverseSourceProblem::new(phi.clone(), one.clone(), zero_psi(), 1.0, -1.0, &ctx)
                .is_err()
        );
        assert!(InverseSourceProblem::new(phi, one, zero_psi(), 2.0, 10.0, &ctx).is_err());
    }
}
