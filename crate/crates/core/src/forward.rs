//! Modal series solution of `D_{q,t} u + L u = v(t) f(t, x)`, `u(0, ·) = φ`.
//!
//! Each mode evolves independently:
//!
//! ```text
//! u_k(t) = e_q^{-tλ_k} φ_k + e_q^{-tλ_k} ∫_0^t E_q^{qsλ_k} v(s) f_k(s) d_q s
//! ```
//!
//! On the Jackson time lattice `{T q^j}` this satisfies the q-difference
//! equation exactly, because `e_q^{-qtλ} E_q^{qtλ} = 1`. The product of the
//! two exponentials is always formed as `exp(ln E_q^{qsλ} - ln E_q^{tλ})`,
//! which is at most one for `s <= t`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::qcore::{log_big_e_q_nonneg, q_integral, QLattice, QParams, ScalarFn};
use crate::spectral::{analyze, ModalSeries, Spectrum};

/// A source shape `(t, x) ↦ f(t, x)`.
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Right-hand side `v(t) f(t, x)` on `[0, T] × [0, 1]`.
#[derive(Clone)]
pub struct SourceSpec {
    f: SpaceTimeFn,
    v: ScalarFn,
    horizon: f64,
}

impl std::fmt::Debug for SourceSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SourceSpec")
            .field("v", &self.v)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl SourceSpec {
    pub fn new(
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        v: ScalarFn,
        horizon: f64,
    ) -> Result<Self> {
        Self::from_shared(Arc::new(f), v, horizon)
    }

    pub fn from_shared(f: SpaceTimeFn, v: ScalarFn, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter {
                key: "T",
                reason: format!("horizon must be positive, got {horizon}"),
            });
        }
        let (a, b) = v.domain();
        if a > 0.0 || !v.contains(horizon) {
            return Err(Error::InvalidParameter {
                key: "v",
                reason: format!("time function domain [{a}, {b}] does not cover [0, {horizon}]"),
            });
        }
        Ok(Self { f, v, horizon })
    }

    /// `v ≡ 0`.
    pub fn zero(horizon: f64) -> Result<Self> {
        Self::new(|_, _| 0.0, ScalarFn::constant(0.0, horizon, 0.0)?, horizon)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn shape(&self) -> &SpaceTimeFn {
        &self.f
    }

    pub fn intensity(&self) -> &ScalarFn {
        &self.v
    }

    pub fn f_at(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x)
    }

    pub fn v_at(&self, t: f64) -> f64 {
        self.v.call(t)
    }

    /// `f_k(t) = ⟨f(t, ·), φ̃_k⟩` for every retained mode.
    pub fn shape_modes(&self, t: f64, spec: &Spectrum) -> ModalSeries {
        let samples: Vec<f64> = spec
            .space_lattice()
            .points()
            .iter()
            .map(|&x| (self.f)(t, x))
            .collect();
        spec.analyze_samples(&samples)
    }
}

/// `u(t, ·)` on the time lattice `{T q^j : j = 0..=M}` plus its mass.
#[derive(Debug, Clone)]
pub struct SolutionBundle {
    time_lattice: QLattice,
    initial: ModalSeries,
    modal_u: Vec<ModalSeries>,
    mass: Vec<f64>,
}

impl SolutionBundle {
    pub fn time_lattice(&self) -> &QLattice {
        &self.time_lattice
    }

    /// Coefficients of the initial data `φ`.
    pub fn initial(&self) -> &ModalSeries {
        &self.initial
    }

    /// `u(T q^j, ·)` in modal form.
    pub fn modal_u(&self, j: usize) -> &ModalSeries {
        &self.modal_u[j]
    }

    pub fn modal_u_all(&self) -> &[ModalSeries] {
        &self.modal_u
    }

    /// `∫_0^1 u(T q^j, x) d_q x` for each lattice point.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Mass as a time function through the lattice samples.
    pub fn mass_fn(&self) -> Result<ScalarFn> {
        ScalarFn::from_lattice_samples(&self.time_lattice, self.mass.clone())
    }

    /// `u(T q^j, x)`.
    pub fn u_at(&self, j: usize, x: f64, spec: &Spectrum) -> Result<f64> {
        spec.synthesis_fn(&self.modal_u[j]).eval(x)
    }
}

/// `u_k(t)` for a single mode `k` (1-based) at an arbitrary `t ∈ [0, T]`.
pub fn mode_solution(
    k: usize,
    t: f64,
    phi_k_coeff: f64,
    src: &SourceSpec,
    spec: &Spectrum,
    ctx: &QParams,
) -> Result<f64> {
    if k == 0 || k > spec.len() {
        return Err(Error::IndexOutOfRange { k, len: spec.len() });
    }
    if !(t >= 0.0 && t <= src.horizon * (1.0 + 1e-12)) {
        return Err(Error::OutsideDomain {
            x: t,
            a: 0.0,
            b: src.horizon,
        });
    }
    if t == 0.0 {
        return Ok(phi_k_coeff);
    }
    let lambda = spec.lambdas()[k - 1];
    let log_e_t = log_big_e_q_nonneg(t * lambda, ctx);
    let decay = (-log_e_t).exp();

    let q = ctx.q();
    let basis: Vec<f64> = spec.basis_samples(k).to_vec();
    let space = spec.space_lattice().clone();
    let src_c = src.clone();
    let ctx_c = *ctx;
    let integrand = ScalarFn::new(0.0, t, move |s| {
        let v = src_c.v_at(s);
        if v == 0.0 {
            return 0.0;
        }
        let fk: f64 = space
            .points()
            .iter()
            .zip(&basis)
            .enumerate()
            .map(|(j, (&x, p))| space.weight(j) * src_c.f_at(s, x) * p)
            .sum();
        let growth = (log_big_e_q_nonneg(q * s * lambda, &ctx_c) - log_e_t).exp();
        growth * v * fk
    })?;
    let forced = q_integral(&integrand, 0.0, t, ctx)?;
    Ok(decay * phi_k_coeff + forced)
}

/// Solve on the time lattice `QLattice::new(T, ctx)`.
pub fn solve_forward(
    phi: &ScalarFn,
    src: &SourceSpec,
    spec: &Spectrum,
    ctx: &QParams,
) -> Result<SolutionBundle> {
    let depth = QLattice::new(src.horizon, ctx)?.depth();
    solve_forward_with_depth(phi, src, spec, ctx, depth)
}

/// Solve on `{T q^j : j = 0..=depth}`.
///
/// Each time integral uses as many lattice terms as the default lattice has
/// points, so the dropped tail is below `tail_tol` relative to the first term
/// regardless of `depth`.
pub fn solve_forward_with_depth(
    phi: &ScalarFn,
    src: &SourceSpec,
    spec: &Spectrum,
    ctx: &QParams,
    depth: usize,
) -> Result<SolutionBundle> {
    let initial = analyze(phi, spec)?;
    solve_forward_modal(&initial, src, spec, ctx, depth)
}

/// Same as [`solve_forward_with_depth`] with the initial data already in
/// modal form.
pub fn solve_forward_modal(
    initial: &ModalSeries,
    src: &SourceSpec,
    spec: &Spectrum,
    ctx: &QParams,
    depth: usize,
) -> Result<SolutionBundle> {
    let q = ctx.q();
    let horizon = src.horizon;
    let time_lattice = QLattice::with_depth(horizon, q, depth)?;
    let terms = QLattice::new(horizon, ctx)?.len();
    let extended = depth + terms;
    let times: Vec<f64> = (0..=extended).map(|i| horizon * q.powi(i as i32)).collect();

    // f_k(t_i) v(t_i), cached once per time point and shared by every mode
    let n_modes = spec.len();
    let mut forcing = vec![vec![0.0; times.len()]; n_modes];
    for (i, &t) in times.iter().enumerate() {
        let v = src.v_at(t);
        if v == 0.0 {
            continue;
        }
        let fk = src.shape_modes(t, spec);
        for (k, c) in fk.coeffs().iter().enumerate() {
            forcing[k][i] = v * c;
        }
    }

    let mut modal: Vec<Vec<f64>> = vec![vec![0.0; n_modes]; depth + 1];
    for k in 0..n_modes {
        let lambda = spec.lambdas()[k];
        // ln E_q^{t_i λ}; note q t_i = t_{i+1}
        let log_e: Vec<f64> = (0..=extended + 1)
            .map(|i| log_big_e_q_nonneg(horizon * q.powi(i as i32) * lambda, ctx))
            .collect();
        for (j, row) in modal.iter_mut().enumerate() {
            let mut forced = 0.0;
            for i in j..j + terms {
                let g = forcing[k][i];
                if g != 0.0 {
                    forced += (1.0 - q) * times[i] * (log_e[i + 1] - log_e[j]).exp() * g;
                }
            }
            row[k] = (-log_e[j]).exp() * initial.coeffs()[k] + forced;
        }
    }

    let modal_u: Vec<ModalSeries> = modal.into_iter().map(ModalSeries::new).collect();
    let mass = modal_u
        .iter()
        .map(|m| {
            m.coeffs()
                .iter()
                .zip(spec.phi_integrals())
                .map(|(c, i)| c * i)
                .sum()
        })
        .collect();
    Ok(SolutionBundle {
        time_lattice,
        initial: initial.clone(),
        modal_u,
        mass,
    })
}

/// `D_{q,t} u + L u - v f` at lattice time `t` (not the deepest point) and
/// space point `x`, with `L u` taken modally as `Σ λ_k u_k(t) φ̃_k(x)`.
pub fn pde_residual(
    bundle: &SolutionBundle,
    src: &SourceSpec,
    t: f64,
    x: f64,
    spec: &Spectrum,
    ctx: &QParams,
) -> Result<f64> {
    let lattice = bundle.time_lattice();
    let j = lattice.index_of(t).ok_or(Error::InvalidParameter {
        key: "t",
        reason: format!("{t} is not a time-lattice point"),
    })?;
    if j >= lattice.depth() {
        return Err(Error::InvalidParameter {
            key: "t",
            reason: "the deepest lattice point has no q-difference partner".into(),
        });
    }
    let tj = lattice.point(j);
    let here = bundle.u_at(j, x, spec)?;
    let below = bundle.u_at(j + 1, x, spec)?;
    let d_t = (here - below) / ((1.0 - ctx.q()) * tj);
    let lu_coeffs: Vec<f64> = bundle
        .modal_u(j)
        .coeffs()
        .iter()
        .zip(spec.lambdas())
        .map(|(c, l)| c * l)
        .collect();
    let lu = spec.synthesis_fn(&ModalSeries::new(lu_coeffs)).eval(x)?;
    Ok(d_t + lu - src.v_at(tj) * src.f_at(tj, x))
}
