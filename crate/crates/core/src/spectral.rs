//! Dirichlet spectrum of `L = -(1/q) D_{1/q} D_q` on `[0, 1]`.
//!
//! The eigenvalues are the zeros of `λ ↦ sin(√λ; q²)` and the eigenfunctions
//! are `sin(√λ_k x; q²) / √λ_k`. The characteristic function gets very steep
//! at higher roots (slope ~1e9 at the sixth root for `q = 0.5`), so the roots
//! `√λ_k` are located and stored in double-double precision. Everything
//! downstream uses the orthonormalized eigenfunctions `φ̃_k = φ_k / ‖φ_k‖`.

use std::sync::Arc;

use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::qcore::{q_sin, q_sin_dd, QLattice, QParams, ScalarFn};

const BISECTION_MAX_ITER: usize = 200;

/// First `K` eigenpairs with cached norms, integrals and lattice samples.
#[derive(Debug, Clone)]
pub struct Spectrum {
    ctx: QParams,
    roots: Vec<TwoFloat>,
    lambdas: Vec<f64>,
    norms: Vec<f64>,
    phi_integrals: Vec<f64>,
    space: QLattice,
    basis: Vec<Vec<f64>>,
}

/// Coefficients of a function in the orthonormal eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalSeries {
    coeffs: Vec<f64>,
}

impl ModalSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len])
    }

    /// Unit coefficient on mode `k` (1-based).
    pub fn unit(len: usize, k: usize) -> Self {
        let mut c = vec![0.0; len];
        c[k - 1] = 1.0;
        Self::new(c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Largest coefficient-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `sin(√λ; q²)`, whose zeros are the eigenvalues.
pub fn eigen_sine_residual(lambda: f64, ctx: &QParams) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter {
            key: "lambda",
            reason: format!("must be positive, got {lambda}"),
        });
    }
    q_sin(lambda.sqrt(), ctx)
}

fn bisect_root(mut lo: TwoFloat, mut hi: TwoFloat, q: f64) -> Result<TwoFloat> {
    let mut s_lo = q_sin_dd(lo, q)?.hi().signum();
    for _ in 0..BISECTION_MAX_ITER {
        let mid = (lo + hi) * 0.5;
        if mid <= lo || mid >= hi || (hi - lo).hi() <= 1e-31 * hi.hi() {
            return Ok(mid);
        }
        let s_mid = q_sin_dd(mid, q)?;
        if s_mid.hi() == 0.0 {
            return Ok(mid);
        }
        if s_mid.hi().signum() == s_lo {
            lo = mid;
            s_lo = s_mid.hi().signum();
        } else {
            hi = mid;
        }
    }
    Err(Error::BisectionFailed {
        lo: lo.hi(),
        hi: hi.hi(),
    })
}

/// First `count` eigenvalues by geometric scanning (λ-ratio `q^{-1/2}`,
/// starting at `λ = 1`) with sign-change bracketing and bisection on `√λ`.
pub fn find_eigenvalues(ctx: &QParams, count: usize) -> Result<Spectrum> {
    if count == 0 || count > ctx.k_max() {
        return Err(Error::InvalidParameter {
            key: "K",
            reason: format!("need 1 <= K <= k_max = {}, got {count}", ctx.k_max()),
        });
    }
    let q = ctx.q();
    let z_ratio = q.powf(-0.25);
    let mut roots = Vec::with_capacity(count);
    let mut z_lo = TwoFloat::from(1.0);
    let mut s_lo = q_sin_dd(z_lo, q)?;
    while roots.len() < count {
        let z_hi = z_lo * z_ratio;
        let s_hi = match q_sin_dd(z_hi, q) {
            Ok(s) => s,
            Err(Error::ArgumentTooLarge { .. }) => {
                return Err(Error::ModeCapExceeded {
                    found: roots.len(),
                    requested: count,
                })
            }
            Err(e) => return Err(e),
        };
        if s_hi.hi() == 0.0 {
            roots.push(z_hi);
        } else if s_lo.hi() != 0.0 && s_lo.hi().signum() != s_hi.hi().signum() {
            roots.push(bisect_root(z_lo, z_hi, q)?);
        }
        z_lo = z_hi;
        s_lo = s_hi;
    }
    Spectrum::from_roots(ctx, roots)
}

fn eval_raw(root: TwoFloat, x: f64, q: f64) -> f64 {
    // x <= 1 keeps the argument at or below a root that already evaluated
    q_sin_dd(root * x, q).map(f64::from).unwrap_or(f64::NAN) / root.hi()
}

impl Spectrum {
    fn from_roots(ctx: &QParams, roots: Vec<TwoFloat>) -> Result<Self> {
        let q = ctx.q();
        let space = QLattice::new(1.0, ctx)?;
        let lambdas = roots.iter().map(|r| f64::from(*r * *r)).collect();
        let mut norms = Vec::with_capacity(roots.len());
        let mut basis = Vec::with_capacity(roots.len());
        let mut phi_integrals = Vec::with_capacity(roots.len());
        for root in &roots {
            let raw: Vec<f64> = space
                .points()
                .iter()
                .map(|&x| eval_raw(*root, x, q))
                .collect();
            let sq: Vec<f64> = raw.iter().map(|v| v * v).collect();
            let norm = space.jackson_sum(&sq).sqrt();
            let normalized: Vec<f64> = raw.iter().map(|v| v / norm).collect();
            phi_integrals.push(space.jackson_sum(&normalized));
            norms.push(norm);
            basis.push(normalized);
        }
        Ok(Self {
            ctx: *ctx,
            roots,
            lambdas,
            norms,
            phi_integrals,
            space,
            basis,
        })
    }

    pub fn ctx(&self) -> &QParams {
        &self.ctx
    }

    /// Number of retained modes `K`.
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// `‖φ_k‖` of the unnormalized eigenfunctions `sin(√λ_k x; q²)/√λ_k`.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// `∫_0^1 φ̃_k d_q x`.
    pub fn phi_integrals(&self) -> &[f64] {
        &self.phi_integrals
    }

    /// The space lattice `{q^m}` all inner products are taken on.
    pub fn space_lattice(&self) -> &QLattice {
        &self.space
    }

    /// `√λ_k` as a double-double (0-based index).
    pub fn root(&self, index: usize) -> TwoFloat {
        self.roots[index]
    }

    /// `sin(√λ_k; q²)` evaluated at the stored double-double root (1-based).
    pub fn characteristic_residual(&self, k: usize) -> Result<f64> {
        self.check_index(k)?;
        q_sin_dd(self.roots[k - 1], self.ctx.q()).map(f64::from)
    }

    /// Largest term of the characteristic series at root `k`, the natural
    /// scale for its residual.
    pub fn characteristic_scale(&self, k: usize) -> Result<f64> {
        self.check_index(k)?;
        let z = self.roots[k - 1].hi();
        let q = self.ctx.q();
        let mut term = z;
        let mut max = z.abs();
        for j in 1..10_000 {
            let n1 = (2 * j) as f64;
            let b1 = (1.0 - q.powf(n1)) / (1.0 - q);
            let b2 = (1.0 - q.powf(n1 + 1.0)) / (1.0 - q);
            let ratio = q.powf(n1) * z * z / (b1 * b2);
            term *= ratio;
            max = max.max(term);
            if ratio < 1.0 && term < 1e-20 * max {
                break;
            }
        }
        Ok(max)
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.len() {
            return Err(Error::IndexOutOfRange { k, len: self.len() });
        }
        Ok(())
    }

    /// Samples of `φ̃_k` (1-based) on the space lattice.
    pub fn basis_samples(&self, k: usize) -> &[f64] {
        &self.basis[k - 1]
    }

    /// `φ̃_k` as an evaluable function on `[0, 1]` (1-based).
    pub fn basis_fn(&self, k: usize) -> Result<ScalarFn> {
        self.check_index(k)?;
        let root = self.roots[k - 1];
        let scale = self.norms[k - 1];
        let q = self.ctx.q();
        Ok(ScalarFn::on_unit(move |x| eval_raw(root, x, q) / scale))
    }

    /// `Σ c_k φ̃_k` as an evaluable function on `[0, 1]`.
    pub fn synthesis_fn(&self, m: &ModalSeries) -> ScalarFn {
        let roots = Arc::new(self.roots.clone());
        let weights: Vec<f64> = m
            .coeffs
            .iter()
            .zip(&self.norms)
            .map(|(c, n)| c / n)
            .collect();
        let q = self.ctx.q();
        ScalarFn::on_unit(move |x| {
            roots
                .iter()
                .zip(&weights)
                .filter(|(_, w)| **w != 0.0)
                .map(|(r, w)| w * eval_raw(*r, x, q))
                .sum()
        })
    }

    pub fn series(&self, coeffs: Vec<f64>) -> Result<ModalSeries> {
        if coeffs.len() != self.len() {
            return Err(Error::InvalidParameter {
                key: "coeffs",
                reason: format!("expected {} coefficients, got {}", self.len(), coeffs.len()),
            });
        }
        Ok(ModalSeries::new(coeffs))
    }

    /// Coefficients from samples on the space lattice.
    pub fn analyze_samples(&self, samples: &[f64]) -> ModalSeries {
        let weighted: Vec<f64> = samples
            .iter()
            .enumerate()
            .map(|(j, s)| self.space.weight(j) * s)
            .collect();
        ModalSeries::new(
            self.basis
                .iter()
                .map(|b| b.iter().zip(&weighted).map(|(p, w)| p * w).sum())
                .collect(),
        )
    }

    /// Samples a function on the space lattice, checking its domain.
    pub fn sample(&self, f: &ScalarFn) -> Result<Vec<f64>> {
        f.eval(1.0)?;
        let (lo, _) = f.domain();
        if lo > 0.0 {
            return Err(Error::OutsideDomain {
                x: 0.0,
                a: lo,
                b: f.domain().1,
            });
        }
        Ok(self.space.points().iter().map(|&x| f.call(x)).collect())
    }

    /// `‖f‖_{L²_q[0,1]}`.
    pub fn l2_norm(&self, f: &ScalarFn) -> Result<f64> {
        let sq: Vec<f64> = self.sample(f)?.iter().map(|v| v * v).collect();
        Ok(self.space.jackson_sum(&sq).sqrt())
    }

    /// Norm of `f - P_K f` and the truncation proxy `λ_K^{-1} ‖f - P_K f‖`.
    pub fn projection_gap(&self, f: &ScalarFn) -> Result<(f64, f64)> {
        let norm = self.l2_norm(f)?;
        let c = analyze(f, self)?;
        let gap = (norm * norm - c.l2_norm().powi(2)).max(0.0).sqrt();
        Ok((gap, gap / self.lambdas[self.len() - 1]))
    }

    /// Gram matrix `⟨φ̃_i, φ̃_j⟩` of the first `n` modes.
    pub fn gram(&self, n: usize) -> Vec<Vec<f64>> {
        let n = n.min(self.len());
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let prod: Vec<f64> = self.basis[i]
                            .iter()
                            .zip(&self.basis[j])
                            .map(|(a, b)| a * b)
                            .collect();
                        self.space.jackson_sum(&prod)
                    })
                    .collect()
            })
            .collect()
    }
}

/// `φ̃_k(x) = sin(√λ_k x; q²) / (√λ_k ‖φ_k‖)` for `1 <= k <= K`, `x ∈ [0, 1]`.
pub fn eigenfunction(spec: &Spectrum, k: usize, x: f64) -> Result<f64> {
    spec.basis_fn(k)?.eval(x)
}

/// `c_k = ⟨f, φ̃_k⟩` on the space lattice.
pub fn analyze(f: &ScalarFn, spec: &Spectrum) -> Result<ModalSeries> {
    Ok(spec.analyze_samples(&spec.sample(f)?))
}

/// `Σ_k c_k φ̃_k(x)`.
pub fn synthesize(m: &ModalSeries, spec: &Spectrum, x: f64) -> Result<f64> {
    spec.synthesis_fn(m).eval(x)
}

/// `(Σ_k λ_k^s c_k²)^{1/2}` over the retained modes.
pub fn sobolev_norm(m: &ModalSeries, spec: &Spectrum, s: f64) -> f64 {
    m.coeffs
        .iter()
        .zip(spec.lambdas())
        .map(|(c, l)| l.powf(s) * c * c)
        .sum::<f64>()
        .sqrt()
}
