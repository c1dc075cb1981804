//! Jackson q-calculus primitives.
//!
//! Everything here works on the geometric lattice `{b q^m}`: the q-derivative
//! is a two-point difference quotient, the Jackson integral is a weighted sum
//! over the lattice, and the operator `L = -(1/q) D_{1/q} D_q` is a three-point
//! stencil on `{qx, x, x/q}`.
//!
//! The q-exponentials are evaluated through their infinite products, and the
//! q-trigonometric series are summed in double-double arithmetic because their
//! peak terms grow far beyond the magnitude of the result for the arguments the
//! eigenvalue search needs.

use std::fmt;
use std::sync::Arc;

use log::warn;
use twofloat::TwoFloat;

use crate::error::{Error, Result};

/// Terms below this fraction of the largest term seen do not change a
/// double-double sum.
const DD_EPSILON: f64 = 1e-32;

/// Largest term magnitude the q-trigonometric series will accept.
const TERM_LIMIT: f64 = 1e300;

/// Global numeric context shared by every operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QParams {
    q: f64,
    tail_tol: f64,
    m_max: usize,
    k_max: usize,
}

impl QParams {
    pub fn new(q: f64, tail_tol: f64, m_max: usize, k_max: usize) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter {
                key: "q",
                reason: format!("must satisfy 0 < q < 1, got {q}"),
            });
        }
        if !(tail_tol > 0.0 && tail_tol.is_finite()) {
            return Err(Error::InvalidParameter {
                key: "tail_tol",
                reason: format!("must be positive, got {tail_tol}"),
            });
        }
        if m_max < 1 {
            return Err(Error::InvalidParameter {
                key: "m_max",
                reason: "must be at least 1".into(),
            });
        }
        if k_max < 1 {
            return Err(Error::InvalidParameter {
                key: "K",
                reason: "mode cap must be at least 1".into(),
            });
        }
        Ok(Self {
            q,
            tail_tol,
            m_max,
            k_max,
        })
    }

    /// Default tolerances with the given base.
    pub fn with_q(q: f64) -> Result<Self> {
        let d = Self::default();
        Self::new(q, d.tail_tol, d.m_max, d.k_max)
    }

    pub fn with_m_max(self, m_max: usize) -> Result<Self> {
        Self::new(self.q, self.tail_tol, m_max, self.k_max)
    }

    pub fn with_k_max(self, k_max: usize) -> Result<Self> {
        Self::new(self.q, self.tail_tol, self.m_max, k_max)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }
}

impl Default for QParams {
    fn default() -> Self {
        Self {
            q: 0.5,
            tail_tol: 1e-14,
            m_max: 60,
            k_max: 12,
        }
    }
}

type Eval = dyn Fn(f64) -> f64 + Send + Sync;

/// A real function on a closed interval `[a, b]` with `0 <= a < b`.
///
/// This is an evaluation contract rather than a sample array: consumers pick
/// the lattice they need.
#[derive(Clone)]
pub struct ScalarFn {
    a: f64,
    b: f64,
    f: Arc<Eval>,
}

impl ScalarFn {
    pub fn new(a: f64, b: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(a >= 0.0 && b > a && b.is_finite()) {
            return Err(Error::InvalidParameter {
                key: "domain",
                reason: format!("need 0 <= a < b, got [{a}, {b}]"),
            });
        }
        Ok(Self {
            a,
            b,
            f: Arc::new(f),
        })
    }

    /// A function on `[0, 1]`.
    pub fn on_unit(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            f: Arc::new(f),
        }
    }

    pub fn constant(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(a, b, move |_| c)
    }

    /// Piecewise-linear function through samples taken on a lattice.
    ///
    /// Lattice points return their sample exactly; below the deepest point the
    /// function is continued linearly to the value at zero of the segment.
    pub fn from_lattice_samples(lattice: &QLattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::InvalidParameter {
                key: "samples",
                reason: format!(
                    "{} values for {} lattice points",
                    values.len(),
                    lattice.len()
                ),
            });
        }
        let points = lattice.points().to_vec();
        Self::new(0.0, lattice.base(), move |t| {
            // points are strictly decreasing
            let idx = points.partition_point(|&p| p > t);
            if idx == 0 {
                return values[0];
            }
            if idx == points.len() {
                let last = points.len() - 1;
                return values[last] * t / points[last];
            }
            let (hi, lo) = (points[idx - 1], points[idx]);
            if t == lo {
                return values[idx];
            }
            let w = (t - lo) / (hi - lo);
            values[idx] + w * (values[idx - 1] - values[idx])
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    fn slack(&self) -> f64 {
        1e-12 * self.b.max(1.0)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a - self.slack() && x <= self.b + self.slack()
    }

    /// Evaluate with a domain check.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::OutsideDomain {
                x,
                a: self.a,
                b: self.b,
            });
        }
        Ok((self.f)(x))
    }

    /// Evaluate without a domain check.
    #[inline]
    pub fn call(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn[{}, {}]", self.a, self.b)
    }
}

/// The point set `b q^0 > b q^1 > ... > b q^M`.
#[derive(Debug, Clone, PartialEq)]
pub struct QLattice {
    base: f64,
    q: f64,
    points: Vec<f64>,
}

impl QLattice {
    /// Lattice whose deepest point satisfies `q^M <= tail_tol`, capped at
    /// `m_max`.
    pub fn new(base: f64, ctx: &QParams) -> Result<Self> {
        let wanted = (ctx.tail_tol.ln() / ctx.q.ln()).ceil().max(1.0) as usize;
        Self::with_depth(base, ctx.q, wanted.min(ctx.m_max))
    }

    pub fn with_depth(base: f64, q: f64, depth: usize) -> Result<Self> {
        if !(base > 0.0 && base.is_finite()) {
            return Err(Error::InvalidParameter {
                key: "T",
                reason: format!("lattice base must be positive, got {base}"),
            });
        }
        let points = (0..=depth).map(|m| base * q.powi(m as i32)).collect();
        Ok(Self { base, q, points })
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Index of the deepest point.
    pub fn depth(&self) -> usize {
        self.points.len() - 1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, j: usize) -> f64 {
        self.points[j]
    }

    /// Jackson weight `(1-q) b q^j` of point `j`.
    pub fn weight(&self, j: usize) -> f64 {
        (1.0 - self.q) * self.points[j]
    }

    /// `∫_0^b g d_q x` from samples of `g` at the lattice points.
    pub fn jackson_sum(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.points.len());
        values
            .iter()
            .enumerate()
            .map(|(j, v)| self.weight(j) * v)
            .sum()
    }

    /// Lattice index of `t`, if `t` is a lattice point.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        if t <= 0.0 {
            return None;
        }
        let j = ((t / self.base).ln() / self.q.ln()).round();
        if j < 0.0 || j as usize > self.depth() {
            return None;
        }
        let j = j as usize;
        ((self.points[j] - t).abs() <= 1e-12 * t).then_some(j)
    }
}

/// `[α]_q = (1 - q^α) / (1 - q)`.
pub fn q_number(alpha: f64, ctx: &QParams) -> f64 {
    (1.0 - ctx.q.powf(alpha)) / (1.0 - ctx.q)
}

/// `[n]_q! = [1]_q [2]_q ... [n]_q`, with `[0]_q! = 1`.
pub fn q_factorial(n: u32, ctx: &QParams) -> f64 {
    (1..=n).map(|k| q_number(k as f64, ctx)).product()
}

/// Jackson derivative `(f(x) - f(qx)) / (x (1 - q))`.
pub fn q_derivative(f: &ScalarFn, x: f64, ctx: &QParams) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::DerivativeAtZero);
    }
    let fx = f.eval(x)?;
    let fqx = f.eval(ctx.q * x)?;
    Ok((fx - fqx) / (x * (1.0 - ctx.q)))
}

/// Backward Jackson derivative `(f(x) - f(x/q)) / (x (1 - 1/q))`.
pub fn q_derivative_inv(f: &ScalarFn, x: f64, ctx: &QParams) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::DerivativeAtZero);
    }
    let fx = f.eval(x)?;
    let up = x / ctx.q;
    if !f.contains(up) {
        return Err(Error::InverseStepLeavesDomain { x: up, b: f.b });
    }
    let fup = f.call(up);
    Ok((fx - fup) / (x * (1.0 - 1.0 / ctx.q)))
}

/// Jackson integral `(1-q) Σ q^m [b f(b q^m) - a f(a q^m)]`.
///
/// The sum stops once two consecutive terms are below
/// `tail_tol (1-q) (1 + |partial|)`, or at `m_max` with a warning.
pub fn q_integral(f: &ScalarFn, a: f64, b: f64, ctx: &QParams) -> Result<f64> {
    if !(a >= 0.0 && b > a) {
        return Err(Error::InvalidBounds { a, b });
    }
    f.eval(b)?;
    if a > 0.0 {
        f.eval(a)?;
    }
    let q = ctx.q;
    let (lo, _) = f.domain();
    let threshold = ctx.tail_tol * (1.0 - q);
    let mut sum = 0.0;
    let mut quiet = 0;
    let mut qm = 1.0;
    for _ in 0..=ctx.m_max {
        let xb = b * qm;
        if xb < lo - f.slack() {
            return Err(Error::OutsideDomain {
                x: xb,
                a: lo,
                b: f.b,
            });
        }
        let mut term = b * f.call(xb);
        if a > 0.0 {
            let xa = a * qm;
            if xa < lo - f.slack() {
                return Err(Error::OutsideDomain {
                    x: xa,
                    a: lo,
                    b: f.b,
                });
            }
            term -= a * f.call(xa);
        }
        term *= (1.0 - q) * qm;
        sum += term;
        if term.abs() <= threshold * (1.0 + sum.abs()) {
            quiet += 1;
            if quiet >= 2 {
                return Ok(sum);
            }
        } else {
            quiet = 0;
        }
        qm *= q;
    }
    warn!(
        "q_integral over [{a}, {b}] reached m_max={} without meeting tail_tol={}",
        ctx.m_max, ctx.tail_tol
    );
    Ok(sum)
}

/// Residual of the q-integration-by-parts identity
/// `∫ f D_q g + ∫ g(q·) D_q f - [f g]_a^b`; zero up to truncation.
pub fn q_integration_by_parts_residual(
    f: &ScalarFn,
    g: &ScalarFn,
    a: f64,
    b: f64,
    ctx: &QParams,
) -> Result<f64> {
    let q = ctx.q;
    let lo = f.a.max(g.a);
    let hi = f.b.min(g.b);
    let (f1, g1) = (f.clone(), g.clone());
    let f_dg = ScalarFn::new(lo, hi, move |x| {
        f1.call(x) * (g1.call(x) - g1.call(q * x)) / (x * (1.0 - q))
    })?;
    let (f2, g2) = (f.clone(), g.clone());
    let g_df = ScalarFn::new(lo, hi, move |x| {
        g2.call(q * x) * (f2.call(x) - f2.call(q * x)) / (x * (1.0 - q))
    })?;
    let lhs = q_integral(&f_dg, a, b, ctx)? + q_integral(&g_df, a, b, ctx)?;
    let boundary = f.eval(b)? * g.eval(b)? - f.eval(a)? * g.eval(a)?;
    Ok(lhs - boundary)
}

/// Walk the factors `1 + (1-q) q^m x` of the `E_q` product.
///
/// Factors with `(1-q) q^m |x| >= 1` do not count against `m_max`.
fn for_each_product_factor(x: f64, ctx: &QParams, mut step: impl FnMut(f64) -> bool) {
    let q = ctx.q;
    // the dropped tail is about a q / (1 - q) once a is small
    let threshold = 0.1 * ctx.tail_tol * (1.0 - q);
    let mut a = (1.0 - q) * x;
    let mut counted = 0;
    loop {
        if a.abs() < threshold {
            return;
        }
        if !step(a) {
            return;
        }
        if a.abs() < 1.0 {
            counted += 1;
            if counted > ctx.m_max {
                warn!("E_q product at x={x} truncated at m_max={}", ctx.m_max);
                return;
            }
        }
        a *= q;
    }
}

/// `E_q^x = Π_{m>=0} (1 + (1-q) q^m x)`.
pub fn big_e_q(x: f64, ctx: &QParams) -> Result<f64> {
    let mut prod = 1.0;
    for_each_product_factor(x, ctx, |a| {
        prod *= 1.0 + a;
        prod.is_finite()
    });
    if !prod.is_finite() {
        return Err(Error::ProductOverflow { x });
    }
    Ok(prod)
}

/// `ln E_q^x` for `x >= 0`, summed factor by factor so it never overflows.
pub fn log_big_e_q(x: f64, ctx: &QParams) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidParameter {
            key: "x",
            reason: format!("log_big_e_q needs x >= 0, got {x}"),
        });
    }
    Ok(log_big_e_q_nonneg(x, ctx))
}

pub(crate) fn log_big_e_q_nonneg(x: f64, ctx: &QParams) -> f64 {
    let mut sum = 0.0;
    for_each_product_factor(x, ctx, |a| {
        sum += a.ln_1p();
        true
    });
    sum
}

/// `E_q^x` from its power series `Σ q^{k(k-1)/2} x^k / [k]_q!`.
///
/// Only used to cross-check the product form.
pub fn big_e_q_series(x: f64, ctx: &QParams) -> f64 {
    let q = ctx.q;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut max_term: f64 = 1.0;
    for k in 1..10_000 {
        term *= q.powi(k - 1) * x / q_number(k as f64, ctx);
        sum += term;
        max_term = max_term.max(term.abs());
        if term.abs() < 1e-18 * max_term && k > 2 {
            break;
        }
    }
    sum
}

/// `e_q^{-t} = 1 / E_q^t` for `t >= 0`.
pub fn small_e_q_neg(t: f64, ctx: &QParams) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter {
            key: "t",
            reason: format!("small_e_q_neg needs t >= 0, got {t}"),
        });
    }
    Ok((-log_big_e_q_nonneg(t, ctx)).exp())
}

/// `e_q^x` for `x < 1/(1-q)`.
///
/// Negative arguments go through `1 / E_q^{-x}`; positive ones through the
/// product `1 / Π (1 - (1-q) q^m x)`.
pub fn small_e_q(x: f64, ctx: &QParams) -> Result<f64> {
    if x <= 0.0 {
        return small_e_q_neg(-x, ctx);
    }
    if x * (1.0 - ctx.q) >= 1.0 {
        return Err(Error::InvalidParameter {
            key: "x",
            reason: format!("e_q^x has a pole at or before x = {x}"),
        });
    }
    Ok(1.0 / big_e_q(-x, ctx)?)
}

/// `1 / x` to double-double accuracy. The division operator of `TwoFloat`
/// is only accurate to about one `f64` ulp, so refine with two Newton steps.
pub(crate) fn dd_recip(x: TwoFloat) -> TwoFloat {
    let one = TwoFloat::from(1.0);
    let mut r = TwoFloat::from(1.0 / x.hi());
    for _ in 0..2 {
        r = r + r * (one - x * r);
    }
    r
}

/// Sum of `Σ (-1)^k q^{d(k)} z^n / [n]_q!` over odd (`sin`) or even (`cos`)
/// powers, in double-double.
fn q_trig_series(z: TwoFloat, q: f64, odd: bool) -> Result<TwoFloat> {
    let zero = TwoFloat::from(0.0);
    let one = TwoFloat::from(1.0);
    if z.hi() == 0.0 {
        return Ok(if odd { zero } else { one });
    }
    if !z.hi().is_finite() {
        return Err(Error::ArgumentTooLarge { z: z.hi() });
    }
    let qd = TwoFloat::from(q);
    let q_sq = qd * qd;
    let one_minus_q = one - qd;
    let scaled_z_sq = z * z * one_minus_q * one_minus_q;

    let mut term = if odd { z } else { one };
    let mut sum = term;
    let mut max_term = term.hi().abs();
    // n1 = 2k (sine) or 2k - 1 (cosine); q^{n1} is both the damping ratio and
    // the power inside [n1]_q.
    let mut q_n1 = if odd { q_sq } else { qd };
    for _ in 1..100_000 {
        let q_n2 = q_n1 * qd;
        // [n1]_q [n2]_q (1-q)^2 = (1 - q^{n1}) (1 - q^{n2})
        let ratio = -(q_n1 * scaled_z_sq) * dd_recip((one - q_n1) * (one - q_n2));
        term *= ratio;
        let mag = term.hi().abs();
        if !(mag <= TERM_LIMIT) {
            return Err(Error::ArgumentTooLarge { z: z.hi() });
        }
        sum += term;
        max_term = max_term.max(mag);
        if ratio.hi().abs() < 1.0 && mag < DD_EPSILON * max_term {
            return Ok(sum);
        }
        q_n1 *= q_sq;
    }
    Err(Error::ArgumentTooLarge { z: z.hi() })
}

/// `sin(z; q²) = Σ (-1)^k q^{k(k+1)} z^{2k+1} / [2k+1]_q!` in double-double.
pub fn q_sin_dd(z: TwoFloat, q: f64) -> Result<TwoFloat> {
    q_trig_series(z, q, true)
}

/// `cos(z; q²) = Σ (-1)^k q^{k²} z^{2k} / [2k]_q!` in double-double.
pub fn q_cos_dd(z: TwoFloat, q: f64) -> Result<TwoFloat> {
    q_trig_series(z, q, false)
}

pub fn q_sin(z: f64, ctx: &QParams) -> Result<f64> {
    q_sin_dd(TwoFloat::from(z), ctx.q).map(f64::from)
}

pub fn q_cos(z: f64, ctx: &QParams) -> Result<f64> {
    q_cos_dd(TwoFloat::from(z), ctx.q).map(f64::from)
}

/// `L f(x) = -(1/q) D_{1/q}[D_q f](x)`, composed literally on the stencil
/// `{qx, x, x/q}`.
pub fn apply_l(f: &ScalarFn, x: f64, ctx: &QParams) -> Result<f64> {
    let q = ctx.q;
    let inner = |y: f64| q_derivative(f, y, ctx);
    if x == 0.0 {
        return Err(Error::DerivativeAtZero);
    }
    f.eval(x)?;
    let up = x / q;
    if !f.contains(up) {
        return Err(Error::InverseStepLeavesDomain { x: up, b: f.b });
    }
    let d_here = inner(x)?;
    let d_up = inner(up)?;
    let outer = (d_here - d_up) / (x * (1.0 - 1.0 / q));
    Ok(-outer / q)
}
