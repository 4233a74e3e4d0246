//! Radial profiles, weighted norms, optimal constants, the Euler-Lagrange
//! residual and a shooting solver for radial ground states.

use crate::ode::{self, OdeConfig, OdeStop};
use crate::params::{CylinderParams, ParamError, ProblemParams, ValidatedParams};
use crate::quadrature::{integrate_half_line_graded, Estimate, QuadError, QuadratureConfig};
use crate::real::{lit, Real};
use crate::special::sphere_area;
use crate::symmetry::{classify, RegionKind};
use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum RadialError {
    #[error("integral does not converge: {0}")]
    NonConvergent(String),
    #[error("quadrature tolerance not met: {0}")]
    ToleranceNotMet(String),
    #[error("parameters are not in the symmetry region (label {0:?})")]
    NotInSymmetryRegion(RegionKind),
    #[error("dual-route constants disagree: direct {direct:.12e}, via K {via_k:.12e}, relative {discrepancy:.3e}")]
    CrossCheckFailed { direct: f64, via_k: f64, discrepancy: f64 },
    #[error("scaling fit failed: residual floor {residual:.3e}")]
    FitFailed { residual: f64 },
    #[error("integration blew up: {0}")]
    BlowUp(String),
    #[error("no decaying solution bracketed: {0}")]
    ExtinctionBeforeTail(String),
    #[error("window too narrow: {count} samples (need at least 10)")]
    WindowTooNarrow { count: usize },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error(transparent)]
    Params(#[from] ParamError),
}

impl From<QuadError> for RadialError {
    fn from(e: QuadError) -> Self {
        match e {
            QuadError::NonConvergent(s) => RadialError::NonConvergent(s),
            other => RadialError::ToleranceNotMet(other.to_string()),
        }
    }
}

/// Power-law exponents of a profile and of its derivative at both ends,
/// `f ~ s^k`. `None` means unknown; the convergence test is then skipped.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Asymptotics<T> {
    pub origin: Option<T>,
    pub tail: Option<T>,
    pub derivative_origin: Option<T>,
    pub derivative_tail: Option<T>,
}

/// A radial function on (0, ∞).
pub trait Profile<T: Real>: Send + Sync {
    fn value(&self, s: T) -> T;
    fn derivative(&self, s: T) -> T;
    fn second_derivative(&self, s: T) -> T;
    fn asymptotics(&self) -> Asymptotics<T> {
        Asymptotics::default()
    }
    /// Sample abscissas for tabulated profiles.
    fn nodes(&self) -> Option<&[T]> {
        None
    }
}

/// Cubic Hermite interpolation in `t = ln s`, with power-law extension past
/// the last node and an optional even series `v0 + c2 s²` below the first.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampledProfile<T> {
    s: Vec<T>,
    ln_s: Vec<T>,
    v: Vec<T>,
    dv: Vec<T>,
    origin_series: Option<(T, T)>,
}

impl<T: Real> SampledProfile<T> {
    /// Abscissas must be positive and strictly increasing, values nonnegative.
    pub fn new(s: Vec<T>, v: Vec<T>, dv: Vec<T>) -> Result<Self, RadialError> {
        if s.len() < 3 || s.len() != v.len() || s.len() != dv.len() {
            return Err(RadialError::InvalidProfile("need at least 3 nodes with matching lengths".into()));
        }
        if !(s[0] > T::zero()) || s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(RadialError::InvalidProfile("abscissas must be positive and strictly increasing".into()));
        }
        if v.iter().any(|x| !(*x >= T::zero())) {
            return Err(RadialError::InvalidProfile("values must be nonnegative".into()));
        }
        let ln_s = s.iter().map(|x| x.ln()).collect();
        Ok(Self { s, ln_s, v, dv, origin_series: None })
    }

    /// Derivatives estimated by three-point differences in `ln s`.
    pub fn from_values(s: Vec<T>, v: Vec<T>) -> Result<Self, RadialError> {
        let n = s.len();
        if n < 3 || n != v.len() {
            return Err(RadialError::InvalidProfile("need at least 3 nodes with matching lengths".into()));
        }
        let t: Vec<T> = s.iter().map(|x| x.ln()).collect();
        let mut dv = vec![T::zero(); n];
        for i in 0..n {
            let (a, b, c) = if i == 0 { (0, 1, 2) } else if i == n - 1 { (n - 3, n - 2, n - 1) } else { (i - 1, i, i + 1) };
            // derivative of the quadratic through three nodes, evaluated at t_i
            let (ta, tb, tc, x) = (t[a], t[b], t[c], t[i]);
            let la = ((x - tb) + (x - tc)) / ((ta - tb) * (ta - tc));
            let lb = ((x - ta) + (x - tc)) / ((tb - ta) * (tb - tc));
            let lc = ((x - ta) + (x - tb)) / ((tc - ta) * (tc - tb));
            dv[i] = (la * v[a] + lb * v[b] + lc * v[c]) / s[i];
        }
        Self::new(s, v, dv)
    }

    pub fn with_origin_series(mut self, v0: T, c2: T) -> Self {
        self.origin_series = Some((v0, c2));
        self
    }

    pub fn abscissas(&self) -> &[T] {
        &self.s
    }
    pub fn values(&self) -> &[T] {
        &self.v
    }
    pub fn derivatives(&self) -> &[T] {
        &self.dv
    }

    fn log_slope(&self, i: usize) -> T {
        if self.v[i] > T::zero() {
            self.s[i] * self.dv[i] / self.v[i]
        } else {
            T::zero()
        }
    }

    /// (value, d/dt, d²/dt²) at t = ln s inside the node range.
    fn hermite(&self, s: T) -> (T, T, T) {
        let t = s.ln();
        let i = match self.ln_s.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.s.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.s.len() - 2),
        };
        let h = self.ln_s[i + 1] - self.ln_s[i];
        let x = (t - self.ln_s[i]) / h;
        let log = self.v[i] > T::zero() && self.v[i + 1] > T::zero();
        let (y0, y1, m0, m1) = if log {
            // interpolate ln v so that power-law stretches stay accurate
            (self.v[i].ln(), self.v[i + 1].ln(), self.log_slope(i) * h, self.log_slope(i + 1) * h)
        } else {
            (self.v[i], self.v[i + 1], self.s[i] * self.dv[i] * h, self.s[i + 1] * self.dv[i + 1] * h)
        };
        let two = lit::<T>(2.0);
        let three = lit::<T>(3.0);
        let x2 = x * x;
        let x3 = x2 * x;
        let h00 = two * x3 - three * x2 + T::one();
        let h10 = x3 - two * x2 + x;
        let h01 = -two * x3 + three * x2;
        let h11 = x3 - x2;
        let val = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
        let six = lit::<T>(6.0);
        let d00 = six * x2 - six * x;
        let d10 = three * x2 - lit::<T>(4.0) * x + T::one();
        let d11 = three * x2 - two * x;
        let dt = (d00 * y0 + d10 * m0 - d00 * y1 + d11 * m1) / h;
        let e00 = lit::<T>(12.0) * x - six;
        let e10 = six * x - lit::<T>(4.0);
        let e11 = six * x - two;
        let dtt = (e00 * y0 + e10 * m0 - e00 * y1 + e11 * m1) / (h * h);
        if log {
            let e = val.exp();
            (e, dt * e, (dtt + dt * dt) * e)
        } else {
            (val, dt, dtt)
        }
    }

    fn eval(&self, s: T) -> (T, T, T) {
        let last = self.s.len() - 1;
        if s < self.s[0] {
            if let Some((v0, c2)) = self.origin_series {
                return (v0 + c2 * s * s, lit::<T>(2.0) * c2 * s, lit::<T>(2.0) * c2);
            }
            let k = self.log_slope(0);
            let v = self.v[0] * (s / self.s[0]).powf(k);
            return (v, k * v / s, k * (k - T::one()) * v / (s * s));
        }
        if s > self.s[last] {
            let k = self.log_slope(last);
            let v = self.v[last] * (s / self.s[last]).powf(k);
            return (v, k * v / s, k * (k - T::one()) * v / (s * s));
        }
        let (v, vt, vtt) = self.hermite(s);
        (v, vt / s, (vtt - vt) / (s * s))
    }
}

impl<T: Real> Profile<T> for SampledProfile<T> {
    fn value(&self, s: T) -> T {
        self.eval(s).0
    }
    fn derivative(&self, s: T) -> T {
        self.eval(s).1
    }
    fn second_derivative(&self, s: T) -> T {
        self.eval(s).2
    }
    fn asymptotics(&self) -> Asymptotics<T> {
        let last = self.s.len() - 1;
        let kt = self.log_slope(last);
        let (ko, kdo) = if self.origin_series.is_some() { (T::zero(), T::one()) } else {
            let k = self.log_slope(0);
            (k, k - T::one())
        };
        Asymptotics { origin: Some(ko), tail: Some(kt), derivative_origin: Some(kdo), derivative_tail: Some(kt - T::one()) }
    }
    fn nodes(&self) -> Option<&[T]> {
        Some(&self.s)
    }
}

/// Closed-form and tabulated radial profiles.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum RadialProfile<T> {
    /// w⋆(r) = (1 + r^{2+β−γ})^{−1/(p−1)}
    AubinTalentiFlat { beta: T, gamma: T, p: T },
    /// v⋆(s) = (1 + s²)^{−1/(p−1)}
    AubinTalentiCyl { p: T },
    /// (a + b s²)^{−1/(1−m)}
    Barenblatt { a: T, b: T, m: T },
    Sampled(SampledProfile<T>),
    Constant(T),
    /// c s^k
    Power { coef: T, k: T },
    /// A f(λ s)
    Scaled { inner: Box<RadialProfile<T>>, amplitude: T, dilation: T },
}

/// (1 + s^e)^{−k} and its first two derivatives.
fn aubin_talenti<T: Real>(s: T, e: T, k: T) -> (T, T, T) {
    let se = s.powf(e);
    let base = T::one() + se;
    let v = base.powf(-k);
    let d = -k * e * se / s * v / base;
    let dd = -k * e * (e - T::one()) * se / (s * s) * v / base
        + k * (k + T::one()) * e * e * se * se / (s * s) * v / (base * base);
    (v, d, dd)
}

impl<T: Real> RadialProfile<T> {
    pub fn w_star(params: &ValidatedParams<T>) -> Self {
        RadialProfile::AubinTalentiFlat { beta: params.beta(), gamma: params.gamma(), p: params.p() }
    }

    pub fn v_star(p: T) -> Self {
        RadialProfile::AubinTalentiCyl { p }
    }

    pub fn scaled(self, amplitude: T, dilation: T) -> Self {
        RadialProfile::Scaled { inner: Box::new(self), amplitude, dilation }
    }

    fn eval(&self, s: T) -> (T, T, T) {
        let one = T::one();
        match self {
            RadialProfile::AubinTalentiFlat { beta, gamma, p } => {
                aubin_talenti(s, lit::<T>(2.0) + *beta - *gamma, one / (*p - one))
            }
            RadialProfile::AubinTalentiCyl { p } => aubin_talenti(s, lit(2.0), one / (*p - one)),
            RadialProfile::Barenblatt { a, b, m } => {
                let nu = one / (one - *m);
                let base = *a + *b * s * s;
                let v = base.powf(-nu);
                let two = lit::<T>(2.0);
                let d = -nu * two * *b * s * v / base;
                let dd = -nu * two * *b * v / base + lit::<T>(4.0) * nu * (nu + one) * *b * *b * s * s * v / (base * base);
                (v, d, dd)
            }
            RadialProfile::Sampled(sp) => sp.eval(s),
            RadialProfile::Constant(c) => (*c, T::zero(), T::zero()),
            RadialProfile::Power { coef, k } => {
                let v = *coef * s.powf(*k);
                (v, *k * v / s, *k * (*k - one) * v / (s * s))
            }
            RadialProfile::Scaled { inner, amplitude, dilation } => {
                let (v, d, dd) = inner.eval(*dilation * s);
                (*amplitude * v, *amplitude * *dilation * d, *amplitude * *dilation * *dilation * dd)
            }
        }
    }
}

impl<T: Real> Profile<T> for RadialProfile<T> {
    fn value(&self, s: T) -> T {
        self.eval(s).0
    }
    fn derivative(&self, s: T) -> T {
        self.eval(s).1
    }
    fn second_derivative(&self, s: T) -> T {
        self.eval(s).2
    }
    fn asymptotics(&self) -> Asymptotics<T> {
        let one = T::one();
        let z = T::zero();
        match self {
            RadialProfile::AubinTalentiFlat { beta, gamma, p } => {
                let e = lit::<T>(2.0) + *beta - *gamma;
                let k = e / (*p - one);
                Asymptotics { origin: Some(z), tail: Some(-k), derivative_origin: Some(e - one), derivative_tail: Some(-k - one) }
            }
            RadialProfile::AubinTalentiCyl { p } => {
                let k = lit::<T>(2.0) / (*p - one);
                Asymptotics { origin: Some(z), tail: Some(-k), derivative_origin: Some(one), derivative_tail: Some(-k - one) }
            }
            RadialProfile::Barenblatt { m, .. } => {
                let k = lit::<T>(2.0) / (one - *m);
                Asymptotics { origin: Some(z), tail: Some(-k), derivative_origin: Some(one), derivative_tail: Some(-k - one) }
            }
            RadialProfile::Sampled(sp) => sp.asymptotics(),
            RadialProfile::Constant(_) => Asymptotics { origin: Some(z), tail: Some(z), derivative_origin: None, derivative_tail: None },
            RadialProfile::Power { k, .. } => {
                Asymptotics { origin: Some(*k), tail: Some(*k), derivative_origin: Some(*k - one), derivative_tail: Some(*k - one) }
            }
            RadialProfile::Scaled { inner, .. } => inner.asymptotics(),
        }
    }
    fn nodes(&self) -> Option<&[T]> {
        match self {
            RadialProfile::Sampled(sp) => Some(sp.abscissas()),
            _ => None,
        }
    }
}

/// The flat function w(r) = v(r^α) of a cylinder profile v.
pub struct FlatView<'a, T, P: ?Sized> {
    pub inner: &'a P,
    pub alpha: T,
}

impl<T: Real, P: Profile<T> + ?Sized> Profile<T> for FlatView<'_, T, P> {
    fn value(&self, r: T) -> T {
        self.inner.value(r.powf(self.alpha))
    }
    fn derivative(&self, r: T) -> T {
        let s = r.powf(self.alpha);
        self.alpha * s / r * self.inner.derivative(s)
    }
    fn second_derivative(&self, r: T) -> T {
        let a = self.alpha;
        let s = r.powf(a);
        a * (a - T::one()) * s / (r * r) * self.inner.derivative(s) + a * a * s * s / (r * r) * self.inner.second_derivative(s)
    }
    fn asymptotics(&self) -> Asymptotics<T> {
        let a = self.alpha;
        let one = T::one();
        let inner = self.inner.asymptotics();
        Asymptotics {
            origin: inner.origin.map(|k| a * k),
            tail: inner.tail.map(|k| a * k),
            derivative_origin: inner.derivative_origin.map(|k| a * (k + one) - one),
            derivative_tail: inner.derivative_tail.map(|k| a * (k + one) - one),
        }
    }
}

/// Norm integrals are scale-free, so only the relative tolerance applies.
fn relative_only<T: Real>(cfg: &QuadratureConfig<T>) -> QuadratureConfig<T> {
    QuadratureConfig { abs_tol: T::min_positive_value(), ..*cfg }
}

fn check_power<T: Real>(origin: Option<T>, tail: Option<T>, what: &str) -> Result<(), RadialError> {
    let minus_one = -T::one();
    if let Some(k) = origin {
        if !(k > minus_one) {
            return Err(RadialError::NonConvergent(format!("{what}: integrand ~ r^{k} at 0")));
        }
    }
    if let Some(k) = tail {
        if !(k < minus_one) {
            return Err(RadialError::NonConvergent(format!("{what}: integrand ~ r^{k} at infinity")));
        }
    }
    Ok(())
}

/// |S^{d−1}| ∫₀^∞ |f(r)|^q r^{d−1−w} dr.
pub fn weighted_integral<T: Real, P: Profile<T> + ?Sized>(
    profile: &P,
    q: T,
    weight_exponent: T,
    d: u32,
    cfg: &QuadratureConfig<T>,
) -> Result<Estimate<T>, RadialError> {
    let e = T::from_u32(d).expect("dimension") - T::one() - weight_exponent;
    let a = profile.asymptotics();
    let (origin, tail) = (a.origin.map(|k| q * k + e), a.tail.map(|k| q * k + e));
    check_power(origin, tail, "weighted norm")?;
    let est = integrate_half_line_graded(|r: T| {
        let v = profile.value(r).abs();
        if v == T::zero() { T::zero() } else { (q * v.ln() + e * r.ln()).exp() }
    }, origin, tail, &relative_only(cfg))?;
    let area = sphere_area::<T>(d);
    Ok(Estimate { value: area * est.value, error: area * est.error, evaluations: est.evaluations })
}

/// (|S^{d−1}| ∫₀^∞ |f(r)|^q r^{d−1−w} dr)^{1/q}.
pub fn weighted_norm<T: Real, P: Profile<T> + ?Sized>(
    profile: &P,
    q: T,
    weight_exponent: T,
    d: u32,
    cfg: &QuadratureConfig<T>,
) -> Result<T, RadialError> {
    Ok(weighted_integral(profile, q, weight_exponent, d, cfg)?.value.powf(T::one() / q))
}

/// (|S^{d−1}| ∫₀^∞ α² |f′(r)|² r^{d−1−w} dr)^{1/2}. With `alpha = 1` and
/// `w = β` this is the flat seminorm ‖∇w‖_{2,β}; with `w = d − n` it is the
/// cylinder seminorm ‖𝖣_α v‖_{2,d−n} of a radial `v`.
pub fn gradient_seminorm<T: Real, P: Profile<T> + ?Sized>(
    profile: &P,
    weight_exponent: T,
    d: u32,
    alpha: T,
    cfg: &QuadratureConfig<T>,
) -> Result<T, RadialError> {
    let e = T::from_u32(d).expect("dimension") - T::one() - weight_exponent;
    let two = lit::<T>(2.0);
    let a = profile.asymptotics();
    let (origin, tail) = (a.derivative_origin.map(|k| two * k + e), a.derivative_tail.map(|k| two * k + e));
    check_power(origin, tail, "gradient seminorm")?;
    let est = integrate_half_line_graded(|r: T| {
        let g = profile.derivative(r);
        if g == T::zero() { T::zero() } else { (two * g.abs().ln() + e * r.ln()).exp() }
    }, origin, tail, &relative_only(cfg))?;
    Ok(alpha * (sphere_area::<T>(d) * est.value).sqrt())
}

fn d_minus_n<T: Real>(cyl: &CylinderParams<T>) -> T {
    T::from_u32(cyl.d()).expect("dimension") - cyl.n()
}

/// The three norms entering the cylinder quotient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CylinderNorms<T> {
    pub norm_2p: T,
    pub gradient: T,
    /// absent at p = p⋆, where its exponent 1 − ϑ vanishes
    pub norm_p1: Option<T>,
    pub theta: T,
}

pub fn cylinder_norms<T: Real, P: Profile<T> + ?Sized>(
    profile: &P,
    cyl: &CylinderParams<T>,
    cfg: &QuadratureConfig<T>,
) -> Result<CylinderNorms<T>, RadialError> {
    let w = d_minus_n(cyl);
    let p = cyl.p();
    let e = cyl.exponents();
    let norm_2p = weighted_norm(profile, lit::<T>(2.0) * p, w, cyl.d(), cfg)?;
    let gradient = gradient_seminorm(profile, w, cyl.d(), cyl.alpha(), cfg)?;
    let norm_p1 = if e.theta < T::one() { Some(weighted_norm(profile, p + T::one(), w, cyl.d(), cfg)?) } else { None };
    Ok(CylinderNorms { norm_2p, gradient, norm_p1, theta: e.theta })
}

impl<T: Real> CylinderNorms<T> {
    /// ‖v‖_{2p} / (‖𝖣_α v‖₂^ϑ ‖v‖_{p+1}^{1−ϑ})
    pub fn quotient(&self) -> T {
        let lower = self.gradient.powf(self.theta) * self.norm_p1.map_or(T::one(), |x| x.powf(T::one() - self.theta));
        self.norm_2p / lower
    }
}

/// The three-norm quotient in flat variables.
pub fn quotient_flat<T: Real, P: Profile<T> + ?Sized>(
    profile: &P,
    params: &ValidatedParams<T>,
    cfg: &QuadratureConfig<T>,
) -> Result<T, RadialError> {
    let (d, p) = (params.d(), params.p());
    let theta = params.exponents().theta;
    let n2p = weighted_norm(profile, lit::<T>(2.0) * p, params.gamma(), d, cfg)?;
    let grad = gradient_seminorm(profile, params.beta(), d, T::one(), cfg)?;
    let lower = if theta < T::one() {
        grad.powf(theta) * weighted_norm(profile, p + T::one(), params.gamma(), d, cfg)?.powf(T::one() - theta)
    } else {
        grad
    };
    Ok(n2p / lower)
}

/// A constant obtained from the radial profile; `lower_bound_only` marks
/// points outside the symmetry region, where the radial value only bounds
/// the optimal constant from below.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RadialConstant<T> {
    pub value: T,
    pub lower_bound_only: bool,
}

fn region_of<T: Real>(params: &ValidatedParams<T>) -> RegionKind {
    classify(&params.raw()).kind
}

fn symmetry_gate(kind: RegionKind, allow_lower_bound: bool) -> Result<bool, RadialError> {
    match kind {
        RegionKind::Symmetry | RegionKind::OnCurve => Ok(false),
        other if allow_lower_bound => {
            let _ = other;
            Ok(true)
        }
        other => Err(RadialError::NotInSymmetryRegion(other)),
    }
}

/// 𝖪_{α,n,p} from v⋆.
pub fn optimal_constant_cyl<T: Real>(
    cyl: &CylinderParams<T>,
    cfg: &QuadratureConfig<T>,
    allow_lower_bound: bool,
) -> Result<RadialConstant<T>, RadialError> {
    let flat = cyl.to_flat()?;
    let lower_bound_only = symmetry_gate(region_of(&flat), allow_lower_bound)?;
    let value = cylinder_norms(&RadialProfile::v_star(cyl.p()), cyl, cfg)?.quotient();
    Ok(RadialConstant { value, lower_bound_only })
}

/// Both routes to 𝖢_{β,γ,p}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstantReport<T> {
    pub params: ProblemParams<T>,
    pub alpha: T,
    pub n: T,
    pub theta: T,
    pub zeta: T,
    #[serde(rename = "K")]
    pub k: T,
    #[serde(rename = "C")]
    pub c: T,
    pub c_via_k: T,
    pub route_discrepancy: T,
    pub lower_bound_only: bool,
}

/// Relative disagreement allowed between the two routes.
pub const CROSS_CHECK_TOL: f64 = 1e-6;

/// 𝖢 directly from w⋆ and as α^ζ 𝖪.
pub fn optimal_constant_flat<T: Real>(
    params: &ValidatedParams<T>,
    cfg: &QuadratureConfig<T>,
    allow_lower_bound: bool,
) -> Result<ConstantReport<T>, RadialError> {
    let lower_bound_only = symmetry_gate(region_of(params), allow_lower_bound)?;
    let cyl = params.to_cylinder();
    let e = params.exponents();
    let k = optimal_constant_cyl(&cyl, cfg, true)?.value;
    let c = quotient_flat(&RadialProfile::w_star(params), params, cfg)?;
    let c_via_k = cyl.alpha().powf(e.zeta) * k;
    let route_discrepancy = ((c - c_via_k) / c).abs();
    if route_discrepancy > lit(CROSS_CHECK_TOL) {
        return Err(RadialError::CrossCheckFailed {
            direct: c.to_f64_lossy(),
            via_k: c_via_k.to_f64_lossy(),
            discrepancy: route_discrepancy.to_f64_lossy(),
        });
    }
    Ok(ConstantReport {
        params: params.raw(),
        alpha: cyl.alpha(),
        n: cyl.n(),
        theta: e.theta,
        zeta: e.zeta,
        k,
        c,
        c_via_k,
        route_discrepancy,
        lower_bound_only,
    })
}

/// 𝒥 = ϑ log‖𝖣_α v‖ + (1−ϑ) log‖v‖_{p+1} + log 𝖪 − log‖v‖_{2p}.
pub fn deficit_from_norms<T: Real>(norms: &CylinderNorms<T>, k: T) -> T {
    let t = norms.theta;
    t * norms.gradient.ln() + norms.norm_p1.map_or(T::zero(), |x| (T::one() - t) * x.ln()) + k.ln() - norms.norm_2p.ln()
}

pub fn deficit<T: Real, P: Profile<T> + ?Sized>(
    profile: &P,
    cyl: &CylinderParams<T>,
    k: T,
    cfg: &QuadratureConfig<T>,
) -> Result<T, RadialError> {
    Ok(deficit_from_norms(&cylinder_norms(profile, cyl, cfg)?, k))
}

/// Log-spaced evaluation grid for the Euler-Lagrange residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualGrid<T> {
    pub r_min: T,
    pub r_max: T,
    pub points: usize,
}

impl<T: Real> Default for ResidualGrid<T> {
    fn default() -> Self {
        Self { r_min: lit(1e-3), r_max: lit(1e3), points: 241 }
    }
}

impl<T: Real> ResidualGrid<T> {
    pub fn radii(&self) -> Vec<T> {
        let (a, b) = (self.r_min.ln(), self.r_max.ln());
        let m = T::from_usize_lossy(self.points - 1);
        (0..self.points).map(|i| (a + (b - a) * T::from_usize_lossy(i) / m).exp()).collect()
    }
}

/// (lhs, rhs) of −r^{−β}(W″ + (d−1−β)W′/r) = r^{−γ}(W^{2p−1} − W^p) for W = A f(λ r).
fn el_sides<T: Real, P: Profile<T> + ?Sized>(profile: &P, params: &ValidatedParams<T>, a: T, lam: T, r: T) -> (T, T) {
    let d = T::from_u32(params.d()).expect("dimension");
    let (b, g, p) = (params.beta(), params.gamma(), params.p());
    let x = lam * r;
    let w = a * profile.value(x);
    let w1 = a * lam * profile.derivative(x);
    let w2 = a * lam * lam * profile.second_derivative(x);
    let lhs = -r.powf(-b) * (w2 + (d - T::one() - b) * w1 / r);
    let wa = w.abs();
    let rhs = r.powf(-g) * (wa.powf(lit::<T>(2.0) * p - T::one()) - wa.powf(p));
    (lhs, rhs)
}

/// Sup-norm residual of the radial Euler-Lagrange equation for `A f(λ ·)`.
pub fn el_residual<T: Real, P: Profile<T> + ?Sized>(
    profile: &P,
    params: &ValidatedParams<T>,
    amplitude: T,
    dilation: T,
    grid: &ResidualGrid<T>,
) -> T {
    grid.radii()
        .into_iter()
        .map(|r| {
            let (l, rr) = el_sides(profile, params, amplitude, dilation, r);
            (l - rr).abs()
        })
        .fold(T::zero(), T::max)
}

fn scaled_residuals<T: Real, P: Profile<T> + ?Sized>(
    profile: &P,
    params: &ValidatedParams<T>,
    radii: &[T],
    la: T,
    ll: T,
) -> Vec<T> {
    let (a, lam) = (la.exp(), ll.exp());
    radii
        .iter()
        .map(|&r| {
            let (l, rr) = el_sides(profile, params, a, lam, r);
            let scale = l.abs() + rr.abs();
            if scale > T::min_positive_value() { (l - rr) / scale } else { T::zero() }
        })
        .collect()
}

fn sum_sq<T: Real>(v: &[T]) -> T {
    v.iter().map(|x| *x * *x).sum()
}

/// Nelder-Mead on a function of two variables.
fn nelder_mead<T: Real, F: Fn(T, T) -> T>(f: F, x0: (T, T), step: T, iters: usize) -> (T, T) {
    let mut pts = [x0, (x0.0 + step, x0.1), (x0.0, x0.1 + step)];
    let mut vals = pts.map(|(a, b)| f(a, b));
    let half = lit::<T>(0.5);
    for _ in 0..iters {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap_or(std::cmp::Ordering::Equal));
        pts = idx.map(|i| pts[i]);
        vals = idx.map(|i| vals[i]);
        let spread = (pts[2].0 - pts[0].0).abs().max((pts[2].1 - pts[0].1).abs());
        if spread < lit(1e-13) {
            break;
        }
        let c = ((pts[0].0 + pts[1].0) * half, (pts[0].1 + pts[1].1) * half);
        let at = |t: T| (c.0 + t * (pts[2].0 - c.0), c.1 + t * (pts[2].1 - c.1));
        let xr = at(-T::one());
        let fr = f(xr.0, xr.1);
        if fr < vals[0] {
            let xe = at(lit(-2.0));
            let fe = f(xe.0, xe.1);
            if fe < fr {
                pts[2] = xe;
                vals[2] = fe;
            } else {
                pts[2] = xr;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            pts[2] = xr;
            vals[2] = fr;
        } else {
            let xc = if fr < vals[2] { at(-half) } else { at(half) };
            let fc = f(xc.0, xc.1);
            if fc < vals[2].min(fr) {
                pts[2] = xc;
                vals[2] = fc;
            } else {
                for i in 1..3 {
                    pts[i] = ((pts[i].0 + pts[0].0) * half, (pts[i].1 + pts[0].1) * half);
                    vals[i] = f(pts[i].0, pts[i].1);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap_or(std::cmp::Ordering::Equal)).unwrap();
    pts[best]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingFit<T> {
    pub amplitude: T,
    pub dilation: T,
    /// sup-norm residual of the fitted profile
    pub residual: T,
}

/// Residual floor above which a fit is reported as failed.
pub const FIT_FAIL_TOL: f64 = 1e-6;

/// Fits `A f(λ ·)` to the Euler-Lagrange equation: Nelder-Mead in
/// `(ln A, ln λ)` from `(0, 0)`, then Levenberg-Marquardt on the relative
/// residual vector.
pub fn fit_scaling_profile<T: Real, P: Profile<T> + ?Sized>(
    profile: &P,
    params: &ValidatedParams<T>,
    grid: &ResidualGrid<T>,
) -> Result<ScalingFit<T>, RadialError> {
    let radii = grid.radii();
    let obj = |la: T, ll: T| {
        let v = sum_sq(&scaled_residuals(profile, params, &radii, la, ll));
        if v.is_finite() { v } else { T::max_value() }
    };
    let mut x = nelder_mead(&obj, (T::zero(), T::zero()), lit(0.5), 2000);
    // Levenberg-Marquardt polish with a forward-difference Jacobian
    let mut mu = lit::<T>(1e-3);
    let h = lit::<T>(1e-7);
    let mut r = scaled_residuals(profile, params, &radii, x.0, x.1);
    let mut cost = sum_sq(&r);
    for _ in 0..100 {
        let ra = scaled_residuals(profile, params, &radii, x.0 + h, x.1);
        let rl = scaled_residuals(profile, params, &radii, x.0, x.1 + h);
        let (mut j11, mut j12, mut j22, mut g1, mut g2) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
        for i in 0..r.len() {
            let ja = (ra[i] - r[i]) / h;
            let jl = (rl[i] - r[i]) / h;
            j11 = j11 + ja * ja;
            j12 = j12 + ja * jl;
            j22 = j22 + jl * jl;
            g1 = g1 + ja * r[i];
            g2 = g2 + jl * r[i];
        }
        let mut improved = false;
        for _ in 0..30 {
            let a11 = j11 * (T::one() + mu);
            let a22 = j22 * (T::one() + mu);
            let det = a11 * a22 - j12 * j12;
            if det == T::zero() || !det.is_finite() {
                mu = mu * lit(10.0);
                continue;
            }
            let dx = -(a22 * g1 - j12 * g2) / det;
            let dy = -(a11 * g2 - j12 * g1) / det;
            let rn = scaled_residuals(profile, params, &radii, x.0 + dx, x.1 + dy);
            let cn = sum_sq(&rn);
            if cn.is_finite() && cn < cost {
                x = (x.0 + dx, x.1 + dy);
                r = rn;
                let rel = (cost - cn) / cost;
                cost = cn;
                mu = (mu * lit(0.3)).max(lit(1e-12));
                improved = rel > lit(1e-6);
                break;
            }
            mu = mu * lit(10.0);
        }
        if !improved {
            break;
        }
    }
    let (amplitude, dilation) = (x.0.exp(), x.1.exp());
    let residual = el_residual(profile, params, amplitude, dilation, grid);
    if !(residual <= lit(FIT_FAIL_TOL)) {
        return Err(RadialError::FitFailed { residual: residual.to_f64_lossy() });
    }
    Ok(ScalingFit { amplitude, dilation, residual })
}

/// Fits `A w⋆(λ ·)`.
pub fn fit_scaling<T: Real>(params: &ValidatedParams<T>, grid: &ResidualGrid<T>) -> Result<ScalingFit<T>, RadialError> {
    fit_scaling_profile(&RadialProfile::w_star(params), params, grid)
}

/// Least-squares slope of ln f against ln s over `window`. Tabulated
/// profiles use their own nodes, closed forms 64 log-spaced points.
pub fn decay_exponent_fit<T: Real, P: Profile<T> + ?Sized>(profile: &P, window: (T, T)) -> Result<T, RadialError> {
    let (lo, hi) = window;
    let xs: Vec<T> = match profile.nodes() {
        Some(nodes) => nodes.iter().copied().filter(|s| *s >= lo && *s <= hi).collect(),
        None => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..64).map(|i| (a + (b - a) * T::from_usize_lossy(i) / lit(63.0)).exp()).collect()
        }
    };
    if xs.len() < 10 || !(hi > lo) {
        return Err(RadialError::WindowTooNarrow { count: xs.len() });
    }
    let pts: Vec<(T, T)> = xs.iter().map(|&s| (s.ln(), profile.value(s).ln())).collect();
    if pts.iter().any(|(_, y)| !y.is_finite()) {
        return Err(RadialError::InvalidProfile("profile not positive on the window".into()));
    }
    Ok(least_squares_slope(&pts))
}

pub(crate) fn least_squares_slope<T: Real>(pts: &[(T, T)]) -> T {
    let n = T::from_usize_lossy(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: T = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShootingConfig<T> {
    /// series start radius
    pub s0: T,
    /// nodes per unit of ln s in the output
    pub nodes_per_unit: usize,
    /// output extent as a multiple of the half-height radius
    pub extent: T,
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_bisections: usize,
}

impl<T: Real> Default for ShootingConfig<T> {
    fn default() -> Self {
        Self {
            s0: lit(1e-4),
            nodes_per_unit: 64,
            extent: lit(1e3),
            rel_tol: lit(1e-12),
            abs_tol: lit(1e-30),
            max_bisections: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShootingResult<T> {
    /// profile in the cylinder variable s
    pub profile: SampledProfile<T>,
    pub v0: T,
    /// radius where the outward solution is handed over to the inward one
    pub s_match: T,
    /// relative jump of s v′ at the matching radius
    pub derivative_mismatch: T,
    pub bisections: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Outcome {
    Overshoot,
    Undershoot,
    Undecided,
}

struct RadialOde<T> {
    alpha2: T,
    n: T,
    p: T,
}

impl<T: Real> RadialOde<T> {
    /// odd extension of v^{2p−1} − v^p
    fn f(&self, v: T) -> T {
        let a = v.abs();
        let val = a.powf(lit::<T>(2.0) * self.p - T::one()) - a.powf(self.p);
        if v < T::zero() { -val } else { val }
    }

    /// y = (v, s v′) as functions of t = ln s
    fn rhs(&self, t: T, y: &[T; 2]) -> [T; 2] {
        let s2 = (lit::<T>(2.0) * t).exp();
        [y[1], -(self.n - lit(2.0)) * y[1] - s2 * self.f(y[0]) / self.alpha2]
    }

    fn start(&self, v0: T, s0: T) -> [T; 2] {
        let c2 = -self.f(v0) / (lit::<T>(2.0) * self.n * self.alpha2);
        [v0 + c2 * s0 * s0, lit::<T>(2.0) * c2 * s0 * s0]
    }
}

/// Shoots the cylinder ODE α²(v″ + (n−1)v′/s) + v^{2p−1} − v^p = 0 from
/// the regular origin and bisects on v(0) for the positive decaying solution.
///
/// Outward integration is unstable in the tail, so past the radius where the
/// bracketing trajectories separate the profile is continued by integrating
/// inward from the power-law tail v ~ C s^{−2/(p−1)} and matching v.
pub fn shoot_radial<T: Real>(
    cyl: &CylinderParams<T>,
    v0_guess: T,
    cfg: &ShootingConfig<T>,
) -> Result<ShootingResult<T>, RadialError> {
    if !(v0_guess > T::zero()) {
        return Err(RadialError::InvalidProfile("v0 must be positive".into()));
    }
    if cyl.is_critical() {
        return Err(RadialError::ExtinctionBeforeTail("no decaying positive solution at p = p_star".into()));
    }
    let ode = RadialOde { alpha2: cyl.alpha() * cyl.alpha(), n: cyl.n(), p: cyl.p() };
    let ocfg = OdeConfig { rel_tol: cfg.rel_tol, abs_tol: cfg.abs_tol, max_steps: 2_000_000 };
    let t0 = cfg.s0.ln();
    let t_probe = lit::<T>(1e8).ln();
    let rhs = |t: T, y: &[T; 2]| ode.rhs(t, y);
    let classify_v0 = |v0: T| -> Result<Outcome, RadialError> {
        let mut h = T::zero();
        let stop = |_t: T, y: &[T; 2]| y[0] < T::zero() || y[1] > T::zero();
        let (_, y, st) = ode::integrate(&rhs, t0, ode.start(v0, cfg.s0), t_probe, &mut h, &ocfg, &stop);
        match st {
            OdeStop::Event if y[0] < T::zero() => Ok(Outcome::Overshoot),
            OdeStop::Event => Ok(Outcome::Undershoot),
            OdeStop::Reached => Ok(Outcome::Undecided),
            OdeStop::NonFinite | OdeStop::StepLimit => Err(RadialError::BlowUp(format!("outward integration failed at v0 = {v0}"))),
        }
    };

    // bracket
    let two = lit::<T>(2.0);
    // v ≡ 1 solves the equation and any v0 ≤ 1 undershoots, so start above 1
    let start = if v0_guess > T::one() { v0_guess } else { two };
    let (mut lo, mut hi) = (start, start);
    let first = classify_v0(start)?;
    let mut found = false;
    for _ in 0..80 {
        if found {
            break;
        }
        match first {
            Outcome::Overshoot => {
                lo = lo / two;
                match classify_v0(lo)? {
                    Outcome::Overshoot => hi = lo,
                    _ => found = true,
                }
            }
            _ => {
                hi = hi * two;
                match classify_v0(hi)? {
                    Outcome::Overshoot => found = true,
                    _ => lo = hi,
                }
            }
        }
    }
    if !found {
        return Err(RadialError::ExtinctionBeforeTail(format!("no sign change bracketed from v0 = {v0_guess}")));
    }
    let mut bisections = 0;
    while bisections < cfg.max_bisections && hi - lo > lit::<T>(4.0) * T::epsilon() * hi {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        bisections += 1;
        match classify_v0(mid)? {
            Outcome::Overshoot => hi = mid,
            Outcome::Undershoot => lo = mid,
            Outcome::Undecided => {
                lo = mid;
                hi = mid;
            }
        }
    }

    // tabulate both bracket trajectories on the output grid
    let dt = T::one() / T::from_usize_lossy(cfg.nodes_per_unit);
    let trace = |v0: T, t_end: T| -> Vec<[T; 2]> {
        let mut out = vec![ode.start(v0, cfg.s0)];
        let mut y = out[0];
        let mut t = t0;
        let mut h = T::zero();
        let nsteps = ((t_end - t0) / dt).ceil().to_usize().unwrap_or(0);
        for j in 1..=nsteps {
            let tn = t0 + dt * T::from_usize_lossy(j);
            let (_, yn, st) = ode::integrate(&rhs, t, y, tn, &mut h, &ocfg, &|_, y: &[T; 2]| y[0] < T::zero() || y[1] > T::zero());
            if st != OdeStop::Reached {
                break;
            }
            out.push(yn);
            y = yn;
            t = tn;
        }
        out
    };
    let lo_trace = trace(lo, t_probe.min(lit::<T>(30.0)));
    let hi_trace = trace(hi, t_probe.min(lit::<T>(30.0)));
    let v0 = (lo + hi) / two;
    let half_idx = lo_trace.iter().position(|y| y[0] <= v0 / two).ok_or_else(|| {
        RadialError::ExtinctionBeforeTail("solution never drops to half height".into())
    })?;
    let t_half = t0 + dt * T::from_usize_lossy(half_idx);
    let t_end = t_half + cfg.extent.ln();
    let n_nodes = ((t_end - t0) / dt).ceil().to_usize().unwrap_or(0) + 1;
    let sep_tol = lit::<T>(1e-10);
    let mut m = 0;
    while m + 1 < lo_trace.len().min(hi_trace.len()).min(n_nodes) {
        let (a, b) = (lo_trace[m + 1], hi_trace[m + 1]);
        let mid = (a[0] + b[0]) / two;
        if !(mid > T::zero()) || (a[0] - b[0]).abs() > sep_tol * mid || a[1] > T::zero() || b[1] > T::zero() {
            break;
        }
        m += 1;
    }
    let mut nodes: Vec<[T; 2]> = (0..=m).map(|j| {
        let (a, b) = (lo_trace[j], hi_trace[j]);
        [(a[0] + b[0]) / two, (a[1] + b[1]) / two]
    }).collect();
    let t_m = t0 + dt * T::from_usize_lossy(m);
    let mut derivative_mismatch = T::zero();

    if m + 1 < n_nodes {
        // inward continuation from the tail
        let one = T::one();
        let (n, p, a2) = (cyl.n(), cyl.p(), ode.alpha2);
        let k = two / (p - one);
        let c_tail = (a2 * k * (k + two - n)).powf(one / (p - one));
        let b = n - two - two * k;
        let c = k * k - (n - two) * k - p * k * (k + two - n);
        let disc = (b * b - lit::<T>(4.0) * c).sqrt();
        let lam1 = (-b + disc) / two;
        let lam2 = (-b - disc) / two;
        let t_far = t_end + (lit::<T>(30.0) / lam1).max(one);
        let target = nodes[m];
        // tail values are far below any fixed absolute tolerance
        let icfg = OdeConfig { abs_tol: T::min_positive_value(), ..ocfg };
        let run = |amp: T, record: bool| -> Result<([T; 2], Vec<[T; 2]>), RadialError> {
            let s_far = t_far.exp();
            let base = c_tail * s_far.powf(-k);
            let mut y = [base * (one + amp), base * (-k * (one + amp) + amp * lam2)];
            let mut t = t_far;
            let mut h = T::zero();
            let mut rec = Vec::new();
            // walk down to t_end first, then node by node to t_m
            let (_, y1, st) = ode::integrate(&rhs, t, y, t_end, &mut h, &icfg, &|_, _| false);
            if st != OdeStop::Reached {
                return Err(RadialError::BlowUp("inward integration failed".into()));
            }
            y = y1;
            t = t_end;
            if record {
                rec.push(y);
            }
            let last = n_nodes - 1;
            for j in (m..last).rev() {
                let tn = t0 + dt * T::from_usize_lossy(j);
                let (_, yn, st) = ode::integrate(&rhs, t, y, tn, &mut h, &icfg, &|_, _| false);
                if st != OdeStop::Reached {
                    return Err(RadialError::BlowUp("inward integration failed".into()));
                }
                y = yn;
                t = tn;
                if record {
                    rec.push(y);
                }
            }
            // the grid end may not be a whole number of steps from t_m
            let _ = t_end;
            Ok((y, rec))
        };
        let psi_m = target[0] / (c_tail * (t_m * -k).exp()) - one;
        let mut a_prev = psi_m * ((t_m - t_far) * -lam2).exp();
        let mut g_prev = run(a_prev, false)?.0[0] - target[0];
        let mut a_cur = a_prev * lit(1.01) + lit(1e-6);
        let mut g_cur = run(a_cur, false)?.0[0] - target[0];
        for _ in 0..60 {
            if g_cur.abs() <= lit::<T>(1e-14) * target[0] || g_cur == g_prev {
                break;
            }
            let a_next = a_cur - g_cur * (a_cur - a_prev) / (g_cur - g_prev);
            a_prev = a_cur;
            g_prev = g_cur;
            a_cur = a_next;
            g_cur = run(a_cur, false)?.0[0] - target[0];
        }
        let (ym, rec) = run(a_cur, true)?;
        derivative_mismatch = ((ym[1] - target[1]) / target[1]).abs();
        // rec holds nodes t_end (at index last) down to t_m; the t_end entry
        // sits on the grid only when t_end is a node, so rebuild on the grid
        let last = n_nodes - 1;
        let mut tail: Vec<[T; 2]> = rec[1..].iter().rev().copied().collect();
        // tail now covers nodes m..last-1 in increasing order; node m is the match
        tail.remove(0);
        nodes.extend(tail);
        let t_last = t0 + dt * T::from_usize_lossy(last);
        let mut h = T::zero();
        let (_, y_last, _) = ode::integrate(&rhs, t_end, rec[0], t_last, &mut h, &icfg, &|_, _| false);
        nodes.push(y_last);
    }

    let s: Vec<T> = (0..nodes.len()).map(|j| (t0 + dt * T::from_usize_lossy(j)).exp()).collect();
    let v: Vec<T> = nodes.iter().map(|y| y[0]).collect();
    let dv: Vec<T> = nodes.iter().zip(&s).map(|(y, s)| y[1] / *s).collect();
    let c2 = -ode.f(v0) / (two * ode.n * ode.alpha2);
    let profile = SampledProfile::new(s, v, dv)?.with_origin_series(v0, c2);
    Ok(ShootingResult { profile, v0, s_match: t_m.exp(), derivative_mismatch, bisections })
}

/// Closed-form ground state of the cylinder equation:
/// v = A (1 + μ² s²)^{−1/(p−1)} with A^{p−1} = 2p/(n − p(n−2)) and
/// μ² = p(p−1)² / (α²(n − p(n−2))²). Returns `None` at p = p⋆.
pub fn cylinder_ground_state<T: Real>(cyl: &CylinderParams<T>) -> Option<(T, T)> {
    let (n, p, a) = (cyl.n(), cyl.p(), cyl.alpha());
    let two = lit::<T>(2.0);
    let den = n - p * (n - two);
    if cyl.is_critical() || !(den > T::zero()) {
        return None;
    }
    let amp = (two * p / den).powf(T::one() / (p - T::one()));
    let mu = (p * (p - T::one()) * (p - T::one())).sqrt() / (a * den);
    Some((amp, mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ref_params() -> ValidatedParams<f64> {
        ProblemParams::new(4, 0.0, 1.0, 1.2).validate().unwrap()
    }

    #[test]
    fn beta_value_of_cylinder_norm() {
        let cfg = QuadratureConfig::default();
        let v = RadialProfile::v_star(1.5f64);
        let i = weighted_integral(&v, 3.0, 4.0 - 6.0, 4, &cfg).unwrap();
        let pi = std::f64::consts::PI;
        assert!((i.value - 2.0 * pi * pi / 60.0).abs() < 1e-12);
    }

    #[test]
    fn constant_profile_diverges() {
        let cfg = QuadratureConfig::default();
        let c = RadialProfile::Constant(1.0f64);
        assert!(matches!(weighted_norm(&c, 2.0, 0.0, 3, &cfg), Err(RadialError::NonConvergent(_))));
        assert_eq!(gradient_seminorm(&c, 0.0, 3, 1.0, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn sampled_reproduces_closed_form() {
        let v = RadialProfile::v_star(1.2f64);
        let s: Vec<f64> = (0..800).map(|i| (-6.0 + i as f64 * 0.02f64).exp()).collect();
        let vals = s.iter().map(|&x| v.value(x)).collect();
        let ders = s.iter().map(|&x| v.derivative(x)).collect();
        let sp = SampledProfile::new(s, vals, ders).unwrap();
        for &x in &[0.01, 0.3, 1.0, 7.5, 60.0] {
            assert!((sp.value(x) / v.value(x) - 1.0).abs() < 1e-9, "x={x}");
            assert!((sp.derivative(x) / v.derivative(x) - 1.0).abs() < 1e-6, "x={x}");
        }
        let sp2 = SampledProfile::from_values(sp.abscissas().to_vec(), sp.values().to_vec()).unwrap();
        assert!((sp2.value(1.01) / v.value(1.01) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn closed_form_ground_state_solves_the_equation() {
        let p = ref_params();
        let cyl = p.to_cylinder();
        let (a, mu) = cylinder_ground_state(&cyl).unwrap();
        assert!((a - 32.0).abs() < 1e-10);
        let lam = mu.powf(1.0 / cyl.alpha());
        let r = el_residual(&RadialProfile::w_star(&p), &p, a, lam, &ResidualGrid::default());
        assert!(r < 1e-8, "residual {r}");
    }

    #[test]
    fn fit_and_refit() {
        let p = ref_params();
        let fit = fit_scaling(&p, &ResidualGrid::default()).unwrap();
        assert!(fit.residual <= 1e-8, "{fit:?}");
        let (a, mu) = cylinder_ground_state(&p.to_cylinder()).unwrap();
        assert!((fit.amplitude / a - 1.0).abs() < 1e-9);
        assert!((fit.dilation / mu.powf(2.0) - 1.0).abs() < 1e-9);
        let refit = fit_scaling_profile(&RadialProfile::w_star(&p).scaled(fit.amplitude, fit.dilation), &p, &ResidualGrid::default()).unwrap();
        assert!((refit.amplitude - 1.0).abs() < 1e-9 && (refit.dilation - 1.0).abs() < 1e-9, "{refit:?}");
    }

    #[test]
    fn fit_fails_at_critical_exponent() {
        let p = ProblemParams::new(4, 0.0, 1.0, 1.5).validate().unwrap();
        assert!(matches!(fit_scaling(&p, &ResidualGrid::default()), Err(RadialError::FitFailed { .. })));
    }

    #[test]
    fn decay_fits() {
        let pw = RadialProfile::Power { coef: 3.0f64, k: -2.5 };
        assert!((decay_exponent_fit(&pw, (1.0, 10.0)).unwrap() + 2.5).abs() < 1e-12);
        let v = RadialProfile::v_star(1.2f64);
        let k = decay_exponent_fit(&v, (1e2, 1e3)).unwrap();
        assert!((k / -10.0 - 1.0).abs() < 5e-3);
    }

    #[test]
    fn shooting_matches_closed_form() {
        let p = ref_params();
        let cyl = p.to_cylinder();
        let res = shoot_radial(&cyl, 1.0, &ShootingConfig::default()).unwrap();
        let (a, mu) = cylinder_ground_state(&cyl).unwrap();
        assert!((res.v0 / a - 1.0).abs() < 1e-9, "v0 {}", res.v0);
        let exact = RadialProfile::v_star(1.2).scaled(a, mu);
        let mut worst: f64 = 0.0;
        for i in 0..=400 {
            let r = 10f64.powf(-2.0 + i as f64 * 0.01);
            let s = r.powf(cyl.alpha());
            worst = worst.max((res.profile.value(s) - exact.value(s)).abs());
        }
        assert!(worst < 1e-5, "sup distance {worst}, match at {}", res.s_match);
        assert!(res.derivative_mismatch < 1e-6, "{}", res.derivative_mismatch);
    }
}
