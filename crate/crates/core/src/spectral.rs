//! The quadratic form 𝒬 and Rayleigh quotients of separable trial functions
//! for the weighted Hardy-Poincaré inequality.

use crate::quadrature::{integrate_half_line, integrate_half_line_graded, QuadError, QuadratureConfig};
use crate::real::{lit, Real};
use crate::special::sphere_area;
use crate::symmetry::{eta, spectral_gap, Branch, SymmetryError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SpectralError {
    #[error("integral does not converge: {0}")]
    NonConvergent(String),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("radial mode is not orthogonal to constants (relative residual {0:.3e})")]
    OrthogonalityViolated(f64),
    #[error("trial violates the orthogonality constraint (relative residual {0:.3e})")]
    ConstraintViolated(f64),
    #[error("trial has zero norm")]
    ZeroDenominator,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("certificate failed: Rayleigh quotient {rayleigh:.12e} below Lambda {lambda:.12e} for trial {trial}")]
    CertificateFailed { trial: String, rayleigh: f64, lambda: f64 },
}

impl From<QuadError> for SpectralError {
    fn from(e: QuadError) -> Self {
        match e {
            QuadError::NonConvergent(s) => SpectralError::NonConvergent(s),
            other => SpectralError::Quadrature(other.to_string()),
        }
    }
}

impl From<SymmetryError> for SpectralError {
    fn from(e: SymmetryError) -> Self {
        SpectralError::Precondition(e.to_string())
    }
}

/// Σ c_k s^{ℓ+k} e^{−s²/2} − shift, with ℓ the angular degree of the trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolyGaussian<T> {
    pub coeffs: Vec<T>,
    pub shift: T,
}

impl<T: Real> PolyGaussian<T> {
    fn eval(&self, s: T, degree: u32) -> (T, T) {
        let g = (-(s * s) * lit(0.5)).exp();
        let l = T::from_u32(degree).expect("degree");
        let (mut v, mut dv) = (T::zero(), T::zero());
        for (k, c) in self.coeffs.iter().enumerate() {
            let e = l + T::from_usize_lossy(k);
            let pw = if e == T::zero() { T::one() } else { s.powf(e) };
            v = v + *c * pw;
            // d/ds (s^e e^{−s²/2}) = (e/s − s) s^e e^{−s²/2}
            let dpw = if e == T::zero() { T::zero() } else { e * s.powf(e - T::one()) };
            dv = dv + *c * (dpw - s * pw);
        }
        (v * g - self.shift, dv * g)
    }
}

/// Separable trial functions `g(s) Y(ω)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrialFunction<T> {
    /// φ₀ = s² − n/(2δ−n)
    RadialMode { n: T, delta: T },
    /// φᵢ = s^η ωᵢ
    AngularMode { index: usize, eta: T },
    /// g(s) times a spherical harmonic of the given degree
    Custom { radial: PolyGaussian<T>, degree: u32 },
}

impl<T: Real> TrialFunction<T> {
    pub fn radial_mode(n: T, delta: T) -> Self {
        TrialFunction::RadialMode { n, delta }
    }

    pub fn angular_mode(alpha: T, n: T, d: u32, index: usize) -> Self {
        TrialFunction::AngularMode { index, eta: eta(alpha, n, d) }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            TrialFunction::RadialMode { .. } => "radial_mode",
            TrialFunction::AngularMode { .. } => "angular_mode",
            TrialFunction::Custom { .. } => "custom",
        }
    }

    pub fn degree(&self) -> u32 {
        match self {
            TrialFunction::RadialMode { .. } => 0,
            TrialFunction::AngularMode { .. } => 1,
            TrialFunction::Custom { degree, .. } => *degree,
        }
    }

    /// (g, g′) of the radial factor.
    fn radial(&self, s: T) -> (T, T) {
        let (g, dg, l) = self.radial_scaled(s);
        let e = l.exp();
        (g * e, dg * e)
    }

    /// (g, g′, ℓ) with the radial factor equal to e^ℓ (g, g′).
    fn radial_scaled(&self, s: T) -> (T, T, T) {
        match self {
            TrialFunction::RadialMode { n, delta } => {
                (s * s - *n / (lit::<T>(2.0) * *delta - *n), lit::<T>(2.0) * s, T::zero())
            }
            TrialFunction::AngularMode { eta, .. } => (T::one(), *eta / s, *eta * s.ln()),
            TrialFunction::Custom { radial, degree } => {
                let (g, dg) = radial.eval(s, *degree);
                (g, dg, T::zero())
            }
        }
    }

    /// Large-s exponent of g, if it grows or decays like a power.
    fn tail_power(&self) -> Option<T> {
        match self {
            TrialFunction::RadialMode { .. } => Some(lit(2.0)),
            TrialFunction::AngularMode { eta, .. } => Some(*eta),
            TrialFunction::Custom { .. } => None,
        }
    }
}

/// The measure |x|^{n−d} (1+|x|²)^{−δ} dx in radial form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightedMeasure<T> {
    pub n: T,
    pub d: u32,
    pub delta: T,
}

impl<T: Real> WeightedMeasure<T> {
    fn density(&self, s: T, shift: T) -> T {
        self.scaled_density(s, shift, T::zero())
    }

    /// density · e^{2 log_scale}, combined in logs: the factors overflow
    /// separately for large n, η and s
    fn scaled_density(&self, s: T, shift: T, log_scale: T) -> T {
        if s == T::zero() {
            return s.powf(self.n - T::one());
        }
        ((self.n - T::one()) * s.ln() - (self.delta + shift) * (s * s).ln_1p() + lit::<T>(2.0) * log_scale).exp()
    }

    fn angular_norm(&self, degree: u32) -> T {
        let area = sphere_area::<T>(self.d);
        if degree == 0 { area } else { area / T::from_u32(self.d).expect("dimension") }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FormParts<T> {
    /// ∫ |𝖣_α f|² dμ_δ
    pub numerator: T,
    /// ∫ |f|² dμ_{δ+1}
    pub denominator: T,
}

fn parts<T: Real>(
    f: &TrialFunction<T>,
    alpha: T,
    mu: &WeightedMeasure<T>,
    cfg: &QuadratureConfig<T>,
) -> Result<FormParts<T>, SpectralError> {
    // both integrands behave like s^{2k+n−3−2δ} at infinity
    let tail = f.tail_power().map(|k| lit::<T>(2.0) * k + mu.n - lit(3.0) - lit::<T>(2.0) * mu.delta);
    if let Some(e) = tail {
        if !(e < -T::one()) {
            return Err(SpectralError::NonConvergent(format!("{} decays too slowly against the weight", f.kind_name())));
        }
    }
    let l = T::from_u32(f.degree()).expect("degree");
    let lap = l * (l + T::from_u32(mu.d).expect("dimension") - lit(2.0));
    let a2 = alpha * alpha;
    let num = integrate_half_line_graded(|s: T| {
        let (g, dg, l) = f.radial_scaled(s);
        let ang = if lap == T::zero() { T::zero() } else { lap * g * g / (s * s) };
        (a2 * dg * dg + ang) * mu.scaled_density(s, T::zero(), l)
    }, None, tail, cfg)?;
    let den = integrate_half_line_graded(|s: T| {
        let (g, _, l) = f.radial_scaled(s);
        g * g * mu.scaled_density(s, T::one(), l)
    }, None, tail, cfg)?;
    let ang = mu.angular_norm(f.degree());
    Ok(FormParts { numerator: ang * num.value, denominator: ang * den.value })
}

/// ∫ f dμ_{δ+1} relative to ∫ |f| dμ_{δ+1}; zero for degree ≥ 1.
fn constraint_residual<T: Real>(
    f: &TrialFunction<T>,
    mu: &WeightedMeasure<T>,
    cfg: &QuadratureConfig<T>,
) -> Result<T, SpectralError> {
    if f.degree() > 0 {
        return Ok(T::zero());
    }
    let m = integrate_half_line(|s: T| f.radial(s).0 * mu.density(s, T::one()), cfg)?;
    let a = integrate_half_line(|s: T| f.radial(s).0.abs() * mu.density(s, T::one()), cfg)?;
    if a.value == T::zero() {
        return Ok(T::zero());
    }
    Ok((m.value / a.value).abs())
}

/// 𝒬[f] = ∫|𝖣_α f|² dμ_δ − (4pα²/(p−1)) ∫|f|² dμ_{δ+1} with δ = 2p/(p−1).
///
/// An angular mode with η + n/2 − 1 ≥ δ has both integrals infinite; the
/// leading tail of the difference is α²η(2η + n − 2 − 2δ) s^{2η+n−3−2δ} ≥ 0,
/// so 𝒬 = +∞ there and that value is returned.
pub fn quadratic_form<T: Real>(
    f: &TrialFunction<T>,
    alpha: T,
    n: T,
    d: u32,
    p: T,
    cfg: &QuadratureConfig<T>,
) -> Result<T, SpectralError> {
    let delta = lit::<T>(2.0) * p / (p - T::one());
    let mu = WeightedMeasure { n, d, delta };
    if let TrialFunction::RadialMode { n: nf, delta: df } = f {
        if (*nf - n).abs() > lit::<T>(1e-12) * n || (*df - delta).abs() > lit::<T>(1e-12) * delta {
            return Err(SpectralError::Precondition("radial mode built for different (n, delta)".into()));
        }
        let r = constraint_residual(f, &mu, cfg)?;
        if r > lit(1e-8) {
            return Err(SpectralError::OrthogonalityViolated(r.to_f64_lossy()));
        }
    }
    if let TrialFunction::AngularMode { eta, .. } = f {
        if !(*eta + n / lit(2.0) - T::one() < delta) {
            return Ok(T::infinity());
        }
    }
    let fp = parts(f, alpha, &mu, cfg)?;
    Ok(fp.numerator - lit::<T>(2.0) * alpha * alpha * delta * fp.denominator)
}

const CONSTRAINT_TOL: f64 = 1e-10;

/// ∫|𝖣_α f|² dμ_δ / ∫|f|² dμ_{δ+1} for a trial satisfying the constraint.
pub fn rayleigh<T: Real>(
    f: &TrialFunction<T>,
    alpha: T,
    n: T,
    d: u32,
    delta: T,
    cfg: &QuadratureConfig<T>,
) -> Result<T, SpectralError> {
    let mu = WeightedMeasure { n, d, delta };
    let r = constraint_residual(f, &mu, cfg)?;
    if r > lit(CONSTRAINT_TOL) {
        return Err(SpectralError::ConstraintViolated(r.to_f64_lossy()));
    }
    let fp = parts(f, alpha, &mu, cfg)?;
    if !(fp.denominator > T::zero()) {
        return Err(SpectralError::ZeroDenominator);
    }
    Ok(fp.numerator / fp.denominator)
}

/// Subtracts the dμ_{δ+1}-mean of a degree-0 trial.
pub fn project_constraint<T: Real>(
    radial: PolyGaussian<T>,
    n: T,
    delta: T,
    cfg: &QuadratureConfig<T>,
) -> Result<PolyGaussian<T>, SpectralError> {
    let mu = WeightedMeasure { n, d: 2, delta };
    let f = TrialFunction::Custom { radial: PolyGaussian { shift: T::zero(), ..radial }, degree: 0 };
    let m = integrate_half_line(|s: T| f.radial(s).0 * mu.density(s, T::one()), cfg)?;
    let w = integrate_half_line(|s: T| mu.density(s, T::one()), cfg)?;
    let TrialFunction::Custom { radial, .. } = f else { unreachable!() };
    Ok(PolyGaussian { shift: m.value / w.value, ..radial })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport<T> {
    pub alpha: T,
    pub n: T,
    pub d: u32,
    pub delta: T,
    #[serde(rename = "Lambda")]
    pub lambda: T,
    pub branch: Branch,
    pub min_rayleigh: T,
    pub argmin_kind: String,
    pub trials: usize,
}

/// Tolerance of the certificate in both directions.
pub const CERTIFICATE_TOL: f64 = 1e-6;

/// Random polynomial × Gaussian trials of degree 0..=2, deterministic in `seed`.
pub fn random_trials<T: Real>(count: usize, n: T, delta: T, seed: u64, cfg: &QuadratureConfig<T>) -> Result<Vec<TrialFunction<T>>, SpectralError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<(u32, Vec<T>)> = (0..count)
        .map(|_| {
            let degree = rng.gen_range(0..=2u32);
            let k = rng.gen_range(1..=4usize);
            let coeffs = (0..k).map(|_| lit::<T>(rng.gen_range(-1.0..1.0))).collect();
            (degree, coeffs)
        })
        .collect();
    specs
        .into_par_iter()
        .map(|(degree, coeffs)| {
            let radial = PolyGaussian { coeffs, shift: T::zero() };
            let radial = if degree == 0 { project_constraint(radial, n, delta, cfg)? } else { radial };
            Ok(TrialFunction::Custom { radial, degree })
        })
        .collect()
}

/// Minimum Rayleigh quotient over φ₀, φ₁ and `family_size` random trials;
/// fails if any trial goes below Λ or if the minimum is not attained by the
/// eigenfunction of the active branch.
pub fn gap_certificate<T: Real>(
    alpha: T,
    n: T,
    d: u32,
    delta: T,
    family_size: usize,
    seed: u64,
    cfg: &QuadratureConfig<T>,
) -> Result<GapReport<T>, SpectralError> {
    let gap = spectral_gap(alpha, n, d, delta)?;
    let mut family = vec![TrialFunction::radial_mode(n, delta), TrialFunction::angular_mode(alpha, n, d, 1)];
    family.extend(random_trials(family_size, n, delta, seed, cfg)?);
    let values: Vec<Result<Option<T>, SpectralError>> = family
        .par_iter()
        .map(|f| match rayleigh(f, alpha, n, d, delta, cfg) {
            Ok(v) => Ok(Some(v)),
            // an eigenfunction outside the form domain is not a competitor
            Err(SpectralError::NonConvergent(_)) if !matches!(f, TrialFunction::Custom { .. }) => Ok(None),
            Err(SpectralError::ZeroDenominator) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let tol = lit::<T>(CERTIFICATE_TOL);
    let mut best: Option<(T, usize)> = None;
    for (i, v) in values.into_iter().enumerate() {
        let Some(v) = v? else { continue };
        if v < gap.lambda - tol * gap.lambda.max(T::one()) {
            return Err(SpectralError::CertificateFailed {
                trial: serde_json::to_string(&family[i]).unwrap_or_default(),
                rayleigh: v.to_f64_lossy(),
                lambda: gap.lambda.to_f64_lossy(),
            });
        }
        if best.map_or(true, |(b, _)| v < b) {
            best = Some((v, i));
        }
    }
    let (min_rayleigh, idx) = best.ok_or(SpectralError::ZeroDenominator)?;
    let expected = match gap.branch {
        Branch::RadialBranch => 0,
        Branch::AngularBranch => 1,
    };
    let by_branch = match rayleigh(&family[expected], alpha, n, d, delta, cfg) {
        Ok(v) => v,
        Err(_) => T::infinity(),
    };
    if (by_branch - gap.lambda).abs() > tol * gap.lambda.max(T::one()) {
        return Err(SpectralError::CertificateFailed {
            trial: serde_json::to_string(&family[expected]).unwrap_or_default(),
            rayleigh: by_branch.to_f64_lossy(),
            lambda: gap.lambda.to_f64_lossy(),
        });
    }
    Ok(GapReport {
        alpha,
        n,
        d,
        delta,
        lambda: gap.lambda,
        branch: gap.branch,
        min_rayleigh,
        argmin_kind: family[idx].kind_name().to_string(),
        trials: family.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig<f64> {
        QuadratureConfig::default()
    }

    #[test]
    fn radial_mode_anchor() {
        let f = TrialFunction::radial_mode(6.0f64, 6.0);
        let r = rayleigh(&f, 0.5, 6.0, 4, 6.0, &cfg()).unwrap();
        assert!((r / 3.0 - 1.0).abs() < 1e-7, "{r}");
    }

    #[test]
    fn angular_mode_anchor() {
        let f = TrialFunction::angular_mode(1.0f64, 6.0, 4, 1);
        let r = rayleigh(&f, 1.0, 6.0, 4, 6.0, &cfg()).unwrap();
        let exact = 12.0 * (28f64.sqrt() - 4.0) / 2.0;
        assert!((r / exact - 1.0).abs() < 1e-9, "{r}");
    }

    #[test]
    fn zero_trial() {
        let f = TrialFunction::Custom { radial: PolyGaussian { coeffs: vec![0.0f64], shift: 0.0 }, degree: 1 };
        assert_eq!(quadratic_form(&f, 0.5, 6.0, 4, 1.2, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn unprojected_trial_rejected() {
        let f = TrialFunction::Custom { radial: PolyGaussian { coeffs: vec![1.0f64], shift: 0.0 }, degree: 0 };
        assert!(matches!(rayleigh(&f, 0.5, 6.0, 4, 6.0, &cfg()), Err(SpectralError::ConstraintViolated(_))));
    }

    #[test]
    fn certificate_branches() {
        let r = gap_certificate(0.5f64, 6.0, 4, 6.0, 20, 7, &cfg()).unwrap();
        assert_eq!(r.argmin_kind, "radial_mode");
        let a = gap_certificate(1.0f64, 6.0, 4, 6.0, 20, 7, &cfg()).unwrap();
        assert_eq!(a.argmin_kind, "angular_mode");
    }
}
