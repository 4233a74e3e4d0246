//! Parameter domain, derived exponents and the flat/cylinder correspondence.
//!
//! Flat parameters `(d, β, γ, p)` describe the weighted inequality on R^d.
//! The change of variables `s = r^α` maps them to cylinder parameters
//! `(d, α, n, p)` where `n` is a real "dimension".

use crate::real::{lit, Real};
use serde::Serialize;
use std::fmt;
use thiserror::Error;

/// Absolute tolerance used for the closed endpoint `p = p⋆` and for the
/// unweighted identification `α = 1, n = d`.
pub const ENDPOINT_TOL: f64 = 1e-12;

/// Raw flat parameters, not yet checked.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProblemParams<T> {
    pub d: u32,
    pub beta: T,
    pub gamma: T,
    pub p: T,
}

/// One inequality of the admissible cone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Constraint {
    /// d ≥ 2
    Dimension,
    /// γ < d
    GammaBelowDimension,
    /// β > γ − 2
    BetaAboveLower,
    /// β < (d−2)γ/d
    BetaBelowUpper,
    /// d − β − 2 > 0
    PositiveDenominator,
    /// p > 1
    PAboveOne,
    /// p ≤ p⋆
    PAtMostCritical,
    /// α > 0
    AlphaPositive,
    /// n > d
    DimensionBelowN,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Constraint::Dimension => "d >= 2",
            Constraint::GammaBelowDimension => "gamma < d",
            Constraint::BetaAboveLower => "beta > gamma - 2",
            Constraint::BetaBelowUpper => "beta < (d-2) gamma / d",
            Constraint::PositiveDenominator => "d - beta - 2 > 0",
            Constraint::PAboveOne => "p > 1",
            Constraint::PAtMostCritical => "p <= p_star",
            Constraint::AlphaPositive => "alpha > 0",
            Constraint::DimensionBelowN => "n > d",
        };
        f.write_str(s)
    }
}

/// A failed inequality with the amount by which it fails (≥ 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub margin: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violated by {:.6e}", self.constraint, self.margin)
    }
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ParamError {
    #[error("parameters outside the admissible cone: {}", join(.0))]
    OutOfCone(Vec<Violation>),
    #[error("cylinder parameters invalid: {}", join(.0))]
    InvalidCylinder(Vec<Violation>),
    #[error("image of cylinder parameters lies outside the cone: {}", join(.0))]
    ImageOutsideCone(Vec<Violation>),
}

impl<T: Real> ProblemParams<T> {
    pub fn new(d: u32, beta: T, gamma: T, p: T) -> Self {
        Self { d, beta, gamma, p }
    }

    fn df(&self) -> T {
        T::from_u32(self.d).expect("dimension")
    }

    /// p⋆ = (d−γ)/(d−β−2); infinite when the denominator vanishes.
    pub fn p_star(&self) -> T {
        let den = self.df() - self.beta - lit(2.0);
        if den > T::zero() {
            (self.df() - self.gamma) / den
        } else {
            T::infinity()
        }
    }

    /// Signed slack of every cone inequality (positive means satisfied).
    /// The `p ≤ p⋆` slack is `p⋆ − p`.
    pub fn cone_margins(&self) -> Vec<(Constraint, T)> {
        let d = self.df();
        let two = lit::<T>(2.0);
        vec![
            (Constraint::Dimension, d - two + T::one()),
            (Constraint::GammaBelowDimension, d - self.gamma),
            (Constraint::BetaAboveLower, self.beta - (self.gamma - two)),
            (Constraint::BetaBelowUpper, (d - two) * self.gamma / d - self.beta),
            (Constraint::PositiveDenominator, d - self.beta - two),
            (Constraint::PAboveOne, self.p - T::one()),
            (Constraint::PAtMostCritical, self.p_star() - self.p),
        ]
    }

    /// Checks every inequality of the cone. Open inequalities are strict with
    /// zero tolerance; `p = p⋆` is accepted within [`ENDPOINT_TOL`].
    pub fn validate(self) -> Result<ValidatedParams<T>, ParamError> {
        let violations: Vec<Violation> = self
            .cone_margins()
            .into_iter()
            .filter_map(|(c, slack)| {
                let ok = match c {
                    Constraint::PAtMostCritical => slack >= -lit::<T>(ENDPOINT_TOL),
                    _ => slack > T::zero(),
                };
                (!ok).then(|| Violation {
                    constraint: c,
                    margin: (-slack).to_f64_lossy().max(0.0),
                })
            })
            .collect();
        if violations.is_empty() {
            Ok(ValidatedParams { raw: self, unweighted: false })
        } else {
            Err(ParamError::OutOfCone(violations))
        }
    }
}

/// Parameters known to lie in the admissible set.
///
/// Besides the open cone this includes the unweighted case `β = γ = 0`,
/// which only enters through [`ValidatedParams::unweighted`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValidatedParams<T> {
    raw: ProblemParams<T>,
    unweighted: bool,
}

impl<T: Real> ValidatedParams<T> {
    /// The unweighted problem `β = γ = 0`, i.e. `α = 1`, `n = d`.
    /// Requires `d ≥ 2` and `1 < p ≤ d/(d−2)` (any `p > 1` when `d = 2`).
    pub fn unweighted(d: u32, p: T) -> Result<Self, ParamError> {
        let raw = ProblemParams::new(d, T::zero(), T::zero(), p);
        let mut violations = Vec::new();
        if d < 2 {
            violations.push(Violation { constraint: Constraint::Dimension, margin: (2 - d as i64) as f64 });
        }
        if !(p > T::one()) {
            violations.push(Violation {
                constraint: Constraint::PAboveOne,
                margin: (T::one() - p).to_f64_lossy().max(0.0),
            });
        }
        let ps = raw.p_star();
        if p > ps + lit(ENDPOINT_TOL) {
            violations.push(Violation {
                constraint: Constraint::PAtMostCritical,
                margin: (p - ps).to_f64_lossy(),
            });
        }
        if violations.is_empty() {
            Ok(Self { raw, unweighted: true })
        } else {
            Err(ParamError::OutOfCone(violations))
        }
    }

    pub fn raw(&self) -> ProblemParams<T> {
        self.raw
    }
    pub fn d(&self) -> u32 {
        self.raw.d
    }
    pub fn beta(&self) -> T {
        self.raw.beta
    }
    pub fn gamma(&self) -> T {
        self.raw.gamma
    }
    pub fn p(&self) -> T {
        self.raw.p
    }
    pub fn p_star(&self) -> T {
        self.raw.p_star()
    }
    pub fn is_unweighted(&self) -> bool {
        self.unweighted
    }

    /// True when `p` equals `p⋆` within [`ENDPOINT_TOL`].
    pub fn is_critical(&self) -> bool {
        (self.p() - self.p_star()).abs() <= lit(ENDPOINT_TOL)
    }

    /// α = 1 + (β−γ)/2.
    pub fn alpha(&self) -> T {
        T::one() + (self.beta() - self.gamma()) * lit(0.5)
    }

    /// n = 2(d−γ)/(β+2−γ).
    pub fn n(&self) -> T {
        let d = T::from_u32(self.d()).expect("dimension");
        lit::<T>(2.0) * (d - self.gamma()) / (self.beta() + lit(2.0) - self.gamma())
    }

    pub fn to_cylinder(&self) -> CylinderParams<T> {
        CylinderParams {
            d: self.d(),
            alpha: self.alpha(),
            n: self.n(),
            p: self.p(),
            unweighted: self.unweighted,
        }
    }

    /// ϑ in flat variables: (d−γ)(p−1) / (p(d+β+2−2γ−p(d−β−2))).
    pub fn theta_flat(&self) -> T {
        if self.is_critical() {
            return T::one();
        }
        let d = T::from_u32(self.d()).expect("dimension");
        let (b, g, p) = (self.beta(), self.gamma(), self.p());
        let two = lit::<T>(2.0);
        (d - g) * (p - T::one()) / (p * (d + b + two - two * g - p * (d - b - two)))
    }

    /// ζ in its closed rational form:
    /// (β+2−γ)(p−1) / (2p(d+β+2−2γ−p(d−β−2))).
    pub fn zeta_closed(&self) -> T {
        let d = T::from_u32(self.d()).expect("dimension");
        let (b, g, p) = (self.beta(), self.gamma(), self.p());
        let two = lit::<T>(2.0);
        (b + two - g) * (p - T::one()) / (two * p * (d + b + two - two * g - p * (d - b - two)))
    }

    pub fn exponents(&self) -> DerivedExponents<T> {
        let mut e = DerivedExponents::new(self.n(), self.p(), self.is_critical());
        e.theta = self.theta_flat();
        e.zeta = e.theta * lit(0.5) + (T::one() - e.theta) / (self.p() + T::one())
            - T::one() / (lit::<T>(2.0) * self.p());
        e.p_star = self.p_star();
        e
    }
}

/// Cylinder parameters `(d, α, n, p)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CylinderParams<T> {
    d: u32,
    alpha: T,
    n: T,
    p: T,
    #[serde(skip)]
    unweighted: bool,
}

impl<T: Real> CylinderParams<T> {
    /// Requires `α > 0`, `n > d` and `1 < p ≤ n/(n−2)`. The unweighted point
    /// `α = 1, n = d` is accepted as well.
    pub fn new(d: u32, alpha: T, n: T, p: T) -> Result<Self, ParamError> {
        let tol = lit::<T>(ENDPOINT_TOL);
        let df = T::from_u32(d).expect("dimension");
        let unweighted = (alpha - T::one()).abs() <= tol && (n - df).abs() <= tol;
        let mut violations = Vec::new();
        let mut fail = |c, m: T| violations.push(Violation { constraint: c, margin: m.to_f64_lossy().max(0.0) });
        if d < 2 {
            fail(Constraint::Dimension, lit::<T>(2.0) - df);
        }
        if !(alpha > T::zero()) {
            fail(Constraint::AlphaPositive, -alpha);
        }
        if !(n > df) && !unweighted {
            fail(Constraint::DimensionBelowN, df - n);
        }
        if !(p > T::one()) {
            fail(Constraint::PAboveOne, T::one() - p);
        }
        let ps = critical_p(n);
        if p > ps + tol {
            fail(Constraint::PAtMostCritical, p - ps);
        }
        if violations.is_empty() {
            Ok(Self { d, alpha, n: if unweighted { df } else { n }, p, unweighted })
        } else {
            Err(ParamError::InvalidCylinder(violations))
        }
    }

    pub fn d(&self) -> u32 {
        self.d
    }
    pub fn alpha(&self) -> T {
        self.alpha
    }
    pub fn n(&self) -> T {
        self.n
    }
    pub fn p(&self) -> T {
        self.p
    }
    pub fn is_unweighted(&self) -> bool {
        self.unweighted
    }
    /// p⋆ = n/(n−2).
    pub fn p_star(&self) -> T {
        critical_p(self.n)
    }
    pub fn is_critical(&self) -> bool {
        (self.p - self.p_star()).abs() <= lit(ENDPOINT_TOL)
    }

    /// β = d − 2 − α(n−2), γ = d − αn.
    pub fn to_flat(&self) -> Result<ValidatedParams<T>, ParamError> {
        if self.unweighted {
            return ValidatedParams::unweighted(self.d, self.p);
        }
        let df = T::from_u32(self.d).expect("dimension");
        let two = lit::<T>(2.0);
        let raw = ProblemParams::new(self.d, df - two - self.alpha * (self.n - two), df - self.alpha * self.n, self.p);
        raw.validate().map_err(|e| match e {
            ParamError::OutOfCone(v) => ParamError::ImageOutsideCone(v),
            other => other,
        })
    }

    pub fn exponents(&self) -> DerivedExponents<T> {
        DerivedExponents::new(self.n, self.p, self.is_critical())
    }
}

fn critical_p<T: Real>(n: T) -> T {
    let two = lit::<T>(2.0);
    if n > two {
        n / (n - two)
    } else {
        T::infinity()
    }
}

/// Exponents derived from `(n, p)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivedExponents<T> {
    /// ϑ = n(p−1) / (p(n+2−p(n−2)))
    pub theta: T,
    /// ζ = ϑ/2 + (1−ϑ)/(p+1) − 1/(2p)
    pub zeta: T,
    pub p_star: T,
    /// m = (p+1)/(2p)
    pub m: T,
    /// ν = 1/(1−m)
    pub nu: T,
    /// σ = (2/n)/(1−m) − 1
    pub sigma: T,
    /// δ = 2p/(p−1)
    pub delta: T,
    /// a = (2−n)/2
    pub a: T,
}

impl<T: Real> DerivedExponents<T> {
    /// At the critical endpoint ϑ, σ and δ are snapped to 1, 1 and n.
    pub fn new(n: T, p: T, critical: bool) -> Self {
        let one = T::one();
        let two = lit::<T>(2.0);
        let m = m_from_p(p);
        let nu = one / (one - m);
        let (theta, sigma, delta) = if critical {
            (one, one, n)
        } else {
            (
                n * (p - one) / (p * (n + two - p * (n - two))),
                two / n / (one - m) - one,
                two * p / (p - one),
            )
        };
        let zeta = theta / two + (one - theta) / (p + one) - one / (two * p);
        Self { theta, zeta, p_star: critical_p(n), m, nu, sigma, delta, a: (two - n) / two }
    }
}

/// m = (p+1)/(2p).
pub fn m_from_p<T: Real>(p: T) -> T {
    (p + T::one()) / (lit::<T>(2.0) * p)
}

/// p = 1/(2m−1).
pub fn p_from_m<T: Real>(m: T) -> T {
    T::one() / (lit::<T>(2.0) * m - T::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_point() {
        let v = ProblemParams::new(4, 0.0f64, 1.0, 1.2).validate().unwrap();
        assert!((v.p_star() - 1.5).abs() < 1e-15);
        let c = v.to_cylinder();
        assert!((c.alpha() - 0.5).abs() < 1e-15);
        assert!((c.n() - 6.0).abs() < 1e-14);
        let e = v.exponents();
        assert!((e.m - 2.2 / 2.4).abs() < 1e-15);
        assert!((e.nu - 12.0).abs() < 1e-12);
        assert!((e.sigma - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejections_name_the_constraint() {
        let err = ProblemParams::new(4, -4.1, -2.0, 1.2).validate().unwrap_err();
        let ParamError::OutOfCone(v) = err else { panic!() };
        assert!(v.iter().any(|x| x.constraint == Constraint::BetaAboveLower));
        let err = ProblemParams::new(4, 0.0, 1.0, 1.6).validate().unwrap_err();
        let ParamError::OutOfCone(v) = err else { panic!() };
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].constraint, Constraint::PAtMostCritical);
        assert!((v[0].margin - 0.1).abs() < 1e-12);
    }

    #[test]
    fn unweighted_is_outside_the_open_cone_but_constructible() {
        assert!(ProblemParams::new(4, 0.0, 0.0, 1.2).validate().is_err());
        let u = ValidatedParams::unweighted(4, 1.2).unwrap();
        let c = u.to_cylinder();
        assert_eq!((c.alpha(), c.n()), (1.0, 4.0));
        let back = CylinderParams::new(4, 1.0, 4.0, 1.2).unwrap().to_flat().unwrap();
        assert_eq!((back.beta(), back.gamma()), (0.0, 0.0));
        assert!(ValidatedParams::unweighted(2, 7.0).is_ok());
        assert!(ValidatedParams::unweighted(4, 2.5).is_err());
    }

    #[test]
    fn critical_endpoint_snaps() {
        let v = ProblemParams::new(4, 0.0f64, 1.0, 1.5).validate().unwrap();
        assert!(v.is_critical());
        let e = v.exponents();
        assert_eq!(e.theta, 1.0);
        assert_eq!(e.sigma, 1.0);
        assert!((e.delta - 6.0).abs() < 1e-14);
    }

    #[test]
    fn d2_example_and_inverse() {
        let v = ProblemParams::new(2, -1.0f64, 0.0, 1.2).validate().unwrap();
        let c = v.to_cylinder();
        assert!((c.alpha() - 0.5).abs() < 1e-15 && (c.n() - 4.0).abs() < 1e-14);
        let f = CylinderParams::new(4, 0.5f64, 6.0, 1.2).unwrap().to_flat().unwrap();
        assert!(f.beta().abs() < 1e-15 && (f.gamma() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exponents_in_single_precision() {
        let v = ProblemParams::new(4, 0.0f32, 1.0, 1.2).validate().unwrap();
        assert!((v.exponents().sigma - 3.0).abs() < 1e-4);
    }
}
