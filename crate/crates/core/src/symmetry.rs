//! Symmetry and symmetry-breaking regions, the Felli-Schneider thresholds and
//! the Hardy-Poincaré spectral gap.

use crate::params::{ProblemParams, ValidatedParams};
use crate::real::{lit, Real};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Absolute tolerance on `β − β_FS(γ)` for the [`RegionKind::OnCurve`] label.
pub const ON_CURVE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum RegionKind {
    Symmetry,
    SymmetryBreaking,
    OnCurve,
    OutsideCone,
}

impl RegionKind {
    /// Integer code used in CSV output.
    pub fn code(self) -> u8 {
        match self {
            RegionKind::Symmetry => 0,
            RegionKind::SymmetryBreaking => 1,
            RegionKind::OnCurve => 2,
            RegionKind::OutsideCone => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => RegionKind::Symmetry,
            1 => RegionKind::SymmetryBreaking,
            2 => RegionKind::OnCurve,
            3 => RegionKind::OutsideCone,
            _ => return None,
        })
    }
}

/// A classification together with the signed distance `β − β_FS(γ)`.
///
/// The margin is always finite: for points outside the cone it is still
/// `β − β_FS(γ)`, computed with the clamped radicand of [`beta_fs_clamped`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegionLabel<T> {
    pub kind: RegionKind,
    pub margin: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    #[serde(rename = "radial")]
    RadialBranch,
    #[serde(rename = "angular")]
    AngularBranch,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralGap<T> {
    pub lambda: T,
    /// Present on the angular branch.
    pub eta: Option<T>,
    pub branch: Branch,
    /// The value of α² at which the branches switch.
    pub threshold: T,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SymmetryError {
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
}

fn df<T: Real>(d: u32) -> T {
    T::from_u32(d).expect("dimension")
}

/// β_FS(γ) = d − 2 − sqrt((γ−d)² − 4(d−1)).
///
/// Returns NaN where the radicand is negative (only possible for γ > 0).
pub fn beta_fs<T: Real>(gamma: T, d: u32) -> T {
    let dd = df::<T>(d);
    let rad = (gamma - dd) * (gamma - dd) - lit::<T>(4.0) * (dd - T::one());
    dd - lit(2.0) - rad.sqrt()
}

/// [`beta_fs`] with the radicand clamped at zero, so it is finite for every γ.
pub fn beta_fs_clamped<T: Real>(gamma: T, d: u32) -> T {
    let dd = df::<T>(d);
    let rad = (gamma - dd) * (gamma - dd) - lit::<T>(4.0) * (dd - T::one());
    dd - lit(2.0) - rad.max(T::zero()).sqrt()
}

/// Residual of the hyperbola (d−γ)² − (β−d+2)² − 4(d−1).
pub fn hyperbola_residual<T: Real>(gamma: T, beta: T, d: u32) -> T {
    let dd = df::<T>(d);
    let x = dd - gamma;
    let y = beta - dd + lit(2.0);
    x * x - y * y - lit::<T>(4.0) * (dd - T::one())
}

/// α_FS = sqrt((d−1)/(n−1)).
pub fn alpha_fs<T: Real>(d: u32, n: T) -> T {
    ((df::<T>(d) - T::one()) / (n - T::one())).sqrt()
}

/// The positive root of η(η + n − 2) = (d−1)/α².
pub fn eta<T: Real>(alpha: T, n: T, d: u32) -> T {
    let b = n - lit(2.0);
    let c = (df::<T>(d) - T::one()) / (alpha * alpha);
    // rationalized form avoids cancellation when c is small
    lit::<T>(2.0) * c / (b + (b * b + lit::<T>(4.0) * c).sqrt())
}

/// α² value where the two branches of Λ meet: (d−1)δ²/(n(2δ−n)(δ−1)).
pub fn branch_threshold<T: Real>(n: T, d: u32, delta: T) -> T {
    (df::<T>(d) - T::one()) * delta * delta / (n * (lit::<T>(2.0) * delta - n) * (delta - T::one()))
}

/// Λ = 2α²(2δ−n) below the branch threshold, 2α²δη above it.
pub fn spectral_gap<T: Real>(alpha: T, n: T, d: u32, delta: T) -> Result<SpectralGap<T>, SymmetryError> {
    if d < 2 || n < df(d) {
        return Err(SymmetryError::PreconditionViolated(format!("need n >= d >= 2, got n={n}, d={d}")));
    }
    if delta < n * (T::one() - lit(1e-12)) {
        return Err(SymmetryError::PreconditionViolated(format!("need delta >= n, got delta={delta}, n={n}")));
    }
    if !(alpha > T::zero()) {
        return Err(SymmetryError::PreconditionViolated(format!("need alpha > 0, got {alpha}")));
    }
    let two = lit::<T>(2.0);
    let a2 = alpha * alpha;
    let threshold = branch_threshold(n, d, delta);
    Ok(if a2 <= threshold {
        SpectralGap { lambda: two * a2 * (two * delta - n), eta: None, branch: Branch::RadialBranch, threshold }
    } else {
        let e = eta(alpha, n, d);
        SpectralGap { lambda: two * a2 * delta * e, eta: Some(e), branch: Branch::AngularBranch, threshold }
    })
}

/// 4pα²/(p−1) − Λ with δ = 2p/(p−1). Positive exactly in the
/// symmetry-breaking region.
pub fn instability_margin<T: Real>(params: &ValidatedParams<T>) -> Result<T, SymmetryError> {
    let cyl = params.to_cylinder();
    let e = cyl.exponents();
    let gap = spectral_gap(cyl.alpha(), cyl.n(), cyl.d(), e.delta)?;
    Ok(lit::<T>(2.0) * cyl.alpha() * cyl.alpha() * e.delta - gap.lambda)
}

/// Classification of a raw parameter point.
///
/// The unweighted point `β = γ = 0` is not in the open cone but is labeled
/// [`RegionKind::Symmetry`] when `p` is admissible for it.
pub fn classify<T: Real>(params: &ProblemParams<T>) -> RegionLabel<T> {
    let margin = params.beta - beta_fs_clamped(params.gamma, params.d);
    let valid = params.validate().is_ok()
        || (params.beta == T::zero()
            && params.gamma == T::zero()
            && ValidatedParams::unweighted(params.d, params.p).is_ok());
    let kind = if !valid {
        RegionKind::OutsideCone
    } else if params.gamma >= T::zero() {
        RegionKind::Symmetry
    } else if margin.abs() <= lit(ON_CURVE_TOL) {
        RegionKind::OnCurve
    } else if margin > T::zero() {
        RegionKind::SymmetryBreaking
    } else {
        RegionKind::Symmetry
    };
    RegionLabel { kind, margin }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegionCell<T> {
    pub gamma: T,
    pub beta: T,
    pub label: RegionLabel<T>,
}

/// Row-major grid: row index runs over β, column index over γ.
#[derive(Clone, Debug, Serialize)]
pub struct RegionGrid<T> {
    pub d: u32,
    pub p: T,
    pub n_gamma: usize,
    pub n_beta: usize,
    pub cells: Vec<RegionCell<T>>,
}

impl<T: Real> RegionGrid<T> {
    pub fn cell(&self, i_beta: usize, i_gamma: usize) -> &RegionCell<T> {
        &self.cells[i_beta * self.n_gamma + i_gamma]
    }

    pub fn count(&self, kind: RegionKind) -> usize {
        self.cells.iter().filter(|c| c.label.kind == kind).count()
    }
}

/// Labels the cell centers of a `res_gamma × res_beta` grid. Cells below
/// β = d − 2 + (γ−d)/p are marked outside the cone.
pub fn region_grid<T: Real>(
    d: u32,
    p: T,
    gamma_range: (T, T),
    beta_range: (T, T),
    resolution: (usize, usize),
) -> Result<RegionGrid<T>, SymmetryError> {
    let (ng, nb) = resolution;
    if ng < 2 || nb < 2 {
        return Err(SymmetryError::PreconditionViolated("resolution must be at least 2 per axis".into()));
    }
    if !(gamma_range.0 < gamma_range.1) || !(beta_range.0 < beta_range.1) {
        return Err(SymmetryError::PreconditionViolated("ranges must satisfy lo < hi".into()));
    }
    let half = lit::<T>(0.5);
    let hg = (gamma_range.1 - gamma_range.0) / T::from_usize_lossy(ng);
    let hb = (beta_range.1 - beta_range.0) / T::from_usize_lossy(nb);
    let dd = df::<T>(d);
    let cells = (0..ng * nb)
        .into_par_iter()
        .map(|k| {
            let (ib, ig) = (k / ng, k % ng);
            let gamma = gamma_range.0 + (T::from_usize_lossy(ig) + half) * hg;
            let beta = beta_range.0 + (T::from_usize_lossy(ib) + half) * hb;
            let mut label = classify(&ProblemParams::new(d, beta, gamma, p));
            if beta < dd - lit(2.0) + (gamma - dd) / p {
                label.kind = RegionKind::OutsideCone;
            }
            RegionCell { gamma, beta, label }
        })
        .collect();
    Ok(RegionGrid { d, p, n_gamma: ng, n_beta: nb, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_fs_values() {
        for d in 2..8 {
            assert_eq!(beta_fs(0.0, d), 0.0);
        }
        assert!((beta_fs(-2.0, 4) - (2.0 - 24f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn classify_examples() {
        let k = |b, g| classify(&ProblemParams::new(4, b, g, 1.2)).kind;
        assert_eq!(k(-2.95, -2.0), RegionKind::Symmetry);
        assert_eq!(k(-2.5, -2.0), RegionKind::SymmetryBreaking);
        assert_eq!(k(0.0, 1.0), RegionKind::Symmetry);
        assert_eq!(k(-4.1, -2.0), RegionKind::OutsideCone);
        assert_eq!(k(0.0, 0.0), RegionKind::Symmetry);
        let g = -2.0;
        assert_eq!(k(beta_fs(g, 4), g), RegionKind::OnCurve);
    }

    #[test]
    fn gap_examples() {
        let s = spectral_gap(0.5f64, 6.0, 4, 6.0).unwrap();
        assert_eq!(s.branch, Branch::RadialBranch);
        assert!((s.threshold - 0.6).abs() < 1e-15);
        assert!((s.lambda - 3.0).abs() < 1e-15);
        let s = spectral_gap(1.0f64, 6.0, 4, 6.0).unwrap();
        assert_eq!(s.branch, Branch::AngularBranch);
        assert!((s.eta.unwrap() - (28f64.sqrt() - 4.0) / 2.0).abs() < 1e-15);
        assert!((s.lambda / 7.749_011 - 1.0).abs() < 1e-6);
        assert!(spectral_gap(1.0, 6.0, 4, 5.0).is_err());
    }

    #[test]
    fn eta_at_threshold_is_one() {
        for &(d, n) in &[(2u32, 3.0f64), (4, 6.0), (5, 11.7)] {
            assert!((eta(alpha_fs(d, n), n, d) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn margin_sign_examples() {
        let v = ProblemParams::new(4, -2.5, -2.0, 1.2).validate().unwrap();
        assert!(instability_margin(&v).unwrap() > 0.0);
        let v = ProblemParams::new(4, 0.0, 1.0, 1.2).validate().unwrap();
        assert!(instability_margin(&v).unwrap() <= 0.0);
    }

    #[test]
    fn grid_small() {
        let g = region_grid(4, 1.2, (-12.0, 4.0), (-10.0, 2.0), (40, 30)).unwrap();
        assert_eq!(g.cells.len(), 1200);
        assert!(g.count(RegionKind::SymmetryBreaking) > 0);
        assert!(g.cells.iter().all(|c| c.gamma < 0.0 || c.label.kind != RegionKind::SymmetryBreaking));
        assert!(region_grid(4, 1.2, (-1.0, 1.0), (-1.0, 1.0), (1, 5)).is_err());
    }
}
