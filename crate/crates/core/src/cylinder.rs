//! The Emden-Fowler variables φ(z, ω) = e^{az} v(e^{−z}, ω), z = −ln s,
//! a = (2−n)/2, and the asymptotic checks carried out in them.

use crate::flow::{pressure, FlowGrid, FlowState, StencilOrder};
use crate::params::CylinderParams;
use crate::radial::{least_squares_slope, Profile};
use crate::real::{lit, Real};
use crate::special::sphere_area;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CylinderError {
    #[error("grid too coarse: {0} z-nodes (need at least 32)")]
    GridTooCoarse(usize),
    #[error("window too narrow: {0} nodes (need at least 20)")]
    WindowTooNarrow(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("node {0} out of range")]
    OutOfRange(usize),
}

/// Orientation of the cylinder: `Plus` is z → +∞ (s → 0), `Minus` is z → −∞ (s → ∞).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    Plus,
    Minus,
}

/// φ on a uniform z-grid times a periodic θ-grid (`ntheta = 1`: z only).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CylinderFunction<T> {
    pub z: Vec<T>,
    pub ntheta: usize,
    /// row-major, z outer
    pub phi: Vec<T>,
    pub d: u32,
    pub n: T,
    pub p: T,
    pub alpha: T,
    pub a: T,
}

fn uniform_grid<T: Real>(z_min: T, z_max: T, nz: usize) -> Result<Vec<T>, CylinderError> {
    if nz < 2 || !(z_min < z_max) {
        return Err(CylinderError::InvalidGrid("need z_min < z_max and at least 2 nodes".into()));
    }
    let h = (z_max - z_min) / T::from_usize_lossy(nz - 1);
    Ok((0..nz).map(|i| z_min + h * T::from_usize_lossy(i)).collect())
}

impl<T: Real> CylinderFunction<T> {
    pub fn nz(&self) -> usize {
        self.z.len()
    }

    pub fn dz(&self) -> T {
        self.z[1] - self.z[0]
    }

    pub fn theta(&self, j: usize) -> T {
        T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(self.ntheta)
    }

    /// Builds φ from v(s, θ) sampled at s = e^{−z}.
    pub fn from_fn<F: Fn(T, T) -> T>(
        v: F,
        cyl: &CylinderParams<T>,
        z_range: (T, T),
        nz: usize,
        ntheta: usize,
    ) -> Result<Self, CylinderError> {
        if ntheta == 0 || (ntheta > 1 && cyl.d() != 2) {
            return Err(CylinderError::InvalidGrid("angular grids need d = 2".into()));
        }
        let z = uniform_grid(z_range.0, z_range.1, nz)?;
        let a = (lit::<T>(2.0) - cyl.n()) / lit(2.0);
        let mut phi = Vec::with_capacity(nz * ntheta);
        for zi in &z {
            let s = (-*zi).exp();
            for j in 0..ntheta {
                let th = T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(ntheta);
                phi.push((a * *zi).exp() * v(s, th));
            }
        }
        Ok(Self { z, ntheta, phi, d: cyl.d(), n: cyl.n(), p: cyl.p(), alpha: cyl.alpha(), a })
    }

    /// Inverse transform: v = e^{−az} φ at s = e^{−z}, same layout as `phi`.
    pub fn to_v(&self) -> Vec<T> {
        let nt = self.ntheta;
        self.phi.iter().enumerate().map(|(k, f)| (-self.a * self.z[k / nt]).exp() * *f).collect()
    }

    /// Builds φ from samples of v laid out like `phi`.
    pub fn from_v_samples(
        v: &[T],
        cyl: &CylinderParams<T>,
        z_range: (T, T),
        nz: usize,
        ntheta: usize,
    ) -> Result<Self, CylinderError> {
        if v.len() != nz * ntheta {
            return Err(CylinderError::InvalidGrid(format!("{} samples for a {nz} x {ntheta} grid", v.len())));
        }
        let mut out = Self::from_fn(|_, _| T::one(), cyl, z_range, nz, ntheta)?;
        let nt = ntheta;
        for (k, f) in out.phi.iter_mut().enumerate() {
            *f = (out.a * out.z[k / nt]).exp() * v[k];
        }
        Ok(out)
    }

    /// h = e^{((n−2)p−n)z} φ^{2p−1} − e^{((n−2)p−n−2)z/2} φ^p
    pub fn forcing(&self) -> Vec<T> {
        let (n, p) = (self.n, self.p);
        let two = lit::<T>(2.0);
        let nt = self.ntheta;
        self.phi
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let z = self.z[k / nt];
                let fa = f.abs();
                (((n - two) * p - n) * z).exp() * fa.powf(two * p - T::one())
                    - (((n - two) * p - n - two) * z / two).exp() * fa.powf(p)
            })
            .collect()
    }
}

/// φ(z) = e^{az} v(e^{−z}) for a radial profile.
pub fn to_cylinder_fn<T: Real, P: Profile<T> + ?Sized>(
    v: &P,
    cyl: &CylinderParams<T>,
    z_range: (T, T),
    nz: usize,
) -> Result<CylinderFunction<T>, CylinderError> {
    CylinderFunction::from_fn(|s, _| v.value(s), cyl, z_range, nz, 1)
}

/// Residual −α²φ_zz − Δ_ωφ + a²α²φ − h at interior nodes, second-order
/// centered; `with_forcing = false` drops h.
pub fn phi_residual_field<T: Real>(phi: &CylinderFunction<T>, with_forcing: bool) -> Result<Vec<T>, CylinderError> {
    let nz = phi.nz();
    if nz < 32 {
        return Err(CylinderError::GridTooCoarse(nz));
    }
    let nt = phi.ntheta;
    let h = phi.dz();
    let dth = T::TAU() / T::from_usize_lossy(nt);
    let a2 = phi.alpha * phi.alpha;
    let h_field = if with_forcing { phi.forcing() } else { vec![T::zero(); phi.phi.len()] };
    let two = lit::<T>(2.0);
    let mut out = Vec::with_capacity((nz - 2) * nt);
    for i in 1..nz - 1 {
        for j in 0..nt {
            let at = |ii: usize, jj: usize| phi.phi[ii * nt + jj];
            let fzz = (at(i + 1, j) - two * at(i, j) + at(i - 1, j)) / (h * h);
            let ang = if nt > 1 {
                (at(i, (j + 1) % nt) - two * at(i, j) + at(i, (j + nt - 1) % nt)) / (dth * dth)
            } else {
                T::zero()
            };
            out.push(-a2 * fzz - ang + phi.a * phi.a * a2 * at(i, j) - h_field[i * nt + j]);
        }
    }
    Ok(out)
}

/// Sup-norm of [`phi_residual_field`] with the forcing included.
pub fn phi_residual<T: Real>(phi: &CylinderFunction<T>) -> Result<T, CylinderError> {
    Ok(phi_residual_field(phi, true)?.into_iter().map(|r| r.abs()).fold(T::zero(), T::max))
}

fn end_window<T: Real>(z: &[T], end: End, window: Option<(T, T)>) -> Vec<usize> {
    let nz = z.len();
    match window {
        Some((lo, hi)) => (0..nz).filter(|&i| z[i] >= lo && z[i] <= hi).collect(),
        None => {
            let q = nz / 4;
            match end {
                End::Plus => (nz - q..nz).collect(),
                End::Minus => (0..q).collect(),
            }
        }
    }
}

/// Least-squares slope of ln|f| against z over a window (default: the outer
/// quarter of the grid at `end`); f is θ-averaged first.
pub fn log_slope<T: Real>(z: &[T], ntheta: usize, f: &[T], end: End, window: Option<(T, T)>) -> Result<T, CylinderError> {
    let idx = end_window(z, end, window);
    let pts: Vec<(T, T)> = idx
        .iter()
        .filter_map(|&i| {
            let mean = (0..ntheta).map(|j| f[i * ntheta + j].abs()).sum::<T>() / T::from_usize_lossy(ntheta);
            (mean > T::zero() && mean.is_finite()).then(|| (z[i], mean.ln()))
        })
        .collect();
    if pts.len() < 20 {
        return Err(CylinderError::WindowTooNarrow(pts.len()));
    }
    Ok(least_squares_slope(&pts))
}

/// Decay rate of φ at one end: a at `Plus`, a + 2/(p−1) expected at `Minus`.
pub fn asymptotic_fit<T: Real>(phi: &CylinderFunction<T>, end: End, window: Option<(T, T)>) -> Result<T, CylinderError> {
    log_slope(&phi.z, phi.ntheta, &phi.phi, end, window)
}

/// Decay rate of the forcing h at one end.
pub fn forcing_fit<T: Real>(phi: &CylinderFunction<T>, end: End, window: Option<(T, T)>) -> Result<T, CylinderError> {
    log_slope(&phi.z, phi.ntheta, &phi.forcing(), end, window)
}

/// The five sphere integrals at one radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SphereIntegrals<T> {
    pub s: T,
    /// ∮ |𝖯′|²
    pub i: T,
    /// ∮ |∇_ω𝖯|²
    pub ii: T,
    /// ∮ |𝖯″|²
    pub iii: T,
    /// ∮ |∇_ω𝖯′ − ∇_ω𝖯/s|²
    pub iv: T,
    /// ∮ |Δ_ω𝖯/s²|²
    pub v: T,
}

/// Sphere integrals of a pressure field sampled on a flow grid (z = ln s
/// there), at node `i`, with second-order centered stencils.
pub fn sphere_integrals_at_node<T: Real>(p: &[T], grid: &FlowGrid<T>, i: usize) -> Result<SphereIntegrals<T>, CylinderError> {
    if i == 0 || i + 1 >= grid.nz {
        return Err(CylinderError::OutOfRange(i));
    }
    if p.len() != grid.len() {
        return Err(CylinderError::InvalidGrid("pressure field does not match the grid".into()));
    }
    let nt = grid.ntheta;
    let h = grid.dz();
    let two = lit::<T>(2.0);
    let z = grid.z()[i];
    let (e1, e2) = ((-z).exp(), (-two * z).exp());
    let at = |ii: usize, jj: usize| p[ii * nt + jj];
    let pz = |ii: usize, jj: usize| (at(ii + 1, jj) - at(ii - 1, jj)) / (two * h);
    let (dth, weight) = if nt > 1 {
        let dth = T::TAU() / T::from_usize_lossy(nt);
        (dth, dth)
    } else {
        (T::one(), sphere_area::<T>(grid.d))
    };
    let (mut si, mut sii, mut siii, mut siv, mut sv) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for j in 0..nt {
        let fz = pz(i, j);
        let fzz = (at(i + 1, j) - two * at(i, j) + at(i - 1, j)) / (h * h);
        let (ft, ftt, fzt) = if nt > 1 {
            let (jp, jm) = ((j + 1) % nt, (j + nt - 1) % nt);
            (
                (at(i, jp) - at(i, jm)) / (two * dth),
                (at(i, jp) - two * at(i, j) + at(i, jm)) / (dth * dth),
                (pz(i, jp) - pz(i, jm)) / (two * dth),
            )
        } else {
            (T::zero(), T::zero(), T::zero())
        };
        let d1 = e1 * fz;
        let d2 = e2 * (fzz - fz);
        si = si + d1 * d1;
        sii = sii + ft * ft;
        siii = siii + d2 * d2;
        let mixed = e1 * (fzt - ft);
        siv = siv + mixed * mixed;
        let lap = e2 * ftt;
        sv = sv + lap * lap;
    }
    Ok(SphereIntegrals { s: grid.s(i), i: si * weight, ii: sii * weight, iii: siii * weight, iv: siv * weight, v: sv * weight })
}

/// [`sphere_integrals_at_node`] at the node nearest to radius `s`.
pub fn sphere_integrals<T: Real>(p: &[T], grid: &FlowGrid<T>, s: T) -> Result<SphereIntegrals<T>, CylinderError> {
    let z = s.ln();
    let i = ((z - grid.z_min) / grid.dz()).round().to_usize().unwrap_or(0).clamp(1, grid.nz - 2);
    sphere_integrals_at_node(p, grid, i)
}

/// Sphere integrals of the pressure of the translated d = 2 profile
/// u = (1 + |x − x₀|²)^{−1/(1−m)}, x = s(cos θ, sin θ), |x₀| = `shift`, at
/// every node of a Δz = 0.01 grid with s in `range`.
pub fn translated_integrals<T: Real>(
    alpha: T,
    n: T,
    m: T,
    shift: T,
    range: (T, T),
    ntheta: usize,
) -> Result<Vec<SphereIntegrals<T>>, CylinderError> {
    let invalid = |e: crate::flow::FlowError| CylinderError::InvalidGrid(e.to_string());
    let half = lit::<T>(0.5);
    let (z_lo, z_hi) = (range.0.ln() - half, range.1.ln() + half);
    let nz = ((z_hi - z_lo) / lit(0.01)).ceil().to_usize().ok_or(CylinderError::InvalidGrid("bad range".into()))? + 1;
    let grid = FlowGrid::new(z_lo, z_hi, nz, ntheta, 2, alpha, n, m, StencilOrder::Second).map_err(invalid)?;
    let nu = T::one() / (T::one() - m);
    let two = lit::<T>(2.0);
    let u = grid.sample(|s, th| (T::one() + s * s - two * s * shift * th.cos() + shift * shift).powf(-nu));
    let state = FlowState::new(u, &grid).map_err(invalid)?;
    let p = pressure(&state, &grid).map_err(invalid)?;
    let mut out = Vec::new();
    for i in 1..grid.nz - 1 {
        let s = grid.s(i);
        if s >= range.0 && s <= range.1 {
            out.push(sphere_integrals_at_node(&p, &grid, i)?);
        }
    }
    Ok(out)
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope<T: Real>(pts: &[(T, T)]) -> T {
    let logs: Vec<(T, T)> = pts.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    least_squares_slope(&logs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::RadialProfile;

    fn cyl() -> CylinderParams<f64> {
        CylinderParams::new(4, 0.5, 6.0, 1.2).unwrap()
    }

    #[test]
    fn pure_power_maps_to_one() {
        let c = cyl();
        let f = CylinderFunction::from_fn(|s, _| s.powf(-2.0), &c, (-3.0, 3.0), 64, 1).unwrap();
        assert!(f.phi.iter().all(|x| (x - 1.0).abs() < 1e-13));
        let r = phi_residual_field(&f, false).unwrap();
        let target = 4.0 * 0.25;
        assert!(r.iter().all(|x| (x - target).abs() < 1e-10));
    }

    #[test]
    fn round_trip() {
        let v: Vec<f64> = (0..64 * 8).map(|k| 1.0 + (k as f64 * 0.37).sin().abs()).collect();
        let c2 = CylinderParams::new(2, 0.5, 6.0, 1.2).unwrap();
        let f = CylinderFunction::from_v_samples(&v, &c2, (-2.0, 2.0), 64, 8).unwrap();
        let back = f.to_v();
        assert!(v.iter().zip(&back).all(|(a, b)| (a / b - 1.0).abs() < 1e-14));
    }

    #[test]
    fn ground_state_residual_is_second_order() {
        let c = cyl();
        let (amp, mu) = crate::radial::cylinder_ground_state(&c).unwrap();
        let v = move |s: f64| amp * (1.0 + mu * mu * s * s).powf(-1.0 / 0.2);
        let r = |nz| phi_residual(&CylinderFunction::from_fn(|s, _| v(s), &c, (-6.0, 6.0), nz, 1).unwrap()).unwrap();
        let (coarse, fine) = (r(16001), r(32001));
        assert!(fine < 1e-5, "{fine}");
        assert!((coarse / fine - 4.0).abs() < 0.2, "{}", coarse / fine);
    }

    #[test]
    fn v_star_rates() {
        let c = cyl();
        let f = to_cylinder_fn(&RadialProfile::v_star(1.2), &c, (-15.0, 15.0), 601).unwrap();
        let plus = asymptotic_fit(&f, End::Plus, None).unwrap();
        let minus = asymptotic_fit(&f, End::Minus, None).unwrap();
        assert!((plus / f.a - 1.0).abs() < 0.01, "{plus}");
        let expect = f.a + 2.0 / 0.2;
        assert!((minus / expect - 1.0).abs() < 0.01, "{minus}");
        let hp = forcing_fit(&f, End::Plus, None).unwrap();
        assert!(hp <= -(6.0 + 2.0) / 2.0 + 0.01, "{hp}");
    }
}
