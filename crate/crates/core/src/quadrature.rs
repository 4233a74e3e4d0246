//! Adaptive Gauss-Kronrod (7/15) quadrature with global subdivision, and the
//! half-line rule used for radial integrals.

use crate::real::{lit, Real};
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadratureConfig<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    /// Break point between the direct piece and the inverted piece on (0, ∞).
    pub split: T,
    /// Maximal bisection depth of any panel.
    pub max_depth: usize,
}

impl<T: Real> Default for QuadratureConfig<T> {
    fn default() -> Self {
        Self { rel_tol: lit(1e-10), abs_tol: lit(1e-14), split: T::one(), max_depth: 200 }
    }
}

impl<T: Real> QuadratureConfig<T> {
    pub fn with_rel_tol(mut self, rel_tol: T) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum QuadError {
    #[error("integral does not converge: {0}")]
    NonConvergent(String),
    #[error("tolerance not met: value {value:.6e}, error estimate {error:.3e}")]
    ToleranceNotMet { value: f64, error: f64 },
    #[error("integrand is not finite at x = {0:.6e}")]
    NonFinite(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

struct Panel<T> {
    a: T,
    b: T,
    value: T,
    error: T,
    depth: usize,
}

impl<T: Real> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T: Real> Eq for Panel<T> {}
impl<T: Real> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

fn gk15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Result<(T, T), QuadError> {
    let half = lit::<T>(0.5);
    let c = (a + b) * half;
    let h = (b - a) * half;
    let check = |x: T, v: T| if v.is_finite() { Ok(v) } else { Err(QuadError::NonFinite(x.to_f64_lossy())) };
    let fc = check(c, f(c))?;
    let mut kron = fc * lit(WGK[7]);
    let mut gauss = fc * lit(WG[3]);
    let mut abs_k = fc.abs() * lit(WGK[7]);
    let mut fv = [T::zero(); 15];
    fv[7] = fc;
    for j in 0..7 {
        let dx = h * lit(XGK[j]);
        let (x1, x2) = (c - dx, c + dx);
        let f1 = check(x1, f(x1))?;
        let f2 = check(x2, f(x2))?;
        fv[j] = f1;
        fv[14 - j] = f2;
        kron = kron + (f1 + f2) * lit(WGK[j]);
        abs_k = abs_k + (f1.abs() + f2.abs()) * lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + (f1 + f2) * lit(WG[j / 2]);
        }
    }
    let mean = kron * half;
    let mut asc = (fc - mean).abs() * lit(WGK[7]);
    for j in 0..7 {
        asc = asc + ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs()) * lit(WGK[j]);
    }
    let value = kron * h;
    let resasc = asc * h.abs();
    let resabs = abs_k * h.abs();
    let mut err = ((kron - gauss) * h).abs();
    if resasc > T::zero() && err > T::zero() {
        let r = lit::<T>(200.0) * err / resasc;
        err = resasc * if r < T::one() { r.powf(lit(1.5)) } else { T::one() };
    }
    let floor = lit::<T>(50.0) * T::epsilon() * resabs;
    Ok((value, err.max(floor)))
}

/// ∫_a^b f with global adaptive bisection.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, cfg: &QuadratureConfig<T>) -> Result<Estimate<T>, QuadError> {
    integrate_partition(f, &[a, b], cfg)
}

/// ∫ f over the span of `points`, starting from the panels they delimit.
pub fn integrate_partition<T: Real, F: Fn(T) -> T>(f: F, points: &[T], cfg: &QuadratureConfig<T>) -> Result<Estimate<T>, QuadError> {
    if !(cfg.rel_tol > T::zero()) || !(cfg.abs_tol > T::zero()) || cfg.max_depth < 8 {
        return Err(QuadError::InvalidConfig("tolerances must be positive and max_depth >= 8".into()));
    }
    let mut evaluations = 0;
    let mut heap = BinaryHeap::new();
    let mut frozen_value = T::zero();
    let mut frozen_error = T::zero();
    let mut total = T::zero();
    let mut total_err = T::zero();
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a == b {
            continue;
        }
        let (value, error) = gk15(&f, a, b)?;
        evaluations += 15;
        total = total + value;
        total_err = total_err + error;
        heap.push(Panel { a, b, value, error, depth: 0 });
    }
    let max_panels = 20_000;
    loop {
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if heap.len() > max_panels {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        if worst.depth >= cfg.max_depth {
            frozen_value = frozen_value + worst.value;
            frozen_error = frozen_error + worst.error;
            continue;
        }
        let mid = (worst.a + worst.b) * lit(0.5);
        let (v1, e1) = gk15(&f, worst.a, mid)?;
        let (v2, e2) = gk15(&f, mid, worst.b)?;
        evaluations += 30;
        total = total - worst.value + v1 + v2;
        total_err = total_err - worst.error + e1 + e2;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1, depth: worst.depth + 1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2, depth: worst.depth + 1 });
    }
    // resum from panels to shed accumulated round-off in the running totals
    let value = heap.iter().map(|p| p.value).fold(frozen_value, |s, v| s + v);
    let error = heap.iter().map(|p| p.error).fold(frozen_error, |s, v| s + v);
    let tol = cfg.abs_tol.max(cfg.rel_tol * value.abs());
    if error > tol {
        return Err(QuadError::ToleranceNotMet { value: value.to_f64_lossy(), error: error.to_f64_lossy() });
    }
    Ok(Estimate { value, error, evaluations })
}

const SEED_OCTAVES: i32 = 30;
const MAX_GRADE: f64 = 30.0;

/// ∫_0^∞ f, split at `cfg.split`; the outer piece uses r = 1/t.
pub fn integrate_half_line<T: Real, F: Fn(T) -> T>(f: F, cfg: &QuadratureConfig<T>) -> Result<Estimate<T>, QuadError> {
    integrate_half_line_graded(f, None, None, cfg)
}

/// ∫_0^∞ f for f ~ r^{origin} at 0 and f ~ r^{tail} at ∞. Each piece is
/// mapped by r = split·u^{±κ} with κ chosen so that the mapped integrand is
/// bounded at u = 0; `None` means κ = 1.
pub fn integrate_half_line_graded<T: Real, F: Fn(T) -> T>(
    f: F,
    origin: Option<T>,
    tail: Option<T>,
    cfg: &QuadratureConfig<T>,
) -> Result<Estimate<T>, QuadError> {
    let split = cfg.split;
    if !(split > T::zero()) {
        return Err(QuadError::InvalidConfig("split must be positive".into()));
    }
    let grade = |excess: Option<T>| match excess {
        Some(x) if x > T::zero() && x < T::one() => (T::one() / x).min(lit(MAX_GRADE)),
        _ => T::one(),
    };
    let k0 = grade(origin.map(|e| e + T::one()));
    let k1 = grade(tail.map(|e| -e - T::one()));
    // seed panels geometric in r so that features far from `split` are not missed
    let seeds = |k: T| {
        let mut pts: Vec<T> = (0..=SEED_OCTAVES).rev().map(|j| lit::<T>(0.5).powf(T::from_i32(j).expect("small") / k)).collect();
        pts.insert(0, T::zero());
        pts
    };
    let mapped = |r: T, jac: T| {
        if r == T::zero() || !r.is_finite() {
            T::zero()
        } else {
            f(r) * jac
        }
    };
    let inner = integrate_partition(|u: T| {
        let r = split * u.powf(k0);
        mapped(r, k0 * r / u)
    }, &seeds(k0), cfg)?;
    let outer = integrate_partition(|u: T| {
        let r = split * u.powf(-k1);
        mapped(r, k1 * r / u)
    }, &seeds(k1), cfg)?;
    Ok(Estimate {
        value: inner.value + outer.value,
        error: inner.error + outer.error,
        evaluations: inner.evaluations + outer.evaluations,
    })
}
