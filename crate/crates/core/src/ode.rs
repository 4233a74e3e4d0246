//! Embedded Dormand-Prince 5(4) integrator with step-size control.

use crate::real::{lit, Real};

#[derive(Clone, Copy, Debug)]
pub struct OdeConfig<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_steps: usize,
}

impl<T: Real> Default for OdeConfig<T> {
    fn default() -> Self {
        Self { rel_tol: lit(1e-12), abs_tol: lit(1e-14), max_steps: 1_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OdeStop {
    Reached,
    /// the stop predicate fired; the state is the first accepted one where it holds
    Event,
    NonFinite,
    StepLimit,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// differences between the 5th and 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<T: Real, const N: usize>(y: &[T; N], terms: &[(f64, &[T; N])], h: T) -> [T; N] {
    let mut out = *y;
    for (c, k) in terms {
        let c = lit::<T>(*c) * h;
        for i in 0..N {
            out[i] = out[i] + c * k[i];
        }
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// `h` carries the step size between calls; pass zero for an automatic
/// first guess. `stop` is checked after every accepted step.
pub fn integrate<T, F, S, const N: usize>(
    f: &F,
    t0: T,
    y0: [T; N],
    t1: T,
    h: &mut T,
    cfg: &OdeConfig<T>,
    stop: &S,
) -> (T, [T; N], OdeStop)
where
    T: Real,
    F: Fn(T, &[T; N]) -> [T; N],
    S: Fn(T, &[T; N]) -> bool,
{
    let dir = if t1 >= t0 { T::one() } else { -T::one() };
    let span = (t1 - t0).abs();
    if span == T::zero() {
        return (t0, y0, OdeStop::Reached);
    }
    let mut t = t0;
    let mut y = y0;
    let mut step = if *h == T::zero() { span * lit(1e-3) } else { h.abs().min(span) };
    let mut k1 = f(t, &y);
    for _ in 0..cfg.max_steps {
        let remaining = (t1 - t).abs();
        if remaining <= T::epsilon() * (T::one() + t1.abs()) * lit(4.0) {
            return (t1, y, OdeStop::Reached);
        }
        let last = step >= remaining;
        let hs = if last { remaining } else { step } * dir;
        let k2 = f(t + lit::<T>(C2) * hs, &axpy(&y, &[(A21, &k1)], hs));
        let k3 = f(t + lit::<T>(C3) * hs, &axpy(&y, &[(A31, &k1), (A32, &k2)], hs));
        let k4 = f(t + lit::<T>(C4) * hs, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], hs));
        let k5 = f(t + lit::<T>(C5) * hs, &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], hs));
        let k6 = f(t + hs, &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], hs));
        let yn = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], hs);
        let k7 = f(t + hs, &yn);
        if yn.iter().chain(k7.iter()).any(|v| !v.is_finite()) {
            step = step * lit(0.25);
            if step < T::epsilon() * span {
                *h = step;
                return (t, y, OdeStop::NonFinite);
            }
            continue;
        }
        let mut err = T::zero();
        for i in 0..N {
            let e = hs
                * (lit::<T>(E1) * k1[i] + lit::<T>(E3) * k3[i] + lit::<T>(E4) * k4[i] + lit::<T>(E5) * k5[i]
                    + lit::<T>(E6) * k6[i]
                    + lit::<T>(E7) * k7[i]);
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(yn[i].abs());
            err = err.max((e / sc).abs());
        }
        if err <= T::one() {
            t = if last { t1 } else { t + hs };
            y = yn;
            k1 = k7;
            let grow = if err == T::zero() { lit(5.0) } else { (lit::<T>(0.9) * err.powf(lit(-0.2))).min(lit(5.0)) };
            if !last {
                step = step * grow;
            }
            *h = step;
            if stop(t, &y) {
                return (t, y, OdeStop::Event);
            }
            if last {
                return (t, y, OdeStop::Reached);
            }
        } else {
            step = step * (lit::<T>(0.9) * err.powf(lit(-0.25))).max(lit(0.2));
        }
    }
    (t, y, OdeStop::StepLimit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut h = 0.0;
        let (t, y, st) = integrate(&f, 0.0, [1.0, 0.0], 10.0, &mut h, &OdeConfig::default(), &|_, _| false);
        assert_eq!(st, OdeStop::Reached);
        assert_eq!(t, 10.0);
        assert!((y[0] - 10f64.cos()).abs() < 1e-10);
        let (_, yb, _) = integrate(&f, 10.0, y, 0.0, &mut h, &OdeConfig::default(), &|_, _| false);
        assert!((yb[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn event_stops() {
        let f = |_t: f64, _y: &[f64; 1]| [-1.0];
        let mut h = 0.0;
        let (t, y, st) = integrate(&f, 0.0, [1.0], 5.0, &mut h, &OdeConfig::default(), &|_, y| y[0] < 0.0);
        assert_eq!(st, OdeStop::Event);
        assert!(y[0] < 0.0 && t < 5.0);
    }
}
