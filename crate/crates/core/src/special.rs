//! Gamma function and sphere areas.

use crate::real::{lit, Real};

// Lanczos coefficients for g = 7, nine terms.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum<T: Real>(x: T) -> T {
    let mut acc = lit::<T>(LANCZOS[0]);
    for (k, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + lit::<T>(c) / (x + T::from_usize_lossy(k - 1) + T::one());
    }
    acc
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma<T: Real>(x: T) -> T {
    let half = lit::<T>(0.5);
    if x < half {
        // reflection keeps the series in its accurate range
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let xm = x - T::one();
    let t = xm + lit::<T>(LANCZOS_G) + half;
    half * (T::TAU()).ln() + (xm + half) * t.ln() - t + lanczos_sum(xm).ln()
}

/// Γ(x) for x > 0.
pub fn gamma<T: Real>(x: T) -> T {
    let half = lit::<T>(0.5);
    if x < half {
        let pi = T::PI();
        return pi / ((pi * x).sin() * gamma(T::one() - x));
    }
    let xm = x - T::one();
    let t = xm + lit::<T>(LANCZOS_G) + half;
    T::TAU().sqrt() * t.powf(xm + half) * (-t).exp() * lanczos_sum(xm)
}

/// Euler Beta function B(a, b).
pub fn beta<T: Real>(a: T, b: T) -> T {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Surface area |S^{d-1}| = 2 π^{d/2} / Γ(d/2).
pub fn sphere_area<T: Real>(d: u32) -> T {
    let half_d = T::from_u32(d).expect("dimension") * lit(0.5);
    lit::<T>(2.0) * T::PI().powf(half_d) / gamma(half_d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_at_integers_and_half() {
        let mut fact = 1.0;
        for k in 1..15 {
            let g: f64 = gamma(k as f64);
            assert!((g / fact - 1.0).abs() < 1e-13, "k={k}");
            fact *= k as f64;
        }
        let g: f64 = gamma(0.5);
        assert!((g - std::f64::consts::PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn sphere_areas() {
        let pi = std::f64::consts::PI;
        assert!((sphere_area::<f64>(2) - 2.0 * pi).abs() < 1e-13);
        assert!((sphere_area::<f64>(3) - 4.0 * pi).abs() < 1e-13);
        assert!((sphere_area::<f64>(4) - 2.0 * pi * pi).abs() < 1e-12);
    }

    #[test]
    fn single_precision_runs() {
        let g: f32 = gamma(5.0);
        assert!((g - 24.0).abs() < 1e-3);
    }
}
