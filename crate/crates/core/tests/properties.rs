use ckn_core::cylinder::CylinderFunction;
use ckn_core::params::{CylinderParams, ProblemParams, ValidatedParams};
use ckn_core::quadrature::{integrate_half_line, QuadratureConfig};
use ckn_core::radial::{cylinder_norms, quotient_flat, weighted_norm, RadialProfile};
use ckn_core::spectral::{quadratic_form, TrialFunction};
use ckn_core::symmetry::{alpha_fs, beta_fs, branch_threshold, classify, instability_margin, spectral_gap, RegionKind};
use proptest::prelude::*;

/// A cone point from three unit fractions.
fn cone_point(d: u32, g: f64, b: f64, q: f64) -> ValidatedParams<f64> {
    let df = d as f64;
    let gamma = -10.0 + g * (df - 1e-3 + 10.0);
    let lo = gamma - 2.0;
    let hi = ((df - 2.0) * gamma / df).min(df - 2.0);
    let beta = lo + b * (hi - lo);
    let raw = ProblemParams::new(d, beta, gamma, 2.0);
    let ps = raw.p_star();
    ProblemParams::new(d, beta, gamma, 1.0 + q * (ps - 1.0)).validate().expect("sampled inside the cone")
}

fn fractions() -> impl Strategy<Value = (u32, f64, f64, f64)> {
    (2u32..=5, 0.01f64..0.99, 0.01f64..0.99, 0.02f64..0.98)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cylinder_round_trip((d, g, b, q) in fractions()) {
        let v = cone_point(d, g, b, q);
        let back = v.to_cylinder().to_flat().unwrap();
        let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(1.0);
        prop_assert!(rel(v.beta(), back.beta()) < 1e-12);
        prop_assert!(rel(v.gamma(), back.gamma()) < 1e-12);
    }

    #[test]
    fn exponent_invariants((d, g, b, q) in fractions()) {
        let v = cone_point(d, g, b, q);
        let n = v.n();
        let e = v.exponents();
        prop_assert!(1.0 - 1.0 / n < e.m && e.m < 1.0);
        prop_assert!(e.sigma > 1.0);
        prop_assert!(e.delta > n);
        prop_assert!((e.zeta - v.zeta_closed()).abs() <= 1e-12 * e.zeta.abs().max(1e-3));
    }

    #[test]
    fn threshold_equivalence((d, g, b, q) in fractions()) {
        let v = cone_point(d, g, b, q);
        prop_assume!(v.gamma() < 0.0);
        let margin = v.beta() - beta_fs(v.gamma(), d);
        prop_assume!(margin.abs() > 1e-10);
        let cyl = v.to_cylinder();
        let excess = cyl.alpha() - alpha_fs(d, cyl.n());
        prop_assert_eq!(margin > 0.0, excess > 0.0);
    }

    #[test]
    fn breaking_chain((d, g, b, q) in fractions()) {
        let v = cone_point(d, g, b, q);
        let cyl = v.to_cylinder();
        let excess = cyl.alpha() - alpha_fs(d, cyl.n());
        prop_assume!(excess.abs() > 1e-8);
        let margin = instability_margin(&v).unwrap();
        let label = classify(&v.raw()).kind;
        prop_assert_eq!(margin > 0.0, excess > 0.0);
        prop_assert_eq!(label == RegionKind::SymmetryBreaking, excess > 0.0);
    }

    #[test]
    fn branch_continuity(d in 2u32..=6, dn in 0.1f64..6.0, dd in 0.0f64..6.0) {
        let n = d as f64 + dn;
        let delta = n + dd;
        let a2 = branch_threshold(n, d, delta);
        let radial = 2.0 * a2 * (2.0 * delta - n);
        let eta = ckn_core::symmetry::eta(a2.sqrt(), n, d);
        let angular = 2.0 * a2 * delta * eta;
        prop_assert!((radial - angular).abs() <= 1e-12 * radial);
        prop_assert!((eta - (2.0 * delta - n) / delta).abs() <= 1e-12);
    }

    #[test]
    fn norm_scaling_law((d, g, b, q) in fractions(), lam in 0.1f64..10.0) {
        let v = cone_point(d, g, b, q);
        // w⋆ underflows for p this close to 1
        prop_assume!(v.p() > 1.05);
        let cfg = QuadratureConfig::default();
        let w = RadialProfile::w_star(&v);
        let qq = 2.0 * v.p();
        let base = weighted_norm(&w, qq, v.gamma(), d, &cfg).unwrap();
        let scaled = weighted_norm(&w.clone().scaled(1.0, lam), qq, v.gamma(), d, &cfg).unwrap();
        let expect = lam.powf(-(d as f64 - v.gamma()) / qq) * base;
        prop_assert!((scaled / expect - 1.0).abs() < 1e-9, "{} vs {}", scaled, expect);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quotient_scale_invariance((d, g, b, q) in fractions(), c in 0.1f64..10.0, lam in 0.1f64..10.0) {
        let v = cone_point(d, g, b, q);
        // w⋆ underflows for p this close to 1
        prop_assume!(v.p() > 1.05);
        let cfg = QuadratureConfig::default();
        let w = RadialProfile::w_star(&v);
        let base = quotient_flat(&w, &v, &cfg).unwrap();
        let moved = quotient_flat(&w.scaled(c, lam), &v, &cfg).unwrap();
        prop_assert!((moved / base - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sign_dichotomy((d, g, b, q) in fractions()) {
        let v = cone_point(d, g, b, q);
        let cyl = v.to_cylinder();
        let margin = instability_margin(&v).unwrap();
        prop_assume!(margin.abs() > 1e-8);
        let f = TrialFunction::angular_mode(cyl.alpha(), cyl.n(), d, 0);
        let form = quadratic_form(&f, cyl.alpha(), cyl.n(), d, v.p(), &QuadratureConfig::default()).unwrap();
        prop_assert_eq!(form < 0.0, margin > 0.0, "Q = {}, margin = {}", form, margin);
    }

    #[test]
    fn cylinder_transform_is_invertible(k in -4.0f64..4.0, c in 0.1f64..5.0) {
        let cyl = CylinderParams::new(2, 0.5, 4.0, 1.5).unwrap();
        let f = CylinderFunction::from_fn(|s: f64, th: f64| c * s.powf(k) * (2.0 + th.cos()), &cyl, (-4.0, 4.0), 40, 8).unwrap();
        let v = f.to_v();
        let g = CylinderFunction::from_v_samples(&v, &cyl, (-4.0, 4.0), 40, 8).unwrap();
        for (x, y) in f.phi.iter().zip(&g.phi) {
            prop_assert!((x / y - 1.0).abs() < 1e-14);
        }
    }
}

#[test]
fn spectral_gap_nondecreasing_in_alpha() {
    for &(d, n, delta) in &[(4u32, 6.0, 6.0), (2, 3.0, 5.0), (3, 7.5, 9.0)] {
        let mut last = 0.0;
        for k in 1..400 {
            let a2 = 0.01 * k as f64;
            let lam = spectral_gap(a2.sqrt(), n, d, delta).unwrap().lambda;
            assert!(lam >= last - 1e-12, "d={d} n={n} delta={delta} a2={a2}");
            last = lam;
        }
    }
}

#[test]
fn cylinder_norm_matches_beta_function() {
    // ∫₀^∞ (1+s²)^{−q/(p−1)} s^{n−1} ds = ½ B(n/2, q/(p−1) − n/2)
    use statrs::function::gamma::ln_gamma;
    let cfg = QuadratureConfig::default();
    for &(d, n, p) in &[(4u32, 6.0, 1.5), (4, 6.0, 1.2), (2, 3.0, 2.0), (3, 4.5, 1.7)] {
        let alpha = 0.7;
        let cyl = CylinderParams::new(d, alpha, n, p).unwrap();
        let norms = cylinder_norms(&RadialProfile::v_star(p), &cyl, &cfg).unwrap();
        let q = 2.0 * p;
        let (a, b) = (n / 2.0, q / (p - 1.0) - n / 2.0);
        let half_beta = 0.5 * (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp();
        let area = 2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / ln_gamma(d as f64 / 2.0).exp();
        let expect = (area * half_beta).powf(1.0 / q);
        assert!((norms.norm_2p / expect - 1.0).abs() < 1e-10, "d={d} n={n} p={p}");
    }
}

#[test]
fn quadrature_refinement_within_error_estimate() {
    let cfg = QuadratureConfig::default().with_rel_tol(1e-8);
    let finer = cfg.with_rel_tol(5e-9);
    let integrands: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(|r: f64| r.powf(2.5) * (1.0 + r * r).powf(-4.0)),
        Box::new(|r: f64| r.powf(-0.5) * (-r).exp()),
        Box::new(|r: f64| (1.0 + r.powf(1.3)).powf(-3.0)),
    ];
    for f in &integrands {
        let a = integrate_half_line(f, &cfg).unwrap();
        let b = integrate_half_line(f, &finer).unwrap();
        assert!((a.value - b.value).abs() <= a.error + b.error, "{} vs {} (err {})", a.value, b.value, a.error);
    }
}
