use crate::args::{Suite, VerifyArgs};
use crate::output::Output;
use crate::{CmdResult, Failure};
use anyhow::{anyhow, Result};
use ckn_core::cylinder::{asymptotic_fit, forcing_fit, phi_residual, to_cylinder_fn, translated_integrals, CylinderFunction, End};
use ckn_core::flow::{evolve, time_derivative, FlowGrid, FlowState, StencilOrder};
use ckn_core::params::{m_from_p, CylinderParams, ProblemParams, ValidatedParams};
use ckn_core::quadrature::QuadratureConfig;
use ckn_core::radial::{
    cylinder_ground_state, cylinder_norms, decay_exponent_fit, fit_scaling, optimal_constant_flat, shoot_radial, Profile,
    RadialProfile, ResidualGrid, ShootingConfig, FIT_FAIL_TOL,
};
use ckn_core::special::{beta, sphere_area};
use ckn_core::spectral::{gap_certificate, quadratic_form, TrialFunction};
use ckn_core::symmetry::{
    alpha_fs, beta_fs, branch_threshold, classify, eta, instability_margin, spectral_gap, Branch, RegionKind,
};
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

struct Runner {
    checks: Vec<Check>,
}

impl Runner {
    fn run(&mut self, suite: &'static str, name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) {
        let (passed, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e:#}")),
        };
        self.checks.push(Check { suite, name, passed, detail });
    }
}

const FRACTIONS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Cone point from unit fractions of the γ, β and p ranges.
fn cone_point(d: u32, g: f64, b: f64, q: f64) -> Result<ValidatedParams<f64>> {
    let df = d as f64;
    let gamma = -10.0 + g * (df - 1e-3 + 10.0);
    let lo = gamma - 2.0;
    let hi = ((df - 2.0) * gamma / df).min(df - 2.0);
    let beta = lo + b * (hi - lo);
    let ps = ProblemParams::new(d, beta, gamma, 2.0).p_star();
    let p = if q >= 1.0 { ps } else { 1.0 + q * (ps - 1.0) };
    Ok(ProblemParams::new(d, beta, gamma, p).validate()?)
}

fn cone_sample(d: u32) -> Result<Vec<ValidatedParams<f64>>> {
    let mut out = Vec::new();
    for g in FRACTIONS {
        for b in FRACTIONS {
            for q in [0.25, 0.5, 1.0] {
                out.push(cone_point(d, g, b, q)?);
            }
        }
    }
    Ok(out)
}

/// Midpoint exponent p = (1 + p⋆)/2 of the cylinder with n = d + 2.
fn mid_p(d: u32) -> (f64, f64) {
    let n = d as f64 + 2.0;
    (n, 1.0 + 0.5 * (n / (n - 2.0) - 1.0))
}

fn params(r: &mut Runner, d: u32) {
    r.run("params", "cylinder round trip", || {
        let mut worst = 0.0f64;
        for v in cone_sample(d)? {
            let back = v.to_cylinder().to_flat()?;
            worst = worst.max((v.beta() - back.beta()).abs() / v.beta().abs().max(1.0));
            worst = worst.max((v.gamma() - back.gamma()).abs() / v.gamma().abs().max(1.0));
        }
        Ok((worst < 1e-12, format!("max rel err {worst:.2e}")))
    });
    r.run("params", "exponent invariants", || {
        let mut bad = 0;
        let mut first = String::new();
        for v in cone_sample(d)? {
            let e = v.exponents();
            let n = v.n();
            let ok_m = 1.0 - 1.0 / n - 1e-12 < e.m && e.m < 1.0;
            let ok_rest = if v.is_critical() { (e.delta - n).abs() < 1e-12 } else { e.sigma > 1.0 && e.delta > n };
            let ok_zeta = (e.zeta - v.zeta_closed()).abs() <= 1e-12 * e.zeta.abs().max(1e-3);
            if !(ok_m && ok_rest && ok_zeta) {
                if bad == 0 {
                    first = format!(" (first: {:?} m={} sigma={} delta={} n={n} zeta {} vs {})", v.raw(), e.m, e.sigma, e.delta, e.zeta, v.zeta_closed());
                }
                bad += 1;
            }
        }
        Ok((bad == 0, format!("{bad} violations{first}")))
    });
    r.run("params", "theta = 1 at p_star", || {
        let mut worst = 0.0f64;
        for v in cone_sample(d)? {
            let c = ProblemParams::new(d, v.beta(), v.gamma(), v.p_star()).validate()?;
            worst = worst.max((c.exponents().theta - 1.0).abs());
        }
        Ok((worst < 1e-12, format!("max |theta - 1| {worst:.2e}")))
    });
}

fn symmetry(r: &mut Runner, d: u32) {
    r.run("symmetry", "threshold identity on the curve", || {
        let mut worst = 0.0f64;
        let mut count = 0;
        for k in 1..=50 {
            let gamma = -10.0 * k as f64 / 50.0;
            let b = beta_fs(gamma, d);
            let raw = ProblemParams::new(d, b, gamma, 2.0);
            let p = 1.0 + 0.5 * (raw.p_star() - 1.0);
            let Ok(v) = ProblemParams::new(d, b, gamma, p).validate() else { continue };
            let c = v.to_cylinder();
            worst = worst.max((c.alpha() - alpha_fs(d, c.n())).abs());
            count += 1;
        }
        Ok((count > 0 && worst <= 1e-10, format!("{count} points, max |alpha - alpha_FS| {worst:.2e}")))
    });
    r.run("symmetry", "branch continuity", || {
        let n = d as f64 + 2.0;
        let mut worst = 0.0f64;
        for delta in [n, n + 0.5, n + 3.0, 4.0 * n] {
            let a2 = branch_threshold(n, d, delta);
            let rad = 2.0 * a2 * (2.0 * delta - n);
            let ang = 2.0 * a2 * delta * eta(a2.sqrt(), n, d);
            worst = worst.max((rad - ang).abs() / rad);
        }
        Ok((worst <= 1e-12, format!("max rel gap {worst:.2e}")))
    });
    r.run("symmetry", "gap nondecreasing in alpha^2", || {
        let n = d as f64 + 2.0;
        let mut last = 0.0;
        for k in 1..=300 {
            let lam = spectral_gap((0.01 * k as f64).sqrt(), n, d, n)?.lambda;
            if lam < last - 1e-12 {
                return Ok((false, format!("drop at alpha^2 = {}", 0.01 * k as f64)));
            }
            last = lam;
        }
        Ok((true, "300-point scan".into()))
    });
    r.run("symmetry", "breaking chain", || {
        let mut bad = 0;
        let mut tested = 0;
        for v in cone_sample(d)? {
            let c = v.to_cylinder();
            let excess = c.alpha() - alpha_fs(d, c.n());
            if excess.abs() < 1e-8 {
                continue;
            }
            tested += 1;
            let margin = instability_margin(&v)?;
            let breaking = classify(&v.raw()).kind == RegionKind::SymmetryBreaking;
            if (margin > 0.0) != (excess > 0.0) || breaking != (excess > 0.0) {
                bad += 1;
            }
        }
        Ok((bad == 0, format!("{bad} of {tested} disagree")))
    });
}

fn radial(r: &mut Runner, d: u32) {
    let cfg = QuadratureConfig::default();
    r.run("radial", "cylinder norm against Beta function", || {
        let (n, p) = mid_p(d);
        let cyl = CylinderParams::new(d, 0.5, n, p)?;
        let q = 2.0 * p;
        let got = cylinder_norms(&RadialProfile::v_star(p), &cyl, &cfg)?.norm_2p.powf(q);
        let expect = sphere_area::<f64>(d) * 0.5 * beta(n / 2.0, q / (p - 1.0) - n / 2.0);
        let rel = (got / expect - 1.0).abs();
        Ok((rel < 1e-9, format!("rel err {rel:.2e}")))
    });
    r.run("radial", "dual-route constant", || {
        let mut worst = 0.0f64;
        for g in [0.3, 0.6, 0.9] {
            for b in [0.3, 0.6, 0.9] {
                let v = cone_point(d, g, b, 0.5)?;
                worst = worst.max(optimal_constant_flat(&v, &cfg, true)?.route_discrepancy);
            }
        }
        Ok((worst <= 1e-6, format!("max discrepancy {worst:.2e}")))
    });
    r.run("radial", "shooting against closed form", || {
        let (n, p) = mid_p(d);
        let cyl = CylinderParams::new(d, 0.5, n, p)?;
        let (amp, mu) = cylinder_ground_state(&cyl).ok_or_else(|| anyhow!("no closed form"))?;
        let exact = RadialProfile::v_star(p).scaled(amp, mu);
        let res = shoot_radial(&cyl, 2.0, &ShootingConfig::default())?;
        let worst = (0..=400)
            .map(|k| 10f64.powf(-2.0 + k as f64 / 100.0))
            .map(|s| (res.profile.value(s) - exact.value(s)).abs())
            .fold(0.0, f64::max);
        Ok((worst <= 1e-5, format!("sup distance {worst:.2e} on [1e-2, 1e2]")))
    });
    r.run("radial", "Euler-Lagrange fit of w_star", || {
        let v = cone_point(d, 0.5, 0.8, 0.5)?;
        let fit = fit_scaling(&v, &ResidualGrid::default())?;
        Ok((fit.residual < FIT_FAIL_TOL, format!("A = {:.6}, lambda = {:.6}, residual {:.2e}", fit.amplitude, fit.dilation, fit.residual)))
    });
    r.run("radial", "tail exponent of w_star", || {
        let v = cone_point(d, 0.5, 0.8, 0.5)?;
        let k = decay_exponent_fit(&RadialProfile::w_star(&v), (1e2, 1e3))?;
        let expect = (v.gamma() - 2.0 - v.beta()) / (v.p() - 1.0);
        let rel = (k / expect - 1.0).abs();
        Ok((rel < 5e-3, format!("slope {k:.5} vs {expect:.5}")))
    });
}

fn spectral(r: &mut Runner, d: u32) {
    let cfg = QuadratureConfig::default();
    let n = d as f64 + 2.0;
    for (name, factor, want) in [
        ("certificate on the radial branch", 0.5, Branch::RadialBranch),
        ("certificate on the angular branch", 1.5, Branch::AngularBranch),
    ] {
        r.run("spectral", name, || {
            let a2 = factor * branch_threshold(n, d, n);
            let rep = gap_certificate(a2.sqrt(), n, d, n, 20, 7, &cfg)?;
            let ok = rep.branch == want && (rep.min_rayleigh - rep.lambda).abs() <= 1e-6 * rep.lambda;
            Ok((ok, format!("Lambda {:.8}, min Rayleigh {:.8}", rep.lambda, rep.min_rayleigh)))
        });
    }
    r.run("spectral", "sign dichotomy", || {
        let mut bad = 0;
        let mut tested = 0;
        for v in cone_sample(d)? {
            let c = v.to_cylinder();
            let margin = instability_margin(&v)?;
            if margin.abs() < 1e-8 {
                continue;
            }
            tested += 1;
            let f = TrialFunction::angular_mode(c.alpha(), c.n(), d, 0);
            let q = quadratic_form(&f, c.alpha(), c.n(), d, v.p(), &cfg)?;
            if (q < 0.0) != (margin > 0.0) {
                bad += 1;
            }
        }
        Ok((bad == 0, format!("{bad} of {tested} disagree")))
    });
}

fn flow(r: &mut Runner, d: u32) {
    let (n, p) = mid_p(d);
    let m = m_from_p(p);
    let run = || -> Result<_> {
        let grid = FlowGrid::new(-4.0, 5.0, 256, 1, d, 0.5, n, m, StencilOrder::Fourth)?;
        let nu = 1.0 / (1.0 - m);
        let state = FlowState::new(grid.sample(|s, _| (1.0 + s * s).powf(-nu)), &grid)?;
        let out = evolve(&grid, state, 1e-3, 5e-5, Some(20_000))?;
        Ok((grid, out))
    };
    let result = run();
    let (grid, out) = match result {
        Ok(x) => x,
        Err(e) => {
            let msg = format!("{e:#}");
            r.run("flow", "Barenblatt run", || Err(anyhow!(msg)));
            return;
        }
    };
    r.run("flow", "mass conservation", || {
        let tol = 1e-12 * out.steps as f64;
        Ok((out.mass_drift.abs() <= tol, format!("drift {:.2e} over {} steps", out.mass_drift, out.steps)))
    });
    r.run("flow", "entropy production", || {
        let t: Vec<f64> = out.records.iter().map(|x| x.t).collect();
        let e: Vec<f64> = out.records.iter().map(|x| x.e).collect();
        let de = time_derivative(&t, &e);
        let worst = (1..t.len() - 1)
            .map(|k| (de[k] - (1.0 - m) * out.records[k].i).abs() / ((1.0 - m) * out.records[k].i).abs())
            .fold(0.0, f64::max);
        Ok((worst <= 1e-3, format!("max rel err {worst:.2e}")))
    });
    r.run("flow", "R integral on Barenblatt", || {
        let stats = ckn_core::flow::bakry_emery_decomposition(&out.final_state, &grid)?;
        let rel = stats.r_integral / stats.lp_square;
        Ok((rel >= -1e-6, format!("R / int (LP)^2 u^m = {rel:.2e}")))
    });
}

fn cylinder(r: &mut Runner, d: u32) {
    let (n, p) = mid_p(d);
    let k = 2.0 / (p - 1.0);
    r.run("cylinder", "transform round trip", || {
        let cyl = CylinderParams::new(d, 0.5, n, p)?;
        let f = to_cylinder_fn(&RadialProfile::v_star(p), &cyl, (-5.0, 5.0), 101)?;
        let g = CylinderFunction::from_v_samples(&f.to_v(), &cyl, (-5.0, 5.0), 101, 1)?;
        let worst = f.phi.iter().zip(&g.phi).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max);
        Ok((worst < 1e-14, format!("max rel err {worst:.2e}")))
    });
    r.run("cylinder", "asymptotic rates of v_star", || {
        let cyl = CylinderParams::new(d, 0.5, n, p)?;
        let f = to_cylinder_fn(&RadialProfile::v_star(p), &cyl, (-15.0, 15.0), 601)?;
        let plus = asymptotic_fit(&f, End::Plus, None)?;
        let minus = asymptotic_fit(&f, End::Minus, None)?;
        let ok = (plus / f.a - 1.0).abs() < 0.01 && (minus / (f.a + k) - 1.0).abs() < 0.01;
        Ok((ok, format!("plus {plus:.4} (a = {:.4}), minus {minus:.4} (a + 2/(p-1) = {:.4})", f.a, f.a + k)))
    });
    r.run("cylinder", "forcing envelopes", || {
        let cyl = CylinderParams::new(d, 0.5, n, p)?;
        let (amp, mu) = cylinder_ground_state(&cyl).ok_or_else(|| anyhow!("no closed form"))?;
        let f = to_cylinder_fn(&RadialProfile::v_star(p).scaled(amp, mu), &cyl, (-15.0, 15.0), 601)?;
        let plus = forcing_fit(&f, End::Plus, None)?;
        let minus = forcing_fit(&f, End::Minus, None)?;
        let (ep, em) = (-(n + 2.0) / 2.0, -(n + 2.0) / 2.0 + 2.0 * p / (p - 1.0));
        let ok = plus <= ep + 0.01 * ep.abs() && (minus / em - 1.0).abs() < 0.01;
        Ok((ok, format!("plus {plus:.4} (<= {ep:.4}), minus {minus:.4} ({em:.4})")))
    });
    r.run("cylinder", "residual converges at second order", || {
        let cyl = CylinderParams::new(d, 0.5, n, p)?;
        let (amp, mu) = cylinder_ground_state(&cyl).ok_or_else(|| anyhow!("no closed form"))?;
        let v = RadialProfile::v_star(p).scaled(amp, mu);
        let coarse = phi_residual(&to_cylinder_fn(&v, &cyl, (-6.0, 6.0), 4001)?)?;
        let fine = phi_residual(&to_cylinder_fn(&v, &cyl, (-6.0, 6.0), 8001)?)?;
        let ratio = coarse / fine;
        Ok(((ratio - 4.0).abs() < 0.2, format!("residuals {coarse:.2e} -> {fine:.2e}, ratio {ratio:.3}")))
    });
    if d == 2 {
        r.run("cylinder", "sphere integrals of radial data", || {
            let rows = translated_integrals(0.5, n, m_from_p(p), 0.0, (1e-2, 1.0), 16)?;
            let worst = rows.iter().map(|l| l.ii.abs().max(l.iv.abs()).max(l.v.abs())).fold(0.0, f64::max);
            Ok((worst == 0.0, format!("max of (ii), (iv), (v): {worst:e}")))
        });
    }
}

pub fn run(a: VerifyArgs, out: &Path) -> CmdResult {
    if a.d < 2 {
        return Err(Failure::Usage(anyhow!("d must be at least 2")));
    }
    let mut r = Runner { checks: Vec::new() };
    let want = |s: Suite| a.suite == Suite::All || a.suite == s;
    if want(Suite::Params) {
        params(&mut r, a.d);
    }
    if want(Suite::Symmetry) {
        symmetry(&mut r, a.d);
    }
    if want(Suite::Radial) {
        radial(&mut r, a.d);
    }
    if want(Suite::Spectral) {
        spectral(&mut r, a.d);
    }
    if want(Suite::Flow) {
        flow(&mut r, a.d);
    }
    if want(Suite::Cylinder) {
        cylinder(&mut r, a.d);
    }
    for c in &r.checks {
        println!("{}  {:<9} {:<38} {}", if c.passed { "PASS" } else { "FAIL" }, c.suite, c.name, c.detail);
    }
    let o = Output::new(out, "verify", &a)?;
    o.write_json("verify.json", &r.checks)?;
    let failed: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        println!("all {} checks passed", r.checks.len());
        Ok(())
    } else {
        Err(Failure::Check(anyhow!("{} of {} checks failed: {}", failed.len(), r.checks.len(), failed.join(", "))))
    }
}
