use crate::args::{ProfileKind, TransformArgs};
use crate::output::{num, Output};
use crate::{CmdResult, Failure};
use anyhow::anyhow;
use ckn_core::cylinder::{asymptotic_fit, forcing_fit, loglog_slope, phi_residual, to_cylinder_fn, translated_integrals, End};
use ckn_core::params::{m_from_p, CylinderParams};
use ckn_core::radial::{cylinder_ground_state, shoot_radial, Profile, RadialProfile, ShootingConfig};
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
struct Rate {
    measured: f64,
    expected: f64,
}

/// Upper bound on the log slope; faster decay also satisfies it.
#[derive(Serialize)]
struct Envelope {
    measured: f64,
    bound: f64,
    within: bool,
}

#[derive(Serialize)]
struct Summary {
    a: f64,
    phi_residual: f64,
    phi_plus: Rate,
    phi_minus: Rate,
    forcing_plus: Envelope,
    forcing_minus: Rate,
    integral_slopes: Option<IntegralSlopes>,
}

#[derive(Serialize)]
struct IntegralSlopes {
    /// log-log slopes in s of (i) and (ii)
    i: f64,
    ii: f64,
}

pub fn run(a: TransformArgs, out: &Path) -> CmdResult {
    let cyl = CylinderParams::new(a.d, a.alpha, a.n, a.p).map_err(|e| Failure::Usage(e.into()))?;
    if a.nz < 32 {
        return Err(Failure::Usage(anyhow!("nz must be at least 32 (got {})", a.nz)));
    }
    if a.integrals.is_some() && a.d != 2 {
        return Err(Failure::Usage(anyhow!("--integrals needs d = 2")));
    }
    let profile: Box<dyn Profile<f64>> = match a.profile {
        ProfileKind::VStar => Box::new(RadialProfile::v_star(a.p)),
        ProfileKind::GroundState => {
            let (amp, mu) = cylinder_ground_state(&cyl).ok_or_else(|| Failure::Usage(anyhow!("no closed-form ground state at p = p_star")))?;
            Box::new(RadialProfile::v_star(a.p).scaled(amp, mu))
        }
        ProfileKind::Shooting => {
            let res = shoot_radial(&cyl, 2.0, &ShootingConfig::default()).map_err(|e| Failure::Check(e.into()))?;
            Box::new(res.profile)
        }
    };
    let phi = to_cylinder_fn(profile.as_ref(), &cyl, (a.z.lo, a.z.hi), a.nz).map_err(|e| Failure::Usage(e.into()))?;
    let check = |e: ckn_core::cylinder::CylinderError| Failure::Check(e.into());
    let (n, p) = (a.n, a.p);
    let k = 2.0 / (p - 1.0);
    let o = Output::new(out, "transform", &a)?;
    o.write_csv("cylinder.csv", &["z", "phi"], phi.z.iter().zip(&phi.phi).map(|(z, f)| vec![num(*z), num(*f)]))?;
    let mut integral_slopes = None;
    if let Some(r) = a.integrals {
        let m = m_from_p(p);
        let rows = translated_integrals(a.alpha, n, m, a.shift, (r.lo, r.hi), a.ntheta).map_err(check)?;
        if rows.len() >= 2 {
            integral_slopes = Some(IntegralSlopes {
                i: loglog_slope(&rows.iter().map(|l| (l.s, l.i)).collect::<Vec<_>>()),
                ii: loglog_slope(&rows.iter().map(|l| (l.s, l.ii)).collect::<Vec<_>>()),
            });
        }
        o.write_csv(
            "integrals.csv",
            &["s", "integral_i", "integral_ii", "integral_iii", "integral_iv", "integral_v"],
            rows.iter().map(|l| vec![num(l.s), num(l.i), num(l.ii), num(l.iii), num(l.iv), num(l.v)]),
        )?;
    }
    let summary = Summary {
        a: phi.a,
        phi_residual: phi_residual(&phi).map_err(check)?,
        phi_plus: Rate { measured: asymptotic_fit(&phi, End::Plus, None).map_err(check)?, expected: phi.a },
        phi_minus: Rate { measured: asymptotic_fit(&phi, End::Minus, None).map_err(check)?, expected: phi.a + k },
        forcing_plus: {
            let measured = forcing_fit(&phi, End::Plus, None).map_err(check)?;
            let bound = -(n + 2.0) / 2.0;
            Envelope { measured, bound, within: measured <= bound + 0.01 }
        },
        forcing_minus: Rate {
            measured: forcing_fit(&phi, End::Minus, None).map_err(check)?,
            expected: -(n + 2.0) / 2.0 + 2.0 * p / (p - 1.0),
        },
        integral_slopes,
    };
    o.write_json("transform.json", &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary).map_err(anyhow::Error::from)?);
    Ok(())
}
