use crate::args::{ConstantsArgs, PValue};
use crate::output::Output;
use crate::{CmdResult, Failure};
use anyhow::anyhow;
use ckn_core::params::{ProblemParams, ValidatedParams};
use ckn_core::quadrature::QuadratureConfig;
use ckn_core::radial::{optimal_constant_flat, RadialError};
use std::path::Path;

pub fn run(a: ConstantsArgs, out: &Path) -> CmdResult {
    let raw = ProblemParams::new(a.d, a.beta, a.gamma, 2.0);
    let p = match a.p {
        PValue::Value(p) => p,
        PValue::Critical if a.beta == 0.0 && a.gamma == 0.0 && a.d == 2 => {
            return Err(Failure::Usage(anyhow!("p_star is infinite for d = 2 without weights")));
        }
        PValue::Critical if a.beta == 0.0 && a.gamma == 0.0 => a.d as f64 / (a.d as f64 - 2.0),
        PValue::Critical => raw.p_star(),
    };
    let params = if a.beta == 0.0 && a.gamma == 0.0 {
        ValidatedParams::unweighted(a.d, p)
    } else {
        ProblemParams::new(a.d, a.beta, a.gamma, p).validate()
    }
    .map_err(|e| Failure::Usage(e.into()))?;
    let cfg = QuadratureConfig::default().with_rel_tol(a.rel_tol);
    let report = match optimal_constant_flat(&params, &cfg, true) {
        Ok(r) => r,
        Err(RadialError::Params(e)) => return Err(Failure::Usage(e.into())),
        Err(e) => return Err(Failure::Check(e.into())),
    };
    let o = Output::new(out, "constants", &a)?;
    o.write_json("constants.json", &report)?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?);
    Ok(())
}
