use crate::args::GapArgs;
use crate::output::Output;
use crate::{CmdResult, Failure};
use anyhow::anyhow;
use ckn_core::quadrature::QuadratureConfig;
use ckn_core::spectral::{gap_certificate, SpectralError};
use std::path::Path;

pub fn run(a: GapArgs, out: &Path) -> CmdResult {
    let alpha = match (a.alpha, a.alpha2) {
        (Some(x), None) => x,
        (None, Some(x2)) if x2 > 0.0 => x2.sqrt(),
        (None, Some(x2)) => return Err(Failure::Usage(anyhow!("alpha2 must be positive (got {x2})"))),
        _ => return Err(Failure::Usage(anyhow!("give exactly one of --alpha or --alpha2"))),
    };
    if !(alpha > 0.0) {
        return Err(Failure::Usage(anyhow!("alpha must be positive (got {alpha})")));
    }
    let cfg = QuadratureConfig::default();
    let report = match gap_certificate(alpha, a.n, a.d, a.delta, a.family, a.seed, &cfg) {
        Ok(r) => r,
        Err(e @ SpectralError::Precondition(_)) => return Err(Failure::Usage(e.into())),
        Err(e) => return Err(Failure::Check(e.into())),
    };
    let o = Output::new(out, "gap", &a)?;
    o.write_json("gap.json", &report)?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?);
    Ok(())
}
