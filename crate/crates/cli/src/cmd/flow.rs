use crate::args::FlowArgs;
use crate::output::{num, Output};
use crate::{CmdResult, Failure};
use anyhow::{anyhow, Context};
use ckn_core::flow::{run as run_flow, FlowConfig, FlowDiagnostics, InitialConfig};
use ckn_core::symmetry::alpha_fs;
use serde::Serialize;
use std::path::Path;

pub const FLOW_HEADER: [&str; 11] =
    ["t", "mass", "E", "I", "F", "G", "H_identity", "H_fd", "b_inner", "b_outer", "R_integral"];

pub fn flow_row(r: &FlowDiagnostics<f64>) -> Vec<String> {
    [r.t, r.mass, r.e, r.i, r.f, r.g, r.h_identity, r.h_fd, r.b_inner, r.b_outer, r.r_integral]
        .into_iter()
        .map(num)
        .collect()
}

/// Relative tolerance for the monotonicity of 𝒢.
pub const G_TOL: f64 = 1e-6;

/// Index of the first recorded increase of 𝒢 beyond `G_TOL`, if any.
pub fn first_g_increase(records: &[FlowDiagnostics<f64>]) -> Option<usize> {
    records.windows(2).position(|w| w[1].g > w[0].g + G_TOL * w[0].g.abs())
}

#[derive(Serialize)]
struct Summary {
    steps: usize,
    t_final: f64,
    records: usize,
    mass_drift: f64,
    alpha: f64,
    alpha_fs: f64,
    g_monotone: bool,
    /// (t, a, b) of the exact self-similar solution at the last record
    barenblatt_final: Option<(f64, f64, f64)>,
}

fn load_samples(path: &Path) -> anyhow::Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut pts = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let s: f64 = rec.get(0).ok_or_else(|| anyhow!("missing s column"))?.trim().parse()?;
        let u: f64 = rec.get(1).ok_or_else(|| anyhow!("missing u column"))?.trim().parse()?;
        pts.push((s, u));
    }
    if pts.len() < 2 || pts.windows(2).any(|w| !(w[0].0 < w[1].0)) || pts.iter().any(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(anyhow!("{}: need at least two rows with increasing s > 0 and u > 0", path.display()));
    }
    Ok(pts)
}

pub fn run(a: FlowArgs, out: &Path) -> CmdResult {
    let text = std::fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut config: FlowConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.config.display()))?;
    let mut o = Output::new(out, "flow", &config)?;
    o.add_input(&a.config);
    if let InitialConfig::CustomCsv { path, samples } = &mut config.initial {
        let base = a.config.parent().unwrap_or(Path::new("."));
        let file = base.join(&*path);
        *samples = Some(load_samples(&file)?);
        o.add_input(&file);
    }
    let grid = config.grid::<f64>().map_err(|e| Failure::Usage(e.into()))?;
    let result = run_flow::<f64>(&config).map_err(|e| Failure::Check(e.into()))?;
    o.write_csv("flow.csv", &FLOW_HEADER, result.records.iter().map(flow_row))?;
    let afs = alpha_fs(grid.d, grid.n);
    let increase = first_g_increase(&result.records);
    let summary = Summary {
        steps: result.steps,
        t_final: result.final_state.t,
        records: result.records.len(),
        mass_drift: result.mass_drift,
        alpha: grid.alpha,
        alpha_fs: afs,
        g_monotone: increase.is_none(),
        barenblatt_final: result.barenblatt.as_ref().and_then(|b| b.last().copied()),
    };
    o.write_json("flow_summary.json", &summary)?;
    println!("{}", serde_json::to_string(&summary).map_err(anyhow::Error::from)?);
    // no-flux stepping conserves mass to round-off; allow 1e−8 per 10⁴ steps
    let drift_tol = 1e-8 * (result.steps as f64 / 1e4).max(1.0);
    if result.mass_drift.abs() > drift_tol {
        return Err(Failure::Check(anyhow!("mass drift {:e} exceeds {drift_tol:e}", result.mass_drift)));
    }
    if grid.alpha <= afs {
        if let Some(k) = increase {
            let (g0, g1) = (result.records[k].g, result.records[k + 1].g);
            return Err(Failure::Check(anyhow!(
                "G increased from {g0} to {g1} at t = {} although alpha <= alpha_FS",
                result.records[k + 1].t
            )));
        }
    }
    Ok(())
}
