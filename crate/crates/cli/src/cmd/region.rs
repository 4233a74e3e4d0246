use crate::args::RegionArgs;
use crate::output::{num, Output};
use crate::{CmdResult, Failure};
use anyhow::anyhow;
use ckn_core::symmetry::{region_grid, RegionKind};
use serde::Serialize;
use std::path::Path;

pub fn label_name(kind: RegionKind) -> &'static str {
    match kind {
        RegionKind::Symmetry => "symmetry",
        RegionKind::SymmetryBreaking => "symmetry_breaking",
        RegionKind::OnCurve => "on_curve",
        RegionKind::OutsideCone => "outside_cone",
    }
}

#[derive(Serialize)]
struct Summary {
    d: u32,
    p: f64,
    cells: usize,
    symmetry: usize,
    symmetry_breaking: usize,
    on_curve: usize,
    outside_cone: usize,
}

pub fn run(a: RegionArgs, out: &Path) -> CmdResult {
    let mut problems = Vec::new();
    if a.d < 2 {
        problems.push(format!("d must be at least 2 (got {})", a.d));
    }
    if !(a.p > 1.0) {
        problems.push(format!("p must exceed 1 (got {})", a.p));
    }
    if a.res < 2 {
        problems.push(format!("res must be at least 2 (got {})", a.res));
    }
    if !problems.is_empty() {
        return Err(Failure::Usage(anyhow!("invalid parameters:\n  {}", problems.join("\n  "))));
    }
    let grid = region_grid(a.d, a.p, (a.gamma.lo, a.gamma.hi), (a.beta.lo, a.beta.hi), (a.res, a.res))
        .map_err(|e| Failure::Usage(e.into()))?;
    let o = Output::new(out, "region", &a)?;
    let rows = grid.cells.iter().map(|c| {
        vec![num(c.gamma), num(c.beta), label_name(c.label.kind).to_string(), c.label.kind.code().to_string(), num(c.label.margin)]
    });
    let path = o.write_csv("region.csv", &["gamma", "beta", "label", "code", "margin"], rows)?;
    let summary = Summary {
        d: a.d,
        p: a.p,
        cells: grid.cells.len(),
        symmetry: grid.count(RegionKind::Symmetry),
        symmetry_breaking: grid.count(RegionKind::SymmetryBreaking),
        on_curve: grid.count(RegionKind::OnCurve),
        outside_cone: grid.count(RegionKind::OutsideCone),
    };
    o.write_json("region_summary.json", &summary)?;
    println!("{}", serde_json::to_string(&summary).map_err(anyhow::Error::from)?);
    eprintln!("wrote {}", path.display());
    Ok(())
}
