use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Parser, Debug)]
#[command(name = "ckn-lab", version, about = "Numerical laboratory for weighted Caffarelli-Kohn-Nirenberg inequalities")]
pub struct Cli {
    /// Output directory
    #[arg(long, global = true, env = "CKN_LAB_OUT", default_value = ".")]
    pub out: PathBuf,
    /// Cap on worker threads
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Symmetry / symmetry-breaking map over a (γ, β) grid
    Region(RegionArgs),
    /// Optimal radial constant by both routes
    Constants(ConstantsArgs),
    /// Hardy-Poincaré gap with a Rayleigh-quotient certificate
    Gap(GapArgs),
    /// Fast diffusion run from a JSON configuration
    Flow(FlowArgs),
    /// Invariant suite with a pass/fail table
    Verify(VerifyArgs),
    /// Emden-Fowler transform of a radial profile
    Transform(TransformArgs),
}

/// `lo:hi`
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
        let lo: f64 = a.trim().parse().map_err(|e| format!("bad lower bound {a:?}: {e}"))?;
        let hi: f64 = b.trim().parse().map_err(|e| format!("bad upper bound {b:?}: {e}"))?;
        if !(lo < hi) {
            return Err(format!("need lo < hi, got {lo}:{hi}"));
        }
        Ok(Range { lo, hi })
    }
}

/// A number or the literal `p_star`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum PValue {
    Value(f64),
    Critical,
}

impl FromStr for PValue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "p_star" | "pstar" => Ok(PValue::Critical),
            _ => s.parse().map(PValue::Value).map_err(|e| format!("bad p {s:?}: {e}")),
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct RegionArgs {
    #[arg(long)]
    pub d: u32,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value = "-12:4", allow_hyphen_values = true)]
    pub gamma: Range,
    #[arg(long, default_value = "-10:2", allow_hyphen_values = true)]
    pub beta: Range,
    /// Cells per axis
    #[arg(long, default_value_t = 600)]
    pub res: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct ConstantsArgs {
    #[arg(long)]
    pub d: u32,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: f64,
    /// Exponent, or `p_star`
    #[arg(long)]
    pub p: PValue,
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct GapArgs {
    #[arg(long)]
    pub d: u32,
    #[arg(long)]
    pub n: f64,
    #[arg(long)]
    pub delta: f64,
    /// α²; give this or --alpha
    #[arg(long, conflicts_with = "alpha")]
    pub alpha2: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Number of random trials
    #[arg(long, default_value_t = 100)]
    pub family: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct FlowArgs {
    /// JSON run configuration
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Params,
    Symmetry,
    Radial,
    Spectral,
    Flow,
    Cylinder,
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    #[arg(long, default_value_t = 4)]
    pub d: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// closed-form cylinder ground state A(1 + μ²s²)^{−1/(p−1)}
    GroundState,
    /// (1 + s²)^{−1/(p−1)}
    VStar,
    /// numerical shooting solution
    Shooting,
}

#[derive(Args, Debug, Serialize)]
pub struct TransformArgs {
    #[arg(long)]
    pub d: u32,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub n: f64,
    #[arg(long)]
    pub p: f64,
    #[arg(long, value_enum, default_value = "ground-state")]
    pub profile: ProfileKind,
    /// z-range (z = −ln s)
    #[arg(long, default_value = "-10:10", allow_hyphen_values = true)]
    pub z: Range,
    #[arg(long, default_value_t = 2001)]
    pub nz: usize,
    /// Also tabulate the five sphere integrals of the pressure of the
    /// translated profile over this s-range (d = 2 only)
    #[arg(long)]
    pub integrals: Option<Range>,
    /// Translation |x₀| used for the sphere integrals
    #[arg(long, default_value_t = 0.5)]
    pub shift: f64,
    #[arg(long, default_value_t = 64)]
    pub ntheta: usize,
}
