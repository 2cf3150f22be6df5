use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mspk::parisi::{QuadratureConfig, QuadratureMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "mspk", version, about = "Multi-species SK model: Parisi functional, cascades and overlap diagnostics")]
pub struct Cli {
    /// Base seed; the MSPK_SEED environment variable overrides it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory for output files and the run manifest.
    #[arg(long, short = 'o', global = true, default_value = ".")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", content = "args", rename_all = "kebab-case")]
pub enum Command {
    /// Evaluate the Parisi functional for given parameters.
    ParisiEval(ParisiEvalArgs),
    /// Minimize the Parisi functional over r = 1..r_max.
    ParisiOpt(ParisiOptArgs),
    /// Monte Carlo free energy by exact enumeration.
    FreeEnergy(FreeEnergyArgs),
    /// Run a verification battery.
    Verify(VerifyArgs),
    /// Write cascade overlap arrays as CSV.
    CascadeSample(CascadeSampleArgs),
    /// Write exact Gibbs overlap arrays as CSV.
    GibbsSample(GibbsSampleArgs),
    /// Ghirlanda-Guerra statistic of an overlap CSV.
    GgDelta(GgDeltaArgs),
    /// Isotonic synchronization fit of an overlap CSV.
    SyncFit(SyncFitArgs),
    /// Re-execute a run manifest and compare output digests.
    Rerun(RerunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ParisiEval(_) => "parisi-eval",
            Self::ParisiOpt(_) => "parisi-opt",
            Self::FreeEnergy(_) => "free-energy",
            Self::Verify(_) => "verify",
            Self::CascadeSample(_) => "cascade-sample",
            Self::GibbsSample(_) => "gibbs-sample",
            Self::GgDelta(_) => "gg-delta",
            Self::SyncFit(_) => "sync-fit",
            Self::Rerun(_) => "rerun",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadMode {
    Grid,
    NestedExact,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct QuadArgs {
    #[arg(long, value_enum, default_value = "grid")]
    pub quad: QuadMode,
    #[arg(long, default_value_t = 40)]
    pub hermite_nodes: usize,
    #[arg(long, default_value_t = 513)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 8.0)]
    pub grid_halfwidth: f64,
}

impl QuadArgs {
    pub fn config(&self) -> QuadratureConfig {
        QuadratureConfig {
            mode: match self.quad {
                QuadMode::Grid => QuadratureMode::Grid,
                QuadMode::NestedExact => QuadratureMode::NestedExact,
            },
            hermite_nodes: self.hermite_nodes,
            grid_points: self.grid_points,
            grid_halfwidth_sigmas: self.grid_halfwidth,
        }
    }
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ParisiEvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub params: PathBuf,
    #[command(flatten)]
    pub quad: QuadArgs,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ParisiOptArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub r_max: usize,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, default_value_t = 3000)]
    pub max_evals: usize,
    #[command(flatten)]
    pub quad: QuadArgs,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct FreeEnergyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// System size N.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    /// Also write the first disorder draw in binary form.
    #[arg(long)]
    pub save_disorder: bool,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// cascade, gg, sync, interpolation or covariance.
    #[arg(long)]
    pub suite: String,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Kept children per cascade node.
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    /// Samples re-run at 2M for the cascade truncation check.
    #[arg(long, default_value_t = 0)]
    pub rerun_samples: usize,
    /// System size for the interpolation suite.
    #[arg(long, default_value_t = 10)]
    pub n_spins: usize,
    /// Disorder draws for the covariance suite.
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    #[command(flatten)]
    pub quad: QuadArgs,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct CascadeSampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    /// Replicas per array.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Combined overlap sequence q_0..q_r (default: λ-weighted species sequences).
    #[arg(long, value_delimiter = ',')]
    pub combined: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct GibbsSampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// System size N.
    #[arg(long)]
    pub n_spins: usize,
    #[arg(long, default_value_t = 4)]
    pub replicas: usize,
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    /// Add the perturbation Hamiltonian with this maximum order.
    #[arg(long)]
    pub p_max: Option<usize>,
    #[arg(long, default_value_t = 0.3)]
    pub gamma: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFunctionKind {
    Const,
    Indicator,
    Monomial,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct GgDeltaArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub overlaps: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub p: u32,
    /// Weight vector, one entry per species (default all ones).
    #[arg(long, value_delimiter = ',')]
    pub w: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "indicator")]
    pub f: TestFunctionKind,
    /// Indicator threshold (default: median of R_12).
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SyncFitArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub overlaps: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    /// Manifest written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
}
