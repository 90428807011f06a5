//! Command-line definitions.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "sorsvd", version, about = "Randomized low-rank decompositions and robust PCA")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic test matrix plus a JSON sidecar.
    Gen(GenArgs),
    /// Factor a matrix with one randomized method.
    Decompose(DecomposeArgs),
    /// Compare leading singular values of SVD, R-SVD, TSR-SVD and SOR-SVD.
    Svcompare(SvcompareArgs),
    /// Frobenius error of each method over a range of sample sizes.
    Errcurve(ErrcurveArgs),
    /// Check realized errors against the theoretical bounds.
    Boundcheck(BoundcheckArgs),
    /// Low-rank plus sparse split of a matrix file.
    Rpca(RpcaArgs),
    /// Background subtraction on a directory of PGM frames.
    Bgsub(BgsubArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Sord,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    NoisyLowrank,
    Polydecay,
    RpcaInstance,
    RandomOrthonormal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    Spectral,
    Frobenius,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Sor,
    Rsvd,
    Tsr,
}

/// Inclusive range `a:b:step` of sample sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EllRange {
    pub start: usize,
    pub end: usize,
    pub step: usize,
}

impl EllRange {
    pub fn values(&self) -> Vec<usize> {
        (self.start..=self.end).step_by(self.step).collect()
    }
}

impl FromStr for EllRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let parse = |p: &str| p.trim().parse::<usize>().map_err(|_| format!("bad ell range {s:?}, expected a:b:step"));
        let (start, end, step) = match parts.as_slice() {
            [a, b] => (parse(a)?, parse(b)?, 1),
            [a, b, c] => (parse(a)?, parse(b)?, parse(c)?),
            _ => return Err(format!("bad ell range {s:?}, expected a:b:step")),
        };
        if step == 0 || start == 0 || end < start {
            return Err(format!("bad ell range {s:?}: need 1 <= a <= b and step >= 1"));
        }
        Ok(EllRange { start, end, step })
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long)]
    pub n: usize,
    /// Rank parameter (k for noisy-lowrank, r for rpca-instance).
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    /// Number of sparse corruptions (rpca-instance).
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Noise multiplier of σ_k (noisy-lowrank).
    #[arg(long, default_value_t = 0.1)]
    pub noise_coefficient: f64,
    #[arg(long, value_enum, default_value = "spectral")]
    pub noise_normalization: NormalizationArg,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output prefix; writes `<prefix>_u`, `<prefix>_sigma`, `<prefix>_v`.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "sor")]
    pub algorithm: AlgorithmArg,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub ell: usize,
    #[arg(long, default_value_t = 0)]
    pub q: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub single_pass: bool,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct SvcompareArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// CSV report path.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub ell: usize,
    /// Rank kept by SOR-SVD (defaults to ell).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub q: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Runs with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct ErrcurveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub ell_range: EllRange,
    #[arg(long, default_value_t = 0)]
    pub q: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Errors are averaged over this many seeds.
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long)]
    pub single_pass: bool,
}

#[derive(Debug, Args)]
pub struct BoundcheckArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub k: usize,
    /// Single sample size; use --ell-range for a sweep.
    #[arg(long, conflicts_with = "ell_range")]
    pub ell: Option<usize>,
    #[arg(long)]
    pub ell_range: Option<EllRange>,
    /// Fixed split parameter; by default the tightest admissible p is used.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub q: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct RpcaOptions {
    /// Sketch width (default from the rank estimate).
    #[arg(long)]
    pub ell: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub mu_update_literal: bool,
    /// Start the dual variable at zero instead of the scaled input.
    #[arg(long)]
    pub zero_dual: bool,
}

#[derive(Debug, Args)]
pub struct RpcaArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output prefix; writes `<prefix>_l`, `<prefix>_s` and `<prefix>_telemetry.csv`.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[command(flatten)]
    pub opts: RpcaOptions,
}

#[derive(Debug, Args)]
pub struct BgsubArgs {
    /// Directory of binary PGM frames.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory; receives `background/`, `foreground/` and `telemetry.csv`.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub opts: RpcaOptions,
}
