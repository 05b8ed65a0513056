use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "cpclust",
    version,
    about = "Bayesian change point detection and clustering of time series and epidemic counts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Detect change points in one series or one vector of daily counts.
    Detect(DetectArgs),
    /// Cluster observations that share change points.
    Clust(ClustArgs),
    /// Simulate infection times from a stochastic SIR model.
    SimulateEpi(SimulateArgs),
    /// Recompute the point estimate of a saved run.
    Estimate(EstimateArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kernel {
    Ts,
    Epi,
}

impl Kernel {
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Ts => "ts",
            Kernel::Epi => "epi",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Binder,
    Vi,
}

impl LossArg {
    pub fn loss(self) -> cpclust::Loss {
        match self {
            LossArg::Binder => cpclust::Loss::Binder,
            LossArg::Vi => cpclust::Loss::Vi,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossArg::Binder => "binder",
            LossArg::Vi => "vi",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    /// One block (detect) or one cluster (clust).
    Single,
    Singletons,
}

#[derive(Args, Debug, Clone)]
pub struct ChainArgs {
    #[arg(long, value_enum)]
    pub kernel: Kernel,
    #[arg(long)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub burnin: usize,
    /// Probability of proposing a split.
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    #[arg(long)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = LossArg::Binder)]
    pub loss: LossArg,
    #[arg(long, value_enum, default_value_t = InitArg::Single)]
    pub init: InitArg,
}

/// Order prior. Flags that a command never uses may be omitted.
#[derive(Args, Debug, Clone)]
pub struct OrderPriorArgs {
    /// Discount of the order prior (starting value when updated).
    #[arg(long)]
    pub sigma: f64,
    /// Strength of the order prior (starting value when updated).
    #[arg(long)]
    pub delta: f64,
    /// Gamma shape of the prior on delta.
    #[arg(long)]
    pub delta_c: Option<f64>,
    /// Gamma rate of the prior on delta.
    #[arg(long)]
    pub delta_d: Option<f64>,
    /// Standard deviation of the random walk on sigma.
    #[arg(long)]
    pub sigma_proposal_sd: Option<f64>,
}

/// Time-series prior. Univariate inputs need `a`, `b`, `c`; multivariate
/// inputs need `m0`, `k0`, `nu0`, `s0`.
#[derive(Args, Debug, Clone, Default)]
pub struct TsArgs {
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Prior mean, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub m0: Option<Vec<f64>>,
    #[arg(long)]
    pub k0: Option<f64>,
    #[arg(long)]
    pub nu0: Option<f64>,
    /// Inverse-Wishart scale, `d × d` row-major, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub s0: Option<Vec<f64>>,
    /// Autoregressive coefficient (starting value when updated).
    #[arg(long)]
    pub phi: Option<f64>,
    /// Variance of the random walk on phi.
    #[arg(long)]
    pub phi_proposal_var: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct EpiArgs {
    /// Recovery rate.
    #[arg(long)]
    pub xi: Option<f64>,
    /// Gamma shape of the block infection rates.
    #[arg(long)]
    pub a0: Option<f64>,
    /// Gamma rate of the block infection rates.
    #[arg(long)]
    pub b0: Option<f64>,
    /// Initial infected proportion (starting value when updated).
    #[arg(long)]
    pub i0: Option<f64>,
    /// Variance of the random walk on logit(I0).
    #[arg(long)]
    pub i0_proposal_var: Option<f64>,
    /// Monte Carlo replicates per likelihood evaluation.
    #[arg(long)]
    pub mc_draws: Option<usize>,
    /// RK4 step in days.
    #[arg(long, default_value_t = 0.1)]
    pub ode_step: f64,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    /// Series as a `d × T` table, or daily counts as one row or column.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub prior: OrderPriorArgs,
    #[command(flatten)]
    pub ts: TsArgs,
    #[command(flatten)]
    pub epi: EpiArgs,
    #[arg(long)]
    pub fix_sigma: bool,
    #[arg(long)]
    pub fix_delta: bool,
    /// Keep phi (ts) or I0 (epi) at its starting value.
    #[arg(long)]
    pub fix_local: bool,
}

#[derive(Args, Debug)]
pub struct ClustArgs {
    /// One `n × T` table (univariate series or counts, one observation per
    /// row), or one `d × T` file per multivariate observation.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub prior: OrderPriorArgs,
    #[command(flatten)]
    pub ts: TsArgs,
    #[command(flatten)]
    pub epi: EpiArgs,
    /// Order moves per draw from the mixture proposal.
    #[arg(long)]
    pub l_steps: usize,
    /// Importance draws per normalisation constant.
    #[arg(long)]
    pub b_norm: usize,
    /// Dirichlet concentration.
    #[arg(long)]
    pub alpha: f64,
    /// Mean block count of the importance density.
    #[arg(long)]
    pub avg_blocks: f64,
    /// Update phi (ts) or I0 (epi) of each observation.
    #[arg(long)]
    pub update_local: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub s0: u64,
    #[arg(long)]
    pub i0: u64,
    #[arg(long)]
    pub max_time: f64,
    #[arg(long)]
    pub xi: f64,
    /// Daily infection rates, one row or column.
    #[arg(long)]
    pub betas: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Output directory of a `detect` or `clust` run.
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, value_enum, default_value_t = LossArg::Binder)]
    pub loss: LossArg,
    /// Write the summary here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
