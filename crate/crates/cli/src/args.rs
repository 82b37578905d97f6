use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "steinpost", version, about = "Post-processing for MCMC output")]
pub struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output file (directory for `sample` and `bench`); stdout if omitted.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Worker threads for parallel kernel evaluations.
    #[arg(long, global = true, env = "STEINPOST_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run random-walk Metropolis or MALA and write chain CSVs.
    Sample(SampleArgs),
    /// R-hat, effective sample size, burn-in and thinning lag.
    Diagnose(DiagnoseArgs),
    /// Select representative states by Stein thinning.
    Thin(ThinArgs),
    /// Kernel Stein discrepancy of a (sub)sample.
    Ksd(KsdArgs),
    /// Estimate an expectation with control variates.
    Estimate(EstimateArgs),
    /// Regenerate the benchmark experiments as CSV and JSON files.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Sampler {
    Rwmh,
    Mala,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Target JSON file, or `benchmark` for the built-in mixture.
    #[arg(long)]
    pub target: String,
    #[arg(long, value_enum, default_value_t = Sampler::Rwmh)]
    pub sampler: Sampler,
    /// Number of independent chains.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long)]
    pub steps: usize,
    /// Proposal scale (RWMH) or step size (MALA).
    #[arg(long, default_value_t = 1.0)]
    pub step_size: f64,
    /// Initial state, comma separated; zeros by default.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Option<Vec<f64>>,
    /// Standard deviation of Gaussian noise added to each chain's start.
    #[arg(long, default_value_t = 0.0)]
    pub init_spread: f64,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Chain CSV files, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub chains: Vec<PathBuf>,
    /// Require R-hat (and hence at least two chains).
    #[arg(long)]
    pub rhat: bool,
    /// Autocorrelation threshold for the thinning lag.
    #[arg(long, default_value_t = steinpost::chain::DEFAULT_THIN_THRESHOLD)]
    pub thin_threshold: f64,
}

/// Where scores come from and which base kernel to use.
#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Chain CSV file.
    #[arg(long)]
    pub chain: PathBuf,
    /// Target JSON file or `benchmark`; scores are recomputed from it.
    /// Without it the chain's gradient columns are used.
    #[arg(long)]
    pub target: Option<String>,
    /// Base kernel as inline JSON or a JSON file.
    #[arg(long)]
    pub kernel: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ThinMode {
    Myopic,
    Nonmyopic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    Auto,
    Exhaustive,
    Heuristic,
}

#[derive(Debug, Args)]
pub struct ThinArgs {
    #[command(flatten)]
    pub score: ScoreArgs,
    /// Number of iterations; nonmyopic runs select `m * horizon` states.
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_enum, default_value_t = ThinMode::Myopic)]
    pub mode: ThinMode,
    /// Look-ahead horizon (nonmyopic only); default 4.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Mini-batch size (nonmyopic only); default 10 × horizon.
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, value_enum)]
    pub solver: Option<Solver>,
    /// Also write the selected states to this chain CSV.
    #[arg(long)]
    pub states_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KsdArgs {
    #[command(flatten)]
    pub score: ScoreArgs,
    /// Zero-based chain indices of the support; the whole chain by default.
    #[arg(long, value_delimiter = ',')]
    pub indices: Option<Vec<usize>>,
    /// Support weights matching `--indices`; uniform by default.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Vanilla,
    Zvcv,
    Cf,
    Secf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub score: ScoreArgs,
    /// Integrand: `toy`, `x<k>`, `x<k>^2` (k one-based) or `column:<name>`.
    #[arg(long)]
    pub f: String,
    /// CSV of integrand values, one row per chain state, for `column:<name>`.
    #[arg(long)]
    pub evals: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodArg::Secf)]
    pub method: MethodArg,
    /// Polynomial degree for ZVCV and SECF.
    #[arg(long, default_value_t = 2)]
    pub degree: usize,
    /// Lengthscales to cross-validate for CF and SECF.
    #[arg(long, value_delimiter = ',', default_values_t = steinpost::cv::DEFAULT_GRID)]
    pub cv_grid: Vec<f64>,
    #[arg(long, default_value_t = steinpost::cv::DEFAULT_FOLDS)]
    pub folds: usize,
    /// Zero-based chain indices to use; the whole chain by default.
    #[arg(long, value_delimiter = ',')]
    pub indices: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    All,
    Cv,
    Rhat,
    Thinning,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Experiment::All)]
    pub experiment: Experiment,
    /// Replicates for the control-variate comparison.
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
}
