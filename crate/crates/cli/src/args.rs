//! Command-line surface. Every flag can also be set through an environment
//! variable named `NOTMF_<FLAG>` (upper case, dashes as underscores).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use notmf_core::{ModelConfig, Variant};

#[derive(Debug, Parser)]
#[command(
    name = "notmf",
    version,
    about = "Seasonal temporal matrix factorization for multivariate forecasting"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic seasonal panel (truth.csv and observed.csv).
    Synth(SynthArgs),
    /// Fit a model on the history span and save it.
    Fit(FitArgs),
    /// Fit (or load) a model and forecast the next steps.
    Forecast(ForecastArgs),
    /// Rolling forecasts over the test span with a fixed spatial dictionary.
    Rolling(RollingArgs),
    /// Grid search over (lambda, rho) on the validation span.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Number of latent factors.
    #[arg(long, env = "NOTMF_RANK", default_value_t = 10)]
    pub rank: usize,
    /// VAR order d.
    #[arg(long, env = "NOTMF_ORDER", default_value_t = 2)]
    pub order: usize,
    /// Seasonal period m (0 disables seasonal differencing).
    #[arg(long, env = "NOTMF_SEASON", default_value_t = 28)]
    pub season: usize,
    #[arg(long, env = "NOTMF_LAMBDA", default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, env = "NOTMF_RHO", default_value_t = 5.0)]
    pub rho: f64,
    /// Outer alternating-minimization iterations.
    #[arg(long, env = "NOTMF_ITERS", default_value_t = 50)]
    pub iters: usize,
    /// Conjugate-gradient iterations per temporal update.
    #[arg(long, env = "NOTMF_CG_ITERS", default_value_t = 5)]
    pub cg_iters: usize,
    /// Relative residual tolerance for conjugate gradients.
    #[arg(long, env = "NOTMF_CG_TOL", default_value_t = 1e-8)]
    pub cg_tol: f64,
    /// notmf, notmf_first, tmf, or trmf.
    #[arg(long, env = "NOTMF_VARIANT", default_value = "notmf")]
    pub variant: Variant,
    #[arg(long, env = "NOTMF_SEED", default_value_t = 0)]
    pub seed: u64,
}

impl ModelArgs {
    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            rank: self.rank,
            order: self.order,
            season: self.season,
            lambda: self.lambda,
            rho: self.rho,
            outer_iters: self.iters,
            cg_iters: self.cg_iters,
            cg_tol: self.cg_tol,
            variant: self.variant,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV: header row of time labels, one row per series.
    #[arg(long, env = "NOTMF_INPUT")]
    pub input: PathBuf,
    /// Directory for output artifacts (created if absent).
    #[arg(long, env = "NOTMF_OUT", default_value = ".")]
    pub out: PathBuf,
    /// Treat numeric zeros as missing.
    #[arg(long, env = "NOTMF_ZERO_AS_MISSING")]
    pub zero_as_missing: bool,
    /// Z-score each series on its observed history before fitting.
    #[arg(long, env = "NOTMF_STANDARDIZE")]
    pub standardize: bool,
}

/// Column split. Unset training length means "everything before
/// validation and test".
#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    #[arg(long, env = "NOTMF_TRAIN_COLS")]
    pub train_cols: Option<usize>,
    #[arg(long, env = "NOTMF_VAL_COLS", default_value_t = 0)]
    pub val_cols: usize,
    #[arg(long, env = "NOTMF_TEST_COLS")]
    pub test_cols: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, env = "NOTMF_OUT", default_value = ".")]
    pub out: PathBuf,
    #[arg(long, env = "NOTMF_SERIES", default_value_t = 60)]
    pub series: usize,
    #[arg(long, env = "NOTMF_STEPS", default_value_t = 420)]
    pub steps: usize,
    #[arg(long, env = "NOTMF_TRUE_RANK", default_value_t = 4)]
    pub true_rank: usize,
    #[arg(long, env = "NOTMF_SEASON", default_value_t = 28)]
    pub season: usize,
    #[arg(long, env = "NOTMF_ORDER", default_value_t = 2)]
    pub order: usize,
    #[arg(long, env = "NOTMF_NOISE", default_value_t = 0.1)]
    pub noise: f64,
    /// Fraction of entries hidden from observed.csv.
    #[arg(long, env = "NOTMF_MISSING", default_value_t = 0.6)]
    pub missing: f64,
    #[arg(long, env = "NOTMF_SEED", default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Steps ahead to forecast.
    #[arg(long, env = "NOTMF_HORIZON", default_value_t = 1)]
    pub horizon: usize,
    /// Previously saved model archive; replaces fitting (model flags are ignored).
    #[arg(long = "model", env = "NOTMF_MODEL")]
    pub model_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RollingArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, env = "NOTMF_HORIZON", default_value_t = 1)]
    pub horizon: usize,
    /// Number of rolling windows; defaults to test-cols / horizon, or 1.
    #[arg(long, env = "NOTMF_WINDOWS")]
    pub windows: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, env = "NOTMF_HORIZON", default_value_t = 1)]
    pub horizon: usize,
    #[arg(
        long,
        env = "NOTMF_LAMBDAS",
        value_delimiter = ',',
        default_value = "0.1,1,10"
    )]
    pub lambdas: Vec<f64>,
    #[arg(
        long,
        env = "NOTMF_RHOS",
        value_delimiter = ',',
        default_value = "1,5,10"
    )]
    pub rhos: Vec<f64>,
}
