use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "sulfex",
    version,
    about = "Classify concrete mixtures by sulfate-expansion group and predict their expansion",
    long_about = "Classify concrete mixtures by sulfate-expansion group (HN: high speed nonlinear, \
ML: moderate speed linear, LL: low speed linear) and predict their expansion over time.\n\n\
Without --bundle the published models and boundaries are used.\n\n\
Exit codes: 0 success, 2 invalid input, 3 numerical failure."
)]
pub struct Cli {
    /// Output style for tables and reports.
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FirstBoundary {
    /// Threshold on C3A alone (the published simplification, C3A > 8).
    Simplified,
    /// The full trained line in the (C3A, W/C) plane.
    Svm,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assign each mixture to a group from its composition.
    Classify(ClassifyArgs),
    /// Predict expansion curves and failure times.
    Predict(PredictArgs),
    /// Fit a model bundle from measured expansion records.
    Fit(FitArgs),
    /// Smooth expansion records (diagnostic); writes original and smoothed curves.
    Smooth(SmoothArgs),
    /// Group expansion records by failure time and slope (diagnostic).
    Cluster(ClusterArgs),
    /// Write a seeded synthetic dataset with its manifest and true groups.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct BundleArgs {
    /// Model bundle (JSON). Defaults to the published models and boundaries.
    #[arg(long)]
    pub bundle: Option<PathBuf>,

    /// Form of the HN boundary used for classification.
    #[arg(long, value_enum, default_value_t = FirstBoundary::Simplified)]
    pub first_boundary: FirstBoundary,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Mixture table: id, wc, c3a, c3s, c2s, c4af, cement_content, air.
    #[arg(long)]
    pub mixtures: PathBuf,

    #[command(flatten)]
    pub bundle: BundleArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Mixture table: id, wc, c3a, c3s, c2s, c4af, cement_content, air.
    #[arg(long)]
    pub mixtures: PathBuf,

    #[command(flatten)]
    pub bundle: BundleArgs,

    /// Prediction horizon, years.
    #[arg(long, default_value_t = 40.0)]
    pub horizon: f64,

    /// Spacing of predicted points, years.
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,

    /// Write the predicted curves here as plot data (series_label, t, value).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SmoothingArgs {
    /// Weight kept on each original sample when smoothing; 0.3 is the value
    /// used for the published models and 1 leaves records unchanged.
    #[arg(long, default_value_t = 0.3)]
    pub alpha: f64,

    /// Expansion (percent) that defines failure, as used for the published
    /// models.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct ClusteringArgs {
    /// Number of expansion groups; 3 gives HN, ML and LL.
    #[arg(long, default_value_t = 3)]
    pub k: usize,

    /// Seed for K-means restarts and boundary training. Overridden by the
    /// SULFEX_SEED environment variable when the flag is absent.
    #[arg(long, env = "SULFEX_SEED", default_value_t = 0)]
    pub seed: u64,

    /// K-means restarts.
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset manifest (JSON naming the mixture and expansion tables).
    #[arg(long)]
    pub manifest: PathBuf,

    /// Where to write the fitted bundle.
    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub smoothing: SmoothingArgs,

    #[command(flatten)]
    pub clustering: ClusteringArgs,

    /// Box constraint C of the boundary SVMs, as used for the published
    /// boundaries.
    #[arg(long, default_value_t = 100.0)]
    pub box_constraint: f64,

    /// Choose each group's regressors from its principal components instead
    /// of the standard model terms.
    #[arg(long)]
    pub data_driven: bool,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    /// Expansion table: mixture_id, t_years, expansion_percent.
    #[arg(long)]
    pub series: PathBuf,

    /// Weight kept on each original sample; 0.3 is the value used for the
    /// published models and 1 leaves records unchanged.
    #[arg(long, default_value_t = 0.3)]
    pub alpha: f64,

    /// Write plot data here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Expansion table: mixture_id, t_years, expansion_percent.
    #[arg(long)]
    pub series: PathBuf,

    #[command(flatten)]
    pub smoothing: SmoothingArgs,

    #[command(flatten)]
    pub clustering: ClusteringArgs,

    /// Use the raw records for the failure features.
    #[arg(long)]
    pub no_smooth: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out_dir: PathBuf,

    /// Mixtures per group as HN,ML,LL.
    #[arg(long, value_delimiter = ',', default_values_t = [12usize, 12, 12])]
    pub counts: Vec<usize>,

    /// Relative measurement noise (0.05 = 5%).
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,

    /// Generator seed. Overridden by SULFEX_SEED when the flag is absent.
    #[arg(long, env = "SULFEX_SEED", default_value_t = 0)]
    pub seed: u64,
}
