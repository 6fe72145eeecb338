use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "groupkam",
    version,
    about = "Group-sparse kernel additive classification pipeline"
)]
struct Cli {
    /// Add wall-clock timing to the summary line.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic benchmark dataset.
    Synth(SynthArgs),
    /// Elastic-net feature screening.
    Select(SelectArgs),
    /// Fit a model and save it as JSON.
    Fit(FitArgs),
    /// Score a CSV with a saved model.
    Predict(PredictArgs),
    /// Stratified k-fold cross-validation.
    Cv(CvArgs),
    /// Cross-validated grid search over lambda, sigma and bandwidth.
    Grid(GridArgs),
    /// Pearson correlation between two tables.
    Correlate(CorrelateArgs),
    /// Export partial dependence curves and group importance.
    Interpret(InterpretArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Input CSV.
    #[arg(long)]
    data: String,
    /// Name of the label column.
    #[arg(long, default_value = "label")]
    label: String,
    /// Name of the sample id column, used when present.
    #[arg(long, default_value = "sample_id")]
    id_column: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Weights {
    Unit,
    SqrtSize,
}

#[derive(Args, Debug)]
struct GroupArgs {
    /// Group configuration JSON; one group per feature when omitted.
    #[arg(long)]
    groups: Option<String>,
    /// Override every group weight.
    #[arg(long, value_enum)]
    weights: Option<Weights>,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Shared kernel bandwidth for every group (per-group median heuristic
    /// when omitted).
    #[arg(long)]
    gamma: Option<f64>,
    /// Fit an unpenalized intercept.
    #[arg(long)]
    intercept: bool,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
    /// Output directory.
    #[arg(long)]
    out: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Scope {
    /// Select on the training split only.
    Train,
    /// Select on every row.
    Full,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Group configuration to restrict to the selected features.
    #[arg(long)]
    groups: Option<String>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// L1 share of the elastic-net penalty.
    #[arg(long, default_value_t = 0.5)]
    alpha_mix: f64,
    #[arg(long, default_value_t = 50)]
    n_lambda: usize,
    #[arg(long, default_value_t = 1e-3)]
    lambda_ratio: f64,
    #[arg(long, value_enum, default_value_t = Scope::Train)]
    scope: Scope,
    /// Fraction of each class held out from the training split.
    #[arg(long, default_value_t = 0.1)]
    holdout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory.
    #[arg(long)]
    out: String,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    groups: GroupArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Model file to write.
    #[arg(long)]
    out: String,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: String,
    #[command(flatten)]
    data: DataArgs,
    /// Predictions CSV to write.
    #[arg(long)]
    out: String,
}

#[derive(Args, Debug)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    groups: GroupArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Report JSON to write.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    groups: GroupArgs,
    /// Comma-separated lambdas; 20 log-spaced values from lambda_max down
    /// to 1e-4 when omitted.
    #[arg(long, value_delimiter = ',')]
    lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 2.0])]
    sigmas: Vec<f64>,
    /// Comma-separated bandwidth modes: `median` or a shared gamma value.
    #[arg(long, value_delimiter = ',', default_values_t = vec!["median".to_string()])]
    gammas: Vec<String>,
    #[arg(long)]
    intercept: bool,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Report JSON to write.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
struct CorrelateArgs {
    /// Table whose columns become rows of the matrix.
    #[arg(long)]
    features: String,
    /// Table whose columns become columns of the matrix.
    #[arg(long)]
    characteristics: String,
    /// Rows are matched on this column when both tables have it.
    #[arg(long, default_value = "sample_id")]
    id_column: String,
    /// Columns to ignore in either table.
    #[arg(long, value_delimiter = ',', default_values_t = vec!["label".to_string()])]
    drop: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: String,
}

#[derive(Args, Debug)]
struct InterpretArgs {
    #[arg(long)]
    model: String,
    /// Training data in original units (label column optional).
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 50)]
    grid_size: usize,
    /// Also write per-sample component values.
    #[arg(long)]
    scatter: bool,
    /// Add RKHS-norm contributions to the importance table.
    #[arg(long)]
    rkhs: bool,
    /// Output directory.
    #[arg(long)]
    out: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let started = std::time::Instant::now();
    match commands::run(cli.command) {
        Ok(mut summary) => {
            if cli.verbose {
                summary["elapsed_ms"] = serde_json::json!(started.elapsed().as_millis() as u64);
            }
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
