mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "cfx", version, about = "Counterfactual-probability explanations with causal discovery")]
struct Cli {
    /// Worker threads for trial-level parallelism.
    #[arg(long, global = true, env = "CFX_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a benchmark or custom SCM to CSV.
    Simulate(SimulateArgs),
    /// Learn a causal graph from a CSV under a prior mode.
    Discover(DiscoverArgs),
    /// Score a classifier's predictions against a graph, a discovery run or no graph.
    Explain(ExplainArgs),
    /// Run an experiment config and write the per-cell summary.
    Evaluate(EvaluateArgs),
    /// Run the canned experiments.
    Reproduce(ReproduceArgs),
    /// Synthetic credit-rating pipeline end to end.
    DemoCredit(DemoArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Form {
    Linear,
    Nonlinear,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Noise {
    Uniform,
    Gaussian,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SchemeArg {
    EqualWidth,
    EqualFrequency,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum IdentificationArg {
    Full,
    Backdoor,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DiscoverOn {
    Raw,
    Codes,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Three-variable structure A-E.
    #[arg(long, conflicts_with_all = ["spec", "eight_var"])]
    structure: Option<String>,
    /// The shipped eight-variable benchmark.
    #[arg(long)]
    eight_var: bool,
    /// Custom SCM JSON.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "linear")]
    form: Form,
    /// Noise family for the eight-variable benchmark.
    #[arg(long, value_enum, default_value = "uniform")]
    noise: Noise,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the generating SCM as JSON.
    #[arg(long)]
    spec_out: Option<PathBuf>,
}

/// Options shared by commands that run discovery.
#[derive(Args, Debug, Clone)]
struct DiscoveryFlags {
    /// Fisher-z significance level for PC.
    #[arg(long)]
    alpha: Option<f64>,
    /// HSIC significance level for RESIT.
    #[arg(long)]
    hsic_alpha: Option<f64>,
    /// Maximum DAG extensions enumerated for a PC pattern.
    #[arg(long)]
    extension_cap: Option<usize>,
}

#[derive(Args, Debug)]
struct DiscoverArgs {
    #[arg(long)]
    data: PathBuf,
    /// Column-kind sidecar JSON.
    #[arg(long)]
    kinds: Option<PathBuf>,
    #[arg(long)]
    target: String,
    #[arg(long)]
    method: String,
    #[arg(long, default_value = "0")]
    prior: String,
    #[command(flatten)]
    flags: DiscoveryFlags,
    /// Graph JSON (the pattern for PC).
    #[arg(long)]
    out: PathBuf,
    /// JSON array of every DAG extension (PC only).
    #[arg(long)]
    extensions_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    kinds: Option<PathBuf>,
    #[arg(long)]
    target: String,
    /// Score against this DAG JSON.
    #[arg(long, conflicts_with_all = ["method", "no_graph"])]
    graph: Option<PathBuf>,
    /// Discover the graph with this method.
    #[arg(long, conflicts_with = "no_graph")]
    method: Option<String>,
    #[arg(long, default_value = "0")]
    prior: String,
    /// Interventional probabilities fall back to conditionals.
    #[arg(long)]
    no_graph: bool,
    /// Use these predictions instead of fitting the built-in forest.
    #[arg(long)]
    labels_csv: Option<PathBuf>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    identification: Option<IdentificationArg>,
    #[arg(long, value_enum)]
    discover_on: Option<DiscoverOn>,
    #[command(flatten)]
    flags: DiscoveryFlags,
    /// JSON settings; its keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_json: PathBuf,
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Per-cell summary CSV.
    #[arg(long)]
    out: PathBuf,
    /// Every trial result as JSON.
    #[arg(long)]
    trials_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    /// Comma-separated table numbers, 2-7.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7")]
    tables: Vec<String>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct DemoArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
