use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mixsel::config::{RunConfig, Study};
use mixsel::error::{MixselError, Result};
use mixsel::{experiments, io, parse};
use mixsel_core::em::{self, FitOptions};
use mixsel_core::{order, LocationFamily, ParamBall};

/// Penalized-likelihood order estimation for location mixtures.
#[derive(Debug, Parser)]
#[command(name = "mixsel", version)]
struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a q-component mixture by multi-start EM and print it as JSON.
    Fit(FitArgs),
    /// Estimate the order with a penalty and print the criterion table.
    Order(OrderArgs),
    /// Run a study from a config file.
    Exp(ExpArgs),
    /// Parse a dataset and report its size.
    IngestCheck(IngestArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Headerless CSV, one point per row.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Standard deviation of the Gaussian kernel.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    starts: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("ball").required(true).args(["radius", "sieve"])))]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    q: usize,
    /// Radius of the location ball.
    #[arg(long)]
    radius: Option<f64>,
    /// Sieve schedule evaluated at the sample size, e.g. `const:10`.
    #[arg(long)]
    sieve: Option<String>,
}

#[derive(Debug, Args)]
struct OrderArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// `bic`, `loglog:C`, `linear:RATE` or `eta:ETA:RATE`.
    #[arg(long)]
    penalty: String,
    #[arg(long, default_value = "const:10")]
    sieve: String,
    #[arg(long, default_value_t = order::DEFAULT_Q_CAP)]
    q_cap: usize,
    /// Where to write the table.
    #[arg(long, default_value = "order_table.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExpArgs {
    study: Study,
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; falls back to MIXSEL_THREADS, then the config.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1)]
    dim: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mixsel: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Fit(a) => cmd_fit(a),
        Command::Order(a) => cmd_order(a),
        Command::Exp(a) => cmd_exp(a),
        Command::IngestCheck(a) => cmd_ingest(a),
    }
}

fn family(m: &ModelArgs) -> Result<LocationFamily> {
    LocationFamily::scaled(m.sigma, m.dim).map_err(|e| MixselError::Config(e.to_string()))
}

fn options(m: &ModelArgs) -> Result<FitOptions> {
    let opts = FitOptions { starts: m.starts, tol: m.tol, max_iter: m.max_iter, seed: m.seed };
    opts.validate().map_err(|e| MixselError::Config(e.to_string()))?;
    Ok(opts)
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let fam = family(&a.model)?;
    let opts = options(&a.model)?;
    if a.q == 0 {
        return Err(MixselError::Config("--q must be at least 1".into()));
    }
    let data = io::read_dataset_csv(&a.model.data, a.model.dim)?;
    let radius = match (a.radius, &a.sieve) {
        (Some(r), _) => r,
        (None, Some(s)) => parse::parse_sieve(s)?.radius(data.len()).map_err(|e| MixselError::Config(e.to_string()))?,
        (None, None) => unreachable!("clap requires one of --radius, --sieve"),
    };
    let ball = ParamBall::new(radius).map_err(|e| MixselError::Config(e.to_string()))?;
    let fit = em::fit_constrained(a.q, &data, &fam, &ball, &opts)?;
    println!("{}", serde_json::to_string_pretty(&io::fit_result_json(&fit)).expect("json"));
    Ok(())
}

fn cmd_order(a: OrderArgs) -> Result<()> {
    let pen = parse::parse_penalty(&a.penalty)?;
    let sieve = parse::parse_sieve(&a.sieve)?;
    let fam = family(&a.model)?;
    let opts = options(&a.model)?;
    if a.q_cap == 0 {
        return Err(MixselError::Config("--q-cap must be at least 1".into()));
    }
    let data = io::read_dataset_csv(&a.model.data, a.model.dim)?;
    let est = order::estimate_order(&data, &fam, &pen, &sieve, &opts, a.q_cap)?;
    io::write_file(&a.out, &io::order_table_csv(&est))?;
    print!("{}", io::order_table_text(&est));
    println!("q_hat {}", est.q_hat);
    Ok(())
}

fn cmd_exp(a: ExpArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.config)?;
    if cfg.study != a.study {
        return Err(MixselError::Config(format!(
            "config is for the {} study, not {}",
            cfg.study.name(),
            a.study.name()
        )));
    }
    let threads = experiments::resolve_threads(a.threads, &cfg)?;
    let dir = a
        .output
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| Path::new("runs").join(cfg.study.name()));
    let run = experiments::run_study(&cfg, threads)?;
    experiments::write_run(&cfg, &run, &dir)?;
    for name in ["summary.csv", "contrast.csv", "lil_summary.csv", "geometry_summary.csv", "fit.csv", "local_global.csv"] {
        if let Some(art) = run.artifact(name) {
            println!("# {name}");
            print!("{}", art.contents);
        }
    }
    eprintln!("wrote {} file(s) and manifest.json to {}", run.artifacts.len(), dir.display());
    Ok(())
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let data = io::read_dataset_csv(&a.data, a.dim)?;
    let out = serde_json::json!({
        "path": a.data.display().to_string(),
        "rows": data.len(),
        "dim": data.dim(),
        "mean": data.mean(),
    });
    println!("{out}");
    Ok(())
}
