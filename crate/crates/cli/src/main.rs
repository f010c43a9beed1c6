use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gentledp::{list_experiments, run_experiment, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "gentledp",
    version,
    about = "Run seeded gentle-measurement and private-learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print its summary.
    Run(Box<RunArgs>),
    /// List registered experiments.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment name, as shown by `list`.
    #[arg(long)]
    name: Option<String>,
    /// JSON config file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Report path (JSON); a CSV summary is written beside it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    k: Option<u64>,
    /// QPMW mode: real, ideal or hybrid.
    #[arg(long)]
    mode: Option<String>,
    /// Print the full JSON report instead of the summary table.
    #[arg(long)]
    json: bool,
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            ExperimentConfig::from_json(&text).map_err(|e| e.to_string())?
        }
        None => ExperimentConfig::new(""),
    };
    if let Some(name) = &args.name {
        cfg.name = name.clone();
    }
    if cfg.name.is_empty() {
        return Err("an experiment name is required (--name or a config file)".into());
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(t) = args.trials {
        cfg.trials = Some(t);
    }
    if let Some(out) = &args.out {
        cfg.output_path = Some(out.clone());
    }
    let floats = [
        ("sigma", args.sigma),
        ("eps", args.eps),
        ("mu", args.mu),
        ("beta", args.beta),
    ];
    for (key, v) in floats {
        if let Some(v) = v {
            cfg = cfg.with_param(key, v);
        }
    }
    for (key, v) in [("n", args.n), ("m", args.m), ("k", args.k)] {
        if let Some(v) = v {
            cfg = cfg.with_param(key, v);
        }
    }
    if let Some(mode) = &args.mode {
        cfg = cfg.with_param("mode", mode.as_str());
    }
    Ok(cfg)
}

fn init_threads() -> Result<(), String> {
    if let Ok(v) = std::env::var("GENTLEDP_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| format!("GENTLEDP_THREADS must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<bool, String> {
    let cfg = build_config(&args)?;
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    if args.json {
        println!("{}", report.to_json().map_err(|e| e.to_string())?);
    } else {
        println!(
            "experiment {} (seed {}, {:.2}s)",
            report.name, report.config.seed, report.wall_clock_secs
        );
        print!("{}", report.to_csv());
        println!(
            "{}",
            if report.passed {
                "all checks passed"
            } else {
                "some checks FAILED"
            }
        );
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match cli.command {
        Command::List => {
            for info in list_experiments() {
                println!("{:<20} {}", info.name, info.description);
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run(*args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
