use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use memlab::harness::{
    cmd_attack, cmd_bounds, cmd_curve, cmd_generate, cmd_train, cmd_verify, ExperimentConfig, SUITES,
};
use memlab::predictors::Rate;
use memlab::Error;

#[derive(Parser)]
#[command(
    name = "memlab",
    version,
    about = "Memorization experiments on synthetic subpopulation tasks"
)]
struct Cli {
    /// Experiment config file (TOML sections [experiment], [train], [attack]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Built-in config used when --config is absent: logit or mlp.
    #[arg(long, global = true, default_value = "logit")]
    preset: String,

    /// Use the paper-scale version of the preset.
    #[arg(long, global = true)]
    paper_scale: bool,

    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write instance and data set files for every trial.
    Generate,
    /// Train or build the classifier and write errors.csv (and checkpoints).
    Train,
    /// Attack singletons of each trial's classifier and write attack.csv.
    Attack,
    /// Retrain with snapshots and write curve.csv.
    Curve,
    /// Evaluate a bounds request file and print CSV.
    Bounds { file: PathBuf },
    /// Run built-in checks: prob, mixture, tasks, predictors, train, attacks, info or all.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
}

enum Failure {
    Usage(String),
    Check(String),
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => ExperimentConfig::preset(&cli.preset, cli.paper_scale).map_err(|e| Failure::Usage(e.to_string()))?,
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn runtime(e: Error) -> Failure {
    match e {
        Error::Parse { .. } | Error::Domain(_) => Failure::Usage(e.to_string()),
        other => Failure::Check(other.to_string()),
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or("NA".into(), |v| format!("{:.1}%", 100.0 * v))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Generate => {
            let cfg = load_config(cli)?;
            cmd_generate(&cfg).map_err(runtime)?;
            println!("wrote {} trials to {}", cfg.trials, cfg.out.display());
        }
        Command::Train => {
            let cfg = load_config(cli)?;
            let r = cmd_train(&cfg).map_err(runtime)?;
            println!(
                "{}: train {} test {} represented {} singletons {}",
                cfg.classifier.name(),
                pct(r.mean_error(|e| e.train)),
                pct(r.mean_error(|e| e.test)),
                pct(r.mean_error(|e| e.represented)),
                pct(r.mean_error(|e: &memlab::predictors::ErrorReport| -> Rate { e.singletons })),
            );
        }
        Command::Attack => {
            let cfg = load_config(cli)?;
            let r = cmd_attack(&cfg).map_err(runtime)?;
            println!(
                "{} / {}: recovery error {}",
                cfg.classifier.name(),
                cfg.attack.name(),
                r.mean_recovery().map_or("NA".into(), |v| format!("{v:.2}%"))
            );
        }
        Command::Curve => {
            let cfg = load_config(cli)?;
            let pts = cmd_curve(&cfg).map_err(runtime)?;
            println!(
                "wrote {} snapshots to {}",
                pts.len(),
                cfg.out.join("curve.csv").display()
            );
        }
        Command::Bounds { file } => {
            let text = std::fs::read_to_string(file).map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))?;
            let csv = cmd_bounds(&text).map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))?;
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir).map_err(|e| Failure::Check(e.to_string()))?;
                std::fs::write(dir.join("bounds.csv"), &csv).map_err(|e| Failure::Check(e.to_string()))?;
            }
            print!("{csv}");
        }
        Command::Verify { suite } => {
            if !SUITES.contains(&suite.as_str()) {
                return Err(Failure::Usage(format!(
                    "unknown suite {suite:?}; expected one of {}",
                    SUITES.join(", ")
                )));
            }
            let checks = cmd_verify(suite).map_err(runtime)?;
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.pass).count();
            println!("{} checks, {failed} failed", checks.len());
            if failed > 0 {
                return Err(Failure::Check(format!("{failed} checks failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            error!("{e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            error!("{m}");
            ExitCode::from(2)
        }
        Err(Failure::Check(m)) => {
            error!("{m}");
            ExitCode::from(1)
        }
    }
}
