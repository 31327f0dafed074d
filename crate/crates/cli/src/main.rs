use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pushlab_core::eval::{evaluate, run_intrinsic, PolicyKind, CONFIG_FILE};
use pushlab_core::planner::diagnostics;
use pushlab_core::{Artifacts, Error, ExplorationMode, Latent, Planner, RunConfig};

const REPORT_FILE: &str = "report.csv";
const CURVE_FILE: &str = "curve.csv";
const DIAG_FILE: &str = "diag.csv";

#[derive(Parser, Debug)]
#[command(name = "pushlab", version, about = "Open-ended learning experiments in a planar push world")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

/// Settings that override the config file.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Config file of `key = value` lines
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for layouts, exploration, goals and the random policy
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Intrinsic-phase action count
    #[arg(long, global = true)]
    actions: Option<usize>,
    /// round1 or round2
    #[arg(long, global = true)]
    mode: Option<ExplorationMode>,
    /// Objects on the table, 1 to 3
    #[arg(long, global = true)]
    objects: Option<usize>,
    /// Encoder latent dimension
    #[arg(long, global = true)]
    latents: Option<usize>,
    /// Abstraction levels in the threshold table
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// Extrinsic goals per evaluation
    #[arg(long, global = true)]
    goals: Option<usize>,
    /// Artifact and report directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Explore, then learn the encoder and threshold table
    Intrinsic,
    /// Score a policy on generated goals using saved artifacts
    Extrinsic {
        /// baseline, random or still
        #[arg(long, default_value = "baseline")]
        policy: PolicyKind,
    },
    /// Mean score against intrinsic-phase length
    Curve {
        /// Comma-separated intrinsic action counts
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
        /// Number of consecutive seeds per grid point
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Branching factor and distinct states per abstraction level
    Diag {
        /// Number of stored states used as query points
        #[arg(long)]
        samples: Option<usize>,
    },
}

fn load_config(o: &Overrides, artifact_config: bool) -> Result<RunConfig, Error> {
    let mut cfg = match &o.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    // commands that read artifacts default to the config they were made with
    if o.config.is_none() && artifact_config {
        let dir = o.out.clone().unwrap_or_else(|| cfg.out.clone());
        let saved = dir.join(CONFIG_FILE);
        if saved.exists() {
            cfg = RunConfig::from_file(&saved)?;
        }
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.actions {
        cfg.actions = v;
    }
    if let Some(v) = o.mode {
        cfg.mode = v;
    }
    if let Some(v) = o.objects {
        cfg.objects = v;
    }
    if let Some(v) = o.latents {
        cfg.latents = v;
    }
    if let Some(v) = o.levels {
        cfg.levels = v;
    }
    if let Some(v) = o.goals {
        cfg.goals = v;
    }
    if let Some(v) = &o.out {
        cfg.out = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_output(dir: &Path, name: &str, text: &str) -> Result<PathBuf, Error> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

fn cmd_intrinsic(cfg: &RunConfig) -> Result<(), Error> {
    let run = run_intrinsic(cfg, Some(&cfg.out))?;
    println!(
        "stored {} triplets ({} timesteps) in {}",
        run.artifacts.store.len(),
        run.timesteps,
        cfg.out.display()
    );
    println!("config={}", cfg.fingerprint_hex());
    Ok(())
}

fn cmd_extrinsic(cfg: &RunConfig, policy: PolicyKind) -> Result<(), Error> {
    let artifacts = Artifacts::load(&cfg.out, cfg.levels)?;
    let report = evaluate(cfg, &artifacts, policy)?;
    let path = write_output(&cfg.out, REPORT_FILE, &report.to_csv())?;
    println!("M = {:.6}", report.mean);
    println!(
        "policy={} goals={} seed={} config={} report={}",
        policy,
        report.trials.len(),
        cfg.seed,
        cfg.fingerprint_hex(),
        path.display()
    );
    Ok(())
}

fn cmd_curve(cfg: &RunConfig, grid: Option<Vec<usize>>, seeds: Option<usize>) -> Result<(), Error> {
    let mut cfg = cfg.clone();
    if let Some(grid) = grid {
        cfg.curve_grid = grid;
    }
    if let Some(seeds) = seeds {
        cfg.curve_seeds = seeds;
    }
    cfg.validate()?;
    let mut csv = String::from("actions,seed,score\n");
    for &actions in &cfg.curve_grid {
        for k in 0..cfg.curve_seeds as u64 {
            let point = RunConfig {
                actions,
                seed: cfg.seed + k,
                ..cfg.clone()
            };
            let run = run_intrinsic(&point, None)?;
            let report = evaluate(&point, &run.artifacts, PolicyKind::Baseline)?;
            writeln!(csv, "{},{},{}", actions, point.seed, report.mean).unwrap();
            eprintln!("actions={actions} seed={} M={:.6}", point.seed, report.mean);
        }
    }
    writeln!(csv, "# config={}", cfg.fingerprint_hex()).unwrap();
    let path = write_output(&cfg.out, CURVE_FILE, &csv)?;
    print!("{csv}");
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_diag(cfg: &RunConfig, samples: Option<usize>) -> Result<(), Error> {
    let artifacts = Artifacts::load(&cfg.out, cfg.levels)?;
    let planner = Planner::new(artifacts.store.clone(), artifacts.table.clone(), cfg.planner_config())?;
    let store = &artifacts.store;
    let wanted = samples.unwrap_or(cfg.diag_samples).min(store.len());
    // evenly spaced pre-action states keep the sample reproducible
    let queries: Vec<Latent> = (0..wanted)
        .map(|i| store.triplets()[i * store.len() / wanted].latents().0.clone())
        .collect();
    let mut csv = diagnostics(&planner, &queries)?.to_csv();
    writeln!(csv, "# samples={} config={}", queries.len(), cfg.fingerprint_hex()).unwrap();
    let path = write_output(&cfg.out, DIAG_FILE, &csv)?;
    print!("{csv}");
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let reads_artifacts = matches!(cli.command, Command::Extrinsic { .. } | Command::Diag { .. });
    let cfg = load_config(&cli.overrides, reads_artifacts)?;
    match cli.command {
        Command::Intrinsic => cmd_intrinsic(&cfg),
        Command::Extrinsic { policy } => cmd_extrinsic(&cfg, policy),
        Command::Curve { grid, seeds } => cmd_curve(&cfg, grid, seeds),
        Command::Diag { samples } => cmd_diag(&cfg, samples),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
