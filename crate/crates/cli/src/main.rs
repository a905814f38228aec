use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use esdqn::config::{parse_seeds, AgentKind, RunConfig};
use esdqn::experiment::output::{read_runs, write_cluster_dump, write_run_outputs, write_summary};
use esdqn::experiment::{aggregate_runs, run_training, TrainingOptions};

#[derive(Parser)]
#[command(name = "esdqn", version, about = "Elastic Step DQN and baselines on classic-control tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration over a set of seeds and write CSV logs.
    Run {
        /// Shipped config name (e.g. `cartpole_elastic`) or path to a TOML file.
        #[arg(long)]
        config: String,
        /// `key=value` or `section.key=value`; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Seeds such as `0..29`, `3` or `1,4,9`; defaults to the config's list.
        #[arg(long)]
        seeds: Option<String>,
        /// Parallel runs; defaults to the number of available cores.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory; defaults to `results/<config name>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the runs of several `run` output directories.
    Aggregate {
        /// Directories written by `run`.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "results/summary")]
        out: PathBuf,
    },
    /// Dump the rows and labels of one elastic clustering fit.
    Clusters {
        /// Directory written by an elastic `run`.
        #[arg(long)]
        run: PathBuf,
        /// Training step whose fit is dumped (1-based).
        #[arg(long)]
        fit: u64,
        /// Seed to replay; defaults to the first seed of the run.
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV path; defaults to `<run>/clusters_<seed>_<fit>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, overrides, seeds, jobs, out } => cmd_run(&config, &overrides, seeds.as_deref(), jobs, out),
        Command::Aggregate { runs, out } => cmd_aggregate(&runs, &out).map(|_| ExitCode::SUCCESS),
        Command::Clusters { run, fit, seed, out } => cmd_clusters(&run, fit, seed, out).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_run(config: &str, overrides: &[String], seeds: Option<&str>, jobs: Option<usize>, out: Option<PathBuf>) -> Result<ExitCode> {
    let mut cfg = RunConfig::load(config)?.with_overrides(overrides)?;
    if let Some(s) = seeds {
        parse_seeds(s)?;
        cfg.run.seeds = s.to_string();
    }
    let seeds = cfg.seeds()?;
    let out = out.unwrap_or_else(|| {
        let stem = Path::new(config).file_stem().map_or_else(|| cfg.label(), |s| s.to_string_lossy().into_owned());
        PathBuf::from("results").join(stem)
    });
    let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    log::info!("{} {} on {}: {} seeds, {} jobs", cfg.run.env, cfg.label(), cfg.run.total_steps, seeds.len(), jobs);
    let outcomes = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let o = run_training(&cfg, seed, TrainingOptions::default());
                if let Ok(o) = &o {
                    log::info!("seed {seed}: final reward {:.2}, mean |Q| {:.2}", o.summary.final_reward, o.summary.mean_abs_q);
                }
                o.with_context(|| format!("seed {seed}"))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    write_run_outputs(&out, &cfg, &outcomes)?;
    let aborted: Vec<u64> = outcomes.iter().filter(|o| o.aborted.is_some()).map(|o| o.seed).collect();
    if !aborted.is_empty() {
        eprintln!("aborted runs (non-finite values) for seeds {aborted:?}; see aborted.csv");
        return Ok(ExitCode::from(2));
    }
    println!("{}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_aggregate(dirs: &[PathBuf], out: &Path) -> Result<()> {
    let mut runs = Vec::new();
    for d in dirs {
        runs.extend(read_runs(d).with_context(|| format!("reading {}", d.display()))?);
    }
    let rows = aggregate_runs(&runs);
    write_summary(out, &rows)?;
    println!("{}", out.join("summary.csv").display());
    Ok(())
}

fn cmd_clusters(run: &Path, fit: u64, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let cfg_path = run.join("config.toml");
    let text = std::fs::read_to_string(&cfg_path).with_context(|| format!("reading {}", cfg_path.display()))?;
    let cfg = RunConfig::from_toml_str(&text)?;
    if cfg.run.agent != AgentKind::Elastic {
        bail!("{} is not an elastic run", run.display());
    }
    if fit == 0 || fit > cfg.run.total_steps {
        bail!("fit index must be in 1..={}", cfg.run.total_steps);
    }
    let seed = match seed {
        Some(s) => s,
        None => cfg.seeds()?[0],
    };
    let options = TrainingOptions {
        stop_at_step: Some(fit),
        record_fits: true,
        ..Default::default()
    };
    let outcome = run_training(&cfg, seed, options)?;
    let Some(record) = outcome.last_fit else {
        bail!("no full clustering fit at step {fit} (cached fits are not recorded)");
    };
    let out = out.unwrap_or_else(|| run.join(format!("clusters_{seed}_{fit}.csv")));
    write_cluster_dump(&out, cfg.run.env, &record)?;
    println!("{}", out.display());
    Ok(())
}
