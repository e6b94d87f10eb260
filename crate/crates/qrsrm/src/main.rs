//! `qrsrm`: train, evaluate, decompose, sweep and tabulate.
//!
//! Exit status 1 reports configuration or IO problems, 2 numeric failures.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qrsrm::config::{self, split_metrics, RunConfig};
use qrsrm::env::Environment;
use qrsrm::error::{Error, Result};
use qrsrm::eval::{self, Metric, MetricsRow};
use qrsrm::{checkpoint, report, run};

#[derive(Parser)]
#[command(name = "qrsrm", version, about = "Spectral-risk distributional RL toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent, evaluate it and write checkpoint and metrics.
    Train {
        /// Configuration file; flags below override its settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run section to use when the file defines several.
        #[arg(long)]
        run: Option<String>,
        /// `cliff`, `put`, `meanrev` or `fixture:<example1|choice|path>`.
        #[arg(long)]
        env: Option<String>,
        /// `qrdqn`, `qrcvar:<α>`, `qricvar:<α>` or `qrsrm:<spectrum>`.
        #[arg(long)]
        algo: Option<String>,
        /// Single seed, replacing the file's seed list.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extra `key=value` settings.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Evaluate a checkpoint.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        /// Evaluation episodes [default: 10000].
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "mean,cvar:0.1,cvar:0.3")]
        metrics: String,
        /// Output CSV (standard output if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-step risk preferences of a QR-SRM checkpoint along one episode.
    Decompose {
        #[arg(long)]
        ckpt: PathBuf,
        /// Environment; defaults to the one the checkpoint was trained on.
        #[arg(long)]
        env: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV (standard output if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every run section for every seed of a configuration file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Aggregate metrics files into mean and standard deviation per model.
    Table {
        /// Directory searched recursively for `*.metrics.csv`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "mean,cvar:0.1,cvar:0.3")]
        metrics: String,
        /// Output CSV (standard output if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn train_config(
    config: Option<PathBuf>,
    run: Option<String>,
    flags: BTreeMap<String, String>,
) -> Result<RunConfig> {
    let text = match &config {
        Some(path) => std::fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut runs = config::parse_raw(&text)?;
    let mut chosen = match &run {
        Some(name) => {
            let i = runs.iter().position(|r| &r.name == name).ok_or_else(|| Error::Config(format!("no run `{name}`")))?;
            runs.swap_remove(i)
        }
        None if runs.len() == 1 => runs.remove(0),
        None => return Err(Error::Config("the file defines several runs; pick one with --run".into())),
    };
    if flags.contains_key("algo") {
        chosen.pairs.remove("spectrum");
    }
    chosen.pairs.extend(flags);
    chosen.resolve()
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, run: run_name, env, algo, seed, out, set } => {
            let mut flags = BTreeMap::new();
            for kv in set {
                let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
                flags.insert(k.trim().to_string(), v.trim().to_string());
            }
            let named = [("env", env), ("algo", algo), ("output", out.map(|o| o.display().to_string()))];
            for (k, v) in named {
                if let Some(v) = v {
                    flags.insert(k.to_string(), v);
                }
            }
            let cfg = train_config(config, run_name, flags)?;
            let seed = seed.unwrap_or(cfg.seeds[0]);
            let result = run::run(&cfg, seed)?;
            eprintln!("checkpoint {}", result.checkpoint.display());
            eprintln!("training stream {}", result.stream.display());
            eprintln!("metrics {}", result.metrics.display());
            eval::write_rows(io::stdout().lock(), &result.rows)
        }
        Command::Eval { ckpt, episodes, seed, metrics, out } => {
            let (agent, prov) = checkpoint::load(&ckpt)?;
            let env = config::build_env(&prov.env, &prov.env_params, Some(agent.gamma), seed)?;
            let episodes = episodes.unwrap_or(10_000);
            let returns = eval::evaluate(&agent, &env, episodes, seed)?;
            let mut rows = Vec::new();
            for name in split_metrics(&metrics) {
                let m = Metric::parse(&name)?;
                rows.push(MetricsRow {
                    seed,
                    model: agent.algorithm.model().to_string(),
                    spectrum: agent.algorithm.objective(),
                    metric: m.name.clone(),
                    value: m.of(&returns)?,
                    episodes,
                    wall_seconds: 0.0,
                });
            }
            eval::write_rows(output(&out)?, &rows)
        }
        Command::Decompose { ckpt, env, seed, out } => {
            let (agent, prov) = checkpoint::load(&ckpt)?;
            let name = env.unwrap_or(prov.env.clone());
            let params = if name == prov.env { prov.env_params } else { BTreeMap::new() };
            let mut env = config::build_env(&name, &params, Some(agent.gamma), seed)?;
            if env.feature_dim() + agent.algorithm.extra_inputs() != agent.online.input_dim() || env.actions() != agent.actions() {
                return Err(Error::Config(format!("checkpoint does not fit environment `{name}`")));
            }
            env.reseed(seed, 1);
            let rows = report::trajectory_report(&agent, &mut env)?;
            report::write_report(output(&out)?, &rows)
        }
        Command::Sweep { config, jobs } => {
            let runs = config::load(&config)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or(0))
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            let results = pool.install(|| run::sweep(&runs))?;
            let rows: Vec<MetricsRow> = results.iter().flat_map(|r| r.rows.clone()).collect();
            let merged = runs[0].output.join("sweep.csv");
            eval::write_rows(BufWriter::new(File::create(&merged)?), &rows)?;
            eprintln!("{} runs, merged metrics in {}", results.len(), merged.display());
            Ok(())
        }
        Command::Table { input, metrics, out } => {
            let metrics = split_metrics(&metrics);
            for m in &metrics {
                Metric::parse(m)?;
            }
            let mut rows = Vec::new();
            for path in eval::metrics_files(&input)? {
                rows.extend(eval::read_rows(&path)?);
            }
            eval::write_table(output(&out)?, &eval::aggregate(&rows, &metrics), &metrics)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
