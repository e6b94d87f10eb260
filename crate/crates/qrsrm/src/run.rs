//! Train-evaluate-persist pipelines used by the CLI and the acceptance suite.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::agent::{train, TrainOutcome, TrainRecord};
use crate::checkpoint::{self, Provenance};
use crate::config::RunConfig;
use crate::error::Result;
use crate::eval::{self, Metric, MetricsRow};

/// Everything one `(run, seed)` produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: TrainOutcome,
    pub returns: Vec<f64>,
    pub rows: Vec<MetricsRow>,
    pub checkpoint: PathBuf,
    pub stream: PathBuf,
    pub metrics: PathBuf,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

pub fn write_stream<W: std::io::Write>(out: W, records: &[TrainRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "loss", "episode_return_mean", "theta_w1", "epsilon"])?;
    for r in records {
        w.write_record([
            r.step.to_string(),
            opt(r.loss),
            opt(r.episode_return_mean),
            opt(r.theta_w1),
            format!("{:?}", r.epsilon),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn stem(config: &RunConfig, seed: u64) -> PathBuf {
    config.output.join(format!("{}-{seed}", config.name))
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Trains, evaluates and writes `<output>/<name>-<seed>.{qrsrm,train.csv,metrics.csv,config}`.
pub fn run(config: &RunConfig, seed: u64) -> Result<RunResult> {
    let metrics: Vec<Metric> = config.metrics.iter().map(|m| Metric::parse(m)).collect::<Result<_>>()?;
    std::fs::create_dir_all(&config.output)?;
    let stem = stem(config, seed);
    std::fs::write(with_suffix(&stem, ".config"), config.resolved_text())?;

    let clock = Instant::now();
    let env = config.build_env(seed)?;
    let outcome = train(config.algo.clone(), env.clone(), &config.train, seed)?;
    let returns = if config.eval_episodes > 0 {
        eval::evaluate(&outcome.agent, &env, config.eval_episodes, seed)?
    } else {
        Vec::new()
    };
    let wall_seconds = if config.record_wall_time { clock.elapsed().as_secs_f64() } else { 0.0 };

    let mut rows = Vec::new();
    if !returns.is_empty() {
        for m in &metrics {
            rows.push(MetricsRow {
                seed,
                model: config.algo.model().to_string(),
                spectrum: config.algo.objective(),
                metric: m.name.clone(),
                value: m.of(&returns)?,
                episodes: returns.len(),
                wall_seconds,
            });
        }
    }

    let checkpoint = with_suffix(&stem, ".qrsrm");
    let provenance = Provenance { env: config.env.clone(), env_params: config.env_params.clone() };
    checkpoint::save(&checkpoint, &outcome.agent, &provenance)?;
    let stream = with_suffix(&stem, ".train.csv");
    write_stream(BufWriter::new(File::create(&stream)?), &outcome.records)?;
    let metrics_path = with_suffix(&stem, ".metrics.csv");
    eval::write_rows(BufWriter::new(File::create(&metrics_path)?), &rows)?;
    Ok(RunResult { outcome, returns, rows, checkpoint, stream, metrics: metrics_path })
}

/// Runs every `(run, seed)` pair concurrently. Results come back in
/// configuration order, seeds innermost.
pub fn sweep(configs: &[RunConfig]) -> Result<Vec<RunResult>> {
    let jobs: Vec<(&RunConfig, u64)> =
        configs.iter().flat_map(|c| c.seeds.iter().map(move |s| (c, *s))).collect();
    jobs.par_iter().map(|(c, s)| run(c, *s)).collect()
}
