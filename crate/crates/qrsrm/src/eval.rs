//! Evaluation of frozen agents, metric CSV files and seed aggregation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qrsrm_core::measure::srm_value;
use qrsrm_core::{DiscreteDistribution, RiskSpectrum};
use rayon::prelude::*;

use crate::agent::{parse_spectrum, Agent};
use crate::env::{Env, Environment};
use crate::error::{Error, Result};

/// Discounted returns of `episodes` greedy episodes.
///
/// Episode `i` runs on stream `i + 1` of `seed` (training uses stream 0), so
/// results do not depend on how episodes are spread across threads.
pub fn evaluate(agent: &Agent, env: &Env, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    (0..episodes)
        .into_par_iter()
        .map(|i| {
            let mut env = env.clone();
            env.reseed(seed, i as u64 + 1);
            agent.run_episode(&mut env)
        })
        .collect()
}

/// A risk metric named by the spectrum mini-language (`mean`, `cvar:0.2`, …).
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    spectrum: Option<RiskSpectrum>,
}

impl Metric {
    pub fn parse(name: &str) -> Result<Self> {
        let spectrum = match name.trim() {
            "mean" => None,
            other => Some(parse_spectrum(other)?),
        };
        Ok(Self { name: name.trim().to_string(), spectrum })
    }

    /// The metric of the empirical distribution of `returns`.
    pub fn of(&self, returns: &[f64]) -> Result<f64> {
        match &self.spectrum {
            None if returns.is_empty() => Err(Error::Config("no returns to evaluate".into())),
            None => Ok(returns.iter().sum::<f64>() / returns.len() as f64),
            Some(s) => Ok(srm_value(s, &DiscreteDistribution::uniform(returns)?)),
        }
    }
}

/// One line of a metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub seed: u64,
    pub model: String,
    pub spectrum: String,
    pub metric: String,
    pub value: f64,
    pub episodes: usize,
    pub wall_seconds: f64,
}

const HEADER: [&str; 7] = ["seed", "model", "spectrum", "metric", "value", "episodes", "wall_seconds"];

pub fn write_rows<W: std::io::Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.model.clone(),
            r.spectrum.clone(),
            r.metric.clone(),
            format!("{:?}", r.value),
            r.episodes.to_string(),
            format!("{:?}", r.wall_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        return Err(Error::Config(format!("{}: not a metrics file", path.display())));
    }
    let bad = |what: &str| Error::Config(format!("{}: bad {what}", path.display()));
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        rows.push(MetricsRow {
            seed: r[0].parse().map_err(|_| bad("seed"))?,
            model: r[1].to_string(),
            spectrum: r[2].to_string(),
            metric: r[3].to_string(),
            value: r[4].parse().map_err(|_| bad("value"))?,
            episodes: r[5].parse().map_err(|_| bad("episodes"))?,
            wall_seconds: r[6].parse().map_err(|_| bad("wall_seconds"))?,
        });
    }
    Ok(rows)
}

/// Files named `*.metrics.csv` under `dir`, recursively, in sorted order.
pub fn metrics_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.to_string_lossy().ends_with(".metrics.csv") {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Per-(model, spectrum) mean and population standard deviation of each
/// metric across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub model: String,
    pub spectrum: String,
    pub seeds: usize,
    /// `(mean, std)` per requested metric; `None` when no seed reported it.
    pub cells: Vec<Option<(f64, f64)>>,
}

pub fn aggregate(rows: &[MetricsRow], metrics: &[String]) -> Vec<TableRow> {
    let mut groups: Vec<((String, String), BTreeMap<String, Vec<f64>>, Vec<u64>)> = Vec::new();
    for r in rows {
        let key = (r.model.clone(), r.spectrum.clone());
        let idx = match groups.iter().position(|(k, _, _)| *k == key) {
            Some(i) => i,
            None => {
                groups.push((key, BTreeMap::new(), Vec::new()));
                groups.len() - 1
            }
        };
        let (_, values, seeds) = &mut groups[idx];
        values.entry(r.metric.clone()).or_default().push(r.value);
        if !seeds.contains(&r.seed) {
            seeds.push(r.seed);
        }
    }
    groups
        .into_iter()
        .map(|((model, spectrum), values, seeds)| {
            let cells = metrics
                .iter()
                .map(|m| {
                    values.get(m).map(|v| {
                        let k = v.len() as f64;
                        let mean = v.iter().sum::<f64>() / k;
                        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / k;
                        (mean, var.sqrt())
                    })
                })
                .collect();
            TableRow { model, spectrum, seeds: seeds.len(), cells }
        })
        .collect()
}

pub fn write_table<W: std::io::Write>(out: W, table: &[TableRow], metrics: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["model".to_string(), "spectrum".to_string(), "seeds".to_string()];
    for m in metrics {
        header.push(format!("{m} mean"));
        header.push(format!("{m} std"));
    }
    w.write_record(&header)?;
    for row in table {
        let mut rec = vec![row.model.clone(), row.spectrum.clone(), row.seeds.to_string()];
        for cell in &row.cells {
            match cell {
                Some((mean, std)) => {
                    rec.push(format!("{mean:?}"));
                    rec.push(format!("{std:?}"));
                }
                None => {
                    rec.push(String::new());
                    rec.push(String::new());
                }
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
