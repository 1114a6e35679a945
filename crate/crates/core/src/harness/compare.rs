use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::run::{require, run, with_mode};
use crate::error::Result;
use crate::metrics::MetricsReport;
use crate::server::AggregationMode;

/// Metric row names, in table order.
pub const METRIC_ROWS: [&str; 4] = ["model accuracy", "rule accuracy", "rule fidelity", "rule uncertainty"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: AggregationMode,
    /// Final test metrics, one per seed in seed order.
    pub runs: Vec<MetricsReport>,
    pub mean: [f64; 4],
    /// Sample standard deviation; 0 for a single seed.
    pub stdev: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub seeds: Vec<u64>,
    pub modes: Vec<ModeSummary>,
}

impl Comparison {
    pub fn mode(&self, mode: AggregationMode) -> Option<&ModeSummary> {
        self.modes.iter().find(|s| s.mode == mode)
    }
}

fn mean_stdev(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every (mode, seed) pair and summarizes the final test metrics per
/// mode. Reports are not written to disk.
pub fn compare_modes(config: &RunConfig, modes: &[AggregationMode], seeds: &[u64]) -> Result<Comparison> {
    require(!modes.is_empty(), "need at least one mode")?;
    require(!seeds.is_empty(), "need at least one seed")?;
    let jobs: Vec<(AggregationMode, u64)> = modes
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(mode, seed)| {
            let mut cfg = with_mode(config, mode);
            cfg.seed = seed;
            cfg.output_dir = None;
            run(&cfg).map(|r| r.final_metrics)
        })
        .collect::<Result<Vec<_>>>()?;

    let modes = modes
        .iter()
        .zip(results.chunks(seeds.len()))
        .map(|(&mode, runs)| {
            let mut mean = [0.0; 4];
            let mut stdev = [0.0; 4];
            for i in 0..4 {
                let xs: Vec<f64> = runs.iter().map(|r| r.rows()[i].1).collect();
                (mean[i], stdev[i]) = mean_stdev(&xs);
            }
            ModeSummary {
                mode,
                runs: runs.to_vec(),
                mean,
                stdev,
            }
        })
        .collect();
    Ok(Comparison {
        seeds: seeds.to_vec(),
        modes,
    })
}

/// One row per metric, one column per mode, cells as `mean ± stdev` in
/// percent.
impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<18}", "metric")?;
        for s in &self.modes {
            write!(f, " {:>18}", s.mode.name())?;
        }
        writeln!(f)?;
        for (i, row) in METRIC_ROWS.iter().enumerate() {
            write!(f, "{row:<18}")?;
            for s in &self.modes {
                let cell = format!("{:.2} ± {:.2}", s.mean[i] * 100.0, s.stdev[i] * 100.0);
                write!(f, " {cell:>18}")?;
            }
            writeln!(f)?;
        }
        writeln!(f, "seeds: {:?}", self.seeds)
    }
}
