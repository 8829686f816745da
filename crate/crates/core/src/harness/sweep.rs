//! Repeated pipeline runs over one varying quantity.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, run_repetition, ExperimentConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Training-set size.
    M,
    /// Width of every hidden layer.
    Width,
    /// Number of hidden layers, all of the base width.
    Depth,
}

fn default_reps() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.reps == 0 {
            return Err(Error::InvalidConfig("sweep needs values and at least one repetition".into()));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("sweep values must be strictly increasing".into()));
        }
        if self.values[0] == 0 {
            return Err(Error::InvalidConfig("sweep values must be positive".into()));
        }
        Ok(())
    }
}

/// Configuration of one sweep cell, with its training seed derived from
/// the master seed, the axis value and the repetition.
pub fn cell_config(base: &ExperimentConfig, axis: SweepAxis, value: usize, rep: usize) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.sweep = None;
    cfg.output_dir = None;
    match axis {
        SweepAxis::M => cfg.dataset.set_m(value),
        SweepAxis::Width => {
            let d = cfg.network.hidden_widths.len();
            cfg.network.hidden_widths = vec![value; d];
        }
        SweepAxis::Depth => {
            let w = cfg.network.hidden_widths.first().copied().unwrap_or(16);
            cfg.network.hidden_widths = vec![w; value];
        }
    }
    cfg.train.seed = derive_seed(base.seed, &value.to_string(), rep as u64);
    cfg
}

/// One line of `sweep.csv`. Measurements are empty when training did not
/// reach zero error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: usize,
    pub rep: usize,
    pub m: usize,
    pub n: usize,
    pub s: Option<usize>,
    pub s_over_m: Option<f64>,
    #[serde(rename = "F")]
    pub bound: Option<f64>,
    pub margin: Option<f64>,
    pub zte: bool,
}

/// Runs every (value, repetition) cell in parallel. Rows come back sorted
/// by value then repetition, independent of scheduling.
pub fn run_sweep(base: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    base.validate()?;
    let spec = base
        .sweep
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("config has no sweep section".into()))?;
    let cells: Vec<(usize, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.reps).map(move |r| (v, r)))
        .collect();
    cells
        .par_iter()
        .map(|&(value, rep)| {
            let cfg = cell_config(base, spec.axis, value, rep);
            let m = cfg.dataset.m().unwrap_or(0);
            let n = cfg.network.neuron_count();
            match run_repetition(&cfg, rep as u64) {
                Ok(out) => {
                    let r = out.record;
                    Ok(SweepRow {
                        axis_value: value,
                        rep,
                        m: r.m,
                        n: r.n,
                        s: Some(r.s),
                        s_over_m: Some(r.s_over_m),
                        bound: r.bound,
                        margin: Some(r.margin_value),
                        zte: true,
                    })
                }
                Err(e) if matches!(e.root(), Error::ZeroTrainingErrorNotReached) => Ok(SweepRow {
                    axis_value: value,
                    rep,
                    m,
                    n,
                    s: None,
                    s_over_m: None,
                    bound: None,
                    margin: None,
                    zte: false,
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean, min and max over the repetitions that reached zero training error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub axis_value: usize,
    pub completed: usize,
    pub mean_s: f64,
    pub mean_s_over_m: f64,
    pub min_s_over_m: f64,
    pub max_s_over_m: f64,
    #[serde(rename = "mean_F")]
    pub mean_bound: Option<f64>,
}

pub fn summarize(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut values: Vec<usize> = rows.iter().map(|r| r.axis_value).collect();
    values.dedup();
    values
        .into_iter()
        .filter_map(|v| {
            let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.axis_value == v && r.zte).collect();
            if ok.is_empty() {
                return None;
            }
            let k = ok.len() as f64;
            let ratios: Vec<f64> = ok.iter().filter_map(|r| r.s_over_m).collect();
            let bounds: Vec<f64> = ok.iter().filter_map(|r| r.bound).collect();
            Some(SweepSummary {
                axis_value: v,
                completed: ok.len(),
                mean_s: ok.iter().filter_map(|r| r.s).sum::<usize>() as f64 / k,
                mean_s_over_m: ratios.iter().sum::<f64>() / k,
                min_s_over_m: ratios.iter().copied().fold(f64::INFINITY, f64::min),
                max_s_over_m: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_bound: (bounds.len() == ok.len()).then(|| bounds.iter().sum::<f64>() / k),
            })
        })
        .collect()
}
