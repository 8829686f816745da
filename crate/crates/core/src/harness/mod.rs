//! Experiment plumbing: configuration, the train-to-bound pipeline and
//! parameter sweeps.

mod analysis;
mod data;
mod idx;
mod sweep;

pub use analysis::{
    boundary_grid, check_wbar_positive, count_unique_signatures, dense_region_agreement, margin_gram, spearman,
    wbar_positive_by_parity, BoundingBox, Classifier, Density, LabelGrid, MarginClassifier, WbarCheck,
};
pub use data::{
    generate_dataset, load_csv_dataset, randomize_labels, read_csv_dataset, write_csv_dataset, GeneratorParams,
    GENERATORS,
};
pub use idx::{encode_idx, idx_dataset, load_idx, parse_images, parse_labels, Grouping};
pub use sweep::{cell_config, run_sweep, summarize, write_sweep_csv, SweepAxis, SweepRow, SweepSpec, SweepSummary};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compression::{bound_report, BoundInputs};
use crate::maxmargin::{extract_nsvs, solve_hard_margin, MarginSolution, SolverOptions};
use crate::network::{train_sgd, LabeledDataset, Network, NetworkConfig, TrainHyper};
use crate::{Error, Result};

/// 64-bit seed from SHA-256 of `master:tag:rep`.
pub fn derive_seed(master: u64, tag: &str, rep: u64) -> u64 {
    let digest = crate::sha256_hex(format!("{master}:{tag}:{rep}").as_bytes());
    u64::from_str_radix(&digest[..16], 16).expect("hex digest")
}

/// Where training data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Generator {
        name: String,
        m: usize,
        #[serde(default)]
        params: GeneratorParams,
    },
    /// Precomputed feature vectors: headerless CSV, label last.
    Csv {
        path: PathBuf,
        #[serde(default)]
        m: Option<usize>,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        m: Option<usize>,
    },
}

impl DatasetSpec {
    pub fn m(&self) -> Option<usize> {
        match self {
            DatasetSpec::Generator { m, .. } => Some(*m),
            DatasetSpec::Csv { m, .. } | DatasetSpec::Idx { m, .. } => *m,
        }
    }

    pub fn set_m(&mut self, value: usize) {
        match self {
            DatasetSpec::Generator { m, .. } => *m = value,
            DatasetSpec::Csv { m, .. } | DatasetSpec::Idx { m, .. } => *m = Some(value),
        }
    }

    fn files(&self) -> Vec<&Path> {
        match self {
            DatasetSpec::Generator { .. } => Vec::new(),
            DatasetSpec::Csv { path, .. } => vec![path],
            DatasetSpec::Idx { images, labels, .. } => vec![images, labels],
        }
    }

    /// Training set and an optional held-out set of `test_m` samples.
    pub fn load(&self, seed: u64, test_seed: u64, test_m: Option<usize>) -> Result<(LabeledDataset, Option<LabeledDataset>)> {
        match self {
            DatasetSpec::Generator { name, m, params } => {
                let train = generate_dataset(name, *m, params, seed)?;
                let test = test_m
                    .map(|t| generate_dataset(name, t, params, test_seed))
                    .transpose()?;
                Ok((train, test))
            }
            DatasetSpec::Csv { path, m } => split_file(load_csv_dataset(path)?, *m, test_m, seed),
            DatasetSpec::Idx { images, labels, m } => {
                split_file(load_idx(images, labels, Grouping::LowHigh)?, *m, test_m, seed)
            }
        }
    }
}

/// Seeded shuffle, then the first `m` samples train and the next `test_m` test.
fn split_file(
    all: LabeledDataset,
    m: Option<usize>,
    test_m: Option<usize>,
    seed: u64,
) -> Result<(LabeledDataset, Option<LabeledDataset>)> {
    let total = all.len();
    let m = m.unwrap_or(total - test_m.unwrap_or(0).min(total));
    let need = m + test_m.unwrap_or(0);
    if need > total {
        return Err(Error::InvalidConfig(format!("{need} samples requested, file has {total}")));
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train = all.subset(&order[..m]);
    let test = test_m.map(|t| all.subset(&order[m..m + t]));
    Ok((train, test))
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub network: NetworkConfig,
    #[serde(default)]
    pub train: TrainHyper,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Replace every training label by a fair coin flip before training.
    #[serde(default)]
    pub randomize_labels: bool,
    /// Size of a held-out set for signature counts.
    #[serde(default)]
    pub test_m: Option<usize>,
    /// Measure network vs max-margin agreement (2D inputs only).
    #[serde(default)]
    pub compare: bool,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        for f in self.dataset.files() {
            if !f.exists() {
                return Err(Error::InvalidConfig(format!("dataset file {} does not exist", f.display())));
            }
        }
        if let DatasetSpec::Generator { name, .. } = &self.dataset {
            if !GENERATORS.contains(&name.as_str()) {
                return Err(Error::UnknownGenerator(name.clone()));
            }
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidConfig(format!("delta={} must lie in (0, 1]", self.delta)));
        }
        self.network.validate()?;
        self.train.validate()?;
        if let Some(sw) = &self.sweep {
            sw.validate()?;
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Everything measured in one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub achieved_zero_training_error: bool,
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub s_over_m: f64,
    pub margin_value: f64,
    /// `F(m, n, s, δ)`; absent when every sample is a support vector.
    #[serde(rename = "F")]
    pub bound: Option<f64>,
    #[serde(rename = "F_exact")]
    pub bound_exact: Option<f64>,
    pub vacuous: bool,
    pub unique_train_signatures: usize,
    pub unique_test_signatures: Option<usize>,
    pub agreement: Option<f64>,
    pub train_iterations: usize,
    pub train_epochs: usize,
    pub final_loss: f64,
    pub solver_sweeps: usize,
    pub weights_hash: String,
    pub gram_hash: String,
    pub wall_clock_secs: f64,
}

/// A record with the objects it was computed from.
pub struct RunArtifacts {
    pub record: RunRecord,
    pub network: Network,
    pub data: LabeledDataset,
    pub solution: MarginSolution,
}

/// Pipeline for repetition 0 of `cfg`.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let out = run_repetition(cfg, 0)?;
    if let Some(dir) = &cfg.output_dir {
        write_artifacts(&out, dir)?;
    }
    Ok(out.record)
}

/// train → zero-error gate → kernel → max margin → support vectors → bound.
///
/// Data for repetition `rep` is drawn with seeds derived from `cfg.seed`;
/// training uses `cfg.train.seed`.
pub fn run_repetition(cfg: &ExperimentConfig, rep: u64) -> Result<RunArtifacts> {
    let start = Instant::now();
    cfg.validate().map_err(|e| e.at_stage("config"))?;
    let (mut data, test) = cfg
        .dataset
        .load(derive_seed(cfg.seed, "data", rep), derive_seed(cfg.seed, "test", rep), cfg.test_m)
        .map_err(|e| e.at_stage("data"))?;
    if cfg.randomize_labels {
        data = randomize_labels(&data, derive_seed(cfg.seed, "labels", rep));
    }
    if data.dim() != Some(cfg.network.input_dim) {
        return Err(Error::InvalidConfig(format!(
            "dataset dimension {:?} does not match network input_dim {}",
            data.dim(),
            cfg.network.input_dim
        ))
        .at_stage("data"));
    }

    let report = train_sgd(&data, &cfg.network, &cfg.train).map_err(|e| e.at_stage("train"))?;
    if !report.zero_training_error {
        return Err(Error::ZeroTrainingErrorNotReached.at_stage("gate"));
    }
    let net = report.network;

    let gram = margin_gram(&net, &data).map_err(|e| e.at_stage("kernel"))?;
    let solution = solve_hard_margin(&gram, &data.labels(), &cfg.solver).map_err(|e| e.at_stage("solve"))?;
    let nsv = extract_nsvs(&solution, &data).map_err(|e| e.at_stage("nsv"))?;

    let m = data.len();
    let n = cfg.network.neuron_count();
    let s = nsv.s();
    let bound = if s < m {
        let b = BoundInputs::new(m, n, s, cfg.delta).map_err(|e| e.at_stage("bound"))?;
        Some(bound_report(&b, false).map_err(|e| e.at_stage("bound"))?)
    } else {
        None
    };

    let unique_train_signatures = count_unique_signatures(&net, &data)?;
    let unique_test_signatures = test.as_ref().map(|t| count_unique_signatures(&net, t)).transpose()?;
    let agreement = if cfg.compare {
        let mm = MarginClassifier::new(&net, &data, &solution)?;
        Some(
            dense_region_agreement(&net, &mm, &data, 100, 0.9)
                .map_err(|e| e.at_stage("agreement"))?
                .0,
        )
    } else {
        None
    };

    let record = RunRecord {
        config: cfg.clone(),
        achieved_zero_training_error: true,
        m,
        n,
        s,
        s_over_m: s as f64 / m as f64,
        margin_value: solution.margin_value,
        bound: bound.as_ref().map(|b| b.f),
        bound_exact: bound.as_ref().map(|b| b.f_exact),
        vacuous: bound.as_ref().is_none_or(|b| b.vacuous),
        unique_train_signatures,
        unique_test_signatures,
        agreement,
        train_iterations: report.iterations,
        train_epochs: report.epochs,
        final_loss: report.final_loss,
        solver_sweeps: solution.iterations,
        weights_hash: net.weights_hash(),
        gram_hash: solution.gram_hash.clone(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    Ok(RunArtifacts {
        record,
        network: net,
        data,
        solution,
    })
}

/// `record.json`, `weights.json` and `support.csv` under `dir`.
pub fn write_artifacts(out: &RunArtifacts, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("record.json"), serde_json::to_string_pretty(&out.record)?)?;
    out.network.save(&dir.join("weights.json"))?;
    let mut w = csv::Writer::from_path(dir.join("support.csv"))?;
    w.write_record(["index", "alpha", "label"])?;
    for &k in &out.solution.support_indices {
        w.write_record([
            k.to_string(),
            format!("{:?}", out.solution.alphas[k]),
            out.data.samples()[k].y.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
