//! `pathnet` command line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use pathnet::compression::{bound_report, BoundInputs};
use pathnet::harness::{
    self, boundary_grid, check_wbar_positive, count_unique_signatures, dense_region_agreement, margin_gram,
    wbar_positive_by_parity, BoundingBox, ExperimentConfig, GeneratorParams, MarginClassifier,
};
use pathnet::maxmargin::{extract_nsvs, solve_hard_margin, SolverOptions};
use pathnet::network::{LabeledDataset, Network, DEFAULT_PATH_BUDGET};
use pathnet::pathspace::GramSidecar;
use pathnet::skeleton::{normalize_to_skeleton, prune_dead_neurons, recover_weights_with, PruneOutcome, RecoverOptions};
use pathnet::{Error, Result};

#[derive(Parser)]
#[command(name = "pathnet", version, about = "Path-space analysis of Leaky-ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Dotted-key overrides such as `--train.learning_rate 0.005`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Args)]
struct NetData {
    /// Network weights (JSON).
    #[arg(long)]
    weights: PathBuf,
    /// Dataset CSV: features then a ±1 label, no header.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset and write it as CSV.
    Generate {
        #[arg(long)]
        name: String,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        spread: Option<f64>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a network and save its weights.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Path-kernel Gram matrix as CSV plus a JSON sidecar.
    Kernel {
        #[command(flatten)]
        io: NetData,
        #[arg(long)]
        out: PathBuf,
    },
    /// Network support vectors: the full pipeline from a config, or a
    /// saved network on a dataset.
    Nsv {
        #[arg(long, conflicts_with_all = ["weights", "data"])]
        config: Option<PathBuf>,
        #[arg(long, requires = "data")]
        weights: Option<PathBuf>,
        #[arg(long, requires = "weights")]
        data: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Evaluate the compression bound.
    Bound {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Also report the variant with ln C(m, s) and ln 2 factors kept.
        #[arg(long)]
        tight: bool,
    },
    /// Skeleton operations.
    Skeleton {
        #[command(subcommand)]
        op: SkeletonOp,
    },
    /// Repeated runs over m, width or depth.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Count distinct activation patterns.
    Signatures {
        #[command(flatten)]
        io: NetData,
    },
    /// Check that every path product is positive.
    WbarCheck {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PATH_BUDGET)]
        budget: usize,
    },
    /// Label grid of a 2D classifier.
    Boundary {
        #[command(flatten)]
        io: NetData,
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        /// Grid the max-margin classifier instead of the network.
        #[arg(long)]
        margin: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Network vs max-margin agreement on the dense part of a 2D grid.
    Agree {
        #[command(flatten)]
        io: NetData,
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        #[arg(long, default_value_t = 0.9)]
        coverage: f64,
    },
}

#[derive(Subcommand)]
enum SkeletonOp {
    /// Prune, normalize, and rebuild the weights from path products.
    Recover {
        #[arg(long)]
        weights: PathBuf,
        /// Flip the skeleton sign of neuron `l:i` before recovery.
        #[arg(long)]
        flip: Option<String>,
        #[arg(long, default_value_t = DEFAULT_PATH_BUDGET)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Sets `root[a][b]… = value` for the key `a.b…`, creating objects on the way.
fn set_dotted(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !cur.is_object() {
            if cur.is_null() {
                *cur = json!({});
            } else {
                return Err(Error::InvalidConfig(format!("`{key}`: `{part}` is not inside an object")));
            }
        }
        let obj = cur.as_object_mut().expect("object");
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("split yields at least one part")
}

fn apply_overrides(root: &mut Value, args: &[String]) -> Result<()> {
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let body = flag
            .strip_prefix("--")
            .ok_or_else(|| Error::InvalidConfig(format!("unexpected argument `{flag}`")))?;
        let (key, raw) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::InvalidConfig(format!("`{flag}` needs a value")))?;
                (body.to_string(), v.clone())
            }
        };
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        set_dotted(root, &key, value)?;
    }
    Ok(())
}

fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    apply_overrides(&mut v, overrides)?;
    let cfg: ExperimentConfig = serde_json::from_value(v)?;
    cfg.validate()?;
    Ok(cfg)
}

fn load_pair(io: &NetData) -> Result<(Network, LabeledDataset)> {
    let net = Network::load(&io.weights)?;
    let data = harness::load_csv_dataset(&io.data)?;
    Ok((net, data))
}

fn print(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            name,
            m,
            seed,
            spread,
            dim,
            out,
        } => {
            let params = GeneratorParams {
                spread,
                dim,
                ..Default::default()
            };
            let data = harness::generate_dataset(&name, m, &params, seed)?;
            harness::write_csv_dataset(&data, fs::File::create(out)?)
        }
        Command::Train { cfg, out } => {
            let cfg = load_config(&cfg.config, &cfg.overrides)?;
            let (data, _) = cfg
                .dataset
                .load(harness::derive_seed(cfg.seed, "data", 0), 0, None)?;
            let data = if cfg.randomize_labels {
                harness::randomize_labels(&data, harness::derive_seed(cfg.seed, "labels", 0))
            } else {
                data
            };
            let report = pathnet::network::train_sgd(&data, &cfg.network, &cfg.train)?;
            report.network.save(&out)?;
            print(&json!({
                "iterations": report.iterations,
                "epochs": report.epochs,
                "zero_training_error": report.zero_training_error,
                "final_loss": report.final_loss,
                "weights_hash": report.network.weights_hash(),
            }))
        }
        Command::Kernel { io, out } => {
            let (net, data) = load_pair(&io)?;
            let gram = margin_gram(&net, &data)?;
            gram.write_csv(fs::File::create(&out)?)?;
            let sidecar = GramSidecar {
                m: data.len(),
                n: net.config().neuron_count(),
                weights_hash: net.weights_hash(),
                seed: None,
            };
            fs::write(out.with_extension("json"), serde_json::to_string_pretty(&sidecar)?)?;
            Ok(())
        }
        Command::Nsv {
            config,
            weights,
            data,
            overrides,
        } => match (config, weights, data) {
            (Some(path), _, _) => print(&harness::run_pipeline(&load_config(&path, &overrides)?)?),
            (None, Some(weights), Some(data)) => {
                let (net, data) = load_pair(&NetData { weights, data })?;
                if !net.zero_training_error(&data)? {
                    return Err(Error::ZeroTrainingErrorNotReached.at_stage("gate"));
                }
                let gram = margin_gram(&net, &data)?;
                let sol = solve_hard_margin(&gram, &data.labels(), &SolverOptions::default())?;
                let nsv = extract_nsvs(&sol, &data)?;
                print(&json!({
                    "m": data.len(),
                    "s": nsv.s(),
                    "support_indices": sol.support_indices,
                    "alphas": sol.alphas,
                    "margin_value": sol.margin_value,
                    "iterations": sol.iterations,
                    "tol": sol.tol,
                    "gram_hash": sol.gram_hash,
                }))
            }
            _ => Err(Error::InvalidConfig("give --config, or --weights with --data".into())),
        },
        Command::Bound { m, n, s, delta, tight } => print(&bound_report(&BoundInputs::new(m, n, s, delta)?, tight)?),
        Command::Skeleton {
            op:
                SkeletonOp::Recover {
                    weights,
                    flip,
                    budget,
                    out,
                },
        } => {
            let net = Network::load(&weights)?;
            let pruned = match prune_dead_neurons(&net)? {
                PruneOutcome::ZeroFunction { emptied_layer } => {
                    return print(&json!({ "zero_function": true, "emptied_layer": emptied_layer }));
                }
                PruneOutcome::Pruned { network, .. } => network,
            };
            let (norm, mut skel) = normalize_to_skeleton(&pruned)?;
            if let Some(spec) = flip {
                let (l, i) = spec
                    .split_once(':')
                    .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
                    .ok_or_else(|| Error::InvalidConfig(format!("--flip expects l:i, got `{spec}`")))?;
                if l == 0 || l > norm.depth() || i >= norm.config().layer_width(l) {
                    return Err(Error::OutOfRange(format!("no neuron {i} in layer {l}")));
                }
                skel = skel.flipped(l, i);
            }
            let lambda = norm.path_products(budget)?;
            let opts = RecoverOptions {
                budget,
                ..RecoverOptions::default()
            };
            let w = recover_weights_with(&lambda, &skel, norm.config(), &opts)?;
            let recovered = Network::new(norm.config().clone(), w)?;
            let max_dev = recovered
                .params()
                .iter()
                .zip(norm.params())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if let Some(out) = out {
                recovered.save(&out)?;
            }
            print(&json!({
                "zero_function": false,
                "skeleton": skel.to_document(),
                "hidden_widths": norm.config().hidden_widths,
                "max_abs_deviation_from_normalized": max_dev,
            }))
        }
        Command::Sweep { cfg, out } => {
            let cfg = load_config(&cfg.config, &cfg.overrides)?;
            let rows = harness::run_sweep(&cfg)?;
            fs::create_dir_all(&out)?;
            harness::write_sweep_csv(&rows, fs::File::create(out.join("sweep.csv"))?)?;
            let summary = harness::summarize(&rows);
            fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
            print(&summary)
        }
        Command::Signatures { io } => {
            let (net, data) = load_pair(&io)?;
            print(&json!({ "m": data.len(), "unique": count_unique_signatures(&net, &data)? }))
        }
        Command::WbarCheck { weights, budget } => {
            let net = Network::load(&weights)?;
            let c = check_wbar_positive(&net, budget)?;
            print(&json!({
                "all_positive": c.all_positive,
                "min_coordinate": c.min_coordinate,
                "parity_all_positive": wbar_positive_by_parity(&net),
            }))
        }
        Command::Boundary {
            io,
            resolution,
            margin,
            out,
        } => {
            let (net, data) = load_pair(&io)?;
            let bbox = BoundingBox::around(&data, 0.1)?;
            let grid = if margin {
                let sol = solve_hard_margin(&margin_gram(&net, &data)?, &data.labels(), &SolverOptions::default())?;
                boundary_grid(&MarginClassifier::new(&net, &data, &sol)?, bbox, resolution)?
            } else {
                boundary_grid(&net, bbox, resolution)?
            };
            grid.write_csv(fs::File::create(out)?)
        }
        Command::Agree {
            io,
            resolution,
            coverage,
        } => {
            let (net, data) = load_pair(&io)?;
            if !net.zero_training_error(&data)? {
                return Err(Error::ZeroTrainingErrorNotReached.at_stage("gate"));
            }
            let sol = solve_hard_margin(&margin_gram(&net, &data)?, &data.labels(), &SolverOptions::default())?;
            let mm = MarginClassifier::new(&net, &data, &sol)?;
            let (agreement, cells) = dense_region_agreement(&net, &mm, &data, resolution, coverage)?;
            print(&json!({ "agreement": agreement, "cells": cells, "s": sol.support_count() }))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
