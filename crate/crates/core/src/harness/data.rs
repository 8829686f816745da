//! Synthetic generators and text-format dataset I/O.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::network::{Label, LabeledDataset};
use crate::{Error, Result};

pub const GENERATORS: &[&str] = &["quadrants", "blobs2d", "rings2d", "xor2d", "blobs"];

/// Knobs shared by the generators. Unset values take per-generator defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    /// Standard deviation of the Gaussian noise.
    pub spread: Option<f64>,
    /// Input dimension (`blobs` and `quadrants` only).
    pub dim: Option<usize>,
    /// Distance between class centers (`blobs`).
    pub separation: Option<f64>,
    /// Clusters per class (`blobs`).
    pub clusters: Option<usize>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Balanced labels: even indices positive.
fn label_of(k: usize) -> Label {
    if k % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Draws `m` samples from the named generator. Equal seeds give equal data.
pub fn generate_dataset(name: &str, m: usize, params: &GeneratorParams, seed: u64) -> Result<LabeledDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = |default: f64| -> Result<f64> {
        let s = params.spread.unwrap_or(default);
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidConfig(format!("spread {s} must be finite and nonnegative")));
        }
        Ok(s)
    };
    let mut xs = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    match name {
        "quadrants" => {
            // Positives in the positive orthant, negatives mirrored through the origin.
            let sd = spread(0.4)?;
            let dim = params.dim.unwrap_or(2);
            for k in 0..m {
                let y = label_of(k);
                let x = (0..dim)
                    .map(|_| y as f64 * (1.0 + sd * normal(&mut rng)).abs())
                    .collect();
                xs.push(x);
                ys.push(y);
            }
        }
        "blobs2d" => {
            let sd = spread(0.3)?;
            let centers = [[1.0, 0.5], [-0.5, -1.0]];
            for k in 0..m {
                let y = label_of(k);
                let c = centers[k % 2];
                xs.push(vec![c[0] + sd * normal(&mut rng), c[1] + sd * normal(&mut rng)]);
                ys.push(y);
            }
        }
        "rings2d" => {
            // Inner disk-like ring positive, outer ring negative.
            let sd = spread(0.15)?;
            for k in 0..m {
                let y = label_of(k);
                let r = if y == 1 { 1.0 } else { 2.0 } + sd * normal(&mut rng);
                let t = rng.random_range(0.0..std::f64::consts::TAU);
                xs.push(vec![r * t.cos(), r * t.sin()]);
                ys.push(y);
            }
        }
        "xor2d" => {
            let sd = spread(0.3)?;
            for k in 0..m {
                let y = label_of(k);
                let a: f64 = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                // Same-sign quadrants are positive.
                let b = a * y as f64;
                xs.push(vec![a + sd * normal(&mut rng), b + sd * normal(&mut rng)]);
                ys.push(y);
            }
        }
        "blobs" => {
            // Gaussian clusters in `dim` dimensions with random centers per class.
            let sd = spread(1.0)?;
            let dim = params.dim.unwrap_or(10);
            let sep = params.separation.unwrap_or(3.0);
            let clusters = params.clusters.unwrap_or(2).max(1);
            let centers: Vec<Vec<f64>> = (0..2 * clusters)
                .map(|_| {
                    let v: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
                    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
                    v.iter().map(|a| 0.5 * sep * a / norm).collect()
                })
                .collect();
            for k in 0..m {
                let y = label_of(k);
                let c = &centers[2 * rng.random_range(0..clusters) + usize::from(y < 0)];
                xs.push(c.iter().map(|ci| ci + sd * normal(&mut rng)).collect());
                ys.push(y);
            }
        }
        other => return Err(Error::UnknownGenerator(other.to_string())),
    }
    LabeledDataset::from_parts(xs, ys)
}

/// Replaces every label by an independent fair coin flip.
pub fn randomize_labels(data: &LabeledDataset, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<Label> = (0..data.len())
        .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
        .collect();
    data.with_labels(&labels).expect("labels are valid and lengths match")
}

/// Headerless CSV, features then a `±1` label per row.
pub fn read_csv_dataset<R: Read>(input: R) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::InvalidInput(format!("row {row} needs features and a label")));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("row {row}: cannot parse `{s}`")))
        };
        let vals = record.iter().map(parse).collect::<Result<Vec<f64>>>()?;
        let (label, feats) = vals.split_last().expect("at least two fields");
        let y = match *label {
            l if l == 1.0 => 1,
            l if l == -1.0 => -1,
            l => return Err(Error::InvalidInput(format!("row {row}: label {l} is not -1 or +1"))),
        };
        xs.push(feats.to_vec());
        ys.push(y);
    }
    LabeledDataset::from_parts(xs, ys)
}

pub fn load_csv_dataset(path: &Path) -> Result<LabeledDataset> {
    read_csv_dataset(File::open(path)?)
}

pub fn write_csv_dataset<W: Write>(data: &LabeledDataset, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for s in data.samples() {
        let mut row: Vec<String> = s.x.iter().map(|v| format!("{v:?}")).collect();
        row.push(s.y.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrants_respect_orthants() {
        let d = generate_dataset("quadrants", 200, &GeneratorParams::default(), 7).unwrap();
        for s in d.samples() {
            assert!(s.x.iter().all(|&v| v * s.y as f64 > 0.0));
        }
    }

    #[test]
    fn generators_are_deterministic() {
        for name in GENERATORS {
            let a = generate_dataset(name, 50, &GeneratorParams::default(), 3).unwrap();
            let b = generate_dataset(name, 50, &GeneratorParams::default(), 3).unwrap();
            let c = generate_dataset(name, 50, &GeneratorParams::default(), 4).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
            assert_eq!(a.len(), 50);
        }
    }

    #[test]
    fn zero_spread_blobs_sit_on_centers() {
        let p = GeneratorParams {
            spread: Some(0.0),
            ..Default::default()
        };
        let d = generate_dataset("blobs2d", 10, &p, 1).unwrap();
        for s in d.samples() {
            let c = if s.y == 1 { [1.0, 0.5] } else { [-0.5, -1.0] };
            assert_eq!(s.x, c.to_vec());
        }
    }

    #[test]
    fn unknown_generator() {
        assert!(matches!(
            generate_dataset("spirals", 5, &GeneratorParams::default(), 0),
            Err(Error::UnknownGenerator(_))
        ));
    }

    #[test]
    fn random_labels_are_fair_and_reproducible() {
        let d = generate_dataset("blobs2d", 4000, &GeneratorParams::default(), 0).unwrap();
        let r = randomize_labels(&d, 9);
        assert_eq!(r, randomize_labels(&d, 9));
        let flipped = d.labels().iter().zip(r.labels()).filter(|(a, b)| **a != *b).count();
        let frac = flipped as f64 / 4000.0;
        assert!((frac - 0.5).abs() < 0.04, "{frac}");
        assert!(d.inputs().eq(r.inputs()));
    }

    #[test]
    fn csv_round_trip() {
        let d = generate_dataset("xor2d", 20, &GeneratorParams::default(), 2).unwrap();
        let mut buf = Vec::new();
        write_csv_dataset(&d, &mut buf).unwrap();
        assert_eq!(read_csv_dataset(buf.as_slice()).unwrap(), d);
        assert!(read_csv_dataset("1.0,2.0,0\n".as_bytes()).is_err());
        assert!(read_csv_dataset("1.0\n".as_bytes()).is_err());
    }
}
