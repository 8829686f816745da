//! Measurements on trained networks: activation-pattern counts, path
//! sign checks, decision grids and classifier agreement.

use std::collections::HashSet;
use std::io::Write;

use crate::maxmargin::MarginSolution;
use crate::network::{sign_label, Label, LabeledDataset, Network};
use crate::pathspace::{GramMatrix, SignatureCache};
use crate::{Error, Result};

/// Number of distinct activation patterns over a dataset. Two inputs
/// differ as soon as one neuron switches slope.
pub fn count_unique_signatures(net: &Network, data: &LabeledDataset) -> Result<usize> {
    let mut seen = HashSet::with_capacity(data.len());
    for x in data.inputs() {
        seen.insert(net.signature(x)?.pattern_key());
    }
    Ok(seen.len())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WbarCheck {
    pub all_positive: bool,
    pub min_coordinate: f64,
}

/// Evaluates every coordinate of `Λ(w)` (main paths only).
pub fn check_wbar_positive(net: &Network, budget: usize) -> Result<WbarCheck> {
    let lambda = net.path_products(budget)?;
    let main = &lambda.values()[..lambda.layout().block_len(0)];
    let min_coordinate = main.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(WbarCheck {
        all_positive: min_coordinate > 0.0,
        min_coordinate,
    })
}

/// Same verdict as [`check_wbar_positive`] without enumerating paths:
/// every path must avoid zero weights and cross an even number of
/// negative ones.
pub fn wbar_positive_by_parity(net: &Network) -> bool {
    const EVEN: u8 = 1;
    const ODD: u8 = 2;
    let flip = |p: u8| ((p & EVEN) << 1) | ((p & ODD) >> 1);
    let d = net.depth();
    if (0..=d).any(|l| net.matrix(l).iter().any(|&v| v == 0.0)) {
        return false;
    }
    let mut parity = vec![EVEN; net.config().input_dim];
    for l in 0..=d {
        let w = net.matrix(l);
        parity = (0..w.nrows())
            .map(|i| {
                (0..w.ncols())
                    .map(|j| if w[[i, j]] < 0.0 { flip(parity[j]) } else { parity[j] })
                    .fold(0, |a, b| a | b)
            })
            .collect();
    }
    parity == [EVEN]
}

/// Anything that labels points of a fixed input dimension.
pub trait Classifier {
    fn input_dim(&self) -> usize;
    fn classify(&self, x: &[f64]) -> Result<Label>;
}

impl Classifier for Network {
    fn input_dim(&self) -> usize {
        self.config().input_dim
    }

    fn classify(&self, x: &[f64]) -> Result<Label> {
        Network::classify(self, x)
    }
}

/// Squared output bias, the kernel of the constant path that carries it.
fn output_bias_sq(net: &Network) -> f64 {
    net.bias(net.depth() + 1).map_or(0.0, |b| b[0] * b[0])
}

/// Path-kernel Gram matrix, extended by the output-bias coordinate when
/// the network has biases, so the max-margin classifier lives in the same
/// space as `N(x) = ⟨Λ(w), φ(x)⟩ + b^{d+1}`.
pub fn margin_gram(net: &Network, data: &LabeledDataset) -> Result<GramMatrix> {
    let g = crate::pathspace::kernel_matrix(net, data)?;
    let c = output_bias_sq(net);
    if c == 0.0 {
        return Ok(g);
    }
    let m = g.size();
    let rows = (0..m).map(|i| g.row(i).iter().map(|v| v + c).collect()).collect();
    GramMatrix::from_rows(rows)
}

/// `x ↦ sign(Σ_k α_k y_k K(x, x_k))` over the support vectors.
pub struct MarginClassifier<'a> {
    cache: SignatureCache<'a>,
    coef: Vec<f64>,
    support: Vec<usize>,
    bias_sq: f64,
    dim: usize,
}

impl<'a> MarginClassifier<'a> {
    pub fn new(net: &'a Network, data: &LabeledDataset, sol: &MarginSolution) -> Result<Self> {
        if sol.alphas.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: sol.alphas.len(),
                actual: data.len(),
            });
        }
        let support: Vec<usize> = (0..data.len()).filter(|&k| sol.alphas[k] != 0.0).collect();
        let coef = support
            .iter()
            .map(|&k| sol.alphas[k] * data.samples()[k].y as f64)
            .collect();
        Ok(MarginClassifier {
            cache: SignatureCache::from_dataset(net, data)?,
            coef,
            support,
            bias_sq: output_bias_sq(net),
            dim: net.config().input_dim,
        })
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        let row = self.cache.row_for(x, &self.support)?;
        Ok(row.iter().zip(&self.coef).map(|(k, c)| c * (k + self.bias_sq)).sum())
    }
}

impl Classifier for MarginClassifier<'_> {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn classify(&self, x: &[f64]) -> Result<Label> {
        Ok(sign_label(self.decision_value(x)?))
    }
}

/// Axis-aligned box `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoundingBox {
    /// Smallest box around the inputs, grown by `margin` times its extent.
    pub fn around(data: &LabeledDataset, margin: f64) -> Result<Self> {
        if data.dim() != Some(2) {
            return Err(Error::InvalidInput("bounding boxes need 2D inputs".into()));
        }
        let mut b = BoundingBox {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for x in data.inputs() {
            b.x_min = b.x_min.min(x[0]);
            b.x_max = b.x_max.max(x[0]);
            b.y_min = b.y_min.min(x[1]);
            b.y_max = b.y_max.max(x[1]);
        }
        let (dx, dy) = ((b.x_max - b.x_min) * margin, (b.y_max - b.y_min) * margin);
        b.x_min -= dx;
        b.x_max += dx;
        b.y_min -= dy;
        b.y_max += dy;
        Ok(b)
    }

    /// Cell centers of a `resolution × resolution` grid, row-major with rows along `y`.
    pub fn cell_centers(&self, resolution: usize) -> Vec<[f64; 2]> {
        let r = resolution as f64;
        let (wx, wy) = ((self.x_max - self.x_min) / r, (self.y_max - self.y_min) / r);
        (0..resolution)
            .flat_map(|row| {
                (0..resolution).map(move |col| {
                    [
                        self.x_min + (col as f64 + 0.5) * wx,
                        self.y_min + (row as f64 + 0.5) * wy,
                    ]
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid {
    pub resolution: usize,
    pub bbox: BoundingBox,
    pub labels: Vec<Label>,
}

impl LabelGrid {
    /// CSV with columns `x,y,label`, one row per cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "label"])?;
        for (c, l) in self.bbox.cell_centers(self.resolution).iter().zip(&self.labels) {
            w.write_record([c[0].to_string(), c[1].to_string(), l.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn boundary_grid<C: Classifier + ?Sized>(clf: &C, bbox: BoundingBox, resolution: usize) -> Result<LabelGrid> {
    if clf.input_dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: clf.input_dim(),
        });
    }
    if resolution == 0 {
        return Err(Error::InvalidInput("grid resolution must be positive".into()));
    }
    let labels = bbox
        .cell_centers(resolution)
        .iter()
        .map(|c| clf.classify(c))
        .collect::<Result<Vec<_>>>()?;
    Ok(LabelGrid {
        resolution,
        bbox,
        labels,
    })
}

/// Gaussian kernel density estimate with Scott's bandwidth per axis.
pub struct Density {
    points: Vec<Vec<f64>>,
    bandwidth: Vec<f64>,
}

impl Density {
    pub fn fit(data: &LabeledDataset) -> Result<Self> {
        let dim = data.dim().ok_or_else(|| Error::InvalidInput("empty dataset".into()))?;
        let m = data.len() as f64;
        let factor = m.powf(-1.0 / (dim as f64 + 4.0));
        let bandwidth = (0..dim)
            .map(|j| {
                let mean = data.inputs().map(|x| x[j]).sum::<f64>() / m;
                let var = data.inputs().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
                (var.sqrt() * factor).max(1e-12)
            })
            .collect();
        Ok(Density {
            points: data.inputs().map(<[f64]>::to_vec).collect(),
            bandwidth,
        })
    }

    /// Unnormalized density at `x`.
    pub fn at(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|p| {
                let q: f64 = p
                    .iter()
                    .zip(x)
                    .zip(&self.bandwidth)
                    .map(|((a, b), h)| ((a - b) / h).powi(2))
                    .sum();
                (-0.5 * q).exp()
            })
            .sum()
    }

    /// Density level above which a `coverage` fraction of the training
    /// points lie.
    pub fn level(&self, coverage: f64) -> f64 {
        let mut d: Vec<f64> = self.points.iter().map(|p| self.at(p)).collect();
        d.sort_by(f64::total_cmp);
        let cut = ((1.0 - coverage) * d.len() as f64).floor() as usize;
        d[cut.min(d.len() - 1)]
    }
}

/// Agreement of two classifiers over the grid cells whose density is at
/// least the `coverage` level of the training data.
pub fn dense_region_agreement<A, B>(
    a: &A,
    b: &B,
    data: &LabeledDataset,
    resolution: usize,
    coverage: f64,
) -> Result<(f64, usize)>
where
    A: Classifier + ?Sized,
    B: Classifier + ?Sized,
{
    let bbox = BoundingBox::around(data, 0.1)?;
    let density = Density::fit(data)?;
    let level = density.level(coverage);
    let cells: Vec<[f64; 2]> = bbox
        .cell_centers(resolution)
        .into_iter()
        .filter(|c| density.at(c) >= level)
        .collect();
    let la = cells.iter().map(|c| a.classify(c)).collect::<Result<Vec<_>>>()?;
    let lb = cells.iter().map(|c| b.classify(c)).collect::<Result<Vec<_>>>()?;
    Ok((crate::maxmargin::agreement(&la, &lb)?, cells.len()))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidInput("need at least two points".into()));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return Err(Error::InvalidInput("constant sequence has no rank correlation".into()));
    }
    Ok(cov / (va * vb).sqrt())
}
