//! Path space: the embedding `φ(x, w)`, its factorized kernel and the
//! explicit (brute force) versions used as oracles.
//!
//! Paths are flattened lexicographically as `(i_d, …, i_1, i_0)` with
//! `i_d` varying slowest. With biases, the input-start block is followed by
//! one block per start layer `k = 1..=d`, holding the paths
//! `(i_d, …, i_k)` in the same order.

use std::io::Write;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::network::{ActivationSignature, LabeledDataset, Network};
use crate::{Error, Result};

/// Shape of a path-indexed vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathLayout {
    pub input_dim: usize,
    pub widths: Vec<usize>,
    pub with_biases: bool,
}

impl PathLayout {
    pub fn new(input_dim: usize, widths: Vec<usize>, with_biases: bool) -> Self {
        PathLayout {
            input_dim,
            widths,
            with_biases,
        }
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    fn width(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.widths[l - 1]
        }
    }

    /// Number of paths starting at layer `k` (`k = 0` is the input).
    /// Saturates at `usize::MAX` instead of overflowing.
    pub fn block_len(&self, k: usize) -> usize {
        (k..=self.depth())
            .map(|l| self.width(l))
            .try_fold(1usize, |acc, w| acc.checked_mul(w))
            .unwrap_or(usize::MAX)
    }

    /// Total number of coordinates.
    pub fn len(&self) -> usize {
        let mut total = self.block_len(0);
        if self.with_biases {
            for k in 1..=self.depth() {
                total = total.saturating_add(self.block_len(k));
            }
        }
        total
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_budget(&self, budget: usize) -> Result<()> {
        let required = self.len();
        if required > budget {
            return Err(Error::BudgetExceeded { required, budget });
        }
        Ok(())
    }

    /// Offset of the block of paths starting at layer `k`.
    pub fn block_offset(&self, k: usize) -> usize {
        (0..k).map(|j| self.block_len(j)).sum()
    }

    /// Flat index of the path `(i_d, …, i_k)` starting at layer `k`,
    /// with `indices` listed from the output side.
    pub fn block_index(&self, k: usize, indices: &[usize]) -> usize {
        debug_assert_eq!(indices.len(), self.depth() + 1 - k);
        let d = self.depth();
        let mut idx = 0;
        for (pos, &i) in indices.iter().enumerate() {
            let l = d - pos;
            debug_assert!(i < self.width(l));
            idx = idx * self.width(l) + i;
        }
        self.block_offset(k) + idx
    }

    /// Flat index of the full path `(i_d, …, i_1, i_0)`.
    pub fn index(&self, indices: &[usize]) -> usize {
        self.block_index(0, indices)
    }

    /// Inverse of [`PathLayout::index`] for the input-start block.
    pub fn path_of(&self, mut flat: usize) -> Vec<usize> {
        let d = self.depth();
        let mut out = vec![0; d + 1];
        for l in 0..=d {
            let w = self.width(l);
            out[d - l] = flat % w;
            flat /= w;
        }
        out
    }
}

/// Dense vector over path coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PathVector {
    layout: PathLayout,
    values: Vec<f64>,
}

impl PathVector {
    pub fn new(layout: PathLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("path vector has non-finite entries".into()));
        }
        Ok(PathVector { layout, values })
    }

    pub fn zeros(layout: PathLayout) -> Self {
        let values = vec![0.0; layout.len()];
        PathVector { layout, values }
    }

    pub fn layout(&self) -> &PathLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, indices: &[usize]) -> f64 {
        self.values[self.layout.index(indices)]
    }

    fn check_layout(&self, other: &PathVector) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::InvalidInput("path vectors have different layouts".into()));
        }
        Ok(())
    }

    pub fn dot(&self, other: &PathVector) -> Result<f64> {
        self.check_layout(other)?;
        Ok(crate::network::dot(&self.values, &other.values))
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Cosine similarity; 0 when either vector is zero.
    pub fn cosine(&self, other: &PathVector) -> Result<f64> {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            return Ok(0.0);
        }
        Ok(self.dot(other)? / denom)
    }

    pub fn scaled(&self, c: f64) -> PathVector {
        PathVector {
            layout: self.layout.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: f64, other: &PathVector) -> Result<()> {
        self.check_layout(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Serialize, Deserialize)]
struct PathVectorDocument {
    layout: PathLayout,
    values: Vec<f64>,
}

impl PathVector {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PathVectorDocument {
            layout: self.layout.clone(),
            values: self.values.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<PathVector> {
        let doc: PathVectorDocument = serde_json::from_str(s)?;
        PathVector::new(doc.layout, doc.values)
    }
}

/// Concatenates stage vectors into a path vector. `stages[k]` holds the
/// block of paths starting at layer `k`; blocks `k ≥ 1` are dropped when
/// the layout has no biases.
pub(crate) fn assemble(layout: PathLayout, mut stages: Vec<Vec<f64>>) -> PathVector {
    let d = layout.depth();
    let mut values = std::mem::take(&mut stages[0]);
    if layout.with_biases {
        values.reserve(layout.len() - values.len());
        for stage in stages.iter().take(d + 1).skip(1) {
            values.extend_from_slice(stage);
        }
    }
    debug_assert_eq!(values.len(), layout.len());
    PathVector { layout, values }
}

/// Explicit embedding from a signature: `σ^d_{i_d} ⋯ σ^1_{i_1} x_{i_0}`,
/// plus `σ^d_{i_d} ⋯ σ^k_{i_k} b^k_{i_k}` bias blocks.
pub fn embed_signature(
    layout: &PathLayout,
    x: &[f64],
    sig: &ActivationSignature,
    biases: Option<&[Array1<f64>]>,
) -> Result<PathVector> {
    let d = layout.depth();
    if x.len() != layout.input_dim {
        return Err(Error::DimensionMismatch {
            expected: layout.input_dim,
            actual: x.len(),
        });
    }
    check_signature(layout, sig)?;
    if layout.with_biases != biases.is_some() {
        return Err(Error::InvalidInput("bias presence does not match the layout".into()));
    }
    let mut stages: Vec<Vec<f64>> = vec![Vec::new(); d + 1];
    let mut current = sig.per_layer[d - 1].clone();
    for l in (1..d).rev() {
        let slopes = &sig.per_layer[l - 1];
        let mut next = Vec::with_capacity(current.len() * slopes.len());
        for &v in &current {
            next.extend(slopes.iter().map(|s| v * s));
        }
        stages[l + 1] = std::mem::replace(&mut current, next);
    }
    let mut main = Vec::with_capacity(current.len() * x.len());
    for &v in &current {
        main.extend(x.iter().map(|xi| v * xi));
    }
    stages[1] = current;
    stages[0] = main;
    if let Some(b) = biases {
        for (k, stage) in stages.iter_mut().enumerate().skip(1) {
            let bk = &b[k - 1];
            let w = bk.len();
            for (p, v) in stage.iter_mut().enumerate() {
                *v *= bk[p % w];
            }
        }
    }
    Ok(assemble(layout.clone(), stages))
}

fn check_signature(layout: &PathLayout, sig: &ActivationSignature) -> Result<()> {
    if sig.depth() != layout.depth() {
        return Err(Error::DimensionMismatch {
            expected: layout.depth(),
            actual: sig.depth(),
        });
    }
    for (l, s) in sig.per_layer.iter().enumerate() {
        if s.len() != layout.widths[l] {
            return Err(Error::DimensionMismatch {
                expected: layout.widths[l],
                actual: s.len(),
            });
        }
    }
    Ok(())
}

/// `φ(x, w)` materialized over all paths.
pub fn embed(net: &Network, x: &[f64], budget: usize) -> Result<PathVector> {
    let layout = net.config().path_layout();
    layout.check_budget(budget)?;
    let (_, sig) = net.forward(x)?;
    embed_signature(&layout, x, &sig, net.weights().biases.as_deref())
}

/// Factorized path kernel `⟨φ(x), φ(x')⟩`.
///
/// Equals `⟨x, x'⟩ ∏_l ⟨σ^l, σ'^l⟩`, plus for each start layer `k`
/// the term `Σ_i σ^k_i σ'^k_i (b^k_i)² ∏_{l>k} ⟨σ^l, σ'^l⟩` when biases are
/// given (`biases[k - 1] = b^k`; a trailing output bias is ignored).
pub fn kernel(
    x: &[f64],
    x2: &[f64],
    sig: &ActivationSignature,
    sig2: &ActivationSignature,
    biases: Option<&[Array1<f64>]>,
) -> Result<f64> {
    if x.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: x2.len(),
        });
    }
    let d = sig.depth();
    if sig2.depth() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: sig2.depth(),
        });
    }
    if let Some(b) = biases {
        if b.len() < d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: b.len(),
            });
        }
    }
    // suffix[l] = ∏_{l' ≥ l} ⟨σ^{l'}, σ'^{l'}⟩ over hidden layers, 0-based.
    let mut suffix = vec![1.0; d + 1];
    for l in (0..d).rev() {
        let (a, b) = (&sig.per_layer[l], &sig2.per_layer[l]);
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                actual: b.len(),
            });
        }
        suffix[l] = suffix[l + 1] * crate::network::dot(a, b);
    }
    let mut value = crate::network::dot(x, x2) * suffix[0];
    if let Some(b) = biases {
        for l in 0..d {
            let bk = &b[l];
            if bk.len() != sig.per_layer[l].len() {
                return Err(Error::DimensionMismatch {
                    expected: sig.per_layer[l].len(),
                    actual: bk.len(),
                });
            }
            let seeded: f64 = sig.per_layer[l]
                .iter()
                .zip(&sig2.per_layer[l])
                .zip(bk.iter())
                .map(|((s, t), bi)| s * t * bi * bi)
                .sum();
            value += seeded * suffix[l + 1];
        }
    }
    Ok(value)
}

/// Brute-force kernel: inner product of explicit embeddings.
pub fn kernel_bruteforce(x: &[f64], x2: &[f64], net: &Network, budget: usize) -> Result<f64> {
    embed(net, x, budget)?.dot(&embed(net, x2, budget)?)
}

/// Symmetric `m × m` kernel matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    m: usize,
    entries: Vec<f64>,
}

impl GramMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidInput("gram matrix must be square".into()));
        }
        let entries: Vec<f64> = rows.concat();
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("gram matrix has non-finite entries".into()));
        }
        Ok(GramMatrix { m, entries })
    }

    /// Linear kernel `⟨x_i, x_j⟩`.
    pub fn linear(xs: &[Vec<f64>]) -> Self {
        let m = xs.len();
        let mut entries = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let v = crate::network::dot(&xs[i], &xs[j]);
                entries[i * m + j] = v;
                entries[j * m + i] = v;
            }
        }
        GramMatrix { m, entries }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.m..(i + 1) * self.m]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.m).map(|i| self.get(i, i)).sum()
    }

    pub fn scaled(&self, c: f64) -> GramMatrix {
        GramMatrix {
            m: self.m,
            entries: self.entries.iter().map(|v| v * c).collect(),
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.m {
            for j in i + 1..self.m {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// SHA-256 over the little-endian bytes of every entry.
    pub fn hash(&self) -> String {
        let mut bytes = Vec::with_capacity(8 * (self.entries.len() + 1));
        bytes.extend_from_slice(&(self.m as u64).to_le_bytes());
        for v in &self.entries {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        crate::sha256_hex(&bytes)
    }

    /// Headerless CSV, one row per sample, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for i in 0..self.m {
            let line: Vec<String> = self.row(i).iter().map(|v| format_f64(*v)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidInput(format!("bad gram entry `{s}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }
}

/// Scientific notation with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// JSON sidecar written next to an exported Gram matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramSidecar {
    pub m: usize,
    /// Hidden neuron count of the network that produced the embedding.
    pub n: usize,
    pub weights_hash: String,
    pub seed: Option<u64>,
}

/// Inputs with their cached activation signatures under one network.
pub struct SignatureCache<'a> {
    net: &'a Network,
    inputs: Vec<Vec<f64>>,
    signatures: Vec<ActivationSignature>,
}

impl<'a> SignatureCache<'a> {
    pub fn new<'x, I>(net: &'a Network, inputs: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'x [f64]>,
    {
        let inputs: Vec<Vec<f64>> = inputs.into_iter().map(<[f64]>::to_vec).collect();
        let signatures = inputs
            .iter()
            .map(|x| net.signature(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(SignatureCache {
            net,
            inputs,
            signatures,
        })
    }

    pub fn from_dataset(net: &'a Network, data: &LabeledDataset) -> Result<Self> {
        Self::new(net, data.inputs())
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn signatures(&self) -> &[ActivationSignature] {
        &self.signatures
    }

    fn biases(&self) -> Option<&[Array1<f64>]> {
        self.net.weights().biases.as_deref()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        kernel(
            &self.inputs[i],
            &self.inputs[j],
            &self.signatures[i],
            &self.signatures[j],
            self.biases(),
        )
        .expect("signatures share the network's shape")
    }

    /// Gram matrix over the cached inputs. Rows are computed in parallel;
    /// each entry is computed once and mirrored.
    pub fn gram(&self) -> GramMatrix {
        let m = self.len();
        let upper: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|i| (i..m).map(|j| self.entry(i, j)).collect())
            .collect();
        let mut entries = vec![0.0; m * m];
        for (i, row) in upper.iter().enumerate() {
            for (off, &v) in row.iter().enumerate() {
                let j = i + off;
                entries[i * m + j] = v;
                entries[j * m + i] = v;
            }
        }
        GramMatrix { m, entries }
    }

    /// Kernel values between a new input and the cached inputs at `indices`.
    pub fn row_for(&self, x: &[f64], indices: &[usize]) -> Result<Vec<f64>> {
        let sig = self.net.signature(x)?;
        indices
            .iter()
            .map(|&k| kernel(x, &self.inputs[k], &sig, &self.signatures[k], self.biases()))
            .collect()
    }

    /// Kernel values between a new input and every cached input.
    pub fn row(&self, x: &[f64]) -> Result<Vec<f64>> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.row_for(x, &all)
    }
}

/// Gram matrix of the path kernel over a dataset: one forward pass per
/// sample, then the factorized kernel per pair.
pub fn kernel_matrix(net: &Network, data: &LabeledDataset) -> Result<GramMatrix> {
    Ok(SignatureCache::from_dataset(net, data)?.gram())
}

/// Gram matrix by explicit embeddings (oracle).
pub fn kernel_matrix_bruteforce(net: &Network, data: &LabeledDataset, budget: usize) -> Result<GramMatrix> {
    let phis = data
        .inputs()
        .map(|x| embed(net, x, budget))
        .collect::<Result<Vec<_>>>()?;
    let rows = phis
        .iter()
        .map(|a| phis.iter().map(|b| a.dot(b)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    GramMatrix::from_rows(rows)
}

/// True iff perturbing any single parameter by `+ε` or `-ε` leaves the
/// activation signature of every sample unchanged.
pub fn signature_stability(net: &Network, data: &LabeledDataset, eps: f64) -> Result<bool> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::OutOfRange(format!("epsilon must be finite and >= 0, got {eps}")));
    }
    if eps == 0.0 {
        return Ok(true);
    }
    let base: Vec<Vec<u64>> = data
        .inputs()
        .map(|x| net.signature(x).map(|s| s.pattern_key()))
        .collect::<Result<_>>()?;
    let params = net.params();
    let mut probe = net.clone();
    for p in 0..params.len() {
        for delta in [eps, -eps] {
            let mut shifted = params.clone();
            shifted[p] += delta;
            probe.set_params(&shifted)?;
            for (x, key) in data.inputs().zip(&base) {
                if probe.signature(x)?.pattern_key() != *key {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Bisects for the largest `ε ≤ upper` at which [`signature_stability`]
/// still holds. Returns `upper` when already stable there.
pub fn stability_threshold(net: &Network, data: &LabeledDataset, upper: f64, steps: usize) -> Result<f64> {
    if signature_stability(net, data, upper)? {
        return Ok(upper);
    }
    let (mut lo, mut hi) = (0.0, upper);
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if signature_stability(net, data, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{NetworkConfig, DEFAULT_PATH_BUDGET};

    #[test]
    fn layout_lengths_and_indices() {
        let l = PathLayout::new(3, vec![2, 4], true);
        assert_eq!(l.block_len(0), 24);
        assert_eq!(l.block_len(1), 8);
        assert_eq!(l.block_len(2), 4);
        assert_eq!(l.len(), 36);
        assert_eq!(l.index(&[0, 0, 0]), 0);
        assert_eq!(l.index(&[0, 0, 1]), 1);
        assert_eq!(l.index(&[0, 1, 0]), 3);
        assert_eq!(l.index(&[1, 0, 0]), 6);
        assert_eq!(l.index(&[3, 1, 2]), 23);
        assert_eq!(l.block_index(1, &[0, 0]), 24);
        assert_eq!(l.block_index(2, &[3]), 35);
        for flat in 0..24 {
            assert_eq!(l.index(&l.path_of(flat)), flat);
        }
        assert_eq!(PathLayout::new(3, vec![2, 4], false).len(), 24);
    }

    #[test]
    fn embed_examples() {
        let relu = NetworkConfig::relu(1, vec![1]);
        let active = Network::from_rows(relu.clone(), &[vec![vec![1.0]], vec![vec![1.0]]]).unwrap();
        assert_eq!(embed(&active, &[3.0], DEFAULT_PATH_BUDGET).unwrap().values(), &[3.0]);
        let inactive = Network::from_rows(relu, &[vec![vec![-1.0]], vec![vec![1.0]]]).unwrap();
        assert_eq!(embed(&inactive, &[3.0], DEFAULT_PATH_BUDGET).unwrap().values(), &[0.0]);

        let leaky = NetworkConfig::new(2, vec![2]);
        let net = Network::from_rows(leaky, &[vec![vec![1.0, 1.0], vec![-1.0, -1.0]], vec![vec![1.0, 1.0]]]).unwrap();
        let phi = embed(&net, &[1.0, 2.0], DEFAULT_PATH_BUDGET).unwrap();
        let expected = [1.0, 2.0, 0.1, 0.2];
        for (a, b) in phi.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_examples() {
        let sig_all = ActivationSignature {
            per_layer: vec![vec![1.0; 3], vec![1.0; 3]],
            active: vec![vec![true; 3], vec![true; 3]],
        };
        let k = kernel(&[1.0, 2.0], &[2.0, 1.0], &sig_all, &sig_all, None).unwrap();
        assert_eq!(k, 36.0);

        let a = ActivationSignature {
            per_layer: vec![vec![1.0, 0.0]],
            active: vec![vec![true, false]],
        };
        let b = ActivationSignature {
            per_layer: vec![vec![0.0, 1.0]],
            active: vec![vec![false, true]],
        };
        assert_eq!(kernel(&[1.0], &[1.0], &a, &b, None).unwrap(), 0.0);

        let leaky = ActivationSignature {
            per_layer: vec![vec![1.0, 0.1]],
            active: vec![vec![true, false]],
        };
        let k = kernel(&[1.0, 0.0], &[1.0, 0.0], &leaky, &leaky, None).unwrap();
        assert!((k - 1.01).abs() < 1e-15);
    }

    #[test]
    fn kernel_rejects_mismatch() {
        let a = ActivationSignature {
            per_layer: vec![vec![1.0]],
            active: vec![vec![true]],
        };
        let b = ActivationSignature {
            per_layer: vec![vec![1.0], vec![1.0]],
            active: vec![vec![true], vec![true]],
        };
        assert!(kernel(&[1.0], &[1.0], &a, &b, None).is_err());
        assert!(kernel(&[1.0], &[1.0, 2.0], &a, &a, None).is_err());
    }

    #[test]
    fn gram_single_and_duplicate() {
        let cfg = NetworkConfig::new(2, vec![2]);
        let net = Network::from_rows(cfg, &[vec![vec![1.0, 0.5], vec![-1.0, 2.0]], vec![vec![1.0, -1.0]]]).unwrap();
        let x = vec![0.3, -0.7];
        let one = LabeledDataset::from_parts(vec![x.clone()], vec![1]).unwrap();
        let g = kernel_matrix(&net, &one).unwrap();
        let sig = net.signature(&x).unwrap();
        let expected = (0.09 + 0.49) * sig.per_layer[0].iter().map(|s| s * s).sum::<f64>();
        assert!((g.get(0, 0) - expected).abs() < 1e-15);

        let dup = LabeledDataset::from_parts(vec![x.clone(), vec![1.0, 1.0], x], vec![1, -1, 1]).unwrap();
        let g = kernel_matrix(&net, &dup).unwrap();
        assert_eq!(g.row(0), g.row(2));
        assert_eq!(g.max_asymmetry(), 0.0);
    }

    #[test]
    fn gram_csv_round_trip() {
        let g = GramMatrix::from_rows(vec![vec![1.0 / 3.0, 0.1], vec![0.1, 2.0]]).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("3.3333333333333331e-1,"));
        let back = GramMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn stability_zero_epsilon_is_true() {
        let cfg = NetworkConfig::new(1, vec![1]);
        let net = Network::from_rows(cfg, &[vec![vec![1.0]], vec![vec![1.0]]]).unwrap();
        let data = LabeledDataset::from_parts(vec![vec![0.0]], vec![1]).unwrap();
        assert!(signature_stability(&net, &data, 0.0).unwrap());
        assert!(signature_stability(&net, &data, -1.0).is_err());
    }

    #[test]
    fn stability_detects_near_zero_preactivation() {
        // Pre-activation at x = 1 is 1e-3; any perturbation of W^0 larger
        // than that flips the neuron.
        let cfg = NetworkConfig::new(1, vec![1]);
        let net = Network::from_rows(cfg, &[vec![vec![1e-3]], vec![vec![1.0]]]).unwrap();
        let data = LabeledDataset::from_parts(vec![vec![1.0]], vec![1]).unwrap();
        assert!(!signature_stability(&net, &data, 2e-3).unwrap());
        assert!(signature_stability(&net, &data, 5e-4).unwrap());
        let t = stability_threshold(&net, &data, 1.0, 60).unwrap();
        assert!((t - 1e-3).abs() < 1e-12, "threshold {t}");
    }
}
