//! Leaky-ReLU multilayer perceptrons without (or optionally with) biases.
//!
//! A network of depth `d` maps `x ∈ R^f` to the scalar logit
//! `W^d ρ(W^{d-1} ρ(… ρ(W^0 x)))`, where `ρ(z) = β z` for `z < 0` and
//! `γ z` otherwise. With biases enabled, `b^k` is added to the
//! pre-activation of hidden layer `k` and `b^{d+1}` to the output.

mod io;
mod train;

pub use io::{WeightsDocument, WEIGHTS_FORMAT_VERSION};
pub use train::{logistic_loss, train_sgd, LossGradient, TrainHyper, TrainReport};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::pathspace::{self, PathLayout, PathVector};
use crate::{Error, Result};

/// Default budget on explicitly materialized path coordinates.
pub const DEFAULT_PATH_BUDGET: usize = 10_000_000;

/// Class label, always `-1` or `+1`.
pub type Label = i8;

/// Sign with the `sign(0) = +1` convention.
#[inline]
pub fn sign_label(v: f64) -> Label {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    #[serde(default = "default_slope_neg")]
    pub slope_neg: f64,
    #[serde(default = "default_slope_pos")]
    pub slope_pos: f64,
    #[serde(default)]
    pub use_biases: bool,
}

fn default_slope_neg() -> f64 {
    0.1
}

fn default_slope_pos() -> f64 {
    1.0
}

impl NetworkConfig {
    /// Leaky-ReLU with β = 0.1, γ = 1, no biases.
    pub fn new(input_dim: usize, hidden_widths: Vec<usize>) -> Self {
        NetworkConfig {
            input_dim,
            hidden_widths,
            slope_neg: default_slope_neg(),
            slope_pos: default_slope_pos(),
            use_biases: false,
        }
    }

    /// Plain ReLU (β = 0, γ = 1).
    pub fn relu(input_dim: usize, hidden_widths: Vec<usize>) -> Self {
        NetworkConfig {
            slope_neg: 0.0,
            ..Self::new(input_dim, hidden_widths)
        }
    }

    pub fn with_slopes(mut self, slope_neg: f64, slope_pos: f64) -> Self {
        self.slope_neg = slope_neg;
        self.slope_pos = slope_pos;
        self
    }

    pub fn with_biases(mut self, use_biases: bool) -> Self {
        self.use_biases = use_biases;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be at least 1".into()));
        }
        if self.hidden_widths.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one hidden layer is required".into(),
            ));
        }
        if let Some(l) = self.hidden_widths.iter().position(|&w| w == 0) {
            return Err(Error::InvalidConfig(format!(
                "hidden layer {} has zero width",
                l + 1
            )));
        }
        if !self.slope_neg.is_finite() || !self.slope_pos.is_finite() {
            return Err(Error::InvalidConfig("slopes must be finite".into()));
        }
        if self.slope_neg == self.slope_pos {
            return Err(Error::InvalidConfig(
                "slope_neg and slope_pos must differ".into(),
            ));
        }
        Ok(())
    }

    /// Number of hidden layers `d`.
    pub fn depth(&self) -> usize {
        self.hidden_widths.len()
    }

    /// Total hidden neurons `n`.
    pub fn neuron_count(&self) -> usize {
        self.hidden_widths.iter().sum()
    }

    /// Width of layer `l`, with layer 0 being the input.
    pub fn layer_width(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.hidden_widths[l - 1]
        }
    }

    /// Slope applied to pre-activation `z`; `z = 0` takes `slope_pos`.
    #[inline]
    pub fn slope(&self, z: f64) -> f64 {
        if z >= 0.0 {
            self.slope_pos
        } else {
            self.slope_neg
        }
    }

    #[inline]
    pub fn rho(&self, z: f64) -> f64 {
        self.slope(z) * z
    }

    pub fn path_layout(&self) -> PathLayout {
        PathLayout::new(self.input_dim, self.hidden_widths.clone(), self.use_biases)
    }

    /// Shape `(rows, cols)` of `W^l` for `l = 0..=d`.
    pub fn matrix_shape(&self, l: usize) -> (usize, usize) {
        let d = self.depth();
        if l == d {
            (1, self.layer_width(d))
        } else {
            (self.layer_width(l + 1), self.layer_width(l))
        }
    }

    /// Length of `b^k` for `k = 1..=d+1`.
    pub fn bias_len(&self, k: usize) -> usize {
        if k == self.depth() + 1 {
            1
        } else {
            self.layer_width(k)
        }
    }
}

/// Weight matrices `W^0..W^d` and optional biases `b^1..b^{d+1}`.
///
/// `biases[k - 1]` holds `b^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    pub matrices: Vec<Array2<f64>>,
    pub biases: Option<Vec<Array1<f64>>>,
}

impl NetworkWeights {
    pub fn zeros(cfg: &NetworkConfig) -> Self {
        let d = cfg.depth();
        let matrices = (0..=d).map(|l| Array2::zeros(cfg.matrix_shape(l))).collect();
        let biases = cfg
            .use_biases
            .then(|| (1..=d + 1).map(|k| Array1::zeros(cfg.bias_len(k))).collect());
        NetworkWeights { matrices, biases }
    }

    /// Truncated normal initialization (mean 0, redrawn outside ±2 std).
    /// Biases start at zero.
    pub fn truncated_normal<R: Rng + ?Sized>(cfg: &NetworkConfig, std: f64, rng: &mut R) -> Self {
        let mut w = Self::zeros(cfg);
        if std > 0.0 {
            let normal = Normal::new(0.0, std).expect("finite positive std");
            for m in &mut w.matrices {
                for v in m.iter_mut() {
                    *v = loop {
                        let s: f64 = normal.sample(rng);
                        if s.abs() <= 2.0 * std {
                            break s;
                        }
                    };
                }
            }
        }
        w
    }

    pub fn validate(&self, cfg: &NetworkConfig) -> Result<()> {
        let d = cfg.depth();
        if self.matrices.len() != d + 1 {
            return Err(Error::InvalidConfig(format!(
                "expected {} weight matrices, got {}",
                d + 1,
                self.matrices.len()
            )));
        }
        for (l, m) in self.matrices.iter().enumerate() {
            let shape = cfg.matrix_shape(l);
            if m.dim() != shape {
                return Err(Error::InvalidConfig(format!(
                    "W^{l} has shape {:?}, expected {:?}",
                    m.dim(),
                    shape
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("W^{l} has non-finite entries")));
            }
        }
        match (&self.biases, cfg.use_biases) {
            (None, false) => {}
            (Some(b), true) => {
                if b.len() != d + 1 {
                    return Err(Error::InvalidConfig(format!(
                        "expected {} bias vectors, got {}",
                        d + 1,
                        b.len()
                    )));
                }
                for (i, v) in b.iter().enumerate() {
                    let k = i + 1;
                    if v.len() != cfg.bias_len(k) {
                        return Err(Error::InvalidConfig(format!(
                            "b^{k} has length {}, expected {}",
                            v.len(),
                            cfg.bias_len(k)
                        )));
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::InvalidConfig(format!("b^{k} has non-finite entries")));
                    }
                }
            }
            (Some(_), false) => {
                return Err(Error::InvalidConfig(
                    "biases supplied but use_biases is false".into(),
                ))
            }
            (None, true) => {
                return Err(Error::InvalidConfig(
                    "use_biases is true but no biases supplied".into(),
                ))
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.matrices.iter().map(|m| m.len()).sum::<usize>()
            + self
                .biases
                .as_ref()
                .map_or(0, |b| b.iter().map(|v| v.len()).sum())
    }

    /// All parameters flattened: matrices in order (row-major), then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for m in &self.matrices {
            out.extend(m.iter().copied());
        }
        if let Some(b) = &self.biases {
            for v in b {
                out.extend(v.iter().copied());
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        let bias_iter = self
            .biases
            .iter_mut()
            .flat_map(|b| b.iter_mut().flat_map(|v| v.iter_mut()));
        self.matrices
            .iter_mut()
            .flat_map(|m| m.iter_mut())
            .chain(bias_iter)
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: values.len(),
            });
        }
        for (p, v) in self.params_mut().zip(values) {
            *p = *v;
        }
        Ok(())
    }

    /// `W^d` as a slice of length `Ω_d`.
    pub fn output_weights(&self) -> &[f64] {
        self.matrices
            .last()
            .and_then(|m| m.as_slice())
            .expect("output matrix is standard layout")
    }
}

/// Per-layer slopes taken during a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSignature {
    /// `per_layer[l - 1][i]` is `σ^l_i ∈ {β, γ}`.
    pub per_layer: Vec<Vec<f64>>,
    /// `active[l - 1][i]` is true iff the pre-activation was `≥ 0`.
    pub active: Vec<Vec<bool>>,
}

impl ActivationSignature {
    pub fn depth(&self) -> usize {
        self.per_layer.len()
    }

    /// Activation pattern packed one bit per neuron, layer by layer.
    pub fn pattern_key(&self) -> Vec<u64> {
        let n: usize = self.active.iter().map(Vec::len).sum();
        let mut key = vec![0u64; n.div_ceil(64)];
        for (bit, &a) in self.active.iter().flatten().enumerate() {
            if a {
                key[bit / 64] |= 1 << (bit % 64);
            }
        }
        key
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Label,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabeledDataset {
    samples: Vec<Sample>,
}

impl LabeledDataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if let Some(first) = samples.first() {
            let f = first.x.len();
            for (j, s) in samples.iter().enumerate() {
                if s.x.len() != f {
                    return Err(Error::DimensionMismatch {
                        expected: f,
                        actual: s.x.len(),
                    });
                }
                if s.y != 1 && s.y != -1 {
                    return Err(Error::InvalidInput(format!(
                        "sample {j} has label {} (must be -1 or +1)",
                        s.y
                    )));
                }
                if s.x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput(format!("sample {j} has non-finite features")));
                }
            }
        }
        Ok(LabeledDataset { samples })
    }

    pub fn from_parts(xs: Vec<Vec<f64>>, ys: Vec<Label>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                actual: ys.len(),
            });
        }
        Self::new(xs.into_iter().zip(ys).map(|(x, y)| Sample { x, y }).collect())
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Feature dimension, `None` when empty.
    pub fn dim(&self) -> Option<usize> {
        self.samples.first().map(|s| s.x.len())
    }

    pub fn labels(&self) -> Vec<Label> {
        self.samples.iter().map(|s| s.y).collect()
    }

    pub fn inputs(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.iter().map(|s| s.x.as_slice())
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    pub fn concat(&self, other: &LabeledDataset) -> Result<LabeledDataset> {
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        Self::new(samples)
    }

    pub fn with_labels(&self, labels: &[Label]) -> Result<LabeledDataset> {
        Self::from_parts(self.inputs().map(<[f64]>::to_vec).collect(), labels.to_vec())
    }
}

/// A validated configuration together with matching weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    weights: NetworkWeights,
}

impl Network {
    pub fn new(config: NetworkConfig, weights: NetworkWeights) -> Result<Self> {
        config.validate()?;
        weights.validate(&config)?;
        Ok(Network { config, weights })
    }

    /// Builds a bias-free network from nested row-major matrices.
    pub fn from_rows(config: NetworkConfig, rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        let matrices = rows
            .iter()
            .map(|m| {
                let r = m.len();
                let c = m.first().map_or(0, Vec::len);
                if m.iter().any(|row| row.len() != c) {
                    return Err(Error::InvalidConfig("ragged weight matrix".into()));
                }
                Array2::from_shape_vec((r, c), m.concat())
                    .map_err(|e| Error::InvalidConfig(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            config,
            NetworkWeights {
                matrices,
                biases: None,
            },
        )
    }

    pub fn random<R: Rng + ?Sized>(config: NetworkConfig, std: f64, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let weights = NetworkWeights::truncated_normal(&config, std, rng);
        Self::new(config, weights)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn weights(&self) -> &NetworkWeights {
        &self.weights
    }

    pub fn into_parts(self) -> (NetworkConfig, NetworkWeights) {
        (self.config, self.weights)
    }

    pub fn depth(&self) -> usize {
        self.config.depth()
    }

    /// `W^l`.
    pub fn matrix(&self, l: usize) -> &Array2<f64> {
        &self.weights.matrices[l]
    }

    /// `b^k`, if biases are enabled.
    pub fn bias(&self, k: usize) -> Option<&Array1<f64>> {
        self.weights.biases.as_ref().map(|b| &b[k - 1])
    }

    pub fn params(&self) -> Vec<f64> {
        self.weights.to_flat()
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite parameter".into()));
        }
        self.weights.set_flat(values)
    }

    /// Copy with parameter `index` shifted by `delta`.
    pub fn perturbed(&self, index: usize, delta: f64) -> Network {
        let mut out = self.clone();
        if let Some(p) = out.weights.params_mut().nth(index) {
            *p += delta;
        }
        out
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Hidden pre-activations `z^1..z^d` and the output logit.
    pub(crate) fn pre_activations(&self, x: &[f64]) -> (Vec<Vec<f64>>, f64) {
        let d = self.depth();
        let mut zs = Vec::with_capacity(d);
        let mut h: Vec<f64> = x.to_vec();
        for l in 0..d {
            let w = &self.weights.matrices[l];
            let mut z: Vec<f64> = w.rows().into_iter().map(|row| dot(row.as_slice().unwrap(), &h)).collect();
            if let Some(b) = self.bias(l + 1) {
                for (zi, bi) in z.iter_mut().zip(b.iter()) {
                    *zi += bi;
                }
            }
            h = z.iter().map(|&v| self.config.rho(v)).collect();
            zs.push(z);
        }
        let mut out = dot(self.weights.output_weights(), &h);
        if let Some(b) = self.bias(d + 1) {
            out += b[0];
        }
        (zs, out)
    }

    /// Network logit and the activation signature of this pass.
    pub fn forward(&self, x: &[f64]) -> Result<(f64, ActivationSignature)> {
        self.check_input(x)?;
        let (zs, out) = self.pre_activations(x);
        let cfg = &self.config;
        let active: Vec<Vec<bool>> = zs
            .iter()
            .map(|z| z.iter().map(|&v| v >= 0.0).collect())
            .collect();
        let per_layer = zs
            .iter()
            .map(|z| z.iter().map(|&v| cfg.slope(v)).collect())
            .collect();
        Ok((out, ActivationSignature { per_layer, active }))
    }

    pub fn output(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.pre_activations(x).1)
    }

    pub fn signature(&self, x: &[f64]) -> Result<ActivationSignature> {
        Ok(self.forward(x)?.1)
    }

    /// `sign(N(x, w))` with `sign(0) = +1`.
    pub fn classify(&self, x: &[f64]) -> Result<Label> {
        Ok(sign_label(self.output(x)?))
    }

    /// Output obtained by replaying the slopes in `sig` instead of
    /// evaluating the nonlinearity. Matches `forward` bit for bit when
    /// `sig` came from `forward(x)`.
    pub fn output_with_signature(&self, x: &[f64], sig: &ActivationSignature) -> Result<f64> {
        self.check_input(x)?;
        let d = self.depth();
        if sig.depth() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: sig.depth(),
            });
        }
        let mut h: Vec<f64> = x.to_vec();
        for l in 0..d {
            let w = &self.weights.matrices[l];
            let slopes = &sig.per_layer[l];
            if slopes.len() != w.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: w.nrows(),
                    actual: slopes.len(),
                });
            }
            let b = self.bias(l + 1);
            h = w
                .rows()
                .into_iter()
                .enumerate()
                .map(|(i, row)| {
                    let mut z = dot(row.as_slice().unwrap(), &h);
                    if let Some(b) = b {
                        z += b[i];
                    }
                    slopes[i] * z
                })
                .collect();
        }
        let mut out = dot(self.weights.output_weights(), &h);
        if let Some(b) = self.bias(d + 1) {
            out += b[0];
        }
        Ok(out)
    }

    /// True iff every sample is classified correctly (vacuously true when empty).
    pub fn zero_training_error(&self, data: &LabeledDataset) -> Result<bool> {
        for s in data.samples() {
            if self.classify(&s.x)? != s.y {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn training_errors(&self, data: &LabeledDataset) -> Result<usize> {
        let mut errors = 0;
        for s in data.samples() {
            if self.classify(&s.x)? != s.y {
                errors += 1;
            }
        }
        Ok(errors)
    }

    /// `Λ(w)`: the product of weights along every path, plus the
    /// augmented bias-start paths when biases are enabled.
    pub fn path_products(&self, budget: usize) -> Result<PathVector> {
        let layout = self.config.path_layout();
        layout.check_budget(budget)?;
        let d = self.depth();
        // Stage l holds products W^d … W^l over paths (i_d, …, i_l).
        let mut stages: Vec<Vec<f64>> = vec![Vec::new(); d + 1];
        let mut current: Vec<f64> = self.weights.output_weights().to_vec();
        for l in (0..d).rev() {
            let w = &self.weights.matrices[l];
            let (upper, lower) = w.dim();
            let mut next = Vec::with_capacity(current.len() * lower);
            for (p, &v) in current.iter().enumerate() {
                let i_upper = p % upper;
                let row = w.row(i_upper);
                next.extend(row.iter().map(|&wij| v * wij));
            }
            stages[l + 1] = std::mem::replace(&mut current, next);
        }
        stages[0] = current;
        Ok(pathspace::assemble(layout, stages))
    }

    /// Output computed as `b^{d+1} + ⟨Λ(w), φ(x, w)⟩` over explicit paths.
    pub fn forward_via_paths(&self, x: &[f64], budget: usize) -> Result<f64> {
        let lambda = self.path_products(budget)?;
        let phi = pathspace::embed(self, x, budget)?;
        let mut out = lambda.dot(&phi)?;
        if let Some(b) = self.bias(self.depth() + 1) {
            out += b[0];
        }
        Ok(out)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
