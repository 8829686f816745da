//! Recovering network weights from path products.
//!
//! A skeleton fixes one incoming edge per hidden neuron. After positive
//! rescaling every skeleton edge carries weight `±1`, and then the full
//! weight vector is determined by `Λ(w)` together with those signs, up to
//! a positive scale on the output layer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::network::{Network, NetworkConfig, NetworkWeights, DEFAULT_PATH_BUDGET};
use crate::pathspace::PathVector;
use crate::{Error, Result};

/// Weights at or below this magnitude are treated as zero.
pub const ZERO_TOL: f64 = 1e-12;

/// Outcome of dead-neuron removal.
#[derive(Debug, Clone)]
pub enum PruneOutcome {
    Pruned {
        network: Network,
        /// Original indices of the surviving neurons, per hidden layer.
        kept: Vec<Vec<usize>>,
    },
    /// Some hidden layer lost every neuron; the network computes `N ≡ 0`.
    ZeroFunction { emptied_layer: usize },
}

impl PruneOutcome {
    pub fn network(&self) -> Option<&Network> {
        match self {
            PruneOutcome::Pruned { network, .. } => Some(network),
            PruneOutcome::ZeroFunction { .. } => None,
        }
    }

    pub fn is_zero_function(&self) -> bool {
        matches!(self, PruneOutcome::ZeroFunction { .. })
    }
}

fn require_bias_free(cfg: &NetworkConfig) -> Result<()> {
    if cfg.use_biases {
        return Err(Error::Precondition(
            "skeleton operations are defined for bias-free networks".into(),
        ));
    }
    Ok(())
}

/// Per hidden layer, which neurons lie on a path of nonzero weights.
fn alive_mask(net: &Network) -> Vec<Vec<bool>> {
    let d = net.depth();
    let cfg = net.config();
    let mut in_ok: Vec<Vec<bool>> = vec![vec![true; cfg.input_dim]];
    for l in 0..d {
        let w = net.matrix(l);
        let prev = &in_ok[l];
        let next = (0..w.nrows())
            .map(|i| (0..w.ncols()).any(|j| prev[j] && w[[i, j]] != 0.0))
            .collect();
        in_ok.push(next);
    }
    let mut out_ok: Vec<Vec<bool>> = vec![Vec::new(); d + 1];
    out_ok[d] = net.weights().output_weights().iter().map(|&v| v != 0.0).collect();
    for l in (1..d).rev() {
        let w = net.matrix(l);
        out_ok[l] = (0..w.ncols())
            .map(|j| (0..w.nrows()).any(|i| out_ok[l + 1][i] && w[[i, j]] != 0.0))
            .collect();
    }
    (1..=d)
        .map(|l| in_ok[l].iter().zip(&out_ok[l]).map(|(a, b)| *a && *b).collect())
        .collect()
}

/// Removes every hidden neuron that lies on no path of nonzero weights.
pub fn prune_dead_neurons(net: &Network) -> Result<PruneOutcome> {
    require_bias_free(net.config())?;
    let d = net.depth();
    let alive = alive_mask(net);
    let kept: Vec<Vec<usize>> = alive
        .iter()
        .map(|layer| layer.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i).collect())
        .collect();
    if let Some(l) = kept.iter().position(Vec::is_empty) {
        return Ok(PruneOutcome::ZeroFunction { emptied_layer: l + 1 });
    }
    let cfg = net.config();
    let mut new_cfg = cfg.clone();
    new_cfg.hidden_widths = kept.iter().map(Vec::len).collect();
    let all_inputs: Vec<usize> = (0..cfg.input_dim).collect();
    let matrices = (0..=d)
        .map(|l| {
            let rows: Vec<usize> = if l == d { vec![0] } else { kept[l].clone() };
            let cols = if l == 0 { &all_inputs } else { &kept[l - 1] };
            let w = net.matrix(l);
            ndarray::Array2::from_shape_fn((rows.len(), cols.len()), |(r, c)| w[[rows[r], cols[c]]])
        })
        .collect();
    let network = Network::new(new_cfg, NetworkWeights { matrices, biases: None })?;
    Ok(PruneOutcome::Pruned { network, kept })
}

/// One chosen incoming edge and its sign for every hidden neuron.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    /// `sources[l - 1][i]` is the index in layer `l − 1` feeding neuron `i` of layer `l`.
    pub sources: Vec<Vec<usize>>,
    pub signs: Vec<Vec<i8>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonDocument {
    /// `[l, i_l, s_{l−1}(i_l)]` with `l` counted from 1 and neurons from 0.
    pub edges: Vec<[usize; 3]>,
    pub signs: Vec<i8>,
    pub n: usize,
}

impl Skeleton {
    pub fn depth(&self) -> usize {
        self.sources.len()
    }

    /// Number of skeleton edges, one per hidden neuron.
    pub fn n(&self) -> usize {
        self.sources.iter().map(Vec::len).sum()
    }

    /// Indices `(i_l, s(i_l), s(s(i_l)), …, i_0)` from layer `l` down to the input.
    pub fn path_below(&self, l: usize, i: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(l + 1);
        let mut cur = i;
        out.push(cur);
        for layer in (1..=l).rev() {
            cur = self.sources[layer - 1][cur];
            out.push(cur);
        }
        out
    }

    /// Product of skeleton signs from the input up to neuron `i` of layer `l`.
    /// Inputs (`l = 0`) have product 1.
    pub fn sign_product(&self, l: usize, i: usize) -> f64 {
        let mut prod = 1.0;
        let mut cur = i;
        for layer in (1..=l).rev() {
            prod *= self.signs[layer - 1][cur] as f64;
            cur = self.sources[layer - 1][cur];
        }
        prod
    }

    pub fn flipped(&self, l: usize, i: usize) -> Skeleton {
        let mut out = self.clone();
        out.signs[l - 1][i] = -out.signs[l - 1][i];
        out
    }

    fn check_against(&self, cfg: &NetworkConfig) -> Result<()> {
        let shape_ok = self.depth() == cfg.depth()
            && (1..=cfg.depth()).all(|l| {
                let s = &self.sources[l - 1];
                s.len() == cfg.layer_width(l)
                    && self.signs[l - 1].len() == s.len()
                    && s.iter().all(|&j| j < cfg.layer_width(l - 1))
                    && self.signs[l - 1].iter().all(|&g| g == 1 || g == -1)
            });
        if !shape_ok {
            return Err(Error::InvalidInput("skeleton does not match the network shape".into()));
        }
        Ok(())
    }

    pub fn to_document(&self) -> SkeletonDocument {
        let mut edges = Vec::new();
        let mut signs = Vec::new();
        for (l, (src, sg)) in self.sources.iter().zip(&self.signs).enumerate() {
            for (i, (&s, &g)) in src.iter().zip(sg).enumerate() {
                edges.push([l + 1, i, s]);
                signs.push(g);
            }
        }
        SkeletonDocument {
            n: edges.len(),
            edges,
            signs,
        }
    }

    pub fn from_document(doc: &SkeletonDocument, cfg: &NetworkConfig) -> Result<Skeleton> {
        if doc.edges.len() != doc.signs.len() || doc.n != doc.edges.len() {
            return Err(Error::InvalidInput("skeleton edge and sign counts differ".into()));
        }
        let d = cfg.depth();
        let mut sources: Vec<Vec<Option<usize>>> = (1..=d).map(|l| vec![None; cfg.layer_width(l)]).collect();
        let mut signs: Vec<Vec<i8>> = (1..=d).map(|l| vec![0; cfg.layer_width(l)]).collect();
        for (&[l, i, s], &g) in doc.edges.iter().zip(&doc.signs) {
            if l == 0 || l > d || i >= cfg.layer_width(l) {
                return Err(Error::InvalidInput(format!("skeleton edge [{l}, {i}, {s}] out of range")));
            }
            if sources[l - 1][i].replace(s).is_some() {
                return Err(Error::InvalidInput(format!("neuron {i} of layer {l} has two skeleton edges")));
            }
            signs[l - 1][i] = g;
        }
        let sources = sources
            .into_iter()
            .map(|layer| layer.into_iter().collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::InvalidInput("some neuron has no skeleton edge".into()))?;
        let skel = Skeleton { sources, signs };
        skel.check_against(cfg)?;
        Ok(skel)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }
}

/// Rescales each hidden neuron so its largest-magnitude incoming weight
/// becomes `±1`, compensating on the outgoing weights.
///
/// Requires a pruned, bias-free network.
pub fn normalize_to_skeleton(net: &Network) -> Result<(Network, Skeleton)> {
    require_bias_free(net.config())?;
    if alive_mask(net).iter().flatten().any(|a| !a) {
        return Err(Error::Precondition(
            "network has dead neurons; prune before normalizing".into(),
        ));
    }
    let d = net.depth();
    let (cfg, mut w) = net.clone().into_parts();
    let mut sources = Vec::with_capacity(d);
    let mut signs = Vec::with_capacity(d);
    for l in 1..=d {
        let width = cfg.layer_width(l);
        let mut src = Vec::with_capacity(width);
        let mut sg = Vec::with_capacity(width);
        for i in 0..width {
            let row = w.matrices[l - 1].row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v.abs() > row[best].abs() {
                    best = j;
                }
            }
            let c = row[best].abs();
            w.matrices[l - 1].row_mut(i).mapv_inplace(|v| v / c);
            w.matrices[l].column_mut(i).mapv_inplace(|v| v * c);
            src.push(best);
            sg.push(if w.matrices[l - 1][[i, best]] > 0.0 { 1 } else { -1 });
        }
        sources.push(src);
        signs.push(sg);
    }
    Ok((Network::new(cfg, w)?, Skeleton { sources, signs }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoverOptions {
    /// Explicit-path budget; all coordinates are re-verified below it.
    pub budget: usize,
    /// Coordinates sampled for re-verification above the budget.
    pub verify_samples: usize,
    pub rel_tol: f64,
    pub zero_tol: f64,
    pub seed: u64,
}

impl Default for RecoverOptions {
    fn default() -> Self {
        RecoverOptions {
            budget: DEFAULT_PATH_BUDGET,
            verify_samples: 1000,
            rel_tol: 1e-8,
            zero_tol: ZERO_TOL,
            seed: 0,
        }
    }
}

pub fn recover_weights(wbar: &PathVector, skel: &Skeleton, cfg: &NetworkConfig) -> Result<NetworkWeights> {
    recover_weights_with(wbar, skel, cfg, &RecoverOptions::default())
}

/// Solves for weights `ŵ` with `Λ(ŵ) = w̄` whose skeleton edges equal the given signs.
pub fn recover_weights_with(
    wbar: &PathVector,
    skel: &Skeleton,
    cfg: &NetworkConfig,
    opts: &RecoverOptions,
) -> Result<NetworkWeights> {
    require_bias_free(cfg)?;
    cfg.validate()?;
    skel.check_against(cfg)?;
    let layout = cfg.path_layout();
    if wbar.layout() != &layout {
        return Err(Error::InvalidInput("path vector layout does not match the network".into()));
    }
    let d = cfg.depth();
    let mut w = NetworkWeights::zeros(cfg);

    // Output layer: the skeleton path of each top neuron isolates W^d.
    for i in 0..cfg.layer_width(d) {
        let v = wbar.get(&skel.path_below(d, i));
        if v.abs() <= opts.zero_tol {
            return Err(Error::Unreachable(format!(
                "neuron {i} of layer {d} has a zero skeleton path coordinate"
            )));
        }
        w.matrices[d][[0, i]] = v / skel.sign_product(d, i);
    }

    // Interior: ratio of two paths sharing the suffix (e_d, …, e_{l+2}, i_{l+1}).
    for l in (0..d).rev() {
        let upper_width = cfg.layer_width(l + 1);
        let suffix_widths: Vec<usize> = ((l + 2)..=d).rev().map(|k| cfg.layer_width(k)).collect();
        for i_up in 0..upper_width {
            let below_up = skel.path_below(l + 1, i_up);
            let (suffix, denom) = first_live_suffix(&suffix_widths, |e| {
                let mut p = e.to_vec();
                p.extend_from_slice(&below_up);
                wbar.get(&p)
            }, opts.zero_tol)
            .ok_or_else(|| {
                Error::Unreachable(format!(
                    "neuron {i_up} of layer {} lies on no nonzero path",
                    l + 1
                ))
            })?;
            let denom = denom / skel.sign_product(l + 1, i_up);
            for i_lo in 0..cfg.layer_width(l) {
                let mut p = suffix.clone();
                p.push(i_up);
                p.extend(skel.path_below(l, i_lo));
                let numer = wbar.get(&p) / skel.sign_product(l, i_lo);
                w.matrices[l][[i_up, i_lo]] = numer / denom;
            }
        }
    }

    verify(wbar, &w, opts)?;
    Ok(w)
}

/// Lexicographically first suffix whose value exceeds `zero_tol` in magnitude.
fn first_live_suffix<F: Fn(&[usize]) -> f64>(
    widths: &[usize],
    value: F,
    zero_tol: f64,
) -> Option<(Vec<usize>, f64)> {
    let mut e = vec![0; widths.len()];
    loop {
        let v = value(&e);
        if v.abs() > zero_tol {
            return Some((e, v));
        }
        let mut pos = widths.len();
        loop {
            if pos == 0 {
                return None;
            }
            pos -= 1;
            e[pos] += 1;
            if e[pos] < widths[pos] {
                break;
            }
            e[pos] = 0;
        }
    }
}

fn path_value(w: &NetworkWeights, path: &[usize]) -> f64 {
    let d = path.len() - 1;
    let mut v = w.matrices[d][[0, path[0]]];
    for (pos, l) in (0..d).rev().enumerate() {
        v *= w.matrices[l][[path[pos], path[pos + 1]]];
    }
    v
}

fn verify(wbar: &PathVector, w: &NetworkWeights, opts: &RecoverOptions) -> Result<()> {
    let layout = wbar.layout();
    let scale = wbar.max_abs().max(f64::MIN_POSITIVE);
    let check = |flat: usize| -> Result<()> {
        let path = layout.path_of(flat);
        let got = path_value(w, &path);
        let want = wbar.values()[flat];
        if (got - want).abs() > opts.rel_tol * scale {
            return Err(Error::Inconsistent(format!(
                "path {path:?}: recovered product {got:e} but target {want:e}"
            )));
        }
        Ok(())
    };
    let total = layout.len();
    if total <= opts.budget {
        (0..total).try_for_each(check)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        (0..opts.verify_samples).try_for_each(|_| check(rng.random_range(0..total)))
    }
}

/// `2^n` for a configuration with `n` hidden neurons.
pub fn classifier_count_bound(cfg: &NetworkConfig) -> Result<u64> {
    classifier_count_bound_for(cfg.neuron_count())
}

pub fn classifier_count_bound_for(n: usize) -> Result<u64> {
    if n > 62 {
        return Err(Error::OutOfRange(format!("2^{n} does not fit the count type")));
    }
    Ok(1u64 << n)
}
