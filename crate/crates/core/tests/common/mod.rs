//! Random tiny networks and datasets shared by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use pathnet::network::{LabeledDataset, Network, NetworkConfig, NetworkWeights};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Depth 1 to 3, widths 1 to 4, input dim 1 to 3, β ∈ {0, 0.1}.
pub fn tiny_net(rng: &mut ChaCha8Rng, biases: bool) -> Network {
    let d = rng.random_range(1..=3);
    let widths = (0..d).map(|_| rng.random_range(1..=4)).collect();
    let f = rng.random_range(1..=3);
    net_with(rng, f, widths, biases)
}

pub fn net_with(rng: &mut ChaCha8Rng, f: usize, widths: Vec<usize>, biases: bool) -> Network {
    let beta = if rng.random_bool(0.5) { 0.0 } else { 0.1 };
    let cfg = NetworkConfig::new(f, widths).with_slopes(beta, 1.0).with_biases(biases);
    let mut w = NetworkWeights::truncated_normal(&cfg, 1.0, rng);
    if let Some(bs) = &mut w.biases {
        for b in bs.iter_mut() {
            b.mapv_inplace(|_| 0.5 * gauss(rng));
        }
    }
    Network::new(cfg, w).unwrap()
}

pub fn inputs(rng: &mut ChaCha8Rng, m: usize, f: usize) -> Vec<Vec<f64>> {
    (0..m).map(|_| (0..f).map(|_| gauss(rng)).collect()).collect()
}

/// Inputs labeled by the network itself, so it has zero training error.
pub fn self_labeled(rng: &mut ChaCha8Rng, net: &Network, m: usize) -> LabeledDataset {
    let xs = inputs(rng, m, net.config().input_dim);
    let ys = xs.iter().map(|x| net.classify(x).unwrap()).collect();
    LabeledDataset::from_parts(xs, ys).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
