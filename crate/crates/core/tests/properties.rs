//! Invariants checked on randomly drawn tiny networks.

mod common;

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use common::{inputs, net_with, rel_close, rng, self_labeled, tiny_net};
use pathnet::compression::{bound_report, kl_bernoulli, kl_inverse, BoundInputs};
use pathnet::harness::{check_wbar_positive, count_unique_signatures, wbar_positive_by_parity};
use pathnet::network::{Network, DEFAULT_PATH_BUDGET};
use pathnet::pathspace::{kernel_matrix, kernel_matrix_bruteforce};
use pathnet::skeleton::{normalize_to_skeleton, prune_dead_neurons, Skeleton};

const BUDGET: usize = DEFAULT_PATH_BUDGET;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_is_symmetric_psd_and_matches_embeddings(seed in any::<u64>(), biases in any::<bool>()) {
        let mut r = rng(seed);
        let net = tiny_net(&mut r, biases);
        let data = self_labeled(&mut r, &net, 12);
        let g = kernel_matrix(&net, &data).unwrap();
        let brute = kernel_matrix_bruteforce(&net, &data, BUDGET).unwrap();
        let m = g.size();
        prop_assert_eq!(g.max_asymmetry(), 0.0);
        for i in 0..m {
            for j in 0..m {
                prop_assert!((g.get(i, j) - brute.get(i, j)).abs() <= 1e-9 * (1.0 + brute.get(i, j).abs()));
            }
        }
        let eig = SymmetricEigen::new(DMatrix::from_fn(m, m, |i, j| g.get(i, j)));
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(min >= -1e-8 * g.trace() / m as f64, "min eigenvalue {}", min);
    }

    #[test]
    fn rescaling_a_neuron_keeps_path_products(seed in any::<u64>(), c in 0.05f64..20.0) {
        let mut r = rng(seed);
        let net = tiny_net(&mut r, false);
        let (cfg, mut w) = net.clone().into_parts();
        let l = 1 + (seed as usize) % cfg.depth();
        let i = (seed as usize / 7) % cfg.layer_width(l);
        w.matrices[l - 1].row_mut(i).mapv_inplace(|v| v * c);
        w.matrices[l].column_mut(i).mapv_inplace(|v| v / c);
        let scaled = Network::new(cfg, w).unwrap();
        let a = net.path_products(BUDGET).unwrap();
        let b = scaled.path_products(BUDGET).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!(rel_close(*x, *y, 1e-12));
        }
        for x in inputs(&mut r, 20, net.config().input_dim) {
            prop_assert_eq!(net.signature(&x).unwrap().active, scaled.signature(&x).unwrap().active);
        }
    }

    #[test]
    fn normalization_keeps_function_and_path_products(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = tiny_net(&mut r, false);
        let (norm, skel) = normalize_to_skeleton(&net).unwrap();
        let a = net.path_products(BUDGET).unwrap();
        let b = norm.path_products(BUDGET).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!(rel_close(*x, *y, 1e-12));
        }
        for x in inputs(&mut r, 20, net.config().input_dim) {
            prop_assert!(rel_close(net.output(&x).unwrap(), norm.output(&x).unwrap(), 1e-12));
            prop_assert_eq!(net.signature(&x).unwrap().active, norm.signature(&x).unwrap().active);
        }
        for l in 1..=norm.depth() {
            for i in 0..norm.config().layer_width(l) {
                let j = skel.sources[l - 1][i];
                prop_assert_eq!(norm.matrix(l - 1)[[i, j]], skel.signs[l - 1][i] as f64);
                prop_assert!(norm.matrix(l - 1).row(i).iter().all(|v| v.abs() <= 1.0));
            }
        }
        let doc = skel.to_document();
        prop_assert_eq!(doc.n, norm.config().neuron_count());
        prop_assert_eq!(Skeleton::from_document(&doc, norm.config()).unwrap(), skel);
    }

    #[test]
    fn pruning_keeps_outputs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = tiny_net(&mut r, false);
        let (cfg, mut w) = net.clone().into_parts();
        // Kill one neuron's outgoing weights.
        let l = 1 + (seed as usize) % cfg.depth();
        let i = (seed as usize / 5) % cfg.layer_width(l);
        w.matrices[l].column_mut(i).fill(0.0);
        let damaged = Network::new(cfg, w).unwrap();
        let pruned = prune_dead_neurons(&damaged).unwrap();
        for x in inputs(&mut r, 20, damaged.config().input_dim) {
            let expected = damaged.output(&x).unwrap();
            match pruned.network() {
                Some(p) => prop_assert!((p.output(&x).unwrap() - expected).abs() <= 1e-12 * (1.0 + expected.abs())),
                None => prop_assert_eq!(expected, 0.0),
            }
        }
        if let Some(p) = pruned.network() {
            prop_assert!(p.config().neuron_count() < damaged.config().neuron_count());
        }
    }

    #[test]
    fn parity_and_direct_positivity_agree(seed in any::<u64>(), make_positive in any::<bool>()) {
        let mut r = rng(seed);
        let net = tiny_net(&mut r, false);
        // Absolute weights make every path positive.
        let (cfg, mut w) = net.into_parts();
        if make_positive {
            for m in &mut w.matrices {
                m.mapv_inplace(f64::abs);
            }
        }
        let net = Network::new(cfg, w).unwrap();
        let direct = check_wbar_positive(&net, BUDGET).unwrap();
        prop_assert_eq!(direct.all_positive, wbar_positive_by_parity(&net));
        if make_positive {
            prop_assert!(direct.all_positive);
        }
    }

    #[test]
    fn signature_counts_are_bounded(seed in any::<u64>(), biases in any::<bool>()) {
        let mut r = rng(seed);
        let net = tiny_net(&mut r, biases);
        let a = self_labeled(&mut r, &net, 30);
        let b = self_labeled(&mut r, &net, 25);
        let ca = count_unique_signatures(&net, &a).unwrap();
        let cb = count_unique_signatures(&net, &b).unwrap();
        let both = count_unique_signatures(&net, &a.concat(&b).unwrap()).unwrap();
        prop_assert!(ca >= 1 && ca <= a.len());
        prop_assert!(both >= ca.max(cb) && both <= ca + cb);
        prop_assert_eq!(ca, count_unique_signatures(&net, &a).unwrap());
    }

    #[test]
    fn bound_variants_are_ordered(m in 20usize..5000, n in 1usize..200, frac in 0.0f64..0.9, delta in 0.001f64..0.5) {
        let s = ((m as f64 * frac) as usize).min(m - 1);
        let report = bound_report(&BoundInputs::new(m, n, s, delta).unwrap(), true).unwrap();
        prop_assert!(report.f_exact <= report.f);
        prop_assert!(report.f_exact > 0.0 && report.f_exact <= 1.0);
        prop_assert!(report.f_tight.unwrap() <= report.f + 1e-12);
        prop_assert!((report.breakdown.total() + (1.0 / delta).ln()) / (m - s) as f64 - report.f <= 1e-12 * report.f);
    }

    #[test]
    fn kl_inverse_round_trips(q in 0.0f64..0.5, budget in 1e-4f64..2.0) {
        let p = kl_inverse(q, budget).unwrap();
        prop_assert!(p >= q);
        if p < 1.0 - 1e-9 {
            prop_assert!((kl_bernoulli(q, p).unwrap() - budget).abs() <= 1e-8);
        }
    }

    #[test]
    fn recovery_on_two_layer_nets_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = net_with(&mut r, 2, vec![3, 2], false);
        let (norm, skel) = normalize_to_skeleton(&net).unwrap();
        let wbar = norm.path_products(BUDGET).unwrap();
        let rec = pathnet::skeleton::recover_weights(&wbar, &skel, norm.config()).unwrap();
        for (a, b) in rec.matrices.iter().zip(&norm.weights().matrices) {
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!(rel_close(*x, *y, 1e-8));
            }
        }
    }
}
