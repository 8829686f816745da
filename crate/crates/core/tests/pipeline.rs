//! Full pipeline runs: artifacts on disk, reproducibility and consistency
//! between the record and the saved network.

use pathnet::harness::{
    run_repetition, write_artifacts, Classifier, DatasetSpec, ExperimentConfig, GeneratorParams, MarginClassifier,
};
use pathnet::maxmargin::SolverOptions;
use pathnet::network::{Network, NetworkConfig, TrainHyper};

fn config() -> ExperimentConfig {
    ExperimentConfig {
        seed: 3,
        dataset: DatasetSpec::Generator {
            name: "xor2d".into(),
            m: 60,
            params: GeneratorParams::default(),
        },
        network: NetworkConfig::new(2, vec![16]).with_biases(true),
        train: TrainHyper {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 20,
            max_iters: 20_000,
            init_std: 0.25,
            ..TrainHyper::default()
        },
        solver: SolverOptions::default(),
        delta: 0.05,
        randomize_labels: false,
        test_m: Some(30),
        compare: true,
        sweep: None,
        output_dir: None,
    }
}

#[test]
fn artifacts_reload_to_the_same_network() {
    let out = run_repetition(&config(), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_artifacts(&out, dir.path()).unwrap();

    let net = Network::load(&dir.path().join("weights.json")).unwrap();
    assert_eq!(net.weights_hash(), out.record.weights_hash);
    assert_eq!(net.params(), out.network.params());

    let mut rows = csv::Reader::from_path(dir.path().join("support.csv")).unwrap();
    let indices: Vec<usize> = rows
        .records()
        .map(|r| r.unwrap()[0].parse().unwrap())
        .collect();
    assert_eq!(indices, out.solution.support_indices);
    assert_eq!(indices.len(), out.record.s);

    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("record.json")).unwrap()).unwrap();
    assert_eq!(record["s"], out.record.s);
    assert!(record["F"].as_f64().unwrap() > 0.0);
}

#[test]
fn runs_are_reproducible() {
    let a = run_repetition(&config(), 0).unwrap().record;
    let b = run_repetition(&config(), 0).unwrap().record;
    assert_eq!(a.weights_hash, b.weights_hash);
    assert_eq!(a.gram_hash, b.gram_hash);
    assert_eq!((a.s, a.margin_value, a.bound), (b.s, b.margin_value, b.bound));
    let c = run_repetition(&config(), 1).unwrap().record;
    assert_ne!(a.gram_hash, c.gram_hash);
}

#[test]
fn margin_classifier_fits_the_training_set() {
    let out = run_repetition(&config(), 0).unwrap();
    let mm = MarginClassifier::new(&out.network, &out.data, &out.solution).unwrap();
    for s in out.data.samples() {
        assert_eq!(mm.classify(&s.x).unwrap(), s.y);
        assert!(s.y as f64 * mm.decision_value(&s.x).unwrap() >= 1.0 - 1e-6);
    }
    let agreement = out.record.agreement.unwrap();
    assert!((0.0..=1.0).contains(&agreement));
    assert!(out.record.unique_test_signatures.unwrap() <= 30);
}
