// SPDX-License-Identifier: Apache-2.0

use hdcx::harness::{
    bitflip_experiment, hyperparam_sweep, kfold_evaluate, noise_experiment, stratified_folds,
    subsample_experiment, Dataset, PipelineConfig, SweepAxis,
};
use hdcx::hv::SeededStream;
use hdcx::theory::{estimate_bundle_distance, estimate_ordering_preservation, p_of_n};
use hdcx::ErrorKind;
use proptest::prelude::*;

fn toy_data() -> Dataset {
    let mut s = SeededStream::new(99);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..120 {
        let class = i % 3;
        let centre = class as f64;
        rows.push((0..6).map(|_| centre + s.next_f64()).collect());
        labels.push(format!("k{class}"));
    }
    Dataset {
        feature_names: (0..6).map(|i| format!("f{i}")).collect(),
        rows,
        labels,
    }
}

fn toy_config() -> PipelineConfig {
    PipelineConfig {
        dim: 1_000,
        levels: 11,
        folds: 4,
        ..PipelineConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn folds_partition_and_stratify(
        sizes in proptest::collection::vec(5usize..40, 2..4),
        folds in 2usize..6,
        seed: u64,
    ) {
        let classes: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(j, &n)| std::iter::repeat_n(j, n))
            .collect();
        let n = classes.len();
        let sizes_len = sizes.len();
        let out = stratified_folds(&classes, sizes_len, folds, &SeededStream::new(seed)).unwrap();
        prop_assert_eq!(out.len(), folds);
        let mut seen = vec![0usize; n];
        for f in &out {
            prop_assert_eq!(f.train.len() + f.test.len(), n);
            for &i in &f.test {
                seen[i] += 1;
                prop_assert!(!f.train.contains(&i));
            }
            for (j, &size) in sizes.iter().enumerate() {
                let here = f.test.iter().filter(|&&i| classes[i] == j).count();
                prop_assert!(here == size / folds || here == size.div_ceil(folds));
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes: Vec<usize> = out.iter().map(|f| f.test.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let again = stratified_folds(&classes, sizes_len, folds, &SeededStream::new(seed)).unwrap();
        prop_assert_eq!(again, out);
    }
}

#[test]
fn fold_count_rules() {
    let classes = vec![0, 0, 0, 1, 1, 1, 1];
    let s = SeededStream::new(0);
    assert!(stratified_folds(&classes, 2, 4, &s).is_err());
    assert!(stratified_folds(&classes, 2, 1, &s).is_err());
    assert!(stratified_folds(&classes, 2, 8, &s).is_err());
    let loo = stratified_folds(&classes, 2, 7, &s).unwrap();
    assert!(loo.iter().all(|f| f.test.len() == 1));
}

#[test]
fn unperturbed_knobs_reproduce_baseline() {
    let data = toy_data();
    let config = toy_config();
    let base = kfold_evaluate(&data, &config).unwrap().baseline;
    let noise = noise_experiment(&data, &[0.0, 0.3], &config).unwrap();
    assert_eq!(noise.baseline, base);
    assert_eq!(noise.point(0.0).unwrap(), &base);
    let sub = subsample_experiment(&data, &[1.0, 0.5], &config).unwrap();
    assert_eq!(sub.point(1.0).unwrap(), &base);
    let flip = bitflip_experiment(&data, &[0.0, 0.1], &config).unwrap();
    assert_eq!(flip.point(0.0).unwrap(), &base);
    assert_eq!(flip.curve.len(), 2);
}

#[test]
fn experiment_reports_are_stable() {
    let data = toy_data();
    let a = noise_experiment(&data, &[0.2], &toy_config()).unwrap().to_json();
    let b = noise_experiment(&data, &[0.2], &toy_config()).unwrap().to_json();
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["knob"], "noise");
    assert_eq!(v["dataset"]["rows"], 120);
}

#[test]
fn sweep_covers_each_value() {
    let data = toy_data();
    let r = hyperparam_sweep(&data, SweepAxis::Retrain, &[0, 1], &toy_config()).unwrap();
    assert_eq!(r.curve.len(), 2);
    let k2 = kfold_evaluate(&data, &PipelineConfig { clusters: 2, ..toy_config() }).unwrap();
    let sweep = hyperparam_sweep(&data, SweepAxis::Clusters, &[2], &toy_config()).unwrap();
    assert_eq!(sweep.point(2.0).unwrap(), &k2.baseline);
}

#[test]
fn out_of_range_knobs_are_config_errors() {
    let data = toy_data();
    let c = toy_config();
    for err in [
        noise_experiment(&data, &[1.5], &c).unwrap_err(),
        noise_experiment(&data, &[], &c).unwrap_err(),
        subsample_experiment(&data, &[0.0], &c).unwrap_err(),
        bitflip_experiment(&data, &[0.6], &c).unwrap_err(),
        hyperparam_sweep(&data, SweepAxis::Dim, &[1_001], &c).unwrap_err(),
        hyperparam_sweep(&data, SweepAxis::Clusters, &[0], &c).unwrap_err(),
    ] {
        assert_eq!(err.kind(), ErrorKind::Config, "{err}");
    }
}

#[test]
fn ordering_depends_on_dimension() {
    let s = SeededStream::new(0);
    let small = estimate_ordering_preservation(0.2, 0.3, 0.2, 100, 1000, &s).unwrap();
    let large = estimate_ordering_preservation(0.2, 0.3, 0.2, 10_000, 1000, &s).unwrap();
    assert!(large.mean >= 0.99, "{}", large.mean);
    assert!(small.mean < large.mean - 0.05, "{} vs {}", small.mean, large.mean);
}

#[test]
fn bundle_estimator_checks_arguments() {
    let s = SeededStream::new(0);
    assert!(estimate_bundle_distance(4, 10_000, 10, &s).is_err());
    assert!(estimate_bundle_distance(3, 500, 10, &s).is_err());
    let r = estimate_bundle_distance(7, 10_000, 50, &s).unwrap();
    assert_eq!(r.reference, 0.5 - p_of_n(7).unwrap());
    assert!(r.pass, "{r:?}");
}

/// Per-bit enumeration of all sign patterns, independent of the closed form.
#[test]
fn p_of_n_matches_enumeration() {
    for n in [1u32, 3, 5, 7, 9, 11] {
        let mut agree = 0u64;
        for pattern in 0u32..(1 << n) {
            let plus = pattern.count_ones() as i32;
            let sum = 2 * plus - n as i32;
            let first = if pattern & 1 == 1 { 1 } else { -1 };
            if sum.signum() == first {
                agree += 1;
            }
        }
        let disagreement = 1.0 - agree as f64 / f64::from(1u32 << n);
        assert_eq!(disagreement, 0.5 - p_of_n(n).unwrap(), "N = {n}");
    }
}
