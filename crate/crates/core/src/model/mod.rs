// SPDX-License-Identifier: Apache-2.0

//! Class-wise hyperspace clustering, nearest-prototype classification and
//! retraining.

mod cluster;
mod train;

pub use cluster::{
    cluster_context, Cluster, ClusterModel, Prediction, RetrainMode, TrainConfig,
    DEFAULT_CLUSTERS, DEFAULT_ITERATIONS, DEFAULT_RETRAIN_EPOCHS,
};
pub use train::{train, TrainOutcome};

impl ClusterModel {
    /// Stream whose keyed bits break majority ties in this model's prototypes.
    pub fn tie_stream(&self) -> &crate::hv::SeededStream {
        &self.ties
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hv::{Accumulator, Hypervector, SeededStream};
    use crate::Error;

    fn random_set(n: usize, dim: usize, seed: u64) -> Vec<Hypervector> {
        let mut s = SeededStream::new(seed);
        (0..n).map(|_| Hypervector::random(dim, &mut s).unwrap()).collect()
    }

    fn labels2() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    fn config(k: usize, t: usize, r: usize) -> TrainConfig {
        TrainConfig {
            clusters: k,
            iterations: t,
            retrain_epochs: r,
            seed: 17,
            retrain_mode: RetrainMode::ClassLevel,
        }
    }

    #[test]
    fn single_cluster_is_class_bundle() {
        let samples = random_set(9, 500, 1);
        let labels = vec![0, 1, 0, 1, 0, 1, 0, 1, 0];
        let (model, homes) =
            ClusterModel::init_clusters(&samples, &labels, labels2(), &config(1, 0, 0)).unwrap();
        assert!(homes.iter().all(|&k| k == 0));
        for j in 0..2 {
            let mut acc = Accumulator::new(500).unwrap();
            for (s, &l) in samples.iter().zip(&labels) {
                if l == j {
                    acc.add(s).unwrap();
                }
            }
            let expected = acc.majority(model.tie_stream(), cluster_context(j, 0));
            assert_eq!(model.class_clusters(j)[0].prototype(), &expected);
        }
    }

    #[test]
    fn init_is_deterministic_partition() {
        let samples = random_set(10, 256, 2);
        let labels = vec![0; 10];
        let table = vec!["only".to_string()];
        let (a, ha) = ClusterModel::init_clusters(&samples, &labels, table.clone(), &config(3, 0, 0)).unwrap();
        let (b, hb) = ClusterModel::init_clusters(&samples, &labels, table, &config(3, 0, 0)).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
        let total: usize = a.class_clusters(0).iter().map(Cluster::members).sum();
        assert_eq!(total, 10);
        assert!(a.class_clusters(0).iter().all(|c| c.members() > 0));
        assert!(a.prototypes_consistent());
    }

    #[test]
    fn small_class_gets_fewer_clusters() {
        let samples = random_set(5, 128, 3);
        let labels = vec![0, 0, 1, 1, 1];
        let (m, _) = ClusterModel::init_clusters(&samples, &labels, labels2(), &config(4, 0, 0)).unwrap();
        assert_eq!(m.class_clusters(0).len(), 2);
        assert_eq!(m.class_clusters(1).len(), 3);
        assert!(m.clusters().all(|c| c.members() == 1));
    }

    #[test]
    fn empty_class_rejected() {
        let samples = random_set(3, 64, 4);
        let labels = vec![0, 0, 0];
        assert!(matches!(
            ClusterModel::init_clusters(&samples, &labels, labels2(), &config(2, 0, 0)),
            Err(Error::TrainingData(_))
        ));
        assert!(ClusterModel::init_clusters(&samples, &labels, vec!["x".into()], &config(0, 0, 0)).is_err());
    }

    #[test]
    fn zero_iterations_leave_init() {
        let samples = random_set(20, 256, 5);
        let labels = vec![0; 20];
        let table = vec!["c".to_string()];
        let (init, homes) = ClusterModel::init_clusters(&samples, &labels, table.clone(), &config(3, 0, 0)).unwrap();
        let out = train(&samples, &labels, table, &config(3, 0, 0)).unwrap();
        assert_eq!(out.model, init);
        assert_eq!(out.homes, homes);
    }

    fn blobs(dim: usize, per_blob: usize, noise: f64, seed: u64) -> (Vec<Hypervector>, Vec<usize>) {
        let mut s = SeededStream::new(seed);
        let centers = [
            Hypervector::random(dim, &mut s).unwrap(),
            Hypervector::random(dim, &mut s).unwrap(),
        ];
        let mut samples = Vec::new();
        let mut blob = Vec::new();
        for i in 0..2 * per_blob {
            let c = i % 2;
            samples.push(centers[c].flip_bits(noise, &mut s).unwrap());
            blob.push(c);
        }
        (samples, blob)
    }

    #[test]
    fn clustering_separates_blobs_and_reaches_fixed_point() {
        let (samples, blob) = blobs(2000, 15, 0.1, 6);
        let labels = vec![0; samples.len()];
        let out = train(&samples, &labels, vec!["x".into()], &config(2, 10, 0)).unwrap();
        // purity: each cluster holds one blob
        for k in 0..2 {
            let mut seen: Vec<usize> = out.homes.iter().zip(&blob).filter(|(&h, _)| h == k).map(|(_, &b)| b).collect();
            seen.dedup();
            assert_eq!(seen.len(), 1, "cluster {k} mixes blobs");
        }
        assert!(out.iterations_run[0] < 10);
        for (s, &h) in samples.iter().zip(&out.homes) {
            let (k, _) = out.model.nearest_cluster(s, 0).unwrap();
            assert_eq!(k, h);
            let own = s.hamming(out.model.class_clusters(0)[h].prototype()).unwrap();
            for c in out.model.class_clusters(0) {
                assert!(own <= s.hamming(c.prototype()).unwrap());
            }
        }
        assert!(out.model.prototypes_consistent());
    }

    #[test]
    fn classify_exact_prototype_and_ties() {
        let samples = random_set(12, 512, 7);
        let labels: Vec<usize> = (0..12).map(|i| i % 2).collect();
        let out = train(&samples, &labels, labels2(), &config(2, 5, 0)).unwrap();
        for c in out.model.clusters() {
            let p = out.model.classify(c.prototype()).unwrap();
            assert_eq!((p.class, p.cluster, p.distance), (c.class(), c.index(), 0.0));
        }
        let wrong = Hypervector::random(100, &mut SeededStream::new(0)).unwrap();
        assert!(out.model.classify(&wrong).is_err());
    }

    #[test]
    fn equidistant_prototypes_pick_smallest_index() {
        // two clusters whose prototypes are complements: every probe of
        // balanced distance ties
        let a = Hypervector::from_bipolar(&[1, 1, 1, 1]).unwrap();
        let b = a.negate();
        let samples = vec![a.clone(), b.clone()];
        let (model, _) =
            ClusterModel::init_clusters(&samples, &[0, 0], vec!["x".into()], &config(2, 0, 0)).unwrap();
        let probe = Hypervector::from_bipolar(&[1, 1, -1, -1]).unwrap();
        assert_eq!(model.nearest_cluster(&probe, 0).unwrap(), (0, 0.5));
        assert_eq!(model.classify(&probe).unwrap().cluster, 0);
    }

    #[test]
    fn k1_r0_is_standard_hdc() {
        let samples = random_set(30, 1000, 8);
        let labels: Vec<usize> = (0..30).map(|i| i % 2).collect();
        let out = train(&samples, &labels, labels2(), &config(1, 10, 0)).unwrap();
        assert_eq!(out.model.num_prototypes(), 2);
        for j in 0..2 {
            let members = samples.iter().zip(&labels).filter(|(_, &l)| l == j).map(|(s, _)| s);
            let bundle = crate::hv::bundle(members, out.model.tie_stream(), cluster_context(j, 0)).unwrap();
            assert_eq!(out.model.class_clusters(j)[0].prototype(), &bundle);
        }
    }

    #[test]
    fn retrain_without_errors_is_noop() {
        let (samples, blob) = blobs(1000, 10, 0.05, 9);
        let out = train(&samples, &blob, labels2(), &config(2, 5, 0)).unwrap();
        let mut model = out.model.clone();
        let errors = model.retrain_epoch(&samples, &blob, &out.homes).unwrap();
        assert_eq!(errors, 0);
        assert_eq!(model, out.model);
    }

    #[test]
    fn single_error_moves_two_accumulators() {
        let (mut samples, mut labels) = blobs(1000, 10, 0.05, 10);
        // a class-0 sample sitting inside blob 1
        let intruder = samples[1].flip_bits(0.02, &mut SeededStream::new(1)).unwrap();
        samples.push(intruder.clone());
        labels.push(0);
        let out = train(&samples, &labels, labels2(), &config(1, 3, 0)).unwrap();
        let before = out.model.clone();
        assert_eq!(before.classify(&intruder).unwrap().class, 1);
        let mut after = before.clone();
        let errors = after.retrain_epoch(&samples, &labels, &out.homes).unwrap();
        assert_eq!(errors, 1);
        let changed: Vec<(usize, usize)> = before
            .clusters()
            .zip(after.clusters())
            .filter(|(a, b)| a.accumulator() != b.accumulator())
            .map(|(a, _)| (a.class(), a.index()))
            .collect();
        assert_eq!(changed, vec![(0, 0), (1, 0)]);
        let bits = intruder.to_bipolar();
        let d0: Vec<i32> = after.class_clusters(0)[0].accumulator().counts().iter()
            .zip(before.class_clusters(0)[0].accumulator().counts()).map(|(a, b)| a - b).collect();
        let d1: Vec<i32> = after.class_clusters(1)[0].accumulator().counts().iter()
            .zip(before.class_clusters(1)[0].accumulator().counts()).map(|(a, b)| a - b).collect();
        assert!(d0.iter().zip(&bits).all(|(&d, &b)| d == i32::from(b)));
        assert!(d1.iter().zip(&bits).all(|(&d, &b)| d == -i32::from(b)));
        assert!(after.prototypes_consistent());
    }

    #[test]
    fn cluster_level_mode_counts_wrong_cluster() {
        let (samples, blob) = blobs(1000, 10, 0.05, 11);
        let labels = vec![0; samples.len()];
        let mut cfg = config(2, 0, 0);
        cfg.retrain_mode = RetrainMode::ClusterLevel;
        let out = train(&samples, &labels, vec!["x".into()], &cfg).unwrap();
        let mut m = out.model.clone();
        // random init mixes blobs, so some samples sit nearer the other cluster
        let errors = m.retrain_epoch(&samples, &labels, &out.homes).unwrap();
        assert!(errors > 0);
        let mut class_level = out.model.clone();
        class_level.config.retrain_mode = RetrainMode::ClassLevel;
        assert_eq!(class_level.retrain_epoch(&samples, &labels, &out.homes).unwrap(), 0);
        let _ = blob;
    }

    #[test]
    fn flipped_prototypes_leave_accumulators() {
        let samples = random_set(10, 1000, 12);
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let out = train(&samples, &labels, labels2(), &config(2, 2, 0)).unwrap();
        let flipped = out.model.with_flipped_prototypes(0.2, &SeededStream::new(3)).unwrap();
        for (a, b) in out.model.clusters().zip(flipped.clusters()) {
            assert_eq!(a.accumulator(), b.accumulator());
            assert_eq!(a.prototype().hamming_count(b.prototype()).unwrap(), 200);
        }
        assert!(!flipped.prototypes_consistent());
        assert_eq!(out.model.with_flipped_prototypes(0.0, &SeededStream::new(3)).unwrap(), out.model);
    }
}
