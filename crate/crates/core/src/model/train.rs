// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;

use super::cluster::{
    check_label_table, cluster_context, nearest_in, prototype_ties, Cluster, ClusterModel,
    Prediction, RetrainMode, TrainConfig,
};
use crate::error::{check_dims, Error, Result};
use crate::hv::{Accumulator, Hypervector, OpCounts, SeededStream};

/// Everything [`train`] produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ClusterModel,
    /// Home cluster of every training sample after clustering.
    pub homes: Vec<usize>,
    /// Clustering iterations actually run, per class.
    pub iterations_run: Vec<usize>,
    /// Misclassified training samples at the start of each retrain epoch.
    pub retrain_errors: Vec<usize>,
}

/// Sample indices of each class, after checking labels and dimensions.
fn class_members(
    samples: &[Hypervector],
    labels: &[usize],
    num_classes: usize,
) -> Result<Vec<Vec<usize>>> {
    check_dims(samples.len(), labels.len())?;
    let dim = samples
        .first()
        .ok_or_else(|| Error::TrainingData("no training samples".into()))?
        .dim();
    let mut members = vec![Vec::new(); num_classes];
    for (i, (s, &j)) in samples.iter().zip(labels).enumerate() {
        check_dims(dim, s.dim())?;
        members
            .get_mut(j)
            .ok_or_else(|| {
                Error::TrainingData(format!("sample {i} has class {j}, only {num_classes} classes"))
            })?
            .push(i);
    }
    if let Some(j) = members.iter().position(Vec::is_empty) {
        return Err(Error::TrainingData(format!("class {j} has no training samples")));
    }
    Ok(members)
}

/// Accumulators, prototypes and member counts of one class rebuilt from its
/// membership. `homes[p]` is the cluster of `samples[members[p]]`.
fn build_clusters(
    class: usize,
    count: usize,
    samples: &[Hypervector],
    members: &[usize],
    homes: &[usize],
    ties: &SeededStream,
) -> Result<Vec<Cluster>> {
    let dim = samples[members[0]].dim();
    let mut accs = vec![Accumulator::new(dim)?; count];
    let mut sizes = vec![0usize; count];
    for (&i, &k) in members.iter().zip(homes) {
        accs[k].add(&samples[i])?;
        sizes[k] += 1;
    }
    Ok(accs
        .into_iter()
        .zip(sizes)
        .enumerate()
        .map(|(k, (acc, members))| Cluster {
            class,
            index: k,
            prototype: acc.majority(ties, cluster_context(class, k)),
            acc,
            members,
        })
        .collect())
}

/// Refill empty clusters. Each empty cluster takes the member farthest from
/// its current prototype among clusters that can spare one (smallest member
/// position on ties). Returns whether anything moved.
fn repair_empty(
    clusters: &[Cluster],
    samples: &[Hypervector],
    members: &[usize],
    homes: &mut [usize],
) -> bool {
    let mut sizes = vec![0usize; clusters.len()];
    for &k in homes.iter() {
        sizes[k] += 1;
    }
    let mut moved = false;
    let mut ops = OpCounts::default();
    for empty in 0..clusters.len() {
        if sizes[empty] > 0 {
            continue;
        }
        let donor = members
            .iter()
            .zip(homes.iter())
            .enumerate()
            .filter(|(_, (_, &k))| sizes[k] > 1)
            .map(|(p, (&i, &k))| (p, samples[i].distance_unchecked(&clusters[k].prototype, &mut ops)))
            .fold(None, |best: Option<(usize, usize)>, (p, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((p, d)),
            });
        if let Some((p, _)) = donor {
            sizes[homes[p]] -= 1;
            homes[p] = empty;
            sizes[empty] = 1;
            moved = true;
        }
    }
    moved
}

/// Alternate nearest-prototype reassignment and re-bundling for one class.
/// Returns the number of iterations run (stops early once stable).
fn run_clustering(
    clusters: &mut Vec<Cluster>,
    class: usize,
    samples: &[Hypervector],
    members: &[usize],
    homes: &mut [usize],
    iterations: usize,
    ties: &SeededStream,
) -> Result<usize> {
    for t in 0..iterations {
        let mut changed = false;
        for (&i, home) in members.iter().zip(homes.iter_mut()) {
            let (k, _) = nearest_in(clusters.iter().map(|c| &c.prototype), &samples[i]);
            if k != *home {
                *home = k;
                changed = true;
            }
        }
        if !changed {
            return Ok(t + 1);
        }
        *clusters = build_clusters(class, clusters.len(), samples, members, homes, ties)?;
        if repair_empty(clusters, samples, members, homes) {
            *clusters = build_clusters(class, clusters.len(), samples, members, homes, ties)?;
        }
    }
    Ok(iterations)
}

impl ClusterModel {
    /// Assign each sample uniformly at random to one of its class's clusters
    /// and bundle. Returns the model and every sample's home cluster.
    ///
    /// A class with fewer samples than `K` gets one cluster per sample.
    pub fn init_clusters(
        samples: &[Hypervector],
        labels: &[usize],
        label_table: Vec<String>,
        config: &TrainConfig,
    ) -> Result<(Self, Vec<usize>)> {
        config.validate()?;
        check_label_table(&label_table)?;
        let members = class_members(samples, labels, label_table.len())?;
        let ties = prototype_ties(config.seed);
        let root = SeededStream::new(config.seed);
        let mut homes = vec![0usize; samples.len()];
        let mut classes = Vec::with_capacity(members.len());
        for (j, class_members) in members.iter().enumerate() {
            let count = config.clusters.min(class_members.len());
            let mut stream = root.split("init", j as u64);
            let mut local: Vec<usize> = class_members
                .iter()
                .map(|_| stream.below(count as u64) as usize)
                .collect();
            let mut clusters = build_clusters(j, count, samples, class_members, &local, &ties)?;
            if repair_empty(&clusters, samples, class_members, &mut local) {
                clusters = build_clusters(j, count, samples, class_members, &local, &ties)?;
            }
            for (&i, &k) in class_members.iter().zip(&local) {
                homes[i] = k;
            }
            classes.push(clusters);
        }
        let model = ClusterModel {
            dim: samples[0].dim(),
            labels: label_table,
            classes,
            config: *config,
            ties,
        };
        Ok((model, homes))
    }

    /// Run up to `iterations` clustering rounds on class `class`, updating
    /// `homes` in place. Returns the number of rounds run.
    pub fn cluster_class(
        &mut self,
        samples: &[Hypervector],
        labels: &[usize],
        homes: &mut [usize],
        class: usize,
        iterations: usize,
    ) -> Result<usize> {
        check_dims(samples.len(), homes.len())?;
        let members = class_members(samples, labels, self.classes.len())?;
        let class_members = members.get(class).ok_or_else(|| {
            Error::InvalidArgument(format!("class {class} out of range"))
        })?;
        let mut local: Vec<usize> = class_members.iter().map(|&i| homes[i]).collect();
        let ties = self.ties.clone();
        let rounds = run_clustering(
            &mut self.classes[class],
            class,
            samples,
            class_members,
            &mut local,
            iterations,
            &ties,
        )?;
        for (&i, &k) in class_members.iter().zip(&local) {
            homes[i] = k;
        }
        Ok(rounds)
    }

    /// One batch retraining pass. Errors are found against the model as it
    /// stands at the start of the epoch; each error is subtracted from the
    /// cluster it wrongly matched and added to its home cluster, then touched
    /// prototypes are re-thresholded. Returns the number of errors found.
    pub fn retrain_epoch(
        &mut self,
        samples: &[Hypervector],
        labels: &[usize],
        homes: &[usize],
    ) -> Result<usize> {
        check_dims(samples.len(), labels.len())?;
        check_dims(samples.len(), homes.len())?;
        let predictions: Vec<Prediction> = samples
            .par_iter()
            .map(|s| self.classify(s))
            .collect::<Result<_>>()?;
        let mode = self.config.retrain_mode;
        let mut touched = vec![Vec::new(); self.classes.len()];
        let mut errors = 0;
        for (i, p) in predictions.iter().enumerate() {
            let (j, home) = (labels[i], homes[i]);
            let wrong = match mode {
                RetrainMode::ClassLevel => p.class != j,
                RetrainMode::ClusterLevel => (p.class, p.cluster) != (j, home),
            };
            if !wrong {
                continue;
            }
            errors += 1;
            self.classes[p.class][p.cluster].acc.subtract(&samples[i])?;
            self.classes[j]
                .get_mut(home)
                .ok_or_else(|| Error::InvalidArgument(format!("sample {i}: no cluster {home} in class {j}")))?
                .acc
                .add(&samples[i])?;
            touched[p.class].push(p.cluster);
            touched[j].push(home);
        }
        for (j, mut ks) in touched.into_iter().enumerate() {
            ks.sort_unstable();
            ks.dedup();
            for k in ks {
                self.refresh_prototype(j, k);
            }
        }
        Ok(errors)
    }
}

/// Full training: random init, per-class clustering, then retraining.
pub fn train(
    samples: &[Hypervector],
    labels: &[usize],
    label_table: Vec<String>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let (mut model, mut homes) = ClusterModel::init_clusters(samples, labels, label_table, config)?;
    let members = class_members(samples, labels, model.num_classes())?;
    let ties = model.ties.clone();
    let mut locals: Vec<Vec<usize>> = members
        .iter()
        .map(|m| m.iter().map(|&i| homes[i]).collect())
        .collect();
    let iterations_run = model
        .classes
        .par_iter_mut()
        .zip(locals.par_iter_mut())
        .zip(members.par_iter())
        .enumerate()
        .map(|(j, ((clusters, local), class_members))| {
            run_clustering(clusters, j, samples, class_members, local, config.iterations, &ties)
        })
        .collect::<Result<Vec<_>>>()?;
    for (class_members, local) in members.iter().zip(&locals) {
        for (&i, &k) in class_members.iter().zip(local) {
            homes[i] = k;
        }
    }
    let mut retrain_errors = Vec::with_capacity(config.retrain_epochs);
    for _ in 0..config.retrain_epochs {
        retrain_errors.push(model.retrain_epoch(samples, labels, &homes)?);
    }
    Ok(TrainOutcome {
        model,
        homes,
        iterations_run,
        retrain_errors,
    })
}
