// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::hv::{fnv1a, splitmix64, Accumulator, Hypervector, OpCounts, SeededStream};

pub const DEFAULT_CLUSTERS: usize = 4;
pub const DEFAULT_ITERATIONS: usize = 10;
pub const DEFAULT_RETRAIN_EPOCHS: usize = 2;

/// Which training samples count as errors during retraining.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RetrainMode {
    /// Nearest prototype belongs to another class.
    #[default]
    ClassLevel,
    /// Nearest prototype is anything other than the sample's home cluster.
    ClusterLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Clusters per class (K).
    pub clusters: usize,
    /// Clustering iterations (T).
    pub iterations: usize,
    /// Retraining epochs (R).
    pub retrain_epochs: usize,
    pub seed: u64,
    pub retrain_mode: RetrainMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            clusters: DEFAULT_CLUSTERS,
            iterations: DEFAULT_ITERATIONS,
            retrain_epochs: DEFAULT_RETRAIN_EPOCHS,
            seed: 0,
            retrain_mode: RetrainMode::ClassLevel,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 {
            return Err(Error::Config("clusters per class must be at least 1".into()));
        }
        Ok(())
    }
}

/// One within-class cluster: its running sums and the thresholded prototype.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub(crate) class: usize,
    pub(crate) index: usize,
    pub(crate) acc: Accumulator,
    pub(crate) prototype: Hypervector,
    pub(crate) members: usize,
}

impl Cluster {
    pub fn class(&self) -> usize {
        self.class
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn accumulator(&self) -> &Accumulator {
        &self.acc
    }

    pub fn prototype(&self) -> &Hypervector {
        &self.prototype
    }

    pub fn members(&self) -> usize {
        self.members
    }
}

/// Result of a nearest-prototype search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub cluster: usize,
    pub distance: f64,
}

/// Tie-breaking context of cluster `(class, index)`.
pub fn cluster_context(class: usize, index: usize) -> u64 {
    splitmix64(fnv1a(b"cluster") ^ ((class as u64) << 32 | index as u64))
}

/// The trained classifier: `J` classes with up to `K` clusters each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterModel {
    pub(crate) dim: usize,
    pub(crate) labels: Vec<String>,
    pub(crate) classes: Vec<Vec<Cluster>>,
    pub(crate) config: TrainConfig,
    pub(crate) ties: SeededStream,
}

/// Tie stream for prototypes of a model seeded with `seed`.
pub(crate) fn prototype_ties(seed: u64) -> SeededStream {
    SeededStream::new(seed).split("cluster-ties", 0)
}

impl ClusterModel {
    /// Reassemble a model from stored accumulators; prototypes are
    /// regenerated by majority under the model's keyed tie stream.
    pub fn from_accumulators(
        dim: usize,
        labels: Vec<String>,
        config: TrainConfig,
        classes: Vec<Vec<(Accumulator, usize)>>,
    ) -> Result<Self> {
        config.validate()?;
        check_label_table(&labels)?;
        check_dims(labels.len(), classes.len())?;
        let ties = prototype_ties(config.seed);
        let classes = classes
            .into_iter()
            .enumerate()
            .map(|(j, clusters)| {
                if clusters.is_empty() || clusters.len() > config.clusters {
                    return Err(Error::Corrupt(format!(
                        "class {j} has {} clusters (K = {})",
                        clusters.len(),
                        config.clusters
                    )));
                }
                clusters
                    .into_iter()
                    .enumerate()
                    .map(|(k, (acc, members))| {
                        check_dims(dim, acc.dim())?;
                        let prototype = acc.majority(&ties, cluster_context(j, k));
                        Ok(Cluster {
                            class: j,
                            index: k,
                            acc,
                            prototype,
                            members,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            dim,
            labels,
            classes,
            config,
            ties,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_clusters(&self, class: usize) -> &[Cluster] {
        &self.classes[class]
    }

    pub fn clusters(&self) -> impl Iterator<Item = &Cluster> {
        self.classes.iter().flatten()
    }

    pub fn num_prototypes(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }

    /// True when every prototype equals the majority of its accumulator.
    pub fn prototypes_consistent(&self) -> bool {
        self.clusters().all(|c| {
            c.acc.majority(&self.ties, cluster_context(c.class, c.index)) == c.prototype
        })
    }

    pub(crate) fn refresh_prototype(&mut self, class: usize, index: usize) {
        let c = &mut self.classes[class][index];
        c.prototype = c.acc.majority(&self.ties, cluster_context(class, index));
    }

    /// Nearest prototype over all classes; ties go to the smallest
    /// `(class, cluster)`.
    pub fn classify(&self, sample: &Hypervector) -> Result<Prediction> {
        self.classify_counted(sample, &mut OpCounts::default())
    }

    pub fn classify_counted(&self, sample: &Hypervector, ops: &mut OpCounts) -> Result<Prediction> {
        check_dims(self.dim, sample.dim())?;
        let mut best: Option<(usize, usize, usize)> = None;
        for c in self.clusters() {
            let d = sample.distance_unchecked(&c.prototype, ops);
            if best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, c.class, c.index));
            }
        }
        let (d, class, cluster) = best.expect("model has at least one prototype");
        Ok(Prediction {
            class,
            cluster,
            distance: d as f64 / self.dim as f64,
        })
    }

    /// Nearest prototype within one class; ties go to the smallest index.
    pub fn nearest_cluster(&self, sample: &Hypervector, class: usize) -> Result<(usize, f64)> {
        check_dims(self.dim, sample.dim())?;
        let clusters = self.classes.get(class).ok_or_else(|| {
            Error::InvalidArgument(format!("class {class} out of range ({})", self.classes.len()))
        })?;
        let (k, d) = nearest_in(clusters.iter().map(|c| &c.prototype), sample);
        Ok((k, d as f64 / self.dim as f64))
    }

    /// Copy of the model whose prototypes have each had `round(p * D)` bits
    /// negated, simulating storage faults. Accumulators are left untouched, so
    /// the copy no longer satisfies [`prototypes_consistent`](Self::prototypes_consistent).
    pub fn with_flipped_prototypes(&self, p: f64, stream: &SeededStream) -> Result<Self> {
        let mut out = self.clone();
        for c in out.classes.iter_mut().flatten() {
            let mut s = stream.split_key(cluster_context(c.class, c.index), 0);
            c.prototype = c.prototype.flip_bits(p, &mut s)?;
        }
        Ok(out)
    }
}

/// Index and bit distance of the nearest of `prototypes`, smallest index on
/// ties.
pub(crate) fn nearest_in<'a, I>(prototypes: I, sample: &Hypervector) -> (usize, usize)
where
    I: IntoIterator<Item = &'a Hypervector>,
{
    let mut ops = OpCounts::default();
    let mut best = (0, usize::MAX);
    for (k, p) in prototypes.into_iter().enumerate() {
        let d = sample.distance_unchecked(p, &mut ops);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

pub(crate) fn check_label_table(labels: &[String]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::TrainingData("no classes".into()));
    }
    let mut sorted: Vec<&String> = labels.iter().collect();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::TrainingData("duplicate class label".into()));
    }
    Ok(())
}
