//! Committees of CNNs with sampled structure, combined by majority vote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::SentenceMatrix;
use crate::error::{Error, Result};
use crate::nn::{train_cnn, CnnConfig, CnnModel, Scalar};
use crate::rng::{self, stream};

/// Sentence matrices (or anything else) keyed by embedding dimension.
pub type PerDim<V> = BTreeMap<usize, V>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub member_count: usize,
    /// Inclusive `[low, high]`.
    pub filter_count_range: [usize; 2],
    /// Inclusive `[low, high]`.
    pub filter_width_range: [usize; 2],
    pub embedding_dims: Vec<usize>,
    pub base_config: CnnConfig,
    pub seed: u64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            member_count: 20,
            filter_count_range: [200, 400],
            filter_width_range: [4, 8],
            embedding_dims: vec![200, 300],
            base_config: CnnConfig::default(),
            seed: 1,
        }
    }
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.member_count == 0 {
            return fail("member_count must be at least 1");
        }
        let [f0, f1] = self.filter_count_range;
        let [w0, w1] = self.filter_width_range;
        if f0 == 0 || f0 > f1 {
            return fail("filter_count_range must be a non-empty range of positive counts");
        }
        if w0 == 0 || w0 > w1 {
            return fail("filter_width_range must be a non-empty range of positive widths");
        }
        if self.embedding_dims.is_empty() || self.embedding_dims.contains(&0) {
            return fail("embedding_dims must list at least one positive dimension");
        }
        self.base_config.validate()
    }

    /// Distinct embedding dimensions in ascending order.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = self.embedding_dims.clone();
        dims.sort_unstable();
        dims.dedup();
        dims
    }
}

/// Training seed of member `index`.
pub fn member_seed(spec_seed: u64, index: usize) -> u64 {
    rng::derive_seed(rng::derive_seed(spec_seed, stream::MEMBER), index as u64)
}

/// One config per member. Filter count, filter width and embedding dimension
/// are drawn independently and uniformly; all other fields come from the base.
pub fn sample_configs(spec: &EnsembleSpec) -> Result<Vec<CnnConfig>> {
    spec.validate()?;
    let mut r = rng::seeded(rng::derive_seed(spec.seed, stream::MEMBER ^ 1));
    let [f0, f1] = spec.filter_count_range;
    let [w0, w1] = spec.filter_width_range;
    let dims = spec.dims();
    Ok((0..spec.member_count)
        .map(|i| CnnConfig {
            filter_count: r.random_range(f0..=f1),
            filter_width: r.random_range(w0..=w1),
            embedding_dim: *dims.choose(&mut r).expect("dims is non-empty"),
            seed: member_seed(spec.seed, i),
            ..spec.base_config.clone()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Committee<T = f64> {
    pub members: Vec<CnnModel<T>>,
    pub spec: EnsembleSpec,
}

impl<T: Scalar> Committee<T> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims: Vec<_> = self
            .members
            .iter()
            .map(|m| m.config.embedding_dim)
            .collect();
        dims.sort_unstable();
        dims.dedup();
        dims
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))
}

/// Trains the listed `(member index, config)` pairs on `workers` threads.
/// `on_done` runs as each member finishes (used to persist progress). The
/// first failure aborts the whole call.
pub fn train_members<T, F>(
    configs: &[(usize, CnnConfig)],
    train: &PerDim<Vec<(SentenceMatrix<T>, usize)>>,
    workers: usize,
    on_done: F,
) -> Result<Vec<CnnModel<T>>>
where
    T: Scalar,
    F: Fn(usize, &CnnModel<T>) -> Result<()> + Sync,
{
    pool(workers)?.install(|| {
        configs
            .par_iter()
            .map(|(index, config)| {
                let data = train
                    .get(&config.embedding_dim)
                    .ok_or(Error::MissingDimension(config.embedding_dim))?;
                let model = train_cnn(config, data, None)?.model;
                on_done(*index, &model)?;
                Ok(model)
            })
            .collect()
    })
}

/// Samples and trains every member on the full training split.
pub fn train_committee<T: Scalar>(
    spec: &EnsembleSpec,
    train: &PerDim<Vec<(SentenceMatrix<T>, usize)>>,
    workers: usize,
) -> Result<Committee<T>> {
    let configs: Vec<_> = sample_configs(spec)?.into_iter().enumerate().collect();
    let members = train_members(&configs, train, workers, |_, _| Ok(()))?;
    Ok(Committee {
        members,
        spec: spec.clone(),
    })
}

/// Votes per class.
pub fn vote_tally(votes: &[usize], class_count: usize) -> Vec<usize> {
    let mut tally = vec![0; class_count];
    for &v in votes {
        tally[v] += 1;
    }
    tally
}

/// Class with the most votes. Ties go to the tied class with the largest
/// probability summed over all members, then to the lowest index.
pub fn majority_vote<C: AsRef<[f64]>>(votes: &[usize], confidences: &[C]) -> usize {
    assert!(!votes.is_empty(), "majority vote needs at least one vote");
    assert_eq!(votes.len(), confidences.len());
    let class_count = confidences
        .iter()
        .map(|c| c.as_ref().len())
        .chain(votes.iter().map(|&v| v + 1))
        .max()
        .unwrap_or(0);
    let tally = vote_tally(votes, class_count);
    let top = *tally.iter().max().expect("at least one class");
    let tied: Vec<usize> = (0..class_count).filter(|&c| tally[c] == top).collect();
    if tied.len() == 1 {
        return tied[0];
    }
    let summed = |c: usize| -> f64 {
        confidences
            .iter()
            .map(|p| p.as_ref().get(c).copied().unwrap_or(0.0))
            .sum()
    };
    let mut best = tied[0];
    let mut best_sum = summed(best);
    for &c in &tied[1..] {
        let s = summed(c);
        if s > best_sum {
            best = c;
            best_sum = s;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommitteePrediction {
    pub class: usize,
    pub tally: Vec<usize>,
    pub member_probabilities: Vec<Vec<f64>>,
}

fn argmax(p: &[f64]) -> usize {
    crate::nn::argmax_row(p.iter().copied())
}

/// Committee prediction for one review, given its sentence matrix in every
/// dimension the members use.
pub fn predict<T: Scalar>(
    committee: &Committee<T>,
    inputs: &PerDim<&SentenceMatrix<T>>,
) -> Result<CommitteePrediction> {
    let member_probabilities = committee
        .members
        .iter()
        .map(|member| {
            let d = member.config.embedding_dim;
            let m = inputs.get(&d).ok_or(Error::MissingDimension(d))?;
            let probs = member.predict_proba(&[m])?;
            Ok(probs
                .row(0)
                .iter()
                .map(|p| p.as_f64())
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let votes: Vec<usize> = member_probabilities.iter().map(|p| argmax(p)).collect();
    let class_count = committee
        .members
        .first()
        .map_or(0, |m| m.config.class_count);
    Ok(CommitteePrediction {
        class: majority_vote(&votes, &member_probabilities),
        tally: vote_tally(&votes, class_count),
        member_probabilities,
    })
}

/// Every member's `(n, classes)` probability matrix over a whole test set.
pub fn member_outputs<T: Scalar>(
    committee: &Committee<T>,
    inputs: &PerDim<Vec<SentenceMatrix<T>>>,
    workers: usize,
) -> Result<Vec<Array2<f64>>> {
    pool(workers)?.install(|| {
        committee
            .members
            .par_iter()
            .map(|member| {
                let d = member.config.embedding_dim;
                let data = inputs.get(&d).ok_or(Error::MissingDimension(d))?;
                let refs: Vec<_> = data.iter().collect();
                Ok(member.predict_proba(&refs)?.mapv(|p| p.as_f64()))
            })
            .collect()
    })
}

/// Majority-vote predictions of the `members` subset from precomputed outputs.
pub fn vote_subset(outputs: &[Array2<f64>], members: &[usize]) -> Vec<usize> {
    let n = outputs.first().map_or(0, |o| o.nrows());
    (0..n)
        .map(|i| {
            let probs: Vec<&[f64]> = members
                .iter()
                .map(|&m| {
                    outputs[m]
                        .row(i)
                        .to_slice()
                        .expect("probability rows are contiguous")
                })
                .collect();
            let votes: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
            majority_vote(&votes, &probs)
        })
        .collect()
}

/// One committee member as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberEntry {
    pub index: usize,
    /// Model file, relative to the manifest's directory.
    pub path: PathBuf,
    pub config: CnnConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitteeManifest {
    pub spec: EnsembleSpec,
    /// Completed members in index order.
    pub members: Vec<MemberEntry>,
}

impl CommitteeManifest {
    pub fn new(spec: EnsembleSpec) -> Self {
        CommitteeManifest {
            spec,
            members: Vec::new(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.members.len() == self.spec.member_count
    }

    pub fn record(&mut self, entry: MemberEntry) {
        self.members.retain(|m| m.index != entry.index);
        self.members.push(entry);
        self.members.sort_by_key(|m| m.index);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n").map_err(|e| Error::unreadable(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::unreadable(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Loads every member model. Fails naming the first missing file.
    pub fn load<T: Scalar>(&self, dir: &Path) -> Result<Committee<T>> {
        let members = self
            .members
            .iter()
            .map(|entry| {
                let path = dir.join(&entry.path);
                let file = std::fs::File::open(&path).map_err(|e| Error::unreadable(&path, e))?;
                let model = CnnModel::<f64>::read_from(std::io::BufReader::new(file))?;
                Ok(model.cast())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Committee {
            members,
            spec: self.spec.clone(),
        })
    }
}
