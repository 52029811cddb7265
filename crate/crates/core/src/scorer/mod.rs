//! Learned arc→resource propensities and top-κ candidate filtering.
//!
//! Reference solutions become soft labels: an arc's label is the frequency
//! with which each resource was assigned to it across the references that
//! contain it. A small feedforward network ([`ScorerModel`]) or a frequency
//! table ([`FrequencyBaseline`]) turns arc features into a distribution over
//! resources, and [`top_kappa_candidates`] keeps the κ most likely admissible
//! resources per arc plus the incumbent.

mod baseline;
mod features;
mod mlp;
mod model;

use std::cmp::Ordering;
use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::betweenness::KappaAssignment;
use crate::candidates::CandidateSets;
use crate::network::{Assignment, AssignmentError, Instance};

pub use baseline::FrequencyBaseline;
pub use features::{Encoder, FeatureVector, RawFeatures, Vocab, CATEGORICAL, NUMERIC};
pub use mlp::{cross_entropy, softmax_rows, Adam, Dense, Gradients, Mlp};
pub use model::{train_scorer, EpochRecord, ScorerModel, TrainingConfig, TrainingMeta};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("reference pool is empty")]
    EmptyPool,
    #[error("training split is empty")]
    EmptyTrain,
    #[error("reference {index}: {source}")]
    Reference {
        index: usize,
        source: AssignmentError,
    },
    #[error("kappa must be at least 1")]
    Kappa,
    #[error("predictions cover {predictions} arcs but labels cover {labels}")]
    Misaligned { predictions: usize, labels: usize },
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("invalid model file: {0}")]
    Format(String),
    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), ScorerError> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0)
            || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(ScorerError::Config(format!(
                "split ratios {parts:?} must be nonnegative and sum to 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    /// Fingerprint of the instance the arc belongs to.
    pub instance: String,
    pub arc: String,
    pub features: RawFeatures,
    /// Label distribution over [`TrainingSet::resources`].
    pub label: Vec<f64>,
    pub split: Split,
}

impl Example {
    /// Index of the largest label entry, lowest index on ties.
    pub fn modal(&self) -> usize {
        argmax(&self.label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub resources: Vec<String>,
    pub examples: Vec<Example>,
}

impl TrainingSet {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Example> + '_ {
        self.examples.iter().filter(move |e| e.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    pub fn labels(&self, split: Split) -> Vec<Vec<f64>> {
        self.split(split).map(|e| e.label.clone()).collect()
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Resource indices ranked by descending score; ties by ascending index.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// Label frequencies and a stratified 60/20/20 split.
pub fn build_training_set<'a, I>(refs: I, seed: u64) -> Result<TrainingSet, ScorerError>
where
    I: IntoIterator<Item = (&'a Instance, &'a Assignment)>,
{
    build_training_set_with(refs, seed, SplitRatios::default())
}

pub fn build_training_set_with<'a, I>(
    refs: I,
    seed: u64,
    ratios: SplitRatios,
) -> Result<TrainingSet, ScorerError>
where
    I: IntoIterator<Item = (&'a Instance, &'a Assignment)>,
{
    ratios.validate()?;
    let mut resources: Vec<String> = Vec::new();
    let mut res_pos: HashMap<String, usize> = HashMap::new();
    // (fingerprint, arc id) -> (features, per-resource counts, references)
    let mut keys: Vec<(String, String)> = Vec::new();
    let mut rows: HashMap<(String, String), (RawFeatures, Vec<u64>, u64)> = HashMap::new();
    let mut fingerprints: HashMap<*const Instance, String> = HashMap::new();
    let mut any = false;
    for (index, (inst, phi)) in refs.into_iter().enumerate() {
        any = true;
        phi.validate(inst)
            .map_err(|source| ScorerError::Reference { index, source })?;
        for r in inst.resources() {
            if !res_pos.contains_key(r) {
                res_pos.insert(r.clone(), resources.len());
                resources.push(r.clone());
            }
        }
        let fp = fingerprints
            .entry(inst as *const Instance)
            .or_insert_with(|| inst.fingerprint())
            .clone();
        for a in 0..inst.num_arcs() {
            let key = (fp.clone(), inst.arc(a).id.clone());
            let entry = rows.entry(key.clone()).or_insert_with(|| {
                keys.push(key);
                (RawFeatures::of_arc(inst, a), Vec::new(), 0)
            });
            let r = res_pos[&inst.resources()[phi.get(a)]];
            if entry.1.len() <= r {
                entry.1.resize(r + 1, 0);
            }
            entry.1[r] += 1;
            entry.2 += 1;
        }
    }
    if !any {
        return Err(ScorerError::EmptyPool);
    }
    let width = resources.len();
    let mut examples: Vec<Example> = keys
        .into_iter()
        .map(|key| {
            let (features, counts, total) = rows.remove(&key).expect("key was recorded");
            let mut label = vec![0.0; width];
            for (r, &c) in counts.iter().enumerate() {
                label[r] = c as f64 / total as f64;
            }
            Example {
                instance: key.0,
                arc: key.1,
                features,
                label,
                split: Split::Test,
            }
        })
        .collect();
    stratify(&mut examples, width, seed, ratios);
    Ok(TrainingSet {
        resources,
        examples,
    })
}

fn stratify(examples: &mut [Example], width: usize, seed: u64, ratios: SplitRatios) {
    let mut strata: Vec<Vec<usize>> = vec![Vec::new(); width.max(1)];
    for (i, e) in examples.iter().enumerate() {
        strata[e.modal()].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for mut members in strata {
        members.shuffle(&mut rng);
        let n = members.len() as f64;
        let n_train = (n * ratios.train).round() as usize;
        let n_val = ((n * ratios.validation).round() as usize).min(members.len() - n_train);
        for (k, &i) in members.iter().enumerate() {
            examples[i].split = if k < n_train {
                Split::Train
            } else if k < n_train + n_val {
                Split::Validation
            } else {
                Split::Test
            };
        }
    }
}

/// Share of label mass captured by each row's κ highest-ranked predictions.
///
/// Rows with κ at least their width capture their whole mass exactly, so the
/// metric is 1.0 at κ = |R| and nondecreasing in κ. Returns 0 for empty input.
pub fn top_kappa_metric(
    predictions: &[Vec<f64>],
    labels: &[Vec<f64>],
    kappa: usize,
) -> Result<f64, ScorerError> {
    if kappa < 1 {
        return Err(ScorerError::Kappa);
    }
    if predictions.len() != labels.len() {
        return Err(ScorerError::Misaligned {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let mut captured = 0.0;
    let mut total = 0.0;
    for (p, y) in predictions.iter().zip(labels) {
        if p.len() != y.len() {
            return Err(ScorerError::Dimension {
                what: "prediction row",
                expected: y.len(),
                got: p.len(),
            });
        }
        let row: f64 = y.iter().sum();
        let mut excluded = vec![false; y.len()];
        for &r in ranking(p).iter().skip(kappa) {
            excluded[r] = true;
        }
        // summed in index order so that a smaller excluded set never rounds up
        let missed: f64 = y
            .iter()
            .zip(&excluded)
            .filter(|(_, &x)| x)
            .map(|(v, _)| *v)
            .sum();
        captured += row - missed;
        total += row;
    }
    Ok(if total > 0.0 { captured / total } else { 0.0 })
}

/// Anything that maps arc features to a distribution over its resources.
pub trait Predictor: Sync {
    /// Resource ids indexing the prediction vector.
    fn resources(&self) -> &[String];
    fn predict(&self, features: &RawFeatures) -> Vec<f64>;
}

/// Predictions for every example of `split`, aligned to `ts.resources`.
pub fn predict_split<P: Predictor + ?Sized>(
    predictor: &P,
    ts: &TrainingSet,
    split: Split,
) -> Vec<Vec<f64>> {
    let map = resource_map(predictor.resources(), &ts.resources);
    let examples: Vec<&Example> = ts.split(split).collect();
    examples
        .par_iter()
        .map(|e| remap(&predictor.predict(&e.features), &map))
        .collect()
}

/// TOP_κ of `predictor` on `split` for each κ in `kappas`.
pub fn top_kappa_table<P: Predictor + ?Sized>(
    predictor: &P,
    ts: &TrainingSet,
    split: Split,
    kappas: &[usize],
) -> Result<Vec<(usize, f64)>, ScorerError> {
    let preds = predict_split(predictor, ts, split);
    let labels = ts.labels(split);
    kappas
        .iter()
        .map(|&k| Ok((k, top_kappa_metric(&preds, &labels, k)?)))
        .collect()
}

/// For each target resource id, its position among `source` ids.
fn resource_map(source: &[String], target: &[String]) -> Vec<Option<usize>> {
    target
        .iter()
        .map(|t| source.iter().position(|s| s == t))
        .collect()
}

fn remap(pred: &[f64], map: &[Option<usize>]) -> Vec<f64> {
    map.iter()
        .map(|m| m.and_then(|i| pred.get(i).copied()).unwrap_or(0.0))
        .collect()
}

/// Per arc: the `kappa[a]` admissible resources with the highest predicted
/// probability (ties by resource order), plus the initial resource.
pub fn top_kappa_candidates<P: Predictor + ?Sized>(
    inst: &Instance,
    predictor: &P,
    kappas: &KappaAssignment,
) -> CandidateSets {
    let map = resource_map(predictor.resources(), inst.resources());
    let sets: Vec<Vec<usize>> = (0..inst.num_arcs())
        .into_par_iter()
        .map(|a| {
            let arc = inst.arc(a);
            let pred = remap(&predictor.predict(&RawFeatures::of_arc(inst, a)), &map);
            let scores: Vec<f64> = arc.candidates.iter().map(|&r| pred[r]).collect();
            let k = kappas.kappa.get(a).copied().unwrap_or(1) as usize;
            let mut set: Vec<usize> = ranking(&scores)
                .into_iter()
                .take(k)
                .map(|i| arc.candidates[i])
                .collect();
            set.push(arc.initial);
            set
        })
        .collect();
    CandidateSets::new(inst, sets).expect("subsets of admissible resources with the incumbent")
}
