//! Empirical-frequency predictor keyed by lane and size class.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Predictor, RawFeatures, Split, TrainingSet};
use crate::network::{Assignment, Instance};

type Key = (String, String, String);

/// Resource frequencies per (origin, destination, size class), backing off
/// to the global frequencies for unseen keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBaseline {
    resources: Vec<String>,
    by_key: BTreeMap<Key, Vec<f64>>,
    global: Vec<f64>,
}

fn key(f: &RawFeatures) -> Key {
    (
        f.origin.clone(),
        f.destination.clone(),
        f.size_class.clone(),
    )
}

impl FrequencyBaseline {
    /// Count the assigned resource of every arc in every reference.
    pub fn from_references<'a, I>(refs: I) -> Self
    where
        I: IntoIterator<Item = (&'a Instance, &'a Assignment)>,
    {
        let mut b = FrequencyBaseline {
            resources: Vec::new(),
            by_key: BTreeMap::new(),
            global: Vec::new(),
        };
        for (inst, phi) in refs {
            for r in inst.resources() {
                if !b.resources.contains(r) {
                    b.resources.push(r.clone());
                }
            }
            let n = b.resources.len();
            b.global.resize(n, 0.0);
            for a in 0..inst.num_arcs() {
                let r_id = &inst.resources()[phi.get(a)];
                let r = b
                    .resources
                    .iter()
                    .position(|x| x == r_id)
                    .expect("registered");
                let counts = b
                    .by_key
                    .entry(key(&RawFeatures::of_arc(inst, a)))
                    .or_default();
                counts.resize(n, 0.0);
                counts[r] += 1.0;
                b.global[r] += 1.0;
            }
        }
        b
    }

    /// Sum the label distributions of one split.
    pub fn from_training_set(ts: &TrainingSet, split: Split) -> Self {
        let n = ts.resources.len();
        let mut by_key: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
        let mut global = vec![0.0; n];
        for e in ts.split(split) {
            let counts = by_key
                .entry(key(&e.features))
                .or_insert_with(|| vec![0.0; n]);
            for (r, &v) in e.label.iter().enumerate() {
                counts[r] += v;
                global[r] += v;
            }
        }
        FrequencyBaseline {
            resources: ts.resources.clone(),
            by_key,
            global,
        }
    }

    pub fn keys(&self) -> usize {
        self.by_key.len()
    }
}

fn normalized(counts: &[f64], n: usize) -> Option<Vec<f64>> {
    let total: f64 = counts.iter().sum();
    (total > 0.0).then(|| {
        let mut p: Vec<f64> = counts.iter().map(|c| c / total).collect();
        p.resize(n, 0.0);
        p
    })
}

impl Predictor for FrequencyBaseline {
    fn resources(&self) -> &[String] {
        &self.resources
    }

    fn predict(&self, features: &RawFeatures) -> Vec<f64> {
        let n = self.resources.len();
        self.by_key
            .get(&key(features))
            .and_then(|c| normalized(c, n))
            .or_else(|| normalized(&self.global, n))
            .unwrap_or_else(|| vec![1.0 / n.max(1) as f64; n])
    }
}
