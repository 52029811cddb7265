//! Arc features and their encoding.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::network::Instance;

/// Number of categorical features: origin, destination, origin scheduler,
/// destination scheduler, size class.
pub const CATEGORICAL: usize = 5;
/// Number of numeric features: volume, time of day, time of week, miles.
pub const NUMERIC: usize = 4;

/// Unencoded features of one arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFeatures {
    pub origin: String,
    pub destination: String,
    pub origin_scheduler: String,
    pub destination_scheduler: String,
    pub size_class: String,
    pub volume: f64,
    pub tod: f64,
    pub tow: f64,
    pub miles: f64,
}

impl RawFeatures {
    pub fn of_arc(inst: &Instance, a: usize) -> Self {
        let arc = inst.arc(a);
        let sched = |n: usize| inst.schedulers()[inst.scheduler_of_node(n)].id.clone();
        RawFeatures {
            origin: inst.nodes()[arc.from].clone(),
            destination: inst.nodes()[arc.to].clone(),
            origin_scheduler: sched(arc.from),
            destination_scheduler: sched(arc.to),
            size_class: arc.attrs.size_class.clone(),
            volume: arc.attrs.volume,
            tod: arc.attrs.tod,
            tow: arc.attrs.tow,
            miles: arc.attrs.miles,
        }
    }

    fn categorical(&self) -> [&str; CATEGORICAL] {
        [
            &self.origin,
            &self.destination,
            &self.origin_scheduler,
            &self.destination_scheduler,
            &self.size_class,
        ]
    }

    fn numeric(&self) -> [f64; NUMERIC] {
        [self.volume, self.tod, self.tow, self.miles]
    }
}

/// Encoded features: vocabulary indices (0 = unknown) and scaled numerics.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub categorical: [usize; CATEGORICAL],
    pub numeric: [f64; NUMERIC],
}

/// Index vocabulary; index 0 is reserved for unseen values.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Vocab(BTreeMap<String, usize>);

impl Vocab {
    fn fit<'x>(values: impl Iterator<Item = &'x str>) -> Self {
        let mut map = BTreeMap::new();
        for v in values {
            map.entry(v.to_string()).or_insert(0);
        }
        for (i, idx) in map.values_mut().enumerate() {
            *idx = i + 1;
        }
        Vocab(map)
    }

    pub fn index(&self, value: &str) -> usize {
        self.0.get(value).copied().unwrap_or(0)
    }

    /// Table size including the unknown slot.
    pub fn size(&self) -> usize {
        self.0.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub vocabs: Vec<Vocab>,
    pub min: [f64; NUMERIC],
    pub max: [f64; NUMERIC],
}

impl Encoder {
    /// Fit vocabularies and min-max ranges on `rows`.
    pub fn fit(rows: &[&RawFeatures]) -> Self {
        let vocabs = (0..CATEGORICAL)
            .map(|k| Vocab::fit(rows.iter().map(|r| r.categorical()[k])))
            .collect();
        let mut min = [f64::INFINITY; NUMERIC];
        let mut max = [f64::NEG_INFINITY; NUMERIC];
        for r in rows {
            for (k, v) in r.numeric().into_iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        for k in 0..NUMERIC {
            if !min[k].is_finite() {
                min[k] = 0.0;
                max[k] = 1.0;
            }
        }
        Encoder { vocabs, min, max }
    }

    pub fn vocab_sizes(&self) -> Vec<usize> {
        self.vocabs.iter().map(Vocab::size).collect()
    }

    pub fn encode(&self, raw: &RawFeatures) -> FeatureVector {
        let cats = raw.categorical();
        let mut categorical = [0; CATEGORICAL];
        for k in 0..CATEGORICAL {
            categorical[k] = self.vocabs[k].index(cats[k]);
        }
        let mut numeric = [0.0; NUMERIC];
        for (k, v) in raw.numeric().into_iter().enumerate() {
            let span = self.max[k] - self.min[k];
            numeric[k] = if span > 0.0 {
                ((v - self.min[k]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
        FeatureVector {
            categorical,
            numeric,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn encoding_reserves_unknown_and_scales() {
        let d1 = fixtures::d1();
        let rows: Vec<RawFeatures> = (0..3).map(|a| RawFeatures::of_arc(&d1, a)).collect();
        let refs: Vec<&RawFeatures> = rows.iter().collect();
        let enc = Encoder::fit(&refs);
        let fv = enc.encode(&rows[1]);
        assert_eq!(fv.categorical[0], 2); // n2 among {n1, n2, n3}
        assert_eq!(fv.categorical[2], 1); // s1
        assert_eq!(fv.categorical[3], 2); // s2
        let mut other = rows[0].clone();
        other.origin = "elsewhere".into();
        other.volume = 1e9;
        let fv = enc.encode(&other);
        assert_eq!(fv.categorical[0], 0);
        assert_eq!(fv.numeric[0], 0.0); // constant column
        assert_eq!(enc.vocab_sizes(), vec![4, 4, 3, 3, 2]);
    }
}
