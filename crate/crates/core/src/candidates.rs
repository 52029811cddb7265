//! Per-arc candidate resource sets handed to the optimization models.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::network::Instance;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CandidateError {
    #[error("candidate map covers {got} arcs but the instance has {expected}")]
    Length { expected: usize, got: usize },
    #[error("arc `{0}` has an empty candidate set")]
    Empty(String),
    #[error("arc `{arc}`: candidate `{resource}` is not admissible on this arc")]
    NotAdmissible { arc: String, resource: String },
    #[error("arc `{0}`: candidate set does not contain the initial resource")]
    MissingIncumbent(String),
    #[error("candidate file names unknown arc `{0}`")]
    UnknownArc(String),
    #[error("candidate file: arc `{0}` is missing")]
    MissingArc(String),
    #[error("candidate file names unknown resource `{0}`")]
    UnknownResource(String),
}

/// Candidate resource indices per arc, each list ascending and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSets(Vec<Vec<usize>>);

impl CandidateSets {
    /// R_a for every arc (no filtering).
    pub fn full(inst: &Instance) -> Self {
        CandidateSets(inst.candidate_sets())
    }

    /// {Φ₀(a)} for every arc.
    pub fn singletons(inst: &Instance) -> Self {
        CandidateSets(inst.arcs().iter().map(|a| vec![a.initial]).collect())
    }

    /// Normalizes (sorts, dedups) and checks the sets against `inst`.
    pub fn new(inst: &Instance, mut sets: Vec<Vec<usize>>) -> Result<Self, CandidateError> {
        for s in &mut sets {
            s.sort_unstable();
            s.dedup();
        }
        let c = CandidateSets(sets);
        c.validate(inst)?;
        Ok(c)
    }

    pub fn validate(&self, inst: &Instance) -> Result<(), CandidateError> {
        if self.0.len() != inst.num_arcs() {
            return Err(CandidateError::Length {
                expected: inst.num_arcs(),
                got: self.0.len(),
            });
        }
        for (arc, set) in inst.arcs().iter().zip(&self.0) {
            if set.is_empty() {
                return Err(CandidateError::Empty(arc.id.clone()));
            }
            if let Some(&r) = set.iter().find(|&&r| !arc.allows(r)) {
                return Err(CandidateError::NotAdmissible {
                    arc: arc.id.clone(),
                    resource: inst
                        .resources()
                        .get(r)
                        .cloned()
                        .unwrap_or_else(|| format!("#{r}")),
                });
            }
            if set.binary_search(&arc.initial).is_err() {
                return Err(CandidateError::MissingIncumbent(arc.id.clone()));
            }
        }
        Ok(())
    }

    pub fn get(&self, a: usize) -> &[usize] {
        &self.0[a]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.0
    }

    /// Number of (arc, resource) decision pairs.
    pub fn total_pairs(&self) -> usize {
        self.0.iter().map(Vec::len).sum()
    }

    /// Π_a |candidates(a)|, saturating.
    pub fn search_space(&self) -> u128 {
        self.0
            .iter()
            .fold(1u128, |acc, s| acc.saturating_mul(s.len() as u128))
    }

    pub fn contains(&self, a: usize, r: usize) -> bool {
        self.0[a].binary_search(&r).is_ok()
    }

    pub fn to_map(&self, inst: &Instance) -> BTreeMap<String, Vec<String>> {
        inst.arcs()
            .iter()
            .zip(&self.0)
            .map(|(arc, set)| {
                (
                    arc.id.clone(),
                    set.iter().map(|&r| inst.resources()[r].clone()).collect(),
                )
            })
            .collect()
    }

    pub fn from_map(
        inst: &Instance,
        map: &BTreeMap<String, Vec<String>>,
    ) -> Result<Self, CandidateError> {
        if let Some(k) = map.keys().find(|k| inst.arc_idx(k).is_none()) {
            return Err(CandidateError::UnknownArc(k.clone()));
        }
        let mut sets = Vec::with_capacity(inst.num_arcs());
        for arc in inst.arcs() {
            let ids = map
                .get(&arc.id)
                .ok_or_else(|| CandidateError::MissingArc(arc.id.clone()))?;
            let set = ids
                .iter()
                .map(|id| {
                    inst.resource_idx(id)
                        .ok_or_else(|| CandidateError::UnknownResource(id.clone()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            sets.push(set);
        }
        Self::new(inst, sets)
    }

    /// SHA-256 over the instance fingerprint and the candidate map; ties a
    /// Stage 1 result to the exact decision space it was computed on.
    pub fn fingerprint(&self, inst: &Instance) -> String {
        let mut h = Sha256::new();
        h.update(inst.fingerprint().as_bytes());
        h.update(serde_json::to_vec(&self.to_map(inst)).expect("map serializes"));
        hex::encode(h.finalize())
    }
}

/// Candidate file contents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateFile {
    pub instance_fingerprint: String,
    pub fingerprint: String,
    pub candidates: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl CandidateFile {
    pub fn new(inst: &Instance, sets: &CandidateSets, meta: serde_json::Value) -> Self {
        CandidateFile {
            instance_fingerprint: inst.fingerprint(),
            fingerprint: sets.fingerprint(inst),
            candidates: sets.to_map(inst),
            meta,
        }
    }
}
