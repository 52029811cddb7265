//! Task network, resource assignments, and imbalance / burden accounting.
//!
//! An [`Instance`] is a directed multigraph whose arcs are tasks. Each arc
//! carries a set of admissible resources and an initial resource. Nodes are
//! partitioned among schedulers; a scheduler owns every arc that leaves one
//! of its nodes.
//!
//! All internal indices are dense `usize` positions. Arcs are stored in
//! ascending arc-id order, resources and nodes in their declared order.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate {kind} id `{id}`")]
    Duplicate { kind: &'static str, id: String },
    #[error("arc `{arc}`: field `{field}` {message}")]
    Field {
        arc: String,
        field: &'static str,
        message: String,
    },
    #[error("arc `{arc}` references unknown node `{node}`")]
    UnknownNode { arc: String, node: String },
    #[error("arc `{arc}` lists unknown resource `{resource}`")]
    UnknownResource { arc: String, resource: String },
    #[error("arc `{arc}` has an empty candidate set")]
    EmptyCandidates { arc: String },
    #[error("initial assignment incompatible: arc `{arc}` starts on `{resource}`, which is not one of its candidates")]
    IncompatibleInitial { arc: String, resource: String },
    #[error("scheduler partition error: {0}")]
    Partition(String),
    #[error("instance has no resources")]
    NoResources,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssignmentError {
    #[error("assignment covers {got} arcs but the instance has {expected}")]
    Length { expected: usize, got: usize },
    #[error("assignment is missing arc `{0}`")]
    MissingArc(String),
    #[error("assignment names unknown arc `{0}`")]
    UnknownArc(String),
    #[error("assignment names unknown resource `{resource}` for arc `{arc}`")]
    UnknownResource { arc: String, resource: String },
    #[error("resource `{resource}` is not a candidate for arc `{arc}`")]
    NotCandidate { arc: String, resource: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown scheduler `{0}`")]
pub struct UnknownScheduler(pub String);

/// Serialized form of one arc, as it appears in the instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcData {
    pub id: String,
    pub from: String,
    pub to: String,
    pub volume: f64,
    pub tod: f64,
    pub tow: f64,
    pub miles: f64,
    pub size_class: String,
    pub candidates: Vec<String>,
    pub initial: String,
}

/// Serialized instance file. Validation happens in [`InstanceData::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceData {
    pub nodes: Vec<String>,
    pub schedulers: BTreeMap<String, Vec<String>>,
    pub resources: Vec<String>,
    pub arcs: Vec<ArcData>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

/// Per-arc attributes. Only the scorer reads these.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcAttributes {
    pub volume: f64,
    pub tod: f64,
    pub tow: f64,
    pub miles: f64,
    pub size_class: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetArc {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub attrs: ArcAttributes,
    /// Admissible resources, ascending resource index.
    pub candidates: Vec<usize>,
    pub initial: usize,
}

impl NetArc {
    pub fn is_self_loop(&self) -> bool {
        self.from == self.to
    }

    pub fn allows(&self, resource: usize) -> bool {
        self.candidates.binary_search(&resource).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scheduler {
    pub id: String,
    pub nodes: Vec<usize>,
}

/// A validated resource-substitution instance. Immutable once built.
#[derive(Debug, Clone)]
pub struct Instance {
    nodes: Vec<String>,
    resources: Vec<String>,
    schedulers: Vec<Scheduler>,
    node_scheduler: Vec<usize>,
    arcs: Vec<NetArc>,
    meta: serde_json::Value,
    node_index: HashMap<String, usize>,
    resource_index: HashMap<String, usize>,
    arc_index: HashMap<String, usize>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.resources == other.resources
            && self.schedulers == other.schedulers
            && self.arcs == other.arcs
            && self.meta == other.meta
    }
}

fn index_of(ids: &[String], kind: &'static str) -> Result<HashMap<String, usize>, InstanceError> {
    let mut map = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if map.insert(id.clone(), i).is_some() {
            return Err(InstanceError::Duplicate {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(map)
}

fn check_range(
    arc: &str,
    field: &'static str,
    value: f64,
    lo: f64,
    hi: Option<f64>,
) -> Result<(), InstanceError> {
    let ok = value.is_finite() && value >= lo && hi.is_none_or(|h| value < h);
    if ok {
        return Ok(());
    }
    let message = match hi {
        Some(h) => format!("must lie in [{lo}, {h}), got {value}"),
        None => format!("must be finite and >= {lo}, got {value}"),
    };
    Err(InstanceError::Field {
        arc: arc.to_string(),
        field,
        message,
    })
}

impl InstanceData {
    pub fn validate(self) -> Result<Instance, InstanceError> {
        if self.resources.is_empty() {
            return Err(InstanceError::NoResources);
        }
        let node_index = index_of(&self.nodes, "node")?;
        let resource_index = index_of(&self.resources, "resource")?;

        let mut node_scheduler = vec![usize::MAX; self.nodes.len()];
        let mut schedulers = Vec::with_capacity(self.schedulers.len());
        for (s, (sid, members)) in self.schedulers.iter().enumerate() {
            let mut nodes = Vec::with_capacity(members.len());
            for name in members {
                let &n = node_index.get(name).ok_or_else(|| {
                    InstanceError::Partition(format!(
                        "scheduler `{sid}` lists unknown node `{name}`"
                    ))
                })?;
                if node_scheduler[n] != usize::MAX {
                    let other = &schedulers
                        .get(node_scheduler[n])
                        .map(|x: &Scheduler| x.id.clone())
                        .unwrap_or_else(|| sid.clone());
                    return Err(InstanceError::Partition(format!(
                        "node `{name}` belongs to both `{other}` and `{sid}`"
                    )));
                }
                node_scheduler[n] = s;
                nodes.push(n);
            }
            nodes.sort_unstable();
            schedulers.push(Scheduler {
                id: sid.clone(),
                nodes,
            });
        }
        if let Some(n) = node_scheduler.iter().position(|&s| s == usize::MAX) {
            return Err(InstanceError::Partition(format!(
                "node `{}` is not owned by any scheduler",
                self.nodes[n]
            )));
        }

        let mut arcs = Vec::with_capacity(self.arcs.len());
        for a in self.arcs {
            let node = |name: &str| {
                node_index
                    .get(name)
                    .copied()
                    .ok_or_else(|| InstanceError::UnknownNode {
                        arc: a.id.clone(),
                        node: name.to_string(),
                    })
            };
            let from = node(&a.from)?;
            let to = node(&a.to)?;
            check_range(&a.id, "volume", a.volume, 0.0, None)?;
            check_range(&a.id, "tod", a.tod, 0.0, Some(24.0))?;
            check_range(&a.id, "tow", a.tow, 0.0, Some(168.0))?;
            check_range(&a.id, "miles", a.miles, 0.0, None)?;
            if a.candidates.is_empty() {
                return Err(InstanceError::EmptyCandidates { arc: a.id });
            }
            let mut candidates = Vec::with_capacity(a.candidates.len());
            for r in &a.candidates {
                let &ri = resource_index
                    .get(r)
                    .ok_or_else(|| InstanceError::UnknownResource {
                        arc: a.id.clone(),
                        resource: r.clone(),
                    })?;
                candidates.push(ri);
            }
            candidates.sort_unstable();
            candidates.dedup();
            let &initial =
                resource_index
                    .get(&a.initial)
                    .ok_or_else(|| InstanceError::UnknownResource {
                        arc: a.id.clone(),
                        resource: a.initial.clone(),
                    })?;
            if candidates.binary_search(&initial).is_err() {
                return Err(InstanceError::IncompatibleInitial {
                    arc: a.id,
                    resource: a.initial,
                });
            }
            arcs.push(NetArc {
                id: a.id,
                from,
                to,
                attrs: ArcAttributes {
                    volume: a.volume,
                    tod: a.tod,
                    tow: a.tow,
                    miles: a.miles,
                    size_class: a.size_class,
                },
                candidates,
                initial,
            });
        }
        arcs.sort_by(|x, y| x.id.cmp(&y.id));
        if let Some(w) = arcs.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(InstanceError::Duplicate {
                kind: "arc",
                id: w[0].id.clone(),
            });
        }
        let arc_index = arcs
            .iter()
            .enumerate()
            .map(|(i, a)| (a.id.clone(), i))
            .collect();

        Ok(Instance {
            nodes: self.nodes,
            resources: self.resources,
            schedulers,
            node_scheduler,
            arcs,
            meta: self.meta,
            node_index,
            resource_index,
            arc_index,
        })
    }
}

/// Parse and validate an instance file.
pub fn load_instance<R: Read>(source: R) -> Result<Instance, InstanceError> {
    let data: InstanceData = serde_json::from_reader(source).map_err(|e| InstanceError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    data.validate()
}

impl Instance {
    pub fn from_json_str(s: &str) -> Result<Self, InstanceError> {
        load_instance(s.as_bytes())
    }

    pub fn to_data(&self) -> InstanceData {
        let mut schedulers = BTreeMap::new();
        for s in &self.schedulers {
            schedulers.insert(
                s.id.clone(),
                s.nodes.iter().map(|&n| self.nodes[n].clone()).collect(),
            );
        }
        InstanceData {
            nodes: self.nodes.clone(),
            schedulers,
            resources: self.resources.clone(),
            arcs: self
                .arcs
                .iter()
                .map(|a| ArcData {
                    id: a.id.clone(),
                    from: self.nodes[a.from].clone(),
                    to: self.nodes[a.to].clone(),
                    volume: a.attrs.volume,
                    tod: a.attrs.tod,
                    tow: a.attrs.tow,
                    miles: a.attrs.miles,
                    size_class: a.attrs.size_class.clone(),
                    candidates: a
                        .candidates
                        .iter()
                        .map(|&r| self.resources[r].clone())
                        .collect(),
                    initial: self.resources[a.initial].clone(),
                })
                .collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_data()).expect("instance serializes")
    }

    /// SHA-256 over the canonical JSON encoding, hex encoded.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(&self.to_data()).expect("instance serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn resources(&self) -> &[String] {
        &self.resources
    }

    pub fn schedulers(&self) -> &[Scheduler] {
        &self.schedulers
    }

    pub fn arcs(&self) -> &[NetArc] {
        &self.arcs
    }

    pub fn arc(&self, a: usize) -> &NetArc {
        &self.arcs[a]
    }

    pub fn meta(&self) -> &serde_json::Value {
        &self.meta
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_resources(&self) -> usize {
        self.resources.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn num_schedulers(&self) -> usize {
        self.schedulers.len()
    }

    pub fn node_idx(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn resource_idx(&self, id: &str) -> Option<usize> {
        self.resource_index.get(id).copied()
    }

    pub fn arc_idx(&self, id: &str) -> Option<usize> {
        self.arc_index.get(id).copied()
    }

    pub fn scheduler_idx(&self, id: &str) -> Option<usize> {
        self.schedulers.iter().position(|s| s.id == id)
    }

    pub fn scheduler_of_node(&self, n: usize) -> usize {
        self.node_scheduler[n]
    }

    /// The scheduler responsible for an arc: the owner of its origin node.
    pub fn arc_owner(&self, a: usize) -> usize {
        self.node_scheduler[self.arcs[a].from]
    }

    /// True when both endpoints belong to the same scheduler.
    pub fn is_internal(&self, a: usize) -> bool {
        let arc = &self.arcs[a];
        self.node_scheduler[arc.from] == self.node_scheduler[arc.to]
    }

    /// Replace metadata, keeping everything else.
    pub fn with_meta(mut self, meta: serde_json::Value) -> Self {
        self.meta = meta;
        self
    }

    /// Per-arc candidate sets of this instance.
    pub fn candidate_sets(&self) -> Vec<Vec<usize>> {
        self.arcs.iter().map(|a| a.candidates.clone()).collect()
    }

    /// A_s: arcs whose origin is one of `scheduler`'s nodes.
    pub fn scheduler_arcs(&self, scheduler: &str) -> Result<Vec<usize>, UnknownScheduler> {
        let s = self
            .scheduler_idx(scheduler)
            .ok_or_else(|| UnknownScheduler(scheduler.to_string()))?;
        Ok((0..self.arcs.len())
            .filter(|&a| self.arc_owner(a) == s)
            .collect())
    }

    /// Σ_n |indeg(n) − outdeg(n)|, a lower bound on the imbalance of every
    /// assignment.
    pub fn structural_lower_bound(&self) -> i64 {
        let mut gap = vec![0i64; self.nodes.len()];
        for a in &self.arcs {
            gap[a.to] += 1;
            gap[a.from] -= 1;
        }
        gap.iter().map(|g| g.abs()).sum()
    }
}

/// A total map arc → resource, stored by arc index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(Vec<usize>);

impl Assignment {
    pub fn new(resources: Vec<usize>) -> Self {
        Assignment(resources)
    }

    /// Φ₀.
    pub fn initial(inst: &Instance) -> Self {
        Assignment(inst.arcs.iter().map(|a| a.initial).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, a: usize) -> usize {
        self.0[a]
    }

    pub fn set(&mut self, a: usize, r: usize) {
        self.0[a] = r;
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    fn check_len(&self, inst: &Instance) -> Result<(), AssignmentError> {
        if self.0.len() != inst.num_arcs() {
            return Err(AssignmentError::Length {
                expected: inst.num_arcs(),
                got: self.0.len(),
            });
        }
        Ok(())
    }

    /// Totality plus Φ(a) ∈ R_a.
    pub fn validate(&self, inst: &Instance) -> Result<(), AssignmentError> {
        self.check_len(inst)?;
        for (arc, &r) in inst.arcs.iter().zip(&self.0) {
            if r >= inst.num_resources() || !arc.allows(r) {
                return Err(AssignmentError::NotCandidate {
                    arc: arc.id.clone(),
                    resource: inst
                        .resources
                        .get(r)
                        .cloned()
                        .unwrap_or_else(|| format!("#{r}")),
                });
            }
        }
        Ok(())
    }

    /// Arcs whose resource differs from Φ₀, ascending.
    pub fn changed_arcs(&self, inst: &Instance) -> Vec<usize> {
        self.0
            .iter()
            .zip(&inst.arcs)
            .enumerate()
            .filter(|(_, (&r, arc))| r != arc.initial)
            .map(|(a, _)| a)
            .collect()
    }

    pub fn to_map(&self, inst: &Instance) -> BTreeMap<String, String> {
        inst.arcs
            .iter()
            .zip(&self.0)
            .map(|(a, &r)| (a.id.clone(), inst.resources[r].clone()))
            .collect()
    }

    /// Build from an arc id → resource id map; every arc must be present
    /// and every resource must be one of the arc's candidates.
    pub fn from_map(
        inst: &Instance,
        map: &BTreeMap<String, String>,
    ) -> Result<Self, AssignmentError> {
        if let Some(unknown) = map.keys().find(|k| inst.arc_idx(k).is_none()) {
            return Err(AssignmentError::UnknownArc(unknown.clone()));
        }
        let mut out = Vec::with_capacity(inst.num_arcs());
        for arc in &inst.arcs {
            let rid = map
                .get(&arc.id)
                .ok_or_else(|| AssignmentError::MissingArc(arc.id.clone()))?;
            let r = inst
                .resource_idx(rid)
                .ok_or_else(|| AssignmentError::UnknownResource {
                    arc: arc.id.clone(),
                    resource: rid.clone(),
                })?;
            if !arc.allows(r) {
                return Err(AssignmentError::NotCandidate {
                    arc: arc.id.clone(),
                    resource: rid.clone(),
                });
            }
            out.push(r);
        }
        Ok(Assignment(out))
    }

    pub fn from_json_str(inst: &Instance, s: &str) -> Result<Self, AssignmentFileError> {
        let map: BTreeMap<String, String> = serde_json::from_str(s)?;
        Ok(Self::from_map(inst, &map)?)
    }

    pub fn to_json_pretty(&self, inst: &Instance) -> String {
        serde_json::to_string_pretty(&self.to_map(inst)).expect("map serializes")
    }
}

#[derive(Debug, Error)]
pub enum AssignmentFileError {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] AssignmentError),
}

/// Per-(node, resource) flow counts and imbalances for one assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImbalanceReport {
    num_resources: usize,
    inflow: Vec<i64>,
    outflow: Vec<i64>,
    pub total: i64,
}

impl ImbalanceReport {
    pub fn inflow(&self, n: usize, r: usize) -> i64 {
        self.inflow[n * self.num_resources + r]
    }

    pub fn outflow(&self, n: usize, r: usize) -> i64 {
        self.outflow[n * self.num_resources + r]
    }

    /// I_nr = |in_nr − out_nr|.
    pub fn imbalance(&self, n: usize, r: usize) -> i64 {
        (self.inflow(n, r) - self.outflow(n, r)).abs()
    }

    /// Imbalance summed over resources at node `n`.
    pub fn node_total(&self, n: usize) -> i64 {
        (0..self.num_resources).map(|r| self.imbalance(n, r)).sum()
    }
}

pub fn total_imbalance(
    inst: &Instance,
    phi: &Assignment,
) -> Result<ImbalanceReport, AssignmentError> {
    phi.check_len(inst)?;
    let nr = inst.num_resources();
    let mut inflow = vec![0i64; inst.num_nodes() * nr];
    let mut outflow = vec![0i64; inst.num_nodes() * nr];
    for (arc, &r) in inst.arcs.iter().zip(phi.as_slice()) {
        inflow[arc.to * nr + r] += 1;
        outflow[arc.from * nr + r] += 1;
    }
    let total = inflow
        .iter()
        .zip(&outflow)
        .map(|(i, o)| (i - o).abs())
        .sum();
    Ok(ImbalanceReport {
        num_resources: nr,
        inflow,
        outflow,
        total,
    })
}

/// Per-scheduler change counts relative to Φ₀.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BurdenVector {
    pub per_scheduler: Vec<i64>,
    pub total_changes: i64,
    pub max_burden: i64,
}

impl BurdenVector {
    pub fn from_counts(per_scheduler: Vec<i64>) -> Self {
        let total_changes = per_scheduler.iter().sum();
        let max_burden = per_scheduler.iter().copied().max().unwrap_or(0);
        BurdenVector {
            per_scheduler,
            total_changes,
            max_burden,
        }
    }

    /// Σ_{s1<s2} |B_s1 − B_s2|.
    pub fn pairwise_spread(&self) -> i64 {
        let b = &self.per_scheduler;
        let mut sum = 0;
        for i in 0..b.len() {
            for j in i + 1..b.len() {
                sum += (b[i] - b[j]).abs();
            }
        }
        sum
    }
}

pub fn burdens(inst: &Instance, phi: &Assignment) -> Result<BurdenVector, AssignmentError> {
    phi.check_len(inst)?;
    let mut counts = vec![0i64; inst.num_schedulers()];
    for a in phi.changed_arcs(inst) {
        counts[inst.arc_owner(a)] += 1;
    }
    Ok(BurdenVector::from_counts(counts))
}
