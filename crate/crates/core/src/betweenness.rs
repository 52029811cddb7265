//! Directed edge betweenness and betweenness-driven per-arc κ.
//!
//! B(a) sums, over ordered node pairs (i, j) with i ≠ j and j reachable from
//! i, the fraction of shortest i→j paths that traverse arc `a`. Paths are
//! arc sequences, so parallel arcs count as distinct paths and split the
//! load between them. Self-loops never lie on a shortest path.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::io::Write;

use ordered_float::OrderedFloat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Instance;

#[derive(Debug, Error, PartialEq)]
pub enum BetweennessError {
    #[error("sample count {samples} must lie in 1..={nodes}")]
    SamplesOutOfRange { samples: usize, nodes: usize },
    #[error("betweenness report is empty")]
    EmptyReport,
    #[error("quantiles must satisfy 0 < q1 <= q2 < 1 (got q1={q1}, q2={q2})")]
    QuantileRange { q1: f64, q2: f64 },
    #[error("class kappas must be nondecreasing and >= 1 (got {0:?})")]
    ClassKappas((u32, u32, u32)),
    #[error("thresholds must satisfy tau1 <= tau2 (got {0} > {1})")]
    Thresholds(f64, f64),
}

/// Path length used for shortest paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathMetric {
    #[default]
    Hops,
    Miles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Sampled { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetweennessReport {
    pub arc_ids: Vec<String>,
    /// B(a) by arc index.
    pub values: Vec<f64>,
    pub method: Method,
    pub metric: PathMetric,
}

impl BetweennessReport {
    pub fn get(&self, arc_id: &str) -> Option<f64> {
        self.arc_ids
            .iter()
            .position(|a| a == arc_id)
            .map(|i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Out-adjacency with self-loops dropped; entries are (arc, head, weight).
struct Graph {
    out: Vec<Vec<(usize, usize, f64)>>,
    tail: Vec<usize>,
}

impl Graph {
    fn build(inst: &Instance, metric: PathMetric) -> Self {
        let mut out = vec![Vec::new(); inst.num_nodes()];
        let mut tail = Vec::with_capacity(inst.num_arcs());
        for (a, arc) in inst.arcs().iter().enumerate() {
            tail.push(arc.from);
            if arc.is_self_loop() {
                continue;
            }
            let w = match metric {
                PathMetric::Hops => 1.0,
                PathMetric::Miles => arc.attrs.miles,
            };
            out[arc.from].push((a, arc.to, w));
        }
        Graph { out, tail }
    }
}

/// Reusable buffers for one single-source pass.
struct Workspace {
    order: Vec<usize>,
    preds: Vec<Vec<usize>>,
    sigma: Vec<f64>,
    dist: Vec<f64>,
    delta: Vec<f64>,
    settled: Vec<bool>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            order: Vec::with_capacity(n),
            preds: vec![Vec::new(); n],
            sigma: vec![0.0; n],
            dist: vec![f64::INFINITY; n],
            delta: vec![0.0; n],
            settled: vec![false; n],
        }
    }

    fn reset(&mut self) {
        self.order.clear();
        for p in &mut self.preds {
            p.clear();
        }
        self.sigma.fill(0.0);
        self.dist.fill(f64::INFINITY);
        self.delta.fill(0.0);
        self.settled.fill(false);
    }
}

fn forward_hops(g: &Graph, s: usize, ws: &mut Workspace) {
    ws.sigma[s] = 1.0;
    ws.dist[s] = 0.0;
    let mut queue = VecDeque::new();
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        ws.order.push(v);
        for &(a, w, _) in &g.out[v] {
            if ws.dist[w].is_infinite() {
                ws.dist[w] = ws.dist[v] + 1.0;
                queue.push_back(w);
            }
            if ws.dist[w] == ws.dist[v] + 1.0 {
                ws.sigma[w] += ws.sigma[v];
                ws.preds[w].push(a);
            }
        }
    }
}

fn forward_weighted(g: &Graph, s: usize, ws: &mut Workspace) {
    ws.sigma[s] = 1.0;
    ws.dist[s] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((OrderedFloat(0.0), s)));
    while let Some(Reverse((OrderedFloat(d), v))) = heap.pop() {
        if ws.settled[v] || d > ws.dist[v] {
            continue;
        }
        ws.settled[v] = true;
        ws.order.push(v);
        for &(a, w, len) in &g.out[v] {
            if ws.settled[w] {
                continue;
            }
            let nd = d + len;
            if nd < ws.dist[w] {
                ws.dist[w] = nd;
                ws.sigma[w] = ws.sigma[v];
                ws.preds[w].clear();
                ws.preds[w].push(a);
                heap.push(Reverse((OrderedFloat(nd), w)));
            } else if nd == ws.dist[w] {
                ws.sigma[w] += ws.sigma[v];
                ws.preds[w].push(a);
            }
        }
    }
}

/// Add the dependencies of source `s` onto `acc` (indexed by arc).
fn single_source(g: &Graph, s: usize, metric: PathMetric, ws: &mut Workspace, acc: &mut [f64]) {
    ws.reset();
    match metric {
        PathMetric::Hops => forward_hops(g, s, ws),
        PathMetric::Miles => forward_weighted(g, s, ws),
    }
    while let Some(w) = ws.order.pop() {
        let coeff = (1.0 + ws.delta[w]) / ws.sigma[w];
        for &a in &ws.preds[w] {
            let v = g.tail[a];
            let c = ws.sigma[v] * coeff;
            acc[a] += c;
            ws.delta[v] += c;
        }
    }
}

// Sources per parallel work unit. Fixed so the summation tree, and hence
// every bit of the result, does not depend on the thread count.
const CHUNK: usize = 16;

fn accumulate(inst: &Instance, sources: &[usize], metric: PathMetric) -> Vec<f64> {
    let g = Graph::build(inst, metric);
    let m = inst.num_arcs();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut ws = Workspace::new(inst.num_nodes());
            let mut acc = vec![0.0; m];
            for &s in chunk {
                single_source(&g, s, metric, &mut ws, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; m];
    for p in partials {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    total
}

fn arc_ids(inst: &Instance) -> Vec<String> {
    inst.arcs().iter().map(|a| a.id.clone()).collect()
}

/// Exact betweenness over all sources, shortest paths by hop count.
pub fn edge_betweenness_exact(inst: &Instance) -> BetweennessReport {
    edge_betweenness_exact_with(inst, PathMetric::Hops)
}

pub fn edge_betweenness_exact_with(inst: &Instance, metric: PathMetric) -> BetweennessReport {
    let sources: Vec<usize> = (0..inst.num_nodes()).collect();
    BetweennessReport {
        arc_ids: arc_ids(inst),
        values: accumulate(inst, &sources, metric),
        method: Method::Exact,
        metric,
    }
}

/// Pivot-sampled estimate: `samples` distinct sources drawn uniformly
/// without replacement, contributions scaled by |N| / samples.
pub fn edge_betweenness_sampled(
    inst: &Instance,
    samples: usize,
    seed: u64,
) -> Result<BetweennessReport, BetweennessError> {
    edge_betweenness_sampled_with(inst, samples, seed, PathMetric::Hops)
}

pub fn edge_betweenness_sampled_with(
    inst: &Instance,
    samples: usize,
    seed: u64,
    metric: PathMetric,
) -> Result<BetweennessReport, BetweennessError> {
    let n = inst.num_nodes();
    if samples == 0 || samples > n {
        return Err(BetweennessError::SamplesOutOfRange { samples, nodes: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pivots = rand::seq::index::sample(&mut rng, n, samples).into_vec();
    pivots.sort_unstable();
    let scale = n as f64 / samples as f64;
    let mut values = accumulate(inst, &pivots, metric);
    if samples < n {
        for v in &mut values {
            *v *= scale;
        }
    }
    Ok(BetweennessReport {
        arc_ids: arc_ids(inst),
        values,
        method: Method::Sampled { samples, seed },
        metric,
    })
}

/// Nearest-rank empirical quantiles (τ₁, τ₂) of all B(a) values.
pub fn quantile_thresholds(
    report: &BetweennessReport,
    q1: f64,
    q2: f64,
) -> Result<(f64, f64), BetweennessError> {
    if report.is_empty() {
        return Err(BetweennessError::EmptyReport);
    }
    if !(q1 > 0.0 && q1 <= q2 && q2 < 1.0) {
        return Err(BetweennessError::QuantileRange { q1, q2 });
    }
    let mut sorted = report.values.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let pick = |q: f64| {
        let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
        sorted[rank - 1]
    };
    Ok((pick(q1), pick(q2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcClass {
    Low,
    Medium,
    High,
}

impl ArcClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ArcClass::Low => "low",
            ArcClass::Medium => "medium",
            ArcClass::High => "high",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaAssignment {
    pub kappa: Vec<u32>,
    pub class: Vec<ArcClass>,
    pub thresholds: (f64, f64),
    pub class_kappas: (u32, u32, u32),
}

impl KappaAssignment {
    /// The same κ on every arc.
    pub fn uniform(arcs: usize, k: u32) -> Self {
        KappaAssignment {
            kappa: vec![k.max(1); arcs],
            class: vec![ArcClass::High; arcs],
            thresholds: (f64::NEG_INFINITY, f64::NEG_INFINITY),
            class_kappas: (k, k, k),
        }
    }

    pub fn mean_kappa(&self) -> f64 {
        if self.kappa.is_empty() {
            return 0.0;
        }
        self.kappa.iter().map(|&k| k as f64).sum::<f64>() / self.kappa.len() as f64
    }
}

pub fn classify(b: f64, (tau1, tau2): (f64, f64)) -> ArcClass {
    if b >= tau2 {
        ArcClass::High
    } else if b >= tau1 {
        ArcClass::Medium
    } else {
        ArcClass::Low
    }
}

/// Low: B < τ₁, Medium: τ₁ ≤ B < τ₂, High: B ≥ τ₂.
pub fn assign_kappa(
    report: &BetweennessReport,
    thresholds: (f64, f64),
    class_kappas: (u32, u32, u32),
) -> Result<KappaAssignment, BetweennessError> {
    let (lo, med, hi) = class_kappas;
    if lo < 1 || lo > med || med > hi {
        return Err(BetweennessError::ClassKappas(class_kappas));
    }
    if thresholds.0 > thresholds.1 {
        return Err(BetweennessError::Thresholds(thresholds.0, thresholds.1));
    }
    let class: Vec<ArcClass> = report
        .values
        .iter()
        .map(|&b| classify(b, thresholds))
        .collect();
    let kappa = class
        .iter()
        .map(|c| match c {
            ArcClass::Low => lo,
            ArcClass::Medium => med,
            ArcClass::High => hi,
        })
        .collect();
    Ok(KappaAssignment {
        kappa,
        class,
        thresholds,
        class_kappas,
    })
}

/// `arc_id,betweenness,class,kappa`, one row per arc.
pub fn write_report_csv<W: Write>(
    sink: W,
    report: &BetweennessReport,
    kappas: &KappaAssignment,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["arc_id", "betweenness", "class", "kappa"])?;
    for (i, id) in report.arc_ids.iter().enumerate() {
        w.write_record([
            id.as_str(),
            &format!("{:.6}", report.values[i]),
            kappas.class[i].as_str(),
            &kappas.kappa[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
