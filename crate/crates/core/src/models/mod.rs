//! The optimization models as evaluable specifications.
//!
//! Stage 1 minimizes total imbalance. The Stage 2 kinds keep the imbalance
//! at or below a cap I* (normally the Stage 1 optimum on the same candidate
//! sets) and minimize a change-based objective: total changes Δ, maximum
//! per-scheduler burden Z, a weighted blend of the two, or a blend of Δ and
//! the pairwise burden spread Σ|B_s1 − B_s2|.
//!
//! Objectives are rationals with a known denominator. Solvers compare the
//! integer numerator over [`ModelSpec::denominator`], so no floating-point
//! tolerance is ever involved.

mod lp;
mod state;

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::candidates::{CandidateError, CandidateSets};
use crate::network::{burdens, total_imbalance, Assignment, AssignmentError, Instance};

pub use lp::{export_lp, LpExport, LpSummary};
pub use state::{pairwise_spread, Components, EvalState};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error(transparent)]
    Candidates(#[from] CandidateError),
    #[error("{name} must lie in [0, 1], got {value}")]
    WeightRange { name: &'static str, value: String },
    #[error("cannot parse weight `{0}`")]
    WeightParse(String),
    #[error("candidate violation: arc `{arc}` uses `{resource}`, outside its candidate set")]
    CandidateViolation { arc: String, resource: String },
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
}

/// A weight in [0, 1], held exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Weight(Rational64);

impl Weight {
    pub const ZERO: Weight = Weight(Rational64::new_raw(0, 1));
    pub const ONE: Weight = Weight(Rational64::new_raw(1, 1));

    pub fn new(value: Rational64) -> Result<Self, ModelError> {
        if value < Rational64::from_integer(0) || value > Rational64::from_integer(1) {
            return Err(ModelError::WeightRange {
                name: "weight",
                value: value.to_string(),
            });
        }
        Ok(Weight(value))
    }

    pub fn ratio(self) -> Rational64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    fn checked(self, name: &'static str) -> Result<Self, ModelError> {
        Weight::new(self.0).map_err(|_| ModelError::WeightRange {
            name,
            value: self.to_string(),
        })
    }
}

impl FromStr for Weight {
    type Err = ModelError;

    /// Accepts decimals (`0.25`), fractions (`1/3`) and integers, exactly.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::WeightParse(s.to_string());
        let t = s.trim();
        let value = if let Some((n, d)) = t.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Rational64::new(n, d)
        } else if let Some((int, frac)) = t.split_once('.') {
            if frac.len() > 15 || !frac.chars().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            if int.starts_with('-') {
                return Err(ModelError::WeightRange {
                    name: "weight",
                    value: t.to_string(),
                });
            }
            let int: i64 = if int.is_empty() {
                0
            } else {
                int.parse().map_err(|_| bad())?
            };
            let scale = 10i64.pow(frac.len() as u32);
            let frac_v: i64 = if frac.is_empty() {
                0
            } else {
                frac.parse().map_err(|_| bad())?
            };
            Rational64::new(int * scale + frac_v, scale)
        } else {
            Rational64::from_integer(t.parse().map_err(|_| bad())?)
        };
        Weight::new(value)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKindTag {
    Stage1,
    Stage2Efficient,
    Stage2Minimax,
    Stage2Weighted,
    Stage2Gini,
}

impl ModelKindTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKindTag::Stage1 => "stage1",
            ModelKindTag::Stage2Efficient => "stage2-efficient",
            ModelKindTag::Stage2Minimax => "stage2-minimax",
            ModelKindTag::Stage2Weighted => "stage2-weighted",
            ModelKindTag::Stage2Gini => "stage2-gini",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Stage1,
    Stage2Efficient,
    Stage2Minimax,
    /// (1 − α)·Δ + α·Z; α is the fairness weight.
    Stage2Weighted {
        alpha: Weight,
    },
    /// (1 − ω)·Σ_s B_s + ω·Σ_{s1<s2} |B_s1 − B_s2|.
    Stage2Gini {
        omega: Weight,
    },
}

impl ModelKind {
    pub fn tag(self) -> ModelKindTag {
        match self {
            ModelKind::Stage1 => ModelKindTag::Stage1,
            ModelKind::Stage2Efficient => ModelKindTag::Stage2Efficient,
            ModelKind::Stage2Minimax => ModelKindTag::Stage2Minimax,
            ModelKind::Stage2Weighted { .. } => ModelKindTag::Stage2Weighted,
            ModelKind::Stage2Gini { .. } => ModelKindTag::Stage2Gini,
        }
    }

    pub fn is_stage2(self) -> bool {
        !matches!(self, ModelKind::Stage1)
    }

    pub fn weight(self) -> Option<Weight> {
        match self {
            ModelKind::Stage2Weighted { alpha } => Some(alpha),
            ModelKind::Stage2Gini { omega } => Some(omega),
            _ => None,
        }
    }
}

/// A model over one instance and one family of candidate sets.
#[derive(Debug, Clone)]
pub struct ModelSpec<'a> {
    inst: &'a Instance,
    candidates: CandidateSets,
    kind: ModelKind,
    istar: Option<i64>,
}

pub fn build_stage1<'a>(
    inst: &'a Instance,
    candidates: CandidateSets,
) -> Result<ModelSpec<'a>, ModelError> {
    ModelSpec::new(inst, candidates, ModelKind::Stage1, None)
}

pub fn build_stage2_efficient<'a>(
    inst: &'a Instance,
    candidates: CandidateSets,
    istar: i64,
) -> Result<ModelSpec<'a>, ModelError> {
    ModelSpec::new(inst, candidates, ModelKind::Stage2Efficient, Some(istar))
}

pub fn build_stage2_minimax<'a>(
    inst: &'a Instance,
    candidates: CandidateSets,
    istar: i64,
) -> Result<ModelSpec<'a>, ModelError> {
    ModelSpec::new(inst, candidates, ModelKind::Stage2Minimax, Some(istar))
}

pub fn build_stage2_weighted<'a>(
    inst: &'a Instance,
    candidates: CandidateSets,
    istar: i64,
    alpha: Weight,
) -> Result<ModelSpec<'a>, ModelError> {
    let alpha = alpha.checked("alpha")?;
    ModelSpec::new(
        inst,
        candidates,
        ModelKind::Stage2Weighted { alpha },
        Some(istar),
    )
}

pub fn build_stage2_gini<'a>(
    inst: &'a Instance,
    candidates: CandidateSets,
    istar: i64,
    omega: Weight,
) -> Result<ModelSpec<'a>, ModelError> {
    let omega = omega.checked("omega")?;
    ModelSpec::new(
        inst,
        candidates,
        ModelKind::Stage2Gini { omega },
        Some(istar),
    )
}

impl<'a> ModelSpec<'a> {
    /// Stage 2 kinds require `istar`; it is ignored for Stage 1.
    pub fn new(
        inst: &'a Instance,
        candidates: CandidateSets,
        kind: ModelKind,
        istar: Option<i64>,
    ) -> Result<Self, ModelError> {
        candidates.validate(inst)?;
        let istar = if kind.is_stage2() {
            Some(istar.expect("stage 2 models need an imbalance cap"))
        } else {
            None
        };
        Ok(ModelSpec {
            inst,
            candidates,
            kind,
            istar,
        })
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn candidates(&self) -> &CandidateSets {
        &self.candidates
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn istar(&self) -> Option<i64> {
        self.istar
    }

    /// Same instance and candidates, different kind / cap.
    pub fn with_kind(&self, kind: ModelKind, istar: Option<i64>) -> Self {
        ModelSpec {
            inst: self.inst,
            candidates: self.candidates.clone(),
            kind,
            istar: if kind.is_stage2() { istar } else { None },
        }
    }

    /// Common denominator of every objective value of this model.
    pub fn denominator(&self) -> i64 {
        self.kind.weight().map_or(1, |w| *w.ratio().denom())
    }

    /// (1 − w, w) as integers over [`Self::denominator`].
    pub fn scaled_weights(&self) -> (i64, i64) {
        match self.kind.weight() {
            Some(w) => {
                let (p, q) = (*w.ratio().numer(), *w.ratio().denom());
                (q - p, p)
            }
            None => (1, 0),
        }
    }

    /// Objective numerator over [`Self::denominator`].
    pub fn scaled_objective(&self, c: &Components) -> i64 {
        let (keep, w) = self.scaled_weights();
        match self.kind {
            ModelKind::Stage1 => c.imbalance,
            ModelKind::Stage2Efficient => c.changes,
            ModelKind::Stage2Minimax => c.max_burden,
            ModelKind::Stage2Weighted { .. } => keep * c.changes + w * c.max_burden,
            ModelKind::Stage2Gini { .. } => keep * c.changes + w * c.pairwise,
        }
    }

    pub fn is_feasible(&self, c: &Components) -> bool {
        self.istar.is_none_or(|cap| c.imbalance <= cap)
    }

    pub fn objective_value(&self, c: &Components, burdens: Vec<i64>) -> ObjectiveValue {
        ObjectiveValue {
            kind: self.kind.tag(),
            value: Rational64::new(self.scaled_objective(c), self.denominator()),
            imbalance: c.imbalance,
            changes: c.changes,
            max_burden: c.max_burden,
            pairwise: c.pairwise,
            burdens,
        }
    }

    pub fn check_candidates(&self, phi: &Assignment) -> Result<(), ModelError> {
        if phi.len() != self.inst.num_arcs() {
            return Err(AssignmentError::Length {
                expected: self.inst.num_arcs(),
                got: phi.len(),
            }
            .into());
        }
        for (a, &r) in phi.as_slice().iter().enumerate() {
            if !self.candidates.contains(a, r) {
                return Err(ModelError::CandidateViolation {
                    arc: self.inst.arc(a).id.clone(),
                    resource: self
                        .inst
                        .resources()
                        .get(r)
                        .cloned()
                        .unwrap_or_else(|| format!("#{r}")),
                });
            }
        }
        Ok(())
    }

    /// Machine-readable description of the model.
    pub fn summary(&self) -> serde_json::Value {
        let sizes: Vec<usize> = self.candidates.sets().iter().map(Vec::len).collect();
        serde_json::json!({
            "kind": self.kind.tag(),
            "alpha": match self.kind { ModelKind::Stage2Weighted { alpha } => Some(alpha.to_string()), _ => None },
            "omega": match self.kind { ModelKind::Stage2Gini { omega } => Some(omega.to_string()), _ => None },
            "istar": self.istar,
            "arcs": sizes.len(),
            "candidate_pairs": self.candidates.total_pairs(),
            "candidate_min": sizes.iter().min(),
            "candidate_max": sizes.iter().max(),
        })
    }
}

/// Objective value plus the accounting it was computed from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub kind: ModelKindTag,
    #[serde(with = "ratio_string")]
    pub value: Rational64,
    pub imbalance: i64,
    pub changes: i64,
    pub max_burden: i64,
    pub pairwise: i64,
    pub burdens: Vec<i64>,
}

impl ObjectiveValue {
    pub fn value_f64(&self) -> f64 {
        ratio_to_f64(self.value)
    }
}

pub fn ratio_to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Four-decimal rendering used in reports.
pub fn render_ratio(r: Rational64) -> String {
    format!("{:.4}", ratio_to_f64(r))
}

pub(crate) mod ratio_string {
    use num_rational::Rational64;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational64, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub feasible: bool,
    pub objective: ObjectiveValue,
}

/// Evaluate an assignment from scratch via the network accounting.
pub fn evaluate(spec: &ModelSpec<'_>, phi: &Assignment) -> Result<Evaluation, ModelError> {
    spec.check_candidates(phi)?;
    let inst = spec.instance();
    let rep = total_imbalance(inst, phi)?;
    let b = burdens(inst, phi)?;
    let c = Components {
        imbalance: rep.total,
        changes: b.total_changes,
        max_burden: b.max_burden,
        pairwise: b.pairwise_spread(),
    };
    Ok(Evaluation {
        feasible: spec.is_feasible(&c),
        objective: spec.objective_value(&c, b.per_scheduler),
    })
}
