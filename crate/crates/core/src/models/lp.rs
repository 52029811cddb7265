//! CPLEX LP-format export of a [`ModelSpec`].
//!
//! Variables: binaries `x_{arc}_{resource}`, continuous `I_{node}_{resource}`
//! (only for pairs some non-loop incident arc can use), `B_{scheduler}`,
//! `Z` and `D_{s1}_{s2}`. Fractional weights are scaled to integers over the
//! spec's denominator.

use std::fmt::Write as _;

use serde::Serialize;

use super::{ModelKind, ModelKindTag, ModelSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LpSummary {
    pub kind: ModelKindTag,
    pub binaries: usize,
    pub imbalance_vars: usize,
    pub continuous: usize,
    pub constraints: usize,
    pub assignment_rows: usize,
    pub linearization_rows: usize,
    pub objective_scale: i64,
}

#[derive(Debug, Clone)]
pub struct LpExport {
    pub text: String,
    pub summary: LpSummary,
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

type Terms = Vec<(i64, String)>;

fn write_expr(out: &mut String, terms: &Terms) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (k, (c, v)) in terms.iter().enumerate() {
        if k > 0 && k % 8 == 0 {
            out.push_str("\n   ");
        }
        let sign = if *c < 0 { '-' } else { '+' };
        match c.abs() {
            1 => write!(out, " {sign} {v}").unwrap(),
            m => write!(out, " {sign} {m} {v}").unwrap(),
        }
    }
}

struct Rows {
    text: String,
    count: usize,
}

impl Rows {
    fn push(&mut self, name: &str, terms: &Terms, sense: &str, rhs: i64) {
        write!(self.text, " {name}:").unwrap();
        write_expr(&mut self.text, terms);
        writeln!(self.text, " {sense} {rhs}").unwrap();
        self.count += 1;
    }
}

pub fn export_lp(spec: &ModelSpec<'_>) -> LpExport {
    let inst = spec.instance();
    let cands = spec.candidates();
    let node = |n: usize| sanitize(&inst.nodes()[n]);
    let res = |r: usize| sanitize(&inst.resources()[r]);
    let sched = |s: usize| sanitize(&inst.schedulers()[s].id);
    let x = |a: usize, r: usize| format!("x_{}_{}", sanitize(&inst.arc(a).id), res(r));

    let nn = inst.num_nodes();
    let nr = inst.num_resources();
    let mut inflow: Vec<Terms> = vec![Vec::new(); nn * nr];
    let mut outflow: Vec<Terms> = vec![Vec::new(); nn * nr];
    for (a, arc) in inst.arcs().iter().enumerate() {
        if arc.is_self_loop() {
            continue;
        }
        for &r in cands.get(a) {
            inflow[arc.to * nr + r].push((1, x(a, r)));
            outflow[arc.from * nr + r].push((1, x(a, r)));
        }
    }
    let imb_pairs: Vec<(usize, usize)> = (0..nn)
        .flat_map(|n| (0..nr).map(move |r| (n, r)))
        .filter(|&(n, r)| !inflow[n * nr + r].is_empty() || !outflow[n * nr + r].is_empty())
        .collect();
    let ivar = |n: usize, r: usize| format!("I_{}_{}", node(n), res(r));

    let kind = spec.kind();
    let stage2 = kind.is_stage2();
    let uses_z = matches!(
        kind,
        ModelKind::Stage2Minimax | ModelKind::Stage2Weighted { .. }
    );
    let uses_d = matches!(kind, ModelKind::Stage2Gini { .. });
    let ns = inst.num_schedulers();
    let pairs: Vec<(usize, usize)> = (0..ns)
        .flat_map(|i| (i + 1..ns).map(move |j| (i, j)))
        .collect();
    let dvar = |i: usize, j: usize| format!("D_{}_{}", sched(i), sched(j));
    let bvar = |s: usize| format!("B_{}", sched(s));
    let (keep, w) = spec.scaled_weights();

    let mut objective: Terms = Vec::new();
    match kind {
        ModelKind::Stage1 => objective.extend(imb_pairs.iter().map(|&(n, r)| (1, ivar(n, r)))),
        ModelKind::Stage2Efficient => objective.extend((0..ns).map(|s| (1, bvar(s)))),
        ModelKind::Stage2Minimax => objective.push((1, "Z".to_string())),
        ModelKind::Stage2Weighted { .. } => {
            if keep != 0 {
                objective.extend((0..ns).map(|s| (keep, bvar(s))));
            }
            if w != 0 {
                objective.push((w, "Z".to_string()));
            }
        }
        ModelKind::Stage2Gini { .. } => {
            if keep != 0 {
                objective.extend((0..ns).map(|s| (keep, bvar(s))));
            }
            if w != 0 {
                objective.extend(pairs.iter().map(|&(i, j)| (w, dvar(i, j))));
            }
        }
    }

    let mut text = String::new();
    writeln!(text, "\\ model: {}", kind.tag().as_str()).unwrap();
    writeln!(text, "\\ instance: {}", inst.fingerprint()).unwrap();
    if let Some(cap) = spec.istar() {
        writeln!(text, "\\ imbalance cap: {cap}").unwrap();
    }
    if spec.denominator() != 1 {
        writeln!(text, "\\ objective scaled by {}", spec.denominator()).unwrap();
    }
    text.push_str("Minimize\n obj:");
    if objective.is_empty() {
        // every weight is zero on the remaining terms; keep a valid expression
        write!(text, " 0 {}", bvar(0)).unwrap();
    } else {
        write_expr(&mut text, &objective);
    }
    text.push_str("\nSubject To\n");

    let mut rows = Rows {
        text: String::new(),
        count: 0,
    };
    for &(n, r) in &imb_pairs {
        let i = ivar(n, r);
        let mut plus: Terms = inflow[n * nr + r].clone();
        plus.extend(outflow[n * nr + r].iter().map(|(_, v)| (-1, v.clone())));
        plus.push((-1, i.clone()));
        rows.push(&format!("bal_p_{}_{}", node(n), res(r)), &plus, "<=", 0);
        let mut minus: Terms = outflow[n * nr + r].clone();
        minus.extend(inflow[n * nr + r].iter().map(|(_, v)| (-1, v.clone())));
        minus.push((-1, i));
        rows.push(&format!("bal_m_{}_{}", node(n), res(r)), &minus, "<=", 0);
    }
    for a in 0..inst.num_arcs() {
        let terms: Terms = cands.get(a).iter().map(|&r| (1, x(a, r))).collect();
        rows.push(
            &format!("assign_{}", sanitize(&inst.arc(a).id)),
            &terms,
            "=",
            1,
        );
    }
    let assignment_rows = inst.num_arcs();
    let mut linearization_rows = 0;
    if let Some(cap) = spec.istar() {
        let terms: Terms = imb_pairs.iter().map(|&(n, r)| (1, ivar(n, r))).collect();
        rows.push("cap", &terms, "<=", cap);
        for s in 0..ns {
            let owned: Vec<usize> = (0..inst.num_arcs())
                .filter(|&a| inst.arc_owner(a) == s)
                .collect();
            let mut terms: Terms = vec![(1, bvar(s))];
            terms.extend(owned.iter().map(|&a| (1, x(a, inst.arc(a).initial))));
            rows.push(
                &format!("burden_{}", sched(s)),
                &terms,
                "=",
                owned.len() as i64,
            );
        }
    }
    if uses_z {
        for s in 0..ns {
            rows.push(
                &format!("minimax_{}", sched(s)),
                &vec![(1, "Z".to_string()), (-1, bvar(s))],
                ">=",
                0,
            );
            linearization_rows += 1;
        }
    }
    if uses_d {
        for &(i, j) in &pairs {
            let d = dvar(i, j);
            rows.push(
                &format!("gini_p_{}_{}", sched(i), sched(j)),
                &vec![(1, d.clone()), (-1, bvar(i)), (1, bvar(j))],
                ">=",
                0,
            );
            rows.push(
                &format!("gini_m_{}_{}", sched(i), sched(j)),
                &vec![(1, d), (1, bvar(i)), (-1, bvar(j))],
                ">=",
                0,
            );
            linearization_rows += 2;
        }
    }
    text.push_str(&rows.text);

    let mut binaries = Vec::new();
    for a in 0..inst.num_arcs() {
        for &r in cands.get(a) {
            binaries.push(x(a, r));
        }
    }
    text.push_str("Binaries\n");
    for chunk in binaries.chunks(8) {
        writeln!(text, " {}", chunk.join(" ")).unwrap();
    }
    text.push_str("End\n");

    let continuous = imb_pairs.len()
        + if stage2 { ns } else { 0 }
        + usize::from(uses_z)
        + if uses_d { pairs.len() } else { 0 };
    LpExport {
        text,
        summary: LpSummary {
            kind: kind.tag(),
            binaries: binaries.len(),
            imbalance_vars: imb_pairs.len(),
            continuous,
            constraints: rows.count,
            assignment_rows,
            linearization_rows,
            objective_scale: spec.denominator(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::CandidateSets;
    use crate::fixtures;
    use crate::models::{
        build_stage1, build_stage2_gini, build_stage2_minimax, build_stage2_weighted,
    };

    #[test]
    fn stage1_t1_counts() {
        let t1 = fixtures::t1();
        let lp = export_lp(&build_stage1(&t1, CandidateSets::full(&t1)).unwrap());
        assert_eq!(lp.summary.binaries, 4);
        assert_eq!(lp.summary.imbalance_vars, 4);
        assert_eq!(lp.summary.assignment_rows, 2);
        assert_eq!(lp.text.matches(" = 1\n").count(), 2);
        assert!(lp.text.contains("x_a1_r2"));
        assert!(lp.text.contains("I_n2_r1"));
        assert!(lp.text.ends_with("End\n"));
    }

    #[test]
    fn minimax_d1_has_z_and_two_rows() {
        let d1 = fixtures::d1();
        let lp = export_lp(&build_stage2_minimax(&d1, CandidateSets::full(&d1), 0).unwrap());
        assert_eq!(lp.summary.linearization_rows, 2);
        assert_eq!(lp.text.matches("minimax_").count(), 2);
        assert!(lp.text.contains(" obj: + Z\n"));
        assert!(lp.text.contains(" cap:"));
    }

    #[test]
    fn export_is_deterministic() {
        let d1 = fixtures::d1();
        let spec =
            build_stage2_gini(&d1, CandidateSets::full(&d1), 0, "1/3".parse().unwrap()).unwrap();
        assert_eq!(export_lp(&spec).text, export_lp(&spec).text);
        assert!(export_lp(&spec).text.contains("+ 2 B_s1"));
        assert!(export_lp(&spec).text.contains("+ D_s1_s2"));
    }

    #[test]
    fn weighted_objective_is_scaled() {
        let d1 = fixtures::d1();
        let spec = build_stage2_weighted(&d1, CandidateSets::full(&d1), 0, "0.25".parse().unwrap())
            .unwrap();
        let lp = export_lp(&spec);
        assert!(lp.text.contains(" obj: + 3 B_s1 + 3 B_s2 + Z"));
        assert_eq!(lp.summary.objective_scale, 4);
    }
}
