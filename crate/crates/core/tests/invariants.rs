use num_rational::Rational64;
use proptest::prelude::*;
use resub_core::betweenness::KappaAssignment;
use resub_core::candidates::CandidateSets;
use resub_core::generator::{generate_instance, random_small_instance, ClassParams, SmallParams};
use resub_core::models::{
    build_stage1, build_stage2_efficient, build_stage2_gini, build_stage2_weighted, EvalState,
    Weight,
};
use resub_core::network::{burdens, total_imbalance, Assignment, Instance};
use resub_core::portfolio::{
    burden_distribution, classify_substitutions, gini_coefficient, partial_implementation_curve,
    sweep_alpha,
};
use resub_core::scorer::{top_kappa_candidates, top_kappa_metric, Predictor, RawFeatures};
use resub_core::solver::{solve_brute_force, Backend, SolverChoice, Status};

fn small() -> impl Strategy<Value = Instance> {
    any::<u64>().prop_map(|s| random_small_instance(s, SmallParams::default()))
}

/// A random assignment drawn from each arc's candidates.
fn assignment_for(inst: &Instance, picks: &[usize]) -> Assignment {
    Assignment::new(
        inst.arcs()
            .iter()
            .enumerate()
            .map(|(a, arc)| arc.candidates[picks[a % picks.len()] % arc.candidates.len()])
            .collect(),
    )
}

/// The same instance with its resource list reversed.
fn reversed_resources(inst: &Instance) -> (Instance, Vec<usize>) {
    let mut data = inst.to_data();
    data.resources.reverse();
    let n = inst.num_resources();
    (
        data.validate().unwrap(),
        (0..n).map(|r| n - 1 - r).collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn accounting_identities(inst in small(), picks in prop::collection::vec(0usize..8, 1..12)) {
        let phi = assignment_for(&inst, &picks);
        let report = total_imbalance(&inst, &phi).unwrap();
        let b = burdens(&inst, &phi).unwrap();
        prop_assert_eq!(b.per_scheduler.iter().sum::<i64>(), b.total_changes);
        prop_assert_eq!(b.total_changes as usize, phi.changed_arcs(&inst).len());
        prop_assert_eq!(b.max_burden, *b.per_scheduler.iter().max().unwrap());
        prop_assert!(report.total >= inst.structural_lower_bound());
        prop_assert_eq!(report.total % 2, 0);
        let (internal, collaborative) = classify_substitutions(&inst, &phi).unwrap();
        prop_assert_eq!(internal + collaborative, b.total_changes);
    }

    #[test]
    fn incremental_state_matches_recomputation(
        inst in small(),
        picks in prop::collection::vec(0usize..8, 1..12),
        moves in prop::collection::vec((0usize..10, 0usize..4), 0..20),
    ) {
        let mut phi = assignment_for(&inst, &picks);
        let mut state = EvalState::new(&inst, &phi);
        for (a, r) in moves {
            let a = a % inst.num_arcs();
            let r = inst.arc(a).candidates[r % inst.arc(a).candidates.len()];
            let before = state.imbalance();
            let delta = state.imbalance_delta(a, r);
            let after = state.components_after(a, r);
            state.apply(a, r);
            phi.set(a, r);
            prop_assert_eq!(state.imbalance(), before + delta);
            prop_assert_eq!(state.components(), after);
            prop_assert_eq!(state.imbalance(), total_imbalance(&inst, &phi).unwrap().total);
            prop_assert_eq!(state.burdens(), &burdens(&inst, &phi).unwrap().per_scheduler[..]);
        }
    }

    #[test]
    fn accounting_ignores_resource_order(inst in small(), picks in prop::collection::vec(0usize..8, 1..12)) {
        let phi = assignment_for(&inst, &picks);
        let (rev, map) = reversed_resources(&inst);
        let mapped = Assignment::new(phi.as_slice().iter().map(|&r| map[r]).collect());
        prop_assert_eq!(
            total_imbalance(&inst, &phi).unwrap().total,
            total_imbalance(&rev, &mapped).unwrap().total
        );
        prop_assert_eq!(burdens(&inst, &phi).unwrap(), burdens(&rev, &mapped).unwrap());
    }

    #[test]
    fn gini_matches_direct_formula(b in prop::collection::vec(0i64..50, 1..8)) {
        let bv = resub_core::network::BurdenVector::from_counts(b.clone());
        let total: i64 = b.iter().sum();
        let n = b.len() as f64;
        let mut ordered = 0.0;
        for x in &b {
            for y in &b {
                ordered += (x - y).abs() as f64;
            }
        }
        let want = if total == 0 { 0.0 } else { ordered / (2.0 * n * total as f64) };
        let g = gini_coefficient(&bv);
        prop_assert!((g - want).abs() <= 1e-12);
        prop_assert!(g >= 0.0 && g <= (n - 1.0) / n + 1e-12);
    }

    #[test]
    fn top_kappa_is_monotone_and_complete(
        rows in prop::collection::vec(prop::collection::vec((0.0f64..1.0, 0u32..5), 5), 1..30),
    ) {
        let preds: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x.0).collect()).collect();
        let labels: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let counts: Vec<f64> = r.iter().map(|x| x.1 as f64).collect();
                let s: f64 = counts.iter().sum();
                if s == 0.0 {
                    let mut one = vec![0.0; 5];
                    one[0] = 1.0;
                    one
                } else {
                    counts.iter().map(|c| c / s).collect()
                }
            })
            .collect();
        let mut last = 0.0;
        for k in 1..=5 {
            let v = top_kappa_metric(&preds, &labels, k).unwrap();
            prop_assert!(v >= last && (0.0..=1.0).contains(&v));
            last = v;
        }
        prop_assert_eq!(last, 1.0);
    }
}

struct Table(Vec<String>, Vec<f64>);

impl Predictor for Table {
    fn resources(&self) -> &[String] {
        &self.0
    }
    fn predict(&self, f: &RawFeatures) -> Vec<f64> {
        // vary by arc so rankings differ across arcs
        let shift = (f.volume as usize) % self.1.len();
        let mut v = self.1.clone();
        v.rotate_left(shift);
        v
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn candidate_sets_keep_incumbent_and_respect_relabeling(
        inst in small(),
        scores in prop::collection::vec(0.0f64..1.0, 4),
        k in 1u32..4,
    ) {
        let n = inst.num_resources();
        let p = Table(inst.resources().to_vec(), scores[..n].to_vec());
        let kappas = KappaAssignment::uniform(inst.num_arcs(), k);
        let sets = top_kappa_candidates(&inst, &p, &kappas);
        for (a, arc) in inst.arcs().iter().enumerate() {
            let s = sets.get(a);
            prop_assert!(s.contains(&arc.initial));
            prop_assert!(s.len() <= k as usize + 1);
            prop_assert!(s.iter().all(|r| arc.candidates.contains(r)));
        }
        // predictions are keyed by resource id, so reordering the declared
        // resources maps the candidate sets accordingly (distinct scores
        // make the ranking tie-free)
        let mut distinct = scores[..n].to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() == n {
            let (rev, map) = reversed_resources(&inst);
            let rev_sets = top_kappa_candidates(&rev, &p, &kappas);
            for a in 0..inst.num_arcs() {
                let mut mapped: Vec<usize> = sets.get(a).iter().map(|&r| map[r]).collect();
                mapped.sort_unstable();
                prop_assert_eq!(&mapped[..], rev_sets.get(a));
            }
        }
    }
}

fn stage2_optimum(inst: &Instance) -> (i64, CandidateSets) {
    let full = CandidateSets::full(inst);
    let s1 = solve_brute_force(&build_stage1(inst, full.clone()).unwrap()).unwrap();
    (s1.objective.unwrap().imbalance, full)
}

#[test]
fn gini_at_one_attains_minimum_pairwise_spread() {
    for seed in 0..150 {
        let inst = random_small_instance(seed, SmallParams::default());
        let (istar, full) = stage2_optimum(&inst);
        let spec = build_stage2_gini(&inst, full.clone(), istar, Weight::ONE).unwrap();
        let got = solve_brute_force(&spec)
            .unwrap()
            .objective
            .unwrap()
            .pairwise;
        // oracle: minimum pairwise spread over all I*-feasible assignments
        let mut best = i64::MAX;
        let sets = full.sets();
        let mut idx = vec![0usize; sets.len()];
        'outer: loop {
            let phi = Assignment::new(idx.iter().zip(sets).map(|(&i, s)| s[i]).collect());
            if total_imbalance(&inst, &phi).unwrap().total <= istar {
                best = best.min(burdens(&inst, &phi).unwrap().pairwise_spread());
            }
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < sets[k].len() {
                    continue 'outer;
                }
                idx[k] = 0;
            }
            break;
        }
        assert_eq!(got, best, "seed {seed}");
    }
}

#[test]
fn alpha_sweeps_are_monotone_and_nondominated() {
    let alphas: Vec<Weight> = ["0", "1/4", "1/2", "3/4", "1"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let exact = SolverChoice::new(Backend::Exact);
    for seed in 0..150 {
        let inst = random_small_instance(seed, SmallParams::default());
        let (istar, full) = stage2_optimum(&inst);
        let p = sweep_alpha(&inst, &full, istar, &alphas, &exact).unwrap();
        let coords: Vec<(i64, i64)> = p
            .entries()
            .iter()
            .map(|e| e.coordinates().unwrap())
            .collect();
        assert!(p
            .entries()
            .iter()
            .all(|e| e.solution.status == Status::Optimal));
        for w in coords.windows(2) {
            assert!(
                w[1].0 >= w[0].0 && w[1].1 <= w[0].1,
                "seed {seed}: {coords:?}"
            );
        }
        // interior weights: no strict domination among them
        let interior = &coords[1..coords.len() - 1];
        for x in interior {
            for y in interior {
                assert!(!(y.0 <= x.0 && y.1 <= x.1 && (y.0 < x.0 || y.1 < x.1)));
            }
        }
        // front: brute-force dominance check
        for f in p.front() {
            let (d, z) = f.coordinates().unwrap();
            for (dj, zj) in &coords {
                assert!(!(*dj <= d && *zj <= z && (*dj < d || *zj < z)));
            }
        }
        for row in burden_distribution(&p) {
            let sum: Rational64 = row.shares.iter().sum();
            let any = row.shares.iter().any(|s| *s != Rational64::from_integer(0));
            assert!(!any || sum == Rational64::from_integer(1));
        }
    }
}

/// Best imbalance reachable by applying exactly `k` of the plan's changes.
fn best_prefix(inst: &Instance, phi: &Assignment, k: usize) -> i64 {
    let changed = phi.changed_arcs(inst);
    let mut best = i64::MAX;
    for mask in 0u32..(1 << changed.len()) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let mut psi = Assignment::initial(inst);
        for (i, &a) in changed.iter().enumerate() {
            if mask >> i & 1 == 1 {
                psi.set(a, phi.get(a));
            }
        }
        best = best.min(total_imbalance(inst, &psi).unwrap().total);
    }
    best
}

#[test]
fn greedy_curves_against_exhaustive_prefixes() {
    let levels: Vec<Weight> = (0..=10)
        .map(|i| format!("{i}/10").parse().unwrap())
        .collect();
    for seed in 0..200 {
        let inst = random_small_instance(seed, SmallParams::default());
        let (istar, full) = stage2_optimum(&inst);
        for spec in [
            build_stage2_efficient(&inst, full.clone(), istar).unwrap(),
            build_stage2_weighted(&inst, full.clone(), istar, "3/5".parse().unwrap()).unwrap(),
        ] {
            let phi = solve_brute_force(&spec).unwrap().assignment.unwrap();
            let curve = partial_implementation_curve(&inst, &phi, &levels).unwrap();
            let i0 = total_imbalance(&inst, &Assignment::initial(&inst))
                .unwrap()
                .total;
            assert_eq!(curve[0].imbalance, i0);
            assert_eq!(
                curve.last().unwrap().imbalance,
                total_imbalance(&inst, &phi).unwrap().total
            );
            for w in curve.windows(2) {
                assert!(w[1].imbalance <= w[0].imbalance, "seed {seed}");
            }
            for pt in &curve {
                let best = best_prefix(&inst, &phi, pt.applied);
                assert!(pt.imbalance >= best);
                if pt.applied == 1 {
                    assert_eq!(
                        pt.imbalance, best,
                        "first greedy step is the best single change"
                    );
                }
            }
        }
    }
}

#[test]
fn generated_instances_are_seed_deterministic() {
    for seed in 0..20 {
        let p = ClassParams::desk(seed);
        let a = generate_instance(&p).unwrap();
        let b = generate_instance(&p).unwrap();
        assert_eq!(a.to_json_pretty(), b.to_json_pretty());
        assert_eq!(a.num_arcs(), p.arcs);
        assert_eq!(a.num_resources(), p.resources);
        assert_eq!(a.num_schedulers(), p.schedulers);
        let i0 = total_imbalance(&a, &Assignment::initial(&a)).unwrap().total;
        assert_eq!(a.meta()["i0"], i0);
    }
}
