//! Reference-solution pools: weekly instances solved to optimality.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_instance, ClassParams, GenError};
use crate::candidates::CandidateSets;
use crate::models::{build_stage1, build_stage2_efficient};
use crate::network::{Assignment, Instance};
use crate::solver::{
    enumerate_optima, solve_exact_with, solve_ils, ExactOptions, IlsParams, SolveLimits,
    BRUTE_FORCE_LIMIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolOptions {
    /// Optimal assignments kept per instance (1 = the solver's optimum only).
    pub alternates: usize,
    pub limits: SolveLimits,
    pub ils: IlsParams,
}

impl Default for PoolOptions {
    fn default() -> Self {
        PoolOptions {
            alternates: 1,
            limits: SolveLimits::default().with_nodes(5_000_000),
            ils: IlsParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reference {
    pub instance: Instance,
    pub assignment: Assignment,
    pub class: String,
    pub week: usize,
    pub alternate: usize,
    /// Whether the reference was proven optimal.
    pub proven: bool,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Parameters of week `week` of class `class_index`: fresh instance seed,
/// shared lane network.
pub fn weekly_params(p: &ClassParams, class_index: usize, week: usize, seed: u64) -> ClassParams {
    let mut q = p.clone();
    q.seed = mix(mix(seed ^ mix(class_index as u64)) ^ week as u64);
    q.network_seed = Some(p.network_seed.unwrap_or(p.seed));
    q
}

fn solve_references(
    inst: Instance,
    class: &str,
    week: usize,
    seed: u64,
    opts: &PoolOptions,
) -> Result<Vec<Reference>, GenError> {
    let full = CandidateSets::full(&inst);
    let stage1 = build_stage1(&inst, full.clone()).expect("full candidates are valid");
    let warm = solve_ils(&stage1, seed, opts.ils).assignment;
    let s1 = solve_exact_with(
        &stage1,
        opts.limits,
        &ExactOptions {
            warm_start: warm,
            ..Default::default()
        },
    );
    let istar = s1
        .objective
        .as_ref()
        .map(|o| o.imbalance)
        .ok_or_else(|| GenError::NoReference(inst.fingerprint()))?;
    let stage2 = build_stage2_efficient(&inst, full, istar).expect("full candidates are valid");
    let warm = solve_ils(&stage2, seed, opts.ils).assignment;
    let s2 = solve_exact_with(
        &stage2,
        opts.limits,
        &ExactOptions {
            warm_start: warm,
            ..Default::default()
        },
    );
    let phi = s2
        .assignment
        .clone()
        .ok_or_else(|| GenError::NoReference(inst.fingerprint()))?;
    let proven =
        s1.status == crate::solver::Status::Optimal && s2.status == crate::solver::Status::Optimal;
    let assignments =
        if opts.alternates > 1 && proven && stage2.candidates().search_space() <= BRUTE_FORCE_LIMIT
        {
            enumerate_optima(&stage2, opts.alternates)?.assignments
        } else {
            vec![phi]
        };
    Ok(assignments
        .into_iter()
        .enumerate()
        .map(|(k, assignment)| Reference {
            instance: inst.clone(),
            assignment,
            class: class.to_string(),
            week,
            alternate: k,
            proven,
        })
        .collect())
}

/// `pool_size` weekly instances per class, each solved through Stage 1 and
/// Stage 2 (efficient), with up to `alternates` optimal assignments each.
pub fn generate_reference_pool(
    params: &[ClassParams],
    pool_size: usize,
    seed: u64,
    opts: &PoolOptions,
) -> Result<Vec<Reference>, GenError> {
    if pool_size == 0 {
        return Err(GenError::EmptyPool);
    }
    let jobs: Vec<(usize, usize)> = (0..params.len())
        .flat_map(|c| (0..pool_size).map(move |w| (c, w)))
        .collect();
    let chunks: Vec<Result<Vec<Reference>, GenError>> = jobs
        .par_iter()
        .map(|&(c, w)| {
            let q = weekly_params(&params[c], c, w, seed);
            let inst = generate_instance(&q)?;
            solve_references(inst, &params[c].label, w, q.seed, opts)
        })
        .collect();
    let mut out = Vec::new();
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// Solve a caller-supplied instance into references, as for pool members.
pub fn references_for(
    inst: Instance,
    seed: u64,
    opts: &PoolOptions,
) -> Result<Vec<Reference>, GenError> {
    solve_references(inst, "custom", 0, seed, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub instance_file: String,
    pub seed: u64,
    pub i0: i64,
    pub class: String,
}

pub fn write_manifest<W: Write>(rows: &[ManifestRow], sink: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::models::evaluate;
    use crate::solver::solve_brute_force;

    #[test]
    fn two_optima_give_two_references() {
        // T1 stage 2 (I* = 0) has two optima: a1 -> r2 or a2 -> r1
        let opts = PoolOptions {
            alternates: 2,
            ..Default::default()
        };
        let refs = references_for(fixtures::t1(), 0, &opts).unwrap();
        assert_eq!(refs.len(), 2);
        assert_ne!(refs[0].assignment, refs[1].assignment);
    }

    #[test]
    fn empty_pool_is_an_error() {
        assert!(matches!(
            generate_reference_pool(&[ClassParams::desk(1)], 0, 1, &PoolOptions::default()),
            Err(GenError::EmptyPool)
        ));
    }

    #[test]
    fn pool_is_deterministic_and_optimal() {
        let p = ClassParams {
            arcs: 12,
            resources: 5,
            ..ClassParams::desk(4)
        };
        let opts = PoolOptions::default();
        let a = generate_reference_pool(std::slice::from_ref(&p), 3, 9, &opts).unwrap();
        let b = generate_reference_pool(&[p], 3, 9, &opts).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.instance, y.instance);
            assert_eq!(x.assignment, y.assignment);
        }
        // weeks share lanes but differ in draws
        assert_ne!(a[0].instance, a[1].instance);
        for r in &a {
            let inst = &r.instance;
            let full = CandidateSets::full(inst);
            let s1 = solve_brute_force(&build_stage1(inst, full.clone()).unwrap());
            let Ok(s1) = s1 else { continue };
            let istar = s1.objective.unwrap().imbalance;
            let spec = build_stage2_efficient(inst, full, istar).unwrap();
            let best = solve_brute_force(&spec).unwrap().value();
            let ev = evaluate(&spec, &r.assignment).unwrap();
            assert!(ev.feasible);
            assert_eq!(Some(ev.objective.value), best);
        }
    }

    #[test]
    fn manifest_csv() {
        let rows = vec![ManifestRow {
            instance_file: "w00.json".into(),
            seed: 3,
            i0: 12,
            class: "desk".into(),
        }];
        let mut buf = Vec::new();
        write_manifest(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "instance_file,seed,i0,class\nw00.json,3,12,desk\n"
        );
    }
}
