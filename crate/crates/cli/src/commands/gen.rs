//! `gen`: instances, reference pools and fixtures.

use std::collections::BTreeSet;
use std::fs;

use anyhow::{Context, Result};
use resub_core::fixtures;
use resub_core::generator::{
    generate_example1, generate_instance, generate_reference_pool, write_manifest, ClassParams,
    ManifestRow, PoolOptions,
};
use resub_core::network::{total_imbalance, Assignment, Instance};
use resub_core::solver::SolveLimits;
use serde_json::{json, Value};

use super::{usage, Outcome};
use crate::args::{ClassArgs, GenArgs, GenInstanceArgs, GenPoolArgs, GenWhat};
use crate::run::RunContext;

pub fn run(args: &GenArgs, ctx: &mut RunContext) -> Result<Outcome> {
    match &args.what {
        GenWhat::Instance(a) => instance(a, ctx),
        GenWhat::Pool(a) => pool(a, ctx),
        GenWhat::Example1(a) => {
            let inst = generate_example1(a.seed);
            write_instance(ctx, &a.output, inst)
        }
        GenWhat::Fixture(a) => {
            let inst = fixtures::by_name(&a.name).ok_or_else(|| {
                usage(format!(
                    "unknown fixture `{}` (t1, d1, p3, star, diamond)",
                    a.name
                ))
            })?;
            let name = a
                .output
                .clone()
                .unwrap_or_else(|| format!("{}.json", a.name));
            write_instance(ctx, &name, inst)
        }
    }
}

/// Class parameters from a file, or from the flags.
fn class_params(c: &ClassArgs, seed: u64) -> Result<ClassParams> {
    if let Some(path) = &c.params {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading class parameters {}", path.display()))?;
        let p: ClassParams = serde_json::from_str(&text)
            .with_context(|| format!("parsing class parameters {}", path.display()))?;
        return Ok(p.with_seed(seed));
    }
    let imbalance_band = match c.band.as_deref() {
        None => None,
        Some(&[lo, hi]) => Some((lo, hi)),
        Some(_) => return Err(usage("--band takes two values: LO,HI")),
    };
    Ok(ClassParams {
        label: c.label.clone(),
        schedulers: c.schedulers,
        nodes: c.nodes,
        arcs: c.arcs,
        resources: c.resources,
        imbalance_band,
        matrix: c.matrix.into(),
        collaboration: c.collaboration,
        ..ClassParams::desk(seed)
    })
}

/// The instance with the run provenance merged into its metadata.
fn stamped(ctx: &RunContext, inst: Instance) -> Instance {
    let meta = match inst.meta().clone() {
        Value::Object(mut m) => {
            m.insert("run".into(), ctx.provenance());
            Value::Object(m)
        }
        Value::Null => json!({ "run": ctx.provenance() }),
        other => json!({ "data": other, "run": ctx.provenance() }),
    };
    inst.with_meta(meta)
}

fn i0(inst: &Instance) -> i64 {
    total_imbalance(inst, &Assignment::initial(inst))
        .expect("initial assignment is valid")
        .total
}

fn write_instance(ctx: &mut RunContext, name: &str, inst: Instance) -> Result<Outcome> {
    let inst = stamped(ctx, inst);
    ctx.write_raw_json(name, &inst.to_json_pretty())?;
    let mut out = Outcome::default();
    out.line("instance", name);
    out.line("nodes", inst.num_nodes());
    out.line("arcs", inst.num_arcs());
    out.line("resources", inst.num_resources());
    out.line("schedulers", inst.num_schedulers());
    out.line("initial imbalance", i0(&inst));
    Ok(out)
}

fn instance(a: &GenInstanceArgs, ctx: &mut RunContext) -> Result<Outcome> {
    let p = class_params(&a.class, a.seed)?;
    let inst = generate_instance(&p).context("instance-gen")?;
    write_instance(ctx, &a.output, inst)
}

fn pool(a: &GenPoolArgs, ctx: &mut RunContext) -> Result<Outcome> {
    if a.classes == 0 {
        return Err(usage("--classes must be at least 1"));
    }
    let base = class_params(&a.class, a.seed)?;
    let params: Vec<ClassParams> = (0..a.classes)
        .map(|k| {
            let mut p = base.clone().with_seed(base.seed + k as u64);
            if a.classes > 1 {
                p.label = format!("{}-{}", base.label, k + 1);
            }
            p
        })
        .collect();
    let opts = PoolOptions {
        alternates: a.alternates.max(1),
        limits: if a.node_limit > 0 {
            SolveLimits::default().with_nodes(a.node_limit)
        } else {
            SolveLimits::default()
        },
        ..PoolOptions::default()
    };
    let refs = generate_reference_pool(&params, a.weeks, a.seed, &opts).context("instance-gen")?;

    let mut seen = BTreeSet::new();
    let mut manifest = Vec::new();
    let mut index = Vec::new();
    let mut unproven = 0;
    for r in &refs {
        let base = format!("{}-w{:02}", r.class, r.week + 1);
        let inst_file = format!("instances/{base}.json");
        let inst = stamped(ctx, r.instance.clone());
        if seen.insert(inst_file.clone()) {
            ctx.write_raw_json(&inst_file, &inst.to_json_pretty())?;
            manifest.push(ManifestRow {
                instance_file: inst_file.clone(),
                seed: inst.meta()["seed"].as_u64().unwrap_or_default(),
                i0: i0(&inst),
                class: r.class.clone(),
            });
        }
        let ref_file = format!("references/{base}-{}.json", r.alternate + 1);
        ctx.write_json(
            &ref_file,
            json!({
                "instance": inst_file,
                "assignment": r.assignment.to_map(&inst),
                "proven": r.proven,
            }),
        )?;
        unproven += usize::from(!r.proven);
        index.push(json!({
            "instance": inst_file,
            "reference": ref_file,
            "class": r.class,
            "week": r.week + 1,
            "alternate": r.alternate + 1,
            "proven": r.proven,
        }));
    }
    ctx.write_csv("manifest.csv", |buf| Ok(write_manifest(&manifest, buf)?))?;
    ctx.write_json(
        "pool.json",
        json!({
            "classes": params,
            "weeks": a.weeks,
            "alternates": opts.alternates,
            "references": index,
        }),
    )?;
    let mut out = Outcome::default();
    out.line("classes", a.classes);
    out.line("instances", manifest.len());
    out.line("references", refs.len());
    out.line("unproven references", unproven);
    Ok(out)
}
