//! Small hand-built instances with known optima.

use std::collections::BTreeMap;

use crate::network::{ArcData, Instance, InstanceData};

/// Build an instance where every arc may use every resource.
///
/// `arcs` entries are `(id, from, to, initial)`.
pub fn fully_compatible(
    nodes: &[&str],
    schedulers: &[(&str, &[&str])],
    resources: &[&str],
    arcs: &[(&str, &str, &str, &str)],
) -> Instance {
    let resources: Vec<String> = resources.iter().map(|r| r.to_string()).collect();
    let data = InstanceData {
        nodes: nodes.iter().map(|n| n.to_string()).collect(),
        schedulers: schedulers
            .iter()
            .map(|(s, ns)| (s.to_string(), ns.iter().map(|n| n.to_string()).collect()))
            .collect::<BTreeMap<_, _>>(),
        resources: resources.clone(),
        arcs: arcs
            .iter()
            .map(|&(id, from, to, initial)| ArcData {
                id: id.into(),
                from: from.into(),
                to: to.into(),
                volume: 10.0,
                tod: 8.0,
                tow: 32.0,
                miles: 100.0,
                size_class: "medium".into(),
                candidates: resources.clone(),
                initial: initial.into(),
            })
            .collect(),
        meta: serde_json::Value::Null,
    };
    data.validate().expect("fixture is valid")
}

/// Two nodes joined by opposite arcs on different resources.
pub fn t1() -> Instance {
    fully_compatible(
        &["n1", "n2"],
        &[("s1", &["n1", "n2"])],
        &["r1", "r2"],
        &[("a1", "n1", "n2", "r1"), ("a2", "n2", "n1", "r2")],
    )
}

/// Directed triangle split between two schedulers.
pub fn d1() -> Instance {
    fully_compatible(
        &["n1", "n2", "n3"],
        &[("s1", &["n1", "n2"]), ("s2", &["n3"])],
        &["r1", "r2"],
        &[
            ("a1", "n1", "n2", "r1"),
            ("a2", "n2", "n3", "r2"),
            ("a3", "n3", "n1", "r1"),
        ],
    )
}

/// Directed path n1 → n2 → n3.
pub fn p3() -> Instance {
    fully_compatible(
        &["n1", "n2", "n3"],
        &[("s1", &["n1", "n2", "n3"])],
        &["r1"],
        &[("e1", "n1", "n2", "r1"), ("e2", "n2", "n3", "r1")],
    )
}

/// Center with two outgoing arcs.
pub fn star() -> Instance {
    fully_compatible(
        &["c", "l1", "l2"],
        &[("s1", &["c", "l1", "l2"])],
        &["r1"],
        &[("a1", "c", "l1", "r1"), ("a2", "c", "l2", "r1")],
    )
}

/// n1 → {n2, n3} → n4.
pub fn diamond() -> Instance {
    fully_compatible(
        &["n1", "n2", "n3", "n4"],
        &[("s1", &["n1", "n2", "n3", "n4"])],
        &["r1"],
        &[
            ("a1", "n1", "n2", "r1"),
            ("a2", "n1", "n3", "r1"),
            ("a3", "n2", "n4", "r1"),
            ("a4", "n3", "n4", "r1"),
        ],
    )
}

pub fn by_name(name: &str) -> Option<Instance> {
    match name {
        "t1" => Some(t1()),
        "d1" => Some(d1()),
        "p3" => Some(p3()),
        "star" => Some(star()),
        "diamond" => Some(diamond()),
        _ => None,
    }
}
