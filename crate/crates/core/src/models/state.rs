//! Incremental evaluation of complete assignments under single-arc moves.

use crate::network::{Assignment, Instance};

/// Integer components every objective is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Components {
    pub imbalance: i64,
    pub changes: i64,
    pub max_burden: i64,
    /// Σ_{s1<s2} |B_s1 − B_s2|.
    pub pairwise: i64,
}

/// Σ_{i<j} |b_i − b_j|.
pub fn pairwise_spread(burdens: &[i64]) -> i64 {
    if burdens.len() <= 16 {
        let mut total = 0;
        for (i, &x) in burdens.iter().enumerate() {
            for &y in &burdens[i + 1..] {
                total += (x - y).abs();
            }
        }
        return total;
    }
    let mut b = burdens.to_vec();
    b.sort_unstable();
    let n = b.len() as i64;
    b.iter()
        .enumerate()
        .map(|(k, &v)| v * (2 * k as i64 - (n - 1)))
        .sum()
}

/// Net flow per (node, resource), burdens and imbalance for one assignment,
/// updated in O(1) per move (O(|S| log |S|) for the pairwise term).
#[derive(Debug, Clone)]
pub struct EvalState<'a> {
    inst: &'a Instance,
    nr: usize,
    net: Vec<i64>,
    imbalance: i64,
    burdens: Vec<i64>,
    changes: i64,
    phi: Vec<usize>,
}

impl<'a> EvalState<'a> {
    pub fn new(inst: &'a Instance, phi: &Assignment) -> Self {
        let nr = inst.num_resources();
        let mut net = vec![0i64; inst.num_nodes() * nr];
        let mut burdens = vec![0i64; inst.num_schedulers()];
        let mut changes = 0;
        for (a, arc) in inst.arcs().iter().enumerate() {
            let r = phi.get(a);
            if !arc.is_self_loop() {
                net[arc.to * nr + r] += 1;
                net[arc.from * nr + r] -= 1;
            }
            if r != arc.initial {
                burdens[inst.arc_owner(a)] += 1;
                changes += 1;
            }
        }
        let imbalance = net.iter().map(|v| v.abs()).sum();
        EvalState {
            inst,
            nr,
            net,
            imbalance,
            burdens,
            changes,
            phi: phi.as_slice().to_vec(),
        }
    }

    pub fn imbalance(&self) -> i64 {
        self.imbalance
    }

    pub fn changes(&self) -> i64 {
        self.changes
    }

    pub fn burdens(&self) -> &[i64] {
        &self.burdens
    }

    pub fn resource(&self, a: usize) -> usize {
        self.phi[a]
    }

    pub fn assignment(&self) -> Assignment {
        Assignment::new(self.phi.clone())
    }

    pub fn components(&self) -> Components {
        Components {
            imbalance: self.imbalance,
            changes: self.changes,
            max_burden: self.burdens.iter().copied().max().unwrap_or(0),
            pairwise: pairwise_spread(&self.burdens),
        }
    }

    /// Change in total imbalance if arc `a` moved to resource `r`.
    pub fn imbalance_delta(&self, a: usize, r: usize) -> i64 {
        let arc = self.inst.arc(a);
        let old = self.phi[a];
        if old == r || arc.is_self_loop() {
            return 0;
        }
        let at = |n: usize, res: usize| self.net[n * self.nr + res];
        let d = |v: i64, step: i64| (v + step).abs() - v.abs();
        d(at(arc.to, old), -1)
            + d(at(arc.to, r), 1)
            + d(at(arc.from, old), 1)
            + d(at(arc.from, r), -1)
    }

    /// Components after moving arc `a` to `r`, without mutating.
    pub fn components_after(&mut self, a: usize, r: usize) -> Components {
        let old = self.phi[a];
        self.apply(a, r);
        let c = self.components();
        self.apply(a, old);
        c
    }

    pub fn apply(&mut self, a: usize, r: usize) {
        let old = self.phi[a];
        if old == r {
            return;
        }
        let arc = self.inst.arc(a);
        self.imbalance += self.imbalance_delta(a, r);
        if !arc.is_self_loop() {
            let nr = self.nr;
            self.net[arc.to * nr + old] -= 1;
            self.net[arc.to * nr + r] += 1;
            self.net[arc.from * nr + old] += 1;
            self.net[arc.from * nr + r] -= 1;
        }
        let owner = self.inst.arc_owner(a);
        if old == arc.initial {
            self.burdens[owner] += 1;
            self.changes += 1;
        } else if r == arc.initial {
            self.burdens[owner] -= 1;
            self.changes -= 1;
        }
        self.phi[a] = r;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::network::{burdens, total_imbalance};

    #[test]
    fn spread_examples() {
        assert_eq!(pairwise_spread(&[2, 2, 2]), 0);
        assert_eq!(pairwise_spread(&[0, 0, 6]), 12);
        assert_eq!(pairwise_spread(&[4, 0, 0]), 8);
        assert_eq!(pairwise_spread(&[]), 0);
        assert_eq!(pairwise_spread(&[3, 1, 2]), 4);
    }

    #[test]
    fn moves_track_full_recomputation() {
        let d1 = fixtures::d1();
        let mut st = EvalState::new(&d1, &Assignment::initial(&d1));
        assert_eq!(st.imbalance(), 4);
        for &(a, r) in &[(1, 0), (0, 1), (2, 1), (1, 1), (0, 0)] {
            let predicted = st.imbalance() + st.imbalance_delta(a, r);
            st.apply(a, r);
            let phi = st.assignment();
            assert_eq!(st.imbalance(), predicted);
            assert_eq!(st.imbalance(), total_imbalance(&d1, &phi).unwrap().total);
            let b = burdens(&d1, &phi).unwrap();
            assert_eq!(st.burdens(), b.per_scheduler.as_slice());
            assert_eq!(st.changes(), b.total_changes);
        }
    }
}
