//! Undirected structure-only graphs with ground-truth target nodes, and the
//! wheel / cycle generators used by the benchmark tasks.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// One qubit per node; dense statevectors above this size are out of reach.
pub const MAX_NODES: usize = 16;

/// An undirected simple graph with a binary class label.
///
/// Edges are stored as `(u, v)` with `u < v`, sorted lexicographically and
/// deduplicated. Targets are sorted node indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    pub id: u64,
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    pub label: u8,
    targets: Vec<usize>,
}

impl Graph {
    pub fn new(
        id: u64,
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        label: u8,
        targets: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        if label > 1 {
            return Err(Error::InvalidGraph(format!("label {label} is not binary")));
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop on node {u}")));
            }
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            set.insert((u.min(v), u.max(v)));
        }
        let targets: BTreeSet<usize> = targets.into_iter().collect();
        if let Some(&t) = targets.iter().find(|&&t| t >= num_nodes) {
            return Err(Error::InvalidGraph(format!("target {t} out of range")));
        }
        Ok(Self {
            id,
            num_nodes,
            edges: set.into_iter().collect(),
            label,
            targets: targets.into_iter().collect(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn with_id(mut self, id: u64) -> Self {
        self.id = id;
        self
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        check_permutation(perm, self.num_nodes)?;
        Graph::new(
            self.id,
            self.num_nodes,
            self.edges.iter().map(|&(u, v)| (perm[u], perm[v])),
            self.label,
            self.targets.iter().map(|&t| perm[t]),
        )
    }

    /// Drops the listed nodes and their incident edges. Survivors are
    /// renumbered contiguously in their original relative order.
    pub fn remove_nodes(&self, removed: &[usize]) -> Result<Graph> {
        let mut gone = vec![false; self.num_nodes];
        for &v in removed {
            if v >= self.num_nodes {
                return Err(Error::InvalidElement { index: v, count: self.num_nodes });
            }
            gone[v] = true;
        }
        let survivors = gone.iter().filter(|&&g| !g).count();
        if survivors == 0 {
            return Err(Error::EmptyGraph { nodes: self.num_nodes, removed: removed.len() });
        }
        let mut remap = vec![usize::MAX; self.num_nodes];
        let mut next = 0;
        for (v, &g) in gone.iter().enumerate() {
            if !g {
                remap[v] = next;
                next += 1;
            }
        }
        Graph::new(
            self.id,
            survivors,
            self.edges
                .iter()
                .filter(|&&(u, v)| !gone[u] && !gone[v])
                .map(|&(u, v)| (remap[u], remap[v])),
            self.label,
            self.targets.iter().filter(|&&t| !gone[t]).map(|&t| remap[t]),
        )
    }

    /// Drops the listed edges (by index into [`Graph::edges`]); the node set is unchanged.
    pub fn remove_edges(&self, removed: &[usize]) -> Result<Graph> {
        let mut gone = vec![false; self.edges.len()];
        for &e in removed {
            if e >= self.edges.len() {
                return Err(Error::InvalidElement { index: e, count: self.edges.len() });
            }
            gone[e] = true;
        }
        Graph::new(
            self.id,
            self.num_nodes,
            self.edges.iter().zip(&gone).filter(|(_, &g)| !g).map(|(&e, _)| e),
            self.label,
            self.targets.iter().copied(),
        )
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidPermutation(format!(
            "length {} does not match {n} nodes",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidPermutation(format!("{perm:?} is not a bijection on 0..{n}")));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Wheel,
    Cycle,
}

/// Wheel on `n_rim + 1` nodes with the hub relabeled to `hub_position`; the
/// remaining nodes are shuffled by `rng_seed`.
pub fn make_wheel(n_rim: usize, hub_position: usize, rng_seed: u64) -> Result<Graph> {
    if n_rim < 3 {
        return Err(Error::InvalidSize(format!("wheel rim needs at least 3 nodes, got {n_rim}")));
    }
    let n = n_rim + 1;
    if hub_position >= n {
        return Err(Error::InvalidSize(format!("hub position {hub_position} outside 0..{n}")));
    }
    let mut rest: Vec<usize> = (0..n).filter(|&v| v != hub_position).collect();
    rest.shuffle(&mut seed::rng(rng_seed));
    // canonical layout: hub 0, rim 1..=n_rim
    let mut perm = Vec::with_capacity(n);
    perm.push(hub_position);
    perm.extend(rest);

    let edges = (1..=n_rim)
        .map(|i| (0, i))
        .chain((1..=n_rim).map(|i| (i, if i == n_rim { 1 } else { i + 1 })));
    Graph::new(0, n, edges, 1, [0])?.permuted(&perm)
}

pub fn make_cycle(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidSize(format!("cycle needs at least 3 nodes, got {n}")));
    }
    Graph::new(0, n, (0..n).map(|i| (i, (i + 1) % n)), 0, [])
}

/// Disjoint union of two wheels/cycles with `sizes` total nodes per component,
/// globally relabeled by a random permutation. Labeled 1 iff both are wheels.
pub fn make_two_component(
    kind_a: ComponentKind,
    kind_b: ComponentKind,
    sizes: [usize; 2],
    rng_seed: u64,
) -> Result<Graph> {
    let total = sizes[0] + sizes[1];
    if total > MAX_NODES {
        return Err(Error::QubitBudget { nodes: total, budget: MAX_NODES });
    }
    let mut edges = Vec::new();
    let mut targets = Vec::new();
    let mut offset = 0;
    for (i, (kind, size)) in [(kind_a, sizes[0]), (kind_b, sizes[1])].into_iter().enumerate() {
        let part = match kind {
            ComponentKind::Wheel => {
                let rim = size
                    .checked_sub(1)
                    .ok_or_else(|| Error::InvalidSize("empty wheel component".into()))?;
                make_wheel(rim, 0, seed::derive(rng_seed, i as u64))?
            }
            ComponentKind::Cycle => make_cycle(size)?,
        };
        edges.extend(part.edges().iter().map(|&(u, v)| (u + offset, v + offset)));
        targets.extend(part.targets().iter().map(|&t| t + offset));
        offset += size;
    }
    let label = u8::from(kind_a == ComponentKind::Wheel && kind_b == ComponentKind::Wheel);
    let mut perm: Vec<usize> = (0..total).collect();
    perm.shuffle(&mut seed::rng(seed::derive(rng_seed, 2)));
    Graph::new(0, total, edges, label, targets)?.permuted(&perm)
}

/// Random relabeling of all nodes.
pub fn shuffle_labels(g: &Graph, rng_seed: u64) -> Result<Graph> {
    let mut perm: Vec<usize> = (0..g.num_nodes()).collect();
    perm.shuffle(&mut seed::rng(rng_seed));
    g.permuted(&perm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sorted(mut v: Vec<usize>) -> Vec<usize> {
        v.sort_unstable();
        v
    }

    #[test]
    fn wheel_of_five() {
        let g = make_wheel(4, 0, 9).unwrap();
        assert_eq!(g.num_nodes(), 5);
        assert_eq!(g.num_edges(), 8);
        assert_eq!(g.targets(), &[0]);
        assert_eq!(g.label, 1);
        let deg = g.degrees();
        assert_eq!(deg[0], 4);
        assert!(deg[1..].iter().all(|&d| d == 3));
    }

    #[test]
    fn k4_wheel_hub_position() {
        let g = make_wheel(3, 2, 1).unwrap();
        assert_eq!(g.targets(), &[2]);
        assert_eq!(g.degrees(), vec![3, 3, 3, 3]);
        assert_eq!(g.num_edges(), 6);
    }

    #[test]
    fn largest_case_one_wheel() {
        for h in 0..13 {
            let g = make_wheel(12, h, h as u64).unwrap();
            assert_eq!(g.num_nodes(), 13);
            assert_eq!(g.degrees()[h], 12);
        }
    }

    #[test]
    fn wheel_rejects_small_rim_and_bad_hub() {
        assert!(matches!(make_wheel(2, 0, 0), Err(Error::InvalidSize(_))));
        assert!(matches!(make_wheel(4, 5, 0), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn cycles() {
        let c3 = make_cycle(3).unwrap();
        assert_eq!(c3.num_edges(), 3);
        let c13 = make_cycle(13).unwrap();
        assert_eq!(c13.num_edges(), 13);
        assert!(c13.degrees().iter().all(|&d| d == 2));
        assert_eq!(make_cycle(4).unwrap().degrees(), vec![2, 2, 2, 2]);
        assert_eq!(make_cycle(4).unwrap().label, 0);
        assert!(make_cycle(4).unwrap().targets().is_empty());
        assert!(matches!(make_cycle(2), Err(Error::InvalidSize(_))));
    }

    /// Edge count of a disjoint union by direct enumeration of the parts.
    fn union_edge_oracle(parts: &[(ComponentKind, usize)]) -> usize {
        parts
            .iter()
            .map(|&(k, n)| {
                let mut count = 0;
                for u in 0..n {
                    for v in u + 1..n {
                        let adjacent = match k {
                            ComponentKind::Cycle => v == u + 1 || (u == 0 && v == n - 1),
                            // node 0 hub, 1..n rim cycle
                            ComponentKind::Wheel => {
                                u == 0 || v == u + 1 || (u == 1 && v == n - 1)
                            }
                        };
                        count += usize::from(adjacent);
                    }
                }
                count
            })
            .sum()
    }

    #[test]
    fn two_wheels_and_two_cycles() {
        use ComponentKind::*;
        let ww = make_two_component(Wheel, Wheel, [5, 5], 3).unwrap();
        assert_eq!(ww.num_nodes(), 10);
        assert_eq!(ww.num_edges(), union_edge_oracle(&[(Wheel, 5), (Wheel, 5)]));
        assert_eq!(ww.num_edges(), 16);
        assert_eq!(ww.targets().len(), 2);
        assert_eq!(ww.label, 1);
        let deg = ww.degrees();
        assert!(ww.targets().iter().all(|&t| deg[t] == 4));

        let cc = make_two_component(Cycle, Cycle, [5, 5], 3).unwrap();
        assert_eq!(cc.num_edges(), 10);
        assert!(cc.targets().is_empty());
        assert_eq!(cc.label, 0);

        let big = make_two_component(Wheel, Wheel, [8, 8], 5).unwrap();
        assert_eq!(big.num_nodes(), 16);
        assert!(matches!(
            make_two_component(Wheel, Wheel, [9, 8], 5),
            Err(Error::QubitBudget { nodes: 17, .. })
        ));
        let mixed = make_two_component(Wheel, Cycle, [6, 6], 1).unwrap();
        assert_eq!(mixed.label, 0);
        assert_eq!(mixed.targets().len(), 1);
    }

    #[test]
    fn remove_hub_gives_cycle() {
        let g = make_wheel(4, 0, 0).unwrap();
        let c = g.remove_nodes(&[0]).unwrap();
        assert_eq!(c.num_nodes(), 4);
        assert_eq!(c.num_edges(), 4);
        assert!(c.targets().is_empty());
        assert!(c.degrees().iter().all(|&d| d == 2));
    }

    #[test]
    fn remove_one_rim_node() {
        // canonical W5: hub 0, rim 1-2-3-4-1; drop rim node 1
        let g = Graph::new(0, 5, [(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (2, 3), (3, 4), (1, 4)], 1, [0])
            .unwrap();
        let h = g.remove_nodes(&[1]).unwrap();
        // survivors 0,2,3,4 -> 0,1,2,3; hand enumeration of the remaining edges
        let expected = vec![(0, 1), (0, 2), (0, 3), (1, 2), (2, 3)];
        assert_eq!(h.edges(), expected.as_slice());
        assert_eq!(h.targets(), &[0]);
    }

    #[test]
    fn remove_everything_fails() {
        let g = make_cycle(3).unwrap();
        assert!(matches!(g.remove_nodes(&[0, 1, 2]), Err(Error::EmptyGraph { .. })));
        assert!(matches!(g.remove_nodes(&[3]), Err(Error::InvalidElement { .. })));
    }

    #[test]
    fn permutation_must_be_bijective() {
        let g = make_cycle(4).unwrap();
        assert!(g.permuted(&[0, 1, 2, 3]).is_ok());
        assert!(matches!(g.permuted(&[0, 0, 2, 3]), Err(Error::InvalidPermutation(_))));
        assert!(matches!(g.permuted(&[0, 1, 2]), Err(Error::InvalidPermutation(_))));
    }

    #[test]
    fn constructor_normalizes_and_validates() {
        let g = Graph::new(1, 3, [(2, 0), (0, 2), (1, 0)], 0, [2, 2]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2)]);
        assert_eq!(g.targets(), &[2]);
        assert!(Graph::new(1, 3, [(1, 1)], 0, []).is_err());
        assert!(Graph::new(1, 3, [(0, 3)], 0, []).is_err());
        assert!(Graph::new(1, 3, [], 2, []).is_err());
        assert!(Graph::new(1, 3, [], 0, [3]).is_err());
    }

    proptest! {
        #[test]
        fn wheel_hub_is_unique_max_degree(n_rim in 4usize..=15, hub in 0usize..16, s in any::<u64>()) {
            let hub = hub % (n_rim + 1);
            let g = make_wheel(n_rim, hub, s).unwrap();
            let deg = g.degrees();
            prop_assert_eq!(deg.iter().sum::<usize>(), 2 * g.num_edges());
            prop_assert!(deg.iter().enumerate().all(|(v, &d)| v == hub || d < deg[hub]));
        }

        #[test]
        fn relabeling_preserves_degree_multiset(n_rim in 3usize..=12, s in any::<u64>(), t in any::<u64>()) {
            let g = make_wheel(n_rim, 0, s).unwrap();
            let h = shuffle_labels(&g, t).unwrap();
            prop_assert_eq!(h.num_edges(), g.num_edges());
            prop_assert_eq!(sorted(h.degrees()), sorted(g.degrees()));
        }

        #[test]
        fn removal_is_order_invariant(n_rim in 4usize..=12, s in any::<u64>(), picks in proptest::collection::vec(0usize..13, 0..4)) {
            let g = make_wheel(n_rim, 0, s).unwrap();
            let picks: Vec<usize> = picks.into_iter().map(|p| p % g.num_nodes()).collect();
            let mut rev = picks.clone();
            rev.reverse();
            prop_assert_eq!(g.remove_nodes(&picks).unwrap(), g.remove_nodes(&rev).unwrap());
            prop_assert_eq!(g.remove_nodes(&[]).unwrap(), g.clone());
        }
    }
}
