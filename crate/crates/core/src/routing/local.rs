use std::ops::Add;

use rand::Rng;

use crate::entanglement::{EntanglementState, RandomStream};
use crate::error::{Result, SimError};
use crate::topology::{GridTopology, Neighbor, NodeId};

use super::{extract_paths, AlgorithmKind, PairingSet, PathSet};

/// Index pairs `(i, j)`, `i < j`, into `neighbors` whose score
/// `min_{P ≠ Q} d(P, x) + d(Q, y)` is minimal.
///
/// `distance(slot, node)` is the hop distance from party `slot` to `node`.
pub(crate) fn minimal_pairs<D>(
    neighbors: &[NodeId],
    party_count: usize,
    distance: impl Fn(usize, NodeId) -> D,
) -> Vec<(usize, usize)>
where
    D: Copy + PartialOrd + Add<Output = D>,
{
    let score = |x: NodeId, y: NodeId| {
        let mut best: Option<D> = None;
        for p in 0..party_count {
            for q in (0..party_count).filter(|&q| q != p) {
                let s = distance(p, x) + distance(q, y);
                if best.is_none_or(|b| s < b) {
                    best = Some(s);
                }
            }
        }
        best
    };

    let mut best: Option<D> = None;
    let mut minimal = Vec::with_capacity(6);
    for i in 0..neighbors.len() {
        for j in i + 1..neighbors.len() {
            let Some(s) = score(neighbors[i], neighbors[j]) else {
                continue;
            };
            match best {
                Some(b) if s > b => {}
                Some(b) if s == b => minimal.push((i, j)),
                _ => {
                    best = Some(s);
                    minimal.clear();
                    minimal.push((i, j));
                }
            }
        }
    }
    minimal
}

fn decide(
    topology: &GridTopology,
    entangled: &[Neighbor],
    variant: AlgorithmKind,
    rng: &mut RandomStream,
    out: &mut Vec<(NodeId, NodeId)>,
) {
    out.clear();
    match entangled.len() {
        0 | 1 => {}
        2 => out.push((entangled[0].node, entangled[1].node)),
        k => {
            let nodes: Vec<NodeId> = entangled.iter().map(|nb| nb.node).collect();
            let mut minimal = minimal_pairs(&nodes, topology.parties().len(), |slot, v| {
                topology.party_distance(slot, v)
            });
            if variant == AlgorithmKind::LocalIA {
                let collinear: Vec<_> = minimal
                    .iter()
                    .copied()
                    .filter(|&(i, j)| entangled[i].direction == entangled[j].direction.opposite())
                    .collect();
                if !collinear.is_empty() {
                    minimal = collinear;
                }
            }
            let (i, j) = minimal[rng.random_range(0..minimal.len())];
            out.push((entangled[i].node, entangled[j].node));
            if k == 4 {
                let mut rest = (0..4).filter(|&r| r != i && r != j);
                let (a, b) = (rest.next().unwrap(), rest.next().unwrap());
                out.push((entangled[a].node, entangled[b].node));
            }
        }
    }
}

/// Internal links formed by repeater `u` given the neighbors it shares an
/// EPR pair with.
///
/// Fewer than two links: nothing. Exactly two: they are joined. Three or
/// four: the neighbor pair closest to two distinct parties is joined (ties
/// broken at random; the intersection-avoidant variant first restricts ties
/// to straight-through pairs), and with four links the remaining two are
/// joined as well.
pub fn repeater_decision(
    u: NodeId,
    entangled_neighbors: &[NodeId],
    topology: &GridTopology,
    variant: AlgorithmKind,
    rng: &mut RandomStream,
) -> Result<Vec<(NodeId, NodeId)>> {
    if u.index() >= topology.node_count() {
        return Err(SimError::param("u", format!("node {u} is outside the grid")));
    }
    if topology.is_party(u) {
        return Err(SimError::InvalidNode(u));
    }
    if !variant.is_local() {
        return Err(SimError::param("variant", "repeater decisions need a local algorithm"));
    }
    let entangled = entangled_neighbors
        .iter()
        .map(|&v| {
            topology
                .neighbors(u)
                .iter()
                .copied()
                .find(|nb| nb.node == v)
                .ok_or_else(|| SimError::param("entangled_neighbors", format!("{v} is not adjacent to {u}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(2);
    decide(topology, &entangled, variant, rng, &mut out);
    Ok(out)
}

/// Local routing: every repeater decides on its own, then the pairings are
/// traced into paths.
pub fn route_local(
    topology: &GridTopology,
    state: &EntanglementState,
    variant: AlgorithmKind,
    rng: &mut RandomStream,
) -> Result<PathSet> {
    if !variant.is_local() {
        return Err(SimError::param("variant", "route_local needs a local algorithm"));
    }
    let mut pairings = PairingSet::new(topology);
    let mut entangled = Vec::with_capacity(4);
    let mut pairs = Vec::with_capacity(2);
    for u in (0..topology.node_count()).map(NodeId) {
        if topology.is_party(u) {
            continue;
        }
        entangled.clear();
        entangled.extend(topology.neighbors(u).iter().filter(|nb| state.contains(nb.edge)));
        decide(topology, &entangled, variant, rng, &mut pairs);
        for &(x, y) in &pairs {
            pairings.insert(u, x, y);
        }
    }
    extract_paths(topology, state, &pairings)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::entanglement::StreamLabel;
    use crate::topology::Placement;

    fn stream(r: u64) -> RandomStream {
        RandomStream::new(3, r, StreamLabel::Routing)
    }

    fn unordered(a: NodeId, b: NodeId) -> (usize, usize) {
        (a.index().min(b.index()), a.index().max(b.index()))
    }

    #[test]
    fn fewer_than_two_links_do_nothing() {
        let t = GridTopology::build(5, 1.0, &Placement::Central).unwrap();
        for variant in [AlgorithmKind::LocalNIA, AlgorithmKind::LocalIA] {
            assert!(repeater_decision(NodeId(6), &[NodeId(5)], &t, variant, &mut stream(0))
                .unwrap()
                .is_empty());
            assert!(repeater_decision(NodeId(6), &[], &t, variant, &mut stream(0))
                .unwrap()
                .is_empty());
        }
    }

    #[test]
    fn two_links_are_always_joined() {
        let t = GridTopology::build(5, 1.0, &Placement::Central).unwrap();
        for r in 0..20 {
            let pairs =
                repeater_decision(NodeId(6), &[NodeId(5), NodeId(11)], &t, AlgorithmKind::LocalIA, &mut stream(r))
                    .unwrap();
            assert_eq!(pairs, vec![(NodeId(5), NodeId(11))]);
        }
    }

    #[test]
    fn decisions_are_refused_at_parties_and_for_global() {
        let t = GridTopology::build(5, 1.0, &Placement::Central).unwrap();
        assert_eq!(
            repeater_decision(NodeId(12), &[NodeId(7), NodeId(11)], &t, AlgorithmKind::LocalNIA, &mut stream(0)),
            Err(SimError::InvalidNode(NodeId(12)))
        );
        assert!(repeater_decision(NodeId(6), &[NodeId(7)], &t, AlgorithmKind::Global, &mut stream(0)).is_err());
        assert!(repeater_decision(NodeId(6), &[NodeId(8)], &t, AlgorithmKind::LocalIA, &mut stream(0)).is_err());
    }

    /// Brute-force oracle for the score of a neighbor pair, written directly
    /// from Manhattan coordinates.
    fn manhattan_score(t: &GridTopology, x: NodeId, y: NodeId) -> usize {
        let d = |a: NodeId, b: NodeId| {
            let (ax, ay) = t.coordinates(a);
            let (bx, by) = t.coordinates(b);
            ax.abs_diff(bx) + ay.abs_diff(by)
        };
        let mut best = usize::MAX;
        for &p in t.parties() {
            for &q in t.parties() {
                if p != q {
                    best = best.min(d(p, x) + d(q, y));
                }
            }
        }
        best
    }

    #[test]
    fn four_links_at_node_six() {
        // 5x5, A = 0, B = 24, T = 12; u = 6 at (1, 1) with neighbors
        // down 1, left 5, right 7, up 11.
        let t = GridTopology::build(5, 1.0, &Placement::Central).unwrap();
        let nbrs = [NodeId(1), NodeId(5), NodeId(7), NodeId(11)];

        let mut oracle = BTreeMap::new();
        for i in 0..4 {
            for j in i + 1..4 {
                oracle.insert(unordered(nbrs[i], nbrs[j]), manhattan_score(&t, nbrs[i], nbrs[j]));
            }
        }
        let min = *oracle.values().min().unwrap();
        assert_eq!(min, 2);
        let minimal: Vec<_> = oracle.iter().filter(|(_, &s)| s == min).map(|(p, _)| *p).collect();
        assert_eq!(minimal, vec![(1, 7), (1, 11), (5, 7), (5, 11)]);

        let rounds = 40_000u64;
        for (variant, expected) in [
            (AlgorithmKind::LocalIA, vec![((1, 11), 0.5), ((5, 7), 0.5)]),
            (
                AlgorithmKind::LocalNIA,
                vec![((1, 7), 0.25), ((1, 11), 0.25), ((5, 7), 0.25), ((5, 11), 0.25)],
            ),
        ] {
            let mut hits: BTreeMap<(usize, usize), u64> = BTreeMap::new();
            for r in 0..rounds {
                let pairs = repeater_decision(NodeId(6), &nbrs, &t, variant, &mut stream(r)).unwrap();
                assert_eq!(pairs.len(), 2);
                let first = unordered(pairs[0].0, pairs[0].1);
                let second = unordered(pairs[1].0, pairs[1].1);
                let mut covered = vec![first.0, first.1, second.0, second.1];
                covered.sort();
                assert_eq!(covered, vec![1, 5, 7, 11]);
                *hits.entry(first).or_default() += 1;
            }
            assert_eq!(hits.keys().copied().collect::<Vec<_>>(), expected.iter().map(|e| e.0).collect::<Vec<_>>());
            for (pair, p) in expected {
                let sigma = (rounds as f64 * p * (1.0 - p)).sqrt();
                assert!((hits[&pair] as f64 - rounds as f64 * p).abs() < 4.0 * sigma, "{variant} {pair:?}");
            }
        }
    }

    #[test]
    fn three_links_leave_one_idle() {
        let t = GridTopology::build(5, 1.0, &Placement::Central).unwrap();
        let pairs = repeater_decision(
            NodeId(6),
            &[NodeId(1), NodeId(5), NodeId(11)],
            &t,
            AlgorithmKind::LocalIA,
            &mut stream(0),
        )
        .unwrap();
        assert_eq!(pairs.len(), 1);
        // {1, 11}: D_A(1) + D_T(11) = 2, collinear; {5, 11}: 2, bent; {1, 5}: 4.
        assert_eq!(unordered(pairs[0].0, pairs[0].1), (1, 11));
    }

    #[test]
    fn scaling_distances_keeps_the_minimal_set() {
        let t = GridTopology::build(7, 1.0, &Placement::Diagonal).unwrap();
        for u in (0..t.node_count()).map(NodeId).filter(|&u| !t.is_party(u)) {
            let nbrs: Vec<NodeId> = t.neighbors(u).iter().map(|nb| nb.node).collect();
            let base = minimal_pairs(&nbrs, t.parties().len(), |s, v| t.party_distance(s, v) as f64);
            for k in [0.5, 3.0, 17.25] {
                let scaled = minimal_pairs(&nbrs, t.parties().len(), |s, v| k * t.party_distance(s, v) as f64);
                assert_eq!(base, scaled);
            }
        }
    }

    #[test]
    fn straight_line_is_chained_by_both_variants() {
        // A(0) - 1 - 2 - T(3) along the bottom row.
        let t = GridTopology::build(5, 1.0, &Placement::Custom(vec![NodeId(3)])).unwrap();
        let s = EntanglementState::from_node_pairs(
            &t,
            [(0, 1), (1, 2), (2, 3)].map(|(a, b)| (NodeId(a), NodeId(b))),
        )
        .unwrap();
        for variant in [AlgorithmKind::LocalNIA, AlgorithmKind::LocalIA] {
            let paths = route_local(&t, &s, variant, &mut stream(0)).unwrap();
            assert_eq!(paths.len(), 1);
            assert_eq!(paths.paths[0].nodes(), &[NodeId(0), NodeId(1), NodeId(2), NodeId(3)]);
        }
    }

    #[test]
    fn trivial_states() {
        let t = GridTopology::build(5, 1.0, &Placement::Custom(vec![NodeId(1)])).unwrap();
        let empty = EntanglementState::empty(&t);
        assert!(route_local(&t, &empty, AlgorithmKind::LocalIA, &mut stream(0)).unwrap().is_empty());
        let single = EntanglementState::from_node_pairs(&t, [(NodeId(0), NodeId(1))]).unwrap();
        let paths = route_local(&t, &single, AlgorithmKind::LocalNIA, &mut stream(0)).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths.paths[0].nodes().len(), 2);
    }

    #[test]
    fn fully_entangled_grid_paths_are_valid() {
        for placement in [Placement::None, Placement::Central, Placement::Corner] {
            let t = GridTopology::build(5, 1.0, &placement).unwrap();
            let full = EntanglementState::full(&t);
            for variant in [AlgorithmKind::LocalNIA, AlgorithmKind::LocalIA] {
                for r in 0..100 {
                    let paths = route_local(&t, &full, variant, &mut stream(r)).unwrap();
                    paths.validate(&t, &full).unwrap();
                }
            }
        }
    }
}
