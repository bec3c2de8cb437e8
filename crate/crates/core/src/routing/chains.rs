use crate::entanglement::EntanglementState;
use crate::error::{Result, SimError};
use crate::topology::{GridTopology, NodeId};

use super::{PairingSet, Path, PathSet};

fn check_pairings(
    topology: &GridTopology,
    state: &EntanglementState,
    pairings: &PairingSet,
) -> Result<()> {
    let inconsistent = |node, reason: String| SimError::InconsistentPairing { node, reason };
    for u in (0..topology.node_count()).map(NodeId) {
        let pairs = pairings.pairs_at(u);
        if pairs.is_empty() {
            continue;
        }
        if topology.is_party(u) {
            return Err(inconsistent(u, "parties do not form internal links".into()));
        }
        let mut seen: Vec<NodeId> = Vec::with_capacity(4);
        for &(x, y) in pairs {
            for v in [x, y] {
                match topology.edge_between(u, v) {
                    Some(edge) if state.contains(edge) => {}
                    Some(_) => return Err(inconsistent(u, format!("link to {v} is not entangled"))),
                    None => return Err(inconsistent(u, format!("{v} is not a neighbor"))),
                }
                if seen.contains(&v) {
                    return Err(inconsistent(u, format!("link to {v} is paired twice")));
                }
                seen.push(v);
            }
        }
    }
    Ok(())
}

/// Traces the chains formed by repeater pairings into party-to-party paths.
///
/// A chain is followed from a party through each repeater's internal link
/// until it reaches another party. Chains that stop at a repeater without a
/// matching internal link, and chains that return to their starting party,
/// are dropped. Cycles that never touch a party are never visited.
pub fn extract_paths(
    topology: &GridTopology,
    state: &EntanglementState,
    pairings: &PairingSet,
) -> Result<PathSet> {
    check_pairings(topology, state, pairings)?;

    let mut visited = vec![false; topology.edge_count()];
    let mut paths = Vec::new();
    for &start in topology.parties() {
        for first in topology.neighbors(start) {
            if !state.contains(first.edge) || visited[first.edge.index()] {
                continue;
            }
            visited[first.edge.index()] = true;
            let mut nodes = vec![start];
            let (mut prev, mut cur) = (start, first.node);
            let complete = loop {
                nodes.push(cur);
                if topology.is_party(cur) {
                    break cur != start;
                }
                let Some(next) = pairings.partner(cur, prev) else {
                    break false;
                };
                let edge = topology
                    .edge_between(cur, next)
                    .expect("pairings were checked against the grid");
                visited[edge.index()] = true;
                (prev, cur) = (cur, next);
            };
            if complete {
                paths.push(Path::new(nodes));
            }
        }
    }
    Ok(PathSet { paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Placement;

    fn ids(v: &[usize]) -> Vec<NodeId> {
        v.iter().copied().map(NodeId).collect()
    }

    // 5x5 with a central trusted node (12); A = 0, B = 24.
    fn topo() -> GridTopology {
        GridTopology::build(5, 1.0, &Placement::Central).unwrap()
    }

    fn state(t: &GridTopology, pairs: &[(usize, usize)]) -> EntanglementState {
        EntanglementState::from_node_pairs(t, pairs.iter().map(|&(a, b)| (NodeId(a), NodeId(b))))
            .unwrap()
    }

    #[test]
    fn forced_chain() {
        // custom trusted node at 2: A(0) - 1 - T(2)
        let t = GridTopology::build(5, 1.0, &Placement::Custom(ids(&[2]))).unwrap();
        let s = state(&t, &[(0, 1), (1, 2)]);
        let mut p = PairingSet::new(&t);
        p.insert(NodeId(1), NodeId(0), NodeId(2));
        let paths = extract_paths(&t, &s, &p).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths.paths[0].nodes(), &ids(&[0, 1, 2])[..]);
    }

    #[test]
    fn dead_end_is_discarded() {
        let t = topo();
        let s = state(&t, &[(0, 1)]);
        let paths = extract_paths(&t, &s, &PairingSet::new(&t)).unwrap();
        assert!(paths.is_empty());
    }

    #[test]
    fn repeater_cycle_is_discarded() {
        let t = topo();
        // 4-cycle of repeaters 1-2-7-6
        let s = state(&t, &[(1, 2), (2, 7), (7, 6), (6, 1)]);
        let mut p = PairingSet::new(&t);
        p.insert(NodeId(1), NodeId(2), NodeId(6));
        p.insert(NodeId(2), NodeId(1), NodeId(7));
        p.insert(NodeId(7), NodeId(2), NodeId(6));
        p.insert(NodeId(6), NodeId(7), NodeId(1));
        assert!(extract_paths(&t, &s, &p).unwrap().is_empty());
    }

    #[test]
    fn direct_party_links_need_no_pairing() {
        let t = GridTopology::build(5, 1.0, &Placement::Custom(ids(&[1]))).unwrap();
        let s = state(&t, &[(0, 1)]);
        let paths = extract_paths(&t, &s, &PairingSet::new(&t)).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths.paths[0].intermediate_count(), 0);
    }

    #[test]
    fn loop_back_to_the_same_party_is_dropped() {
        let t = topo();
        // 0-1-6-5-0 around the first cell
        let s = state(&t, &[(0, 1), (1, 6), (6, 5), (5, 0)]);
        let mut p = PairingSet::new(&t);
        p.insert(NodeId(1), NodeId(0), NodeId(6));
        p.insert(NodeId(6), NodeId(1), NodeId(5));
        p.insert(NodeId(5), NodeId(6), NodeId(0));
        assert!(extract_paths(&t, &s, &p).unwrap().is_empty());
    }

    #[test]
    fn inconsistent_pairings() {
        let t = topo();
        let s = state(&t, &[(0, 1), (1, 2)]);

        let mut absent = PairingSet::new(&t);
        absent.insert(NodeId(1), NodeId(0), NodeId(6));
        assert!(matches!(
            extract_paths(&t, &s, &absent),
            Err(SimError::InconsistentPairing { .. })
        ));

        let mut twice = PairingSet::new(&t);
        twice.insert(NodeId(1), NodeId(0), NodeId(2));
        twice.insert(NodeId(1), NodeId(2), NodeId(0));
        assert!(extract_paths(&t, &s, &twice).is_err());

        let mut at_party = PairingSet::new(&t);
        at_party.insert(NodeId(0), NodeId(1), NodeId(5));
        assert!(extract_paths(&t, &s, &at_party).is_err());
    }

    #[test]
    fn two_chains_through_a_crossing() {
        // Repeater 6 at (1,1) crosses 1-6-11 (vertical) and 5-6-7 (horizontal).
        let t = GridTopology::build(5, 1.0, &Placement::Custom(ids(&[1, 5, 7, 11]))).unwrap();
        let s = state(&t, &[(1, 6), (6, 11), (5, 6), (6, 7)]);
        let mut p = PairingSet::new(&t);
        p.insert(NodeId(6), NodeId(1), NodeId(11));
        p.insert(NodeId(6), NodeId(5), NodeId(7));
        let paths = extract_paths(&t, &s, &p).unwrap();
        assert_eq!(paths.len(), 2);
        paths.validate(&t, &s).unwrap();
    }
}
