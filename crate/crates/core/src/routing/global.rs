use std::collections::VecDeque;

use rand::Rng;

use crate::entanglement::{EntanglementState, RandomStream};
use crate::topology::{GridTopology, NodeId};

use super::{Path, PathSet};

const UNREACHED: u32 = u32::MAX;

/// Shortest-path layer structure from one party over the residual links.
/// Other parties terminate paths and are never expanded.
struct Layers {
    dist: Vec<u32>,
    /// Number of shortest paths from the source, saturating.
    count: Vec<u64>,
}

impl Layers {
    fn new(nodes: usize) -> Self {
        Layers {
            dist: vec![UNREACHED; nodes],
            count: vec![0; nodes],
        }
    }

    fn explore(
        &mut self,
        topology: &GridTopology,
        residual: &EntanglementState,
        source: NodeId,
        queue: &mut VecDeque<NodeId>,
    ) {
        self.dist.fill(UNREACHED);
        self.count.fill(0);
        self.dist[source.index()] = 0;
        self.count[source.index()] = 1;
        queue.clear();
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            if u != source && topology.is_party(u) {
                continue;
            }
            let next = self.dist[u.index()] + 1;
            let paths = self.count[u.index()];
            for nb in topology.neighbors(u) {
                if !residual.contains(nb.edge) {
                    continue;
                }
                let w = nb.node.index();
                if self.dist[w] == UNREACHED {
                    self.dist[w] = next;
                    self.count[w] = paths;
                    queue.push_back(nb.node);
                } else if self.dist[w] == next {
                    self.count[w] = self.count[w].saturating_add(paths);
                }
            }
        }
    }

    /// Walks back from `target` picking each predecessor with probability
    /// proportional to its path count, which makes the sampled path uniform
    /// over all shortest source–target paths.
    fn sample_path(
        &self,
        topology: &GridTopology,
        residual: &EntanglementState,
        source: NodeId,
        target: NodeId,
        rng: &mut RandomStream,
    ) -> Path {
        let mut nodes = vec![target];
        let mut cur = target;
        let mut preds: Vec<(NodeId, u64)> = Vec::with_capacity(4);
        while cur != source {
            let want = self.dist[cur.index()] - 1;
            preds.clear();
            preds.extend(
                topology
                    .neighbors(cur)
                    .iter()
                    .filter(|nb| residual.contains(nb.edge))
                    .filter(|nb| self.dist[nb.node.index()] == want)
                    .filter(|nb| nb.node == source || !topology.is_party(nb.node))
                    .map(|nb| (nb.node, self.count[nb.node.index()])),
            );
            cur = pick_weighted(&preds, rng);
            nodes.push(cur);
        }
        nodes.reverse();
        Path::new(nodes)
    }
}

fn pick_weighted<T: Copy>(items: &[(T, u64)], rng: &mut RandomStream) -> T {
    debug_assert!(!items.is_empty());
    let total: u64 = items.iter().fold(0u64, |acc, (_, w)| acc.saturating_add(*w));
    let mut ticket = rng.random_range(0..total);
    for &(item, weight) in items {
        if ticket < weight {
            return item;
        }
        ticket -= weight;
    }
    items[items.len() - 1].0
}

/// Greedy global routing.
///
/// Repeatedly finds the shortest residual path between any two distinct
/// parties, picks uniformly among all minimal-length paths pooled over every
/// party pair, removes its links, and stops once no pair is connected.
pub fn route_global(
    topology: &GridTopology,
    state: &EntanglementState,
    rng: &mut RandomStream,
) -> PathSet {
    let parties = topology.parties();
    let mut residual = state.clone();
    let mut layers: Vec<Layers> = parties
        .iter()
        .map(|_| Layers::new(topology.node_count()))
        .collect();
    let mut queue = VecDeque::with_capacity(topology.node_count());
    let mut candidates: Vec<((usize, usize), u64)> = Vec::new();
    let mut paths = Vec::new();

    loop {
        for (slot, &party) in parties.iter().enumerate() {
            layers[slot].explore(topology, &residual, party, &mut queue);
        }
        let mut best = UNREACHED;
        candidates.clear();
        for s in 0..parties.len() {
            for t in s + 1..parties.len() {
                let d = layers[s].dist[parties[t].index()];
                if d == UNREACHED || d > best {
                    continue;
                }
                if d < best {
                    best = d;
                    candidates.clear();
                }
                candidates.push(((s, t), layers[s].count[parties[t].index()]));
            }
        }
        if candidates.is_empty() {
            break;
        }
        let (s, t) = pick_weighted(&candidates, rng);
        let path = layers[s].sample_path(topology, &residual, parties[s], parties[t], rng);
        for (u, v) in path.links() {
            let edge = topology.edge_between(u, v).expect("path follows grid links");
            residual.remove(edge);
        }
        paths.push(path);
    }
    PathSet { paths }
}
