//! Stage-2 routing: which elementary links get chained into party-to-party
//! paths.
//!
//! [`route_global`] sees the whole round's link state and greedily peels off
//! shortest paths. [`route_local`] lets each repeater decide from its own
//! links and static hop distances only; the resulting pairings are traced
//! into paths by [`extract_paths`].

mod chains;
mod global;
mod local;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use chains::extract_paths;
pub use global::route_global;
pub use local::{repeater_decision, route_local};

use crate::entanglement::{EntanglementState, RandomStream};
use crate::error::{Result, SimError};
use crate::topology::{GridTopology, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AlgorithmKind {
    Global,
    /// Local, non-intersection-avoidant: uniform tie-break.
    LocalNIA,
    /// Local, intersection-avoidant: ties prefer straight-through links.
    LocalIA,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 3] = [
        AlgorithmKind::Global,
        AlgorithmKind::LocalIA,
        AlgorithmKind::LocalNIA,
    ];

    pub fn is_local(self) -> bool {
        !matches!(self, AlgorithmKind::Global)
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlgorithmKind::Global => "global",
            AlgorithmKind::LocalNIA => "nia",
            AlgorithmKind::LocalIA => "ia",
        })
    }
}

impl FromStr for AlgorithmKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "global" => Ok(AlgorithmKind::Global),
            "nia" | "local-nia" | "localnia" => Ok(AlgorithmKind::LocalNIA),
            "ia" | "local-ia" | "localia" => Ok(AlgorithmKind::LocalIA),
            other => Err(SimError::param(
                "algorithm",
                format!("unknown algorithm `{other}` (expected global, nia or ia)"),
            )),
        }
    }
}

impl TryFrom<String> for AlgorithmKind {
    type Error = SimError;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<AlgorithmKind> for String {
    fn from(value: AlgorithmKind) -> Self {
        value.to_string()
    }
}

/// A chain of entangled links from one party to another through repeaters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    nodes: Vec<NodeId>,
}

impl Path {
    pub fn new(nodes: Vec<NodeId>) -> Self {
        debug_assert!(nodes.len() >= 2);
        Path { nodes }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn endpoints(&self) -> (NodeId, NodeId) {
        (self.nodes[0], self.nodes[self.nodes.len() - 1])
    }

    /// Swapping repeaters along the path: node count minus the two ends.
    pub fn intermediate_count(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn hop_count(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Consecutive node pairs.
    pub fn links(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Paths chosen in one round; pairwise edge-disjoint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathSet {
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Path> {
        self.paths.iter()
    }

    /// Checks the structural path invariants against a round's link state:
    /// adjacency, presence, party endpoints, repeater interiors, and
    /// edge-disjointness across the whole set.
    pub fn validate(&self, topology: &GridTopology, state: &EntanglementState) -> Result<(), String> {
        let mut used = vec![false; topology.edge_count()];
        for (i, path) in self.paths.iter().enumerate() {
            let nodes = path.nodes();
            if nodes.len() < 2 {
                return Err(format!("path {i} has fewer than two nodes"));
            }
            let (a, b) = path.endpoints();
            if !topology.is_party(a) || !topology.is_party(b) || a == b {
                return Err(format!("path {i} does not join two distinct parties"));
            }
            if let Some(v) = nodes[1..nodes.len() - 1].iter().find(|v| topology.is_party(**v)) {
                return Err(format!("path {i} passes through party {v}"));
            }
            for (u, v) in path.links() {
                let edge = topology
                    .edge_between(u, v)
                    .ok_or_else(|| format!("path {i}: {u} and {v} are not adjacent"))?;
                if !state.contains(edge) {
                    return Err(format!("path {i}: link ({u}, {v}) is not entangled"));
                }
                if std::mem::replace(&mut used[edge.index()], true) {
                    return Err(format!("link ({u}, {v}) is used twice"));
                }
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a PathSet {
    type Item = &'a Path;
    type IntoIter = std::slice::Iter<'a, Path>;

    fn into_iter(self) -> Self::IntoIter {
        self.paths.iter()
    }
}

/// Internal links formed at each repeater: pairs of neighbors whose links
/// the repeater swaps together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairingSet {
    pairs: Vec<Vec<(NodeId, NodeId)>>,
}

impl PairingSet {
    pub fn new(topology: &GridTopology) -> Self {
        PairingSet {
            pairs: vec![Vec::new(); topology.node_count()],
        }
    }

    pub fn insert(&mut self, at: NodeId, x: NodeId, y: NodeId) {
        self.pairs[at.index()].push((x, y));
    }

    pub fn pairs_at(&self, at: NodeId) -> &[(NodeId, NodeId)] {
        &self.pairs[at.index()]
    }

    /// The neighbor `at` joined with `via`, if any.
    pub fn partner(&self, at: NodeId, via: NodeId) -> Option<NodeId> {
        self.pairs[at.index()].iter().find_map(|&(x, y)| {
            if x == via {
                Some(y)
            } else if y == via {
                Some(x)
            } else {
                None
            }
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, (NodeId, NodeId))> + '_ {
        self.pairs
            .iter()
            .enumerate()
            .flat_map(|(u, ps)| ps.iter().map(move |&p| (NodeId(u), p)))
    }
}

/// Routes one round with the given algorithm.
pub fn route(
    topology: &GridTopology,
    state: &EntanglementState,
    algorithm: AlgorithmKind,
    rng: &mut RandomStream,
) -> Result<PathSet> {
    match algorithm {
        AlgorithmKind::Global => Ok(route_global(topology, state, rng)),
        local => route_local(topology, state, local, rng),
    }
}
