//! Static grid network: node indexing, party placement and hop distances.
//!
//! Nodes are indexed row-major from the bottom-left corner, so node `i` sits
//! at `(x, y) = (i mod n, i div n)`. Alice occupies node `0` and Bob node
//! `n² − 1`; trusted nodes are placed by a [`Placement`] scheme.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index into [`GridTopology::edges`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub usize);

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

/// Direction of a neighbor as seen from a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Left,
    Right,
    Down,
    Up,
}

impl Direction {
    pub fn opposite(self) -> Direction {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
            Direction::Down => Direction::Up,
            Direction::Up => Direction::Down,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    pub node: NodeId,
    pub edge: EdgeId,
    pub direction: Direction,
}

/// Trusted-node placement scheme.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Placement {
    None,
    /// One node at the (floor) center of the grid.
    Central,
    /// The two corners not occupied by Alice and Bob.
    Corner,
    /// Two nodes splitting the Alice–Bob diagonal into thirds.
    Diagonal,
    /// The central node plus the node one diagonal step closer to Alice.
    Asymmetric,
    Custom(Vec<NodeId>),
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Placement::None => f.write_str("none"),
            Placement::Central => f.write_str("central"),
            Placement::Corner => f.write_str("corner"),
            Placement::Diagonal => f.write_str("diagonal"),
            Placement::Asymmetric => f.write_str("asymmetric"),
            Placement::Custom(ids) => {
                f.write_str("custom=")?;
                for (i, id) in ids.iter().enumerate() {
                    if i > 0 {
                        f.write_str(":")?;
                    }
                    write!(f, "{id}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Placement {
    type Err = SimError;

    /// Accepts `none`, `central`, `corner`, `diagonal`, `asymmetric` and
    /// `custom=<ids>` where ids are separated by `:` or `,`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "none" => return Ok(Placement::None),
            "central" | "center" => return Ok(Placement::Central),
            "corner" => return Ok(Placement::Corner),
            "diagonal" => return Ok(Placement::Diagonal),
            "asymmetric" => return Ok(Placement::Asymmetric),
            _ => {}
        }
        let Some(ids) = lower.strip_prefix("custom=") else {
            return Err(SimError::InvalidPlacement(format!("unknown placement `{s}`")));
        };
        let ids = ids
            .split([':', ','])
            .filter(|t| !t.trim().is_empty())
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map(NodeId)
                    .map_err(|_| SimError::InvalidPlacement(format!("bad node id `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Placement::Custom(ids))
    }
}

impl TryFrom<String> for Placement {
    type Error = SimError;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<Placement> for String {
    fn from(value: Placement) -> Self {
        value.to_string()
    }
}

#[inline]
fn node_at(n: usize, x: usize, y: usize) -> NodeId {
    NodeId(y * n + x)
}

/// Nearest integer to `m / 3`. The fractional part of a third is never one
/// half, so no tie rule is ever exercised.
#[inline]
fn round_third(m: usize) -> usize {
    (m + 1) / 3
}

/// Resolves a placement to concrete trusted-node ids on an `n × n` grid.
pub fn trusted_node_ids(placement: &Placement, n: usize) -> Result<Vec<NodeId>> {
    if n < 2 {
        return Err(SimError::InvalidGridSize(n));
    }
    let center = (n - 1) / 2;
    let ids = match placement {
        Placement::None => Vec::new(),
        Placement::Central => vec![node_at(n, center, center)],
        Placement::Corner => vec![node_at(n, n - 1, 0), node_at(n, 0, n - 1)],
        Placement::Diagonal => {
            let first = round_third(n - 1);
            let second = round_third(2 * (n - 1));
            vec![node_at(n, first, first), node_at(n, second, second)]
        }
        Placement::Asymmetric => {
            if center == 0 {
                return Err(SimError::InvalidPlacement(format!(
                    "asymmetric placement needs a grid of at least 3x3, got {n}x{n}"
                )));
            }
            vec![
                node_at(n, center, center),
                node_at(n, center - 1, center - 1),
            ]
        }
        Placement::Custom(ids) => ids.clone(),
    };

    let alice = NodeId(0);
    let bob = NodeId(n * n - 1);
    for (i, id) in ids.iter().enumerate() {
        if id.0 >= n * n {
            return Err(SimError::InvalidPlacement(format!(
                "node {id} is outside a {n}x{n} grid"
            )));
        }
        if *id == alice || *id == bob {
            return Err(SimError::InvalidPlacement(format!(
                "{placement} puts a trusted node on {} (node {id}) in a {n}x{n} grid",
                if *id == alice { "Alice" } else { "Bob" }
            )));
        }
        if ids[..i].contains(id) {
            return Err(SimError::InvalidPlacement(format!(
                "{placement} places node {id} twice in a {n}x{n} grid"
            )));
        }
    }
    Ok(ids)
}

/// Immutable grid network shared by every round of a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTopology {
    n: usize,
    fiber_length_km: f64,
    trusted: Vec<NodeId>,
    /// Alice, Bob, then trusted nodes in placement order.
    parties: Vec<NodeId>,
    party_slot: Vec<Option<usize>>,
    edges: Vec<(NodeId, NodeId)>,
    adjacency: Vec<Vec<Neighbor>>,
    /// `party_distance[p][v]`: hops from node `v` to party `p`.
    party_distance: Vec<Vec<u32>>,
}

impl GridTopology {
    pub fn build(n: usize, fiber_length_km: f64, placement: &Placement) -> Result<Self> {
        if n < 2 {
            return Err(SimError::InvalidGridSize(n));
        }
        if !(fiber_length_km > 0.0 && fiber_length_km.is_finite()) {
            return Err(SimError::param(
                "fiber_length_km",
                format!("{fiber_length_km} must be positive"),
            ));
        }
        let trusted = trusted_node_ids(placement, n)?;
        let node_count = n * n;

        let mut edges = Vec::with_capacity(2 * n * (n - 1));
        let mut adjacency = vec![Vec::with_capacity(4); node_count];
        let mut link = |a: NodeId, b: NodeId, dir_ab: Direction| {
            let edge = EdgeId(edges.len());
            edges.push((a, b));
            adjacency[a.0].push(Neighbor {
                node: b,
                edge,
                direction: dir_ab,
            });
            adjacency[b.0].push(Neighbor {
                node: a,
                edge,
                direction: dir_ab.opposite(),
            });
        };
        for y in 0..n {
            for x in 0..n {
                let here = node_at(n, x, y);
                if x + 1 < n {
                    link(here, node_at(n, x + 1, y), Direction::Right);
                }
                if y + 1 < n {
                    link(here, node_at(n, x, y + 1), Direction::Up);
                }
            }
        }

        let mut parties = vec![NodeId(0), NodeId(node_count - 1)];
        parties.extend(trusted.iter().copied());
        let mut party_slot = vec![None; node_count];
        for (slot, p) in parties.iter().enumerate() {
            party_slot[p.0] = Some(slot);
        }
        let party_distance = parties
            .iter()
            .map(|p| {
                let (px, py) = (p.0 % n, p.0 / n);
                (0..node_count)
                    .map(|v| ((v % n).abs_diff(px) + (v / n).abs_diff(py)) as u32)
                    .collect()
            })
            .collect();

        Ok(GridTopology {
            n,
            fiber_length_km,
            trusted,
            parties,
            party_slot,
            edges,
            adjacency,
            party_distance,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn node_count(&self) -> usize {
        self.n * self.n
    }

    pub fn fiber_length_km(&self) -> f64 {
        self.fiber_length_km
    }

    pub fn alice(&self) -> NodeId {
        self.parties[0]
    }

    pub fn bob(&self) -> NodeId {
        self.parties[1]
    }

    pub fn trusted(&self) -> &[NodeId] {
        &self.trusted
    }

    /// Alice, Bob and the trusted nodes, in that order.
    pub fn parties(&self) -> &[NodeId] {
        &self.parties
    }

    pub fn is_party(&self, node: NodeId) -> bool {
        self.party_slot[node.0].is_some()
    }

    /// Position of `node` in [`parties`](Self::parties), if it is a party.
    pub fn party_slot(&self, node: NodeId) -> Option<usize> {
        self.party_slot[node.0]
    }

    pub fn coordinates(&self, node: NodeId) -> (usize, usize) {
        (node.0 % self.n, node.0 / self.n)
    }

    pub fn node(&self, x: usize, y: usize) -> NodeId {
        node_at(self.n, x, y)
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn endpoints(&self, edge: EdgeId) -> (NodeId, NodeId) {
        self.edges[edge.0]
    }

    pub fn neighbors(&self, node: NodeId) -> &[Neighbor] {
        &self.adjacency[node.0]
    }

    /// The edge joining `a` and `b`, if they are grid-adjacent.
    pub fn edge_between(&self, a: NodeId, b: NodeId) -> Option<EdgeId> {
        self.adjacency
            .get(a.0)?
            .iter()
            .find(|nb| nb.node == b)
            .map(|nb| nb.edge)
    }

    /// Hop distance from `node` to the party in slot `party_slot`.
    #[inline]
    pub fn party_distance(&self, party_slot: usize, node: NodeId) -> u32 {
        self.party_distance[party_slot][node.0]
    }

    /// Euclidean Alice–Bob separation in km, `√2 (n − 1) L`.
    pub fn report_user_distance(&self) -> f64 {
        std::f64::consts::SQRT_2 * (self.n - 1) as f64 * self.fiber_length_km
    }
}

#[cfg(test)]
mod tests {
    use std::collections::VecDeque;

    use super::*;

    fn bfs_hops(topo: &GridTopology, from: NodeId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; topo.node_count()];
        dist[from.0] = 0;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            for nb in topo.neighbors(u) {
                if dist[nb.node.0] == u32::MAX {
                    dist[nb.node.0] = dist[u.0] + 1;
                    queue.push_back(nb.node);
                }
            }
        }
        dist
    }

    #[test]
    fn five_by_five_without_trusted_nodes() {
        let topo = GridTopology::build(5, 1.0, &Placement::None).unwrap();
        assert_eq!(topo.node_count(), 25);
        assert_eq!(topo.edge_count(), 40);
        assert!(topo.trusted().is_empty());
        assert_eq!(topo.alice(), NodeId(0));
        assert_eq!(topo.bob(), NodeId(24));
    }

    #[test]
    fn named_placements() {
        let ids = |p: Placement, n| trusted_node_ids(&p, n).unwrap();
        assert_eq!(ids(Placement::Central, 5), vec![NodeId(12)]);
        assert_eq!(ids(Placement::Corner, 7), vec![NodeId(6), NodeId(42)]);
        assert_eq!(ids(Placement::Diagonal, 7), vec![NodeId(16), NodeId(32)]);
        assert_eq!(ids(Placement::Asymmetric, 7), vec![NodeId(24), NodeId(16)]);
        assert_eq!(ids(Placement::None, 7), vec![]);
        // even grid: floor center
        assert_eq!(ids(Placement::Central, 10), vec![NodeId(44)]);

        let topo = GridTopology::build(7, 1.0, &Placement::Corner).unwrap();
        assert_eq!(topo.trusted(), &[NodeId(6), NodeId(42)]);
        assert_eq!(topo.parties(), &[NodeId(0), NodeId(48), NodeId(6), NodeId(42)]);
    }

    #[test]
    fn diagonal_on_sizes_not_of_form_3x_plus_1() {
        // 5x5: thirds of 4 are 1.33 and 2.67
        assert_eq!(
            trusted_node_ids(&Placement::Diagonal, 5).unwrap(),
            vec![NodeId(6), NodeId(18)]
        );
        // 9x9: thirds of 8 are 2.67 and 5.33
        assert_eq!(
            trusted_node_ids(&Placement::Diagonal, 9).unwrap(),
            vec![NodeId(30), NodeId(50)]
        );
    }

    #[test]
    fn unresolvable_placements() {
        assert!(matches!(
            trusted_node_ids(&Placement::Central, 2),
            Err(SimError::InvalidPlacement(_))
        ));
        assert!(matches!(
            trusted_node_ids(&Placement::Diagonal, 3),
            Err(SimError::InvalidPlacement(_))
        ));
        assert!(matches!(
            trusted_node_ids(&Placement::Asymmetric, 4),
            Err(SimError::InvalidPlacement(_))
        ));
    }

    #[test]
    fn custom_placement_validation() {
        let custom = |ids: &[usize]| Placement::Custom(ids.iter().copied().map(NodeId).collect());
        assert_eq!(
            trusted_node_ids(&custom(&[7, 3]), 5).unwrap(),
            vec![NodeId(7), NodeId(3)]
        );
        for bad in [&[25][..], &[0], &[24], &[3, 3]] {
            assert!(matches!(
                GridTopology::build(5, 1.0, &custom(bad)),
                Err(SimError::InvalidPlacement(_))
            ));
        }
    }

    #[test]
    fn invalid_construction() {
        assert_eq!(
            GridTopology::build(1, 1.0, &Placement::None),
            Err(SimError::InvalidGridSize(1))
        );
        assert!(GridTopology::build(5, 0.0, &Placement::None).is_err());
        assert!(GridTopology::build(5, -1.0, &Placement::None).is_err());
    }

    #[test]
    fn user_distance() {
        let d = |n, l| {
            GridTopology::build(n, l, &Placement::None)
                .unwrap()
                .report_user_distance()
        };
        assert!((d(5, 1.0) - 5.657).abs() < 1e-3);
        assert!((d(5, 20.0) - 113.137).abs() < 1e-3);
        assert!((d(2, 1.0) - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn placement_text_round_trip() {
        for text in ["none", "central", "corner", "diagonal", "asymmetric", "custom=3:7"] {
            let p: Placement = text.parse().unwrap();
            assert_eq!(p.to_string(), text);
        }
        assert_eq!(
            "custom=3,7".parse::<Placement>().unwrap(),
            Placement::Custom(vec![NodeId(3), NodeId(7)])
        );
        assert!("ring".parse::<Placement>().is_err());
        assert!("custom=x".parse::<Placement>().is_err());
    }

    #[test]
    fn distances_match_bfs_and_grid_bounds() {
        for n in 2..=9 {
            for placement in [
                Placement::None,
                Placement::Central,
                Placement::Corner,
                Placement::Diagonal,
                Placement::Asymmetric,
            ] {
                let Ok(topo) = GridTopology::build(n, 1.0, &placement) else {
                    continue;
                };
                assert_eq!(topo.edge_count(), 2 * n * (n - 1));
                for (slot, &p) in topo.parties().iter().enumerate() {
                    assert_eq!(topo.party_distance(slot, p), 0);
                    let bfs = bfs_hops(&topo, p);
                    for v in 0..topo.node_count() {
                        let d = topo.party_distance(slot, NodeId(v));
                        assert_eq!(d, bfs[v]);
                        assert!(d as usize <= 2 * (n - 1));
                    }
                }
                assert_eq!(topo.party_distance(0, topo.bob()) as usize, 2 * (n - 1));
                for t in topo.trusted() {
                    assert!(t.0 < n * n && *t != topo.alice() && *t != topo.bob());
                }
            }
        }
    }

    #[test]
    fn neighbors_are_unit_steps() {
        let topo = GridTopology::build(4, 1.0, &Placement::None).unwrap();
        for v in 0..topo.node_count() {
            let (x, y) = topo.coordinates(NodeId(v));
            for nb in topo.neighbors(NodeId(v)) {
                let (nx, ny) = topo.coordinates(nb.node);
                let expected = match nb.direction {
                    Direction::Left => (x.wrapping_sub(1), y),
                    Direction::Right => (x + 1, y),
                    Direction::Down => (x, y.wrapping_sub(1)),
                    Direction::Up => (x, y + 1),
                };
                assert_eq!((nx, ny), expected);
                assert_eq!(topo.edge_between(NodeId(v), nb.node), Some(nb.edge));
            }
        }
        assert_eq!(topo.edge_between(NodeId(0), NodeId(5)), None);
    }
}
