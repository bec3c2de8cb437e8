//! Elementary link generation and the per-round random streams.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_probability, Result, SimError};
use crate::topology::{EdgeId, GridTopology, NodeId};

/// Which stage of a round a [`RandomStream`] feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamLabel {
    Entanglement = 1,
    Routing = 2,
    Channel = 3,
    Sifting = 4,
}

/// Deterministic random source for one stage of one round.
///
/// The master seed keys a ChaCha8 generator and `(round_index, label)`
/// selects its stream, so every `(seed, round, stage)` triple owns an
/// independent sequence and rounds can be evaluated in any order.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(master_seed: u64, round_index: u64, label: StreamLabel) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream((round_index << 8) | label as u64);
        RandomStream { rng }
    }
}

impl RngCore for RandomStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Probability that an EPR pair survives a fiber hop: `10^(−αL/10)`.
pub fn link_success_probability(alpha_db_per_km: f64, fiber_length_km: f64) -> Result<f64> {
    if !(alpha_db_per_km >= 0.0 && alpha_db_per_km.is_finite()) {
        return Err(SimError::param(
            "alpha_db_per_km",
            format!("{alpha_db_per_km} must be non-negative"),
        ));
    }
    if !(fiber_length_km >= 0.0 && fiber_length_km.is_finite()) {
        return Err(SimError::param(
            "fiber_length_km",
            format!("{fiber_length_km} must be non-negative"),
        ));
    }
    Ok(10f64.powf(-alpha_db_per_km * fiber_length_km / 10.0))
}

/// Grid edges holding a shared EPR pair in the current round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntanglementState {
    present: Vec<bool>,
}

impl EntanglementState {
    pub fn empty(topology: &GridTopology) -> Self {
        EntanglementState {
            present: vec![false; topology.edge_count()],
        }
    }

    pub fn full(topology: &GridTopology) -> Self {
        EntanglementState {
            present: vec![true; topology.edge_count()],
        }
    }

    /// Builds a state from node pairs; every pair must be a grid edge.
    pub fn from_node_pairs(
        topology: &GridTopology,
        pairs: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self> {
        let mut state = Self::empty(topology);
        for (a, b) in pairs {
            let edge = topology
                .edge_between(a, b)
                .ok_or_else(|| SimError::param("state", format!("({a}, {b}) is not a grid edge")))?;
            state.present[edge.0] = true;
        }
        Ok(state)
    }

    #[inline]
    pub fn contains(&self, edge: EdgeId) -> bool {
        self.present[edge.0]
    }

    pub fn insert(&mut self, edge: EdgeId) {
        self.present[edge.0] = true;
    }

    pub fn remove(&mut self, edge: EdgeId) {
        self.present[edge.0] = false;
    }

    pub fn len(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.present.iter().any(|&p| p)
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.present
            .iter()
            .enumerate()
            .filter(|(_, &p)| p)
            .map(|(i, _)| EdgeId(i))
    }

    /// Number of edge slots, equal to the topology's edge count.
    pub fn capacity(&self) -> usize {
        self.present.len()
    }
}

/// Samples one independent Bernoulli(`p`) per grid edge.
pub fn generate_entanglement(
    topology: &GridTopology,
    p: f64,
    rng: &mut RandomStream,
) -> Result<EntanglementState> {
    check_probability("link_success_probability", p)?;
    let present = (0..topology.edge_count())
        .map(|_| rng.random_bool(p))
        .collect();
    Ok(EntanglementState { present })
}
