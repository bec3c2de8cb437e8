//! E91 sifting, asymptotic distillation and key relay through trusted nodes.

use std::collections::VecDeque;

use rand::Rng;

use crate::channel::ChannelSet;
use crate::entanglement::RandomStream;
use crate::error::{Result, SimError};
use crate::topology::NodeId;

/// Probability that one E91 round over a channel yields a sifted bit.
pub const SIFT_PROBABILITY: f64 = 0.25;

/// Probability that a sifted bit from a fully mixed channel disagrees.
pub const MIXED_ERROR_PROBABILITY: f64 = 0.5;

/// Position of the unordered pair `{i, j}`, `i ≠ j`, in a packed upper
/// triangle over `n` parties.
#[inline]
fn pair_slot(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

fn slot_of(parties: &[NodeId], node: NodeId) -> Option<usize> {
    parties.iter().position(|&p| p == node)
}

/// Raw key length `k` and error count `w` for every unordered party pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairKeyStore {
    parties: Vec<NodeId>,
    raw: Vec<u64>,
    errors: Vec<u64>,
}

impl PairKeyStore {
    pub fn new(parties: &[NodeId]) -> Self {
        let pairs = parties.len() * parties.len().saturating_sub(1) / 2;
        PairKeyStore {
            parties: parties.to_vec(),
            raw: vec![0; pairs],
            errors: vec![0; pairs],
        }
    }

    pub fn parties(&self) -> &[NodeId] {
        &self.parties
    }

    fn slot(&self, a: NodeId, b: NodeId) -> Result<usize> {
        let i = slot_of(&self.parties, a);
        let j = slot_of(&self.parties, b);
        match (i, j) {
            (Some(i), Some(j)) if i != j => Ok(pair_slot(self.parties.len(), i, j)),
            _ => Err(SimError::param(
                "pair",
                format!("({a}, {b}) is not a pair of distinct parties"),
            )),
        }
    }

    /// Appends one sifted bit to the pair's store.
    pub fn record(&mut self, a: NodeId, b: NodeId, error: bool) -> Result<()> {
        let s = self.slot(a, b)?;
        self.raw[s] += 1;
        self.errors[s] += error as u64;
        Ok(())
    }

    /// Sets a pair's counters directly; `errors` may not exceed `raw`.
    pub fn set(&mut self, a: NodeId, b: NodeId, raw: u64, errors: u64) -> Result<()> {
        if errors > raw {
            return Err(SimError::param("errors", format!("{errors} errors exceed {raw} raw bits")));
        }
        let s = self.slot(a, b)?;
        self.raw[s] = raw;
        self.errors[s] = errors;
        Ok(())
    }

    pub fn raw_bits(&self, a: NodeId, b: NodeId) -> u64 {
        self.slot(a, b).map_or(0, |s| self.raw[s])
    }

    pub fn error_bits(&self, a: NodeId, b: NodeId) -> u64 {
        self.slot(a, b).map_or(0, |s| self.errors[s])
    }

    /// Adds another store's counters. Both stores must cover the same parties.
    pub fn merge(&mut self, other: &PairKeyStore) {
        assert_eq!(self.parties, other.parties, "merging stores of different networks");
        for (a, b) in self.raw.iter_mut().zip(&other.raw) {
            *a += b;
        }
        for (a, b) in self.errors.iter_mut().zip(&other.errors) {
            *a += b;
        }
    }

    /// `(a, b, raw, errors)` for every unordered pair, `a` before `b` in
    /// party order.
    pub fn pairs(&self) -> impl Iterator<Item = (NodeId, NodeId, u64, u64)> + '_ {
        let n = self.parties.len();
        (0..n).flat_map(move |i| {
            (i + 1..n).map(move |j| {
                let s = pair_slot(n, i, j);
                (self.parties[i], self.parties[j], self.raw[s], self.errors[s])
            })
        })
    }
}

/// One round of E91 over every channel.
///
/// Each channel yields a sifted bit with probability 1/4. Bits from coherent
/// channels always agree; bits from decohered channels disagree with
/// probability 1/2.
pub fn sift_round(
    channels: &ChannelSet,
    store: &mut PairKeyStore,
    rng: &mut RandomStream,
) -> Result<()> {
    for ch in channels.iter() {
        if !rng.random_bool(SIFT_PROBABILITY) {
            continue;
        }
        let error = !ch.coherent && rng.random_bool(MIXED_ERROR_PROBABILITY);
        store.record(ch.endpoint_a, ch.endpoint_b, error)?;
    }
    Ok(())
}

/// Binary entropy `h(q) = −q log₂ q − (1−q) log₂(1−q)`, with `h(0) = h(1) = 0`.
pub fn binary_entropy(q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(SimError::param("q", format!("{q} is outside [0, 1]")));
    }
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok(term(q) + term(1.0 - q))
}

/// Asymptotic secret fraction of a raw key with error rate `q`: `1 − 2h(q)`,
/// clamped at zero.
pub fn secret_fraction(q: f64) -> Result<f64> {
    Ok((1.0 - 2.0 * binary_entropy(q)?).max(0.0))
}

/// Secret key available between every pair of parties after distillation.
#[derive(Debug, Clone, PartialEq)]
pub struct SecretKeyGraph {
    parties: Vec<NodeId>,
    secret: Vec<f64>,
}

impl SecretKeyGraph {
    /// A graph over `parties` with no key anywhere.
    pub fn new(parties: &[NodeId]) -> Self {
        let pairs = parties.len() * parties.len().saturating_sub(1) / 2;
        SecretKeyGraph {
            parties: parties.to_vec(),
            secret: vec![0.0; pairs],
        }
    }

    pub fn parties(&self) -> &[NodeId] {
        &self.parties
    }

    pub fn set(&mut self, a: NodeId, b: NodeId, bits: f64) -> Result<()> {
        if !(bits >= 0.0 && bits.is_finite()) {
            return Err(SimError::param("secret_bits", format!("{bits} must be non-negative")));
        }
        let s = self.slot(a, b)?;
        self.secret[s] = bits;
        Ok(())
    }

    pub fn secret_bits(&self, a: NodeId, b: NodeId) -> f64 {
        self.slot(a, b).map_or(0.0, |s| self.secret[s])
    }

    fn slot(&self, a: NodeId, b: NodeId) -> Result<usize> {
        match (slot_of(&self.parties, a), slot_of(&self.parties, b)) {
            (Some(i), Some(j)) if i != j => Ok(pair_slot(self.parties.len(), i, j)),
            _ => Err(SimError::param(
                "pair",
                format!("({a}, {b}) is not a pair of distinct parties"),
            )),
        }
    }
}

/// Turns raw stores into secret key: `s = max(0, (1 − 2h(w/k)) · k)`.
pub fn distill(store: &PairKeyStore) -> SecretKeyGraph {
    let mut graph = SecretKeyGraph::new(store.parties());
    for (a, b, raw, errors) in store.pairs() {
        if raw == 0 {
            continue;
        }
        let q = errors as f64 / raw as f64;
        let fraction = secret_fraction(q).expect("errors never exceed raw bits");
        graph.set(a, b, fraction * raw as f64).expect("pair comes from the store");
    }
    graph
}

/// Maximum secret key that can be relayed from `source` to `sink`.
///
/// Each pair's secret key is an undirected capacity. Flow through an
/// intermediate party stands for that party publishing the XOR of the two
/// keys it holds. Computed with Edmonds–Karp on the complete party graph.
pub fn max_key_flow(graph: &SecretKeyGraph, source: NodeId, sink: NodeId) -> Result<f64> {
    let parties = graph.parties();
    let n = parties.len();
    let (Some(s), Some(t)) = (slot_of(parties, source), slot_of(parties, sink)) else {
        return Err(SimError::param("source/sink", "both must be parties of the graph"));
    };
    if s == t {
        return Err(SimError::param("source/sink", "source and sink must differ"));
    }

    let mut residual = vec![vec![0.0f64; n]; n];
    let mut largest = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let c = graph.secret[pair_slot(n, i, j)];
            residual[i][j] = c;
            residual[j][i] = c;
            largest = largest.max(c);
        }
    }
    let eps = 1e-12 * (1.0 + largest);

    let mut flow = 0.0;
    let mut parent = vec![usize::MAX; n];
    let mut queue = VecDeque::with_capacity(n);
    loop {
        parent.fill(usize::MAX);
        parent[s] = s;
        queue.clear();
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            if u == t {
                break;
            }
            for v in 0..n {
                if parent[v] == usize::MAX && residual[u][v] > eps {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[t] == usize::MAX {
            break;
        }
        let mut bottleneck = f64::INFINITY;
        let mut v = t;
        while v != s {
            let u = parent[v];
            bottleneck = bottleneck.min(residual[u][v]);
            v = u;
        }
        let mut v = t;
        while v != s {
            let u = parent[v];
            residual[u][v] -= bottleneck;
            residual[v][u] += bottleneck;
            v = u;
        }
        flow += bottleneck;
    }
    Ok(flow)
}
