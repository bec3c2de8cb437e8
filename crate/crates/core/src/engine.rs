//! Trials and parameter sweeps.
//!
//! A trial builds the topology once, runs `rounds` independent rounds of
//! link generation, routing, swapping and sifting, then distills every pair's
//! raw key and relays it from Alice to Bob by max-flow. Each round draws from
//! its own [`RandomStream`]s keyed by `(seed, round, stage)`, so rounds and
//! trials can run on any number of threads and still reproduce bit for bit.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{realize_channels, DecoherenceExponent, LossModel, SwapModel};
use crate::entanglement::{generate_entanglement, link_success_probability, RandomStream, StreamLabel};
use crate::error::{check_probability, Result, SimError};
use crate::qkd::{distill, max_key_flow, sift_round, PairKeyStore};
use crate::routing::{route, AlgorithmKind};
use crate::topology::{GridTopology, NodeId, Placement};

pub const DEFAULT_GRID_SIZE: usize = 5;
pub const DEFAULT_FIBER_LENGTH_KM: f64 = 1.0;
pub const DEFAULT_ALPHA_DB_PER_KM: f64 = 0.2;
pub const DEFAULT_BSM_SUCCESS: f64 = 0.85;
pub const DEFAULT_DECOHERENCE: f64 = 0.02;
pub const DEFAULT_ROUNDS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_SPAN_KM: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub n: usize,
    pub fiber_length_km: f64,
    pub alpha_db_per_km: f64,
    pub bsm_success: f64,
    pub decoherence: f64,
    pub rounds: u64,
    pub algorithm: AlgorithmKind,
    pub placement: Placement,
    pub seed: u64,
    pub loss_model: LossModel,
    pub decoherence_exponent: DecoherenceExponent,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            n: DEFAULT_GRID_SIZE,
            fiber_length_km: DEFAULT_FIBER_LENGTH_KM,
            alpha_db_per_km: DEFAULT_ALPHA_DB_PER_KM,
            bsm_success: DEFAULT_BSM_SUCCESS,
            decoherence: DEFAULT_DECOHERENCE,
            rounds: DEFAULT_ROUNDS,
            algorithm: AlgorithmKind::Global,
            placement: Placement::None,
            seed: DEFAULT_SEED,
            loss_model: LossModel::Heralded,
            decoherence_exponent: DecoherenceExponent::Swaps,
        }
    }
}

impl TrialConfig {
    /// Checks every field and that the placement resolves on the grid.
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(SimError::InvalidGridSize(self.n));
        }
        if !(self.fiber_length_km > 0.0 && self.fiber_length_km.is_finite()) {
            return Err(SimError::param(
                "fiber_length_km",
                format!("{} must be positive", self.fiber_length_km),
            ));
        }
        link_success_probability(self.alpha_db_per_km, self.fiber_length_km)?;
        check_probability("bsm_success", self.bsm_success)?;
        check_probability("decoherence", self.decoherence)?;
        if self.rounds == 0 {
            return Err(SimError::param("rounds", "at least one round is required"));
        }
        crate::topology::trusted_node_ids(&self.placement, self.n)?;
        Ok(())
    }

    fn swap_model(&self) -> Result<SwapModel> {
        Ok(SwapModel::new(self.bsm_success, self.decoherence)?
            .with_loss_model(self.loss_model)
            .with_decoherence_exponent(self.decoherence_exponent))
    }
}

/// Raw and distilled key between one pair of parties at the end of a trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairOutcome {
    pub a: NodeId,
    pub b: NodeId,
    pub raw_bits: u64,
    pub error_bits: u64,
    pub secret_bits: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub config: TrialConfig,
    /// Secret bits delivered to Alice and Bob per round.
    pub key_rate: f64,
    pub flow_bits: f64,
    pub pairs: Vec<PairOutcome>,
    pub elapsed: Duration,
}

impl TrialResult {
    fn pair(&self, a: NodeId, b: NodeId) -> Option<&PairOutcome> {
        self.pairs
            .iter()
            .find(|p| (p.a, p.b) == (a, b) || (p.a, p.b) == (b, a))
    }

    pub fn raw_bits_ab(&self) -> u64 {
        let (a, b) = self.alice_bob();
        self.pair(a, b).map_or(0, |p| p.raw_bits)
    }

    pub fn secret_bits_ab(&self) -> f64 {
        let (a, b) = self.alice_bob();
        self.pair(a, b).map_or(0.0, |p| p.secret_bits)
    }

    fn alice_bob(&self) -> (NodeId, NodeId) {
        (NodeId(0), NodeId(self.config.n * self.config.n - 1))
    }

    /// Everything but the wall-clock time matches.
    pub fn same_outcome(&self, other: &TrialResult) -> bool {
        self.config == other.config
            && self.key_rate.to_bits() == other.key_rate.to_bits()
            && self.flow_bits.to_bits() == other.flow_bits.to_bits()
            && self.pairs == other.pairs
    }
}

/// One round of link generation, routing, swapping and sifting.
fn run_round(
    topology: &GridTopology,
    config: &TrialConfig,
    link_probability: f64,
    swap: &SwapModel,
    round: u64,
    store: &mut PairKeyStore,
) -> Result<()> {
    let stream = |label| RandomStream::new(config.seed, round, label);
    let state = generate_entanglement(topology, link_probability, &mut stream(StreamLabel::Entanglement))?;
    let paths = route(topology, &state, config.algorithm, &mut stream(StreamLabel::Routing))?;
    let channels = realize_channels(&paths, swap, &mut stream(StreamLabel::Channel))?;
    sift_round(&channels, store, &mut stream(StreamLabel::Sifting))
}

pub fn run_trial(config: &TrialConfig) -> Result<TrialResult> {
    config.validate()?;
    let started = Instant::now();
    let topology = GridTopology::build(config.n, config.fiber_length_km, &config.placement)?;
    let link_probability = link_success_probability(config.alpha_db_per_km, config.fiber_length_km)?;
    let swap = config.swap_model()?;
    let parties = topology.parties();

    let store = (0..config.rounds)
        .into_par_iter()
        .try_fold(
            || PairKeyStore::new(parties),
            |mut store, round| {
                run_round(&topology, config, link_probability, &swap, round, &mut store)?;
                Ok::<_, SimError>(store)
            },
        )
        .try_reduce(
            || PairKeyStore::new(parties),
            |mut a, b| {
                a.merge(&b);
                Ok(a)
            },
        )?;

    let secret = distill(&store);
    let flow_bits = max_key_flow(&secret, topology.alice(), topology.bob())?;
    let pairs = store
        .pairs()
        .map(|(a, b, raw_bits, error_bits)| PairOutcome {
            a,
            b,
            raw_bits,
            error_bits,
            secret_bits: secret.secret_bits(a, b),
        })
        .collect();

    Ok(TrialResult {
        config: config.clone(),
        key_rate: flow_bits / config.rounds as f64,
        flow_bits,
        pairs,
        elapsed: started.elapsed(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SweepAxis {
    FiberLength,
    Decoherence,
    BsmSuccess,
    GridSize,
    /// Grid size with the grid's side fixed at `span_km`; each point uses
    /// `L = span_km / (n − 1)`.
    FixedSpanGridSize,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::FiberLength => "fiber_length",
            SweepAxis::Decoherence => "decoherence",
            SweepAxis::BsmSuccess => "bsm_success",
            SweepAxis::GridSize => "grid_size",
            SweepAxis::FixedSpanGridSize => "fixed_span_grid_size",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "fiber_length" | "length" => Ok(SweepAxis::FiberLength),
            "decoherence" => Ok(SweepAxis::Decoherence),
            "bsm" | "bsm_success" => Ok(SweepAxis::BsmSuccess),
            "grid_size" | "n" => Ok(SweepAxis::GridSize),
            "fixed_span" | "fixed_span_grid_size" => Ok(SweepAxis::FixedSpanGridSize),
            other => Err(SimError::param("axis", format!("unknown sweep axis `{other}`"))),
        }
    }
}

impl TryFrom<String> for SweepAxis {
    type Error = SimError;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<SweepAxis> for String {
    fn from(value: SweepAxis) -> Self {
        value.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub base: TrialConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Empty means the base config's algorithm.
    pub algorithms: Vec<AlgorithmKind>,
    /// Empty means the base config's placement.
    pub placements: Vec<Placement>,
    pub trials_per_point: usize,
    pub span_km: f64,
}

impl SweepConfig {
    pub fn new(base: TrialConfig, axis: SweepAxis, values: Vec<f64>) -> Self {
        SweepConfig {
            base,
            axis,
            values,
            algorithms: Vec::new(),
            placements: Vec::new(),
            trials_per_point: 1,
            span_km: DEFAULT_SPAN_KM,
        }
    }

    fn apply(&self, config: &mut TrialConfig, value: f64) -> Result<()> {
        let grid_size = |value: f64| {
            if value.fract() == 0.0 && value >= 2.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(SimError::param("values", format!("{value} is not a grid size")))
            }
        };
        match self.axis {
            SweepAxis::FiberLength => config.fiber_length_km = value,
            SweepAxis::Decoherence => config.decoherence = value,
            SweepAxis::BsmSuccess => config.bsm_success = value,
            SweepAxis::GridSize => config.n = grid_size(value)?,
            SweepAxis::FixedSpanGridSize => {
                let n = grid_size(value)?;
                config.n = n;
                config.fiber_length_km = self.span_km / (n - 1) as f64;
            }
        }
        Ok(())
    }

    /// Every trial of the sweep in output order: values, then algorithms,
    /// then placements, then trials. Trial `i` gets seed
    /// `base.seed + i · φ` (mod 2⁶⁴), `φ` the odd 64-bit golden-ratio
    /// constant, so seeds are distinct and the first equals the base seed.
    pub fn trial_configs(&self) -> Result<Vec<TrialConfig>> {
        if self.trials_per_point == 0 {
            return Err(SimError::param("trials", "at least one trial per point is required"));
        }
        if !(self.span_km > 0.0 && self.span_km.is_finite()) {
            return Err(SimError::param("span_km", format!("{} must be positive", self.span_km)));
        }
        let algorithms = if self.algorithms.is_empty() {
            vec![self.base.algorithm]
        } else {
            self.algorithms.clone()
        };
        let placements = if self.placements.is_empty() {
            vec![self.base.placement.clone()]
        } else {
            self.placements.clone()
        };

        let mut configs = Vec::new();
        for &value in &self.values {
            for &algorithm in &algorithms {
                for placement in &placements {
                    for _ in 0..self.trials_per_point {
                        let mut config = self.base.clone();
                        self.apply(&mut config, value)?;
                        config.algorithm = algorithm;
                        config.placement = placement.clone();
                        config.seed = derived_seed(self.base.seed, configs.len() as u64);
                        config.validate()?;
                        configs.push(config);
                    }
                }
            }
        }
        Ok(configs)
    }
}

const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn derived_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index.wrapping_mul(SEED_STRIDE))
}

/// Runs every trial of the sweep; output order follows
/// [`SweepConfig::trial_configs`] whatever the thread count.
pub fn run_sweep(sweep: &SweepConfig) -> Result<Vec<TrialResult>> {
    sweep.trial_configs()?.par_iter().map(run_trial).collect()
}

/// Runs `f` on a dedicated pool of `threads` workers (`0` = one per core).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool construction")
        .install(f)
}
