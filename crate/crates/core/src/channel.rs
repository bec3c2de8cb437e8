//! Entanglement swapping along routed paths.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::entanglement::RandomStream;
use crate::error::{check_probability, Result, SimError};
use crate::routing::PathSet;
use crate::topology::NodeId;

/// What a failed Bell-state measurement does to its path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossModel {
    /// The failure is announced and the path yields no channel.
    #[default]
    Heralded,
    /// The failure goes unnoticed and the channel is fully mixed.
    Silent,
}

/// How many decoherence draws a path of `k` swapping repeaters gets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoherenceExponent {
    /// One per swapping repeater: `k`.
    #[default]
    Swaps,
    /// One per elementary link: `k + 1`.
    Links,
}

impl fmt::Display for LossModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossModel::Heralded => "heralded",
            LossModel::Silent => "silent",
        })
    }
}

impl FromStr for LossModel {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "heralded" => Ok(LossModel::Heralded),
            "silent" => Ok(LossModel::Silent),
            other => Err(SimError::param("loss_model", format!("unknown loss model `{other}`"))),
        }
    }
}

impl fmt::Display for DecoherenceExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecoherenceExponent::Swaps => "swaps",
            DecoherenceExponent::Links => "links",
        })
    }
}

impl FromStr for DecoherenceExponent {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "swaps" => Ok(DecoherenceExponent::Swaps),
            "links" => Ok(DecoherenceExponent::Links),
            other => Err(SimError::param(
                "decoherence_exponent",
                format!("unknown decoherence exponent `{other}`"),
            )),
        }
    }
}

/// End-to-end entanglement between two parties.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Channel {
    pub endpoint_a: NodeId,
    pub endpoint_b: NodeId,
    pub coherent: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChannelSet {
    pub channels: Vec<Channel>,
}

impl ChannelSet {
    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Channel> {
        self.channels.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapModel {
    pub bsm_success: f64,
    pub decoherence: f64,
    pub loss_model: LossModel,
    pub decoherence_exponent: DecoherenceExponent,
}

impl SwapModel {
    pub fn new(bsm_success: f64, decoherence: f64) -> Result<Self> {
        check_probability("bsm_success", bsm_success)?;
        check_probability("decoherence", decoherence)?;
        Ok(SwapModel {
            bsm_success,
            decoherence,
            loss_model: LossModel::Heralded,
            decoherence_exponent: DecoherenceExponent::Swaps,
        })
    }

    pub fn with_loss_model(mut self, loss_model: LossModel) -> Self {
        self.loss_model = loss_model;
        self
    }

    pub fn with_decoherence_exponent(mut self, exponent: DecoherenceExponent) -> Self {
        self.decoherence_exponent = exponent;
        self
    }
}

/// Runs the swaps along every path.
///
/// A path with `k` intermediate repeaters needs `k` successful Bell-state
/// measurements. Under the heralded model any failure drops the path; under
/// the silent model it yields an incoherent channel. A surviving channel
/// stays coherent only if each of its decoherence draws (`k`, or `k + 1`
/// per-link) comes up clean.
pub fn realize_channels(
    paths: &PathSet,
    model: &SwapModel,
    rng: &mut RandomStream,
) -> Result<ChannelSet> {
    check_probability("bsm_success", model.bsm_success)?;
    check_probability("decoherence", model.decoherence)?;
    let mut channels = Vec::with_capacity(paths.len());
    for path in paths {
        let k = path.intermediate_count();
        let swapped = (0..k).all(|_| rng.random_bool(model.bsm_success));
        if !swapped && model.loss_model == LossModel::Heralded {
            continue;
        }
        let draws = match model.decoherence_exponent {
            DecoherenceExponent::Swaps => k,
            DecoherenceExponent::Links => k + 1,
        };
        let kept = (0..draws).all(|_| !rng.random_bool(model.decoherence));
        let (a, b) = path.endpoints();
        channels.push(Channel {
            endpoint_a: a,
            endpoint_b: b,
            coherent: swapped && kept,
        });
    }
    Ok(ChannelSet { channels })
}
