use thiserror::Error;

use crate::topology::NodeId;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("grid size must be at least 2, got {0}")]
    InvalidGridSize(usize),
    #[error("invalid trusted-node placement: {0}")]
    InvalidPlacement(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("node {0} is a party and makes no routing decision")]
    InvalidNode(NodeId),
    #[error("inconsistent pairing at node {node}: {reason}")]
    InconsistentPairing { node: NodeId, reason: String },
}

impl SimError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        SimError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Checks that `value` is a probability.
pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(SimError::param(name, format!("{value} is outside [0, 1]")))
    }
}
