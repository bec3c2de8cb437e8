//! Monte-Carlo simulation of entanglement-based QKD (E91) over an `n × n`
//! grid of quantum repeaters with a minority of trusted nodes.
//!
//! A trial runs `M` rounds of
//!
//! 1. elementary link generation over lossy fiber ([`entanglement`]),
//! 2. routing and entanglement swapping ([`routing`], [`channel`]),
//! 3. E91 sifting into per-pair raw-key stores ([`qkd`]),
//!
//! followed by one distillation pass and a max-flow relay of secret key from
//! Alice to Bob through the trusted nodes. [`engine`] orchestrates trials and
//! parameter sweeps; [`cli`] is the command-line front end.

pub mod channel;
pub mod cli;
pub mod engine;
pub mod entanglement;
pub mod error;
pub mod qkd;
pub mod routing;
pub mod topology;

pub use error::{Result, SimError};
