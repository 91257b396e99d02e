//! Cryptanalysis workbench for permanent stuck-at-0 faults in the Trivium
//! stream cipher: a bit-exact simulator, a fault injection model, keystream
//! feature based case detection, and per-case key recovery attacks.

pub mod anf;
pub mod attack;
pub mod bits;
pub mod campaign;
pub mod degraded;
pub mod detector;
pub mod fault;
pub mod gf2;
pub mod trivium;
pub mod verify;

pub use bits::{Iv, Key, Keystream};
pub use fault::{CaseLabel, FaultMask, InjectionModel};
pub use trivium::State;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("empty fault mask cannot be classified")]
    EmptyMask,
    #[error("invalid fault mask: {0}")]
    InvalidMask(String),
    #[error("invalid injection model: {0}")]
    InvalidModel(String),
    #[error("keystream request of {0} bits exceeds the 2^24 cap")]
    KeystreamCap(usize),
    #[error("keystream may only be generated from states at time >= 1152 (got {0})")]
    NotInitialized(u64),
    #[error("degraded renewal undefined: {0}")]
    DegradedDomain(String),
    #[error("the Case 6 degraded renewal is irreversible")]
    Irreversible,
    #[error("wrong case for this attack: {0}")]
    WrongCase(String),
    #[error("attack failed at stage `{stage}`: {survivors} surviving candidates")]
    AttackFailure { stage: String, survivors: usize },
    #[error("linear system is inconsistent")]
    Inconsistent,
    #[error("solution space of dimension {dim} exceeds enumeration cap {cap}")]
    SolutionOverflow { dim: usize, cap: usize },
    #[error("monomial count exceeded cap {cap} at {context}")]
    MonomialCap { cap: usize, context: String },
    #[error("unknown check id `{0}`")]
    UnknownCheck(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
