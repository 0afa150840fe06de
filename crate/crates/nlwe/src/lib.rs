//! Simulation and device-independent certification of a three-party
//! entanglement-swapping network whose middle party measures a two-qutrit
//! product basis that no local-operations-and-classical-communication
//! protocol can read out perfectly.
//!
//! The crate provides:
//! - dense complex linear algebra for state vectors and operators ([`linalg`])
//! - the ideal network: states, side-party measurements, the tiled product
//!   basis ([`reference`])
//! - arbitrary projective realizations, their correlation tensors, and
//!   randomized unitarily-equivalent embeddings ([`realization`])
//! - a slow independent correlation path for cross-checking ([`oracle`])
//! - the certification isometries and the extraction theorem ([`selftest`])
//! - fine-grained diagnostic checks on realizations ([`verify`])
//! - a one-way LOCC discrimination optimizer ([`locc`])

pub mod error;
pub mod linalg;
pub mod locc;
pub mod oracle;
pub mod realization;
pub mod reference;
pub mod selftest;
pub mod verify;

pub use error::{Error, Result};
