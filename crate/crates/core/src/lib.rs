//! Beamforming and handover simulation for a single mobile UE in a mmWave
//! network: path-skeleton beam tracking, Q-learned backup-BS selection and
//! the baselines it is compared against.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod baselines;
pub mod channel;
pub mod environment;
pub mod error;
pub mod handover;
pub mod harness;
pub mod learning;
pub mod mdp;
pub mod rng;
pub mod skeleton;

pub use error::{Error, Result};
