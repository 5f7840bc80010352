//! Heterogeneous recurrent spiking reservoirs.
//!
//! The crate covers the whole experimental loop: leaky integrate-and-fire
//! populations with gamma-distributed time constants, distance-dependent
//! recurrent wiring, trace-based STDP with per-synapse constants, the
//! simulation engine and linear readout, effective-rank separability,
//! Wasserstein distances between hyperparameter distributions, and a
//! Gaussian-process Bayesian optimizer whose Matérn kernel is evaluated on
//! those distances.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod lif;
pub mod ot;
pub mod plasticity;
pub mod seeds;
pub mod separability;
pub mod sim;
pub mod space;
pub mod topology;

pub use error::{Error, Result};
