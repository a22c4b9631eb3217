//! Learning dynamics of softmax-REINFORCE agents playing a repeated
//! Prisoner's Dilemma with partner selection.
//!
//! Three independent routes to the same population dynamics live here:
//!
//! * [`abm`]: the agent-based simulator, treated as ground truth;
//! * [`reward`]: closed-form expected reward differences and update variances
//!   expressed as contractions against population moments;
//! * [`meanfield`], [`fpe`] and [`stationary`]: the deterministic transport
//!   flow, the nonlocal Fokker-Planck equation with its particle SDE, and the
//!   regularized stationary fixed-point solver.
//!
//! [`experiment`] ties them together behind a config file and a fixed output
//! schema. Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and plain iterators otherwise.

pub mod abm;
pub mod error;
pub mod experiment;
pub mod fpe;
pub mod game;
pub mod meanfield;
pub mod par;
pub mod population;
pub mod reward;
pub mod rng;
pub mod snapshot;
pub mod stationary;
pub mod stats;

pub use error::{Error, Result};
pub use game::{Action, PartnerRule, PayoffParams};
pub use population::{Density, Grid, InitSpec, MomentVector};
pub use snapshot::Snapshot;
