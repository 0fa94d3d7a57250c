//! Frequency-aware degradation analysis, rule-based restoration planning,
//! and the routing and loss math of a band-specialized LoRA mixture of experts.

pub mod advloss;
pub mod degrade;
pub mod error;
pub mod freqmoe;
pub mod hints;
pub mod imgstats;
pub mod io;
pub mod planner;
pub mod spectra;
pub mod tensorio;

pub use error::{Error, Result};
