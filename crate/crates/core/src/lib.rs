//! Process-aware schema matching: decision histories, monotone acceptance
//! rules, a learned decision calibrator and algorithmic recall boosting.

pub mod boost;
pub mod calibrator;
pub mod engine;
pub mod error;
pub mod eval;
pub mod io;
pub mod matchers;
pub mod metrics;
pub mod model;
pub mod session;
pub mod sim;
pub mod theory;

pub use error::{Error, Result};
