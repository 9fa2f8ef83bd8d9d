//! Value-of-information event triggering for a networked LQG loop with
//! random processing delay.

pub mod aoi;
pub mod artifacts;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod lqr;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod sim;
pub mod solver;

pub use error::{Result, VoiError};
