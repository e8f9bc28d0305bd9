//! Simulation and analysis of the Persistent Turning Walker, a planar
//! random walk whose curvature is an Ornstein-Uhlenbeck process.
//!
//! All quantities are in scaled units (see [`params`]).

pub mod analytics;
pub mod ensemble;
pub mod error;
pub mod params;
pub mod rng;
pub mod sampler;

pub use error::{PtwError, Result};
