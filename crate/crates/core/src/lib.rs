//! Entropy-inequality toolkit for causal structures with latent nodes.
//!
//! The crate builds linear systems over joint (and, where meaningful,
//! conditional) entropies of the systems appearing in a causal structure,
//! projects them onto observed-variable entropies by exact Fourier-Motzkin
//! elimination, and certifies observed entropy points against the full
//! system with exact rational linear programming.

pub mod certify;
pub mod coexist;
pub mod constraints;
pub mod dist;
pub mod enclose;
pub mod error;
pub mod graph;
pub mod poly;

pub use error::{Error, Result};
