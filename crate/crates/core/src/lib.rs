//! Coloring 3-colorable graphs through SDP vector colorings, Gaussian
//! threshold rounding and multi-step neighborhood walks.

pub mod covers;
pub mod error;
pub mod gaussian;
pub mod graph;
pub mod linalg;
pub mod params;
pub mod pipeline;
pub mod rng;
pub mod rounding;
pub mod sos;
pub mod stats;
pub mod vector_coloring;
pub mod walks;

pub use error::{Error, Result};
