//! Metric-graph Gaussian free field: sampling, local-time pseudo-metric,
//! first-passage sets and electrical-network kernels.

pub mod error;
pub mod exec;
pub mod fieldsim;
pub mod fps;
pub mod laws;
pub mod lattice;
pub mod linalg;
pub mod metric;
pub mod network;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use network::{load_network, BoundarySpec, Network, Partition};
