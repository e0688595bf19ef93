//! Edge-structure estimation for Gaussian graphical models.
//!
//! * [`estimators::gtrex`]: tuning-free GTREX (bootstrap-aggregated TREX
//!   neighborhood selection),
//! * [`estimators::neighborhood`]: neighborhood selection with the Lasso,
//! * [`estimators::glasso`]: the graphical lasso,
//! * [`gmg`]: synthetic hub, niche, Erdős–Rényi and scale-free models,
//! * [`metrics`] and [`bench`]: scoring and the benchmark protocol.

pub mod bench;
pub mod data;
pub mod error;
pub mod estimators;
pub mod gmg;
pub mod graph;
pub mod lasso;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod trex;

pub use data::{DataMatrix, Normalization};
pub use error::{Error, Result};
pub use estimators::FrequencyMatrix;
pub use graph::{EdgeSet, PathResult};
pub use model::PrecisionModel;
