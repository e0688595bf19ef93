//! Graph estimators: neighborhood selection with the Lasso, GTREX, and the
//! graphical lasso.

pub mod glasso;
pub mod gtrex;
pub mod neighborhood;

/// Entries with magnitude at or below this count as zero when reading a
/// support off a coefficient or precision matrix.
pub const SUPPORT_TOL: f64 = 1e-10;

pub use glasso::{glasso, glasso_kkt_residual, glasso_path, GlassoConfig, GlassoPath, GlassoResult};
pub use gtrex::{
    gtrex, gtrex_threshold_path, sequential_bootstrap, threshold_edges, FrequencyMatrix, GtrexParams,
    GtrexResult,
};
pub use neighborhood::{neighborhood_path, neighborhood_select, NeighborhoodResult, Rule};
