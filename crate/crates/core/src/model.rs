use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::EdgeSet;

/// A sparse precision matrix `theta = A + d I` whose off-diagonal support is
/// an [`EdgeSet`] and whose diagonal `d` is tuned to a target condition number.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionModel {
    pub(crate) theta: DMatrix<f64>,
    pub(crate) edge_set: EdgeSet,
    pub(crate) diag_value: f64,
    pub(crate) cond_target: f64,
    pub(crate) a_min: f64,
    pub(crate) a_max: f64,
    pub(crate) degenerate: bool,
}

impl PrecisionModel {
    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn edge_set(&self) -> &EdgeSet {
        &self.edge_set
    }

    pub fn diag_value(&self) -> f64 {
        self.diag_value
    }

    pub fn cond_target(&self) -> f64 {
        self.cond_target
    }

    pub fn a_range(&self) -> (f64, f64) {
        (self.a_min, self.a_max)
    }

    /// True when the off-diagonal part has a single eigenvalue (no edges), so
    /// no diagonal can reach the target; the model is then the identity.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn p(&self) -> usize {
        self.theta.nrows()
    }

    /// Ascending eigenvalues of `theta`.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        symmetric_eigenvalues(&self.theta)
    }

    /// `lambda_max / lambda_min` from a fresh eigendecomposition.
    pub fn condition_number(&self) -> Result<f64> {
        let ev = self.eigenvalues()?;
        Ok(ev[ev.len() - 1] / ev[0])
    }

    /// Dense row-major CSV with round-trip float formatting.
    pub fn theta_csv(&self) -> String {
        matrix_csv(&self.theta)
    }
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::numeric("symmetric eigensolver did not converge"))?;
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

pub(crate) fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
