//! Node-wise Lasso by cyclic coordinate descent on the Gram matrix.
//!
//! The node-`k` problem is
//!
//! ```text
//! minimize ||X^k - X beta||_2^2 + lambda ||beta||_1   subject to beta_k = 0
//! ```
//!
//! with no `1/n` or `1/2` scaling. Written in terms of `G = X^T X` it is twice
//! the quadratic program `1/2 beta^T G beta - G_k^T beta + (lambda/2) ||beta||_1`,
//! which is what [`QuadraticLasso`] solves. The graphical lasso reuses the
//! same solver for its column subproblems.

use nalgebra::DMatrix;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;

/// `X^T X` for a data matrix, shared by all node problems on that matrix.
#[derive(Clone, Debug)]
pub struct Gram {
    g: DMatrix<f64>,
}

impl Gram {
    pub fn new(x: &DataMatrix) -> Self {
        Self {
            g: x.x().tr_mul(x.x()),
        }
    }

    pub fn p(&self) -> usize {
        self.g.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// `2 max_{j != k} |X_j^T X^k|`, the smallest penalty with an all-zero solution.
    pub fn lambda_max(&self, node_k: usize) -> f64 {
        2.0 * self
            .g
            .column(node_k)
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != node_k)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }
}

/// Solves `min 1/2 b^T V b - c^T b + alpha ||b||_1` over all coordinates
/// except an optional excluded one, which is pinned at zero.
pub(crate) struct QuadraticLasso<'a> {
    pub v: &'a DMatrix<f64>,
    pub linear: &'a [f64],
    pub alpha: f64,
    pub excluded: Option<usize>,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl QuadraticLasso<'_> {
    fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        let p = beta.len();
        let mut grad = self.linear.to_vec();
        for (l, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                let col = self.v.column(l);
                for j in 0..p {
                    grad[j] -= col[j] * b;
                }
            }
        }
        grad
    }

    /// Largest violation of the optimality conditions at `beta`.
    pub fn kkt_residual(&self, beta: &[f64]) -> f64 {
        let grad = self.gradient(beta);
        (0..beta.len())
            .filter(|&j| Some(j) != self.excluded && self.v[(j, j)] > 0.0)
            .map(|j| {
                if beta[j] == 0.0 {
                    (grad[j].abs() - self.alpha).max(0.0)
                } else {
                    (grad[j] - self.alpha * beta[j].signum()).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    /// One pass over `coords`; returns the largest coordinate change.
    fn sweep(&self, beta: &mut [f64], grad: &mut [f64], coords: &[usize]) -> f64 {
        let mut max_change = 0.0f64;
        for &j in coords {
            let vjj = self.v[(j, j)];
            let z = grad[j] + vjj * beta[j];
            let new = soft_threshold(z, self.alpha) / vjj;
            let delta = new - beta[j];
            if delta != 0.0 {
                beta[j] = new;
                let col = self.v.column(j);
                for (g, &vlj) in grad.iter_mut().zip(col.iter()) {
                    *g -= vlj * delta;
                }
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    }

    /// Runs coordinate descent from `beta` until both the coordinate change
    /// and the KKT residual fall below `tol`. Returns the final residual.
    pub fn solve(&self, beta: &mut [f64]) -> Result<f64> {
        let p = beta.len();
        // Coordinates with a zero diagonal (zero columns) cannot move.
        let all: Vec<usize> = (0..p)
            .filter(|&j| Some(j) != self.excluded && self.v[(j, j)] > 0.0)
            .collect();
        if let Some(k) = self.excluded {
            beta[k] = 0.0;
        }
        for j in 0..p {
            if self.v[(j, j)] <= 0.0 {
                beta[j] = 0.0;
            }
        }
        let mut sweeps = 0usize;
        let mut residual = f64::INFINITY;
        while sweeps < self.max_sweeps {
            let mut grad = self.gradient(beta);
            let change = self.sweep(beta, &mut grad, &all);
            sweeps += 1;
            if change < self.tol {
                residual = self.kkt_residual(beta);
                if residual <= self.tol {
                    return Ok(residual);
                }
            }
            let active: Vec<usize> = all.iter().copied().filter(|&j| beta[j] != 0.0).collect();
            while sweeps < self.max_sweeps && !active.is_empty() {
                let change = self.sweep(beta, &mut grad, &active);
                sweeps += 1;
                if change < self.tol {
                    break;
                }
            }
        }
        if residual.is_infinite() {
            residual = self.kkt_residual(beta);
        }
        Err(Error::Convergence {
            solver: "coordinate descent",
            iterations: sweeps,
            residual,
        })
    }
}

pub(crate) fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// One node regression: regress column `node_k` of `x` on the others.
#[derive(Clone, Copy, Debug)]
pub struct LassoProblem<'a> {
    pub x: &'a DataMatrix,
    pub node_k: usize,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LassoSolution {
    /// Length-`p` coefficients with `beta[node_k] == 0`.
    pub beta: Vec<f64>,
    pub lambda: f64,
    /// Largest violation of the subgradient conditions, in the units of the
    /// unscaled objective.
    pub kkt_residual: f64,
}

/// `||X^k - X beta||^2 + lambda ||beta||_1`.
pub fn lasso_objective(x: &DataMatrix, node_k: usize, beta: &[f64], lambda: f64) -> f64 {
    let xm = x.x();
    let mut r = xm.column(node_k).clone_owned();
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            r.axpy(-b, &xm.column(j), 1.0);
        }
    }
    r.norm_squared() + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// `2 max_{j != k} |X_j^T X^k|`.
pub fn lambda_max_node(x: &DataMatrix, node_k: usize) -> Result<f64> {
    check_node(x.p(), node_k)?;
    let xm = x.x();
    let target = xm.column(node_k);
    Ok(2.0
        * (0..x.p())
            .filter(|&j| j != node_k)
            .map(|j| xm.column(j).dot(&target).abs())
            .fold(0.0, f64::max))
}

fn check_node(p: usize, node_k: usize) -> Result<()> {
    if node_k >= p {
        return Err(Error::parameter(format!("node {} out of range for p = {p}", node_k + 1)));
    }
    Ok(())
}

/// Solves the node-`k` Lasso, optionally warm-started from `init`.
pub fn lasso_node(problem: &LassoProblem<'_>, init: Option<&[f64]>, tol: f64) -> Result<LassoSolution> {
    let gram = Gram::new(problem.x);
    lasso_node_gram(&gram, problem.node_k, problem.lambda, init, tol)
}

/// [`lasso_node`] on a precomputed Gram matrix.
pub fn lasso_node_gram(
    gram: &Gram,
    node_k: usize,
    lambda: f64,
    init: Option<&[f64]>,
    tol: f64,
) -> Result<LassoSolution> {
    let p = gram.p();
    check_node(p, node_k)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::parameter(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let mut beta = match init {
        Some(b) if b.len() != p => {
            return Err(Error::parameter(format!("initial vector has length {}, want {p}", b.len())));
        }
        Some(b) => b.to_vec(),
        None => vec![0.0; p],
    };
    let linear: Vec<f64> = gram.g.column(node_k).iter().copied().collect();
    let solver = QuadraticLasso {
        v: &gram.g,
        linear: &linear,
        alpha: lambda / 2.0,
        excluded: Some(node_k),
        tol: tol / 2.0,
        max_sweeps: DEFAULT_MAX_SWEEPS,
    };
    let residual = solver.solve(&mut beta).map_err(|e| match e {
        Error::Convergence {
            solver,
            iterations,
            residual,
        } => Error::Convergence {
            solver,
            iterations,
            residual: 2.0 * residual,
        },
        other => other,
    })?;
    Ok(LassoSolution {
        beta,
        lambda,
        kkt_residual: 2.0 * residual,
    })
}

pub(crate) fn check_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.is_empty() {
        return Err(Error::parameter("fraction grid is empty"));
    }
    if fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::parameter("grid fractions must lie in (0, 1]"));
    }
    if fractions.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::parameter("grid fractions must be strictly increasing"));
    }
    Ok(())
}

/// The 100-point grid `0.01, 0.02, ..., 1.00`.
pub fn unit_grid() -> Vec<f64> {
    (1..=100).map(|i| i as f64 / 100.0).collect()
}

/// Solutions at `lambda = f * lambda_max` for each fraction `f`, computed from
/// the largest fraction down with warm starts. Output follows `fractions` order.
pub fn lasso_path_node(x: &DataMatrix, node_k: usize, fractions: &[f64], tol: f64) -> Result<Vec<LassoSolution>> {
    let gram = Gram::new(x);
    lasso_path_node_gram(&gram, node_k, fractions, tol)
}

pub fn lasso_path_node_gram(gram: &Gram, node_k: usize, fractions: &[f64], tol: f64) -> Result<Vec<LassoSolution>> {
    check_node(gram.p(), node_k)?;
    check_fractions(fractions)?;
    let lambda_max = gram.lambda_max(node_k);
    let mut out = Vec::with_capacity(fractions.len());
    let mut warm = vec![0.0; gram.p()];
    for &f in fractions.iter().rev() {
        let sol = lasso_node_gram(gram, node_k, f * lambda_max, Some(&warm), tol)?;
        warm.clone_from(&sol.beta);
        out.push(sol);
    }
    out.reverse();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_data(n: usize, p: usize, seed: u64) -> DataMatrix {
        let mut r = rng::seeded(seed);
        DataMatrix::new(DMatrix::from_fn(n, p, |_, _| r.sample(StandardNormal))).unwrap()
    }

    #[test]
    fn zero_at_and_above_lambda_max() {
        let x = random_data(20, 5, 1);
        let lmax = lambda_max_node(&x, 2).unwrap();
        let sol = lasso_node(&LassoProblem { x: &x, node_k: 2, lambda: lmax }, None, 1e-9).unwrap();
        assert!(sol.beta.iter().all(|&b| b == 0.0));
        let above = lasso_node(&LassoProblem { x: &x, node_k: 2, lambda: 1.001 * lmax }, None, 1e-9).unwrap();
        assert!(above.beta.iter().all(|&b| b == 0.0));
        let below = lasso_node(&LassoProblem { x: &x, node_k: 2, lambda: 0.999 * lmax }, None, 1e-9).unwrap();
        assert!(below.beta.iter().any(|&b| b != 0.0));
    }

    #[test]
    fn orthonormal_design_soft_thresholds() {
        // Columns e1, e2, e3 and target = e1 + 0.3 e2 + 2 e4 ... built so X^T X = I
        // on the predictors and z_j = X_j^T X^k.
        let x = DataMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0, 0.3],
            vec![0.0, 0.0, 1.0, -2.0],
            vec![0.0, 0.0, 0.0, 5.0],
        ])
        .unwrap();
        let sol = lasso_node(&LassoProblem { x: &x, node_k: 3, lambda: 1.0 }, None, 1e-12).unwrap();
        assert_abs_diff_eq!(sol.beta[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.beta[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.beta[2], -1.5, epsilon = 1e-12);
        assert_eq!(sol.beta[3], 0.0);
        // Exhaustive 1-D check of coordinate 0: the objective separates.
        let best = (0..=20_000)
            .map(|i| -1.0 + i as f64 * 1e-4)
            .min_by(|&a, &b| {
                let fa = (1.0 - a).powi(2) + a.abs();
                let fb = (1.0 - b).powi(2) + b.abs();
                fa.total_cmp(&fb)
            })
            .unwrap();
        assert_abs_diff_eq!(best, 0.5, epsilon = 1e-4);
    }

    #[test]
    fn orthogonal_target_has_zero_lambda_max() {
        let x = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(lambda_max_node(&x, 0).unwrap(), 0.0);
    }

    #[test]
    fn two_by_two_lambda_max_formula() {
        let s = 0.5f64.sqrt();
        let x = DataMatrix::from_rows(&[vec![s, 2.0 * s], vec![s, -s]]).unwrap();
        let direct = 2.0 * (s * 2.0 * s + s * -s).abs();
        assert_abs_diff_eq!(lambda_max_node(&x, 0).unwrap(), direct, epsilon = 1e-15);
        assert_abs_diff_eq!(Gram::new(&x).lambda_max(0), direct, epsilon = 1e-15);
    }

    #[test]
    fn matches_grid_search_on_two_free_coordinates() {
        let x = random_data(5, 3, 11);
        let lambda = 0.3 * lambda_max_node(&x, 0).unwrap();
        let sol = lasso_node(&LassoProblem { x: &x, node_k: 0, lambda }, None, 1e-10).unwrap();
        let f_sol = lasso_objective(&x, 0, &sol.beta, lambda);
        let mut best = f64::INFINITY;
        let steps = 800;
        for a in 0..=steps {
            for b in 0..=steps {
                let beta = [0.0, -2.0 + 4.0 * a as f64 / steps as f64, -2.0 + 4.0 * b as f64 / steps as f64];
                best = best.min(lasso_objective(&x, 0, &beta, lambda));
            }
        }
        assert!(f_sol <= best + 1e-9, "solver {f_sol} vs grid {best}");
        assert!((f_sol - best).abs() < 1e-3);
    }

    #[test]
    fn path_matches_cold_starts() {
        let x = random_data(50, 10, 3).normalize(crate::data::Normalization::ColumnsSqrtN).unwrap();
        let grid = unit_grid();
        let path = lasso_path_node(&x, 4, &grid, 1e-10).unwrap();
        assert_eq!(path.len(), 100);
        assert!(path[99].beta.iter().all(|&b| b == 0.0));
        let lmax = lambda_max_node(&x, 4).unwrap();
        for (f, warm) in grid.iter().zip(&path) {
            let cold = lasso_node(&LassoProblem { x: &x, node_k: 4, lambda: f * lmax }, None, 1e-10).unwrap();
            for (a, b) in warm.beta.iter().zip(&cold.beta) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn bad_inputs() {
        let x = random_data(5, 3, 0);
        assert!(lasso_node(&LassoProblem { x: &x, node_k: 3, lambda: 1.0 }, None, 1e-7).is_err());
        assert!(lasso_node(&LassoProblem { x: &x, node_k: 0, lambda: -1.0 }, None, 1e-7).is_err());
        assert!(lasso_path_node(&x, 0, &[0.5, 0.2], 1e-7).is_err());
        assert!(lasso_path_node(&x, 0, &[0.0, 0.2], 1e-7).is_err());
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let x = random_data(30, 8, 5);
        let gram = Gram::new(&x);
        let linear: Vec<f64> = gram.g.column(0).iter().copied().collect();
        let solver = QuadraticLasso {
            v: &gram.g,
            linear: &linear,
            alpha: 0.01,
            excluded: Some(0),
            tol: 1e-300,
            max_sweeps: 3,
        };
        let mut beta = vec![0.0; 8];
        match solver.solve(&mut beta) {
            Err(Error::Convergence { residual, iterations, .. }) => {
                assert!(iterations >= 3);
                assert!(residual.is_finite());
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }
}
