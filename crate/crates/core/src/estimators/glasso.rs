//! Graphical lasso by block coordinate descent over columns of the covariance
//! estimate `W`, each column update being a Lasso subproblem.
//!
//! Objective: `-log det(Theta) + tr(S Theta) + lambda * sum_ij |Theta_ij|`.
//! The diagonal is penalized unless [`GlassoConfig::penalize_diagonal`] is off.

use nalgebra::DMatrix;

use super::SUPPORT_TOL;
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::graph::{EdgeSet, PathResult};
use crate::lasso::{check_fractions, QuadraticLasso};

#[derive(Clone, Debug, PartialEq)]
pub struct GlassoConfig {
    /// Target for the stationarity residual of the returned estimate.
    pub tol: f64,
    pub max_sweeps: usize,
    pub penalize_diagonal: bool,
}

impl Default for GlassoConfig {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_sweeps: 1_000,
            penalize_diagonal: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GlassoResult {
    /// Symmetric positive-definite precision estimate.
    pub theta_hat: DMatrix<f64>,
    /// Covariance estimate maintained by the solver.
    pub w: DMatrix<f64>,
    pub edges: EdgeSet,
    pub lambda: f64,
    pub kkt_residual: f64,
    pub sweeps: usize,
}

/// Column regression coefficients kept between sweeps and along a path.
#[derive(Clone, Debug)]
struct State {
    w: DMatrix<f64>,
    /// Column `j` holds the subproblem solution for column `j`.
    beta: DMatrix<f64>,
}

/// Largest violation of the stationarity conditions
/// `W - S = lambda * sign(Theta)` (subgradient on zeros), with `W = Theta^{-1}`.
pub fn glasso_kkt_residual(
    sample_cov: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    lambda: f64,
    penalize_diagonal: bool,
) -> Result<f64> {
    let w = theta
        .clone()
        .cholesky()
        .ok_or_else(|| Error::numeric("precision estimate is not positive definite"))?
        .inverse();
    let p = theta.nrows();
    let mut worst = 0.0f64;
    for i in 0..p {
        for j in 0..p {
            let gap = w[(i, j)] - sample_cov[(i, j)];
            let v = if i == j {
                let target = if penalize_diagonal { lambda } else { 0.0 };
                (gap - target).abs()
            } else if theta[(i, j)].abs() > SUPPORT_TOL {
                (gap - lambda * theta[(i, j)].signum()).abs()
            } else {
                (gap.abs() - lambda).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    Ok(worst)
}

fn check_input(sample_cov: &DMatrix<f64>, lambda: f64) -> Result<()> {
    let p = sample_cov.nrows();
    if p < 2 || sample_cov.ncols() != p {
        return Err(Error::parameter("sample covariance must be square with p >= 2"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::parameter(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if sample_cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("sample covariance has non-finite entries"));
    }
    for i in 0..p {
        for j in 0..i {
            if sample_cov[(i, j)] != sample_cov[(j, i)] {
                return Err(Error::data("sample covariance is not symmetric"));
            }
        }
    }
    Ok(())
}

/// Solves the graphical lasso at penalty `lambda` with default settings and
/// stationarity tolerance `tol`.
pub fn glasso(sample_cov: &DMatrix<f64>, lambda: f64, tol: f64) -> Result<GlassoResult> {
    let cfg = GlassoConfig {
        tol,
        ..GlassoConfig::default()
    };
    glasso_with(sample_cov, lambda, &cfg)
}

pub fn glasso_with(sample_cov: &DMatrix<f64>, lambda: f64, cfg: &GlassoConfig) -> Result<GlassoResult> {
    check_input(sample_cov, lambda)?;
    let p = sample_cov.nrows();
    let state = State {
        w: sample_cov.clone(),
        beta: DMatrix::zeros(p, p),
    };
    solve(sample_cov, lambda, cfg, state).map(|(r, _)| r)
}

fn solve(s: &DMatrix<f64>, lambda: f64, cfg: &GlassoConfig, mut state: State) -> Result<(GlassoResult, State)> {
    let p = s.nrows();
    let diag_shift = if cfg.penalize_diagonal { lambda } else { 0.0 };
    for i in 0..p {
        state.w[(i, i)] = s[(i, i)] + diag_shift;
    }
    if state.w.clone().cholesky().is_none() {
        return Err(Error::numeric(
            "sample covariance plus diagonal penalty is not positive definite",
        ));
    }
    let inner_tol = (cfg.tol * 1e-3).min(1e-9);
    let mut change_tol = cfg.tol;
    let mut sweeps = 0;
    let mut residual = f64::INFINITY;
    while sweeps < cfg.max_sweeps {
        let mut max_change = 0.0f64;
        for j in 0..p {
            let linear: Vec<f64> = s.column(j).iter().copied().collect();
            let mut beta: Vec<f64> = state.beta.column(j).iter().copied().collect();
            let sub = QuadraticLasso {
                v: &state.w,
                linear: &linear,
                alpha: lambda,
                excluded: Some(j),
                tol: inner_tol,
                max_sweeps: crate::lasso::DEFAULT_MAX_SWEEPS,
            };
            sub.solve(&mut beta)?;
            for i in 0..p {
                if i == j {
                    continue;
                }
                let w_ij: f64 = (0..p)
                    .filter(|&l| l != j && beta[l] != 0.0)
                    .map(|l| state.w[(i, l)] * beta[l])
                    .sum();
                max_change = max_change.max((w_ij - state.w[(i, j)]).abs());
                state.w[(i, j)] = w_ij;
                state.w[(j, i)] = w_ij;
            }
            state.beta.set_column(j, &nalgebra::DVector::from_vec(beta));
        }
        sweeps += 1;
        if max_change < change_tol {
            let theta = precision_from_state(&state)?;
            residual = glasso_kkt_residual(s, &theta, lambda, cfg.penalize_diagonal).unwrap_or(f64::INFINITY);
            if residual <= cfg.tol {
                let edges = support(&theta)?;
                let result = GlassoResult {
                    theta_hat: theta,
                    w: state.w.clone(),
                    edges,
                    lambda,
                    kkt_residual: residual,
                    sweeps,
                };
                return Ok((result, state));
            }
            change_tol *= 0.1;
        }
    }
    Err(Error::Convergence {
        solver: "graphical lasso",
        iterations: sweeps,
        residual,
    })
}

/// `theta_jj = 1 / (w_jj - w_12^T beta)`, `theta_12 = -beta theta_jj`, then
/// symmetrized.
fn precision_from_state(state: &State) -> Result<DMatrix<f64>> {
    let p = state.w.nrows();
    let mut theta = DMatrix::zeros(p, p);
    for j in 0..p {
        let fit: f64 = (0..p)
            .filter(|&l| l != j)
            .map(|l| state.w[(l, j)] * state.beta[(l, j)])
            .sum();
        let denom = state.w[(j, j)] - fit;
        if !(denom > 0.0) {
            return Err(Error::numeric("non-positive Schur complement in graphical lasso"));
        }
        let tjj = 1.0 / denom;
        theta[(j, j)] = tjj;
        for i in 0..p {
            if i != j {
                theta[(i, j)] = -state.beta[(i, j)] * tjj;
            }
        }
    }
    let sym = (&theta + theta.transpose()) * 0.5;
    Ok(sym)
}

fn support(theta: &DMatrix<f64>) -> Result<EdgeSet> {
    let p = theta.nrows();
    let mut edges = EdgeSet::new(p)?;
    for i in 0..p {
        for j in i + 1..p {
            if theta[(i, j)].abs() > SUPPORT_TOL {
                edges.insert(i, j)?;
            }
        }
    }
    Ok(edges)
}

/// A glasso path together with the per-point solutions.
#[derive(Clone, Debug)]
pub struct GlassoPath {
    pub path: PathResult,
    pub solutions: Vec<GlassoResult>,
    /// `max_{i != j} |S_ij|`, the penalty at fraction 1.
    pub lambda_max: f64,
}

/// Solves at `lambda = f * max_{i != j} |S_ij|` for each fraction, from the
/// largest down with warm starts. `S = X^T X / n`.
pub fn glasso_path(x: &DataMatrix, fractions: &[f64], cfg: &GlassoConfig) -> Result<GlassoPath> {
    check_fractions(fractions)?;
    let s = x.sample_covariance();
    let s = (&s + s.transpose()) * 0.5;
    let p = s.nrows();
    let lambda_max = (0..p)
        .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| s[(i, j)].abs())
        .fold(0.0, f64::max);
    check_input(&s, lambda_max)?;
    let mut state = State {
        w: s.clone(),
        beta: DMatrix::zeros(p, p),
    };
    let mut solutions = Vec::with_capacity(fractions.len());
    for &f in fractions.iter().rev() {
        let (result, next) = solve(&s, f * lambda_max, cfg, state)?;
        state = next;
        solutions.push(result);
    }
    solutions.reverse();
    let path = PathResult::new(
        fractions.to_vec(),
        solutions.iter().map(|r| r.edges.clone()).collect(),
        "glasso",
    )?;
    Ok(GlassoPath {
        path,
        solutions,
        lambda_max,
    })
}
