//! TREX node regression with a smooth `q`-norm surrogate for the sup-norm.
//!
//! For node `k` on a (sub)sample `X`, with residual `r = X^k - X beta` and
//! correlations `u = (X^{-k})^T r`, the surrogate objective is
//!
//! ```text
//! ||r||_2^2 / ||u||_q + ||beta||_1,    beta_k = 0.
//! ```
//!
//! For even `q` the ratio is smooth wherever `u != 0`. The solver is an
//! orthant-wise projected, quasi-Newton scaled subgradient method: it keeps a
//! sign pattern, steps along a limited-memory BFGS direction computed from the
//! minimum-norm subgradient, zeroes coordinates that leave their orthant, and
//! accepts a step only if the objective decreases.
//!
//! Evaluations are cheap for sparse `beta`: `X^T X^k` is computed once and
//! Gram columns `X^T X_j` are computed on first use and cached, so an
//! objective evaluation costs `O(n s + p s)` for support size `s`.

use nalgebra::{DMatrix, DVector};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Weights `(u_i / ||u||_q)^(q-1)` below this fraction of the largest one are
/// dropped from the gradient of the denominator.
const WEIGHT_CUTOFF: f64 = 1e-16;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

/// Solver settings. Defaults: `q = 40`, `opt_tol = 1e-7`, `prog_tol = 1e-9`,
/// `max_iter = ceil(0.2 p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrexConfig {
    /// Even order of the surrogate norm.
    pub q: u32,
    /// Stop when the minimum-norm subgradient's sup-norm falls below this.
    pub opt_tol: f64,
    /// Stop when the relative objective decrease or the largest parameter
    /// change of an accepted step falls below this.
    pub prog_tol: f64,
    /// Iteration cap; `None` means `ceil(0.2 p)`.
    pub max_iter: Option<usize>,
    /// Denominators below this are treated as infeasible (objective `+inf`).
    pub denom_guard: f64,
    /// Number of curvature pairs kept by the quasi-Newton scaling.
    pub memory: usize,
}

impl Default for TrexConfig {
    fn default() -> Self {
        Self {
            q: 40,
            opt_tol: 1e-7,
            prog_tol: 1e-9,
            max_iter: None,
            denom_guard: 1e-12,
            memory: 10,
        }
    }
}

impl TrexConfig {
    /// Tolerances read the other way round: `1e-9` on optimality and `1e-7`
    /// on progress.
    pub fn with_swapped_tolerances(mut self) -> Self {
        std::mem::swap(&mut self.opt_tol, &mut self.prog_tol);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.q < 2 || self.q % 2 != 0 {
            return Err(Error::parameter(format!("q must be an even integer >= 2, got {}", self.q)));
        }
        if !(self.opt_tol > 0.0 && self.prog_tol > 0.0 && self.denom_guard > 0.0) {
            return Err(Error::parameter("TREX tolerances must be positive"));
        }
        if self.max_iter == Some(0) {
            return Err(Error::parameter("max_iter must be at least 1"));
        }
        Ok(())
    }

    pub fn iteration_cap(&self, p: usize) -> usize {
        self.max_iter.unwrap_or_else(|| (0.2 * p as f64).ceil().max(1.0) as usize)
    }
}

/// `||v||_q` computed as `m (sum (v_i/m)^q)^(1/q)` with `m = max |v_i|`.
pub fn q_norm<I: IntoIterator<Item = f64> + Clone>(values: I, q: u32) -> f64 {
    let m = values.clone().into_iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let s: f64 = values.into_iter().map(|v| (v / m).powi(q as i32)).sum();
    m * s.powf(1.0 / q as f64)
}

/// Objective and gradient of one node problem.
pub struct TrexProblem<'a> {
    x: &'a DMatrix<f64>,
    node_k: usize,
    q: u32,
    denom_guard: f64,
    /// `X^T X^k`.
    xty: DVector<f64>,
    gram_cols: Vec<Option<DVector<f64>>>,
}

/// Pieces of one evaluation that the gradient reuses.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub objective: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// `X^T r` for all `p` columns (entry `k` is unused).
    pub correlations: DVector<f64>,
}

impl<'a> TrexProblem<'a> {
    pub fn new(x_bar: &'a DataMatrix, node_k: usize, q: u32, denom_guard: f64) -> Result<Self> {
        let p = x_bar.p();
        if node_k >= p {
            return Err(Error::parameter(format!("node {} out of range for p = {p}", node_k + 1)));
        }
        if p < 2 {
            return Err(Error::parameter("TREX needs at least one predictor"));
        }
        let x = x_bar.x();
        let xty = x.tr_mul(&x.column(node_k));
        Ok(Self {
            x,
            node_k,
            q,
            denom_guard,
            xty,
            gram_cols: vec![None; p],
        })
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    fn gram_col(&mut self, j: usize) -> &DVector<f64> {
        let x = self.x;
        self.gram_cols[j].get_or_insert_with(|| x.tr_mul(&x.column(j)))
    }

    fn check_beta(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.p() {
            return Err(Error::parameter(format!("beta has length {}, want {}", beta.len(), self.p())));
        }
        if beta[self.node_k] != 0.0 {
            return Err(Error::parameter(format!("beta[{}] must be zero", self.node_k + 1)));
        }
        Ok(())
    }

    /// Evaluates the surrogate objective; `objective` is `+inf` when the
    /// denominator is below the guard.
    pub fn evaluate(&mut self, beta: &[f64]) -> Result<Evaluation> {
        self.check_beta(beta)?;
        let mut residual = self.x.column(self.node_k).clone_owned();
        let mut correlations = self.xty.clone();
        let mut l1 = 0.0;
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                residual.axpy(-b, &self.x.column(j), 1.0);
                correlations.axpy(-b, self.gram_col(j), 1.0);
                l1 += b.abs();
            }
        }
        let numerator = residual.norm_squared();
        let k = self.node_k;
        let denominator = q_norm(
            correlations.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &v)| v),
            self.q,
        );
        let objective = if denominator >= self.denom_guard {
            numerator / denominator + l1
        } else {
            f64::INFINITY
        };
        Ok(Evaluation {
            objective,
            numerator,
            denominator,
            correlations,
        })
    }

    /// Gradient of the smooth ratio term at the point described by `eval`;
    /// component `k` is zero.
    pub fn smooth_gradient(&mut self, eval: &Evaluation) -> Result<Vec<f64>> {
        let p = self.p();
        let k = self.node_k;
        let d = eval.denominator;
        if !(d >= self.denom_guard) {
            return Err(Error::Solver("gradient requested at an infeasible point".into()));
        }
        // d||u||_q / du_i = (u_i / ||u||_q)^(q-1); chain rule through u = X^T r
        // gives d||u||_q / dbeta_j = -sum_i G_ji w_i.
        let weights: Vec<(usize, f64)> = eval
            .correlations
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != k)
            .map(|(i, &u)| (i, (u / d).powi(self.q as i32 - 1)))
            .collect();
        let w_max = weights.iter().fold(0.0f64, |a, &(_, w)| a.max(w.abs()));
        let mut gw = DVector::<f64>::zeros(p);
        for &(i, w) in &weights {
            if w.abs() > WEIGHT_CUTOFF * w_max {
                gw.axpy(w, self.gram_col(i), 1.0);
            }
        }
        let scale = eval.numerator / (d * d);
        let mut grad: Vec<f64> = (0..p)
            .map(|j| -2.0 * eval.correlations[j] / d + scale * gw[j])
            .collect();
        grad[k] = 0.0;
        Ok(grad)
    }

    /// Objective value at `beta` (`+inf` if infeasible).
    pub fn objective(&mut self, beta: &[f64]) -> Result<f64> {
        Ok(self.evaluate(beta)?.objective)
    }
}

/// Surrogate TREX objective for node `k` at `beta`.
pub fn trex_objective(x_bar: &DataMatrix, node_k: usize, beta: &[f64], q: u32) -> Result<f64> {
    TrexProblem::new(x_bar, node_k, q, TrexConfig::default().denom_guard)?.objective(beta)
}

/// Gradient of the smooth ratio term; the `l1` part is left to the solver.
pub fn trex_subgradient(x_bar: &DataMatrix, node_k: usize, beta: &[f64], q: u32) -> Result<Vec<f64>> {
    let mut problem = TrexProblem::new(x_bar, node_k, q, TrexConfig::default().denom_guard)?;
    let eval = problem.evaluate(beta)?;
    problem.smooth_gradient(&eval)
}

/// Why the solver stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// First-order optimality measure below `opt_tol`.
    Optimal,
    /// Objective or parameter progress below `prog_tol`.
    Progress,
    /// Iteration cap reached.
    MaxIter,
    /// No decrease found along the steepest-descent direction.
    LineSearch,
}

#[derive(Clone, Debug)]
pub struct TrexSolution {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Objective of the starting point and of every accepted iterate.
    pub history: Vec<f64>,
}

impl TrexSolution {
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.beta.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(j, _)| j)
    }
}

/// Minimum-norm element of the subdifferential of `smooth + ||.||_1`.
fn pseudo_gradient(beta: &[f64], grad: &[f64], node_k: usize) -> Vec<f64> {
    beta.iter()
        .zip(grad)
        .enumerate()
        .map(|(j, (&b, &g))| {
            if j == node_k {
                0.0
            } else if b > 0.0 {
                g + 1.0
            } else if b < 0.0 {
                g - 1.0
            } else if g < -1.0 {
                g + 1.0
            } else if g > 1.0 {
                g - 1.0
            } else {
                0.0
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS curvature pairs.
struct Memory {
    cap: usize,
    s: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
}

impl Memory {
    fn new(cap: usize) -> Self {
        Self {
            cap,
            s: Vec::new(),
            y: Vec::new(),
        }
    }

    fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    fn clear(&mut self) {
        self.s.clear();
        self.y.clear();
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        if self.cap == 0 || dot(&s, &y) <= 1e-10 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            return;
        }
        if self.s.len() == self.cap {
            self.s.remove(0);
            self.y.remove(0);
        }
        self.s.push(s);
        self.y.push(y);
    }

    /// Two-loop recursion for `H v`.
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut q = v.to_vec();
        let m = self.s.len();
        let mut alpha = vec![0.0; m];
        for i in (0..m).rev() {
            let rho = 1.0 / dot(&self.y[i], &self.s[i]);
            alpha[i] = rho * dot(&self.s[i], &q);
            for (qj, yj) in q.iter_mut().zip(&self.y[i]) {
                *qj -= alpha[i] * yj;
            }
        }
        if let (Some(s), Some(y)) = (self.s.last(), self.y.last()) {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..m {
            let rho = 1.0 / dot(&self.y[i], &self.s[i]);
            let b = rho * dot(&self.y[i], &q);
            for (qj, sj) in q.iter_mut().zip(&self.s[i]) {
                *qj += (alpha[i] - b) * sj;
            }
        }
        q
    }
}

/// Minimizes the surrogate objective for node `k` starting from `init`
/// (all zeros when `None`).
///
/// The returned point never has a larger objective than the start, and the
/// objective along accepted iterates is non-increasing.
pub fn solve_trex_node(
    x_bar: &DataMatrix,
    node_k: usize,
    cfg: &TrexConfig,
    init: Option<&[f64]>,
) -> Result<TrexSolution> {
    cfg.validate()?;
    let mut problem = TrexProblem::new(x_bar, node_k, cfg.q, cfg.denom_guard)?;
    let p = problem.p();
    let mut beta = init.map_or_else(|| vec![0.0; p], <[f64]>::to_vec);
    problem.check_beta(&beta)?;

    let mut eval = problem.evaluate(&beta)?;
    if !eval.objective.is_finite() {
        return Err(Error::Solver(format!(
            "node {}: starting point has a vanishing correlation norm",
            node_k + 1
        )));
    }
    let initial_objective = eval.objective;
    let mut grad = problem.smooth_gradient(&eval)?;
    let mut history = vec![eval.objective];
    let mut memory = Memory::new(cfg.memory);
    let max_iter = cfg.iteration_cap(p);
    let mut termination = Termination::MaxIter;
    let mut iterations = 0;

    while iterations < max_iter {
        let pg = pseudo_gradient(&beta, &grad, node_k);
        let pg_norm = pg.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if pg_norm < cfg.opt_tol {
            termination = Termination::Optimal;
            break;
        }
        iterations += 1;

        // Orthant of the step: current signs, or the descent sign for zeros.
        let orthant: Vec<f64> = beta
            .iter()
            .zip(&pg)
            .map(|(&b, &g)| {
                if b != 0.0 {
                    b.signum()
                } else if g != 0.0 {
                    -g.signum()
                } else {
                    0.0
                }
            })
            .collect();

        let mut accepted = None;
        for attempt in 0..2 {
            let use_memory = attempt == 0 && !memory.is_empty();
            if attempt == 1 && !memory.is_empty() {
                memory.clear();
            } else if attempt == 1 {
                break;
            }
            let mut dir: Vec<f64> = if use_memory {
                memory.apply(&pg).into_iter().map(|v| -v).collect()
            } else {
                let l1: f64 = pg.iter().map(|v| v.abs()).sum();
                let scale = (1.0 / l1).min(1.0);
                pg.iter().map(|v| -v * scale).collect()
            };
            // Keep only components that agree with the steepest-descent sign.
            for (d, &g) in dir.iter_mut().zip(&pg) {
                if *d * g >= 0.0 {
                    *d = 0.0;
                }
            }
            let slope = dot(&dir, &pg);
            if !(slope < 0.0) {
                continue;
            }
            if let Some(step) = line_search(&mut problem, &beta, &dir, &orthant, &pg, eval.objective)? {
                accepted = Some(step);
                break;
            }
        }
        let Some((new_beta, new_eval)) = accepted else {
            termination = Termination::LineSearch;
            break;
        };

        let new_grad = problem.smooth_gradient(&new_eval)?;
        let s: Vec<f64> = new_beta.iter().zip(&beta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let decrease = eval.objective - new_eval.objective;
        let max_step = s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        memory.push(s, y);

        beta = new_beta;
        grad = new_grad;
        eval = new_eval;
        history.push(eval.objective);

        if decrease < cfg.prog_tol * eval.objective.abs().max(1.0) || max_step < cfg.prog_tol {
            termination = Termination::Progress;
            break;
        }
    }

    Ok(TrexSolution {
        objective: eval.objective,
        beta,
        initial_objective,
        iterations,
        termination,
        history,
    })
}

/// Backtracking along the projected path `P(beta + t dir)`; accepts the first
/// step with sufficient decrease.
fn line_search(
    problem: &mut TrexProblem<'_>,
    beta: &[f64],
    dir: &[f64],
    orthant: &[f64],
    pg: &[f64],
    f0: f64,
) -> Result<Option<(Vec<f64>, Evaluation)>> {
    let mut t = 1.0;
    for _ in 0..MAX_BACKTRACKS {
        let trial: Vec<f64> = beta
            .iter()
            .zip(dir)
            .zip(orthant)
            .map(|((&b, &d), &o)| {
                let v = b + t * d;
                if v * o > 0.0 {
                    v
                } else {
                    0.0
                }
            })
            .collect();
        let eval = problem.evaluate(&trial)?;
        if eval.objective.is_finite() {
            let moved: Vec<f64> = trial.iter().zip(beta).map(|(a, b)| a - b).collect();
            if eval.objective < f0 && eval.objective <= f0 + ARMIJO * dot(pg, &moved) {
                return Ok(Some((trial, eval)));
            }
        }
        t *= 0.5;
    }
    Ok(None)
}
