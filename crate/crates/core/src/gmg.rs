//! Graph model generator: hub, niche, Erdős–Rényi and scale-free topologies,
//! precision matrices with a prescribed condition number, and Gaussian
//! samples drawn from them.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::graph::EdgeSet;
use crate::model::{symmetric_eigenvalues, PrecisionModel};
use crate::rng::{self, StreamRng};

/// Absolute tolerance below which the off-diagonal spectrum counts as a single point.
pub const DEGENERATE_SPECTRUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    SingleHub,
    DoubleHub,
    FourHub,
    FourNiches,
    ErdosRenyi,
    ScaleFree,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 6] = [
        TopologyKind::SingleHub,
        TopologyKind::DoubleHub,
        TopologyKind::FourHub,
        TopologyKind::FourNiches,
        TopologyKind::ErdosRenyi,
        TopologyKind::ScaleFree,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TopologyKind::SingleHub => "single_hub",
            TopologyKind::DoubleHub => "double_hub",
            TopologyKind::FourHub => "four_hub",
            TopologyKind::FourNiches => "four_niches",
            TopologyKind::ErdosRenyi => "erdos_renyi",
            TopologyKind::ScaleFree => "scale_free",
        }
    }

    /// Stable integer tag used for seed derivation.
    pub fn tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TopologyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::parameter(format!("unknown topology {s:?}")))
    }
}

/// What to generate: topology, size, edge budget and seed.
#[derive(Clone, Debug, PartialEq)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub p: usize,
    pub k: usize,
    pub seed: u64,
    /// Number of node blocks seeded with intra-block edges for
    /// [`TopologyKind::FourNiches`]: 4 (default) or 3 for the literal
    /// three-block construction.
    pub niches_blocks: usize,
}

impl TopologySpec {
    pub fn new(kind: TopologyKind, p: usize, k: usize, seed: u64) -> Self {
        Self {
            kind,
            p,
            k,
            seed,
            niches_blocks: 4,
        }
    }

    pub fn with_niches_blocks(mut self, blocks: usize) -> Self {
        self.niches_blocks = blocks;
        self
    }

    /// Edges placed before the uniform fill step.
    pub fn skeleton_size(&self) -> usize {
        let p = self.p;
        match self.kind {
            TopologyKind::SingleHub | TopologyKind::ScaleFree => p - 1,
            TopologyKind::DoubleHub => 2 * (p / 2 - 1),
            TopologyKind::FourHub => 4 * (p / 4 - 1),
            TopologyKind::FourNiches => self.niches_blocks * (p / 4).saturating_sub(1),
            TopologyKind::ErdosRenyi => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p;
        if p < 2 {
            return Err(Error::parameter(format!("need p >= 2, got {p}")));
        }
        match self.kind {
            TopologyKind::DoubleHub if p % 2 != 0 => {
                return Err(Error::parameter(format!("double_hub needs even p, got {p}")));
            }
            TopologyKind::FourHub | TopologyKind::FourNiches if p % 4 != 0 => {
                return Err(Error::parameter(format!(
                    "{} needs p divisible by 4, got {p}",
                    self.kind
                )));
            }
            TopologyKind::FourNiches if !(3..=4).contains(&self.niches_blocks) => {
                return Err(Error::parameter(format!(
                    "niches_blocks must be 3 or 4, got {}",
                    self.niches_blocks
                )));
            }
            _ => {}
        }
        let max = p * (p - 1) / 2;
        if self.k > max {
            return Err(Error::parameter(format!(
                "k = {} exceeds the {max} possible edges for p = {p}",
                self.k
            )));
        }
        let min = self.skeleton_size();
        if self.k < min {
            return Err(Error::parameter(format!(
                "{} with p = {p} needs k >= {min}, got {}",
                self.kind, self.k
            )));
        }
        Ok(())
    }

    /// The fixed part of the hub topologies (empty for the random kinds).
    pub fn deterministic_skeleton(&self) -> Result<EdgeSet> {
        let p = self.p;
        let mut e = EdgeSet::new(p)?;
        let hubs = match self.kind {
            TopologyKind::SingleHub => 1,
            TopologyKind::DoubleHub => 2,
            TopologyKind::FourHub => 4,
            _ => return Ok(e),
        };
        let block = p / hubs;
        for h in 0..hubs {
            let hub = h * block;
            for j in hub + 1..hub + block {
                e.insert(hub, j)?;
            }
        }
        Ok(e)
    }

    /// Generates the edge set with this spec's own seed.
    pub fn generate(&self) -> Result<EdgeSet> {
        generate_topology(self, &mut rng::seeded(self.seed))
    }
}

/// Generates a graph with exactly `spec.k` edges.
///
/// The topology-specific skeleton comes first; remaining edges are drawn
/// uniformly without replacement among the absent pairs.
pub fn generate_topology(spec: &TopologySpec, rng: &mut StreamRng) -> Result<EdgeSet> {
    spec.validate()?;
    let p = spec.p;
    let mut edges = match spec.kind {
        TopologyKind::SingleHub | TopologyKind::DoubleHub | TopologyKind::FourHub => {
            spec.deterministic_skeleton()?
        }
        TopologyKind::FourNiches => niches(p, spec.niches_blocks, rng)?,
        TopologyKind::ErdosRenyi => EdgeSet::new(p)?,
        TopologyKind::ScaleFree => preferential_attachment(p, rng)?,
    };
    fill_uniform(&mut edges, spec.k, rng)?;
    Ok(edges)
}

fn niches(p: usize, blocks: usize, rng: &mut StreamRng) -> Result<EdgeSet> {
    let mut e = EdgeSet::new(p)?;
    let m = p / 4;
    let pairs_in_block = m * m.saturating_sub(1) / 2;
    for b in 0..blocks {
        let offset = b * m;
        let want = m.saturating_sub(1);
        for idx in index::sample(rng, pairs_in_block, want) {
            let (i, j) = unrank_pair(idx, m);
            e.insert(offset + i, offset + j)?;
        }
    }
    Ok(e)
}

/// Grows a tree: node `i >= 3` attaches to an earlier node chosen with
/// probability proportional to its current degree.
fn preferential_attachment(p: usize, rng: &mut StreamRng) -> Result<EdgeSet> {
    let mut e = EdgeSet::new(p)?;
    e.insert(0, 1)?;
    let mut degree = vec![0usize; p];
    degree[0] = 1;
    degree[1] = 1;
    for i in 2..p {
        let total: usize = degree[..i].iter().sum();
        let mut ticket = rng.random_range(0..total);
        let mut target = 0;
        for (j, &d) in degree[..i].iter().enumerate() {
            if ticket < d {
                target = j;
                break;
            }
            ticket -= d;
        }
        e.insert(i, target)?;
        degree[i] += 1;
        degree[target] += 1;
    }
    Ok(e)
}

/// Maps `idx` in `0..m(m-1)/2` to the pair `(i, j)`, `i < j < m`, in
/// lexicographic order.
fn unrank_pair(mut idx: usize, m: usize) -> (usize, usize) {
    for i in 0..m {
        let row = m - 1 - i;
        if idx < row {
            return (i, i + 1 + idx);
        }
        idx -= row;
    }
    unreachable!("pair index out of range")
}

fn fill_uniform(edges: &mut EdgeSet, k: usize, rng: &mut StreamRng) -> Result<()> {
    let p = edges.p();
    let max = edges.max_edges();
    if edges.len() >= k {
        return Ok(());
    }
    let need = k - edges.len();
    if k <= max / 2 {
        // Sparse target: rejection sampling needs O(1) expected draws per edge.
        while edges.len() < k {
            let a = rng.random_range(0..p);
            let mut b = rng.random_range(0..p - 1);
            if b >= a {
                b += 1;
            }
            edges.insert(a, b)?;
        }
    } else {
        let absent: Vec<(usize, usize)> = (0..p)
            .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
            .filter(|&(i, j)| !edges.contains(i, j))
            .collect();
        for idx in index::sample(rng, absent.len(), need) {
            let (i, j) = absent[idx];
            edges.insert(i, j)?;
        }
    }
    Ok(())
}

/// The common diagonal `d` such that `A + d I` has condition number `cond`,
/// given the extreme eigenvalues of the zero-diagonal matrix `A`.
///
/// Returns `(1.0, true)` when the spectrum of `A` is a single point.
pub fn diagonal_for_condition(lambda_min: f64, lambda_max: f64, cond: f64) -> Result<(f64, bool)> {
    if !(cond > 1.0) {
        return Err(Error::parameter(format!("condition number must exceed 1, got {cond}")));
    }
    if (lambda_max - lambda_min).abs() <= DEGENERATE_SPECTRUM_TOL {
        return Ok((1.0, true));
    }
    let d = (lambda_max - cond * lambda_min) / (cond - 1.0);
    if d <= -lambda_min {
        return Err(Error::parameter(format!(
            "diagonal {d} does not make the matrix positive definite"
        )));
    }
    Ok((d, false))
}

/// Draws off-diagonal weights on `edges` uniformly from
/// `[-a_max, -a_min] ∪ [a_min, a_max]` and sets the diagonal so that the
/// condition number equals `cond_target`.
pub fn build_precision(
    edges: &EdgeSet,
    a_min: f64,
    a_max: f64,
    cond_target: f64,
    rng: &mut StreamRng,
) -> Result<PrecisionModel> {
    if !(a_min > 0.0 && a_max > a_min && a_max.is_finite()) {
        return Err(Error::parameter(format!(
            "need a_max > a_min > 0, got a_min = {a_min}, a_max = {a_max}"
        )));
    }
    if !(cond_target > 1.0 && cond_target.is_finite()) {
        return Err(Error::parameter(format!(
            "condition number must exceed 1, got {cond_target}"
        )));
    }
    let p = edges.p();
    let mut theta = DMatrix::<f64>::zeros(p, p);
    for (i, j) in edges.iter() {
        let magnitude = rng.random_range(a_min..=a_max);
        let value = if rng.random_bool(0.5) { magnitude } else { -magnitude };
        theta[(i, j)] = value;
        theta[(j, i)] = value;
    }
    let ev = symmetric_eigenvalues(&theta)?;
    let (d, degenerate) = diagonal_for_condition(ev[0], ev[p - 1], cond_target)?;
    for i in 0..p {
        theta[(i, i)] = d;
    }
    Ok(PrecisionModel {
        theta,
        edge_set: edges.clone(),
        diag_value: d,
        cond_target,
        a_min,
        a_max,
        degenerate,
    })
}

/// `n` i.i.d. rows from `N(0, model.theta^{-1})`.
pub fn sample_gaussian(model: &PrecisionModel, n: usize, rng: &mut StreamRng) -> Result<DataMatrix> {
    sample_gaussian_theta(model.theta(), n, rng)
}

/// As [`sample_gaussian`] for a bare precision matrix. Rows are `z L^T` with
/// `L L^T = theta^{-1}` and `z` standard normal, drawn row by row.
pub fn sample_gaussian_theta(theta: &DMatrix<f64>, n: usize, rng: &mut StreamRng) -> Result<DataMatrix> {
    if n == 0 {
        return Err(Error::parameter("need at least one sample"));
    }
    let p = theta.nrows();
    let sigma = theta
        .clone()
        .cholesky()
        .ok_or_else(|| Error::numeric("precision matrix is not positive definite"))?
        .inverse();
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    let l = sigma
        .cholesky()
        .ok_or_else(|| Error::numeric("covariance matrix is not positive definite"))?
        .unpack();
    let mut z = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            z[(i, j)] = rng.sample(StandardNormal);
        }
    }
    DataMatrix::new(z * l.transpose())
}
