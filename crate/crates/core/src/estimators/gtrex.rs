//! GTREX: TREX neighborhood selection on sequential bootstrap samples,
//! aggregated into selection frequencies and thresholded.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::graph::{EdgeSet, PathResult};
use crate::model::matrix_csv;
use crate::rng::{self, StreamRng};
use crate::trex::{solve_trex_node, TrexConfig};

/// Row `k` counts how often node `k`'s regressions selected each other node,
/// as a fraction of `b` bootstrap draws. Not symmetric in general.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencyMatrix {
    p: usize,
    b: usize,
    /// Row-major selection counts.
    counts: Vec<u32>,
}

impl FrequencyMatrix {
    pub fn new(p: usize, b: usize) -> Result<Self> {
        if b == 0 {
            return Err(Error::parameter("bootstrap count must be at least 1"));
        }
        Ok(Self {
            p,
            b,
            counts: vec![0; p * p],
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn count(&self, i: usize, j: usize) -> u32 {
        self.counts[i * self.p + j]
    }

    /// `F[i][j]`, a multiple of `1/b` in `[0, 1]`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        f64::from(self.count(i, j)) / self.b as f64
    }

    fn record(&mut self, node_k: usize, selected: impl IntoIterator<Item = usize>) {
        for m in selected {
            if m != node_k {
                self.counts[node_k * self.p + m] += 1;
            }
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.p, self.p, |i, j| self.get(i, j))
    }

    /// Dense row-major CSV of the frequencies.
    pub fn to_csv(&self) -> String {
        matrix_csv(&self.to_matrix())
    }
}

/// `{e_ij : max(F_ij, F_ji) > t}`; the comparison is strict.
pub fn threshold_edges(freq: &FrequencyMatrix, t: f64) -> Result<EdgeSet> {
    let p = freq.p();
    let mut edges = EdgeSet::new(p)?;
    for i in 0..p {
        for j in i + 1..p {
            if freq.get(i, j).max(freq.get(j, i)) > t {
                edges.insert(i, j)?;
            }
        }
    }
    Ok(edges)
}

/// Re-thresholds one frequency matrix over an increasing grid of thresholds.
pub fn gtrex_threshold_path(freq: &FrequencyMatrix, thresholds: &[f64]) -> Result<PathResult> {
    let edge_sets = thresholds
        .iter()
        .map(|&t| threshold_edges(freq, t))
        .collect::<Result<Vec<_>>>()?;
    PathResult::new(thresholds.to_vec(), edge_sets, "gtrex")
}

/// Draws `n` rows with replacement and keeps each distinct row once, in order
/// of first appearance.
pub fn sequential_bootstrap(x: &DataMatrix, rng: &mut StreamRng) -> DataMatrix {
    let n = x.n();
    let mut seen = vec![false; n];
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let i = rng.random_range(0..n);
        if !std::mem::replace(&mut seen[i], true) {
            rows.push(i);
        }
    }
    x.select_rows(&rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GtrexParams {
    /// Bootstrap draws per node.
    pub b: usize,
    /// Frequency threshold in `[0, 1]`.
    pub t: f64,
    pub trex: TrexConfig,
}

impl Default for GtrexParams {
    fn default() -> Self {
        Self {
            b: 31,
            t: 0.75,
            trex: TrexConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GtrexResult {
    pub freq: FrequencyMatrix,
    pub edges: EdgeSet,
    pub threshold: f64,
    pub b: usize,
    /// Failed TREX solves per node; those draws contribute no selections.
    pub failures: Vec<usize>,
}

impl GtrexResult {
    /// The same frequencies thresholded at a different `t`.
    pub fn rethreshold(&self, t: f64) -> Result<EdgeSet> {
        threshold_edges(&self.freq, t)
    }
}

/// Runs GTREX. Node `k`'s `l`-th bootstrap draw uses the random substream
/// `(seed, k, l)`, so results do not depend on scheduling.
///
/// A node whose TREX solves fail on more than half of its draws aborts the run.
pub fn gtrex(x: &DataMatrix, params: &GtrexParams, seed: u64) -> Result<GtrexResult> {
    if params.b == 0 {
        return Err(Error::parameter("bootstrap count must be at least 1"));
    }
    if !(0.0..=1.0).contains(&params.t) {
        return Err(Error::parameter(format!("threshold must lie in [0, 1], got {}", params.t)));
    }
    params.trex.validate()?;
    let p = x.p();
    let per_node: Vec<(Vec<Vec<usize>>, usize)> = (0..p)
        .into_par_iter()
        .map(|k| {
            let mut supports = Vec::with_capacity(params.b);
            let mut failures = 0;
            for l in 0..params.b {
                let mut r = rng::substream(seed, &[k as u64, l as u64]);
                let sample = sequential_bootstrap(x, &mut r);
                match solve_trex_node(&sample, k, &params.trex, None) {
                    Ok(sol) => supports.push(sol.support().collect()),
                    Err(_) => failures += 1,
                }
            }
            (supports, failures)
        })
        .collect();

    let mut freq = FrequencyMatrix::new(p, params.b)?;
    let mut failures = Vec::with_capacity(p);
    for (k, (supports, failed)) in per_node.into_iter().enumerate() {
        if 2 * failed > params.b {
            return Err(Error::Solver(format!(
                "{failed} of {} TREX solves failed for this node",
                params.b
            ))
            .at_node(k));
        }
        for support in supports {
            freq.record(k, support);
        }
        failures.push(failed);
    }
    let edges = threshold_edges(&freq, params.t)?;
    Ok(GtrexResult {
        freq,
        edges,
        threshold: params.t,
        b: params.b,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Normalization;
    use crate::gmg::{build_precision, sample_gaussian, TopologyKind, TopologySpec};

    fn freq_from(p: usize, b: usize, entries: &[(usize, usize, u32)]) -> FrequencyMatrix {
        let mut f = FrequencyMatrix::new(p, b).unwrap();
        for &(i, j, c) in entries {
            f.counts[i * p + j] = c;
        }
        f
    }

    #[test]
    fn one_sided_frequency_above_threshold() {
        let f = freq_from(3, 10, &[(0, 1, 8), (1, 0, 2)]);
        assert!(threshold_edges(&f, 0.75).unwrap().contains(0, 1));
    }

    #[test]
    fn threshold_is_strict() {
        let f = freq_from(3, 4, &[(0, 1, 3), (1, 0, 3)]);
        assert_eq!(f.get(0, 1), 0.75);
        assert!(!threshold_edges(&f, 0.75).unwrap().contains(0, 1));
    }

    #[test]
    fn threshold_path_ends() {
        let f = freq_from(4, 4, &[(0, 1, 1), (2, 3, 4), (3, 1, 2)]);
        let path = gtrex_threshold_path(&f, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(path.edge_sets()[0].len(), 3);
        assert_eq!(path.edge_sets()[1].len(), 1);
        assert!(path.edge_sets()[2].is_empty());
    }

    #[test]
    fn bootstrap_single_row() {
        let x = DataMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        for seed in 0..5 {
            assert_eq!(sequential_bootstrap(&x, &mut rng::seeded(seed)), x);
        }
    }

    #[test]
    fn bootstrap_distinct_fraction() {
        let n = 10_000;
        let x = DataMatrix::new(DMatrix::from_fn(n, 1, |i, _| i as f64)).unwrap();
        let mut total = 0.0;
        for seed in 0..100 {
            let s = sequential_bootstrap(&x, &mut rng::seeded(seed));
            let mut vals: Vec<f64> = s.x().iter().copied().collect();
            let len = vals.len();
            vals.dedup();
            assert_eq!(vals.len(), len, "rows must be distinct");
            total += len as f64 / n as f64;
        }
        let mean = total / 100.0;
        let expected = 1.0 - (1.0 - 1.0 / n as f64).powi(n as i32);
        assert!((0.625..=0.640).contains(&mean), "mean {mean}, occupancy {expected}");
    }

    fn hub_data(seed: u64) -> DataMatrix {
        let truth = TopologySpec::new(TopologyKind::SingleHub, 12, 11, seed).generate().unwrap();
        let model = build_precision(&truth, 0.2, 1.0, 100.0, &mut rng::substream(seed, &[1])).unwrap();
        sample_gaussian(&model, 60, &mut rng::substream(seed, &[2]))
            .unwrap()
            .normalize(Normalization::ColumnsSqrtN)
            .unwrap()
    }

    #[test]
    fn frequencies_are_multiples_of_one_over_b() {
        let x = hub_data(3);
        let params = GtrexParams { b: 7, ..GtrexParams::default() };
        let r = gtrex(&x, &params, 11).unwrap();
        for i in 0..12 {
            assert_eq!(r.freq.get(i, i), 0.0);
            for j in 0..12 {
                let f = r.freq.get(i, j);
                assert!((0.0..=1.0).contains(&f));
                assert!(((f * 7.0).round() - f * 7.0).abs() < 1e-12);
            }
        }
        assert_eq!(r.edges, threshold_edges(&r.freq, 0.75).unwrap());
    }

    #[test]
    fn single_bootstrap_is_binary() {
        let x = hub_data(4);
        let params = GtrexParams { b: 1, t: 0.5, ..GtrexParams::default() };
        let r = gtrex(&x, &params, 5).unwrap();
        assert!(r.freq.to_matrix().iter().all(|&f| f == 0.0 || f == 1.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let x = hub_data(5);
        let params = GtrexParams { b: 3, ..GtrexParams::default() };
        let a = gtrex(&x, &params, 1).unwrap();
        let b = gtrex(&x, &params, 1).unwrap();
        assert_eq!(a.freq, b.freq);
    }

    #[test]
    fn parameter_checks() {
        let x = hub_data(6);
        assert!(gtrex(&x, &GtrexParams { b: 0, ..GtrexParams::default() }, 0).is_err());
        assert!(gtrex(&x, &GtrexParams { t: 1.5, ..GtrexParams::default() }, 0).is_err());
    }
}
