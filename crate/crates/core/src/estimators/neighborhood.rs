//! Neighborhood selection: one Lasso per node, combined by a union or an
//! intersection rule.

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::SUPPORT_TOL;
use crate::data::DataMatrix;
use crate::error::Result;
use crate::graph::{EdgeSet, PathResult};
use crate::lasso::{self, check_fractions, Gram};

/// How the two directed selections of a pair are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    /// Edge if either node selects the other: `max(|C_ij|, |C_ji|) > 0`.
    Union,
    /// Edge if both nodes select each other: `min(|C_ij|, |C_ji|) > 0`.
    Intersection,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Union => "union",
            Rule::Intersection => "intersection",
        }
    }

    /// Label used in the published tables, which attach "and" to the
    /// max-formula and "or" to the min-formula.
    pub fn report_label(self) -> &'static str {
        match self {
            Rule::Union => "MB(and)",
            Rule::Intersection => "MB(or)",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct NeighborhoodResult {
    /// Column `k` holds the node-`k` Lasso coefficients.
    pub c: DMatrix<f64>,
    pub edges_union: EdgeSet,
    pub edges_intersection: EdgeSet,
    pub lambda_fraction: f64,
}

impl NeighborhoodResult {
    pub fn edges(&self, rule: Rule) -> &EdgeSet {
        match rule {
            Rule::Union => &self.edges_union,
            Rule::Intersection => &self.edges_intersection,
        }
    }
}

/// Combines a coefficient matrix (column `k` = node `k`) into an edge set.
pub fn edges_from_coefficients(c: &DMatrix<f64>, rule: Rule) -> Result<EdgeSet> {
    let p = c.ncols();
    let mut edges = EdgeSet::new(p)?;
    for i in 0..p {
        for j in i + 1..p {
            let (a, b) = (c[(i, j)].abs() > SUPPORT_TOL, c[(j, i)].abs() > SUPPORT_TOL);
            let keep = match rule {
                Rule::Union => a || b,
                Rule::Intersection => a && b,
            };
            if keep {
                edges.insert(i, j)?;
            }
        }
    }
    Ok(edges)
}

/// Runs the node-wise Lasso at `lambda = lambda_fraction * lambda_max(k)` for
/// every node and combines the supports.
pub fn neighborhood_select(x: &DataMatrix, lambda_fraction: f64) -> Result<NeighborhoodResult> {
    check_fractions(&[lambda_fraction])?;
    let gram = Gram::new(x);
    let p = x.p();
    let columns = (0..p)
        .into_par_iter()
        .map(|k| {
            lasso::lasso_node_gram(&gram, k, lambda_fraction * gram.lambda_max(k), None, lasso::DEFAULT_TOL)
                .map(|s| s.beta)
                .map_err(|e| e.at_node(k))
        })
        .collect::<Result<Vec<_>>>()?;
    let c = DMatrix::from_fn(p, p, |i, k| columns[k][i]);
    Ok(NeighborhoodResult {
        edges_union: edges_from_coefficients(&c, Rule::Union)?,
        edges_intersection: edges_from_coefficients(&c, Rule::Intersection)?,
        c,
        lambda_fraction,
    })
}

/// Union- and intersection-rule paths over the fraction grid, using
/// warm-started per-node Lasso paths.
pub fn neighborhood_path(x: &DataMatrix, fractions: &[f64]) -> Result<(PathResult, PathResult)> {
    check_fractions(fractions)?;
    let gram = Gram::new(x);
    let p = x.p();
    let per_node = (0..p)
        .into_par_iter()
        .map(|k| {
            lasso::lasso_path_node_gram(&gram, k, fractions, lasso::DEFAULT_TOL).map_err(|e| e.at_node(k))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut union = Vec::with_capacity(fractions.len());
    let mut intersection = Vec::with_capacity(fractions.len());
    for g in 0..fractions.len() {
        let c = DMatrix::from_fn(p, p, |i, k| per_node[k][g].beta[i]);
        union.push(edges_from_coefficients(&c, Rule::Union)?);
        intersection.push(edges_from_coefficients(&c, Rule::Intersection)?);
    }
    Ok((
        PathResult::new(fractions.to_vec(), union, "ns_union")?,
        PathResult::new(fractions.to_vec(), intersection, "ns_intersection")?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmg::{build_precision, sample_gaussian, TopologyKind, TopologySpec};
    use crate::lasso::{lasso_node, unit_grid, LassoProblem};
    use crate::{data::Normalization, rng};

    fn hub_data(p: usize, n: usize, seed: u64) -> (EdgeSet, DataMatrix) {
        let truth = TopologySpec::new(TopologyKind::SingleHub, p, p - 1, seed).generate().unwrap();
        let model = build_precision(&truth, 0.2, 1.0, 100.0, &mut rng::substream(seed, &[1])).unwrap();
        let x = sample_gaussian(&model, n, &mut rng::substream(seed, &[2]))
            .unwrap()
            .normalize(Normalization::ColumnsSqrtN)
            .unwrap();
        (truth, x)
    }

    #[test]
    fn rules_on_asymmetric_selection() {
        let mut c = DMatrix::zeros(3, 3);
        c[(0, 1)] = 0.4; // node 2 selects node 1, node 1 does not select node 2
        let u = edges_from_coefficients(&c, Rule::Union).unwrap();
        let i = edges_from_coefficients(&c, Rule::Intersection).unwrap();
        assert!(u.contains(0, 1));
        assert!(!i.contains(0, 1));
        c[(1, 0)] = -1e-11;
        assert!(!edges_from_coefficients(&c, Rule::Intersection).unwrap().contains(0, 1));
    }

    #[test]
    fn full_fraction_gives_empty_graphs() {
        let (_, x) = hub_data(10, 50, 1);
        let r = neighborhood_select(&x, 1.0).unwrap();
        assert!(r.c.iter().all(|&v| v == 0.0));
        assert!(r.edges_union.is_empty() && r.edges_intersection.is_empty());
    }

    #[test]
    fn labels() {
        assert_eq!(Rule::Intersection.report_label(), "MB(or)");
        assert_eq!(Rule::Union.report_label(), "MB(and)");
    }

    #[test]
    fn path_agrees_with_cold_start_selection() {
        let (_, x) = hub_data(8, 40, 2);
        let grid = unit_grid();
        let (u, i) = neighborhood_path(&x, &grid).unwrap();
        assert_eq!(u.len(), 100);
        assert!(u.edge_sets()[99].is_empty());
        for g in (0..100).step_by(7) {
            let cold = neighborhood_select(&x, grid[g]).unwrap();
            assert_eq!(&cold.edges_union, &u.edge_sets()[g]);
            assert_eq!(&cold.edges_intersection, &i.edge_sets()[g]);
            assert!(cold.edges_intersection.is_subset(&cold.edges_union));
        }
    }

    #[test]
    fn brute_force_rule_oracle() {
        // Read supports straight off independent per-node solves.
        for seed in 0..5 {
            let (_, x) = hub_data(5, 30, seed);
            let r = neighborhood_select(&x, 0.3).unwrap();
            let supports: Vec<Vec<bool>> = (0..5)
                .map(|k| {
                    let lambda = 0.3 * lasso::lambda_max_node(&x, k).unwrap();
                    let sol = lasso_node(&LassoProblem { x: &x, node_k: k, lambda }, None, 1e-9).unwrap();
                    sol.beta.iter().map(|b| b.abs() > SUPPORT_TOL).collect()
                })
                .collect();
            for i in 0..5 {
                for j in i + 1..5 {
                    let (a, b) = (supports[j][i], supports[i][j]);
                    assert_eq!(r.edges_union.contains(i, j), a || b);
                    assert_eq!(r.edges_intersection.contains(i, j), a && b);
                }
            }
        }
    }

    #[test]
    fn recovers_small_hub() {
        let mut good = 0;
        for seed in 0..20 {
            let (truth, x) = hub_data(20, 400, 100 + seed);
            let (u, _) = neighborhood_path(&x, &unit_grid()).unwrap();
            let best = u
                .edge_sets()
                .iter()
                .filter(|e| e.difference_len(&truth) == 0)
                .map(|e| e.intersection_len(&truth))
                .max()
                .unwrap_or(0);
            if best as f64 >= 0.8 * truth.len() as f64 {
                good += 1;
            }
        }
        assert!(good >= 15, "only {good}/20 repetitions recovered >= 80% without false positives");
    }
}
