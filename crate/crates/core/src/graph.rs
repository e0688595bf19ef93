//! Undirected edge sets and tuning-parameter paths of edge sets.
//!
//! Rust-side indices are 0-based. The text format is 1-based, matching the
//! node labels `1..=p` used in reports.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// An undirected simple graph on `p` nodes.
///
/// Pairs are stored canonically as `(i, j)` with `i < j`; lookups accept
/// either orientation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EdgeSet {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
}

fn canonical(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl EdgeSet {
    pub fn new(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::parameter(format!("edge set needs p >= 2, got {p}")));
        }
        Ok(Self {
            p,
            edges: BTreeSet::new(),
        })
    }

    /// Builds an edge set from 0-based pairs in any orientation.
    pub fn from_pairs<I>(p: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut set = Self::new(p)?;
        for (i, j) in pairs {
            set.insert(i, j)?;
        }
        Ok(set)
    }

    /// Number of nodes.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Largest possible number of edges, `p(p-1)/2`.
    pub fn max_edges(&self) -> usize {
        self.p * (self.p - 1) / 2
    }

    /// Inserts the edge `{i, j}`; returns `false` if it was already present.
    pub fn insert(&mut self, i: usize, j: usize) -> Result<bool> {
        if i == j {
            return Err(Error::parameter(format!("self-loop at node {}", i + 1)));
        }
        if i >= self.p || j >= self.p {
            return Err(Error::parameter(format!(
                "edge ({}, {}) out of range for p = {}",
                i + 1,
                j + 1,
                self.p
            )));
        }
        Ok(self.edges.insert(canonical(i, j)))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i != j && self.edges.contains(&canonical(i, j))
    }

    /// Canonical pairs `(i, j)`, `i < j`, in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Degree of node `i`.
    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == i || b == i).count()
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        self.p == other.p && self.edges.is_subset(&other.edges)
    }

    /// Number of edges present in both sets.
    pub fn intersection_len(&self, other: &EdgeSet) -> usize {
        self.edges.intersection(&other.edges).count()
    }

    /// Number of edges in `self` but not in `other`.
    pub fn difference_len(&self, other: &EdgeSet) -> usize {
        self.edges.difference(&other.edges).count()
    }

    /// Serializes to the text format: a `p <p> k <k>` header followed by one
    /// 1-based `i j` line per edge with `i < j`.
    pub fn to_text(&self) -> String {
        let mut out = format!("p {} k {}\n", self.p, self.edges.len());
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{} {}", i + 1, j + 1);
        }
        out
    }

    /// Parses the text format written by [`EdgeSet::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty edge file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (p, k) = match fields.as_slice() {
            ["p", p, "k", k] => (parse_index(p)?, parse_index(k)?),
            _ => return Err(Error::Parse(format!("bad header line: {header:?}"))),
        };
        let mut set = Self::new(p)?;
        for line in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [a, b] = fields.as_slice() else {
                return Err(Error::Parse(format!("bad edge line: {line:?}")));
            };
            let (i, j) = (parse_index(a)?, parse_index(b)?);
            if i == 0 || j == 0 {
                return Err(Error::Parse(format!("node labels are 1-based: {line:?}")));
            }
            if i >= j {
                return Err(Error::Parse(format!("edge not in canonical i < j form: {line:?}")));
            }
            if !set.insert(i - 1, j - 1)? {
                return Err(Error::Parse(format!("duplicate edge: {line:?}")));
            }
        }
        if set.len() != k {
            return Err(Error::Parse(format!(
                "header announces {k} edges, found {}",
                set.len()
            )));
        }
        Ok(set)
    }
}

fn parse_index(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Parse(format!("expected a non-negative integer, got {s:?}")))
}

/// A family of edge sets indexed by an increasing tuning grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PathResult {
    grid: Vec<f64>,
    edge_sets: Vec<EdgeSet>,
    method_tag: String,
}

impl PathResult {
    pub fn new(grid: Vec<f64>, edge_sets: Vec<EdgeSet>, method_tag: impl Into<String>) -> Result<Self> {
        if grid.len() != edge_sets.len() {
            return Err(Error::parameter(format!(
                "grid has {} values but {} edge sets were given",
                grid.len(),
                edge_sets.len()
            )));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::parameter("path grid must be strictly increasing"));
        }
        Ok(Self {
            grid,
            edge_sets,
            method_tag: method_tag.into(),
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn edge_sets(&self) -> &[EdgeSet] {
        &self.edge_sets
    }

    pub fn method_tag(&self) -> &str {
        &self.method_tag
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &EdgeSet)> {
        self.grid.iter().copied().zip(self.edge_sets.iter())
    }
}
