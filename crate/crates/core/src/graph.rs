//! Explicit weighted graphs for the classical contraction baseline.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Undirected graph with real edge costs, stored as an edge list with
/// `u < v` for every edge.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseWeightedGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl SparseWeightedGraph {
    /// Validates and normalizes the edge list. Endpoints are reordered so
    /// that `u < v`; self-loops, out-of-range endpoints and duplicate pairs
    /// are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::argument("graph needs at least one node"));
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (a, b, cost) in edges {
            if a == b {
                return Err(Error::argument(format!("self-loop on node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::argument(format!("edge ({a}, {b}) out of range for {n} nodes")));
            }
            if !cost.is_finite() {
                return Err(Error::data(format!("non-finite cost on edge ({a}, {b})")));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((u, v)) {
                return Err(Error::argument(format!("duplicate edge ({u}, {v})")));
            }
            out.push((u, v, cost));
        }
        Ok(SparseWeightedGraph { n, edges: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

/// Expands the implicit complete graph into an explicit edge list with
/// `cost(u, v) = similarity(u, v)`.
///
/// `max_edges` caps the number of materialized edges.
pub fn materialize_cost_matrix(fm: &FeatureMatrix, max_edges: usize) -> Result<SparseWeightedGraph> {
    let n = fm.n();
    let m = n * (n - 1) / 2;
    if m > max_edges {
        return Err(Error::capacity(format!(
            "complete graph on {n} nodes has {m} edges, cap is {max_edges}"
        )));
    }
    let mut edges = Vec::with_capacity(m);
    for u in 0..n {
        for v in u + 1..n {
            edges.push((u, v, fm.similarity_unchecked(u, v)));
        }
    }
    Ok(SparseWeightedGraph { n, edges })
}
