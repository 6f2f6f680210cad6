//! Exhaustive optimum over all set partitions, for tiny instances.

use crate::error::{Error, Result};
use crate::partition::{Instance, Partition};

/// Largest instance the enumerator accepts (Bell(12) = 4 213 597 partitions).
pub const MAX_ENUMERATION_NODES: usize = 12;

/// Minimum-objective partition over every set partition of the nodes.
///
/// Ties are broken towards fewer clusters and then towards the
/// lexicographically smallest canonical labeling. Returns the partition
/// together with the optimal value.
pub fn enumerate_optimal<I: Instance + ?Sized>(instance: &I, max_n: usize) -> Result<(Partition, f64)> {
    let n = instance.node_count();
    let limit = max_n.min(MAX_ENUMERATION_NODES);
    if n > limit {
        return Err(Error::capacity(format!(
            "exhaustive enumeration supports at most {limit} nodes, instance has {n}"
        )));
    }
    if n <= 1 {
        return Ok((Partition::single_cluster(n), 0.0));
    }
    let costs = instance.pair_costs();
    let mut search = Search {
        n,
        costs: &costs,
        labels: vec![0; n],
        best_labels: vec![0; n],
        best_value: f64::INFINITY,
        best_blocks: usize::MAX,
    };
    search.descend(1, 1, 0.0);
    let partition = Partition::new(instance, &search.best_labels)?;
    let value = instance.cut_cost(partition.labels());
    Ok((partition, value))
}

struct Search<'a> {
    n: usize,
    costs: &'a [f64],
    labels: Vec<usize>,
    best_labels: Vec<usize>,
    best_value: f64,
    best_blocks: usize,
}

impl Search<'_> {
    // Restricted growth strings visited in lexicographic order; node 0 is
    // always in block 0.
    fn descend(&mut self, node: usize, blocks: usize, cut: f64) {
        if node == self.n {
            let tol = 1e-12 * self.best_value.abs().max(1.0);
            let better = cut < self.best_value - tol || (cut <= self.best_value + tol && blocks < self.best_blocks);
            if better {
                self.best_value = cut;
                self.best_blocks = blocks;
                self.best_labels.copy_from_slice(&self.labels);
            }
            return;
        }
        let row = &self.costs[node * self.n..node * self.n + node];
        for b in 0..=blocks {
            let added: f64 = row
                .iter()
                .zip(&self.labels[..node])
                .filter(|&(_, &l)| l != b)
                .map(|(&c, _)| c)
                .sum();
            self.labels[node] = b;
            self.descend(node + 1, blocks.max(b + 1), cut + added);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{AlphaSign, FeatureMatrix};
    use crate::graph::SparseWeightedGraph;

    #[test]
    fn single_node() {
        let fm = FeatureMatrix::from_rows(&[vec![1.0]]).unwrap();
        let (p, v) = enumerate_optimal(&fm, 12).unwrap();
        assert_eq!(p.n_clusters(), 1);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn opposite_vector_is_split_off() {
        let fm = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let (p, v) = enumerate_optimal(&fm, 12).unwrap();
        assert_eq!(p.labels(), &[0, 0, 1]);
        assert_eq!(v, -2.0);
    }

    #[test]
    fn alpha_minus_optimum() {
        let fm = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]])
            .unwrap()
            .with_uniform_alpha(0.4, AlphaSign::Minus)
            .unwrap();
        let (p, v) = enumerate_optimal(&fm, 12).unwrap();
        assert_eq!(p.labels(), &[0, 0, 1]);
        assert!((v + 0.32).abs() < 1e-7, "{v}");
    }

    #[test]
    fn zero_cost_ties_prefer_fewer_clusters() {
        let g = SparseWeightedGraph::new(3, [(0, 1, 0.0)]).unwrap();
        let (p, v) = enumerate_optimal(&g, 12).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(p.n_clusters(), 1);
    }

    #[test]
    fn too_large_is_capacity_error() {
        let rows: Vec<Vec<f32>> = (0..13).map(|i| vec![i as f32]).collect();
        let fm = FeatureMatrix::from_rows(&rows).unwrap();
        assert!(matches!(enumerate_optimal(&fm, 12), Err(Error::Capacity(_))));
        assert!(matches!(enumerate_optimal(&fm, 20), Err(Error::Capacity(_))));
    }

    #[test]
    fn matches_brute_force_over_label_vectors() {
        // Independent check: every labeling in 0..n^n, not just canonical ones.
        let g = SparseWeightedGraph::new(
            4,
            [
                (0, 1, 0.7),
                (0, 2, -0.3),
                (1, 2, 0.2),
                (2, 3, 1.1),
                (0, 3, -0.9),
                (1, 3, -0.4),
            ],
        )
        .unwrap();
        let mut best = f64::INFINITY;
        for code in 0..256usize {
            let labels: Vec<usize> = (0..4).map(|t| (code >> (2 * t)) & 3).collect();
            best = best.min(crate::partition::objective(&g, &labels).unwrap());
        }
        let (_, v) = enumerate_optimal(&g, 12).unwrap();
        assert!((v - best).abs() < 1e-12);
    }
}
