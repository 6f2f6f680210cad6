//! Agreement between two clusterings: normalized and adjusted mutual
//! information. Natural logarithms, double precision.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Co-occurrence counts of two labelings of the same items.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    total: u64,
}

fn dense_ids(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let ids = labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (ids, map.len())
}

/// Contingency table with the two labelings in a canonical order, so that
/// every floating-point sum runs in the same order for `(a, b)` and `(b, a)`
/// and under any renaming of cluster ids.
fn oriented_table(a: &[usize], b: &[usize]) -> Result<ContingencyTable> {
    if a.is_empty() {
        return Err(Error::argument("labelings must not be empty"));
    }
    let t = ContingencyTable::new(a, b)?;
    if t.cols < t.rows || (t.rows == t.cols && dense_ids(b).0 < dense_ids(a).0) {
        ContingencyTable::new(b, a)
    } else {
        Ok(t)
    }
}

impl ContingencyTable {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::argument(format!(
                "labelings have lengths {} and {}",
                a.len(),
                b.len()
            )));
        }
        let (ra, rows) = dense_ids(a);
        let (cb, cols) = dense_ids(b);
        let mut counts = vec![0u64; rows * cols];
        let mut row_sums = vec![0u64; rows];
        let mut col_sums = vec![0u64; cols];
        for (&r, &c) in ra.iter().zip(&cb) {
            counts[r * cols + c] += 1;
            row_sums[r] += 1;
            col_sums[c] += 1;
        }
        Ok(ContingencyTable {
            rows,
            cols,
            counts,
            row_sums,
            col_sums,
            total: a.len() as u64,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, r: usize, c: usize) -> u64 {
        self.counts[r * self.cols + c]
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn mutual_information(&self) -> f64 {
        let n = self.total as f64;
        let mut mi = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let nij = self.count(r, c);
                if nij == 0 {
                    continue;
                }
                let nij = nij as f64;
                let ai = self.row_sums[r] as f64;
                let bj = self.col_sums[c] as f64;
                mi += nij / n * (n * nij / (ai * bj)).ln();
            }
        }
        mi.max(0.0)
    }

    /// Expected mutual information of two random labelings with the same
    /// marginals (hypergeometric model).
    pub fn expected_mutual_information(&self) -> f64 {
        let n = self.total as usize;
        let nf = n as f64;
        let lf = log_factorials(n);
        let mut emi = 0.0;
        for &a in &self.row_sums {
            for &b in &self.col_sums {
                let (a, b) = (a as usize, b as usize);
                let lo = (a + b).saturating_sub(n).max(1);
                let hi = a.min(b);
                // log of the part of the hypergeometric pmf that does not
                // depend on nij
                let fixed = lf[a] + lf[b] + lf[n - a] + lf[n - b] - lf[n];
                for nij in lo..=hi {
                    let log_p = fixed - lf[nij] - lf[a - nij] - lf[b - nij] - lf[n + nij - a - b];
                    let x = nij as f64;
                    emi += x / nf * (nf * x / (a as f64 * b as f64)).ln() * log_p.exp();
                }
            }
        }
        emi
    }
}

fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for i in 1..=n {
        out[i] = out[i - 1] + (i as f64).ln();
    }
    out
}

/// Shannon entropy of a labeling.
pub fn entropy(labels: &[usize]) -> f64 {
    let (ids, k) = dense_ids(labels);
    let mut counts = vec![0u64; k];
    for id in ids {
        counts[id] += 1;
    }
    entropy_of_counts(&counts)
}

fn entropy_of_counts(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Mutual information normalized by the arithmetic mean of the two
/// entropies. Two constant labelings score 1, exactly one constant
/// labeling scores 0.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = oriented_table(a, b)?;
    if t.rows == 1 && t.cols == 1 {
        return Ok(1.0);
    }
    if t.rows == 1 || t.cols == 1 {
        return Ok(0.0);
    }
    let ha = entropy_of_counts(&t.row_sums);
    let hb = entropy_of_counts(&t.col_sums);
    let mean = 0.5 * (ha + hb);
    Ok((t.mutual_information() / mean).clamp(0.0, 1.0))
}

/// Mutual information adjusted for chance, with arithmetic-mean
/// normalization: `(MI - E[MI]) / (mean(H(a), H(b)) - E[MI])`.
pub fn ami(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = oriented_table(a, b)?;
    if t.rows == 1 && t.cols == 1 {
        return Ok(1.0);
    }
    if t.rows == 1 || t.cols == 1 {
        return Ok(0.0);
    }
    // Identical partitions up to relabeling.
    if t.rows == t.cols && t.counts.iter().filter(|&&c| c > 0).count() == t.rows {
        return Ok(1.0);
    }
    let mi = t.mutual_information();
    let emi = t.expected_mutual_information();
    let ha = entropy_of_counts(&t.row_sums);
    let hb = entropy_of_counts(&t.col_sums);
    let denom = 0.5 * (ha + hb) - emi;
    let denom = if denom.abs() < f64::EPSILON {
        f64::EPSILON.copysign(denom)
    } else {
        denom
    };
    Ok(((mi - emi) / denom).min(1.0))
}

/// Number of distinct labels.
pub fn cluster_count(labels: &[usize]) -> usize {
    dense_ids(labels).1
}
