//! Working feature store of a contraction run.
//!
//! Holds double-precision feature rows for original and merged nodes,
//! extended by the alpha coordinate when the sign is not `Off`. Database
//! rows are `[f; alpha]`; for `Minus` a second set of query rows
//! `[f; -alpha]` turns the extended cost into a single inner product.

use crate::error::{Error, Result};
use crate::features::{AlphaSign, FeatureMatrix};
use crate::forest::ContractionForest;

const DEAD: usize = usize::MAX;

#[derive(Clone, Debug)]
pub struct NodeStore {
    d: usize,
    dim: usize,
    sign: AlphaSign,
    db: Vec<f64>,
    query: Option<Vec<f64>>,
    forest: ContractionForest,
    alive: Vec<usize>,
    pos: Vec<usize>,
}

impl NodeStore {
    pub fn new(fm: &FeatureMatrix) -> Self {
        let n = fm.n();
        let d = fm.d();
        let sign = fm.sign();
        let dim = if sign == AlphaSign::Off { d } else { d + 1 };
        let forest = ContractionForest::new(n);
        let cap = forest.capacity();
        let mut db = vec![0.0; cap * dim];
        for i in 0..n {
            let row = &mut db[i * dim..(i + 1) * dim];
            for (dst, &src) in row.iter_mut().zip(fm.row(i)) {
                *dst = f64::from(src);
            }
            if dim > d {
                row[d] = fm.alpha(i);
            }
        }
        let query = (sign == AlphaSign::Minus).then(|| {
            let mut q = db.clone();
            for i in 0..n {
                q[i * dim + d] = -q[i * dim + d];
            }
            q
        });
        let mut pos = vec![DEAD; cap];
        for (i, p) in pos.iter_mut().enumerate().take(n) {
            *p = i;
        }
        NodeStore {
            d,
            dim,
            sign,
            db,
            query,
            forest,
            alive: (0..n).collect(),
            pos,
        }
    }

    pub fn n(&self) -> usize {
        self.forest.n()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Length of each stored row (`d`, or `d + 1` with alpha).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sign(&self) -> AlphaSign {
        self.sign
    }

    pub fn forest(&self) -> &ContractionForest {
        &self.forest
    }

    /// Alive ids in no particular order.
    pub fn alive(&self) -> &[usize] {
        &self.alive
    }

    pub fn is_alive(&self, id: usize) -> bool {
        self.forest.is_alive(id)
    }

    /// Row a node is compared against when it is a search result.
    pub fn db_row(&self, id: usize) -> &[f64] {
        &self.db[id * self.dim..(id + 1) * self.dim]
    }

    /// Row a node uses when it issues a search.
    pub fn query_row(&self, id: usize) -> &[f64] {
        match &self.query {
            Some(q) => &q[id * self.dim..(id + 1) * self.dim],
            None => self.db_row(id),
        }
    }

    /// Feature part of a row, without the alpha coordinate.
    pub fn features(&self, id: usize) -> &[f64] {
        &self.db_row(id)[..self.d]
    }

    pub fn alpha(&self, id: usize) -> f64 {
        if self.dim > self.d {
            self.db_row(id)[self.d]
        } else {
            0.0
        }
    }

    /// Extended cost between two ids, with no liveness check. Symmetric
    /// bit for bit.
    #[inline]
    pub fn sim(&self, u: usize, v: usize) -> f64 {
        dot(self.query_row(u), self.db_row(v))
    }

    /// Extended cost between two alive nodes.
    pub fn similarity(&self, u: usize, v: usize) -> Result<f64> {
        self.check_alive(u)?;
        self.check_alive(v)?;
        if u == v {
            return Err(Error::argument(format!("similarity of node {u} with itself")));
        }
        Ok(self.sim(u, v))
    }

    pub fn check_alive(&self, id: usize) -> Result<()> {
        if self.is_alive(id) {
            Ok(())
        } else {
            Err(Error::state(format!("node {id} is not alive")))
        }
    }

    /// Feature row and alpha of the node that contracting `i` and `j` would
    /// produce: `f_i + f_j` and `alpha_i + alpha_j`.
    pub fn aggregate(&self, i: usize, j: usize) -> Result<(Vec<f64>, f64)> {
        self.check_alive(i)?;
        self.check_alive(j)?;
        if i == j {
            return Err(Error::argument(format!("cannot aggregate node {i} with itself")));
        }
        let f = self
            .features(i)
            .iter()
            .zip(self.features(j))
            .map(|(a, b)| a + b)
            .collect();
        Ok((f, self.alpha(i) + self.alpha(j)))
    }

    /// Contracts two alive nodes, registers the merged node in the forest
    /// and stores its aggregated rows. Returns the merged id.
    pub fn contract(&mut self, i: usize, j: usize) -> Result<usize> {
        let m = self.forest.merge(i, j)?;
        let dim = self.dim;
        for rows in std::iter::once(&mut self.db).chain(self.query.as_mut()) {
            for t in 0..dim {
                rows[m * dim + t] = rows[i * dim + t] + rows[j * dim + t];
            }
        }
        for x in [i, j] {
            let p = self.pos[x];
            self.alive.swap_remove(p);
            if let Some(&moved) = self.alive.get(p) {
                self.pos[moved] = p;
            }
            self.pos[x] = DEAD;
        }
        self.pos[m] = self.alive.len();
        self.alive.push(m);
        Ok(m)
    }

    /// Cluster labels of the original nodes.
    pub fn labels(&self) -> Vec<usize> {
        self.forest.labels()
    }
}

/// Inner product with double-precision accumulation.
///
/// Four running sums over interleaved lanes, reduced as
/// `(s0 + s2) + (s1 + s3)`, then the tail in order. The AVX2 path performs
/// the same operations in the same order, so results are bit-identical on
/// every machine.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked above.
            return unsafe { dot_avx2(a, b) };
        }
    }
    dot_lanes(a, b)
}

fn dot_lanes(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    let mut acc = [0.0f64; 4];
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[2]) + (acc[1] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn dot_avx2(a: &[f64], b: &[f64]) -> f64 {
    use std::arch::x86_64::*;
    let n = a.len().min(b.len());
    let chunks = n / 4;
    let mut acc = _mm256_setzero_pd();
    for c in 0..chunks {
        // SAFETY: 4c + 4 <= n for both slices.
        let x = _mm256_loadu_pd(a.as_ptr().add(4 * c));
        let y = _mm256_loadu_pd(b.as_ptr().add(4 * c));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(x, y));
    }
    let t = _mm_add_pd(_mm256_castpd256_pd128(acc), _mm256_extractf128_pd::<1>(acc));
    let mut s = _mm_cvtsd_f64(_mm_add_sd(t, _mm_unpackhi_pd(t, t)));
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}
