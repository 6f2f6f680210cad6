//! Nearest-neighbour indexes for the initial graph of the approximate lazy
//! solver.
//!
//! Indexes store database rows `[f; alpha]` and answer inner-product
//! queries with query rows, see [`NodeStore::query_row`].

use std::cell::RefCell;
use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::AlphaSign;
use crate::knn::{Neighbor, TopK};
use crate::solvers::AnnParams;
use crate::store::{dot, NodeStore};

/// Maximum inner-product search over inserted rows.
pub trait AnnIndex: Send + Sync {
    /// True when `query` always returns the exact top-k.
    fn is_exact(&self) -> bool;

    /// Adds a node with its database row.
    fn insert(&mut self, node: usize, row: &[f64]);

    /// Up to `k` inserted nodes with the largest inner product with
    /// `query`, best first.
    fn query(&self, query: &[f64], k: usize) -> Vec<Neighbor>;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Brute-force index; matches `knn::topk_exact` on the inserted nodes.
#[derive(Clone, Debug, Default)]
pub struct ExactIndex {
    dim: usize,
    ids: Vec<usize>,
    rows: Vec<f64>,
}

impl ExactIndex {
    pub fn new(dim: usize) -> Self {
        ExactIndex { dim, ..Self::default() }
    }

    /// Index over every alive node of a store.
    pub fn from_store(store: &NodeStore) -> Self {
        let mut idx = Self::new(store.dim());
        let mut alive = store.alive().to_vec();
        alive.sort_unstable();
        for u in alive {
            idx.insert(u, store.db_row(u));
        }
        idx
    }
}

impl AnnIndex for ExactIndex {
    fn is_exact(&self) -> bool {
        true
    }

    fn insert(&mut self, node: usize, row: &[f64]) {
        assert_eq!(row.len(), self.dim, "row length does not match index dimension");
        self.ids.push(node);
        self.rows.extend_from_slice(row);
    }

    fn query(&self, query: &[f64], k: usize) -> Vec<Neighbor> {
        let mut top = TopK::new(k);
        for (&id, row) in self.ids.iter().zip(self.rows.chunks_exact(self.dim.max(1))) {
            top.push(Neighbor::new(id, dot(query, row)));
        }
        top.into_sorted()
    }

    fn len(&self) -> usize {
        self.ids.len()
    }
}

/// Candidate inside the small-world index: internal slot and a
/// single-precision score. "Greater" means better ranked, ties going to the
/// smaller slot so every heap is deterministic.
#[derive(Clone, Copy, Debug)]
struct Cand {
    sim: f32,
    slot: u32,
}

impl PartialEq for Cand {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Cand {}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sim.total_cmp(&other.sim).then(other.slot.cmp(&self.slot))
    }
}

/// Reusable buffers for one beam search. Visited marks are epoch stamps so
/// nothing is cleared between searches.
#[derive(Default)]
struct Scratch {
    stamp: Vec<u32>,
    epoch: u32,
    frontier: BinaryHeap<Cand>,
    best: BinaryHeap<Reverse<Cand>>,
}

impl Scratch {
    fn reset(&mut self, len: usize) {
        if self.stamp.len() < len {
            self.stamp.resize(len, 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        self.frontier.clear();
        self.best.clear();
    }

    /// Marks `x` visited; false if it already was.
    fn visit(&mut self, x: u32) -> bool {
        let s = &mut self.stamp[x as usize];
        if *s == self.epoch {
            false
        } else {
            *s = self.epoch;
            true
        }
    }
}

thread_local! {
    static QUERY_SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

/// Hierarchical navigable small-world graph under inner-product similarity.
///
/// A new node picks its links with the diversity heuristic: a candidate is
/// kept only if it is more similar to the new node than to every link kept
/// so far, and pruned candidates top up the list afterwards. When a back
/// link overflows a neighbour's list, that list keeps its most similar
/// entries. Rows are held in single precision; callers rescore the returned
/// nodes exactly.
#[derive(Clone, Debug)]
pub struct SmallWorldIndex {
    dim: usize,
    flip_last: bool,
    params: AnnParams,
    level_mult: f64,
    rng: ChaCha8Rng,
    ids: Vec<usize>,
    db: Vec<f32>,
    query: Vec<f32>,
    /// Level-0 links, `stride` slots per node: a count followed by up to
    /// `2 * m_links` ids.
    base: Vec<u32>,
    stride: usize,
    /// Links on levels 1 and up, `upper[x][l - 1]`.
    upper: Vec<Vec<Vec<u32>>>,
    entry: Option<u32>,
    max_level: usize,
}

impl SmallWorldIndex {
    /// Empty index. `sign` tells how query rows derive from database rows.
    pub fn new(dim: usize, sign: AlphaSign, params: AnnParams, seed: u64) -> Self {
        let m = params.m_links.max(2) as f64;
        SmallWorldIndex {
            dim,
            flip_last: sign == AlphaSign::Minus,
            params,
            level_mult: 1.0 / m.ln(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            ids: Vec::new(),
            db: Vec::new(),
            query: Vec::new(),
            base: Vec::new(),
            stride: 2 * params.m_links.max(2) + 1,
            upper: Vec::new(),
            entry: None,
            max_level: 0,
        }
    }

    /// Inserts every alive node of the store in increasing id order.
    pub fn build(store: &NodeStore, params: AnnParams, seed: u64) -> Self {
        let mut idx = Self::new(store.dim(), store.sign(), params, seed);
        let mut alive = store.alive().to_vec();
        alive.sort_unstable();
        let mut scratch = Scratch::default();
        for u in alive {
            idx.insert_with(u, store.db_row(u), &mut scratch);
        }
        idx
    }

    fn db_row(&self, x: u32) -> &[f32] {
        let x = x as usize;
        &self.db[x * self.dim..(x + 1) * self.dim]
    }

    fn query_row(&self, x: u32) -> &[f32] {
        let x = x as usize;
        &self.query[x * self.dim..(x + 1) * self.dim]
    }

    fn score(&self, q: &[f32], x: u32) -> Cand {
        Cand {
            sim: dot32(q, self.db_row(x)),
            slot: x,
        }
    }

    fn max_links(&self, level: usize) -> usize {
        if level == 0 {
            2 * self.params.m_links
        } else {
            self.params.m_links
        }
    }

    fn random_level(&mut self) -> usize {
        let u: f64 = self.rng.random::<f64>();
        let u = u.max(f64::MIN_POSITIVE);
        ((-u.ln()) * self.level_mult).floor() as usize
    }

    fn greedy(&self, q: &[f32], entry: u32, level: usize) -> u32 {
        let mut best = self.score(q, entry);
        loop {
            let mut moved = false;
            for &nb in self.links(best.slot, level) {
                let c = self.score(q, nb);
                if c > best {
                    best = c;
                    moved = true;
                }
            }
            if !moved {
                return best.slot;
            }
        }
    }

    /// Beam search on one layer; returns up to `ef` slots, best first.
    fn search_layer(&self, q: &[f32], entry: u32, ef: usize, level: usize, sc: &mut Scratch) -> Vec<Cand> {
        sc.reset(self.ids.len());
        sc.visit(entry);
        let first = self.score(q, entry);
        sc.frontier.push(first);
        sc.best.push(Reverse(first));
        while let Some(c) = sc.frontier.pop() {
            let worst = sc.best.peek().expect("never empty").0;
            if sc.best.len() >= ef && c < worst {
                break;
            }
            for &nb in self.links(c.slot, level) {
                if !sc.visit(nb) {
                    continue;
                }
                let cand = self.score(q, nb);
                let worst = sc.best.peek().expect("never empty").0;
                if sc.best.len() < ef || cand > worst {
                    sc.frontier.push(cand);
                    sc.best.push(Reverse(cand));
                    if sc.best.len() > ef {
                        sc.best.pop();
                    }
                }
            }
        }
        let mut out: Vec<Cand> = sc.best.drain().map(|r| r.0).collect();
        out.sort_unstable_by(|a, b| b.cmp(a));
        out
    }

    /// Diversity-aware link selection. `cands` must be sorted best first
    /// with respect to the base node.
    fn select(&self, cands: &[Cand], limit: usize) -> Vec<u32> {
        let mut kept: Vec<u32> = Vec::with_capacity(limit);
        let mut pruned: Vec<u32> = Vec::new();
        for c in cands {
            if kept.len() >= limit {
                break;
            }
            let qe = self.query_row(c.slot);
            if kept.iter().all(|&r| c.sim > dot32(qe, self.db_row(r))) {
                kept.push(c.slot);
            } else {
                pruned.push(c.slot);
            }
        }
        for e in pruned {
            if kept.len() >= limit {
                break;
            }
            kept.push(e);
        }
        kept
    }

    fn links(&self, x: u32, level: usize) -> &[u32] {
        let x = x as usize;
        if level == 0 {
            let at = x * self.stride;
            let len = self.base[at] as usize;
            &self.base[at + 1..at + 1 + len]
        } else {
            &self.upper[x][level - 1]
        }
    }

    fn set_links(&mut self, x: u32, level: usize, ids: &[u32]) {
        let x = x as usize;
        if level == 0 {
            let at = x * self.stride;
            self.base[at] = ids.len() as u32;
            self.base[at + 1..at + 1 + ids.len()].copy_from_slice(ids);
        } else {
            self.upper[x][level - 1] = ids.to_vec();
        }
    }

    /// Adds the back link `x -> y`. A full list keeps its most similar
    /// entries: `y` replaces the least similar link if it beats it.
    fn add_link(&mut self, x: u32, level: usize, y: u32) {
        let limit = self.max_links(level);
        let len = self.links(x, level).len();
        if len < limit {
            if level == 0 {
                let at = x as usize * self.stride;
                self.base[at + 1 + len] = y;
                self.base[at] += 1;
            } else {
                self.upper[x as usize][level - 1].push(y);
            }
            return;
        }
        let q = self.query_row(x);
        let new = self.score(q, y);
        let (pos, worst) = self
            .links(x, level)
            .iter()
            .enumerate()
            .map(|(p, &nb)| (p, self.score(q, nb)))
            .min_by(|a, b| a.1.cmp(&b.1))
            .expect("full list is not empty");
        if new > worst {
            if level == 0 {
                self.base[x as usize * self.stride + 1 + pos] = y;
            } else {
                self.upper[x as usize][level - 1][pos] = y;
            }
        }
    }

    fn insert_with(&mut self, node: usize, row: &[f64], sc: &mut Scratch) {
        assert_eq!(row.len(), self.dim, "row length does not match index dimension");
        let x = self.ids.len() as u32;
        let level = self.random_level();
        self.ids.push(node);
        self.db.extend(row.iter().map(|&v| v as f32));
        self.query.extend(row.iter().map(|&v| v as f32));
        if self.flip_last {
            let last = self.query.len() - 1;
            self.query[last] = -self.query[last];
        }
        self.base.resize(self.base.len() + self.stride, 0);
        self.upper.push(vec![Vec::new(); level]);

        let Some(mut cur) = self.entry else {
            self.entry = Some(x);
            self.max_level = level;
            return;
        };
        let q = self.query_row(x).to_vec();
        for l in (level + 1..=self.max_level).rev() {
            cur = self.greedy(&q, cur, l);
        }
        for l in (0..=level.min(self.max_level)).rev() {
            let found = self.search_layer(&q, cur, self.params.ef_construction, l, sc);
            let chosen = self.select(&found, self.params.m_links);
            for &nb in &chosen {
                self.add_link(nb, l, x);
            }
            self.set_links(x, l, &chosen);
            cur = found[0].slot;
        }
        if level > self.max_level {
            self.max_level = level;
            self.entry = Some(x);
        }
    }
}

impl AnnIndex for SmallWorldIndex {
    fn is_exact(&self) -> bool {
        false
    }

    fn insert(&mut self, node: usize, row: &[f64]) {
        self.insert_with(node, row, &mut Scratch::default());
    }

    fn query(&self, query: &[f64], k: usize) -> Vec<Neighbor> {
        let Some(mut cur) = self.entry else {
            return Vec::new();
        };
        let q: Vec<f32> = query.iter().map(|&v| v as f32).collect();
        for l in (1..=self.max_level).rev() {
            cur = self.greedy(&q, cur, l);
        }
        let ef = self.params.ef_search.max(k);
        let found = QUERY_SCRATCH.with(|sc| self.search_layer(&q, cur, ef, 0, &mut sc.borrow_mut()));
        found
            .into_iter()
            .take(k)
            .map(|c| Neighbor::new(self.ids[c.slot as usize], c.sim as f64))
            .collect()
    }

    fn len(&self) -> usize {
        self.ids.len()
    }
}

/// Single-precision dot product over eight lanes. Lane layout and
/// reduction order are fixed, so the AVX2 path returns bit-identical
/// results.
fn dot32_lanes(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        let x: &[f32; 8] = x.try_into().expect("chunk of 8");
        let y: &[f32; 8] = y.try_into().expect("chunk of 8");
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let t = [acc[0] + acc[4], acc[1] + acc[5], acc[2] + acc[6], acc[3] + acc[7]];
    let mut sum = (t[0] + t[2]) + (t[1] + t[3]);
    for (x, y) in ra.iter().zip(rb) {
        sum += x * y;
    }
    sum
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn dot32_avx2(a: &[f32], b: &[f32]) -> f32 {
    use std::arch::x86_64::*;
    let n = a.len().min(b.len());
    let chunks = n / 8;
    let mut acc = _mm256_setzero_ps();
    for c in 0..chunks {
        // SAFETY: 8c + 8 <= n for both slices.
        let x = _mm256_loadu_ps(a.as_ptr().add(8 * c));
        let y = _mm256_loadu_ps(b.as_ptr().add(8 * c));
        acc = _mm256_add_ps(acc, _mm256_mul_ps(x, y));
    }
    let t = _mm_add_ps(_mm256_castps256_ps128(acc), _mm256_extractf128_ps::<1>(acc));
    let u = _mm_add_ps(t, _mm_movehl_ps(t, t));
    let mut sum = _mm_cvtss_f32(_mm_add_ss(u, _mm_shuffle_ps::<1>(u, u)));
    for i in 8 * chunks..n {
        sum += a[i] * b[i];
    }
    sum
}

fn dot32(a: &[f32], b: &[f32]) -> f32 {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked above.
            return unsafe { dot32_avx2(a, b) };
        }
    }
    dot32_lanes(a, b)
}

/// Default approximate index over the alive nodes of a store.
pub fn ann_default_build(store: &NodeStore, params: AnnParams, seed: u64) -> SmallWorldIndex {
    SmallWorldIndex::build(store, params, seed)
}
