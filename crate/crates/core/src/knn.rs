//! Exact maximum-inner-product search and the directed nearest-neighbour
//! graph that holds the contraction candidates.
//!
//! Every out-list is kept sorted by descending similarity with ties broken
//! towards the smaller node id, so the last entry is the list minimum.
//!
//! Each node also carries a certification epoch `e`: its list satisfies
//! "every alive node with an id below `n + e` that is missing from the list
//! is no more similar than the list minimum". Exhaustive searches set `e` to
//! the current merge count, and every update below preserves the property.
//! The contraction bound is only sound for nodes created before the smaller
//! epoch of the two contracting nodes, so newer alive nodes are scored
//! directly when exactness is required.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::par;
use crate::store::{dot, NodeStore};

/// A directed arc target with its cached similarity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub node: usize,
    pub sim: f64,
}

impl Neighbor {
    pub fn new(node: usize, sim: f64) -> Self {
        Neighbor { node, sim }
    }
}

/// Ranking order: larger similarity first, then smaller id.
pub fn rank_cmp(a: &Neighbor, b: &Neighbor) -> Ordering {
    b.sim.total_cmp(&a.sim).then(a.node.cmp(&b.node))
}

/// Bounded buffer keeping the `k` best neighbours seen so far.
#[derive(Clone, Debug)]
pub struct TopK {
    k: usize,
    items: Vec<Neighbor>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        TopK {
            k,
            items: Vec::with_capacity(k.min(64) + 1),
        }
    }

    #[inline]
    pub fn push(&mut self, cand: Neighbor) {
        if self.items.len() == self.k {
            match self.items.last() {
                Some(last) if rank_cmp(&cand, last) == Ordering::Less => {
                    self.items.pop();
                }
                _ => return,
            }
        }
        let at = self.items.partition_point(|x| rank_cmp(x, &cand) == Ordering::Less);
        self.items.insert(at, cand);
    }

    pub fn merge(mut self, other: TopK) -> TopK {
        for c in other.items {
            self.push(c);
        }
        self
    }

    pub fn into_sorted(self) -> Vec<Neighbor> {
        self.items
    }
}

const SEARCH_CHUNK: usize = 4096;

fn scan(store: &NodeStore, query: usize, k: usize, exclude: &[usize], ids: &[usize]) -> TopK {
    let q = store.query_row(query);
    let mut top = TopK::new(k);
    for &v in ids {
        if v == query || exclude.contains(&v) {
            continue;
        }
        top.push(Neighbor::new(v, dot(q, store.db_row(v))));
    }
    top
}

fn search_unchecked(store: &NodeStore, query: usize, k: usize, exclude: &[usize]) -> Vec<Neighbor> {
    let alive = store.alive();
    if alive.len() <= SEARCH_CHUNK || par::current_threads() == 1 {
        return scan(store, query, k, exclude, alive).into_sorted();
    }
    let chunks: Vec<&[usize]> = alive.chunks(SEARCH_CHUNK).collect();
    par::map_slice(&chunks, |ids| scan(store, query, k, exclude, ids))
        .into_iter()
        .fold(TopK::new(k), TopK::merge)
        .into_sorted()
}

/// The `k` alive nodes most similar to `query`, best first.
///
/// The query itself and every id in `exclude` are skipped. Fewer than `k`
/// entries are returned when fewer candidates exist. With `Minus` alpha the
/// query row `[f_q; -alpha_q]` is matched against database rows
/// `[f_v; alpha_v]`.
pub fn topk_exact(store: &NodeStore, query: usize, k: usize, exclude: &[usize]) -> Result<Vec<Neighbor>> {
    if k == 0 {
        return Err(Error::argument("k must be at least 1"));
    }
    store.check_alive(query)?;
    Ok(search_unchecked(store, query, k, exclude))
}

/// [`topk_exact`] on an uncontracted feature matrix.
pub fn topk_exact_features(fm: &FeatureMatrix, query: usize, k: usize, exclude: &[usize]) -> Result<Vec<Neighbor>> {
    fm.check_node(query)?;
    topk_exact(&NodeStore::new(fm), query, k, exclude)
}

/// How the graph is repaired after a contraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateMode {
    /// Exhaustive search for the merged node and every node that pointed to
    /// a contracted node.
    Exhaustive,
    /// Reuse lists via the contraction bound, searching exhaustively only
    /// when a list would otherwise end up empty.
    Incremental,
    /// Like `Incremental` but never searches; nodes may be left without arcs.
    Lazy,
}

/// Search counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NnStats {
    /// Exhaustive searches issued while building or rebuilding the graph.
    pub build_searches: u64,
    /// Exhaustive searches issued while repairing the graph after merges.
    pub update_searches: u64,
    /// Similarities evaluated for bound candidates and reverse checks.
    pub candidate_evals: u64,
}

impl NnStats {
    pub fn exhaustive_searches(&self) -> u64 {
        self.build_searches + self.update_searches
    }
}

/// Directed k-nearest-neighbour graph over the alive nodes of a store.
#[derive(Clone, Debug)]
pub struct NnGraph {
    k: usize,
    n: usize,
    out: Vec<Vec<Neighbor>>,
    inc: Vec<Vec<usize>>,
    epoch: Vec<usize>,
    merged_alive: BTreeSet<usize>,
    pub stats: NnStats,
}

impl NnGraph {
    fn empty(store: &NodeStore, k: usize) -> Self {
        let cap = store.forest().capacity();
        NnGraph {
            k,
            n: store.n(),
            out: vec![Vec::new(); cap],
            inc: vec![Vec::new(); cap],
            epoch: vec![0; cap],
            merged_alive: store.alive().iter().copied().filter(|&x| x >= store.n()).collect(),
            stats: NnStats::default(),
        }
    }

    /// Exhaustive k-NN lists for every alive node.
    pub fn build(store: &NodeStore, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::argument("k must be at least 1"));
        }
        let mut g = Self::empty(store, k);
        g.rebuild(store);
        Ok(g)
    }

    /// Graph from externally computed lists (for example an approximate
    /// index). Unknown or dead targets and self-arcs are dropped.
    pub fn from_lists(store: &NodeStore, k: usize, lists: Vec<(usize, Vec<Neighbor>)>) -> Result<Self> {
        if k == 0 {
            return Err(Error::argument("k must be at least 1"));
        }
        let mut g = Self::empty(store, k);
        for (u, mut list) in lists {
            store.check_alive(u)?;
            list.retain(|a| a.node != u && store.is_alive(a.node));
            list.sort_by(rank_cmp);
            list.dedup_by_key(|a| a.node);
            list.truncate(k);
            g.set_out(u, list);
        }
        Ok(g)
    }

    /// Replaces every alive node's list by an exhaustive search.
    pub fn rebuild(&mut self, store: &NodeStore) {
        let alive = store.alive();
        let lists = par::map_slice(alive, |&u| search_unchecked(store, u, self.k, &[]));
        self.stats.build_searches += alive.len() as u64;
        let now = store.forest().merges();
        for (&u, list) in alive.iter().zip(lists) {
            self.set_out(u, list);
            self.epoch[u] = now;
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Out-neighbours of `u`, best first.
    pub fn out_arcs(&self, u: usize) -> &[Neighbor] {
        &self.out[u]
    }

    /// Nodes that list `u` as an out-neighbour, in no particular order.
    pub fn in_arcs(&self, u: usize) -> &[usize] {
        &self.inc[u]
    }

    pub fn has_arc(&self, u: usize, v: usize) -> bool {
        self.out[u].iter().any(|a| a.node == v)
    }

    pub fn epoch(&self, u: usize) -> usize {
        self.epoch[u]
    }

    /// Iterator over all arcs `(u, v, sim)`.
    pub fn arcs<'a>(&'a self, store: &'a NodeStore) -> impl Iterator<Item = (usize, usize, f64)> + 'a {
        store
            .alive()
            .iter()
            .flat_map(move |&u| self.out[u].iter().map(move |a| (u, a.node, a.sim)))
    }

    /// Upper bound on the similarity between the node merged from `i` and
    /// `j` and any node outside both out-lists: the sum of the two list
    /// minima, `+inf` if either list is empty.
    pub fn contraction_bound(&self, i: usize, j: usize) -> f64 {
        bound_of(&self.out[i], &self.out[j])
    }

    fn set_out(&mut self, u: usize, list: Vec<Neighbor>) {
        let old = std::mem::replace(&mut self.out[u], list);
        for a in &old {
            if !self.out[u].iter().any(|b| b.node == a.node) {
                remove_item(&mut self.inc[a.node], u);
            }
        }
        for idx in 0..self.out[u].len() {
            let t = self.out[u][idx].node;
            if !old.iter().any(|b| b.node == t) {
                self.inc[t].push(u);
            }
        }
    }

    /// Repairs the graph after `store.contract(i, j)` produced `m`.
    ///
    /// Returns the arcs that were added, to be offered to the candidate
    /// queue. All arcs incident to `i` and `j` are gone afterwards.
    pub fn incremental_update(
        &mut self,
        store: &NodeStore,
        i: usize,
        j: usize,
        m: usize,
        mode: UpdateMode,
    ) -> Result<Vec<(usize, usize, f64)>> {
        let forest = store.forest();
        if !forest.is_alive(m) || forest.parent(i) != Some(m) || forest.parent(j) != Some(m) {
            return Err(Error::state(format!(
                "node {m} is not the registered merge of {i} and {j}"
            )));
        }
        let now = forest.merges();
        let k = self.k;

        let out_i = std::mem::take(&mut self.out[i]);
        let out_j = std::mem::take(&mut self.out[j]);
        for (src, list) in [(i, &out_i), (j, &out_j)] {
            for a in list {
                remove_item(&mut self.inc[a.node], src);
            }
        }
        let mut in_q = std::mem::take(&mut self.inc[i]);
        in_q.append(&mut std::mem::take(&mut self.inc[j]));
        in_q.retain(|&q| q != i && q != j);
        in_q.sort_unstable();
        in_q.dedup();

        self.merged_alive.remove(&i);
        self.merged_alive.remove(&j);
        self.merged_alive.insert(m);

        let mut searches: Vec<usize> = Vec::new();
        let mut new_lists: Vec<(usize, Vec<Neighbor>)> = Vec::new();

        // Merged node.
        if mode == UpdateMode::Exhaustive {
            searches.push(m);
        } else {
            let bound = bound_of(&out_i, &out_j);
            let mut cands: Vec<usize> = out_i
                .iter()
                .chain(&out_j)
                .map(|a| a.node)
                .filter(|&v| v != i && v != j)
                .collect();
            let exact = mode == UpdateMode::Incremental;
            if exact {
                let since = self.epoch[i].min(self.epoch[j]);
                cands.extend(self.merged_alive.range(self.n + since..).copied().filter(|&v| v != m));
            }
            cands.sort_unstable();
            cands.dedup();
            self.stats.candidate_evals += cands.len() as u64;
            let mut top = TopK::new(k);
            for v in cands {
                let s = store.sim(m, v);
                if s >= bound {
                    top.push(Neighbor::new(v, s));
                }
            }
            let list = top.into_sorted();
            if list.is_empty() && exact {
                searches.push(m);
            } else {
                self.epoch[m] = if exact { now } else { self.epoch[i].min(self.epoch[j]) };
                new_lists.push((m, list));
            }
        }

        // Nodes that pointed to a contracted node.
        for &q in &in_q {
            if mode == UpdateMode::Exhaustive {
                searches.push(q);
                continue;
            }
            let old = &self.out[q];
            let old_min = old.last().map_or(f64::INFINITY, |a| a.sim);
            let mut survivors: Vec<Neighbor> = old.iter().copied().filter(|a| a.node != i && a.node != j).collect();
            let s = store.sim(q, m);
            self.stats.candidate_evals += 1;
            if s >= old_min {
                survivors.push(Neighbor::new(m, s));
                survivors.sort_by(rank_cmp);
                survivors.truncate(k);
                new_lists.push((q, survivors));
            } else if !survivors.is_empty() || mode == UpdateMode::Lazy {
                new_lists.push((q, survivors));
            } else {
                searches.push(q);
            }
        }

        if !searches.is_empty() {
            let found = par::map_slice(&searches, |&u| search_unchecked(store, u, k, &[]));
            self.stats.update_searches += searches.len() as u64;
            for (u, list) in searches.into_iter().zip(found) {
                self.epoch[u] = now;
                new_lists.push((u, list));
            }
        }

        let mut added = Vec::new();
        for (u, list) in new_lists {
            for a in &list {
                if !self.out[u].iter().any(|b| b.node == a.node) {
                    added.push((u, a.node, a.sim));
                }
            }
            self.set_out(u, list);
        }
        Ok(added)
    }

    /// Checks the structural invariants: alive endpoints, no self-arcs,
    /// sorted lists of at most `k` entries, an exact reverse index and
    /// cached similarities matching recomputation within `tol`.
    pub fn validate(&self, store: &NodeStore, tol: f64) -> Result<()> {
        let mut arcs = 0usize;
        for u in 0..self.out.len() {
            let list = &self.out[u];
            if !store.is_alive(u) {
                if !list.is_empty() || !self.inc[u].is_empty() {
                    return Err(Error::state(format!("dead node {u} still has arcs")));
                }
                continue;
            }
            if list.len() > self.k {
                return Err(Error::state(format!("node {u} has {} > k arcs", list.len())));
            }
            if list.windows(2).any(|w| rank_cmp(&w[0], &w[1]) != Ordering::Less) {
                return Err(Error::state(format!("out-list of {u} is not sorted")));
            }
            for a in list {
                if a.node == u || !store.is_alive(a.node) {
                    return Err(Error::state(format!("bad arc {u} -> {}", a.node)));
                }
                let s = store.sim(u, a.node);
                if (s - a.sim).abs() > tol * s.abs().max(1.0) {
                    return Err(Error::state(format!(
                        "cached similarity of {u} -> {} is {}, recomputed {s}",
                        a.node, a.sim
                    )));
                }
                if !self.inc[a.node].contains(&u) {
                    return Err(Error::state(format!("reverse index misses {u} -> {}", a.node)));
                }
                arcs += 1;
            }
        }
        let reverse: usize = self.inc.iter().map(Vec::len).sum();
        if reverse != arcs {
            return Err(Error::state(format!(
                "reverse index holds {reverse} entries for {arcs} arcs"
            )));
        }
        Ok(())
    }
}

fn bound_of(a: &[Neighbor], b: &[Neighbor]) -> f64 {
    match (a.last(), b.last()) {
        (Some(x), Some(y)) => x.sim + y.sim,
        _ => f64::INFINITY,
    }
}

fn remove_item(v: &mut Vec<usize>, x: usize) {
    if let Some(p) = v.iter().position(|&y| y == x) {
        v.swap_remove(p);
    }
}

/// Builds the exhaustive k-NN graph of an uncontracted store.
pub fn build_nn_graph(store: &NodeStore, k: usize) -> Result<NnGraph> {
    NnGraph::build(store, k)
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    sim: f64,
    lo: usize,
    hi: usize,
    src: usize,
    dst: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Max-heap order: larger similarity, then the lexicographically
    // smaller (min id, max id) pair.
    fn cmp(&self, other: &Self) -> Ordering {
        self.sim
            .total_cmp(&other.sim)
            .then_with(|| (other.lo, other.hi, other.src).cmp(&(self.lo, self.hi, self.src)))
    }
}

/// Max-priority queue over arcs with lazy deletion: entries whose endpoint
/// died or whose arc left the graph are discarded when they reach the top.
#[derive(Clone, Debug, Default)]
pub struct CandidateQueue {
    heap: BinaryHeap<Entry>,
}

impl CandidateQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Queue holding every arc of `graph`.
    pub fn from_graph(graph: &NnGraph, store: &NodeStore) -> Self {
        let mut q = Self::new();
        q.refill(graph, store);
        q
    }

    /// Drops all entries and offers every current arc.
    pub fn refill(&mut self, graph: &NnGraph, store: &NodeStore) {
        self.heap.clear();
        for (u, v, s) in graph.arcs(store) {
            self.push(u, v, s);
        }
    }

    pub fn push(&mut self, src: usize, dst: usize, sim: f64) {
        let (lo, hi) = if src < dst { (src, dst) } else { (dst, src) };
        self.heap.push(Entry { sim, lo, hi, src, dst });
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Highest-similarity arc still present in the graph, as
    /// `(min id, max id, similarity)`. `None` when no arc has similarity
    /// `>= 0`; such an arc stays queued.
    pub fn best_arc(&mut self, graph: &NnGraph, store: &NodeStore) -> Option<(usize, usize, f64)> {
        while let Some(top) = self.heap.peek() {
            let valid = store.is_alive(top.src) && store.is_alive(top.dst) && graph.has_arc(top.src, top.dst);
            if !valid {
                self.heap.pop();
                continue;
            }
            if top.sim < 0.0 {
                return None;
            }
            let e = self.heap.pop()?;
            return Some((e.lo, e.hi, e.sim));
        }
        None
    }
}

/// Free-function form of [`CandidateQueue::best_arc`].
pub fn best_arc(graph: &NnGraph, queue: &mut CandidateQueue, store: &NodeStore) -> Option<(usize, usize, f64)> {
    queue.best_arc(graph, store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::AlphaSign;

    fn store_of(rows: &[[f32; 2]]) -> NodeStore {
        let rows: Vec<Vec<f32>> = rows.iter().map(|r| r.to_vec()).collect();
        NodeStore::new(&FeatureMatrix::from_rows(&rows).unwrap())
    }

    fn f(x: f32) -> f64 {
        f64::from(x)
    }

    #[test]
    fn top1_picks_the_larger_dot_product() {
        let s = store_of(&[[1.0, 0.0], [0.8, 0.6], [0.0, 1.0]]);
        let top = topk_exact(&s, 0, 1, &[]).unwrap();
        assert_eq!(top, vec![Neighbor::new(1, f(0.8))]);
    }

    #[test]
    fn large_k_returns_everything_sorted() {
        let s = store_of(&[[1.0, 0.0], [0.8, 0.6], [0.0, 1.0], [-1.0, 0.0]]);
        let top = topk_exact(&s, 0, 10, &[]).unwrap();
        let ids: Vec<usize> = top.iter().map(|a| a.node).collect();
        assert_eq!(ids, vec![1, 2, 3]);
        assert!(top.windows(2).all(|w| w[0].sim >= w[1].sim));
        let ids: Vec<usize> = topk_exact(&s, 0, 10, &[1]).unwrap().iter().map(|a| a.node).collect();
        assert_eq!(ids, vec![2, 3]);
    }

    #[test]
    fn ties_go_to_the_smaller_id() {
        let s = store_of(&[[1.0, 0.0], [0.5, 0.5], [0.5, 0.5]]);
        let ids: Vec<usize> = topk_exact(&s, 0, 2, &[]).unwrap().iter().map(|a| a.node).collect();
        assert_eq!(ids, vec![1, 2]);
        let ids: Vec<usize> = topk_exact(&s, 0, 1, &[]).unwrap().iter().map(|a| a.node).collect();
        assert_eq!(ids, vec![1]);
    }

    #[test]
    fn search_errors() {
        let mut s = store_of(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        assert!(matches!(topk_exact(&s, 0, 0, &[]), Err(Error::Argument(_))));
        s.contract(0, 1).unwrap();
        assert!(matches!(topk_exact(&s, 0, 1, &[]), Err(Error::State(_))));
        assert_eq!(topk_exact(&s, 3, 1, &[]).unwrap()[0].node, 2);
    }

    #[test]
    fn minus_alpha_uses_asymmetric_query() {
        let fm = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![0.9, 0.0], vec![0.0, 1.0]])
            .unwrap()
            .with_uniform_alpha(0.4, AlphaSign::Minus)
            .unwrap();
        let top = topk_exact_features(&fm, 0, 2, &[]).unwrap();
        assert_eq!(top[0].node, 1);
        assert!((top[0].sim - (f(0.9) - f(0.4) * f(0.4))).abs() < 1e-12);
        assert!((top[1].sim + f(0.4) * f(0.4)).abs() < 1e-12);
    }

    #[test]
    fn two_nodes_point_at_each_other() {
        let s = store_of(&[[1.0, 0.0], [0.0, 1.0]]);
        let g = build_nn_graph(&s, 3).unwrap();
        assert_eq!(g.out_arcs(0), &[Neighbor::new(1, 0.0)]);
        assert_eq!(g.out_arcs(1), &[Neighbor::new(0, 0.0)]);
        assert_eq!(g.in_arcs(0), &[1]);
        g.validate(&s, 0.0).unwrap();
    }

    #[test]
    fn built_lists_dominate_everything_outside() {
        let rows: Vec<[f32; 2]> = (0..10)
            .map(|i| {
                let t = i as f32 * 0.7;
                [t.cos() * (1.0 + 0.1 * i as f32), t.sin()]
            })
            .collect();
        let s = store_of(&rows);
        let g = NnGraph::build(&s, 3).unwrap();
        g.validate(&s, 0.0).unwrap();
        for u in 0..10 {
            let list = g.out_arcs(u);
            assert_eq!(list.len(), 3);
            let min = list.last().unwrap().sim;
            for v in (0..10).filter(|&v| v != u && !g.has_arc(u, v)) {
                assert!(s.sim(u, v) <= min);
            }
            for a in list {
                assert!(g.in_arcs(a.node).contains(&u));
            }
        }
    }

    #[test]
    fn bound_is_sum_of_list_minima() {
        let s = store_of(&[[1.0, 0.0], [0.0, 1.0], [0.8, 0.6]]);
        let g = NnGraph::build(&s, 1).unwrap();
        assert_eq!(g.out_arcs(0)[0].node, 2);
        assert_eq!(g.out_arcs(1)[0].node, 2);
        assert!((g.contraction_bound(0, 1) - (f(0.8) + f(0.6))).abs() < 1e-12);
        assert!((g.contraction_bound(0, 1) - 1.4).abs() < 1e-6);

        let mut s = store_of(&[[1.0, 0.0], [0.0, 1.0], [0.8, 0.6], [-1.0, 0.0]]);
        let g = NnGraph::build(&s, 1).unwrap();
        let bound = g.contraction_bound(0, 1);
        let m = s.contract(0, 1).unwrap();
        assert_eq!(s.sim(m, 3), -1.0);
        assert!(s.sim(m, 3) <= bound);
    }

    #[test]
    fn empty_list_gives_infinite_bound() {
        let s = store_of(&[[1.0, 0.0], [0.0, 1.0], [0.8, 0.6]]);
        let g = NnGraph::from_lists(&s, 1, vec![(0, vec![Neighbor::new(2, s.sim(0, 2))]), (1, vec![])]).unwrap();
        assert_eq!(g.contraction_bound(0, 1), f64::INFINITY);
    }

    #[test]
    fn merged_node_reuses_candidates_without_search() {
        let mut s = store_of(&[[1.0, 0.0], [0.0, 1.0], [0.8, 0.6]]);
        let mut g = NnGraph::build(&s, 1).unwrap();
        let m = s.contract(0, 1).unwrap();
        let added = g.incremental_update(&s, 0, 1, m, UpdateMode::Incremental).unwrap();
        assert_eq!(g.stats.update_searches, 0);
        assert_eq!(g.out_arcs(m).len(), 1);
        assert_eq!(g.out_arcs(m)[0].node, 2);
        assert!((g.out_arcs(m)[0].sim - 1.4).abs() < 1e-6);
        // Node 2 pointed at 0; the merged node is at least as similar.
        assert_eq!(g.out_arcs(2)[0].node, m);
        assert_eq!(added.len(), 2);
        g.validate(&s, 0.0).unwrap();
    }

    #[test]
    fn reverse_neighbour_keeps_its_list_when_merge_is_closer() {
        // Node 3 lists {0, 2}; the merge of 0 and 1 beats its remaining arc.
        let mut s = store_of(&[[1.0, 0.0], [0.6, 0.3], [0.0, 0.5], [0.9, 0.5]]);
        let mut g = NnGraph::build(&s, 2).unwrap();
        let ids: Vec<usize> = g.out_arcs(3).iter().map(|a| a.node).collect();
        assert_eq!(ids, vec![0, 1]);
        let m = s.contract(0, 1).unwrap();
        let before = g.stats.update_searches;
        g.incremental_update(&s, 0, 1, m, UpdateMode::Incremental).unwrap();
        assert!(g.has_arc(3, m));
        assert_eq!(g.stats.update_searches - before, 0);
        g.validate(&s, 0.0).unwrap();
    }

    #[test]
    fn lazy_update_can_isolate_the_merged_node() {
        // 0 and 1 are each other's only neighbour, so the merge has no
        // candidates.
        let rows = [[1.0, 0.0], [1.0, 0.01], [-1.0, 0.0], [0.0, -1.0]];
        let mut s = store_of(&rows);
        let mut g = NnGraph::build(&s, 1).unwrap();
        assert_eq!(g.out_arcs(0)[0].node, 1);
        assert_eq!(g.out_arcs(1)[0].node, 0);
        let m = s.contract(0, 1).unwrap();
        g.incremental_update(&s, 0, 1, m, UpdateMode::Lazy).unwrap();
        assert!(g.out_arcs(m).is_empty());
        // Node 3 only pointed at 0 and the merge is not close enough.
        assert!(g.out_arcs(3).is_empty());
        assert_eq!(g.stats.update_searches, 0);
        g.validate(&s, 0.0).unwrap();

        // The exact variant searches for both instead.
        let mut s = store_of(&rows);
        let mut g = NnGraph::build(&s, 1).unwrap();
        let m = s.contract(0, 1).unwrap();
        g.incremental_update(&s, 0, 1, m, UpdateMode::Incremental).unwrap();
        assert_eq!(g.out_arcs(m).len(), 1);
        assert_eq!(g.out_arcs(3).len(), 1);
        assert_eq!(g.stats.update_searches, 2);
    }

    #[test]
    fn update_requires_the_registered_merge() {
        let mut s = store_of(&[[1.0, 0.0], [0.0, 1.0], [0.8, 0.6], [0.1, 0.1]]);
        let mut g = NnGraph::build(&s, 1).unwrap();
        let m = s.contract(0, 1).unwrap();
        assert!(matches!(
            g.incremental_update(&s, 0, 2, m, UpdateMode::Incremental),
            Err(Error::State(_))
        ));
        assert!(matches!(
            g.incremental_update(&s, 0, 1, m + 1, UpdateMode::Incremental),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn exhaustive_update_matches_a_fresh_build() {
        let rows: Vec<[f32; 2]> = (0..12).map(|i| [(i as f32).sin(), (i as f32 * 1.3).cos()]).collect();
        let mut s = store_of(&rows);
        let mut g = NnGraph::build(&s, 2).unwrap();
        let m = s.contract(3, 7).unwrap();
        g.incremental_update(&s, 3, 7, m, UpdateMode::Exhaustive).unwrap();
        g.validate(&s, 0.0).unwrap();
        let fresh = NnGraph::build(&s, 2).unwrap();
        for &u in s.alive() {
            if s.alive().iter().any(|&q| g.has_arc(q, m) || q == m) && (u == m || fresh.has_arc(u, m)) {
                assert_eq!(g.out_arcs(u), fresh.out_arcs(u), "node {u}");
            }
        }
    }

    #[test]
    fn best_arc_on_empty_graph() {
        let s = store_of(&[[1.0, 0.0], [0.0, 1.0]]);
        let g = NnGraph::from_lists(&s, 1, vec![]).unwrap();
        let mut q = CandidateQueue::from_graph(&g, &s);
        assert!(q.is_empty());
        assert_eq!(best_arc(&g, &mut q, &s), None);
    }

    #[test]
    fn best_arc_prefers_larger_similarity() {
        let s = store_of(&[[1.0, 0.0], [0.5, 0.0], [0.9, 0.0]]);
        let g = NnGraph::from_lists(
            &s,
            1,
            vec![
                (1, vec![Neighbor::new(0, s.sim(1, 0))]),
                (2, vec![Neighbor::new(0, s.sim(2, 0))]),
            ],
        )
        .unwrap();
        let mut q = CandidateQueue::from_graph(&g, &s);
        assert_eq!(q.len(), 2);
        assert_eq!(q.best_arc(&g, &s), Some((0, 2, f(0.9))));
    }

    #[test]
    fn zero_similarity_arc_is_contractible() {
        let s = store_of(&[[1.0, 0.0], [0.0, 1.0]]);
        let g = NnGraph::build(&s, 1).unwrap();
        let mut q = CandidateQueue::from_graph(&g, &s);
        assert_eq!(q.best_arc(&g, &s), Some((0, 1, 0.0)));

        let s = store_of(&[[1.0, 0.0], [-1.0, 0.0]]);
        let g = NnGraph::build(&s, 1).unwrap();
        let mut q = CandidateQueue::from_graph(&g, &s);
        assert_eq!(q.best_arc(&g, &s), None);
        assert_eq!(q.len(), 2, "negative arcs stay queued");
    }

    #[test]
    fn equal_similarities_break_towards_smaller_pair() {
        let s = store_of(&[[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]);
        let g = NnGraph::from_lists(
            &s,
            1,
            vec![(2, vec![Neighbor::new(1, 1.0)]), (0, vec![Neighbor::new(2, 1.0)])],
        )
        .unwrap();
        let mut q = CandidateQueue::from_graph(&g, &s);
        assert_eq!(q.best_arc(&g, &s), Some((0, 2, 1.0)));
        assert_eq!(q.best_arc(&g, &s), Some((1, 2, 1.0)));
    }

    #[test]
    fn stale_entries_are_skipped() {
        let mut s = store_of(&[[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [0.1, 0.9]]);
        let mut g = NnGraph::build(&s, 1).unwrap();
        let mut q = CandidateQueue::from_graph(&g, &s);
        let (i, j, _) = q.best_arc(&g, &s).unwrap();
        let m = s.contract(i, j).unwrap();
        for (u, v, sim) in g.incremental_update(&s, i, j, m, UpdateMode::Incremental).unwrap() {
            q.push(u, v, sim);
        }
        let (a, b, _) = q.best_arc(&g, &s).unwrap();
        assert!(s.is_alive(a) && s.is_alive(b));
        assert!(g.has_arc(a, b) || g.has_arc(b, a));
    }
}
