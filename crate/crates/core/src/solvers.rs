//! Contraction solvers.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ann::{AnnIndex, SmallWorldIndex};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::forest::ContractionForest;
use crate::graph::{materialize_cost_matrix, SparseWeightedGraph};
use crate::knn::{CandidateQueue, Neighbor, NnGraph, NnStats, UpdateMode};
use crate::par;
use crate::partition::Partition;
use crate::store::NodeStore;

/// Solver roster.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    /// Greedy additive edge contraction on an explicit graph.
    #[serde(rename = "gaec")]
    Gaec,
    /// Greedy contraction on features, exhaustive neighbour updates.
    #[serde(rename = "dgaec")]
    DenseGaec,
    /// Greedy contraction on features, incremental neighbour updates.
    #[serde(rename = "dgaec-inc")]
    DenseGaecInc,
    /// Lazy contraction on features.
    #[serde(rename = "dlaec")]
    DenseLaec,
    /// Lazy contraction with an approximate initial neighbour graph.
    #[serde(rename = "dapplaec")]
    DenseAppLaec,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Gaec,
        Algorithm::DenseGaec,
        Algorithm::DenseGaecInc,
        Algorithm::DenseLaec,
        Algorithm::DenseAppLaec,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gaec => "gaec",
            Algorithm::DenseGaec => "dgaec",
            Algorithm::DenseGaecInc => "dgaec-inc",
            Algorithm::DenseLaec => "dlaec",
            Algorithm::DenseAppLaec => "dapplaec",
        }
    }

    /// Neighbour count used when none is given: 1 for the exhaustive
    /// greedy variant, 5 for the incremental and lazy ones.
    pub fn default_k(self) -> usize {
        match self {
            Algorithm::Gaec | Algorithm::DenseGaec => 1,
            _ => 5,
        }
    }

    /// True for solvers that need node features.
    pub fn is_dense(self) -> bool {
        self != Algorithm::Gaec
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "gaec" => Ok(Algorithm::Gaec),
            "dgaec" => Ok(Algorithm::DenseGaec),
            "dgaec-inc" | "dgaecinc" => Ok(Algorithm::DenseGaecInc),
            "dlaec" => Ok(Algorithm::DenseLaec),
            "dapplaec" => Ok(Algorithm::DenseAppLaec),
            other => Err(Error::argument(format!("unknown algorithm {other:?}"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters of the approximate index used for the initial graph of
/// `dapplaec`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnParams {
    pub m_links: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
}

impl Default for AnnParams {
    fn default() -> Self {
        AnnParams {
            m_links: 16,
            ef_construction: 100,
            ef_search: 64,
        }
    }
}

impl AnnParams {
    pub fn validate(&self) -> Result<()> {
        if self.m_links < 2 {
            return Err(Error::argument("m_links must be at least 2"));
        }
        if self.ef_construction == 0 || self.ef_search == 0 {
            return Err(Error::argument("ef parameters must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub k: usize,
    pub ann: AnnParams,
    pub seed: u64,
    /// Worker threads for neighbour searches; 0 uses the ambient pool.
    pub threads: usize,
    /// Edge cap when `gaec` has to materialize the complete graph.
    pub max_materialized_edges: usize,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        SolverConfig {
            algorithm,
            k: algorithm.default_k(),
            ann: AnnParams::default(),
            seed: 0,
            threads: 0,
            max_materialized_edges: 50_000_000,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::argument("k must be at least 1"));
        }
        if self.algorithm == Algorithm::DenseAppLaec {
            self.ann.validate()?;
        }
        Ok(())
    }
}

/// One contraction: `i < j` were merged into `m` across an edge of cost
/// `similarity`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub i: usize,
    pub j: usize,
    pub m: usize,
    pub similarity: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub contractions: usize,
    pub build_searches: u64,
    pub update_searches: u64,
    pub candidate_evals: u64,
    /// Full graph rebuilds after the initial one (lazy solvers).
    pub rebuilds: usize,
    /// Wall time of the initial neighbour graph, milliseconds.
    pub initial_graph_ms: f64,
}

impl SolveStats {
    pub fn exhaustive_searches(&self) -> u64 {
        self.build_searches + self.update_searches
    }

    fn absorb(&mut self, nn: &NnStats) {
        self.build_searches = nn.build_searches;
        self.update_searches = nn.update_searches;
        self.candidate_evals = nn.candidate_evals;
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub partition: Partition,
    pub trace: Vec<Merge>,
    pub stats: SolveStats,
}

/// Hooks into the contraction loop of the feature-space solvers.
pub trait ContractionObserver: Send {
    /// Called with the pre-merge state right before `i` and `j` merge.
    fn before_merge(&mut self, _store: &NodeStore, _graph: &NnGraph, _merge: &Merge) {}
    /// Called once the graph has been repaired after a merge.
    fn after_update(&mut self, _store: &NodeStore, _graph: &NnGraph) {}
}

impl ContractionObserver for () {}

/// Runs the configured algorithm on a feature matrix. `gaec` materializes
/// the complete graph first.
pub fn solve(fm: &FeatureMatrix, cfg: &SolverConfig) -> Result<Solution> {
    solve_observed(fm, cfg, &mut ())
}

pub fn solve_observed(fm: &FeatureMatrix, cfg: &SolverConfig, obs: &mut dyn ContractionObserver) -> Result<Solution> {
    cfg.validate()?;
    match cfg.algorithm {
        Algorithm::Gaec => {
            let g = materialize_cost_matrix(fm, cfg.max_materialized_edges)?;
            let mut sol = gaec(&g);
            sol.partition = Partition::new(fm, sol.partition.labels())?;
            Ok(sol)
        }
        Algorithm::DenseGaec => run_dense(fm, cfg, UpdateMode::Exhaustive, &Initial::Exact, obs),
        Algorithm::DenseGaecInc => run_dense(fm, cfg, UpdateMode::Incremental, &Initial::Exact, obs),
        Algorithm::DenseLaec => run_dense(fm, cfg, UpdateMode::Lazy, &Initial::Exact, obs),
        Algorithm::DenseAppLaec => {
            let params = cfg.ann;
            let seed = cfg.seed;
            let build = move |s: &NodeStore| -> Box<dyn AnnIndex> { Box::new(SmallWorldIndex::build(s, params, seed)) };
            run_dense(fm, cfg, UpdateMode::Lazy, &Initial::Index(&build), obs)
        }
    }
}

/// Greedy contraction on features with exhaustive neighbour updates.
pub fn dense_gaec(fm: &FeatureMatrix, cfg: &SolverConfig) -> Result<Solution> {
    run_dense(fm, cfg, UpdateMode::Exhaustive, &Initial::Exact, &mut ())
}

/// Greedy contraction on features with incremental neighbour updates.
pub fn dense_gaec_inc(fm: &FeatureMatrix, cfg: &SolverConfig) -> Result<Solution> {
    run_dense(fm, cfg, UpdateMode::Incremental, &Initial::Exact, &mut ())
}

/// Lazy contraction: contracts every available nonnegative arc and only
/// rebuilds the graph when none is left.
pub fn dense_laec(fm: &FeatureMatrix, cfg: &SolverConfig) -> Result<Solution> {
    run_dense(fm, cfg, UpdateMode::Lazy, &Initial::Exact, &mut ())
}

/// Lazy contraction whose initial graph comes from the default
/// approximate index. Later rebuilds are exact.
pub fn dense_app_laec(fm: &FeatureMatrix, cfg: &SolverConfig) -> Result<Solution> {
    let mut cfg = cfg.clone();
    cfg.algorithm = Algorithm::DenseAppLaec;
    solve(fm, &cfg)
}

/// [`dense_app_laec`] with a caller-supplied index for the initial graph.
pub fn dense_app_laec_with<F>(fm: &FeatureMatrix, cfg: &SolverConfig, build_index: F) -> Result<Solution>
where
    F: Fn(&NodeStore) -> Box<dyn AnnIndex> + Sync,
{
    cfg.validate()?;
    run_dense(fm, cfg, UpdateMode::Lazy, &Initial::Index(&build_index), &mut ())
}

type IndexBuilder<'a> = &'a (dyn Fn(&NodeStore) -> Box<dyn AnnIndex> + Sync);

enum Initial<'a> {
    Exact,
    Index(IndexBuilder<'a>),
}

fn initial_graph(store: &NodeStore, k: usize, init: &Initial<'_>) -> Result<NnGraph> {
    match init {
        Initial::Exact => NnGraph::build(store, k),
        Initial::Index(build) => {
            let index = build(store);
            let alive = store.alive();
            let lists = par::map_slice(alive, |&u| {
                let found = index.query(store.query_row(u), k + 1);
                let list: Vec<Neighbor> = found
                    .into_iter()
                    .filter(|a| a.node != u)
                    .map(|a| Neighbor::new(a.node, store.sim(u, a.node)))
                    .collect();
                (u, list)
            });
            NnGraph::from_lists(store, k, lists)
        }
    }
}

fn run_dense(
    fm: &FeatureMatrix,
    cfg: &SolverConfig,
    mode: UpdateMode,
    init: &Initial<'_>,
    obs: &mut dyn ContractionObserver,
) -> Result<Solution> {
    cfg.validate()?;
    let n = fm.n();
    if n == 1 {
        return Ok(Solution {
            partition: Partition::single_cluster(1),
            trace: Vec::new(),
            stats: SolveStats::default(),
        });
    }
    let k = cfg.k;
    par::with_threads(cfg.threads, || {
        let mut store = NodeStore::new(fm);
        let started = Instant::now();
        let mut graph = initial_graph(&store, k, init)?;
        let mut stats = SolveStats {
            initial_graph_ms: started.elapsed().as_secs_f64() * 1e3,
            ..SolveStats::default()
        };
        let mut queue = CandidateQueue::from_graph(&graph, &store);
        let mut trace = Vec::with_capacity(n - 1);
        let mut fresh = matches!(init, Initial::Exact);

        loop {
            match queue.best_arc(&graph, &store) {
                Some((i, j, similarity)) => {
                    let merge = Merge {
                        i,
                        j,
                        m: store.forest().next_id(),
                        similarity,
                    };
                    obs.before_merge(&store, &graph, &merge);
                    let m = store.contract(i, j)?;
                    debug_assert_eq!(m, merge.m);
                    trace.push(merge);
                    for (u, v, s) in graph.incremental_update(&store, i, j, m, mode)? {
                        queue.push(u, v, s);
                    }
                    fresh = false;
                    obs.after_update(&store, &graph);
                }
                None if mode == UpdateMode::Lazy && !fresh && store.alive().len() > 1 => {
                    graph.rebuild(&store);
                    queue.refill(&graph, &store);
                    stats.rebuilds += 1;
                    fresh = true;
                }
                None => break,
            }
        }

        stats.contractions = trace.len();
        stats.absorb(&graph.stats);
        let partition = Partition::new(fm, &store.labels())?;
        Ok(Solution {
            partition,
            trace,
            stats,
        })
    })
}

#[derive(Clone, Copy, Debug)]
struct EdgeEntry {
    cost: f64,
    lo: usize,
    hi: usize,
}

impl PartialEq for EdgeEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for EdgeEntry {}

impl PartialOrd for EdgeEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EdgeEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then_with(|| (other.lo, other.hi).cmp(&(self.lo, self.hi)))
    }
}

/// Greedy additive edge contraction on an explicit graph.
///
/// Repeatedly contracts the edge of largest cost while that cost is
/// nonnegative. Parallel edges created by a contraction are joined by adding
/// their costs, absent edges counting as zero. Ties go to the
/// lexicographically smallest `(min id, max id)` pair.
pub fn gaec(g: &SparseWeightedGraph) -> Solution {
    let n = g.n();
    let mut forest = ContractionForest::new(n);
    let mut adj: Vec<HashMap<usize, f64>> = vec![HashMap::new(); forest.capacity()];
    let mut heap = BinaryHeap::with_capacity(g.edge_count());
    for &(u, v, c) in g.edges() {
        adj[u].insert(v, c);
        adj[v].insert(u, c);
        heap.push(EdgeEntry { cost: c, lo: u, hi: v });
    }
    let mut trace = Vec::new();
    while let Some(top) = heap.peek().copied() {
        if !forest.is_alive(top.lo) || !forest.is_alive(top.hi) {
            heap.pop();
            continue;
        }
        if top.cost < 0.0 {
            break;
        }
        heap.pop();
        let (i, j) = (top.lo, top.hi);
        let m = forest.merge(i, j).expect("both endpoints are alive");
        trace.push(Merge {
            i,
            j,
            m,
            similarity: top.cost,
        });
        let adj_i = std::mem::take(&mut adj[i]);
        let mut adj_j = std::mem::take(&mut adj[j]);
        let mut merged = HashMap::with_capacity(adj_i.len() + adj_j.len());
        for (l, c_il) in adj_i {
            if l == j {
                continue;
            }
            let c_jl = adj_j.remove(&l).unwrap_or(0.0);
            merged.insert(l, c_il + c_jl);
        }
        for (l, c_jl) in adj_j {
            if l != i {
                merged.insert(l, 0.0 + c_jl);
            }
        }
        for (&l, &c) in &merged {
            let nbrs = &mut adj[l];
            nbrs.remove(&i);
            nbrs.remove(&j);
            nbrs.insert(m, c);
            heap.push(EdgeEntry {
                cost: c,
                lo: l.min(m),
                hi: l.max(m),
            });
        }
        adj[m] = merged;
    }
    let partition = Partition::new(g, &forest.labels()).expect("labels cover every node");
    let stats = SolveStats {
        contractions: trace.len(),
        ..SolveStats::default()
    };
    Solution {
        partition,
        trace,
        stats,
    }
}
