use dense_multicut::ann::{ann_default_build, AnnIndex, ExactIndex};
use dense_multicut::knn::topk_exact;
use dense_multicut::scaling::{scaling_benchmark, ScalingConfig};
use dense_multicut::solvers::dense_app_laec_with;
use dense_multicut::synth::{gaussian_features, synth_instance};
use dense_multicut::{solve, Algorithm, AlphaSign, AnnParams, NodeStore, SolverConfig};

fn synthetic(n: usize) -> dense_multicut::FeatureMatrix {
    let (fm, _) = synth_instance(n, 64, 100, 0.1, 0).unwrap();
    fm.with_uniform_alpha(0.4, AlphaSign::Minus).unwrap()
}

#[test]
fn lazy_contraction_searches_less() {
    let fm = synthetic(5000);
    let inc = solve(&fm, &SolverConfig::new(Algorithm::DenseGaecInc)).unwrap();
    let lazy = solve(&fm, &SolverConfig::new(Algorithm::DenseLaec)).unwrap();
    assert!(
        lazy.stats.exhaustive_searches() < inc.stats.exhaustive_searches(),
        "{} vs {}",
        lazy.stats.exhaustive_searches(),
        inc.stats.exhaustive_searches()
    );
    assert!(lazy.stats.rebuilds >= 1);
}

#[test]
fn recall_at_five_on_synthetic_instance() {
    for fm in [synthetic(5000), {
        let mut g = gaussian_features(5000, 64, 1).unwrap();
        g.normalize_rows().unwrap();
        g.with_uniform_alpha(0.4, AlphaSign::Minus).unwrap()
    }] {
        let store = NodeStore::new(&fm);
        let index = ann_default_build(&store, AnnParams::default(), 0);
        let mut hits = 0;
        for u in 0..fm.n() {
            let got: Vec<usize> = index.query(store.query_row(u), 6).iter().map(|a| a.node).collect();
            hits += topk_exact(&store, u, 5, &[])
                .unwrap()
                .iter()
                .filter(|a| got.contains(&a.node))
                .count();
        }
        let recall = hits as f64 / (5 * fm.n()) as f64;
        assert!(recall >= 0.9, "recall {recall}");
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let fm = synthetic(3000);
    for alg in [Algorithm::DenseGaecInc, Algorithm::DenseLaec, Algorithm::DenseAppLaec] {
        let one = solve(&fm, &SolverConfig::new(alg).with_threads(1)).unwrap();
        let four = solve(&fm, &SolverConfig::new(alg).with_threads(4)).unwrap();
        assert_eq!(one.trace, four.trace, "{alg}");
        assert_eq!(one.partition.labels(), four.partition.labels(), "{alg}");
    }
}

#[test]
fn exact_plug_in_reproduces_dlaec() {
    let fm = synthetic(1500);
    let lazy = solve(&fm, &SolverConfig::new(Algorithm::DenseLaec)).unwrap();
    let cfg = SolverConfig::new(Algorithm::DenseAppLaec);
    let plugged = dense_app_laec_with(&fm, &cfg, |s: &NodeStore| -> Box<dyn AnnIndex> {
        Box::new(ExactIndex::from_store(s))
    })
    .unwrap();
    assert_eq!(plugged.trace, lazy.trace);
    assert_eq!(plugged.partition.objective(), lazy.partition.objective());
}

#[test]
fn approximate_initial_graph_grows_subquadratically() {
    let cfg = ScalingConfig {
        algorithms: vec![Algorithm::DenseAppLaec],
        repeats: 1,
        ..ScalingConfig::default()
    };
    let report = scaling_benchmark(&[10_000, 20_000, 40_000], &cfg).unwrap();
    let slope = report.initial_graph_slope(Algorithm::DenseAppLaec).unwrap();
    assert!(slope < 1.8, "initial graph slope {slope}");
}
