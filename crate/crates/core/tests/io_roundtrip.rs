use dense_multicut::io::{
    decode_features, encode_features, features_to_csv, parse_features_csv, parse_ground_truth, parse_sparse_graph,
    read_features, read_labels, sparse_graph_to_text, write_features, write_features_csv, write_ground_truth,
    write_labels, RunSummary, HEADER_LEN,
};
use dense_multicut::synth::synth_instance;
use dense_multicut::{AlphaSign, Error, FeatureMatrix, SparseWeightedGraph};
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = FeatureMatrix> {
    (1usize..30, 1usize..12, any::<bool>()).prop_flat_map(|(n, d, with_alpha)| {
        (
            prop::collection::vec(
                prop::num::f32::NORMAL | prop::num::f32::ZERO | prop::num::f32::SUBNORMAL,
                n * d,
            ),
            prop::collection::vec(0.0f32..4.0, n),
        )
            .prop_map(move |(data, alpha)| {
                let alpha = if with_alpha { alpha } else { vec![0.0; n] };
                FeatureMatrix::with_alpha(n, d, data, alpha, AlphaSign::Off).unwrap()
            })
    })
}

fn same_bits(a: &FeatureMatrix, b: &FeatureMatrix) -> bool {
    a.n() == b.n()
        && a.d() == b.d()
        && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits())
        && a.alphas()
            .iter()
            .zip(b.alphas())
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn binary_round_trip_is_bit_exact(fm in matrix()) {
        let bytes = encode_features(&fm);
        let back = decode_features(&bytes).unwrap();
        prop_assert!(same_bits(&fm, &back));
        prop_assert_eq!(encode_features(&back), bytes);
    }

    #[test]
    fn csv_round_trip_is_bit_exact(fm in matrix()) {
        let back = parse_features_csv(&features_to_csv(&fm)).unwrap();
        prop_assert_eq!(back.n(), fm.n());
        prop_assert!(fm.data().iter().zip(back.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn every_truncation_is_a_format_error(fm in matrix(), cut in 0.0f64..1.0) {
        let bytes = encode_features(&fm);
        let len = (cut * bytes.len() as f64) as usize;
        match decode_features(&bytes[..len]) {
            Err(Error::Format { offset, .. }) => prop_assert!(offset <= len as u64),
            other => prop_assert!(false, "expected a format error, got {other:?}"),
        }
    }

    #[test]
    fn sparse_graph_round_trip(edges in prop::collection::btree_map((0usize..40, 0usize..40), -5.0f64..5.0, 1..60)) {
        let edges: Vec<(usize, usize, f64)> = edges
            .into_iter()
            .filter(|((u, v), _)| u < v)
            .map(|((u, v), c)| (u, v, c))
            .collect();
        prop_assume!(!edges.is_empty());
        let n = edges.iter().map(|e| e.1).max().unwrap() + 1;
        let g = SparseWeightedGraph::new(n, edges).unwrap();
        let back = parse_sparse_graph(&sparse_graph_to_text(&g)).unwrap();
        prop_assert_eq!(back.n(), g.n());
        prop_assert_eq!(back.edges(), g.edges());
    }
}

#[test]
fn files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let (fm, gt) = synth_instance(50, 6, 4, 0.1, 3).unwrap();
    let fm = fm.with_uniform_alpha(0.4, AlphaSign::Minus).unwrap();

    let bin = dir.path().join("f.bin");
    write_features(&bin, &fm).unwrap();
    let back = read_features(&bin, false).unwrap();
    assert!(same_bits(&fm, &back));
    assert_eq!(back.sign(), AlphaSign::Off);
    assert_eq!(
        std::fs::metadata(&bin).unwrap().len() as usize,
        HEADER_LEN + 50 * 6 * 4 + 50 * 4
    );

    let csv = dir.path().join("f.csv");
    write_features_csv(&csv, &fm).unwrap();
    let back = read_features(&csv, false).unwrap();
    assert_eq!(back.data(), fm.data());

    let labels = dir.path().join("labels.tsv");
    write_labels(&labels, &gt).unwrap();
    assert_eq!(read_labels(&labels).unwrap(), gt);

    let truth = dir.path().join("gt.txt");
    write_ground_truth(&truth, &gt).unwrap();
    assert_eq!(
        parse_ground_truth(&std::fs::read_to_string(&truth).unwrap()).unwrap(),
        gt
    );
}

#[test]
fn normalize_on_read() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    std::fs::write(&path, "3,4\n0,2\n").unwrap();
    let fm = read_features(&path, true).unwrap();
    assert_eq!(fm.row(0), &[0.6, 0.8]);
    assert_eq!(fm.row(1), &[0.0, 1.0]);
    std::fs::write(&path, "3,4\n0,0\n").unwrap();
    assert!(matches!(read_features(&path, true), Err(Error::Data(_))));
}

#[test]
fn synthetic_output_is_reproducible() {
    let a = encode_features(&synth_instance(200, 8, 5, 0.05, 11).unwrap().0);
    let b = encode_features(&synth_instance(200, 8, 5, 0.05, 11).unwrap().0);
    assert_eq!(a, b);
    let (fm, gt) = synth_instance(60, 5, 3, 0.0, 2).unwrap();
    for i in 0..60 {
        for j in i + 1..60 {
            if gt[i] == gt[j] {
                assert!((fm.similarity(i, j).unwrap() - 1.0).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn summary_json_round_trip() {
    let s = RunSummary {
        algorithm: "dgaec-inc".into(),
        n: 10,
        d: 3,
        k: 5,
        alpha: 0.4,
        alpha_sign: AlphaSign::Minus,
        objective: -12.5,
        n_clusters: 3,
        wall_time_ms: 1.25,
        n_contractions: 7,
        n_exhaustive_searches: 12,
        seed: 0,
        nmi: Some(0.9),
        ami: None,
        optimal_objective: None,
    };
    let text = s.to_json();
    assert!(text.contains("\"alpha_sign\": \"minus\""));
    assert!(!text.contains("ami"));
    assert_eq!(RunSummary::from_json(&text).unwrap(), s);
}
