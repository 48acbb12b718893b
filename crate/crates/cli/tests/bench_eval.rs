use hematch::bench::{bench_row, BenchConfig, BenchPath};
use hematch::eval::{run_eval, EvalConfig, Pipeline};
use hematch_core::codec::{integer_dot, quantize};
use hematch_core::fv::Preset;
use hematch_core::matcher::{
    cosine_dissimilarity, evaluate_tar_far, normalize, MatchScore, SyntheticSpec,
};

#[test]
fn plaintext_baseline_is_fast() {
    let preset = Preset::by_name("l128-n1024").unwrap();
    let row = bench_row(&preset, BenchPath::Plaintext, &BenchConfig::default()).unwrap();
    assert_eq!(row.dim, 512);
    let per_pair_us = row.timings.unwrap().total_ms * 1000.0;
    assert!(per_pair_us < 50.0, "{per_pair_us} us per pair");
}

/// A harder set than the default so that TAR is not saturated.
fn hard_set(sigma_within: f64, intrinsic_dim: Option<usize>) -> SyntheticSpec {
    SyntheticSpec {
        identities: 120,
        samples_per_identity: 4,
        dim: 512,
        sigma_within,
        seed: 7,
        intrinsic_dim,
    }
}

#[test]
fn pca_preserves_accuracy_on_low_rank_data() {
    let data = hard_set(1.0, Some(64)).generate().unwrap();
    let cfg = EvalConfig {
        deltas: vec![0.0025],
        pca_k: Some(64),
        fhe_pairs: 4,
        seed: 1,
    };
    let report = run_eval(&data, &cfg).unwrap();
    let full = report.tar(Pipeline::Encrypted, Some(0.0025), 0.01).unwrap();
    let reduced = report
        .tar(Pipeline::PcaEncrypted, Some(0.0025), 0.01)
        .unwrap();
    assert!((full - reduced).abs() <= 0.02, "{full} vs {reduced}");
}

#[test]
fn finer_steps_do_not_lose_accuracy() {
    let data = hard_set(3.0, None).generate().unwrap();
    let cfg = EvalConfig {
        deltas: vec![0.1, 0.0025],
        pca_k: None,
        fhe_pairs: 4,
        seed: 2,
    };
    let report = run_eval(&data, &cfg).unwrap();
    let coarse = report.tar(Pipeline::Encrypted, Some(0.1), 1e-4).unwrap();
    let fine = report.tar(Pipeline::Encrypted, Some(0.0025), 1e-4).unwrap();
    let plain = report.tar(Pipeline::Plaintext, None, 0.01).unwrap();
    let fine_1 = report.tar(Pipeline::Encrypted, Some(0.0025), 0.01).unwrap();
    assert!(plain < 1.0, "set is saturated");
    assert!(coarse <= fine, "{coarse} > {fine}");
    assert!((plain - fine_1).abs() <= 0.005, "{plain} vs {fine_1}");
}

#[test]
fn encrypted_decisions_agree_with_plaintext() {
    let data = hard_set(3.0, None).generate().unwrap();
    let features: Vec<Vec<f64>> = data
        .features()
        .iter()
        .map(|f| normalize(f).unwrap())
        .collect();
    let (genuine, impostor) = data.pairs();
    let cos = |pairs: &[(usize, usize)]| -> Vec<f64> {
        pairs
            .iter()
            .map(|&(i, j)| cosine_dissimilarity(&features[i], &features[j]).unwrap())
            .collect()
    };
    let (g, im) = (cos(&genuine), cos(&impostor));
    let threshold = evaluate_tar_far(&g, &im, &[0.01]).unwrap().points[0].threshold;
    for delta in [0.01, 0.0025] {
        let q: Vec<_> = features
            .iter()
            .map(|f| quantize(f, delta).unwrap())
            .collect();
        let mut agree = 0usize;
        let all = genuine.iter().chain(&impostor);
        let exact = g.iter().chain(&im);
        for (&(i, j), &d) in all.zip(exact) {
            let s = MatchScore::from_raw(integer_dot(q[i].values(), q[j].values()), delta);
            agree += usize::from((s.dissimilarity <= threshold) == (d <= threshold));
        }
        let rate = agree as f64 / (genuine.len() + impostor.len()) as f64;
        assert!(rate >= 0.99, "delta {delta}: agreement {rate}");
    }
}
