use krr_granger::engine::{gc_test, gc_test_linear, GcConfig, Method, Preprocess};
use krr_granger::simnet::{generate, NetworkName, NetworkSpec};
use krr_granger::stats::{binomial_upper_tail, wilcoxon_signed_rank, wilcoxon_signed_rank_normal, DeltaVector};
use krr_granger::TimeSeriesPanel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn noise_panel(seed: u64, n: usize) -> TimeSeriesPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = (0..2).map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
    TimeSeriesPanel::new(vec!["a".into(), "b".into()], cols).unwrap()
}

// sup |F_n - F| against the uniform cdf
fn ks_uniform(p: &mut [f64]) -> f64 {
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    p.iter().enumerate().map(|(i, &v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs())).fold(0.0, f64::max)
}

#[test]
fn linear_f_test_uniform_under_null() {
    let config = GcConfig { method: Method::LinearF, ..GcConfig::default() }.with_lags(2);
    let mut p: Vec<f64> =
        (0..500).map(|s| gc_test_linear(&noise_panel(70_000 + s, 300), "a", "b", &config).unwrap().outcome.p_value).collect();
    let d = ks_uniform(&mut p);
    assert!(d < 0.07, "KS distance {d}");
}

#[test]
fn sign_test_conservative_under_null() {
    // discrete p-values: compare only at attained values
    let config = GcConfig::default().with_lags(2);
    let trials = 300;
    let p: Vec<f64> = (0..trials).map(|s| gc_test(&noise_panel(90_000 + s, 200), "a", "b", &config).unwrap().outcome.p_value).collect();
    for level in [0.01, 0.05, 0.1, 0.25, 0.5] {
        let attained = p.iter().copied().filter(|&v| v <= level).fold(0.0, f64::max);
        if attained == 0.0 {
            continue;
        }
        let frac = p.iter().filter(|&&v| v <= attained).count() as f64 / trials as f64;
        // binomial sd at 300 trials is at most 0.029
        assert!(frac <= attained + 0.09, "level {level}: P(p <= {attained}) = {frac}");
    }
}

#[test]
fn linear_example_detects_coupling() {
    let config = GcConfig { method: Method::LinearF, ..GcConfig::default() }.with_lags(2);
    let hits = (0..50)
        .filter(|&s| {
            let (panel, _) = generate(&NetworkSpec::new(NetworkName::Linear5, 500, 500 + s)).unwrap();
            gc_test_linear(&panel, "x1", "x2", &config).unwrap().outcome.p_value < 0.05
        })
        .count();
    assert!(hits >= 45, "{hits}/50");
}

#[test]
fn krr_example_detects_coupling() {
    let config = GcConfig { preprocess: Preprocess::Quantile(1000), ..GcConfig::default() }.with_lags(3);
    let hits = (0..20)
        .filter(|&s| {
            let (panel, _) = generate(&NetworkSpec::new(NetworkName::Linear5, 500, 800 + s)).unwrap();
            gc_test(&panel, "x1", "x2", &config).unwrap().outcome.p_value < 0.05
        })
        .count();
    assert!(hits >= 17, "{hits}/20");
}

#[test]
fn wilcoxon_normal_tracks_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for shift in [0.0, 0.3, 0.8] {
        let d: Vec<f64> = (0..25)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                shift + z
            })
            .collect();
        let d = DeltaVector::new(d);
        let exact = wilcoxon_signed_rank(&d).unwrap().p_value;
        let approx = wilcoxon_signed_rank_normal(&d).unwrap().p_value;
        assert!((exact - approx).abs() < 0.02, "shift {shift}: {exact} vs {approx}");
    }
}

#[test]
fn binomial_tail_matches_symmetry() {
    for n in [1usize, 7, 30, 62, 63, 200] {
        for k in 0..=n {
            // P(X >= k) + P(X >= n-k+1) = 1 for fair coins
            let s = binomial_upper_tail(n, k) + binomial_upper_tail(n, n - k + 1);
            assert!((s - 1.0).abs() < 1e-12, "n {n} k {k}: {s}");
        }
    }
}

#[test]
fn csv_round_trip_is_lossless() {
    let (panel, _) = generate(&NetworkSpec::new(NetworkName::Nonlinear5, 300, 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    panel.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    let back = TimeSeriesPanel::read_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back.names(), panel.names());
    assert_eq!(back.columns(), panel.columns());
}
