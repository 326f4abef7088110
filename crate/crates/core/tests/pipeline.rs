use kdist_tda::experiment::{run_on_cloud, ExperimentConfig, FiltrationMode, TargetDim};
use kdist_tda::PointCloud;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn circle_in(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> PointCloud {
    let rows = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64 * std::f64::consts::TAU;
            let mut row: Vec<f64> = (0..dim).map(|_| 0.05 * rng.sample::<f64, _>(StandardNormal)).collect();
            row[0] += 2.0 * t.cos();
            row[1] += 2.0 * t.sin();
            row
        })
        .collect();
    PointCloud::from_rows(rows).unwrap()
}

// When squared distances are preserved within 1 ± ε the diagrams must be
// (1 − ε)^{-1/2}-interleaved, in every filtration mode.
#[test]
fn squared_distortion_implies_certificate() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cloud = circle_in(&mut rng, 12, 1200);
    let mut checked = 0;
    for seed in 0..4 {
        for mode in [FiltrationMode::ExactCech, FiltrationMode::ApproxCech, FiltrationMode::Rips] {
            let mut config = ExperimentConfig::new("memory", f64::INFINITY);
            config.seed = seed;
            config.filtration = mode;
            config.target_dim = TargetDim::Explicit(800);
            config.probes = 50;
            config.radius_samples = 100;
            let r = run_on_cloud(&cloud, &config).unwrap();
            if !r.distortion.is_squared_epsilon_distortion {
                continue;
            }
            checked += 1;
            assert!(r.pointwise_kdist.pass, "{:?}", r.pointwise_kdist);
            assert!(r.radius_checks.pass && r.approx_radius_checks.pass);
            assert!(r.interleaving.passes, "{mode}: {}", r.interleaving.log_bottleneck);
            assert!(r.implications.conditional_violations.is_empty());
        }
    }
    assert!(checked >= 6, "only {checked} runs met the squared condition");
}

// A loop survives projection: H1 has a long bar on both sides.
#[test]
fn circle_keeps_its_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cloud = circle_in(&mut rng, 16, 200);
    let mut config = ExperimentConfig::new("memory", f64::INFINITY);
    config.target_dim = TargetDim::Explicit(150);
    config.probes = 20;
    config.radius_samples = 20;
    let r = run_on_cloud(&cloud, &config).unwrap();
    for diagrams in [&r.diagrams_before, &r.diagrams_after] {
        let longest = diagrams[1]
            .pairs
            .iter()
            .map(|p| p.death.unwrap() / p.birth)
            .fold(0.0, f64::max);
        assert!(longest > 1.5, "{longest}");
        assert_eq!(diagrams[0].essential_count(), 1);
    }
}
