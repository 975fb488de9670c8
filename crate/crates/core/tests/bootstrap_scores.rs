use ensemble_recal::bootstrap::{bootstrap_fit, fit_replicate, resample_indices};
use ensemble_recal::harness::{generate_synthetic, Generator, SyntheticSpec};
use ensemble_recal::ngr::fit_ngr;
use ensemble_recal::rng::{derive_seed, stream};
use ensemble_recal::simplex::SimplexSettings;
use ensemble_recal::verification::{
    crps, crps_numerical, ignorance, interval_coverage, pit, pit_histogram, PitHistogram, PIT_BINS,
};
use ensemble_recal::{Normal, PredictiveDist, StudentT, TrainingSet};
use proptest::prelude::*;

fn opts() -> SimplexSettings {
    SimplexSettings::default()
}

fn small_set() -> TrainingSet {
    TrainingSet::from_triples(&[(0.1, 0.5, 0.3), (1.2, 0.9, 0.8), (-0.7, 0.3, -1.1), (2.0, 1.4, 2.6)]).unwrap()
}

#[test]
fn identity_resample_reproduces_full_fit() {
    let train = small_set();
    let base = (0..10_000u64)
        .find(|&s| {
            let mut idx = resample_indices(&mut stream(derive_seed(s, 0)), 4);
            idx.sort();
            idx == [0, 1, 2, 3]
        })
        .expect("an identity resample exists");
    let full = fit_ngr(&train, &opts()).unwrap();
    let ens = bootstrap_fit(&train, 1, base, &opts()).unwrap();
    assert_eq!(ens.failed_draws, 0);
    assert_eq!(ens.replicates[0], full.params);
}

fn fig_set() -> TrainingSet {
    generate_synthetic(&SyntheticSpec::new(Generator::Ngr { a: 0.0, b: 1.0, c: 0.5, d: 0.5 }, 19, 99)).unwrap()
}

#[test]
fn bootstrap_is_deterministic_and_prefix_stable() {
    let train = fig_set();
    let a = bootstrap_fit(&train, 20, 7, &opts()).unwrap();
    let b = bootstrap_fit(&train, 20, 7, &opts()).unwrap();
    assert_eq!(a, b);
    let c = bootstrap_fit(&train, 35, 7, &opts()).unwrap();
    assert_eq!(a.replicates[..], c.replicates[..20]);
    let (p5, _) = fit_replicate(&train, 5, 7, &opts()).unwrap();
    assert_eq!(p5, a.replicates[5]);
    let other = bootstrap_fit(&train, 20, 8, &opts()).unwrap();
    assert_ne!(a.replicates, other.replicates);
}

#[test]
fn mixture_moments_follow_total_variance() {
    let train = fig_set();
    let ens = bootstrap_fit(&train, 200, 11, &opts()).unwrap();
    let (m_star, v_star) = (0.8, 1.1);
    let mix = ens.predict(m_star, v_star).unwrap();
    let k = ens.len() as f64;
    let means: Vec<f64> = ens.replicates.iter().map(|p| p.mean(m_star)).collect();
    let mean = means.iter().sum::<f64>() / k;
    let within = ens.replicates.iter().map(|p| p.variance(v_star)).sum::<f64>() / k;
    let between = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / k;
    assert!((mix.mean() - mean).abs() < 1e-12);
    assert!((mix.variance() - (within + between)).abs() < 1e-10);

    let d: PredictiveDist = mix.into();
    let xs = d.sample(&mut stream(5), 200_000);
    let n = xs.len() as f64;
    let s_mean = xs.iter().sum::<f64>() / n;
    let s_var = xs.iter().map(|x| (x - s_mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((s_mean - mean).abs() < 0.02);
    assert!((s_var / (within + between) - 1.0).abs() < 0.02);
}

#[test]
fn bootstrap_tails_are_heavier_than_plugin() {
    let train = fig_set();
    let plugin: PredictiveDist = fit_ngr(&train, &opts()).unwrap().params.predict(0.0, 1.0).unwrap().into();
    let boot: PredictiveDist = bootstrap_fit(&train, 500, 3, &opts()).unwrap().predict(0.0, 1.0).unwrap().into();
    let c = plugin.location();
    let width = plugin.quantile(0.99).unwrap() - plugin.quantile(0.01).unwrap();
    let far = [c - 1.5 * width, c + 1.5 * width];
    for x in far {
        assert!(boot.pdf(x) > plugin.pdf(x), "x {x}: boot {} plugin {}", boot.pdf(x), plugin.pdf(x));
    }
}

#[test]
fn ignorance_and_crps_reference_values() {
    let n: PredictiveDist = Normal::new(0.0, 1.0).unwrap().into();
    let ign0 = ignorance(&n, 0.0).unwrap();
    assert!((ign0 - 0.5 * (2.0 * std::f64::consts::PI).log2()).abs() < 1e-12);
    let crps0 = crps(&n, 0.0).unwrap();
    assert!((crps0 - (2.0f64.sqrt() - 1.0) / std::f64::consts::PI.sqrt()).abs() < 1e-12);
}

#[test]
fn t_crps_matches_generic_quadrature() {
    for &(nu, mu, s2, y) in &[(3.0, 0.0, 1.0, 0.5), (18.0, 1.0, 2.0, -3.0), (2.5, -1.0, 0.3, 4.0)] {
        let d: PredictiveDist = StudentT::new(nu, mu, s2).unwrap().into();
        let a = crps(&d, y).unwrap();
        let b = crps_numerical(&d, y).unwrap();
        assert!((a - b).abs() < 1e-7, "nu {nu}: {a} vs {b}");
    }
}

#[test]
fn calibrated_forecasts_give_flat_histogram_and_nominal_coverage() {
    let mut rng = stream(2);
    let mut pits = Vec::new();
    let mut dists = Vec::new();
    let mut ys = Vec::new();
    for i in 0..20_000 {
        let d: PredictiveDist = if i % 2 == 0 {
            Normal::new(0.1 * (i % 7) as f64, 1.5).unwrap().into()
        } else {
            StudentT::new(5.0, -0.3, 0.8).unwrap().into()
        };
        let y = d.sample(&mut rng, 1)[0];
        pits.push(pit(&d, y));
        dists.push(d);
        ys.push(y);
    }
    let h = pit_histogram(&pits).unwrap();
    assert_eq!(h.counts.iter().sum::<u64>(), 20_000);
    // 0.999 quantile of chi-square(19).
    assert!(h.chi_square() < 43.82, "chi2 {}", h.chi_square());
    for level in [0.5, 0.9] {
        let cov = interval_coverage(&dists, &ys, level).unwrap();
        assert!((cov - level).abs() < 0.015, "level {level}: {cov}");
    }
}

#[test]
fn pit_bins_edges_go_low() {
    assert_eq!(PitHistogram::bin_of(0.0), 0);
    assert_eq!(PitHistogram::bin_of(0.05), 0);
    assert_eq!(PitHistogram::bin_of(0.050_000_1), 1);
    assert_eq!(PitHistogram::bin_of(1.0), PIT_BINS - 1);
    assert!(pit_histogram(&[1.2]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normal_crps_is_nonnegative_and_minimized_at_center(mu in -5.0..5.0f64, s2 in 0.01..10.0f64, dy in -5.0..5.0f64) {
        let d: PredictiveDist = Normal::new(mu, s2).unwrap().into();
        let at = crps(&d, mu + dy).unwrap();
        prop_assert!(at >= 0.0);
        prop_assert!(crps(&d, mu).unwrap() <= at + 1e-15);
    }

    #[test]
    fn ignorance_is_minus_log2_density(mu in -5.0..5.0f64, s2 in 0.01..10.0f64, y in -8.0..8.0f64, nu in 1.5..40.0f64) {
        for d in [PredictiveDist::from(Normal::new(mu, s2).unwrap()), StudentT::new(nu, mu, s2).unwrap().into()] {
            prop_assume!(d.pdf(y) > 1e-300);
            let ign = ignorance(&d, y).unwrap();
            prop_assert!((ign + d.pdf(y).log2()).abs() < 1e-9 * (1.0 + ign.abs()));
        }
    }
}
