use mvswap::bns::{expected_realized_variance_bns, BnsPricingOptions};
use mvswap::heston::{expected_realized_variance, HestonPortfolio};
use mvswap::montecarlo::{
    estimate_bns_realized_variance, estimate_heston_realized_variance, mc_realized_variance, simulate_heston, Scheme,
    SimConfig,
};
use mvswap::params::{BnsAssetParams, BnsPortfolioParams, CorrelationMatrix, HestonAssetParams};

fn corr() -> CorrelationMatrix<f64> {
    CorrelationMatrix::equicorrelated(3, 0.25).unwrap()
}

fn heston() -> HestonPortfolio<f64> {
    let assets = vec![
        HestonAssetParams::new(2.0, 0.04, 0.08, 0.25).unwrap(),
        HestonAssetParams::new(3.0, 0.06, 0.03, 0.3).unwrap(),
        HestonAssetParams::new(1.5, 0.05, 0.05, 0.2).unwrap(),
    ];
    HestonPortfolio::new(assets, corr()).unwrap()
}

#[test]
fn heston_estimate_brackets_the_closed_form() {
    let p = heston();
    let cfg = SimConfig::new(4000, 1.0 / 100.0, 1.0, 7).unwrap();
    let est = estimate_heston_realized_variance(&p, &cfg).unwrap();
    let want = expected_realized_variance(1.0, &p).unwrap();
    assert!(est.z_score(want).abs() < 4.0, "{est:?} vs {want}");
}

#[test]
fn euler_and_exp_drift_agree_statistically() {
    let p = heston();
    let mut cfg = SimConfig::new(3000, 1.0 / 200.0, 0.5, 3).unwrap();
    let a = estimate_heston_realized_variance(&p, &cfg).unwrap();
    cfg.scheme = Scheme::FullTruncationEuler;
    let b = estimate_heston_realized_variance(&p, &cfg).unwrap();
    // Same normals drive both, so the difference is mostly discretization.
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!((a.mean - b.mean).abs() < 4.0 * se);
}

#[test]
fn seeds_are_reproducible_and_distinct() {
    let p = heston();
    let cfg = SimConfig::new(200, 0.02, 0.5, 99).unwrap();
    let a = estimate_heston_realized_variance(&p, &cfg).unwrap();
    let b = estimate_heston_realized_variance(&p, &cfg).unwrap();
    assert_eq!(a, b);
    let other = SimConfig { seed: 100, ..cfg };
    assert_ne!(estimate_heston_realized_variance(&p, &other).unwrap().mean, a.mean);
}

#[test]
fn stored_paths_reproduce_the_streaming_estimate() {
    let p = heston();
    let cfg = SimConfig::new(64, 0.05, 1.0, 5).unwrap();
    let streamed = estimate_heston_realized_variance(&p, &cfg).unwrap();
    let ens = simulate_heston(&p, &cfg).unwrap();
    assert_eq!(ens.n_paths(), 64);
    assert_eq!(ens.times().len(), cfg.n_steps() + 1);
    let stored = mc_realized_variance(&ens, &p.corr, None).unwrap();
    assert_eq!(stored, streamed);
}

#[test]
fn bns_without_leverage_brackets_the_closed_form() {
    let assets = [(0.05, 0.04, 0.002), (0.03, 0.05, 0.003), (0.04, 0.03, 0.001)]
        .iter()
        .map(|&(s, k1, k2)| {
            BnsAssetParams::new(s, k1, k2, 0.0)
                .unwrap()
                .with_matched_subordinator()
                .unwrap()
        })
        .collect();
    let p = BnsPortfolioParams::new(assets, 2.0, 0.01).unwrap();
    let cfg = SimConfig::new(4000, 0.01, 1.0, 17).unwrap();
    let est = estimate_bns_realized_variance(&p, &corr(), &cfg, true).unwrap();
    let want = expected_realized_variance_bns(1.0, &p, &corr(), &BnsPricingOptions::default()).unwrap();
    assert!(est.z_score(want).abs() < 4.0, "{est:?} vs {want}");
}
