use approx::assert_relative_eq;
use mvswap::bns::{expected_realized_variance_bns, expected_variance_bns, BnsPricingOptions};
use mvswap::genvar::{build_sigma2, det_sigma2, det_sigma2_lemma, InstantaneousVols};
use mvswap::heston::{expected_realized_variance, expected_realized_variance_quadrature, HestonPortfolio};
use mvswap::params::{BnsAssetParams, BnsPortfolioParams, CorrelationMatrix, HestonAssetParams, SwapContract};
use mvswap::quadrature::{integrate, QuadOptions};
use mvswap::{HestonPortfolioF32, HestonPortfolioF64};

fn corr_rows() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.4, -0.1], vec![0.4, 1.0, 0.3], vec![-0.1, 0.3, 1.0]]
}

fn heston() -> HestonPortfolioF64 {
    let assets = vec![
        HestonAssetParams::new(1.2, 0.05, 0.09, 0.4).unwrap(),
        HestonAssetParams::new(4.0, 0.02, 0.01, 0.2).unwrap(),
        HestonAssetParams::new(0.7, 0.08, 0.08, 0.5).unwrap(),
    ];
    HestonPortfolio::new(assets, CorrelationMatrix::from_rows(&corr_rows()).unwrap()).unwrap()
}

#[test]
fn heston_closed_form_matches_quadrature() {
    let p = heston();
    for t in [0.05, 0.5, 1.0, 7.0] {
        let closed = expected_realized_variance(t, &p).unwrap();
        let quad = expected_realized_variance_quadrature(t, &p, &QuadOptions::default()).unwrap();
        assert_relative_eq!(closed, quad, max_relative = 1e-10);
    }
}

#[test]
fn single_precision_tracks_double() {
    let p64 = heston();
    let json = serde_json::to_string(&p64.assets).unwrap();
    let assets: Vec<HestonAssetParams<f32>> = serde_json::from_str(&json).unwrap();
    let rows: Vec<Vec<f32>> = corr_rows()
        .iter()
        .map(|r| r.iter().map(|&x| x as f32).collect())
        .collect();
    let p32: HestonPortfolioF32 = HestonPortfolio::new(assets, CorrelationMatrix::from_rows(&rows).unwrap()).unwrap();
    let a = expected_realized_variance(1.0f64, &p64).unwrap();
    let b = expected_realized_variance(1.0f32, &p32).unwrap();
    assert_relative_eq!(a, b as f64, max_relative = 1e-5);
}

#[test]
fn params_survive_a_json_round_trip() {
    let p = heston();
    let json = serde_json::to_string(&p.assets).unwrap();
    let back: Vec<HestonAssetParams<f64>> = serde_json::from_str(&json).unwrap();
    assert_eq!(back, p.assets);
    let c: CorrelationMatrix<f64> = serde_json::from_str(&serde_json::to_string(&p.corr).unwrap()).unwrap();
    assert_eq!(c.det(), p.corr.det());
}

fn bns(rho: f64) -> BnsPortfolioParams<f64> {
    let assets = vec![
        BnsAssetParams::new(0.06, 0.04, 0.002, rho).unwrap(),
        BnsAssetParams::new(0.02, 0.05, 0.004, rho).unwrap(),
        BnsAssetParams::new(0.04, 0.03, 0.001, rho).unwrap(),
    ];
    BnsPortfolioParams::new(assets, 1.5, 0.02).unwrap()
}

#[test]
fn bns_without_leverage_integrates_the_mean_variances() {
    let p = bns(0.0);
    let corr = CorrelationMatrix::from_rows(&corr_rows()).unwrap();
    let t = 2.0;
    let integrand = |s: f64| {
        p.assets
            .iter()
            .map(|a| expected_variance_bns(s, a, p.lambda).unwrap())
            .product::<f64>()
    };
    let q = integrate(integrand, 0.0, t, &QuadOptions::default()).unwrap().value;
    let want = corr.det() / t * q;
    let got = expected_realized_variance_bns(t, &p, &corr, &BnsPricingOptions::default()).unwrap();
    assert_relative_eq!(got, want, max_relative = 1e-10);
}

#[test]
fn negative_leverage_raises_the_expectation() {
    let corr = CorrelationMatrix::from_rows(&corr_rows()).unwrap();
    let opts = BnsPricingOptions::default();
    let base = expected_realized_variance_bns(1.0, &bns(0.0), &corr, &opts).unwrap();
    let lev = expected_realized_variance_bns(1.0, &bns(-0.6), &corr, &opts).unwrap();
    assert!(lev > base, "{lev} <= {base}");
}

#[test]
fn lemma_agrees_with_the_explicit_matrix() {
    let corr = CorrelationMatrix::from_rows(&corr_rows()).unwrap();
    let vols = InstantaneousVols::new(vec![0.3, 0.15, 0.22]).unwrap();
    let rho = [-0.4, -0.1, -0.7];
    let direct = build_sigma2(&vols, &corr, &rho, 2.0, 0.05)
        .unwrap()
        .determinant()
        .unwrap();
    let expanded = det_sigma2(&vols, &corr, &rho, 2.0, 0.05).unwrap();
    let lemma = det_sigma2_lemma(&vols, &corr, &rho, 2.0, 0.05).unwrap();
    assert_relative_eq!(expanded, direct, max_relative = 1e-12);
    assert_relative_eq!(lemma, direct, max_relative = 1e-12);
}

#[test]
fn at_the_money_swap_is_worth_nothing() {
    let p = heston();
    let ev = expected_realized_variance(0.75, &p).unwrap();
    let atm = SwapContract::new(ev, 0.04, 0.75, 1e6).unwrap();
    assert_eq!(atm.price(ev).unwrap(), 0.0);
    let otm = SwapContract::new(0.0, 0.04, 0.75, 1e6).unwrap();
    assert_relative_eq!(
        otm.price(ev).unwrap(),
        1e6 * (-0.03f64).exp() * ev,
        max_relative = 1e-14
    );
}
