//! Closed-form multivariate variance swap under independent Heston
//! variances.
//!
//! Each variance is a CIR process, so `E[sigma_t^2] = e^{-kt}(sigma_0^2 -
//! theta^2) + theta^2` regardless of the vol-of-vol. With independent
//! variance drivers, `E|Sigma1| = |C| prod_i E[(sigma_t^i)^2]`, and the
//! expected realized generalized variance is the time average of that
//! product over `[0, T]`.
//!
//! The three-asset product expands into eight exponentials with rates drawn
//! from the subset sums of `(k1, k2, k3)`. Each one integrates to
//! `(1 - e^{-aT}) / a`; the bracket sits around the numerator, which the
//! quadrature oracle in the tests confirms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{CorrelationMatrix, HestonAssetParams, SwapContract};
use crate::quadrature::{integrate, QuadOptions};
use crate::scalar::{decay_integral, Scalar};

/// Heston portfolio: per-asset parameters plus the return correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct HestonPortfolio<S> {
    pub assets: Vec<HestonAssetParams<S>>,
    pub corr: CorrelationMatrix<S>,
}

impl<S: Scalar> HestonPortfolio<S> {
    pub fn new(assets: Vec<HestonAssetParams<S>>, corr: CorrelationMatrix<S>) -> Result<Self> {
        let p = HestonPortfolio { assets, corr };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.assets.len() != self.corr.n() {
            return Err(Error::DimensionMismatch {
                expected: self.corr.n(),
                found: self.assets.len(),
            });
        }
        self.assets.iter().try_for_each(HestonAssetParams::validate)
    }

    pub fn n(&self) -> usize {
        self.assets.len()
    }

    fn three(&self) -> Result<[&HestonAssetParams<S>; 3]> {
        match self.assets.as_slice() {
            [a, b, c] => Ok([a, b, c]),
            other => Err(Error::WrongAssetCount {
                expected: 3,
                found: other.len(),
            }),
        }
    }
}

fn check_time<S: Scalar>(t: S) -> Result<()> {
    if t >= S::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeTime(t.to_f64().unwrap_or(f64::NAN)))
    }
}

fn check_maturity<S: Scalar>(t: S) -> Result<()> {
    if t > S::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveMaturity(t.to_f64().unwrap_or(f64::NAN)))
    }
}

/// `E[sigma_t^2] = e^{-kt}(sigma_0^2 - theta^2) + theta^2`.
pub fn expected_variance<S: Scalar>(t: S, p: &HestonAssetParams<S>) -> Result<S> {
    check_time(t)?;
    p.validate()?;
    Ok((-p.k * t).exp() * (p.sigma0_2 - p.theta2) + p.theta2)
}

/// The eight (rate, coefficient) pairs of the three-asset product
/// `prod_i (e^{-k_i t} d_i + theta_i^2)` with `d_i = sigma0_i^2 - theta_i^2`.
fn product_terms<S: Scalar>(a: [&HestonAssetParams<S>; 3]) -> [(S, S); 8] {
    let [p1, p2, p3] = a;
    let (k1, k2, k3) = (p1.k, p2.k, p3.k);
    let (d1, d2, d3) = (
        p1.sigma0_2 - p1.theta2,
        p2.sigma0_2 - p2.theta2,
        p3.sigma0_2 - p3.theta2,
    );
    let (t1, t2, t3) = (p1.theta2, p2.theta2, p3.theta2);
    [
        (k3 + k2 + k1, d3 * d2 * d1),
        (k3 + k2, d3 * d2 * t1),
        (k3 + k1, d3 * d1 * t2),
        (k2 + k1, d2 * d1 * t3),
        (k3, d3 * t2 * t1),
        (k2, d2 * t3 * t1),
        (k1, d1 * t3 * t2),
        (S::zero(), t3 * t2 * t1),
    ]
}

/// `prod_{i=1}^3 E[(sigma_t^i)^2]` through its eight-term exponential
/// expansion.
pub fn expected_product<S: Scalar>(t: S, portfolio: &HestonPortfolio<S>) -> Result<S> {
    check_time(t)?;
    let assets = portfolio.three()?;
    assets.iter().try_for_each(|a| a.validate())?;
    Ok(product_terms(assets)
        .iter()
        .map(|&(rate, coef)| coef * (-rate * t).exp())
        .sum())
}

/// `E[sigma_R^2] = (|C|/T) int_0^T prod_i E[(sigma_t^i)^2] dt` in closed
/// form, three assets.
pub fn expected_realized_variance<S: Scalar>(maturity: S, portfolio: &HestonPortfolio<S>) -> Result<S> {
    check_maturity(maturity)?;
    portfolio.validate()?;
    let assets = portfolio.three()?;
    let integral: S = product_terms(assets)
        .iter()
        .map(|&(rate, coef)| coef * decay_integral(rate, maturity))
        .sum();
    Ok(portfolio.corr.det() / maturity * integral)
}

/// Same expectation for any number of assets, integrating
/// `|C| prod_i E[(sigma_t^i)^2]` numerically.
pub fn expected_realized_variance_quadrature<S: Scalar>(
    maturity: S,
    portfolio: &HestonPortfolio<S>,
    opts: &QuadOptions<S>,
) -> Result<S> {
    check_maturity(maturity)?;
    portfolio.validate()?;
    let assets = &portfolio.assets;
    let integrand = |t: S| {
        assets.iter().fold(S::one(), |acc, p| {
            acc * ((-p.k * t).exp() * (p.sigma0_2 - p.theta2) + p.theta2)
        })
    };
    let q = integrate(integrand, S::zero(), maturity, opts)?;
    Ok(portfolio.corr.det() / maturity * q.value)
}

/// `N e^{-rT} (E[sigma_R^2] - K_var)`.
pub fn price_swap<S: Scalar>(ev_realized: S, contract: &SwapContract<S>) -> Result<S> {
    contract.price(ev_realized)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn asset(k: f64, theta2: f64, sigma0_2: f64) -> HestonAssetParams<f64> {
        HestonAssetParams::new(k, theta2, sigma0_2, 0.3).unwrap()
    }

    fn portfolio(assets: Vec<HestonAssetParams<f64>>, rho: f64) -> HestonPortfolio<f64> {
        HestonPortfolio::new(assets, CorrelationMatrix::equicorrelated(3, rho).unwrap()).unwrap()
    }

    #[test]
    fn expected_variance_examples() {
        let p = asset(2.0, 0.09, 0.04);
        assert_eq!(expected_variance(0.0, &p).unwrap(), 0.04);
        let stationary = asset(2.0, 0.09, 0.09);
        for t in [0.0, 0.3, 5.0, 100.0] {
            assert!((expected_variance(t, &stationary).unwrap() - 0.09).abs() < 1e-17);
        }
        // 0.09 - 0.05 e^{-1}, evaluated independently to 17 digits.
        assert!((expected_variance(0.5, &p).unwrap() - 0.071_606_027_941_427_88).abs() < 1e-16);
        assert!(matches!(expected_variance(-1.0, &p), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn expected_product_examples() {
        let stat = portfolio(
            vec![asset(1.0, 0.04, 0.04), asset(3.0, 0.09, 0.09), asset(6.0, 0.01, 0.01)],
            0.2,
        );
        let v = expected_product(0.7, &stat).unwrap();
        assert!((v - 0.04 * 0.09 * 0.01).abs() < 1e-18);
        let p = portfolio(
            vec![asset(1.0, 0.04, 0.06), asset(3.0, 0.09, 0.02), asset(6.0, 0.01, 0.03)],
            0.2,
        );
        assert!((expected_product(0.0, &p).unwrap() - 0.06 * 0.02 * 0.03).abs() < 1e-18);
        let two = HestonPortfolio::new(
            vec![asset(1.0, 0.04, 0.06), asset(3.0, 0.09, 0.02)],
            CorrelationMatrix::identity(2).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            expected_product(0.5, &two),
            Err(Error::WrongAssetCount { .. })
        ));
    }

    #[test]
    fn expected_realized_variance_examples() {
        let stat = portfolio(
            vec![asset(1.0, 0.04, 0.04), asset(3.0, 0.09, 0.09), asset(6.0, 0.01, 0.01)],
            0.3,
        );
        let det_c = stat.corr.det();
        for t in [0.1, 1.0, 7.0] {
            let ev = expected_realized_variance(t, &stat).unwrap();
            assert!(((ev - det_c * 0.04 * 0.09 * 0.01) / ev).abs() < 1e-14);
        }
        let singular = portfolio(vec![asset(1.0, 0.04, 0.05); 3], 1.0);
        assert_eq!(expected_realized_variance(1.0, &singular).unwrap(), 0.0);
        assert!(matches!(
            expected_realized_variance(0.0, &stat),
            Err(Error::NonPositiveMaturity(_))
        ));
    }

    #[test]
    fn long_maturity_limit() {
        let p = portfolio(
            vec![asset(0.5, 0.04, 0.09), asset(2.0, 0.09, 0.02), asset(4.0, 0.02, 0.05)],
            0.1,
        );
        let t = 200.0 / 0.5;
        let limit = p.corr.det() * 0.04 * 0.09 * 0.02;
        // The transients contribute O(1/T), so T = 200/min(k) lands close.
        let ev = expected_realized_variance(t, &p).unwrap();
        assert!(((ev - limit) / limit).abs() < 1e-2);
        let ev = expected_realized_variance(1e8, &p).unwrap();
        assert!(((ev - limit) / limit).abs() < 1e-6);
    }

    #[test]
    fn price_examples() {
        let c = SwapContract::new(0.03_f64, 0.02, 1.0, 1.0).unwrap();
        assert!((price_swap(0.05, &c).unwrap() - 0.019_603_973_466_135_105).abs() < 1e-16);
        assert_eq!(price_swap(0.03, &c).unwrap(), 0.0);
    }

    #[test]
    fn gamma_does_not_enter_the_price() {
        let mut assets = vec![asset(1.0, 0.04, 0.06), asset(3.0, 0.09, 0.02), asset(6.0, 0.01, 0.03)];
        let a = expected_realized_variance(1.3, &portfolio(assets.clone(), 0.4)).unwrap();
        for (i, p) in assets.iter_mut().enumerate() {
            p.gamma = 0.05 + i as f64;
        }
        let b = expected_realized_variance(1.3, &portfolio(assets, 0.4)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn quadrature_path_for_general_n() {
        let p = portfolio(
            vec![asset(1.0, 0.04, 0.06), asset(3.0, 0.09, 0.02), asset(6.0, 0.01, 0.03)],
            0.4,
        );
        let opts = QuadOptions {
            abs_tol: 0.0,
            rel_tol: 1e-13,
            max_intervals: 500,
        };
        let closed = expected_realized_variance(0.8, &p).unwrap();
        let quad = expected_realized_variance_quadrature(0.8, &p, &opts).unwrap();
        assert!(((closed - quad) / closed).abs() < 1e-12);
        let four = HestonPortfolio::new(
            vec![asset(1.0, 0.04, 0.04); 4],
            CorrelationMatrix::equicorrelated(4, 0.1).unwrap(),
        )
        .unwrap();
        let v = expected_realized_variance_quadrature(2.0, &four, &opts).unwrap();
        assert!(((v - four.corr.det() * 0.04_f64.powi(4)) / v).abs() < 1e-12);
    }

    #[test]
    fn single_precision_instantiation() {
        let a = HestonAssetParams::new(2.0_f32, 0.09, 0.04, 0.3).unwrap();
        let p = HestonPortfolio::new(vec![a; 3], CorrelationMatrix::identity(3).unwrap()).unwrap();
        let v32 = expected_realized_variance(1.0_f32, &p).unwrap();
        let a64 = HestonAssetParams::new(2.0_f64, 0.09, 0.04, 0.3).unwrap();
        let p64 = HestonPortfolio::new(vec![a64; 3], CorrelationMatrix::identity(3).unwrap()).unwrap();
        let v64 = expected_realized_variance(1.0_f64, &p64).unwrap();
        assert!(((v32 as f64 - v64) / v64).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn expansion_equals_direct_product(
            k in prop::collection::vec(0.1..10.0_f64, 3),
            th in prop::collection::vec(0.001..1.0_f64, 3),
            s0 in prop::collection::vec(0.001..1.0_f64, 3),
            t in 0.0..5.0_f64,
        ) {
            let assets: Vec<_> = (0..3).map(|i| asset(k[i], th[i], s0[i])).collect();
            let direct: f64 = assets.iter().map(|a| expected_variance(t, a).unwrap()).product();
            let p = portfolio(assets, 0.0);
            let exp = expected_product(t, &p).unwrap();
            // Cancellation between terms limits this to a few ulps of the
            // largest term rather than of the result.
            let scale: f64 = (0..3).map(|i| th[i].max(s0[i])).product();
            prop_assert!((exp - direct).abs() <= 1e-14 * scale.max(direct));
        }

        #[test]
        fn linear_in_det_c(rho_a in -0.4..0.9_f64, rho_b in -0.4..0.9_f64) {
            let assets = vec![asset(1.0, 0.04, 0.06), asset(3.0, 0.09, 0.02), asset(6.0, 0.01, 0.03)];
            let pa = portfolio(assets.clone(), rho_a);
            let pb = portfolio(assets, rho_b);
            let ea = expected_realized_variance(1.0, &pa).unwrap() / pa.corr.det();
            let eb = expected_realized_variance(1.0, &pb).unwrap() / pb.corr.det();
            prop_assert!(((ea - eb) / ea).abs() < 1e-13);
        }
    }
}
