//! Daily close simulation, only used to exercise the data pipeline end to
//! end. Drift is irrelevant there, so no jump compensator is applied.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::bns::{common_driver, variance_drivers, OuPath};
use super::heston::{run_path, CirStep};
use super::rng::{stream_rng, Stream};
use super::Scheme;
use crate::error::{Error, Result};
use crate::heston::HestonPortfolio;
use crate::linalg::Matrix;
use crate::params::{BnsPortfolioParams, CorrelationMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePathConfig {
    pub n_days: usize,
    pub steps_per_day: usize,
    /// Trading days per year.
    pub days_per_year: f64,
    pub initial_prices: Vec<f64>,
    pub rate: f64,
    pub seed: u64,
}

impl PricePathConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if self.n_days == 0 || self.steps_per_day == 0 {
            return Err(Error::InvalidConfig("n_days and steps_per_day must be positive".into()));
        }
        if !(self.days_per_year > 0.0) {
            return Err(Error::InvalidConfig("days_per_year must be positive".into()));
        }
        if self.initial_prices.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.initial_prices.len(),
            });
        }
        if self.initial_prices.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidConfig("initial prices must be positive".into()));
        }
        Ok(())
    }

    fn h(&self) -> f64 {
        1.0 / (self.days_per_year * self.steps_per_day as f64)
    }
}

fn correlation_factor(corr: &CorrelationMatrix<f64>) -> Result<Matrix<f64>> {
    corr.matrix()
        .cholesky()?
        .ok_or_else(|| Error::InvalidConfig("price simulation needs a positive definite correlation".into()))
}

/// Accumulates correlated log-returns and records the close of every day.
struct Recorder<'a> {
    cfg: &'a PricePathConfig,
    chol: Matrix<f64>,
    /// Cumulative log-return since the start.
    log_s: Vec<f64>,
    prev_v: Vec<f64>,
    z: Vec<f64>,
    closes: Vec<f64>,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a PricePathConfig, corr: &CorrelationMatrix<f64>) -> Result<Self> {
        let n = corr.n();
        Ok(Recorder {
            cfg,
            chol: correlation_factor(corr)?,
            log_s: vec![0.0; n],
            prev_v: vec![0.0; n],
            z: vec![0.0; n],
            closes: Vec::with_capacity((cfg.n_days + 1) * n),
        })
    }

    fn visit(&mut self, i: usize, v: &[f64], rng: &mut impl Rng, jump: impl Fn(usize) -> f64) {
        let h = self.cfg.h();
        if i > 0 {
            for z in self.z.iter_mut() {
                *z = rng.sample(StandardNormal);
            }
            let n = self.z.len();
            for a in 0..n {
                let mut w = 0.0;
                for b in 0..=a {
                    w += self.chol[(a, b)] * self.z[b];
                }
                let vp = self.prev_v[a].max(0.0);
                self.log_s[a] += (self.cfg.rate - 0.5 * vp) * h + (vp * h).sqrt() * w + jump(a);
            }
        }
        self.prev_v.copy_from_slice(v);
        if i.is_multiple_of(self.cfg.steps_per_day) {
            let s0 = &self.cfg.initial_prices;
            self.closes.extend(self.log_s.iter().zip(s0).map(|(l, s)| s * l.exp()));
        }
    }

    fn finish(self) -> Result<Matrix<f64>> {
        let n = self.log_s.len();
        Matrix::from_row_slice(self.cfg.n_days + 1, n, &self.closes)
    }
}

/// Daily closes under correlated Heston dynamics, `(n_days + 1) x n`.
pub fn simulate_heston_prices(portfolio: &HestonPortfolio<f64>, cfg: &PricePathConfig) -> Result<Matrix<f64>> {
    portfolio.validate()?;
    cfg.validate(portfolio.n())?;
    let h = cfg.h();
    let steps: Vec<CirStep> = portfolio
        .assets
        .iter()
        .map(|a| CirStep::new(a, h, Scheme::FullTruncationExpDrift))
        .collect();
    let mut state: Vec<f64> = portfolio.assets.iter().map(|a| a.sigma0_2).collect();
    let mut out = vec![0.0; state.len()];
    let mut rec = Recorder::new(cfg, &portfolio.corr)?;
    let mut rng = stream_rng(cfg.seed, 0, Stream::Returns);
    run_path(
        &steps,
        cfg.n_days * cfg.steps_per_day,
        cfg.seed,
        0,
        &mut state,
        &mut out,
        |i, v| rec.visit(i, v, &mut rng, |_| 0.0),
    );
    rec.finish()
}

/// Daily closes under BNS dynamics with Brownian correlation `corr` and the
/// common jump loaded by each asset's `rho`.
pub fn simulate_bns_prices(
    p: &BnsPortfolioParams<f64>,
    corr: &CorrelationMatrix<f64>,
    cfg: &PricePathConfig,
) -> Result<Matrix<f64>> {
    p.validate()?;
    cfg.validate(p.n())?;
    if corr.n() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            found: corr.n(),
        });
    }
    let drivers = variance_drivers(p)?;
    let n_steps = cfg.n_days * cfg.steps_per_day;
    let h = cfg.h();
    let marks = match common_driver(p)? {
        Some(d) => d.marks(n_steps as f64 * h, &mut stream_rng(cfg.seed, 0, Stream::CommonJump)),
        None => Vec::new(),
    };
    let rho = p.rho();
    let ou = OuPath {
        drivers: &drivers,
        lambda: p.lambda,
        h,
        n_steps,
    };
    let mut v: Vec<f64> = p.assets.iter().map(|a| a.sigma0_2).collect();
    let mut next = vec![0.0; v.len()];
    let mut rec = Recorder::new(cfg, corr)?;
    let mut ret_rng = stream_rng(cfg.seed, 0, Stream::Returns);
    let mut var_rng = stream_rng(cfg.seed, 0, Stream::Variance);
    let mut cursor = 0;
    ou.run(&mut var_rng, &mut v, &mut next, |i, v| {
        let t1 = i as f64 * h;
        let start = cursor;
        while cursor < marks.len() && marks[cursor].time <= t1 {
            cursor += 1;
        }
        let dz: f64 = marks[start..cursor].iter().map(|m| m.size).sum();
        rec.visit(i, v, &mut ret_rng, |a| rho[a] * dz);
    });
    rec.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{BnsAssetParams, HestonAssetParams};

    fn config() -> PricePathConfig {
        PricePathConfig {
            n_days: 30,
            steps_per_day: 4,
            days_per_year: 252.0,
            initial_prices: vec![100.0, 50.0, 20.0],
            rate: 0.0,
            seed: 42,
        }
    }

    #[test]
    fn heston_prices_have_expected_shape_and_are_reproducible() {
        let corr = CorrelationMatrix::equicorrelated(3, 0.4).unwrap();
        let assets = vec![HestonAssetParams::new(2.0, 0.04, 0.04, 0.2).unwrap(); 3];
        let p = HestonPortfolio::new(assets, corr).unwrap();
        let a = simulate_heston_prices(&p, &config()).unwrap();
        assert_eq!((a.rows(), a.cols()), (31, 3));
        assert_eq!(a.row(0), &[100.0, 50.0, 20.0]);
        assert!(a.as_slice().iter().all(|&s| s > 0.0));
        assert_eq!(a, simulate_heston_prices(&p, &config()).unwrap());
    }

    #[test]
    fn bns_prices_require_a_definite_correlation() {
        let assets = vec![
            BnsAssetParams::new(0.04, 0.04, 0.002, -0.3)
                .unwrap()
                .with_matched_subordinator()
                .unwrap();
            3
        ];
        let p = BnsPortfolioParams::new(assets, 1.5, 0.01).unwrap();
        let ok = CorrelationMatrix::equicorrelated(3, 0.2).unwrap();
        let m = simulate_bns_prices(&p, &ok, &config()).unwrap();
        assert_eq!(m.rows(), 31);
        let singular = CorrelationMatrix::equicorrelated(3, 1.0).unwrap();
        assert!(simulate_bns_prices(&p, &singular, &config()).is_err());
    }
}
