//! Monte Carlo simulation of the variance processes, used as an independent
//! check on the closed forms.
//!
//! Every path draws from its own ChaCha stream keyed by `(seed, path)`, and
//! ensemble statistics are reduced with pairwise summation, so results do
//! not depend on the rayon schedule or the thread count.

mod bns;
mod heston;
mod prices;
mod rng;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genvar::{det_sigma1_from_variances, det_sigma2_from_variances};
use crate::params::CorrelationMatrix;

pub use self::bns::{estimate_bns_realized_variance, simulate_bns};
pub use self::heston::{estimate_heston_realized_variance, simulate_heston};
pub use self::prices::{simulate_bns_prices, simulate_heston_prices, PricePathConfig};
pub use self::rng::path_rng;

/// Discretization of the CIR variance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Full truncation with the mean-reversion drift integrated exactly
    /// over the step: `v' = theta2 + (v+ - theta2) e^{-k dt} + gamma sqrt(v+ dt) Z`.
    #[default]
    FullTruncationExpDrift,
    /// Plain full-truncation Euler: `v' = v + k (theta2 - v+) dt + gamma sqrt(v+ dt) Z`.
    FullTruncationEuler,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Requested step in years. The grid uses `horizon / ceil(horizon / dt)`.
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Keep every `record_stride`-th grid point in a stored ensemble.
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

impl SimConfig {
    pub fn new(n_paths: usize, dt: f64, horizon: f64, seed: u64) -> Result<Self> {
        let cfg = SimConfig {
            n_paths,
            dt,
            horizon,
            seed,
            scheme: Scheme::default(),
            record_stride: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("n_paths must be at least 1".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(Error::InvalidConfig(format!(
                "dt must satisfy 0 < dt <= horizon, got dt = {} and horizon = {}",
                self.dt, self.horizon
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidConfig("record_stride must be at least 1".into()));
        }
        let steps = self.n_steps();
        if !steps.is_multiple_of(self.record_stride) {
            return Err(Error::InvalidConfig(format!(
                "record_stride {} does not divide the {steps} steps",
                self.record_stride
            )));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        // Tolerate horizon/dt landing a hair above an integer.
        ((self.horizon / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_steps() as f64
    }

    fn recorded_times(&self) -> Vec<f64> {
        let h = self.step();
        let n = self.n_steps();
        (0..=n).step_by(self.record_stride).map(|i| i as f64 * h).collect()
    }
}

/// One jump of the common return subordinator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpMark {
    /// Calendar time of the jump.
    pub time: f64,
    pub size: f64,
}

/// Stored variance paths, laid out as `[path][time][asset]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    times: Vec<f64>,
    n_assets: usize,
    n_paths: usize,
    variances: Vec<f64>,
    jump_marks: Option<Vec<Vec<JumpMark>>>,
}

impl PathEnsemble {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    /// Variances of one path, one row of `n_assets` values per grid time.
    pub fn path(&self, p: usize) -> &[f64] {
        let len = self.times.len() * self.n_assets;
        &self.variances[p * len..(p + 1) * len]
    }

    pub fn variance(&self, path: usize, time: usize, asset: usize) -> f64 {
        self.variances[(path * self.times.len() + time) * self.n_assets + asset]
    }

    /// All paths' values of one asset at one grid index.
    pub fn cross_section(&self, time: usize, asset: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.variance(p, time, asset)).collect()
    }

    /// Common-jump records per path; `None` for Heston ensembles.
    pub fn jump_marks(&self) -> Option<&[Vec<JumpMark>]> {
        self.jump_marks.as_deref()
    }

    /// Writes `path,t,v_1,...,v_n`, one row per path and grid time.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["path".to_string(), "t".to_string()];
        header.extend((1..=self.n_assets).map(|i| format!("v_{i}")));
        w.write_record(&header)?;
        let mut row = Vec::with_capacity(self.n_assets + 2);
        for p in 0..self.n_paths {
            for (ti, t) in self.times.iter().enumerate() {
                row.clear();
                row.push(p.to_string());
                row.push(t.to_string());
                for a in 0..self.n_assets {
                    row.push(self.variance(p, ti, a).to_string());
                }
                w.write_record(&row)?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

impl McEstimate {
    /// Sample mean and standard error of independent draws.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return McEstimate {
                mean: f64::NAN,
                std_error: f64::NAN,
                n_paths: 0,
            };
        }
        let mean = pairwise_sum(xs) / n as f64;
        let std_error = if n > 1 {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        McEstimate {
            mean,
            std_error,
            n_paths: n,
        }
    }

    /// `|mean - target|` measured in standard errors. Infinite when the
    /// estimate has no spread but misses the target.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.mean - target).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.std_error
        }
    }
}

/// Sample variance of draws together with its standard error,
/// `sqrt((m4 - s^4) / N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub variance: f64,
    pub std_error: f64,
}

impl VarianceEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = pairwise_sum(xs) / n;
        let d2: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
        let d4: Vec<f64> = d2.iter().map(|d| d * d).collect();
        let m2 = pairwise_sum(&d2) / n;
        let m4 = pairwise_sum(&d4) / n;
        VarianceEstimate {
            variance: m2 * n / (n - 1.0),
            std_error: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
        }
    }
}

/// Sum with `O(log n)` error growth; fixed association for reproducibility.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Common-jump loading needed to evaluate `|Sigma2|` on BNS paths.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpLoading {
    pub rho: Vec<f64>,
    pub lambda: f64,
    pub kappa2_star: f64,
}

/// Instantaneous generalized variance from one grid row of variances.
pub(crate) fn generalized_variance(
    variances: &[f64],
    corr: &CorrelationMatrix<f64>,
    jump: Option<&JumpLoading>,
) -> Result<f64> {
    match jump {
        Some(j) if j.lambda * j.kappa2_star != 0.0 && j.rho.iter().any(|&r| r != 0.0) => {
            det_sigma2_from_variances(variances, corr, &j.rho, j.lambda, j.kappa2_star)
        }
        _ => det_sigma1_from_variances(variances, corr),
    }
}

/// Trapezoidal time average of `f(t_i)` over the grid.
pub(crate) fn trapezoid_mean(times: &[f64], values: impl Iterator<Item = f64>) -> f64 {
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (&t, v) in times.iter().zip(values) {
        if let Some((t0, v0)) = prev {
            acc += 0.5 * (t - t0) * (v0 + v);
        }
        prev = Some((t, v));
    }
    acc / (times[times.len() - 1] - times[0])
}

/// Ensemble estimate of `E[(1/T) int_0^T |Sigma_t| dt]` from stored paths.
///
/// Passing `jump` switches from `|Sigma1|` to `|Sigma2|`.
pub fn mc_realized_variance(
    ensemble: &PathEnsemble,
    corr: &CorrelationMatrix<f64>,
    jump: Option<&JumpLoading>,
) -> Result<McEstimate> {
    let n = ensemble.n_assets;
    if corr.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: corr.n(),
        });
    }
    if let Some(j) = jump {
        if j.rho.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: j.rho.len(),
            });
        }
    }
    if ensemble.times.len() < 2 {
        return Err(Error::InvalidConfig("ensemble grid needs at least two times".into()));
    }
    let mut averages = Vec::with_capacity(ensemble.n_paths);
    for p in 0..ensemble.n_paths {
        let dets = ensemble
            .path(p)
            .chunks_exact(n)
            .map(|row| positive_floor_det(row, corr, jump))
            .collect::<Result<Vec<_>>>()?;
        averages.push(trapezoid_mean(&ensemble.times, dets.into_iter()));
    }
    Ok(McEstimate::from_samples(&averages))
}

// Truncated CIR paths can sit exactly at zero; the generalized variance is
// then zero for |Sigma1| and, with a jump loading, the limit of |Sigma2|.
pub(crate) fn positive_floor_det(
    row: &[f64],
    corr: &CorrelationMatrix<f64>,
    jump: Option<&JumpLoading>,
) -> Result<f64> {
    if row.iter().all(|&v| v > 0.0) {
        generalized_variance(row, corr, jump)
    } else {
        match jump {
            Some(j) if j.rho.iter().any(|&r| r != 0.0) && j.lambda * j.kappa2_star != 0.0 => {
                let s: Vec<f64> = row.iter().map(|v| v.max(0.0).sqrt()).collect();
                let scale = j.lambda * j.kappa2_star;
                crate::linalg::Matrix::from_fn(row.len(), row.len(), |l, m| {
                    s[l] * corr.get(l, m) * s[m] + scale * j.rho[l] * j.rho[m]
                })
                .determinant()
            }
            _ => det_sigma1_from_variances(row, corr),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(0, 0.01, 1.0, 1).is_err());
        assert!(SimConfig::new(1, 2.0, 1.0, 1).is_err());
        assert!(SimConfig::new(1, 0.0, 1.0, 1).is_err());
        let cfg = SimConfig::new(1, 0.001, 1.0, 1).unwrap();
        assert_eq!(cfg.n_steps(), 1000);
        let cfg = SimConfig::new(1, 0.3, 1.0, 1).unwrap();
        assert_eq!(cfg.n_steps(), 4);
        assert!((cfg.step() - 0.25).abs() < 1e-15);
        let bad = SimConfig {
            record_stride: 3,
            ..cfg
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
    }

    #[test]
    fn estimate_of_constant_has_zero_error() {
        let e = McEstimate::from_samples(&[2.0; 10]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.std_error, 0.0);
        assert_eq!(e.z_score(2.0), 0.0);
    }

    #[test]
    fn standard_error_of_two_points() {
        // Sample sd of {0, 2} is sqrt(2); se = sqrt(2)/sqrt(2) = 1.
        let e = McEstimate::from_samples(&[0.0, 2.0]);
        assert_eq!(e.mean, 1.0);
        assert!((e.std_error - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let t: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let m = trapezoid_mean(&t, t.iter().map(|x| 3.0 * x + 1.0));
        assert!((m - 2.5).abs() < 1e-14);
    }
}
