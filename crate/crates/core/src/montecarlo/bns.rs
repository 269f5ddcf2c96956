use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use rayon::prelude::*;

use super::rng::{stream_rng, Stream};
use super::{positive_floor_det, JumpLoading, JumpMark, McEstimate, PathEnsemble, SimConfig};
use crate::error::{Error, Result};
use crate::params::{BnsPortfolioParams, CorrelationMatrix, GammaOuSubordinator};

/// Compound Poisson driver in calendar time: jumps arrive at rate
/// `a lambda` with `Exp(b)` sizes.
#[derive(Debug, Clone, Copy)]
pub(super) struct JumpDriver {
    arrival: Option<Exp<f64>>,
    size: Exp<f64>,
}

impl JumpDriver {
    pub(super) fn new(sub: &GammaOuSubordinator<f64>, lambda: f64) -> Result<Self> {
        let rate = sub.a * lambda;
        let arrival = if rate > 0.0 {
            Some(Exp::new(rate).map_err(|e| Error::InvalidConfig(format!("jump rate {rate}: {e}")))?)
        } else {
            None
        };
        let size = Exp::new(sub.b).map_err(|e| Error::InvalidConfig(format!("jump size rate {}: {e}", sub.b)))?;
        Ok(JumpDriver { arrival, size })
    }

    #[inline]
    pub(super) fn next_arrival(&self, from: f64, rng: &mut ChaCha8Rng) -> f64 {
        match self.arrival {
            Some(d) => from + rng.sample(d),
            None => f64::INFINITY,
        }
    }

    #[inline]
    pub(super) fn size(&self, rng: &mut ChaCha8Rng) -> f64 {
        rng.sample(self.size)
    }

    /// Every jump in `(0, horizon]`.
    pub(super) fn marks(&self, horizon: f64, rng: &mut ChaCha8Rng) -> Vec<JumpMark> {
        let mut out = Vec::new();
        let mut t = self.next_arrival(0.0, rng);
        while t <= horizon {
            out.push(JumpMark {
                time: t,
                size: self.size(rng),
            });
            t = self.next_arrival(t, rng);
        }
        out
    }
}

/// Law of the common jump `Z*`: the configured one, or a Gamma-OU driver
/// with unit rate and `2 / b^2 = kappa2_star`.
pub(super) fn common_driver(p: &BnsPortfolioParams<f64>) -> Result<Option<JumpDriver>> {
    if p.kappa2_star == 0.0 {
        return Ok(None);
    }
    let sub = match p.common_subordinator {
        Some(s) => s,
        None => GammaOuSubordinator::new(1.0, (2.0 / p.kappa2_star).sqrt())?,
    };
    JumpDriver::new(&sub, p.lambda).map(Some)
}

pub(super) fn variance_drivers(p: &BnsPortfolioParams<f64>) -> Result<Vec<JumpDriver>> {
    p.assets
        .iter()
        .enumerate()
        .map(|(i, a)| match &a.subordinator {
            Some(s) => JumpDriver::new(s, p.lambda),
            None => Err(Error::MissingSubordinatorSpec { asset: i }),
        })
        .collect()
}

/// Exact Gamma-OU path on the grid, calling `visit(step, v)` at every grid
/// point including 0. `next` holds each asset's pending arrival time.
pub(super) struct OuPath<'a> {
    pub(super) drivers: &'a [JumpDriver],
    pub(super) lambda: f64,
    pub(super) h: f64,
    pub(super) n_steps: usize,
}

impl OuPath<'_> {
    pub(super) fn run(
        &self,
        rng: &mut ChaCha8Rng,
        v: &mut [f64],
        next: &mut [f64],
        mut visit: impl FnMut(usize, &[f64]),
    ) {
        let decay = (-self.lambda * self.h).exp();
        for (nx, d) in next.iter_mut().zip(self.drivers) {
            *nx = d.next_arrival(0.0, rng);
        }
        visit(0, v);
        for i in 1..=self.n_steps {
            let t1 = i as f64 * self.h;
            for ((vi, nx), d) in v.iter_mut().zip(next.iter_mut()).zip(self.drivers) {
                *vi *= decay;
                while *nx <= t1 {
                    *vi += d.size(rng) * (-self.lambda * (t1 - *nx)).exp();
                    *nx = d.next_arrival(*nx, rng);
                }
            }
            visit(i, v);
        }
    }
}

fn prepare(p: &BnsPortfolioParams<f64>, cfg: &SimConfig) -> Result<(Vec<JumpDriver>, Vec<f64>)> {
    p.validate()?;
    cfg.validate()?;
    let drivers = variance_drivers(p)?;
    let v0 = p.assets.iter().map(|a| a.sigma0_2).collect();
    Ok((drivers, v0))
}

/// Simulates the Gamma-OU variances exactly in law on the grid, plus the
/// common return-jump marks of every path.
pub fn simulate_bns(p: &BnsPortfolioParams<f64>, cfg: &SimConfig) -> Result<PathEnsemble> {
    let (drivers, v0) = prepare(p, cfg)?;
    let common = common_driver(p)?;
    let n = v0.len();
    let times = cfg.recorded_times();
    let stride = cfg.record_stride;
    let ou = OuPath {
        drivers: &drivers,
        lambda: p.lambda,
        h: cfg.step(),
        n_steps: cfg.n_steps(),
    };
    let paths: Vec<(Vec<f64>, Vec<JumpMark>)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = stream_rng(cfg.seed, path, Stream::Variance);
            let mut v = v0.clone();
            let mut next = vec![0.0; n];
            let mut rows = Vec::with_capacity(times.len() * n);
            ou.run(&mut rng, &mut v, &mut next, |i, v| {
                if i % stride == 0 {
                    rows.extend_from_slice(v);
                }
            });
            let marks = match &common {
                Some(d) => d.marks(cfg.horizon, &mut stream_rng(cfg.seed, path, Stream::CommonJump)),
                None => Vec::new(),
            };
            (rows, marks)
        })
        .collect();
    let (rows, marks): (Vec<_>, Vec<_>) = paths.into_iter().unzip();
    Ok(PathEnsemble {
        times,
        n_assets: n,
        n_paths: cfg.n_paths,
        variances: rows.concat(),
        jump_marks: Some(marks),
    })
}

/// Streaming estimate of the expected realized generalized variance.
///
/// With `with_jumps` the integrand is `|Sigma2|` built from the portfolio's
/// `rho`, `lambda` and `kappa2_star`; otherwise `|Sigma1|`.
pub fn estimate_bns_realized_variance(
    p: &BnsPortfolioParams<f64>,
    corr: &CorrelationMatrix<f64>,
    cfg: &SimConfig,
    with_jumps: bool,
) -> Result<McEstimate> {
    let (drivers, v0) = prepare(p, cfg)?;
    let n = v0.len();
    if corr.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: corr.n(),
        });
    }
    let jump = with_jumps.then(|| JumpLoading {
        rho: p.rho(),
        lambda: p.lambda,
        kappa2_star: p.kappa2_star,
    });
    let h = cfg.step();
    let ou = OuPath {
        drivers: &drivers,
        lambda: p.lambda,
        h,
        n_steps: cfg.n_steps(),
    };
    let averages: Vec<f64> = (0..cfg.n_paths)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], vec![0.0; n]),
            |(v, next), path| {
                v.copy_from_slice(&v0);
                let mut rng = stream_rng(cfg.seed, path, Stream::Variance);
                let mut acc = 0.0;
                let mut prev = 0.0;
                let mut err = None;
                ou.run(&mut rng, v, next, |i, v| {
                    let d = positive_floor_det(v, corr, jump.as_ref()).unwrap_or_else(|e| {
                        err.get_or_insert(e);
                        f64::NAN
                    });
                    if i > 0 {
                        acc += 0.5 * (i as f64 * h - (i - 1) as f64 * h) * (prev + d);
                    }
                    prev = d;
                });
                match err {
                    Some(e) => Err(e),
                    None => Ok(acc / (cfg.n_steps() as f64 * h)),
                }
            },
        )
        .collect::<Result<_>>()?;
    Ok(McEstimate::from_samples(&averages))
}
