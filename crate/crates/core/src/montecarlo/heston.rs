use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::rng::{stream_rng, Stream};
use super::{positive_floor_det, McEstimate, PathEnsemble, Scheme, SimConfig};
use crate::error::Result;
use crate::heston::HestonPortfolio;
use crate::params::HestonAssetParams;

/// Per-asset constants of one CIR step.
#[derive(Debug, Clone, Copy)]
pub(super) struct CirStep {
    theta2: f64,
    k_h: f64,
    decay: f64,
    vol_sqrt_h: f64,
    scheme: Scheme,
}

impl CirStep {
    pub(super) fn new(p: &HestonAssetParams<f64>, h: f64, scheme: Scheme) -> Self {
        CirStep {
            theta2: p.theta2,
            k_h: p.k * h,
            decay: (-p.k * h).exp(),
            vol_sqrt_h: p.gamma * h.sqrt(),
            scheme,
        }
    }

    /// Advances the raw (possibly negative) state by one step.
    #[inline]
    pub(super) fn advance(&self, v: f64, z: f64) -> f64 {
        let vp = v.max(0.0);
        let diffusion = self.vol_sqrt_h * vp.sqrt() * z;
        match self.scheme {
            Scheme::FullTruncationExpDrift => self.theta2 + (vp - self.theta2) * self.decay + diffusion,
            Scheme::FullTruncationEuler => v + self.k_h * (self.theta2 - vp) + diffusion,
        }
    }
}

/// Runs one path, calling `visit(step, v+)` at every grid point including 0.
pub(super) fn run_path(
    steps: &[CirStep],
    n_steps: usize,
    seed: u64,
    path: usize,
    state: &mut [f64],
    out: &mut [f64],
    mut visit: impl FnMut(usize, &[f64]),
) {
    let mut rng = stream_rng(seed, path, Stream::Variance);
    for (o, s) in out.iter_mut().zip(state.iter()) {
        *o = s.max(0.0);
    }
    visit(0, out);
    for i in 1..=n_steps {
        for ((v, o), st) in state.iter_mut().zip(out.iter_mut()).zip(steps) {
            let z: f64 = rng.sample(StandardNormal);
            *v = st.advance(*v, z);
            *o = v.max(0.0);
        }
        visit(i, out);
    }
}

fn prepare(portfolio: &HestonPortfolio<f64>, cfg: &SimConfig) -> Result<(Vec<CirStep>, Vec<f64>)> {
    portfolio.validate()?;
    cfg.validate()?;
    let h = cfg.step();
    let steps = portfolio
        .assets
        .iter()
        .map(|a| CirStep::new(a, h, cfg.scheme))
        .collect();
    let v0 = portfolio.assets.iter().map(|a| a.sigma0_2).collect();
    Ok((steps, v0))
}

/// Simulates independent CIR variances for every asset and stores them.
///
/// Return correlations do not enter the variance dynamics; they only act
/// when the paths are turned into generalized variances.
pub fn simulate_heston(portfolio: &HestonPortfolio<f64>, cfg: &SimConfig) -> Result<PathEnsemble> {
    let (steps, v0) = prepare(portfolio, cfg)?;
    let n = v0.len();
    let times = cfg.recorded_times();
    let stride = cfg.record_stride;
    let row_len = times.len() * n;
    let paths: Vec<Vec<f64>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut state = v0.clone();
            let mut out = vec![0.0; n];
            let mut rows = Vec::with_capacity(row_len);
            run_path(&steps, cfg.n_steps(), cfg.seed, p, &mut state, &mut out, |i, v| {
                if i % stride == 0 {
                    rows.extend_from_slice(v);
                }
            });
            rows
        })
        .collect();
    Ok(PathEnsemble {
        times,
        n_assets: n,
        n_paths: cfg.n_paths,
        variances: paths.concat(),
        jump_marks: None,
    })
}

/// Streams paths without storing them and returns the estimate of the
/// expected realized generalized variance over `[0, horizon]`.
///
/// Uses the full simulation grid regardless of `record_stride`.
pub fn estimate_heston_realized_variance(portfolio: &HestonPortfolio<f64>, cfg: &SimConfig) -> Result<McEstimate> {
    let (steps, v0) = prepare(portfolio, cfg)?;
    let n = v0.len();
    let h = cfg.step();
    let corr = &portfolio.corr;
    let averages: Vec<f64> = (0..cfg.n_paths)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], vec![0.0; n]),
            |(state, out), p| {
                state.copy_from_slice(&v0);
                let mut acc = 0.0;
                let mut prev = 0.0;
                let mut err = None;
                run_path(&steps, cfg.n_steps(), cfg.seed, p, state, out, |i, v| {
                    let d = positive_floor_det(v, corr, None).unwrap_or_else(|e| {
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
