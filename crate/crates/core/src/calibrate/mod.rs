//! Nonlinear least-squares fit of model curves to a realized generalized
//! variance series, and the goodness-of-fit metrics.
//!
//! The correlation matrix is held fixed. Bounded parameters are optimized
//! through log or logit transforms, so every trial point is admissible.

mod lm;
mod metrics;

use serde::{Deserialize, Serialize};

use crate::bns::{expected_realized_variance_bns, BnsPricingOptions};
use crate::error::{Error, Result};
use crate::heston::{expected_realized_variance, HestonPortfolio};
use crate::linalg::Matrix;
use crate::marketdata::RealizedVarianceSeries;
use crate::params::{BnsPortfolioParams, CorrelationMatrix, HestonAssetParams};

pub use self::lm::{LmOptions, Termination};
pub use self::metrics::{error_metrics, ErrorMetrics};

/// Parameters of either model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    Heston { assets: Vec<HestonAssetParams<f64>> },
    Bns(BnsPortfolioParams<f64>),
}

impl ModelParams {
    pub fn n_assets(&self) -> usize {
        match self {
            ModelParams::Heston { assets } => assets.len(),
            ModelParams::Bns(p) => p.n(),
        }
    }

    pub fn model_name(&self) -> &'static str {
        match self {
            ModelParams::Heston { .. } => "heston",
            ModelParams::Bns(_) => "bns",
        }
    }

    /// Names of the fitted parameters, in [`ModelParams::to_vector`] order.
    ///
    /// Heston: `k_i, theta2_i, sigma0_2_i` per asset. BNS: `lambda`, then
    /// `sigma0_2_i, kappa1_i, kappa2_i, rho_i` per asset, then `kappa2_star`.
    pub fn names(&self) -> Vec<String> {
        match self {
            ModelParams::Heston { assets } => (1..=assets.len())
                .flat_map(|i| [format!("k_{i}"), format!("theta2_{i}"), format!("sigma0_2_{i}")])
                .collect(),
            ModelParams::Bns(p) => {
                let mut v = vec!["lambda".to_string()];
                for i in 1..=p.n() {
                    v.extend([
                        format!("sigma0_2_{i}"),
                        format!("kappa1_{i}"),
                        format!("kappa2_{i}"),
                        format!("rho_{i}"),
                    ]);
                }
                v.push("kappa2_star".into());
                v
            }
        }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        match self {
            ModelParams::Heston { assets } => assets.iter().flat_map(|a| [a.k, a.theta2, a.sigma0_2]).collect(),
            ModelParams::Bns(p) => {
                let mut v = vec![p.lambda];
                for a in &p.assets {
                    v.extend([a.sigma0_2, a.kappa1, a.kappa2, a.rho]);
                }
                v.push(p.kappa2_star);
                v
            }
        }
    }

    /// Replaces the fitted parameters, keeping the rest of `self`.
    ///
    /// Simulation-only subordinator laws are dropped, since new cumulants
    /// would no longer match them.
    pub fn with_vector(&self, x: &[f64]) -> Result<ModelParams> {
        let expected = self.names().len();
        if x.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: x.len(),
            });
        }
        let out = match self {
            ModelParams::Heston { assets } => ModelParams::Heston {
                assets: assets
                    .iter()
                    .zip(x.chunks_exact(3))
                    .map(|(a, c)| HestonAssetParams::new(c[0], c[1], c[2], a.gamma))
                    .collect::<Result<_>>()?,
            },
            ModelParams::Bns(p) => {
                let mut q = p.clone();
                q.lambda = x[0];
                for (a, c) in q.assets.iter_mut().zip(x[1..].chunks_exact(4)) {
                    a.sigma0_2 = c[0];
                    a.kappa1 = c[1];
                    a.kappa2 = c[2];
                    a.rho = c[3];
                    a.subordinator = None;
                }
                q.kappa2_star = x[expected - 1];
                q.common_subordinator = None;
                q.validate()?;
                ModelParams::Bns(q)
            }
        };
        Ok(out)
    }

    /// Default admissible ranges: positive parameters are bounded below by
    /// zero, `rho` is unbounded.
    pub fn default_bounds(&self) -> Vec<Bound> {
        self.names()
            .iter()
            .map(|n| {
                if n.starts_with("rho_") {
                    Bound::FREE
                } else {
                    Bound::POSITIVE
                }
            })
            .collect()
    }
}

/// Expected realized generalized variance over `[0, t]` for each `t`.
pub fn model_curve(
    params: &ModelParams,
    corr: &CorrelationMatrix<f64>,
    times: &[f64],
    opts: &BnsPricingOptions<f64>,
) -> Result<Vec<f64>> {
    match params {
        ModelParams::Heston { assets } => {
            let portfolio = HestonPortfolio::new(assets.clone(), corr.clone())?;
            times
                .iter()
                .map(|&t| expected_realized_variance(t, &portfolio))
                .collect()
        }
        ModelParams::Bns(p) => times
            .iter()
            .map(|&t| expected_realized_variance_bns(t, p, corr, opts))
            .collect(),
    }
}

/// Open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawBound", into = "RawBound")]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
}

impl Bound {
    pub const FREE: Bound = Bound {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const POSITIVE: Bound = Bound {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::invalid("bounds", format!("need lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Bound { lo, hi })
    }

    fn contains(&self, x: f64) -> bool {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (false, false) => x.is_finite(),
            _ => x > self.lo && x < self.hi,
        }
    }

    /// Unconstrained coordinate of `x`.
    fn to_free(self, x: f64) -> f64 {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (false, false) => x,
            (true, false) => (x - self.lo).ln(),
            (false, true) => (self.hi - x).ln(),
            (true, true) => {
                let p = (x - self.lo) / (self.hi - self.lo);
                (p / (1.0 - p)).ln()
            }
        }
    }

    fn to_natural(self, u: f64) -> f64 {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (false, false) => u,
            (true, false) => self.lo + u.exp(),
            (false, true) => self.hi - u.exp(),
            (true, true) => self.lo + (self.hi - self.lo) / (1.0 + (-u).exp()),
        }
    }
}

/// JSON form of [`Bound`]: a missing or `null` end is infinite.
#[derive(Serialize, Deserialize)]
struct RawBound {
    #[serde(default)]
    lo: Option<f64>,
    #[serde(default)]
    hi: Option<f64>,
}

impl From<RawBound> for Bound {
    fn from(r: RawBound) -> Self {
        Bound {
            lo: r.lo.unwrap_or(f64::NEG_INFINITY),
            hi: r.hi.unwrap_or(f64::INFINITY),
        }
    }
}

impl From<Bound> for RawBound {
    fn from(b: Bound) -> Self {
        RawBound {
            lo: b.lo.is_finite().then_some(b.lo),
            hi: b.hi.is_finite().then_some(b.hi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct FitOptions {
    pub lm: LmOptions,
    pub pricing: BnsPricingOptions<f64>,
}

/// A fit of one model to one observed series.
#[derive(Debug, Clone)]
pub struct CalibrationProblem {
    pub initial: ModelParams,
    pub observed: RealizedVarianceSeries,
    pub corr: CorrelationMatrix<f64>,
    /// One per entry of [`ModelParams::names`].
    pub bounds: Vec<Bound>,
    pub fixed: Vec<bool>,
    /// `(target, source)`: parameter `target` always equals `source`.
    pub ties: Vec<(usize, usize)>,
    pub options: FitOptions,
}

impl CalibrationProblem {
    pub fn new(initial: ModelParams, observed: RealizedVarianceSeries, corr: CorrelationMatrix<f64>) -> Self {
        let p = initial.names().len();
        CalibrationProblem {
            bounds: initial.default_bounds(),
            fixed: vec![false; p],
            ties: Vec::new(),
            initial,
            observed,
            corr,
            options: FitOptions::default(),
        }
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.initial
            .names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::invalid(name, "unknown parameter"))
    }

    /// Holds `name` at its initial value.
    pub fn fix(mut self, name: &str) -> Result<Self> {
        let i = self.index(name)?;
        self.fixed[i] = true;
        Ok(self)
    }

    pub fn bound(mut self, name: &str, lo: f64, hi: f64) -> Result<Self> {
        let i = self.index(name)?;
        self.bounds[i] = Bound::new(lo, hi)?;
        Ok(self)
    }

    /// Makes `target` follow `source`.
    pub fn tie(mut self, target: &str, source: &str) -> Result<Self> {
        let t = self.index(target)?;
        let s = self.index(source)?;
        self.ties.push((t, s));
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let names = self.initial.names();
        let p = names.len();
        if self.observed.values.is_empty() {
            return Err(Error::invalid("observed", "series is empty"));
        }
        if self.observed.times.len() != self.observed.values.len() {
            return Err(Error::LengthMismatch {
                left: self.observed.times.len(),
                right: self.observed.values.len(),
            });
        }
        if self.observed.times.iter().any(|&t| !(t > 0.0)) || self.observed.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("observed.times", "must be positive and increasing"));
        }
        if self.corr.n() != self.initial.n_assets() {
            return Err(Error::DimensionMismatch {
                expected: self.initial.n_assets(),
                found: self.corr.n(),
            });
        }
        for (len, what) in [(self.bounds.len(), "bounds"), (self.fixed.len(), "fixed")] {
            if len != p {
                return Err(Error::invalid(what, format!("need {p} entries, got {len}")));
            }
        }
        let tied: Vec<usize> = self.ties.iter().map(|t| t.0).collect();
        for &(t, s) in &self.ties {
            if t >= p || s >= p || t == s || tied.contains(&s) {
                return Err(Error::invalid("ties", "each tie must point at an untied parameter"));
            }
        }
        for (i, x) in self.initial.to_vector().into_iter().enumerate() {
            let b = self.bounds[i];
            if b.lo.is_nan() || b.hi.is_nan() || b.lo >= b.hi {
                return Err(Error::invalid(&names[i], "bounds need lo < hi"));
            }
            if !self.fixed[i] && !tied.contains(&i) && !b.contains(x) {
                return Err(Error::invalid(
                    &names[i],
                    format!("initial value {x} lies outside ({}, {})", b.lo, b.hi),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub params: ModelParams,
    pub param_names: Vec<String>,
    pub values: Vec<f64>,
    /// Unweighted sum of squared residuals.
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Parameters the optimizer moved, indexing the covariance.
    pub free_parameters: Vec<String>,
    pub covariance_of_estimates: Option<Matrix<f64>>,
    pub fitted: Vec<f64>,
    pub metrics: ErrorMetrics,
}

/// Maps the optimizer's free coordinates to a full parameter vector.
struct Layout {
    base: Vec<f64>,
    free: Vec<usize>,
    bounds: Vec<Bound>,
    ties: Vec<(usize, usize)>,
}

impl Layout {
    fn expand(&self, u: &[f64]) -> Vec<f64> {
        let mut x = self.base.clone();
        for (&i, &ui) in self.free.iter().zip(u) {
            x[i] = self.bounds[i].to_natural(ui);
        }
        for &(t, s) in &self.ties {
            x[t] = x[s];
        }
        x
    }
}

/// Levenberg-Marquardt fit with a central-difference Jacobian.
///
/// Residuals are divided by the RMS of the observations so the gradient
/// and step tests do not depend on the units of the series. Hitting the
/// iteration cap returns the best point with `converged = false`.
pub fn fit(problem: &CalibrationProblem) -> Result<CalibrationResult> {
    problem.validate()?;
    let obs = &problem.observed.values;
    let times = &problem.observed.times;
    let scale = (obs.iter().map(|v| v * v).sum::<f64>() / obs.len() as f64).sqrt();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let tied: Vec<usize> = problem.ties.iter().map(|t| t.0).collect();
    let x0 = problem.initial.to_vector();
    let layout = Layout {
        free: (0..x0.len())
            .filter(|i| !problem.fixed[*i] && !tied.contains(i))
            .collect(),
        base: x0,
        bounds: problem.bounds.clone(),
        ties: problem.ties.clone(),
    };
    let residuals = |x: &[f64]| -> Result<Vec<f64>> {
        let params = problem.initial.with_vector(x)?;
        let curve = model_curve(&params, &problem.corr, times, &problem.options.pricing)?;
        Ok(curve.iter().zip(obs).map(|(c, o)| (c - o) / scale).collect())
    };
    let u0: Vec<f64> = layout
        .free
        .iter()
        .map(|&i| layout.bounds[i].to_free(layout.base[i]))
        .collect();
    let out = lm::minimize(|u: &[f64]| residuals(&layout.expand(u)), u0, &problem.options.lm)?;
    let x = layout.expand(&out.u);
    let params = problem.initial.with_vector(&x)?;
    let fitted = model_curve(&params, &problem.corr, times, &problem.options.pricing)?;
    let sse = out.sse * scale * scale;

    // Covariance in the natural coordinates of the free parameters.
    let covariance = {
        let sub = |v: &[f64]| {
            let mut full = x.clone();
            for (&i, &vi) in layout.free.iter().zip(v) {
                full[i] = vi;
            }
            for &(t, s) in &layout.ties {
                full[t] = full[s];
            }
            residuals(&full).map(|r| r.iter().map(|e| e * scale).collect::<Vec<_>>())
        };
        let xf: Vec<f64> = layout.free.iter().map(|&i| x[i]).collect();
        match sub(&xf).and_then(|r0| lm::jacobian(&sub, &xf, &r0, problem.options.lm.fd_step)) {
            Ok(j) => lm::gauss_newton_covariance(&j, sse).unwrap_or(None),
            Err(_) => None,
        }
    };
    let names = problem.initial.names();
    Ok(CalibrationResult {
        free_parameters: layout.free.iter().map(|&i| names[i].clone()).collect(),
        param_names: names,
        values: x,
        params,
        sse,
        iterations: out.iterations,
        converged: out.termination.converged(),
        termination: out.termination,
        covariance_of_estimates: covariance,
        metrics: error_metrics(obs, &fitted)?,
        fitted,
    })
}
