//! Model parameters, the correlation matrix and the swap contract.
//!
//! Units: times and rates are in years, variances are annualized. The
//! generalized variance of an `n`-asset portfolio carries units of
//! variance^n, so a variance strike has to be quoted in those units too
//! (for three assets with 20% vols the fair strike is of order 0.04^3).

use serde::de::{Deserializer, Error as _};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Eigenvalues above this floor count as non-negative when checking a
/// correlation matrix, which tolerates rounding in data-estimated input.
pub const PSD_EIGENVALUE_FLOOR: f64 = -1e-10;

/// Below this determinant the inverse `C^{-1}` is not formed.
pub const SINGULAR_DET_THRESHOLD: f64 = 1e-12;

const STRUCTURE_TOLERANCE: f64 = 1e-10;

/// Validated correlation matrix `C` with cached `|C|` and, when `C` is
/// invertible, `delta = C^{-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct CorrelationMatrix<S> {
    n: usize,
    c: Matrix<S>,
    det_c: S,
    delta: Option<Matrix<S>>,
}

impl<S: Scalar> CorrelationMatrix<S> {
    pub fn identity(n: usize) -> Result<Self> {
        validate_correlation(&Matrix::identity(n))
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        validate_correlation(&Matrix::from_rows(rows)?)
    }

    /// Equicorrelated matrix with every off-diagonal entry equal to `rho`.
    pub fn equicorrelated(n: usize, rho: S) -> Result<Self> {
        validate_correlation(&Matrix::from_fn(n, n, |i, j| if i == j { S::one() } else { rho }))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix<S> {
        &self.c
    }

    #[inline]
    pub fn get(&self, l: usize, m: usize) -> S {
        self.c[(l, m)]
    }

    /// `|C|`, clamped at zero.
    #[inline]
    pub fn det(&self) -> S {
        self.det_c
    }

    pub fn has_inverse(&self) -> bool {
        self.delta.is_some()
    }

    /// `C^{-1}`; fails with [`Error::SingularCorrelation`] when `|C|` is
    /// below [`SINGULAR_DET_THRESHOLD`].
    pub fn delta(&self) -> Result<&Matrix<S>> {
        self.delta.as_ref().ok_or_else(|| Error::SingularCorrelation {
            det: self.det_c.to_f64().unwrap_or(f64::NAN),
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<S>> {
        self.c.to_rows()
    }
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
struct CorrelationDoc<S> {
    c: Matrix<S>,
}

// Only `c` is read back; `|C|` and the inverse are always recomputed.
impl<'de, S: Scalar> Deserialize<'de> for CorrelationMatrix<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = CorrelationDoc::<S>::deserialize(deserializer)?;
        validate_correlation(&doc.c).map_err(D::Error::custom)
    }
}

/// Checks that `c` is a correlation matrix and caches `|C|` and `C^{-1}`.
pub fn validate_correlation<S: Scalar>(c: &Matrix<S>) -> Result<CorrelationMatrix<S>> {
    if !c.is_square() {
        return Err(Error::NotSquare {
            rows: c.rows(),
            cols: c.cols(),
        });
    }
    let n = c.rows();
    if n < 2 {
        return Err(Error::TooSmall(n));
    }
    let tol = S::lit(STRUCTURE_TOLERANCE).max(S::epsilon() * S::lit(16.0));
    for l in 0..n {
        for m in 0..n {
            if !c[(l, m)].is_finite() {
                return Err(Error::invalid(format!("c[{l}][{m}]"), "not finite"));
            }
        }
    }
    for l in 0..n {
        let d = c[(l, l)];
        if (d - S::one()).abs() > tol {
            return Err(Error::BadDiagonal {
                index: l,
                value: d.to_f64().unwrap_or(f64::NAN),
            });
        }
        for m in l + 1..n {
            if (c[(l, m)] - c[(m, l)]).abs() > tol {
                return Err(Error::NotSymmetric { row: l, col: m });
            }
        }
    }
    let eig = c.symmetric_eigenvalues()?;
    let min_eig = eig[0];
    let out_of_range = (0..n).any(|l| (0..n).any(|m| c[(l, m)].abs() > S::one() + tol));
    if out_of_range || min_eig < S::lit(PSD_EIGENVALUE_FLOOR) {
        return Err(Error::NotPositiveSemiDefinite {
            min_eigenvalue: min_eig.to_f64().unwrap_or(f64::NAN),
        });
    }
    let det_c = c.determinant()?.max(S::zero());
    let delta = if det_c > S::lit(SINGULAR_DET_THRESHOLD) {
        c.inverse()?
    } else {
        None
    };
    Ok(CorrelationMatrix {
        n,
        c: c.clone(),
        det_c,
        delta,
    })
}

fn require(cond: bool, name: &str, reason: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::invalid(name, reason))
    }
}

/// Per-asset Heston parameters: variance follows
/// `d(sigma^2) = k (theta^2 - sigma^2) dt + gamma sigma dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct HestonAssetParams<S> {
    /// Mean-reversion speed, 1/year.
    pub k: S,
    /// Long-run variance.
    pub theta2: S,
    /// Initial variance.
    pub sigma0_2: S,
    /// Vol-of-vol. Only the simulator reads it.
    pub gamma: S,
}

impl<S: Scalar> HestonAssetParams<S> {
    pub fn new(k: S, theta2: S, sigma0_2: S, gamma: S) -> Result<Self> {
        let p = HestonAssetParams {
            k,
            theta2,
            sigma0_2,
            gamma,
        };
        p.validate()?;
        Ok(p)
    }

    /// `gamma = 0` is accepted and gives the deterministic ODE limit.
    pub fn validate(&self) -> Result<()> {
        require(
            self.k > S::zero() && self.k.is_finite(),
            "k",
            "must be positive and finite",
        )?;
        require(
            self.theta2 > S::zero() && self.theta2.is_finite(),
            "theta2",
            "must be positive and finite",
        )?;
        require(
            self.sigma0_2 > S::zero() && self.sigma0_2.is_finite(),
            "sigma0_2",
            "must be positive and finite",
        )?;
        require(
            self.gamma >= S::zero() && self.gamma.is_finite(),
            "gamma",
            "must be non-negative and finite",
        )
    }

    /// Feller condition `2 k theta^2 >= gamma^2`.
    pub fn feller(&self) -> bool {
        S::lit(2.0) * self.k * self.theta2 >= self.gamma * self.gamma
    }
}

/// Compound Poisson subordinator with exponential jumps, the driver of a
/// Gamma-OU variance process.
///
/// `a` is the jump rate per unit of subordinator time and `1/b` the mean
/// jump size, so `kappa1 = a/b` and `kappa2 = 2a/b^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct GammaOuSubordinator<S> {
    pub a: S,
    pub b: S,
}

impl<S: Scalar> GammaOuSubordinator<S> {
    pub fn new(a: S, b: S) -> Result<Self> {
        let s = GammaOuSubordinator { a, b };
        s.validate()?;
        Ok(s)
    }

    /// Moment matching: `a = 2 kappa1^2 / kappa2`, `b = 2 kappa1 / kappa2`.
    pub fn from_cumulants(kappa1: S, kappa2: S) -> Result<Self> {
        require(kappa1 > S::zero(), "kappa1", "must be positive to build a subordinator")?;
        require(kappa2 > S::zero(), "kappa2", "must be positive to build a subordinator")?;
        let two = S::lit(2.0);
        Self::new(two * kappa1 * kappa1 / kappa2, two * kappa1 / kappa2)
    }

    pub fn validate(&self) -> Result<()> {
        require(
            self.a >= S::zero() && self.a.is_finite(),
            "a",
            "jump rate must be non-negative",
        )?;
        require(
            self.b > S::zero() && self.b.is_finite(),
            "b",
            "inverse mean jump must be positive",
        )
    }

    pub fn kappa1(&self) -> S {
        self.a / self.b
    }

    pub fn kappa2(&self) -> S {
        S::lit(2.0) * self.a / (self.b * self.b)
    }

    pub fn kappa3(&self) -> S {
        S::lit(6.0) * self.a / (self.b * self.b * self.b)
    }

    fn matches(&self, kappa1: S, kappa2: S) -> bool {
        let close = |x: S, y: S| (x - y).abs() <= S::lit(1e-8) * x.abs().max(y.abs()).max(S::min_positive_value());
        close(self.kappa1(), kappa1) && close(self.kappa2(), kappa2)
    }
}

/// Per-asset BNS parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct BnsAssetParams<S> {
    /// Initial variance.
    pub sigma0_2: S,
    /// Mean of the driving subordinator at unit time.
    pub kappa1: S,
    /// Variance of the driving subordinator at unit time.
    pub kappa2: S,
    /// Loading of the common return jump. Non-positive by convention.
    pub rho: S,
    /// Law used by the simulator; pricing only needs the cumulants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subordinator: Option<GammaOuSubordinator<S>>,
}

impl<S: Scalar> BnsAssetParams<S> {
    pub fn new(sigma0_2: S, kappa1: S, kappa2: S, rho: S) -> Result<Self> {
        let p = BnsAssetParams {
            sigma0_2,
            kappa1,
            kappa2,
            rho,
            subordinator: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Attaches the Gamma-OU subordinator matching `kappa1` and `kappa2`.
    pub fn with_matched_subordinator(mut self) -> Result<Self> {
        self.subordinator = Some(GammaOuSubordinator::from_cumulants(self.kappa1, self.kappa2)?);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        require(
            self.sigma0_2 > S::zero() && self.sigma0_2.is_finite(),
            "sigma0_2",
            "must be positive and finite",
        )?;
        require(
            self.kappa1 >= S::zero() && self.kappa1.is_finite(),
            "kappa1",
            "must be non-negative and finite",
        )?;
        require(
            self.kappa2 >= S::zero() && self.kappa2.is_finite(),
            "kappa2",
            "must be non-negative and finite",
        )?;
        require(self.rho.is_finite(), "rho", "must be finite")?;
        if let Some(sub) = &self.subordinator {
            sub.validate()?;
            require(
                sub.matches(self.kappa1, self.kappa2),
                "subordinator",
                "cumulants a/b and 2a/b^2 must equal kappa1 and kappa2",
            )?;
        }
        if self.has_positive_rho() {
            log::warn!(
                "rho = {} is positive; the leverage convention expects rho <= 0",
                self.rho
            );
        }
        Ok(())
    }

    pub fn has_positive_rho(&self) -> bool {
        self.rho > S::zero()
    }
}

/// Multi-asset BNS parameters with one shared decay rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct BnsPortfolioParams<S> {
    pub assets: Vec<BnsAssetParams<S>>,
    /// Decay rate shared by every variance process, 1/year.
    pub lambda: S,
    /// `Var[Z*_1]` of the common return-jump subordinator.
    pub kappa2_star: S,
    /// Law of the common jump, used only for price-path simulation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub common_subordinator: Option<GammaOuSubordinator<S>>,
}

impl<S: Scalar> BnsPortfolioParams<S> {
    pub fn new(assets: Vec<BnsAssetParams<S>>, lambda: S, kappa2_star: S) -> Result<Self> {
        let p = BnsPortfolioParams {
            assets,
            lambda,
            kappa2_star,
            common_subordinator: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require(!self.assets.is_empty(), "assets", "at least one asset is required")?;
        require(
            self.lambda > S::zero() && self.lambda.is_finite(),
            "lambda",
            "must be positive and finite",
        )?;
        require(
            self.kappa2_star >= S::zero() && self.kappa2_star.is_finite(),
            "kappa2_star",
            "must be non-negative and finite",
        )?;
        for a in &self.assets {
            a.validate()?;
        }
        if let Some(sub) = &self.common_subordinator {
            sub.validate()?;
            let k2 = sub.kappa2();
            require(
                (k2 - self.kappa2_star).abs() <= S::lit(1e-8) * k2.max(self.kappa2_star),
                "common_subordinator",
                "2a/b^2 must equal kappa2_star",
            )?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.assets.len()
    }

    pub fn rho(&self) -> Vec<S> {
        self.assets.iter().map(|a| a.rho).collect()
    }
}

/// Variance swap paying `notional * (realized generalized variance - k_var)`
/// at `maturity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct SwapContract<S> {
    /// Strike, in variance^n units.
    pub k_var: S,
    /// Continuously compounded risk-free rate.
    pub r: S,
    /// Years.
    pub maturity: S,
    pub notional: S,
}

impl<S: Scalar> SwapContract<S> {
    pub fn new(k_var: S, r: S, maturity: S, notional: S) -> Result<Self> {
        let c = SwapContract {
            k_var,
            r,
            maturity,
            notional,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.maturity > S::zero() && self.maturity.is_finite()) {
            return Err(Error::NonPositiveMaturity(self.maturity.to_f64().unwrap_or(f64::NAN)));
        }
        require(self.notional.is_finite(), "notional", "must be finite")?;
        require(self.k_var.is_finite(), "k_var", "must be finite")?;
        require(self.r.is_finite(), "r", "must be finite")
    }

    pub fn discount_factor(&self) -> S {
        (-self.r * self.maturity).exp()
    }

    /// `N e^{-rT} (E[sigma_R^2] - K_var)`.
    pub fn price(&self, expected_realized_variance: S) -> Result<S> {
        self.validate()?;
        Ok(self.notional * self.discount_factor() * (expected_realized_variance - self.k_var))
    }
}
