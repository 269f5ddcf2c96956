//! Multivariate variance swap under BNS dynamics.
//!
//! Each variance is a non-Gaussian OU process driven by its own subordinator
//! `Z^i_{lambda t}`, with all assets sharing the decay rate `lambda`. Returns
//! carry a common jump `rho_i dZ*_{lambda t}`, which turns the instantaneous
//! covariance into `Sigma1 + lambda Var[Z*_1] rho rho^T`. Its expected
//! determinant needs `E[sigma_t^i]` as well as `E[(sigma_t^i)^2]`; the first
//! moment of the volatility is approximated by the second-order expansion
//! of the square root around `E[sigma_t^2]`.
//!
//! `E_0..E_3` are integrals of sums of exponentials and have closed forms.
//! `E_4..E_6` contain square roots and are integrated numerically.

use crate::error::{Error, Result};
use crate::params::{BnsAssetParams, BnsPortfolioParams, CorrelationMatrix, SwapContract};
use crate::quadrature::{integrate, QuadOptions};
use crate::scalar::{decay_integral, Scalar};

/// How the volatility correction term is written.
///
/// Both forms are algebraically identical because
/// `Var[sigma_t^2] = (kappa2/2)(1 - e^{-2 lambda t})`; they differ only in
/// rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolApproxForm {
    /// `sqrt(m) - Var / (8 m^{3/2})`.
    #[default]
    Taylor,
    /// `sqrt(m) - kappa2 (1 - e^{-2 lambda t}) / (16 m^{3/2})`.
    Coefficient16,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct BnsPricingOptions<S> {
    pub vol_form: VolApproxForm,
    pub quad: QuadOptions<S>,
}

impl<S: Scalar> Default for BnsPricingOptions<S> {
    fn default() -> Self {
        BnsPricingOptions {
            vol_form: VolApproxForm::Taylor,
            quad: QuadOptions::default(),
        }
    }
}

/// Approximate `E[sigma_t]` and, when the third central moment of
/// `sigma_t^2` is supplied, the size of the next term of the expansion,
/// `mu3 / (16 E[sigma_t^2]^{5/2})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolApprox<S> {
    pub value: S,
    pub error_bound: Option<S>,
}

/// The integrals `E_0..E_6` over `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnsETerms<S> {
    pub e0: S,
    pub e1: S,
    pub e2: S,
    pub e3: S,
    pub e4: S,
    pub e5: S,
    pub e6: S,
    /// Quadrature error estimates for `e4`, `e5`, `e6`.
    pub quad_error: [S; 3],
}

fn check_time<S: Scalar>(t: S) -> Result<()> {
    if t >= S::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeTime(t.to_f64().unwrap_or(f64::NAN)))
    }
}

fn check_lambda<S: Scalar>(lambda: S) -> Result<()> {
    if lambda > S::zero() && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("lambda", "must be positive and finite"))
    }
}

#[inline]
fn mean_variance<S: Scalar>(t: S, a: &BnsAssetParams<S>, lambda: S) -> S {
    (-lambda * t).exp() * (a.sigma0_2 - a.kappa1) + a.kappa1
}

#[inline]
fn var_variance<S: Scalar>(t: S, a: &BnsAssetParams<S>, lambda: S) -> S {
    a.kappa2 * S::lit(0.5) * -(S::lit(-2.0) * lambda * t).exp_m1()
}

#[inline]
fn vol_approx<S: Scalar>(t: S, a: &BnsAssetParams<S>, lambda: S, form: VolApproxForm) -> S {
    let m = mean_variance(t, a, lambda);
    let m32 = m * m.sqrt();
    let correction = match form {
        VolApproxForm::Taylor => var_variance(t, a, lambda) / (S::lit(8.0) * m32),
        VolApproxForm::Coefficient16 => a.kappa2 * -(S::lit(-2.0) * lambda * t).exp_m1() / (S::lit(16.0) * m32),
    };
    m.sqrt() - correction
}

/// `E[sigma_t^2] = e^{-lambda t}(sigma_0^2 - kappa1) + kappa1`.
pub fn expected_variance_bns<S: Scalar>(t: S, a: &BnsAssetParams<S>, lambda: S) -> Result<S> {
    check_time(t)?;
    check_lambda(lambda)?;
    a.validate()?;
    Ok(mean_variance(t, a, lambda))
}

/// `Var[sigma_t^2] = (kappa2/2)(1 - e^{-2 lambda t})`.
pub fn variance_of_variance_bns<S: Scalar>(t: S, a: &BnsAssetParams<S>, lambda: S) -> Result<S> {
    check_time(t)?;
    check_lambda(lambda)?;
    a.validate()?;
    Ok(var_variance(t, a, lambda))
}

/// Second-order approximation of `E[sigma_t]`.
pub fn expected_vol_bns<S: Scalar>(
    t: S,
    a: &BnsAssetParams<S>,
    lambda: S,
    form: VolApproxForm,
    mu3: Option<S>,
) -> Result<VolApprox<S>> {
    let m = expected_variance_bns(t, a, lambda)?;
    if !(m > S::zero()) {
        return Err(Error::DegenerateVariance(m.to_f64().unwrap_or(f64::NAN)));
    }
    let value = vol_approx(t, a, lambda, form);
    let error_bound = mu3.map(|mu3| mu3.abs() / (S::lit(16.0) * m * m * m.sqrt()));
    Ok(VolApprox { value, error_bound })
}

fn three<S: Scalar>(p: &BnsPortfolioParams<S>) -> Result<[&BnsAssetParams<S>; 3]> {
    match p.assets.as_slice() {
        [a, b, c] => Ok([a, b, c]),
        other => Err(Error::WrongAssetCount {
            expected: 3,
            found: other.len(),
        }),
    }
}

/// `int_0^T E[(sigma^i)^2] E[(sigma^j)^2] dt` in closed form.
fn pair_integral<S: Scalar>(t: S, lambda: S, a: &BnsAssetParams<S>, b: &BnsAssetParams<S>) -> S {
    let (da, db) = (a.sigma0_2 - a.kappa1, b.sigma0_2 - b.kappa1);
    let two = S::lit(2.0);
    decay_integral(two * lambda, t) * da * db
        + decay_integral(lambda, t) * (a.kappa1 * db + b.kappa1 * da)
        + t * a.kappa1 * b.kappa1
}

/// `int_0^T prod_{i=1}^3 E[(sigma^i)^2] dt` in closed form.
fn triple_integral<S: Scalar>(t: S, lambda: S, a: [&BnsAssetParams<S>; 3]) -> S {
    let [p1, p2, p3] = a;
    let (d1, d2, d3) = (
        p1.sigma0_2 - p1.kappa1,
        p2.sigma0_2 - p2.kappa1,
        p3.sigma0_2 - p3.kappa1,
    );
    let (k1, k2, k3) = (p1.kappa1, p2.kappa1, p3.kappa1);
    decay_integral(S::lit(3.0) * lambda, t) * d1 * d2 * d3
        + decay_integral(S::lit(2.0) * lambda, t) * (k1 * d2 * d3 + k2 * d1 * d3 + k3 * d1 * d2)
        + decay_integral(lambda, t) * (k1 * k2 * d3 + k1 * k3 * d2 + k2 * k3 * d1)
        + t * k1 * k2 * k3
}

/// Integral of `E[(sigma^sq)^2] E[sigma^v1] E[sigma^v2]`.
fn mixed_integral<S: Scalar>(
    t: S,
    lambda: S,
    sq: &BnsAssetParams<S>,
    v1: &BnsAssetParams<S>,
    v2: &BnsAssetParams<S>,
    opts: &BnsPricingOptions<S>,
) -> Result<(S, S)> {
    let form = opts.vol_form;
    let f = |s: S| mean_variance(s, sq, lambda) * vol_approx(s, v1, lambda, form) * vol_approx(s, v2, lambda, form);
    let q = integrate(f, S::zero(), t, &opts.quad)?;
    Ok((q.value, q.abs_error))
}

/// `E_0..E_3` in closed form and `E_4..E_6` by adaptive quadrature.
pub fn compute_e_terms<S: Scalar>(
    maturity: S,
    p: &BnsPortfolioParams<S>,
    opts: &BnsPricingOptions<S>,
) -> Result<BnsETerms<S>> {
    e_terms_masked(maturity, p, opts, [true; 3])
}

fn e_terms_masked<S: Scalar>(
    maturity: S,
    p: &BnsPortfolioParams<S>,
    opts: &BnsPricingOptions<S>,
    needed: [bool; 3],
) -> Result<BnsETerms<S>> {
    if !(maturity > S::zero() && maturity.is_finite()) {
        return Err(Error::NonPositiveMaturity(maturity.to_f64().unwrap_or(f64::NAN)));
    }
    p.validate()?;
    let [a1, a2, a3] = three(p)?;
    let l = p.lambda;
    let mut quad_error = [S::zero(); 3];
    let mut mixed = |idx: usize, sq, v1, v2| -> Result<S> {
        if !needed[idx] {
            return Ok(S::zero());
        }
        let (v, e) = mixed_integral(maturity, l, sq, v1, v2, opts)?;
        quad_error[idx] = e;
        Ok(v)
    };
    let e4 = mixed(0, a3, a2, a1)?;
    let e5 = mixed(1, a2, a3, a1)?;
    let e6 = mixed(2, a1, a3, a2)?;
    Ok(BnsETerms {
        e0: triple_integral(maturity, l, [a1, a2, a3]),
        e1: pair_integral(maturity, l, a3, a2),
        e2: pair_integral(maturity, l, a3, a1),
        e3: pair_integral(maturity, l, a2, a1),
        e4,
        e5,
        e6,
        quad_error,
    })
}

/// Coefficients `lambda kappa2* (delta11 rho1^2, delta22 rho2^2, delta33
/// rho3^2, 2 delta21 rho2 rho1, 2 delta31 rho3 rho1, 2 delta32 rho3 rho2)`.
fn jump_coefficients<S: Scalar>(p: &BnsPortfolioParams<S>, corr: &CorrelationMatrix<S>) -> Result<[S; 6]> {
    let d = corr.delta()?;
    let r: Vec<S> = p.rho();
    let s = p.lambda * p.kappa2_star;
    let two = S::lit(2.0);
    Ok([
        s * d[(0, 0)] * r[0] * r[0],
        s * d[(1, 1)] * r[1] * r[1],
        s * d[(2, 2)] * r[2] * r[2],
        s * two * d[(1, 0)] * r[1] * r[0],
        s * two * d[(2, 0)] * r[2] * r[0],
        s * two * d[(2, 1)] * r[2] * r[1],
    ])
}

fn check_corr<S: Scalar>(p: &BnsPortfolioParams<S>, corr: &CorrelationMatrix<S>) -> Result<()> {
    if corr.n() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: corr.n(),
            found: p.n(),
        });
    }
    Ok(())
}

/// `E[sigma_R^2] = (|C|/T) [E_0 + lambda kappa2* (sum_i delta_ii rho_i^2 E_i
/// + 2 sum_{i>j} delta_ij rho_i rho_j E_{..})]`.
///
/// The numerical integrals are skipped when their coefficient is zero.
pub fn expected_realized_variance_bns<S: Scalar>(
    maturity: S,
    p: &BnsPortfolioParams<S>,
    corr: &CorrelationMatrix<S>,
    opts: &BnsPricingOptions<S>,
) -> Result<S> {
    Ok(expected_realized_variance_bns_detailed(maturity, p, corr, opts)?.0)
}

/// [`expected_realized_variance_bns`] together with the `E` terms it used.
pub fn expected_realized_variance_bns_detailed<S: Scalar>(
    maturity: S,
    p: &BnsPortfolioParams<S>,
    corr: &CorrelationMatrix<S>,
    opts: &BnsPricingOptions<S>,
) -> Result<(S, BnsETerms<S>)> {
    three(p)?;
    check_corr(p, corr)?;
    let w = jump_coefficients(p, corr)?;
    let needed = [w[3] != S::zero(), w[4] != S::zero(), w[5] != S::zero()];
    let e = e_terms_masked(maturity, p, opts, needed)?;
    let jump = w[0] * e.e1 + w[1] * e.e2 + w[2] * e.e3 + w[3] * e.e4 + w[4] * e.e5 + w[5] * e.e6;
    Ok((corr.det() / maturity * (e.e0 + jump), e))
}

/// `E|Sigma2|` at time `t`, the integrand of the realized-variance
/// expectation.
pub fn expected_generalized_variance_bns<S: Scalar>(
    t: S,
    p: &BnsPortfolioParams<S>,
    corr: &CorrelationMatrix<S>,
    form: VolApproxForm,
) -> Result<S> {
    check_time(t)?;
    p.validate()?;
    check_corr(p, corr)?;
    let [a1, a2, a3] = three(p)?;
    let l = p.lambda;
    let w = jump_coefficients(p, corr)?;
    let (m1, m2, m3) = (
        mean_variance(t, a1, l),
        mean_variance(t, a2, l),
        mean_variance(t, a3, l),
    );
    let (s1, s2, s3) = (
        vol_approx(t, a1, l, form),
        vol_approx(t, a2, l, form),
        vol_approx(t, a3, l, form),
    );
    let jump = w[0] * m3 * m2
        + w[1] * m3 * m1
        + w[2] * m2 * m1
        + w[3] * m3 * s2 * s1
        + w[4] * s3 * m2 * s1
        + w[5] * s3 * s2 * m1;
    Ok(corr.det() * (m1 * m2 * m3 + jump))
}

/// Same contract as [`crate::heston::price_swap`].
pub fn price_swap_bns<S: Scalar>(ev_realized: S, contract: &SwapContract<S>) -> Result<S> {
    contract.price(ev_realized)
}
