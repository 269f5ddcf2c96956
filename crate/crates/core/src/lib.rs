//! Multivariate variance swaps priced through the generalized variance, the
//! determinant of the instantaneous return covariance of a portfolio.
//!
//! Closed forms are provided for three assets under independent Heston
//! variances and under BNS dynamics with a common return jump. A Monte Carlo
//! engine simulates both models as an independent check, and a data
//! pipeline turns daily closes into a realized generalized-variance series
//! that the calibrator fits.
//!
//! The closed-form layers (`params`, `genvar`, `heston`, `bns`,
//! `quadrature`) are generic over [`Scalar`]; the `F64` aliases below are
//! the concrete types used by simulation, data and calibration.

// `!(x > 0.0)` is the idiom used throughout to reject NaN together with
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bns;
pub mod calibrate;
pub mod error;
pub mod genvar;
pub mod heston;
pub mod linalg;
pub mod marketdata;
pub mod montecarlo;
pub mod params;
pub mod quadrature;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type MatrixF64 = linalg::Matrix<f64>;
pub type CorrelationMatrixF64 = params::CorrelationMatrix<f64>;
pub type HestonAssetParamsF64 = params::HestonAssetParams<f64>;
pub type BnsAssetParamsF64 = params::BnsAssetParams<f64>;
pub type BnsPortfolioParamsF64 = params::BnsPortfolioParams<f64>;
pub type GammaOuSubordinatorF64 = params::GammaOuSubordinator<f64>;
pub type SwapContractF64 = params::SwapContract<f64>;
pub type HestonPortfolioF64 = heston::HestonPortfolio<f64>;
pub type BnsETermsF64 = bns::BnsETerms<f64>;

pub type CorrelationMatrixF32 = params::CorrelationMatrix<f32>;
pub type HestonPortfolioF32 = heston::HestonPortfolio<f32>;
pub type BnsPortfolioParamsF32 = params::BnsPortfolioParams<f32>;
