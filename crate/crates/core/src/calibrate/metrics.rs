use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Goodness of fit of a fitted curve against observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub rmse: f64,
    /// Mean absolute error relative to the mean observation.
    pub ape: f64,
    pub aae: f64,
    /// Mean of `|e_i| / |obs_i|` over points with a non-zero observation.
    pub arpe: f64,
    /// Indices left out of ARPE because the observation is zero.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zero_observed: Vec<usize>,
}

/// RMSE, APE, AAE and ARPE of `fitted` against `observed`.
///
/// APE is `NaN` when the observations average to zero, ARPE when every
/// observation is zero.
pub fn error_metrics(observed: &[f64], fitted: &[f64]) -> Result<ErrorMetrics> {
    if observed.len() != fitted.len() {
        return Err(Error::LengthMismatch {
            left: observed.len(),
            right: fitted.len(),
        });
    }
    if observed.is_empty() {
        return Err(Error::TooShort { needed: 1, found: 0 });
    }
    let n = observed.len() as f64;
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut rel = 0.0;
    let mut rel_count = 0usize;
    let mut zero_observed = Vec::new();
    for (i, (&o, &f)) in observed.iter().zip(fitted).enumerate() {
        let e = (o - f).abs();
        sq += e * e;
        abs += e;
        if o == 0.0 {
            zero_observed.push(i);
        } else {
            rel += e / o.abs();
            rel_count += 1;
        }
    }
    if !zero_observed.is_empty() {
        log::warn!("{} zero observation(s) left out of ARPE", zero_observed.len());
    }
    let aae = abs / n;
    let mean_obs = observed.iter().sum::<f64>() / n;
    Ok(ErrorMetrics {
        rmse: (sq / n).sqrt(),
        ape: if mean_obs == 0.0 {
            f64::NAN
        } else {
            aae / mean_obs.abs()
        },
        aae,
        arpe: if rel_count == 0 {
            f64::NAN
        } else {
            rel / rel_count as f64
        },
        zero_observed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_fit_is_all_zero() {
        let m = error_metrics(&[1.0, 2.0, 5.0], &[1.0, 2.0, 5.0]).unwrap();
        assert_eq!((m.rmse, m.ape, m.aae, m.arpe), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn single_point() {
        let m = error_metrics(&[2.0], &[1.0]).unwrap();
        assert_eq!((m.rmse, m.aae, m.arpe, m.ape), (1.0, 1.0, 0.5, 0.5));
    }

    #[test]
    fn zero_observation_is_skipped_and_flagged() {
        let m = error_metrics(&[0.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!(m.zero_observed, vec![0]);
        assert_eq!(m.arpe, 0.5);
        assert_eq!(m.aae, 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            error_metrics(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { left: 1, right: 2 })
        ));
    }
}
