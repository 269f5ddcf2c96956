//! Generalized variance: the instantaneous return covariance matrices of the
//! Heston and BNS portfolios and their determinants.
//!
//! With `D = diag(sigma)` the Heston covariance is `Sigma1 = D C D`, so
//! `|Sigma1| = |C| prod sigma_i^2`. The BNS covariance adds the common jump,
//! `Sigma2 = Sigma1 + lambda Var[Z*_1] rho rho^T`, a rank-one update whose
//! determinant follows from the matrix determinant lemma with
//! `Sigma1^{-1} = D^{-1} C^{-1} D^{-1}`.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::params::CorrelationMatrix;
use crate::scalar::Scalar;

/// Instantaneous volatilities `sigma_t^i`, all strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct InstantaneousVols<S> {
    sigma: Vec<S>,
}

impl<S: Scalar> InstantaneousVols<S> {
    pub fn new(sigma: Vec<S>) -> Result<Self> {
        if let Some(i) = sigma.iter().position(|&s| !(s > S::zero() && s.is_finite())) {
            return Err(Error::invalid(format!("sigma[{i}]"), "volatility must be positive"));
        }
        Ok(InstantaneousVols { sigma })
    }

    pub fn from_variances(variances: &[S]) -> Result<Self> {
        Self::new(variances.iter().map(|v| v.sqrt()).collect())
    }

    pub fn as_slice(&self) -> &[S] {
        &self.sigma
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

fn check_jump_inputs<S: Scalar>(n: usize, rho: &[S], lambda: S, var_z1: S) -> Result<()> {
    check_dim(n, rho.len())?;
    if !(lambda > S::zero()) {
        return Err(Error::invalid("lambda", "must be positive"));
    }
    if !(var_z1 >= S::zero()) {
        return Err(Error::invalid("var_z1", "must be non-negative"));
    }
    Ok(())
}

/// `Sigma1[l][m] = c_lm sigma_l sigma_m`.
pub fn build_sigma1<S: Scalar>(vols: &InstantaneousVols<S>, corr: &CorrelationMatrix<S>) -> Result<Matrix<S>> {
    check_dim(corr.n(), vols.len())?;
    let s = vols.as_slice();
    Ok(Matrix::from_fn(s.len(), s.len(), |l, m| corr.get(l, m) * s[l] * s[m]))
}

/// `|Sigma1| = |C| prod sigma_i^2`.
pub fn det_sigma1<S: Scalar>(vols: &InstantaneousVols<S>, corr: &CorrelationMatrix<S>) -> Result<S> {
    check_dim(corr.n(), vols.len())?;
    Ok(corr.det() * vols.as_slice().iter().fold(S::one(), |acc, &s| acc * s * s))
}

/// `|Sigma1|` from variances `sigma_i^2`; zero variances are allowed.
#[inline]
pub fn det_sigma1_from_variances<S: Scalar>(variances: &[S], corr: &CorrelationMatrix<S>) -> Result<S> {
    check_dim(corr.n(), variances.len())?;
    Ok(corr.det() * variances.iter().fold(S::one(), |acc, &v| acc * v))
}

/// `Sigma2 = Sigma1 + lambda var_z1 rho rho^T`.
pub fn build_sigma2<S: Scalar>(
    vols: &InstantaneousVols<S>,
    corr: &CorrelationMatrix<S>,
    rho: &[S],
    lambda: S,
    var_z1: S,
) -> Result<Matrix<S>> {
    let mut m = build_sigma1(vols, corr)?;
    check_jump_inputs(m.rows(), rho, lambda, var_z1)?;
    let scale = lambda * var_z1;
    for l in 0..m.rows() {
        for j in 0..m.cols() {
            m[(l, j)] = m[(l, j)] + scale * rho[l] * rho[j];
        }
    }
    Ok(m)
}

/// `|Sigma2|`. Three assets use the expanded polynomial form, any other
/// size uses the determinant lemma directly.
pub fn det_sigma2<S: Scalar>(
    vols: &InstantaneousVols<S>,
    corr: &CorrelationMatrix<S>,
    rho: &[S],
    lambda: S,
    var_z1: S,
) -> Result<S> {
    det_sigma2_of(vols.as_slice(), corr, rho, lambda, var_z1)
}

/// [`det_sigma2`] from variances `sigma_i^2 > 0`, without allocating for
/// three assets.
pub fn det_sigma2_from_variances<S: Scalar>(
    variances: &[S],
    corr: &CorrelationMatrix<S>,
    rho: &[S],
    lambda: S,
    var_z1: S,
) -> Result<S> {
    if let Some(i) = variances.iter().position(|&v| !(v > S::zero() && v.is_finite())) {
        return Err(Error::invalid(format!("variance[{i}]"), "must be positive"));
    }
    if let [v1, v2, v3] = *variances {
        det_sigma2_of(&[v1.sqrt(), v2.sqrt(), v3.sqrt()], corr, rho, lambda, var_z1)
    } else {
        let s: Vec<S> = variances.iter().map(|v| v.sqrt()).collect();
        det_sigma2_of(&s, corr, rho, lambda, var_z1)
    }
}

fn det_sigma2_of<S: Scalar>(s: &[S], corr: &CorrelationMatrix<S>, rho: &[S], lambda: S, var_z1: S) -> Result<S> {
    if s.len() == 3 {
        expanded(s, corr, rho, lambda, var_z1)
    } else {
        lemma(s, corr, rho, lambda, var_z1)
    }
}

/// `|Sigma1| (1 + lambda var_z1 rho^T Sigma1^{-1} rho)` for any `n`.
pub fn det_sigma2_lemma<S: Scalar>(
    vols: &InstantaneousVols<S>,
    corr: &CorrelationMatrix<S>,
    rho: &[S],
    lambda: S,
    var_z1: S,
) -> Result<S> {
    lemma(vols.as_slice(), corr, rho, lambda, var_z1)
}

/// Expanded three-asset determinant: `|C| prod sigma_i^2` plus
/// `lambda var_z1 |C|` times the `delta`-weighted polynomial in the vols.
pub fn det_sigma2_expanded<S: Scalar>(
    vols: &InstantaneousVols<S>,
    corr: &CorrelationMatrix<S>,
    rho: &[S],
    lambda: S,
    var_z1: S,
) -> Result<S> {
    expanded(vols.as_slice(), corr, rho, lambda, var_z1)
}

#[inline]
fn det1_of<S: Scalar>(s: &[S], corr: &CorrelationMatrix<S>) -> S {
    corr.det() * s.iter().fold(S::one(), |acc, &x| acc * x * x)
}

fn lemma<S: Scalar>(s: &[S], corr: &CorrelationMatrix<S>, rho: &[S], lambda: S, var_z1: S) -> Result<S> {
    let n = corr.n();
    check_dim(n, s.len())?;
    check_jump_inputs(n, rho, lambda, var_z1)?;
    let delta = corr.delta()?;
    // rho^T D^{-1} C^{-1} D^{-1} rho
    let mut quad = S::zero();
    for i in 0..n {
        let wi = rho[i] / s[i];
        for j in 0..n {
            quad = quad + wi * delta[(i, j)] * rho[j] / s[j];
        }
    }
    Ok(det1_of(s, corr) * (S::one() + lambda * var_z1 * quad))
}

fn expanded<S: Scalar>(s: &[S], corr: &CorrelationMatrix<S>, rho: &[S], lambda: S, var_z1: S) -> Result<S> {
    if s.len() != 3 {
        return Err(Error::WrongAssetCount {
            expected: 3,
            found: s.len(),
        });
    }
    check_dim(corr.n(), 3)?;
    check_jump_inputs(3, rho, lambda, var_z1)?;
    let d = corr.delta()?;
    let (s1, s2, s3) = (s[0], s[1], s[2]);
    let (v1, v2, v3) = (s1 * s1, s2 * s2, s3 * s3);
    let (r1, r2, r3) = (rho[0], rho[1], rho[2]);
    let two = S::lit(2.0);
    let jump = d[(0, 0)] * r1 * r1 * v3 * v2
        + d[(1, 1)] * r2 * r2 * v3 * v1
        + d[(2, 2)] * r3 * r3 * v2 * v1
        + two * d[(1, 0)] * r2 * r1 * v3 * s2 * s1
        + two * d[(2, 0)] * r3 * r1 * s3 * v2 * s1
        + two * d[(2, 1)] * r3 * r2 * s3 * s2 * v1;
    Ok(det1_of(s, corr) + lambda * var_z1 * corr.det() * jump)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vols(v: &[f64]) -> InstantaneousVols<f64> {
        InstantaneousVols::new(v.to_vec()).unwrap()
    }

    /// Leibniz formula over all permutations; independent of the LU path.
    fn leibniz_det(m: &Matrix<f64>) -> f64 {
        fn perms(n: usize) -> Vec<(Vec<usize>, f64)> {
            if n == 1 {
                return vec![(vec![0], 1.0)];
            }
            let mut out = Vec::new();
            for (p, sign) in perms(n - 1) {
                for pos in 0..n {
                    let mut q = p.clone();
                    q.insert(pos, n - 1);
                    let moved = (n - 1 - pos) as i32;
                    out.push((q, if moved % 2 == 0 { sign } else { -sign }));
                }
            }
            out
        }
        perms(m.rows())
            .into_iter()
            .map(|(p, sign)| sign * p.iter().enumerate().map(|(i, &j)| m[(i, j)]).product::<f64>())
            .sum()
    }

    #[test]
    fn sigma1_examples() {
        let id = CorrelationMatrix::identity(3).unwrap();
        assert_eq!(build_sigma1(&vols(&[1.0, 1.0, 1.0]), &id).unwrap(), Matrix::identity(3));
        assert_eq!(
            build_sigma1(&vols(&[2.0, 3.0, 4.0]), &id).unwrap(),
            Matrix::from_diagonal(&[4.0, 9.0, 16.0])
        );
        let c = CorrelationMatrix::from_rows(&[vec![1.0, 0.5, 0.0], vec![0.5, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(build_sigma1(&vols(&[1.0, 2.0, 3.0]), &c).unwrap()[(0, 1)], 1.0);
    }

    #[test]
    fn det_sigma1_examples() {
        let id = CorrelationMatrix::identity(3).unwrap();
        assert!((det_sigma1(&vols(&[1.0, 2.0, 3.0]), &id).unwrap() - 36.0).abs() < 1e-12);
        let eq = CorrelationMatrix::equicorrelated(3, 0.5).unwrap();
        let brute = leibniz_det(&build_sigma1(&vols(&[1.0, 1.0, 1.0]), &eq).unwrap());
        assert!((brute - 0.5).abs() < 1e-15);
        assert!((det_sigma1(&vols(&[1.0, 1.0, 1.0]), &eq).unwrap() - brute).abs() < 1e-15);
        let singular = CorrelationMatrix::equicorrelated(3, 1.0).unwrap();
        assert_eq!(det_sigma1(&vols(&[0.3, 0.2, 0.1]), &singular).unwrap(), 0.0);
        assert!(matches!(
            det_sigma1(&vols(&[1.0, 2.0]), &id),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sigma2_examples() {
        let id = CorrelationMatrix::identity(3).unwrap();
        let v = vols(&[1.0, 1.0, 1.0]);
        let s1 = build_sigma1(&v, &id).unwrap();
        assert_eq!(build_sigma2(&v, &id, &[0.0; 3], 2.0, 0.7).unwrap(), s1);
        assert_eq!(build_sigma2(&v, &id, &[-0.4; 3], 2.0, 0.0).unwrap(), s1);
        let s2 = build_sigma2(&v, &id, &[1.0; 3], 1.0, 1.0).unwrap();
        for l in 0..3 {
            for m in 0..3 {
                assert_eq!(s2[(l, m)], if l == m { 2.0 } else { 1.0 });
            }
        }
        assert!(build_sigma2(&v, &id, &[1.0; 3], 0.0, 1.0).is_err());
        assert!(build_sigma2(&v, &id, &[1.0; 3], 1.0, -1.0).is_err());
    }

    #[test]
    fn det_sigma2_examples() {
        let id = CorrelationMatrix::identity(3).unwrap();
        let v = vols(&[1.0, 1.0, 1.0]);
        assert_eq!(det_sigma2(&v, &id, &[1.0, 0.0, 0.0], 1.0, 3.0).unwrap(), 4.0);
        let eq = CorrelationMatrix::equicorrelated(3, 0.3).unwrap();
        let v = vols(&[0.2, 0.3, 0.4]);
        assert_eq!(
            det_sigma2(&v, &eq, &[0.0; 3], 1.0, 3.0).unwrap(),
            det_sigma1(&v, &eq).unwrap()
        );
        let singular = CorrelationMatrix::equicorrelated(3, 1.0).unwrap();
        assert!(matches!(
            det_sigma2(&v, &singular, &[0.1; 3], 1.0, 1.0),
            Err(Error::SingularCorrelation { .. })
        ));
    }

    #[test]
    fn lemma_handles_general_n() {
        let c = CorrelationMatrix::equicorrelated(5, 0.2).unwrap();
        let v = vols(&[0.1, 0.2, 0.3, 0.25, 0.15]);
        let rho = [-0.5, -0.1, 0.0, -0.3, -0.7];
        let lemma = det_sigma2(&v, &c, &rho, 1.5, 0.02).unwrap();
        let brute = leibniz_det(&build_sigma2(&v, &c, &rho, 1.5, 0.02).unwrap());
        assert!(((lemma - brute) / brute).abs() < 1e-12);
    }

    fn correlation_3() -> impl Strategy<Value = CorrelationMatrix<f64>> {
        // C = normalized B B^T with a ridge keeps it well conditioned.
        prop::collection::vec(-1.0..1.0_f64, 9).prop_map(|b| {
            let b = Matrix::from_row_slice(3, 3, &b).unwrap();
            let mut g = b.matmul(&b.transpose()).unwrap();
            for i in 0..3 {
                g[(i, i)] += 0.3;
            }
            let d: Vec<f64> = (0..3).map(|i| g[(i, i)].sqrt()).collect();
            let c = Matrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { g[(i, j)] / (d[i] * d[j]) });
            crate::params::validate_correlation(&c).unwrap()
        })
    }

    proptest! {
        #[test]
        fn det_sigma1_matches_brute_force(
            c in correlation_3(),
            s in prop::collection::vec(0.05..1.0_f64, 3),
        ) {
            let v = vols(&s);
            let brute = leibniz_det(&build_sigma1(&v, &c).unwrap());
            let fast = det_sigma1(&v, &c).unwrap();
            prop_assert!(((fast - brute) / brute).abs() < 1e-12);
        }

        #[test]
        fn det_sigma2_matches_brute_force_and_dominates(
            c in correlation_3(),
            s in prop::collection::vec(0.05..1.0_f64, 3),
            rho in prop::collection::vec(-1.0..0.5_f64, 3),
            lambda in 0.1..5.0_f64,
            var_z1 in 0.0..0.5_f64,
        ) {
            let v = vols(&s);
            let brute = leibniz_det(&build_sigma2(&v, &c, &rho, lambda, var_z1).unwrap());
            let expanded = det_sigma2_expanded(&v, &c, &rho, lambda, var_z1).unwrap();
            let lemma = det_sigma2_lemma(&v, &c, &rho, lambda, var_z1).unwrap();
            prop_assert!(((expanded - brute) / brute).abs() < 1e-12);
            prop_assert!(((lemma - brute) / brute).abs() < 1e-12);
            prop_assert!(expanded >= det_sigma1(&v, &c).unwrap() * (1.0 - 1e-14));
        }

        #[test]
        fn det_sigma1_scale_equivariance(
            c in correlation_3(),
            s in prop::collection::vec(0.05..1.0_f64, 3),
            k in 0.1..10.0_f64,
        ) {
            let base = det_sigma1(&vols(&s), &c).unwrap();
            let scaled: Vec<f64> = s.iter().map(|x| x * k).collect();
            let out = det_sigma1(&vols(&scaled), &c).unwrap();
            prop_assert!(((out - base * k.powi(6)) / out).abs() < 1e-12);
        }
    }
}
