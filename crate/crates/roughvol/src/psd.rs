//! Symmetric-eigendecomposition factorization of covariance matrices with an
//! explicit clipping policy for eigenvalues that are zero up to noise.
//!
//! Exact joint covariances are PSD in exact arithmetic but their floating
//! point images routinely carry eigenvalues like ±1e−14·λmax — genuinely
//! degenerate directions (e.g. W^H ≡ W at H = 1/2) land on either side of
//! zero. Everything inside the window |λ| ≤ clip_tol·λmax is clipped to zero
//! and counted, which keeps noise out of the factor's null directions;
//! anything below −clip_tol·λmax means the matrix is genuinely broken and
//! factorization is refused.

use crate::error::{Result, RoughVolError};
use crate::real::Real;
use nalgebra::DMatrix;
use num_traits::Float;

/// Default relative threshold separating numerical noise from a real
/// negative eigenvalue.
pub const DEFAULT_CLIP_TOL: f64 = 1e-10;

/// Result of factoring Σ ≈ F·Fᵀ.
#[derive(Clone, Debug)]
pub struct PsdFactor<T: Real> {
    /// F = V·diag(√max(λ, 0)), same shape as Σ
    pub factor: DMatrix<T>,
    /// how many eigenvalues were clipped to zero
    pub clipped: usize,
    /// most negative eigenvalue encountered (0 if none were negative)
    pub most_negative: T,
    /// largest eigenvalue
    pub lambda_max: T,
}

/// Factor a symmetric matrix as F·Fᵀ via eigendecomposition.
///
/// Eigenvalues with |λ| ≤ clip_tol·λmax are clipped to zero (both signs:
/// a degenerate direction's noise is as likely to land at +1e−15 as at
/// −1e−15, and keeping the positive side would inject spurious √λ-amplitude
/// noise exactly along null directions); any eigenvalue below
/// −clip_tol·λmax aborts with `NotPsd`. `clip_tol` is relative to λmax.
pub fn psd_factor<T: Real>(sigma: &DMatrix<T>, clip_tol: T) -> Result<PsdFactor<T>> {
    debug_assert_eq!(sigma.nrows(), sigma.ncols());
    let eig = sigma.clone().symmetric_eigen();
    let lambda_max = eig
        .eigenvalues
        .iter()
        .fold(T::zero(), |acc, &l| Float::max(acc, l));
    let cutoff = clip_tol * lambda_max;

    let mut clipped = 0usize;
    let mut most_negative = T::zero();
    let n = sigma.nrows();
    let mut factor = eig.eigenvectors;
    for j in 0..n {
        let l = eig.eigenvalues[j];
        let scaled = if l > cutoff {
            Float::sqrt(l)
        } else {
            if l < -cutoff {
                return Err(RoughVolError::NotPsd {
                    min_eig: l.as_f64(),
                    threshold: (-cutoff).as_f64(),
                });
            }
            most_negative = Float::min(most_negative, l);
            if l != T::zero() {
                clipped += 1;
            }
            T::zero()
        };
        for i in 0..n {
            factor[(i, j)] *= scaled;
        }
    }
    Ok(PsdFactor {
        factor,
        clipped,
        most_negative,
        lambda_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cov::build_joint_covariance;
    use crate::grid::TimeGrid;
    use crate::hurst::HurstParams;

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    #[test]
    fn identity_factors_to_orthogonal() {
        let id = DMatrix::<f64>::identity(4, 4);
        let f = psd_factor(&id, 1e-10).unwrap();
        assert_eq!(f.clipped, 0);
        assert_eq!(f.most_negative, 0.0);
        let prod = &f.factor * f.factor.transpose();
        assert!(max_abs_diff(&prod, &id) < 1e-12);
    }

    #[test]
    fn tiny_negative_eigenvalue_is_clipped() {
        let sigma = DMatrix::<f64>::from_diagonal(&nalgebra::DVector::from_vec(vec![
            1.0, -1e-12,
        ]));
        let f = psd_factor(&sigma, 1e-10).unwrap();
        assert_eq!(f.clipped, 1);
        assert!((f.most_negative - -1e-12).abs() < 1e-24);
        assert_eq!(f.lambda_max, 1.0);
        let prod = &f.factor * f.factor.transpose();
        let clipped_target =
            DMatrix::<f64>::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.0]));
        assert!(max_abs_diff(&prod, &clipped_target) < 1e-12);
    }

    #[test]
    fn large_negative_eigenvalue_is_refused() {
        let sigma = DMatrix::<f64>::from_diagonal(&nalgebra::DVector::from_vec(vec![
            1.0, -0.5,
        ]));
        match psd_factor(&sigma, 1e-10) {
            Err(RoughVolError::NotPsd { min_eig, threshold }) => {
                assert!((min_eig - -0.5).abs() < 1e-12);
                assert!((threshold - -1e-10).abs() < 1e-20);
            }
            other => panic!("expected NotPsd, got {other:?}"),
        }
    }

    #[test]
    fn joint_covariance_round_trip() {
        for h in [0.05, 0.1, 0.5] {
            let grid = TimeGrid::new(1.0f64, 16).unwrap();
            let hp = HurstParams::new(h).unwrap();
            let sigma = build_joint_covariance(&grid, &hp).unwrap().assemble();
            let f = psd_factor(&sigma, 1e-10).unwrap();
            let prod = &f.factor * f.factor.transpose();
            let err = max_abs_diff(&prod, &sigma);
            assert!(
                err <= 1e-8 * f.lambda_max,
                "H={h}: reconstruction error {err} vs λmax {}",
                f.lambda_max
            );
            assert!(f.most_negative >= -1e-10 * f.lambda_max);
        }
    }

    #[test]
    fn zero_matrix_is_psd() {
        let sigma = DMatrix::<f64>::zeros(3, 3);
        let f = psd_factor(&sigma, 1e-10).unwrap();
        assert_eq!(f.clipped, 0);
        assert_eq!(f.lambda_max, 0.0);
        assert!(f.factor.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn f32_round_trip() {
        let grid = TimeGrid::new(1.0f32, 4).unwrap();
        let hp = HurstParams::<f32>::new(0.25).unwrap();
        let sigma = build_joint_covariance(&grid, &hp).unwrap().assemble();
        let f = psd_factor(&sigma, 1e-4f32).unwrap();
        let prod = &f.factor * f.factor.transpose();
        let err = (&prod - &sigma).iter().fold(0.0f32, |m, &v| m.max(v.abs()));
        assert!(err <= 1e-4 * f.lambda_max);
    }
}
