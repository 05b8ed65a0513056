//! Dense helpers for the small `d × d` matrices of the multivariate kernel.
//! Matrices are row-major slices.

use crate::scalar::Real;

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`.
pub fn cholesky<F: Real>(a: &[F], d: usize) -> Option<Vec<F>> {
    debug_assert_eq!(a.len(), d * d);
    let mut l = vec![F::zero(); d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s = s - l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > F::zero()) || !s.is_finite() {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// `ln |A|` from its Cholesky factor.
pub fn log_det_chol<F: Real>(l: &[F], d: usize) -> F {
    (0..d).map(|i| l[i * d + i].ln()).fold(F::zero(), |a, b| a + b) * F::of(2.0)
}

pub fn is_symmetric<F: Real>(a: &[F], d: usize) -> bool {
    (0..d).all(|i| {
        (0..i).all(|j| {
            let (x, y) = (a[i * d + j], a[j * d + i]);
            (x - y).abs() <= F::epsilon() * F::of(64.0) * (x.abs() + y.abs() + F::one())
        })
    })
}
