//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::scalar::Real;

/// `(1/n) Σ u_i v_i` for grid functions on `n` cells (or stacked copies of them).
pub fn weighted_dot<T: Real>(u: &DVector<T>, v: &DVector<T>, n: usize) -> T {
    u.dot(v) / T::lit(n as f64)
}

pub fn frobenius<T: Real>(m: &DMatrix<T>) -> T {
    m.norm()
}

/// `‖M − Mᵀ‖_F / ‖M‖_F`, zero for the zero matrix.
pub fn relative_asymmetry<T: Real>(m: &DMatrix<T>) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let scale = m.norm().as_f64();
    if scale == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)]).as_f64();
            acc += 2.0 * d * d;
        }
    }
    acc.sqrt() / scale
}

/// Replaces `M` by `(M + Mᵀ)/2`.
pub fn symmetrize<T: Real>(m: &mut DMatrix<T>) {
    let half = T::lit(0.5);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            let s = (m[(i, j)] + m[(j, i)]) * half;
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
}

pub fn eigenvalues_sym<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    if m.is_empty() {
        return DVector::zeros(0);
    }
    SymmetricEigen::new(m.clone()).eigenvalues
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm_sym<T: Real>(m: &DMatrix<T>) -> T {
    eigenvalues_sym(m)
        .iter()
        .fold(T::zero(), |acc, &l| acc.max(l.abs()))
}

/// Largest singular value of an arbitrary matrix.
pub fn spectral_norm<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    let gram = m.transpose() * m;
    eigenvalues_sym(&gram)
        .iter()
        .fold(T::zero(), |acc, &l| acc.max(l))
        .max(T::zero())
        .sqrt()
}

pub fn min_eigenvalue<T: Real>(m: &DMatrix<T>) -> T {
    eigenvalues_sym(m)
        .iter()
        .fold(T::max_value().unwrap_or_else(T::one), |acc, &l| acc.min(l))
}

/// `‖A − B‖_F`.
pub fn distance<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    (a - b).norm()
}

/// Block-diagonal `A ⊕ B`.
pub fn direct_sum<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = DMatrix::zeros(ra + rb, ca + cb);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((ra, ca), (rb, cb)).copy_from(b);
    out
}

pub fn all_finite<T: Real>(m: &DMatrix<T>) -> bool {
    m.iter().all(|x| x.as_f64().is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_rotation_is_one() {
        let (s, c) = 0.3f64.sin_cos();
        let m = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        assert!((spectral_norm(&m) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn symmetrize_is_idempotent_projection() {
        let mut m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 3.0]);
        symmetrize(&mut m);
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 3.0]));
        assert_eq!(relative_asymmetry(&m), 0.0);
    }

    #[test]
    fn weighted_dot_normalizes_by_cells() {
        let one = DVector::from_element(7, 1.0f64);
        assert!((weighted_dot(&one, &one, 7) - 1.0).abs() < 1e-15);
    }
}
