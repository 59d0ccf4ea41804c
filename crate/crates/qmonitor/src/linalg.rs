//! Small dense complex-matrix kernels: Hermitian eigendecomposition wrappers,
//! operator norms, principal square roots, trace distance.

use crate::{C64, CMat, QmError};
use nalgebra::DVector;

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

/// Computational basis ket |n> as a column vector.
pub fn basis_ket(d: usize, n: usize) -> DVector<C64> {
    let mut v = DVector::zeros(d);
    v[n] = C64::new(1.0, 0.0);
    v
}

/// |i><j| on a d-dimensional space.
pub fn ketbra(d: usize, i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(d, d);
    m[(i, j)] = C64::new(1.0, 0.0);
    m
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a * b + b * a
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().sum()
}

/// Max entrywise deviation from Hermiticity, |m - m^dag|_max.
pub fn hermitian_deviation(m: &CMat) -> f64 {
    let adj = m.adjoint();
    (m - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_entry(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Real eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = m.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let d = m.nrows();
    let mut vecs = CMat::zeros(d, d);
    for (col, &i) in idx.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    let (vals, _) = hermitian_eigen(m);
    vals[0]
}

/// Spectral norm of a Hermitian matrix (largest |eigenvalue|).
pub fn hermitian_norm(m: &CMat) -> f64 {
    let (vals, _) = hermitian_eigen(m);
    vals.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Operator (spectral) norm of a general matrix, sqrt of lambda_max(m^dag m).
pub fn operator_norm(m: &CMat) -> f64 {
    let gram = m.adjoint() * m;
    let (vals, _) = hermitian_eigen(&gram);
    vals.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Principal square root of a Hermitian positive-semidefinite matrix.
///
/// Eigenvalues in [-tol, 0) are clamped to zero; anything lower is an error.
pub fn sqrt_psd(m: &CMat, tol: f64) -> Result<CMat, QmError> {
    let (vals, vecs) = hermitian_eigen(m);
    if vals[0] < -tol {
        return Err(QmError::NotPositive(vals[0]));
    }
    let d = m.nrows();
    let sqrt_diag = CMat::from_diagonal(&DVector::from_iterator(
        d,
        vals.iter().map(|&v| C64::new(v.max(0.0).sqrt(), 0.0)),
    ));
    Ok(&vecs * sqrt_diag * vecs.adjoint())
}

/// Trace distance (1/2)||a - b||_1 between Hermitian matrices.
pub fn trace_distance(a: &CMat, b: &CMat) -> f64 {
    let diff = a - b;
    let (vals, _) = hermitian_eigen(&diff);
    0.5 * vals.iter().map(|v| v.abs()).sum::<f64>()
}

/// exp(-i * m * t) for Hermitian m, via eigendecomposition.
pub fn unitary_from_hermitian(eigvals: &[f64], eigvecs: &CMat, t: f64) -> CMat {
    let d = eigvecs.nrows();
    let phases = CMat::from_diagonal(&DVector::from_iterator(
        d,
        eigvals.iter().map(|&v| C64::from_polar(1.0, -v * t)),
    ));
    eigvecs * phases * eigvecs.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sigma_x() -> CMat {
        CMat::from_row_slice(2, 2, &[
            C64::new(0.0, 0.0), C64::new(1.0, 0.0),
            C64::new(1.0, 0.0), C64::new(0.0, 0.0),
        ])
    }

    #[test]
    fn hermitian_eigen_pauli_x() {
        let (vals, vecs) = hermitian_eigen(&sigma_x());
        assert_abs_diff_eq!(vals[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-12);
        // reconstruct
        let d = CMat::from_diagonal(&DVector::from_iterator(
            2,
            vals.iter().map(|&v| C64::new(v, 0.0)),
        ));
        let rec = &vecs * d * vecs.adjoint();
        assert!(max_abs_entry(&(rec - sigma_x())) < 1e-12);
    }

    #[test]
    fn sqrt_of_projector_is_projector() {
        let p = ketbra(2, 0, 0);
        let s = sqrt_psd(&p, 1e-12).unwrap();
        assert!(max_abs_entry(&(s.clone() * s - p)) < 1e-12);
    }

    #[test]
    fn operator_norm_of_lowering_is_one() {
        let a = ketbra(2, 0, 1); // |0><1|
        assert_abs_diff_eq!(operator_norm(&a), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unitary_rotation_half_turn() {
        let (vals, vecs) = hermitian_eigen(&sigma_x());
        let u = unitary_from_hermitian(&vals, &vecs, std::f64::consts::PI / 2.0);
        // exp(-i sigma_x pi/2) = -i sigma_x
        let expect = sigma_x().map(|z| z * C64::new(0.0, -1.0));
        assert!(max_abs_entry(&(u - expect)) < 1e-12);
    }

    #[test]
    fn trace_distance_orthogonal_projectors() {
        let p0 = ketbra(2, 0, 0);
        let p1 = ketbra(2, 1, 1);
        assert_abs_diff_eq!(trace_distance(&p0, &p1), 1.0, epsilon = 1e-12);
    }
}
