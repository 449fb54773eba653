//! Dense complex linear algebra at fixed small dimension.
//!
//! Matrices are column-major `nalgebra` storage. All spectral routines
//! assume Hermitian input; the caller is responsible for symmetrizing
//! first (every state type in this crate enforces that invariant).

use nalgebra::{Complex, DMatrix, DVector};

/// Complex scalar used throughout.
pub type C64 = Complex<f64>;
/// Dense complex matrix (column-major).
pub type CMat = DMatrix<C64>;
/// Dense real matrix.
pub type RMat = DMatrix<f64>;
/// Dense real vector.
pub type RVec = DVector<f64>;

/// Imaginary unit.
pub const I: C64 = Complex::new(0.0, 1.0);

/// n x n identity.
pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// n x n zero matrix.
pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

/// Hermitian part (A + A†)/2.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Relative Hermiticity defect ‖A − A†‖_F / max(1, ‖A‖_F).
pub fn hermiticity_defect(a: &CMat) -> f64 {
    (a - a.adjoint()).norm() / a.norm().max(1.0)
}

/// Frobenius norm of the commutator ‖AB − BA‖_F.
pub fn commutation_defect(a: &CMat, b: &CMat) -> f64 {
    (a * b - b * a).norm()
}

/// Real part of the trace.
pub fn trace_re(a: &CMat) -> f64 {
    a.trace().re
}

/// Real part of Tr(AB), evaluated without forming the product matrix.
pub fn trace_product_re(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            let x = a[(r, c)];
            let y = b[(c, r)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

/// Imaginary part of Tr(AB), evaluated without forming the product matrix.
pub fn trace_product_im(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            let x = a[(r, c)];
            let y = b[(c, r)];
            acc += x.re * y.im + x.im * y.re;
        }
    }
    acc
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
/// Returns (eigenvalues, unitary of eigenvectors as columns).
pub fn hermitian_eigen(a: &CMat) -> (RVec, CMat) {
    let eig = a.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = RVec::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &CMat) -> f64 {
    let eig = a.clone().symmetric_eigen();
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// exp(A) for Hermitian A via eigendecomposition; exact up to the
/// eigensolver's accuracy, independent of ‖A‖.
pub fn exp_hermitian(a: &CMat) -> CMat {
    let (values, u) = hermitian_eigen(a);
    let d = CMat::from_diagonal(&values.map(|w| C64::new(w.exp(), 0.0)));
    &u * d * u.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn sample_hermitian() -> CMat {
        let mut m = zeros(3);
        m[(0, 0)] = C64::new(2.0, 0.0);
        m[(1, 1)] = C64::new(-1.0, 0.0);
        m[(2, 2)] = C64::new(0.5, 0.0);
        m[(0, 1)] = C64::new(0.3, 0.7);
        m[(1, 0)] = C64::new(0.3, -0.7);
        m[(1, 2)] = C64::new(-0.2, 0.1);
        m[(2, 1)] = C64::new(-0.2, -0.1);
        m
    }

    #[test]
    fn eigen_reconstructs_hermitian_input() {
        let m = sample_hermitian();
        let (values, u) = hermitian_eigen(&m);
        let d = CMat::from_diagonal(&values.map(|w| C64::new(w, 0.0)));
        let rec = &u * d * u.adjoint();
        assert!((rec - &m).norm() < TOL);
        for i in 1..values.len() {
            assert!(values[i - 1] <= values[i]);
        }
    }

    #[test]
    fn exp_hermitian_matches_series_on_small_input() {
        let m = sample_hermitian().scale(0.05);
        // Truncated power series is accurate for ‖A‖ ≪ 1.
        let mut series = identity(3);
        let mut term = identity(3);
        for k in 1..20 {
            term = (&term * &m).scale(1.0 / k as f64);
            series += &term;
        }
        assert!((exp_hermitian(&m) - series).norm() < 1e-13);
    }

    #[test]
    fn trace_product_agrees_with_materialized_product() {
        let a = sample_hermitian();
        let b = exp_hermitian(&a.scale(0.1));
        assert!((trace_product_re(&a, &b) - (&a * &b).trace().re).abs() < TOL);
    }

    #[test]
    fn hermiticity_defect_detects_asymmetry() {
        let mut m = sample_hermitian();
        assert!(hermiticity_defect(&m) < 1e-15);
        m[(0, 2)] = C64::new(0.1, 0.0);
        assert!(hermiticity_defect(&m) > 1e-3);
    }
}
