//! Dense complex helpers: pseudo-inverse, least squares and the general
//! (non-Hermitian) eigendecomposition.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

/// Minimum-norm least-squares solution of `A X = B`, discarding singular
/// values below `rtol · σ_max`. Also returns the retained rank.
pub fn least_squares(
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
    rtol: f64,
) -> (DMatrix<Complex64>, usize) {
    let (ap, rank) = pinv_rank(a, rtol);
    (ap * b, rank)
}

/// Moore–Penrose pseudo-inverse with relative cutoff `rtol`.
pub fn pinv(a: &DMatrix<Complex64>, rtol: f64) -> DMatrix<Complex64> {
    pinv_rank(a, rtol).0
}

fn pinv_rank(a: &DMatrix<Complex64>, rtol: f64) -> (DMatrix<Complex64>, usize) {
    if a.is_empty() {
        return (DMatrix::zeros(a.ncols(), a.nrows()), 0);
    }
    let svd = a.clone().svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut out = DMatrix::<Complex64>::zeros(a.ncols(), a.nrows());
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if smax == 0.0 || s <= rtol * smax {
            continue;
        }
        rank += 1;
        let v = vt.row(k).adjoint();
        let uk = u.column(k).adjoint();
        out += v * uk * Complex64::new(1.0 / s, 0.0);
    }
    (out, rank)
}

/// Eigenvalues and unit-norm eigenvectors of a general complex matrix, from
/// its Schur form followed by triangular back-substitution.
pub fn eig_general(m: &DMatrix<Complex64>) -> (Vec<Complex64>, DMatrix<Complex64>) {
    let n = m.nrows();
    if n == 0 {
        return (vec![], DMatrix::zeros(0, 0));
    }
    let (q, t) = Schur::new(m.clone()).unpack();
    let scale = t.norm().max(f64::MIN_POSITIVE);
    let mut x = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        let lam = t[(k, k)];
        x[(k, k)] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in (j + 1)..=k {
                acc += t[(j, i)] * x[(i, k)];
            }
            let mut den = t[(j, j)] - lam;
            if den.norm() < 1e-14 * scale {
                den = Complex64::new(1e-14 * scale, 0.0);
            }
            x[(j, k)] = -acc / den;
        }
    }
    let mut e = q * x;
    for k in 0..n {
        let nrm = e.column(k).norm();
        if nrm > 0.0 {
            let mut col = e.column_mut(k);
            col /= Complex64::new(nrm, 0.0);
        }
    }
    ((0..n).map(|k| t[(k, k)]).collect(), e)
}
