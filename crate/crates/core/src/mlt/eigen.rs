//! Hermitian eigendecomposition.
//!
//! Two routes are provided. [`jacobi_eigh`] is a cyclic complex Jacobi
//! sweep, slow but simple and accurate to the last few ulps; it backs the
//! test oracles. [`eigh`] is the production route used inside the solver
//! loops (Householder tridiagonalisation followed by implicit QR).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::MltError;

/// Off-diagonal Frobenius norm (relative to the full norm) at which Jacobi stops.
pub const JACOBI_TOL: f64 = 1e-12;
/// Maximum number of cyclic sweeps before [`MltError::EigenFailure`].
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenpairs sorted by descending eigenvalue.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors, in the same order as `values`.
    pub vectors: DMatrix<Complex64>,
}

impl Eigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Rebuilds `V diag(f(λ)) V†` for the eigenpairs kept by `f` (returning `None` drops the pair).
    pub fn reconstruct<F>(&self, mut f: F) -> DMatrix<Complex64>
    where
        F: FnMut(usize, f64) -> Option<f64>,
    {
        let n = self.dim();
        let mut scaled = Vec::new();
        let mut kept = Vec::new();
        for (k, &lam) in self.values.iter().enumerate() {
            match f(k, lam) {
                Some(w) if w != 0.0 => {
                    kept.push(k);
                    scaled.push(w);
                }
                _ => {}
            }
        }
        if kept.is_empty() {
            return DMatrix::zeros(n, n);
        }
        let v = self.vectors.select_columns(kept.iter());
        let mut vw = v.clone();
        for (j, &w) in scaled.iter().enumerate() {
            vw.column_mut(j).scale_mut(w);
        }
        vw * v.adjoint()
    }
}

fn sort_descending(values: Vec<f64>, vectors: DMatrix<Complex64>) -> Eigen {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut sorted = DMatrix::<Complex64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted.set_column(dst, &vectors.column(src));
    }
    Eigen {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: sorted,
    }
}

/// Eigendecomposition of a Hermitian matrix (only the Hermitian part of `a` is used).
pub fn eigh(a: &DMatrix<Complex64>) -> Result<Eigen, MltError> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let sym = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let dec = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000).ok_or(MltError::EigenFailure {
        sweeps: 10_000,
        off_diagonal: f64::NAN,
    })?;
    let values: Vec<f64> = dec.eigenvalues.iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MltError::EigenFailure {
            sweeps: 0,
            off_diagonal: f64::NAN,
        });
    }
    Ok(sort_descending(values, dec.eigenvectors))
}

/// Cyclic Jacobi eigendecomposition of a complex Hermitian matrix.
///
/// Each rotation removes the phase of the pivot `a_pq` and then applies a
/// real Givens rotation, so the unitary factor is
/// `[[c, s e^{iφ}], [-s e^{-iφ}, c]]` on the `(p, q)` plane.
pub fn jacobi_eigh(a: &DMatrix<Complex64>) -> Result<Eigen, MltError> {
    let n = a.nrows();
    // column-major working copies
    let mut m: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for i in 0..n {
            m[i + j * n] = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
        }
    }
    let mut v: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        v[i + i * n] = Complex64::new(1.0, 0.0);
    }
    let total: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let off = |m: &[Complex64]| -> f64 {
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    s += m[i + j * n].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off_norm = off(&m);
        if off_norm <= JACOBI_TOL * total || total == 0.0 {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(MltError::EigenFailure {
                sweeps,
                off_diagonal: off_norm / total,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p + q * n];
                let mag = apq.norm();
                if mag <= f64::MIN_POSITIVE || mag <= 1e-18 * total {
                    continue;
                }
                let phase = apq / mag; // e^{iφ}
                let app = m[p + p * n].re;
                let aqq = m[q + q * n].re;
                let zeta = (aqq - app) / (2.0 * mag);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let s_ph = phase * s; // s e^{iφ}
                let s_ph_c = s_ph.conj(); // s e^{-iφ}

                // columns: A <- A G
                for k in 0..n {
                    let akp = m[k + p * n];
                    let akq = m[k + q * n];
                    m[k + p * n] = akp * c - akq * s_ph_c;
                    m[k + q * n] = akp * s_ph + akq * c;
                }
                // rows: A <- G^† A
                for k in 0..n {
                    let apk = m[p + k * n];
                    let aqk = m[q + k * n];
                    m[p + k * n] = apk * c - aqk * s_ph;
                    m[q + k * n] = apk * s_ph_c + aqk * c;
                }
                m[p + q * n] = Complex64::new(0.0, 0.0);
                m[q + p * n] = Complex64::new(0.0, 0.0);
                m[p + p * n].im = 0.0;
                m[q + q * n].im = 0.0;
                // eigenvectors: V <- V G
                for k in 0..n {
                    let vkp = v[k + p * n];
                    let vkq = v[k + q * n];
                    v[k + p * n] = vkp * c - vkq * s_ph_c;
                    v[k + q * n] = vkp * s_ph + vkq * c;
                }
            }
        }
    }
    let values: Vec<f64> = (0..n).map(|i| m[i + i * n].re).collect();
    let vectors = DMatrix::from_column_slice(n, n, &v);
    Ok(sort_descending(values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::<Complex64>::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
    }

    fn check(a: &DMatrix<Complex64>, e: &Eigen, tol: f64) {
        let n = a.nrows();
        let rec = e.reconstruct(|_, l| Some(l));
        assert!((a - &rec).norm() < tol * (1.0 + a.norm()), "reconstruction");
        let vv = e.vectors.adjoint() * &e.vectors;
        assert!((vv - DMatrix::<Complex64>::identity(n, n)).norm() < tol);
        for w in e.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn jacobi_reconstructs_random_hermitian() {
        for (n, seed) in [(1, 1), (2, 2), (5, 3), (13, 4), (30, 5)] {
            let a = random_hermitian(n, seed);
            let e = jacobi_eigh(&a).unwrap();
            check(&a, &e, 1e-11);
        }
    }

    #[test]
    fn fast_route_agrees_with_jacobi() {
        for (n, seed) in [(3, 10), (8, 11), (19, 12), (40, 13)] {
            let a = random_hermitian(n, seed);
            let fast = eigh(&a).unwrap();
            check(&a, &fast, 1e-10);
            let slow = jacobi_eigh(&a).unwrap();
            for (x, y) in fast.values.iter().zip(&slow.values) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn diagonal_input_is_already_converged() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(3.0, 0.0),
        ]));
        let e = jacobi_eigh(&a).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0, -1.0]);
    }

    #[test]
    fn empty_matrix() {
        let e = eigh(&DMatrix::zeros(0, 0)).unwrap();
        assert_eq!(e.dim(), 0);
    }
}
