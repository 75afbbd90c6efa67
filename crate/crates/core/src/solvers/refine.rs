//! Levenberg–Marquardt fit of `r` atoms to a measurement, used to polish
//! approximate low-rank iterates into exact ones.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::geometry::{lattice_point, steering_matrix, wrap_unit, Dims, Freq, SensingMatrix};
use crate::vandermonde::least_squares;

#[derive(Debug, Clone)]
pub(crate) struct AtomFit {
    pub freqs: Vec<Freq>,
    pub amplitudes: Vec<Complex64>,
    /// `‖y − A R(f) u‖₂`.
    pub residual: f64,
}

fn residual_of(a: &SensingMatrix, y: &DVector<Complex64>, dims: Dims, freqs: &[Freq]) -> (Vec<Complex64>, f64) {
    let b = a.apply_rows(&steering_matrix(dims, freqs));
    let rhs = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
    let (u, _) = least_squares(&b, &rhs, 1e-12);
    let res = (&b * &u - rhs).norm();
    (u.column(0).iter().copied().collect(), res)
}

/// Minimizes `‖y − A R(f) u‖₂` jointly over frequencies on the active axes
/// and complex amplitudes, starting from `init`.
pub(crate) fn fit_atoms(
    y: &DVector<Complex64>,
    a: &SensingMatrix,
    dims: Dims,
    init: &[Freq],
    max_iterations: usize,
) -> AtomFit {
    let axes: Vec<usize> = (0..3).filter(|&ax| dims[ax] > 1).collect();
    let r = init.len();
    let m = y.len();
    let nf = axes.len() * r;
    let np = nf + 2 * r;
    let mut freqs = init.to_vec();
    let (mut amps, mut res) = residual_of(a, y, dims, &freqs);
    let positions: Vec<[f64; 3]> = a
        .row_to_virtual()
        .iter()
        .map(|&j| lattice_point(dims, j).map(|v| v as f64))
        .collect();
    let scale = 1.0 / (dims.iter().product::<usize>() as f64).sqrt();
    let mut lambda = 1e-3;

    for _ in 0..max_iterations {
        if res <= 1e-14 * y.norm().max(1.0) {
            break;
        }
        // real residual [Re; Im] of y − B u and its Jacobian
        let mut resid = DVector::<f64>::zeros(2 * m);
        let mut jac = DMatrix::<f64>::zeros(2 * m, np);
        for (row, p) in positions.iter().enumerate() {
            let mut model = Complex64::new(0.0, 0.0);
            for k in 0..r {
                let phase: f64 = (0..3).map(|ax| freqs[k][ax] * p[ax]).sum();
                let atom = Complex64::from_polar(scale, -std::f64::consts::TAU * phase);
                let term = atom * amps[k];
                model += term;
                // ∂model/∂f_α = −j2π p_α · term
                for (q, &ax) in axes.iter().enumerate() {
                    let d = term * Complex64::new(0.0, -std::f64::consts::TAU * p[ax]);
                    let col = k * axes.len() + q;
                    jac[(row, col)] = -d.re;
                    jac[(row + m, col)] = -d.im;
                }
                // ∂model/∂Re u = atom, ∂model/∂Im u = j·atom
                jac[(row, nf + 2 * k)] = -atom.re;
                jac[(row + m, nf + 2 * k)] = -atom.im;
                jac[(row, nf + 2 * k + 1)] = atom.im;
                jac[(row + m, nf + 2 * k + 1)] = -atom.re;
            }
            let diff = y[row] - model;
            resid[row] = diff.re;
            resid[row + m] = diff.im;
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &resid;
        let mut improved = false;
        for _ in 0..10 {
            let mut lhs = jtj.clone();
            for i in 0..np {
                lhs[(i, i)] += lambda * (jtj[(i, i)] + 1e-12);
            }
            let Some(step) = lhs.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut cand = freqs.clone();
            for k in 0..r {
                for (q, &ax) in axes.iter().enumerate() {
                    cand[k][ax] = wrap_unit(cand[k][ax] + step[k * axes.len() + q]);
                }
            }
            let (cu, cres) = residual_of(a, y, dims, &cand);
            if cres < res {
                freqs = cand;
                amps = cu;
                res = cres;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    AtomFit {
        freqs,
        amplitudes: amps,
        residual: res,
    }
}
