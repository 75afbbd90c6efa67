use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::geometry::{lattice_point, steering_matrix};

use super::{EvalError, Scene};

/// Cramér–Rao reference for the per-component frequency error.
///
/// The Fisher matrix of the deterministic-amplitude model `A R(f) u` is built
/// over the active frequency components and the real and imaginary parts of
/// each amplitude. Each frequency variance is turned into an expected absolute
/// deviation with the Gaussian factor `√(2/π)`, and the results are averaged.
pub fn crlb(scene: &Scene) -> Result<f64, EvalError> {
    if !(scene.sigma > 0.0) {
        return Err(EvalError::InvalidConfig("the bound needs sigma > 0".into()));
    }
    let dims = scene.sensing.virtual_dims();
    let freqs = scene.freqs.points();
    let amps = scene.freqs.amplitudes().ok_or(EvalError::MissingAmplitudes)?;
    let axes: Vec<usize> = (0..3).filter(|&a| scene.freqs.active()[a]).collect();
    let k = freqs.len();
    let nf = k * axes.len();
    let np = nf + 2 * k;
    let rows = scene.sensing.row_to_virtual();
    let r = scene.sensing.apply_rows(&steering_matrix(dims, freqs));

    let mut jac = DMatrix::<Complex64>::zeros(rows.len(), np);
    for (i, &flat) in rows.iter().enumerate() {
        let p = lattice_point(dims, flat);
        for kk in 0..k {
            let atom = r[(i, kk)];
            for (q, &ax) in axes.iter().enumerate() {
                let w = Complex64::new(0.0, -std::f64::consts::TAU * p[ax] as f64);
                jac[(i, kk * axes.len() + q)] = atom * amps[kk] * w;
            }
            jac[(i, nf + 2 * kk)] = atom;
            jac[(i, nf + 2 * kk + 1)] = atom * Complex64::i();
        }
    }
    let scale = 2.0 / (scene.sigma * scene.sigma);
    let fisher = (jac.adjoint() * &jac).map(|v| v.re * scale);
    let inv = fisher.cholesky().ok_or(EvalError::SingularFisher)?.inverse();
    let mut total = 0.0;
    for i in 0..nf {
        let var = inv[(i, i)];
        if !(var > 0.0 && var.is_finite()) {
            return Err(EvalError::SingularFisher);
        }
        total += var.sqrt();
    }
    Ok((2.0 / std::f64::consts::PI).sqrt() * total / nf as f64)
}
