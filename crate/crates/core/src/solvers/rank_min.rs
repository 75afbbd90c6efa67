//! Alternating-projection heuristic for the rank-minimization program.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::admm::{finish, psd_part, solve_l1_an};
use super::affine::{AffinePoint, AffineSet, DataRule, ScalarRule};
use super::refine::{fit_atoms, AtomFit};
use super::{check_inputs, SdpSolution, SolverError, SolverParams};
use crate::geometry::{steering_matrix, Dims, Freq, SensingMatrix};
use crate::mlt::{mlt_from_atoms, MLTMatrix};
use crate::vandermonde::{decompose_with, DecomposeOptions};

/// Iterations between stagnation checks.
const CHECK_EVERY: usize = 200;
/// A rank is abandoned when a check window shrinks the residual by less than this factor.
const STAGNATION_RATIO: f64 = 0.95;
/// Relative data misfit below which a polished `r`-atom fit counts as exact.
const EXACT_FIT_RTOL: f64 = 1e-9;
const POLISH_ITERATIONS: usize = 60;
/// Random initializations of the atom fit tried once the projections at a rank stall.
const RESTARTS: usize = 20;

/// Searches `r = 1..=k_max` for the smallest rank at which alternating
/// projections between rank-`r` PSD augmented matrices and the affine set
/// (d-LT block, `A s = y`, lower-right entry pinned to `r`) meet.
///
/// The projections start from the atomic-norm solution. At every check the
/// current iterate is read as `r` atoms and polished by a local least-squares
/// fit; an exact fit yields a point lying in both sets, which ends the search.
/// When the projections at a rank stall, the fit is restarted from seeded
/// random atoms before moving on. `params.max_iterations` bounds the
/// projections spent on each rank.
pub fn solve_l0_rank_min(
    y: &DVector<Complex64>,
    a: &SensingMatrix,
    dims: Dims,
    params: &SolverParams,
    k_max: usize,
) -> Result<SdpSolution, SolverError> {
    check_inputs(y, a, dims, params)?;
    let n = a.n_virtual() + 1;
    if y.norm() == 0.0 {
        let set = AffineSet::new(a, y, ScalarRule::Pinned(0.0), DataRule::Exact, 0.0);
        let point = set.project(&DMatrix::zeros(n, n))?;
        return Ok(finish(point, 0, 0.0, 0.0, true));
    }
    let mut best_residual = f64::INFINITY;
    let warm = solve_l1_an(y, a, dims, params)?.augmented();
    for r in 1..=k_max {
        let set = AffineSet::new(a, y, ScalarRule::Pinned(r as f64), DataRule::Exact, 0.0);
        let mut point = set.project(&warm)?;
        let mut residual = f64::INFINITY;
        let mut checkpoint = f64::INFINITY;
        let mut spent = 0;
        for it in 1..=params.max_iterations {
            spent = it;
            let yk = point.assemble();
            let x = psd_part(&yk, Some(r))?;
            point = set.project(&x)?;
            residual = (&x - point.assemble()).norm();
            let tol = n as f64 * params.eps_abs + params.eps_rel * x.norm();
            if residual <= tol {
                return Ok(finish(point, it, residual, 0.0, true));
            }
            if it == 1 || it % CHECK_EVERY == 0 {
                if let Some(exact) = polish(y, a, dims, &point.structured, r, params.seed) {
                    let residual = (psd_part(&exact.assemble(), Some(r))? - exact.assemble()).norm();
                    return Ok(finish(exact, it, residual, 0.0, true));
                }
            }
            if it % CHECK_EVERY == 0 {
                if residual > STAGNATION_RATIO * checkpoint {
                    break;
                }
                checkpoint = residual;
            }
        }
        if let Some(exact) = restart(y, a, dims, r, params.seed) {
            let residual = (psd_part(&exact.assemble(), Some(r))? - exact.assemble()).norm();
            return Ok(finish(exact, spent, residual, 0.0, true));
        }
        best_residual = best_residual.min(residual);
    }
    Err(SolverError::NotConverged {
        k_max,
        best_residual,
    })
}

/// Reads `structured` as `r` atoms, refines them against `y` and, when the
/// fit is exact, returns the rank-`r` point built from the fitted atoms.
fn polish(
    y: &DVector<Complex64>,
    a: &SensingMatrix,
    dims: Dims,
    structured: &MLTMatrix,
    r: usize,
    seed: u64,
) -> Option<AffinePoint> {
    let opts = DecomposeOptions {
        psd_tol: f64::INFINITY,
        pairing_tol: f64::INFINITY,
        target_rank: Some(r),
        seed,
        ..Default::default()
    };
    let d = decompose_with(structured, &opts).ok()?;
    if d.rank_used != r {
        return None;
    }
    exact_point(y, dims, fit_atoms(y, a, dims, d.freqs.points(), POLISH_ITERATIONS), r)
}

/// Fits `r` atoms from seeded random starting frequencies and returns the
/// first exact fit as a rank-`r` point.
fn restart(y: &DVector<Complex64>, a: &SensingMatrix, dims: Dims, r: usize, seed: u64) -> Option<AffinePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (r as u64).rotate_left(32));
    (0..RESTARTS).find_map(|_| {
        let init: Vec<Freq> = (0..r)
            .map(|_| [0, 1, 2].map(|ax| if dims[ax] > 1 { rng.gen::<f64>() } else { 0.0 }))
            .collect();
        exact_point(y, dims, fit_atoms(y, a, dims, &init, POLISH_ITERATIONS), r)
    })
}

/// The rank-`r` point built from an atom fit, when the fit reproduces `y`.
fn exact_point(y: &DVector<Complex64>, dims: Dims, fit: AtomFit, r: usize) -> Option<AffinePoint> {
    if fit.residual > EXACT_FIT_RTOL * y.norm() {
        return None;
    }
    let mags: Vec<f64> = fit.amplitudes.iter().map(|u| u.norm()).collect();
    let total: f64 = mags.iter().sum();
    if mags.iter().any(|&m| m <= EXACT_FIT_RTOL * total) {
        return None;
    }
    // powers chosen so that Σ |u_k|²/p_k equals the pinned scalar r
    let powers: Vec<f64> = mags.iter().map(|m| m * total / r as f64).collect();
    let structured = mlt_from_atoms(dims, &fit.freqs, &powers).ok()?;
    let u = DVector::from_vec(fit.amplitudes);
    let s = steering_matrix(dims, &fit.freqs) * u;
    Some(AffinePoint {
        structured,
        s,
        t: r as f64,
    })
}
