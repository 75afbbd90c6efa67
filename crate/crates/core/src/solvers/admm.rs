//! Alternating-direction splitting for the atomic-norm programs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::affine::{AffinePoint, AffineSet, DataRule, ScalarRule};
use super::{check_inputs, SdpSolution, SolverError, SolverParams};
use crate::geometry::{Dims, SensingMatrix};
use crate::mlt::{eigh, MltError};

/// Minimizes `(t + tr T)/2` over PSD augmented matrices with `A s = y`.
pub fn solve_l1_an(
    y: &DVector<Complex64>,
    a: &SensingMatrix,
    dims: Dims,
    params: &SolverParams,
) -> Result<SdpSolution, SolverError> {
    check_inputs(y, a, dims, params)?;
    run(params, |rho| {
        let shift = 1.0 / (2.0 * rho);
        AffineSet::new(a, y, ScalarRule::Shift(shift), DataRule::Exact, shift)
    })
}

/// Minimizes `(1−τ)‖A s − y‖² + τ (t + tr T)/2` over PSD augmented matrices.
pub fn solve_l2_l1_an(
    y: &DVector<Complex64>,
    a: &SensingMatrix,
    dims: Dims,
    tau: f64,
    params: &SolverParams,
) -> Result<SdpSolution, SolverError> {
    check_inputs(y, a, dims, params)?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(SolverError::InvalidTau(tau));
    }
    run(params, |rho| {
        let shift = tau / (2.0 * rho);
        let data = DataRule::Prox { weight: 1.0 - tau, rho };
        AffineSet::new(a, y, ScalarRule::Shift(shift), data, shift)
    })
}

/// PSD projection of a Hermitian matrix (Hermitian part taken first).
pub(crate) fn psd_part(m: &DMatrix<Complex64>, rank_cap: Option<usize>) -> Result<DMatrix<Complex64>, MltError> {
    let e = eigh(m)?;
    let cap = rank_cap.unwrap_or(usize::MAX);
    Ok(e.reconstruct(|k, l| (k < cap && l > 0.0).then_some(l)))
}

/// Over-relaxation of the affine iterate.
const RELAXATION: f64 = 1.6;
/// Imbalance of the normalized residuals that triggers a change of penalty.
const RHO_BALANCE: f64 = 5.0;
const RHO_UPDATE_PERIOD: usize = 25;

/// Splitting loop with residual balancing; `make_set` builds the affine
/// step for a given penalty.
fn run(params: &SolverParams, make_set: impl Fn(f64) -> AffineSet) -> Result<SdpSolution, SolverError> {
    let mut rho = params.rho;
    let mut set = make_set(rho);
    let n = set.mask.len() + 1;
    let root_size = n as f64;
    let mut z = DMatrix::<Complex64>::zeros(n, n);
    let mut u = DMatrix::<Complex64>::zeros(n, n);
    // the first affine step sees s = Aᵀy through the data rule
    for j in 0..n - 1 {
        z[(j, n - 1)] = set.y_virtual[j];
        z[(n - 1, j)] = set.y_virtual[j].conj();
    }
    let mut point: AffinePoint = set.project(&z)?;
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=params.max_iterations {
        iterations = it;
        let g = &z - &u;
        point = set.project(&g)?;
        let m = point.assemble();
        let relaxed = &m * Complex64::new(RELAXATION, 0.0) + &z * Complex64::new(1.0 - RELAXATION, 0.0);
        let z_new = psd_part(&(&relaxed + &u), None)?;
        primal = (&m - &z_new).norm();
        dual = rho * (&z_new - &z).norm();
        u += &relaxed - &z_new;
        z = z_new;
        let eps_pri = root_size * params.eps_abs + params.eps_rel * m.norm().max(z.norm());
        let eps_dual = root_size * params.eps_abs + params.eps_rel * rho * u.norm();
        if primal <= eps_pri && dual <= eps_dual {
            converged = true;
            break;
        }
        if it % RHO_UPDATE_PERIOD == 0 {
            let ratio = ((primal / eps_pri) / (dual / eps_dual)).sqrt();
            if ratio.is_finite() && !(1.0 / RHO_BALANCE..=RHO_BALANCE).contains(&ratio) {
                rho *= ratio;
                u /= Complex64::new(ratio, 0.0);
                set = make_set(rho);
            }
        }
    }
    Ok(finish(point, iterations, primal, dual, converged))
}

/// Packages the final affine iterate, which is exactly structured and
/// feasible; its PSD gap is bounded by the primal residual.
pub(crate) fn finish(
    point: AffinePoint,
    iterations: usize,
    primal: f64,
    dual: f64,
    converged: bool,
) -> SdpSolution {
    SdpSolution {
        scalar: point.t,
        s: point.s,
        structured: point.structured,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        converged,
    }
}
