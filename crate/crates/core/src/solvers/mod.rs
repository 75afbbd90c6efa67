//! Gridless recovery programs over PSD d-LT matrices.
//!
//! All three programs share the augmented matrix
//! `[[T, s], [s†, t]]` of size `N̄ + 1`, with `T` d-LT. The convex programs
//! ([`solve_l1_an`], [`solve_l2_l1_an`]) run an alternating-direction method
//! between the PSD cone and the structured affine set; the rank heuristic
//! ([`solve_l0_rank_min`]) alternates projections between rank-capped PSD
//! matrices and the same affine set.

mod admm;
mod affine;
mod rank_min;
mod refine;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{steering_matrix, Dims};
use crate::mlt::{eigh, MLTMatrix, MltError};
use crate::vandermonde::{
    decompose_with, least_squares, DecomposeOptions, Decomposition, VandermondeError,
};

pub use admm::{solve_l1_an, solve_l2_l1_an};
pub use rank_min::solve_l0_rank_min;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("measurement has {got} entries but the array has {expected} antennas")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sensing lattice {sensing:?} differs from solver lattice {dims:?}")]
    LatticeMismatch { sensing: Dims, dims: Dims },
    #[error("tau must lie in (0, 1), got {0}")]
    InvalidTau(f64),
    #[error("tau bounds need N >= 2, got {0}")]
    InvalidN(usize),
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
    #[error("no rank up to {k_max} reached feasibility (best residual {best_residual:e})")]
    NotConverged { k_max: usize, best_residual: f64 },
    #[error(transparent)]
    Mlt(#[from] MltError),
    #[error(transparent)]
    Decomposition(#[from] VandermondeError),
}

/// Stopping and splitting parameters shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub max_iterations: usize,
    /// Penalty `ρ` of the splitting.
    pub rho: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Relative eigenvalue cutoff used when extracting frequencies.
    pub rank_tol: f64,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            rho: 1.0,
            eps_abs: 1e-8,
            eps_rel: 1e-6,
            rank_tol: 1e-8,
            seed: 0,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        let ok = self.max_iterations > 0
            && self.rho > 0.0
            && self.rho.is_finite()
            && self.eps_abs > 0.0
            && self.eps_abs < 1.0
            && self.eps_rel > 0.0
            && self.eps_rel < 1.0
            && self.rank_tol > 0.0
            && self.rank_tol < 1.0;
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// Output of a recovery program.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    /// Lower-right entry of the augmented matrix (`t`, or the rank for the heuristic).
    pub scalar: f64,
    pub s: DVector<Complex64>,
    pub structured: MLTMatrix,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
}

impl SdpSolution {
    pub fn dims(&self) -> Dims {
        self.structured.dims()
    }

    /// `[[T, s], [s†, scalar]]`.
    pub fn augmented(&self) -> DMatrix<Complex64> {
        affine::assemble(&self.structured, &self.s, self.scalar)
    }

    /// `(t + tr T)/2`.
    pub fn objective(&self) -> f64 {
        0.5 * (self.scalar + self.structured.size() as f64 * self.structured.get(0, 0, 0).re)
    }

    /// Smallest eigenvalue of the augmented matrix relative to the largest.
    pub fn psd_certificate(&self) -> Result<f64, SolverError> {
        let e = eigh(&self.augmented())?;
        let top = e.values.first().copied().unwrap_or(0.0);
        let bottom = e.values.last().copied().unwrap_or(0.0);
        Ok(if top > 0.0 { bottom / top } else { bottom })
    }
}

/// Closed-form bounds `(τ_l, τ_u)` on the best regularization weight for
/// noise standard deviation `sigma` and `n` measurements.
pub fn tau_bounds(sigma: f64, n: usize) -> Result<(f64, f64), SolverError> {
    if n < 2 {
        return Err(SolverError::InvalidN(n));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(SolverError::InvalidParams(format!("sigma = {sigma}")));
    }
    let nf = n as f64;
    let ln = nf.ln();
    let c = (4.0 * std::f64::consts::PI * ln).ln();
    let upper = 2.0 * sigma * (1.0 + 1.0 / ln) * (nf * ln + nf * c).max(0.0).sqrt();
    // the lower radicand is negative for very small N; the bound degenerates to 0 there
    let lower = 2.0 * sigma * (nf * ln - 0.5 * nf * c).max(0.0).sqrt();
    Ok((lower / (1.0 + lower), upper / (1.0 + upper)))
}

/// Runs the Vandermonde decomposition on the structured block of a solution
/// and fits complex amplitudes to `s` by least squares.
pub fn extract_frequencies(
    sol: &SdpSolution,
    rank_tol: f64,
    seed: u64,
) -> Result<Decomposition, SolverError> {
    extract_frequencies_with(
        sol,
        &DecomposeOptions {
            rank_tol,
            psd_tol: EXTRACT_PSD_TOL,
            seed,
            ..Default::default()
        },
    )
}

/// Negative-eigenvalue tolerance applied to solver outputs.
pub const EXTRACT_PSD_TOL: f64 = 1e-6;

/// Like [`extract_frequencies`] with explicit options. The solver's primal
/// residual bounds how far the returned point lies from the PSD cone, so it
/// widens the negative-eigenvalue allowance and eigenvalues below it count
/// as zero.
pub fn extract_frequencies_with(
    sol: &SdpSolution,
    opts: &DecomposeOptions,
) -> Result<Decomposition, SolverError> {
    let norm = sol.structured.materialize().as_matrix().norm();
    let opts = &DecomposeOptions {
        psd_tol: opts.psd_tol + if norm > 0.0 { sol.primal_residual / norm } else { 0.0 },
        eigen_floor: opts.eigen_floor.max(sol.primal_residual),
        ..*opts
    };
    let mut d = decompose_with(&sol.structured, opts)?;
    if d.rank_used == 0 {
        return Ok(d);
    }
    let r = steering_matrix(sol.dims(), d.freqs.points());
    let rhs = DMatrix::from_column_slice(sol.s.len(), 1, sol.s.as_slice());
    let (u, _) = least_squares(&r, &rhs, opts.rank_tol);
    d.amplitude_residual = (&r * &u - &rhs).norm();
    d.freqs = d
        .freqs
        .with_amplitudes(u.column(0).iter().copied().collect())
        .expect("one amplitude per frequency");
    Ok(d)
}

fn check_inputs(
    y: &DVector<Complex64>,
    a: &crate::geometry::SensingMatrix,
    dims: Dims,
    params: &SolverParams,
) -> Result<(), SolverError> {
    params.validate()?;
    if a.virtual_dims() != dims {
        return Err(SolverError::LatticeMismatch {
            sensing: a.virtual_dims(),
            dims,
        });
    }
    if y.len() != a.n() {
        return Err(SolverError::DimensionMismatch {
            expected: a.n(),
            got: y.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(sigma: f64, n: f64) -> (f64, f64) {
        // written out term by term, independent of the library arrangement
        let l = f64::ln(n);
        let inner_u = n * l + n * f64::ln(4.0 * std::f64::consts::PI * l);
        let a = 2.0 * sigma * (1.0 + 1.0 / l) * inner_u.sqrt();
        let inner_l = n * l - (n / 2.0) * f64::ln(4.0 * std::f64::consts::PI * l);
        let b = 2.0 * sigma * inner_l.sqrt();
        (b / (1.0 + b), a / (1.0 + a))
    }

    #[test]
    fn tau_bounds_zero_noise() {
        assert_eq!(tau_bounds(0.0, 56).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn tau_bounds_match_oracle() {
        let (l, u) = tau_bounds(0.1, 56).unwrap();
        let (ol, ou) = oracle(0.1, 56.0);
        assert!((l - ol).abs() < 1e-14 && (u - ou).abs() < 1e-14);
        assert!(l < u);
        let (l2, _) = tau_bounds(0.2, 56).unwrap();
        assert!(l < l2);
        // unit noise on the 56-antenna shell
        let (l, u) = tau_bounds(1.0, 56).unwrap();
        assert!((u - 0.981370953218467).abs() < 1e-9);
        assert!((l - 0.95555).abs() < 1e-4);
    }

    #[test]
    fn tau_bounds_ordering_grid() {
        for i in 0..10 {
            for j in 0..10 {
                let sigma = 0.01 + 0.3 * i as f64;
                let n = 8 + 25 * j;
                let (l, u) = tau_bounds(sigma, n).unwrap();
                assert!(0.0 <= l && l <= u && u < 1.0, "{sigma} {n}");
            }
        }
        assert!(matches!(tau_bounds(1.0, 1), Err(SolverError::InvalidN(1))));
    }
}
