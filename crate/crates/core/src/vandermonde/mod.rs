//! Multilevel Vandermonde decomposition of PSD d-LT matrices.
//!
//! Given a canonical PSD d-LT matrix `S = R P R†` with `R` built from
//! uniform steering vectors, recover the frequencies and powers. The
//! procedure factors `S = C C†`, reads per-axis shift operators off the
//! factor, and pairs their eigenvalues through a random joint
//! diagonalization.

mod linalg;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{active_axes, steering_matrix, wrap_unit, Dims, Freq, FrequencySet};
use crate::mlt::{MLTMatrix, MltError};
pub use linalg::{eig_general, least_squares, pinv};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VandermondeError {
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPSD { min_eigenvalue: f64 },
    #[error("shift stack has rank {rank} < {needed}")]
    RankDeficientStack { rank: usize, needed: usize },
    #[error("rank condition violated: rank {rank}, corner rank {corner_rank}, Z = {z}")]
    RankConditionViolated {
        rank: usize,
        corner_rank: usize,
        z: usize,
    },
    #[error("shift operators are not jointly diagonalizable (off-diagonal mass {0:e})")]
    PairingDegeneracy(f64),
    #[error("dims {0:?} are not in canonical ascending order")]
    NotCanonical(Dims),
    #[error(transparent)]
    Mlt(#[from] MltError),
}

/// Frequencies and powers recovered from a d-LT matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub freqs: FrequencySet,
    pub powers: Vec<f64>,
    /// `‖S − R P R†‖_F`.
    pub residual: f64,
    pub rank_used: usize,
    /// Largest relative off-diagonal mass left after joint diagonalization.
    pub pairing_defect: f64,
    /// Largest `| |λ| − 1 |` over the shift-operator eigenvalues.
    pub unimodularity_defect: f64,
    /// Residual of the amplitude fit, when amplitudes were fitted.
    pub amplitude_residual: f64,
}

impl Decomposition {
    fn empty(dims: Dims) -> Self {
        Self {
            freqs: FrequencySet::empty(active_axes(dims)),
            powers: vec![],
            residual: 0.0,
            rank_used: 0,
            pairing_defect: 0.0,
            unimodularity_defect: 0.0,
            amplitude_residual: 0.0,
        }
    }
}

/// Tuning knobs for [`decompose_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeOptions {
    /// Eigenvalues below `rank_tol · λ_max` count as zero.
    pub rank_tol: f64,
    /// Allowed negative eigenvalue, relative to `‖S‖_F`.
    pub psd_tol: f64,
    pub seed: u64,
    /// Keep exactly this many leading eigenpairs (when available) instead of
    /// the numerical rank, and skip the corner-rank test. For noisy inputs
    /// with a known model order.
    pub target_rank: Option<usize>,
    /// Off-diagonal mass above which pairing fails.
    pub pairing_tol: f64,
    /// Eigenvalues at or below this absolute level count as zero.
    pub eigen_floor: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            rank_tol: 1e-8,
            psd_tol: 1e-8,
            seed: 0,
            target_rank: None,
            pairing_tol: 1e-6,
            eigen_floor: 0.0,
        }
    }
}

/// Rank-revealing square root of a PSD d-LT matrix.
#[derive(Debug, Clone)]
pub struct Factor {
    /// `N̄ × r` with `S ≈ C C†`.
    pub c: DMatrix<Complex64>,
    /// All eigenvalues of `S`, descending.
    pub eigenvalues: Vec<f64>,
}

impl Factor {
    pub fn rank(&self) -> usize {
        self.c.ncols()
    }
}

/// `C = E diag(√λ)` over the eigenpairs with `λ > rank_tol · λ_max`.
pub fn factor_psd(s: &MLTMatrix, rank_tol: f64) -> Result<Factor, VandermondeError> {
    factor_impl(s, rank_tol, rank_tol, 0.0, None)
}

fn factor_impl(
    s: &MLTMatrix,
    rank_tol: f64,
    psd_tol: f64,
    floor: f64,
    target: Option<usize>,
) -> Result<Factor, VandermondeError> {
    let h = s.materialize();
    let norm = h.as_matrix().norm();
    let e = h.eigh()?;
    let min = e.values.last().copied().unwrap_or(0.0);
    if min < -psd_tol * norm {
        return Err(VandermondeError::NotPSD { min_eigenvalue: min });
    }
    let top = e.values.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = (rank_tol * top).max(floor);
    let mut r = e.values.iter().filter(|&&l| top > 0.0 && l > cutoff).count();
    if let Some(k) = target {
        r = r.min(k);
    }
    let n = h.dim();
    let mut c = DMatrix::<Complex64>::zeros(n, r);
    for k in 0..r {
        let w = e.values[k].sqrt();
        c.set_column(k, &(e.vectors.column(k) * Complex64::new(w, 0.0)));
    }
    Ok(Factor {
        c,
        eigenvalues: e.values,
    })
}

/// Shift operator between consecutive row blocks of `c`.
///
/// The first `block_count · block_rows` rows of `c` are split into
/// `block_count` blocks; with `C_top` stacking blocks `0..q-1` and `C_bottom`
/// blocks `1..q`, returns `U = C_bottom^g C_top`. For a factor of
/// `Σ p_k r(f_k) r(f_k)†` whose blocks advance along an axis, the eigenvalues
/// of `U` are `exp(j2π f_k)` on that axis.
pub fn shift_unitary(
    c: &DMatrix<Complex64>,
    block_count: usize,
    block_rows: usize,
    rtol: f64,
) -> Result<DMatrix<Complex64>, VandermondeError> {
    let r = c.ncols();
    if block_count < 2 {
        return Ok(DMatrix::identity(r, r));
    }
    let m = (block_count - 1) * block_rows;
    let top = c.rows(0, m).into_owned();
    let bottom = c.rows(block_rows, m).into_owned();
    let (u, rank) = least_squares(&bottom, &top, rtol);
    if rank < r {
        return Err(VandermondeError::RankDeficientStack { rank, needed: r });
    }
    Ok(u)
}

/// Reorders the rows of a factor so that `axis` becomes the slowest index.
fn axis_major(c: &DMatrix<Complex64>, dims: Dims, axis: usize) -> (DMatrix<Complex64>, usize) {
    let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
    let mut order = Vec::with_capacity(c.nrows());
    for i in 0..dims[axis] {
        for j in 0..dims[others[0]] {
            for k in 0..dims[others[1]] {
                let mut p = [0; 3];
                p[axis] = i;
                p[others[0]] = j;
                p[others[1]] = k;
                order.push(crate::geometry::flat_index(dims, p));
            }
        }
    }
    let block_rows = c.nrows() / dims[axis];
    (c.select_rows(order.iter()), block_rows)
}

/// Per-axis shift operators of a factor on `dims` (identity on unit axes).
pub fn shift_operators(
    c: &DMatrix<Complex64>,
    dims: Dims,
    rtol: f64,
) -> Result<[DMatrix<Complex64>; 3], VandermondeError> {
    let mut out: [DMatrix<Complex64>; 3] = Default::default();
    for axis in 0..3 {
        out[axis] = if dims[axis] == 1 {
            DMatrix::identity(c.ncols(), c.ncols())
        } else {
            let (rows, block_rows) = axis_major(c, dims, axis);
            shift_unitary(&rows, dims[axis], block_rows, rtol)?
        };
    }
    Ok(out)
}

/// Paired frequencies from commuting shift operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairing {
    pub freqs: Vec<Freq>,
    pub defect: f64,
    pub unimodularity_defect: f64,
}

/// Jointly diagonalizes `u[0..3]` through a random combination
/// `M = Σ μ_α U_α` and reads each axis' frequency from the diagonal of
/// `E⁻¹ U_α E`.
pub fn joint_pair(u: &[DMatrix<Complex64>; 3], seed: u64, tol: f64) -> Result<Pairing, VandermondeError> {
    let r = u[0].nrows();
    if r == 0 {
        return Ok(Pairing {
            freqs: vec![],
            defect: 0.0,
            unimodularity_defect: 0.0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::<Complex64>::zeros(r, r);
    for ua in u {
        let mu = Complex64::from_polar(rng.gen_range(0.5..1.5), rng.gen_range(0.0..std::f64::consts::TAU));
        m += ua * mu;
    }
    let (_, e) = eig_general(&m);
    let e_inv = e
        .clone()
        .try_inverse()
        .ok_or(VandermondeError::PairingDegeneracy(f64::INFINITY))?;
    let mut freqs = vec![[0.0; 3]; r];
    let mut defect: f64 = 0.0;
    let mut unimod: f64 = 0.0;
    for (axis, ua) in u.iter().enumerate() {
        let d = &e_inv * ua * &e;
        let total = d.norm();
        let diag: f64 = (0..r).map(|j| d[(j, j)].norm_sqr()).sum::<f64>();
        let off = (total * total - diag).max(0.0).sqrt();
        if total > 0.0 {
            defect = defect.max(off / total);
        }
        for j in 0..r {
            let z = d[(j, j)];
            unimod = unimod.max((z.norm() - 1.0).abs());
            freqs[j][axis] = wrap_unit(z.arg() / std::f64::consts::TAU);
        }
    }
    if !(defect <= tol) {
        return Err(VandermondeError::PairingDegeneracy(defect));
    }
    Ok(Pairing {
        freqs,
        defect,
        unimodularity_defect: unimod,
    })
}

/// [`decompose_with`] using the default options, `rank_tol` and `seed`.
pub fn decompose(s: &MLTMatrix, rank_tol: f64, seed: u64) -> Result<Decomposition, VandermondeError> {
    decompose_with(
        s,
        &DecomposeOptions {
            rank_tol,
            psd_tol: rank_tol,
            seed,
            ..Default::default()
        },
    )
}

pub fn decompose_with(s: &MLTMatrix, opts: &DecomposeOptions) -> Result<Decomposition, VandermondeError> {
    let dims = s.dims();
    if !(dims[0] <= dims[1] && dims[1] <= dims[2]) {
        return Err(VandermondeError::NotCanonical(dims));
    }
    let factor = factor_impl(s, opts.rank_tol, opts.psd_tol, opts.eigen_floor, opts.target_rank)?;
    let r = factor.rank();
    if r == 0 {
        return Ok(Decomposition::empty(dims));
    }
    let z = dims[2];
    let corner_rank = if opts.target_rank.is_some() {
        r
    } else {
        s.upper_left_corner(z)?.numerical_rank(opts.rank_tol)?
    };
    if corner_rank != r || r >= z {
        return Err(VandermondeError::RankConditionViolated {
            rank: r,
            corner_rank,
            z,
        });
    }

    let shifts = shift_operators(&factor.c, dims, opts.rank_tol)?;
    let pairing = joint_pair(&shifts, opts.seed, opts.pairing_tol)?;
    let mut freqs = pairing.freqs;
    for f in freqs.iter_mut() {
        for a in 0..3 {
            if dims[a] == 1 {
                f[a] = 0.0;
            }
        }
    }

    // P = R^g S R^{†g}, diagonal realified
    let rmat = steering_matrix(dims, &freqs);
    let rg = pinv(&rmat, opts.rank_tol);
    let sm = s.materialize().into_inner();
    let p = &rg * &sm * rg.adjoint();
    let powers: Vec<f64> = (0..r).map(|k| p[(k, k)].re).collect();
    let pd = DMatrix::from_diagonal(&DVector::from_iterator(r, powers.iter().map(|&v| Complex64::new(v, 0.0))));
    let residual = (&sm - &rmat * pd * rmat.adjoint()).norm();

    let set = FrequencySet::new(active_axes(dims), freqs)
        .map_err(|_| VandermondeError::PairingDegeneracy(pairing.defect))?;
    Ok(Decomposition {
        freqs: set,
        powers,
        residual,
        rank_used: r,
        pairing_defect: pairing.defect,
        unimodularity_defect: pairing.unimodularity_defect,
        amplitude_residual: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlt::mlt_from_atoms;

    fn torus(a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        d.min(1.0 - d)
    }

    fn random_freqs(rng: &mut ChaCha8Rng, k: usize, dims: Dims) -> Vec<Freq> {
        (0..k)
            .map(|_| {
                let mut f = [0.0; 3];
                for a in 0..3 {
                    if dims[a] > 1 {
                        f[a] = rng.gen();
                    }
                }
                f
            })
            .collect()
    }

    /// Greedy nearest matching is exact when errors are far below separation.
    fn max_match_error(got: &[Freq], want: &[Freq]) -> f64 {
        assert_eq!(got.len(), want.len());
        let mut used = vec![false; got.len()];
        let mut worst: f64 = 0.0;
        for w in want {
            let (j, d) = got
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, g)| (j, (0..3).map(|a| torus(g[a], w[a])).fold(0.0, f64::max)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            used[j] = true;
            worst = worst.max(d);
        }
        worst
    }

    #[test]
    fn full_rank_diagonal_factor() {
        let mut g = vec![Complex64::new(0.0, 0.0); 5];
        g[2] = Complex64::new(1.0, 0.0);
        let s = MLTMatrix::from_generator([1, 1, 3], g).unwrap();
        let f = factor_psd(&s, 1e-8).unwrap();
        assert_eq!(f.rank(), 3);
        let cc = &f.c * f.c.adjoint();
        assert!((cc - DMatrix::<Complex64>::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn rank_one_factor() {
        let f0 = [0.0, 0.3, 0.71];
        let s = mlt_from_atoms([1, 3, 4], &[f0], &[2.0]).unwrap();
        let f = factor_psd(&s, 1e-8).unwrap();
        assert_eq!(f.rank(), 1);
        let r = crate::geometry::steering_vector_uniform([1, 3, 4], f0) * Complex64::new(2f64.sqrt(), 0.0);
        let ratio = f.c[(0, 0)] / r[0];
        assert!((ratio.norm() - 1.0).abs() < 1e-12);
        assert!((f.c.column(0) - r * ratio).norm() < 1e-12);
    }

    #[test]
    fn rank_two_residual() {
        let s = mlt_from_atoms([1, 1, 6], &[[0.0, 0.0, 0.1], [0.0, 0.0, 0.6]], &[1.0, 0.5]).unwrap();
        let f = factor_psd(&s, 1e-8).unwrap();
        assert_eq!(f.rank(), 2);
        assert!((s.materialize().into_inner() - &f.c * f.c.adjoint()).norm() < 1e-10);
    }

    #[test]
    fn not_psd_rejected() {
        let mut g = vec![Complex64::new(0.0, 0.0); 3];
        g[1] = Complex64::new(-1.0, 0.0);
        let s = MLTMatrix::from_generator([1, 1, 2], g).unwrap();
        assert!(matches!(factor_psd(&s, 1e-8), Err(VandermondeError::NotPSD { .. })));
    }

    #[test]
    fn scalar_shift() {
        let s = mlt_from_atoms([1, 1, 4], &[[0.0, 0.0, 0.25]], &[1.0]).unwrap();
        let c = factor_psd(&s, 1e-8).unwrap().c;
        let u = shift_unitary(&c, 4, 1, 1e-8).unwrap();
        assert!((u[(0, 0)] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
        let s = mlt_from_atoms([1, 1, 4], &[[0.0; 3]], &[1.0]).unwrap();
        let c = factor_psd(&s, 1e-8).unwrap().c;
        assert!((shift_unitary(&c, 4, 1, 1e-8).unwrap()[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn two_atom_shift_eigenvalues() {
        let fz = [0.12, 0.83];
        let s = mlt_from_atoms([1, 1, 5], &[[0.0, 0.0, fz[0]], [0.0, 0.0, fz[1]]], &[1.0, 1.5]).unwrap();
        let c = factor_psd(&s, 1e-8).unwrap().c;
        let u = shift_unitary(&c, 5, 1, 1e-8).unwrap();
        let (vals, _) = eig_general(&u);
        for f in fz {
            let want = Complex64::from_polar(1.0, std::f64::consts::TAU * f);
            assert!(vals.iter().any(|v| (v - want).norm() < 1e-8));
        }
    }

    #[test]
    fn pairing_with_shared_marginal() {
        // two atoms share f_z, so per-axis sorting cannot associate them
        let dims = [2, 3, 4];
        let truth = [[0.1, 0.7, 0.35], [0.6, 0.2, 0.35], [0.85, 0.45, 0.9]];
        let s = mlt_from_atoms(dims, &truth, &[1.0, 0.8, 1.3]).unwrap();
        let c = factor_psd(&s, 1e-8).unwrap().c;
        let u = shift_operators(&c, dims, 1e-8).unwrap();
        let p = joint_pair(&u, 3, 1e-6).unwrap();
        assert!(max_match_error(&p.freqs, &truth) < 1e-7);
        // the corner has rank 2 < 3, which the full decomposition refuses
        assert!(matches!(
            decompose(&s, 1e-8, 3),
            Err(VandermondeError::RankConditionViolated { corner_rank: 2, .. })
        ));
    }

    #[test]
    fn unit_axes_report_zero() {
        let dims = [1, 1, 5];
        let s = mlt_from_atoms(dims, &[[0.0, 0.0, 0.4]], &[1.0]).unwrap();
        let d = decompose(&s, 1e-8, 0).unwrap();
        assert_eq!(d.freqs.points()[0][0], 0.0);
        assert_eq!(d.freqs.points()[0][1], 0.0);
        assert!(torus(d.freqs.points()[0][2], 0.4) < 1e-9);
    }

    #[test]
    fn single_atom_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for dims in [[1, 1, 3], [1, 3, 6], [2, 3, 4], [4, 4, 4]] {
            let f = random_freqs(&mut rng, 1, dims);
            let s = mlt_from_atoms(dims, &f, &[1.7]).unwrap();
            let d = decompose(&s, 1e-8, 1).unwrap();
            assert!(max_match_error(d.freqs.points(), &f) < 1e-9);
            assert!((d.powers[0] - 1.7).abs() < 1e-9);
        }
    }

    #[test]
    fn round_trip_many_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let dims_list = [[1, 3, 10], [2, 3, 4], [1, 4, 6], [3, 3, 5]];
        for trial in 0..100 {
            let dims = dims_list[trial % dims_list.len()];
            let k = rng.gen_range(1..dims[2]);
            let f = random_freqs(&mut rng, k, dims);
            let p: Vec<f64> = (0..k).map(|_| rng.gen_range(0.5..2.0)).collect();
            let s = mlt_from_atoms(dims, &f, &p).unwrap();
            let d = match decompose(&s, 1e-8, trial as u64) {
                Ok(d) => d,
                // closely spaced draws can fall below the rank threshold
                Err(VandermondeError::RankConditionViolated { .. }) => continue,
                Err(e) => panic!("trial {trial}: {e}"),
            };
            assert_eq!(d.rank_used, k);
            assert!(max_match_error(d.freqs.points(), &f) < 1e-7, "trial {trial}");
            assert!(d.residual <= 1e-6 * s.materialize().as_matrix().norm());
            assert!(d.powers.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn powers_follow_frequencies() {
        let dims = [1, 4, 6];
        let f = [[0.0, 0.1, 0.2], [0.0, 0.5, 0.9], [0.0, 0.8, 0.45]];
        let p = [0.6, 1.2, 1.9];
        let d = decompose(&mlt_from_atoms(dims, &f, &p).unwrap(), 1e-8, 9).unwrap();
        for (g, pw) in d.freqs.points().iter().zip(&d.powers) {
            let k = (0..3)
                .min_by(|&a, &b| {
                    let da: f64 = (0..3).map(|x| torus(g[x], f[a][x])).sum();
                    let db: f64 = (0..3).map(|x| torus(g[x], f[b][x])).sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            assert!((pw - p[k]).abs() < 1e-6 * p[k]);
        }
    }

    #[test]
    fn rank_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dims = [2, 4, 4];
        let f = random_freqs(&mut rng, 5, dims);
        let s = mlt_from_atoms(dims, &f, &[1.0; 5]).unwrap();
        assert!(matches!(
            decompose(&s, 1e-8, 0),
            Err(VandermondeError::RankConditionViolated { .. })
        ));
        assert!(matches!(
            decompose(&MLTMatrix::zeros([1, 4, 2]), 1e-8, 0),
            Err(VandermondeError::NotCanonical(_))
        ));
        assert_eq!(decompose(&MLTMatrix::zeros([1, 2, 4]), 1e-8, 0).unwrap().rank_used, 0);
    }
}
