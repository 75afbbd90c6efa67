//! Property checks shared by the property suite and the acceptance run.
//! Each returns `Err` with a description when the property does not hold.

#![allow(dead_code)]

use gridless::evalkit::{
    frequency_error, run_monte_carlo, sample_frequencies, synthesize_measurement, ExperimentConfig, Scene, SolverKind,
    Sweep,
};
use gridless::geometry::{
    check_injectivity, embed_in_virtual, lattice_point, steering_vector_uniform, ArrayDeployment, Dims, Freq,
    FrequencySet, SensingMatrix,
};
use gridless::mlt::{project_mlt, HermitianMatrix};
use gridless::solvers::{solve_l0_rank_min, solve_l1_an, solve_l2_l1_an, SdpSolution, SolverParams};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    HermitianMatrix::from_hermitian_part(&g + g.adjoint())
}

fn real_inner(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// The d-LT projection is idempotent and self-adjoint in the real trace
/// inner product.
pub fn projection_properties(dims: Dims, seed: u64) -> Result<(), String> {
    let n: usize = dims.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h1 = random_hermitian(n, &mut rng);
    let h2 = random_hermitian(n, &mut rng);
    let p1 = project_mlt(&h1, dims).map_err(|e| e.to_string())?.materialize();
    let pp1 = project_mlt(&p1, dims).map_err(|e| e.to_string())?.materialize();
    let idem = (pp1.as_matrix() - p1.as_matrix()).norm();
    if idem > 1e-10 {
        return Err(format!("P(P(h)) differs from P(h) by {idem:e} on {dims:?}"));
    }
    let p2 = project_mlt(&h2, dims).map_err(|e| e.to_string())?.materialize();
    let lhs = real_inner(p1.as_matrix(), h2.as_matrix());
    let rhs = real_inner(h1.as_matrix(), p2.as_matrix());
    if (lhs - rhs).abs() > 1e-10 {
        return Err(format!("<P h1, h2> = {lhs} but <h1, P h2> = {rhs} on {dims:?}"));
    }
    Ok(())
}

fn axis_vector(len: usize, f: f64) -> DVector<Complex64> {
    DVector::from_fn(len, |i, _| {
        Complex64::from_polar(1.0 / (len as f64).sqrt(), -std::f64::consts::TAU * f * i as f64)
    })
}

/// The steering vector is the Kronecker product of per-axis vectors, has unit
/// norm, and the sensing matrix acts as its dense selection matrix.
pub fn steering_properties(dims: Dims, f: Freq, seed: u64) -> Result<(), String> {
    let v = steering_vector_uniform(dims, f);
    let kron = axis_vector(dims[0], f[0])
        .kronecker(&axis_vector(dims[1], f[1]))
        .kronecker(&axis_vector(dims[2], f[2]));
    let gap = (&v - &kron).norm();
    if gap > 1e-12 {
        return Err(format!("steering vector differs from the Kronecker product by {gap:e}"));
    }
    if (v.norm() - 1.0).abs() > 1e-12 {
        return Err(format!("steering vector norm {}", v.norm()));
    }
    let n: usize = dims.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx.truncate(rng.gen_range(1..=n));
    let positions = idx.iter().map(|&i| lattice_point(dims, i)).collect();
    let array = ArrayDeployment::new(dims, positions, [0.5; 3]).map_err(|e| e.to_string())?;
    let a = embed_in_virtual(&array, dims).map_err(|e| e.to_string())?;
    let dense = a.to_dense().map(|x| Complex64::new(x, 0.0));
    let gap = (a.apply(&v) - &dense * &v).norm();
    if gap > 1e-12 {
        return Err(format!("A r(f) differs from the dense product by {gap:e}"));
    }
    let y = DVector::from_fn(a.n(), |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let gap = (a.adjoint(&y) - dense.adjoint() * &y).norm();
    if gap > 1e-12 {
        return Err(format!("Aᵀ y differs from the dense product by {gap:e}"));
    }
    Ok(())
}

fn brute_force_error(rec: &[Freq], truth: &[Freq], d: usize) -> f64 {
    fn go(i: usize, rec: &[Freq], truth: &[Freq], d: usize, used: &mut [bool]) -> f64 {
        if i == truth.len() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..rec.len() {
            if !used[j] {
                used[j] = true;
                let here = gridless::evalkit::torus_distance(truth[i], rec[j], d);
                best = best.min(here + go(i + 1, rec, truth, d, used));
                used[j] = false;
            }
        }
        best
    }
    go(0, rec, truth, d, &mut vec![false; rec.len()]) / truth.len() as f64
}

/// The optimal-assignment error equals the minimum over all `K!` pairings.
pub fn metric_matches_brute_force(k: usize, d: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = sample_frequencies(k, d, &mut rng);
    let rec = sample_frequencies(k, d, &mut rng);
    let fast = frequency_error(&rec, &truth, d).map_err(|e| e.to_string())?;
    let slow = brute_force_error(rec.points(), truth.points(), d);
    if (fast - slow).abs() > 1e-15 {
        return Err(format!("assignment gives {fast}, brute force {slow} (K={k}, d={d})"));
    }
    Ok(())
}

/// Two runs of the same experiment, with one and with two workers, produce
/// byte-identical tables.
pub fn monte_carlo_is_deterministic(seed: u64) -> Result<(), String> {
    let a = SensingMatrix::identity([1, 3, 4]);
    let mut cfg = ExperimentConfig::new(SolverKind::L1, a, Sweep::K(vec![1, 2]));
    cfg.trials = 3;
    cfg.seed = seed;
    let first = run_monte_carlo(&cfg).map_err(|e| e.to_string())?.to_csv();
    let second = run_monte_carlo(&cfg).map_err(|e| e.to_string())?.to_csv();
    cfg.threads = 2;
    let parallel = run_monte_carlo(&cfg).map_err(|e| e.to_string())?.to_csv();
    if first != second || first != parallel {
        return Err(format!("tables differ for seed {seed}"));
    }
    Ok(())
}

/// Relative PSD slack allowed on a converged solver output.
pub const CERTIFICATE_TOL: f64 = 1e-6;

fn certify(name: &str, sol: &SdpSolution, a: &SensingMatrix, y: &DVector<Complex64>, exact: bool) -> Result<(), String> {
    if !sol.converged {
        return Ok(());
    }
    let cert = sol.psd_certificate().map_err(|e| e.to_string())?;
    if cert < -CERTIFICATE_TOL {
        return Err(format!("{name}: smallest eigenvalue ratio {cert:e}"));
    }
    if exact {
        let gap = (a.apply(&sol.s) - y).norm();
        if gap > 1e-9 * y.norm().max(1.0) {
            return Err(format!("{name}: ‖A s − y‖ = {gap:e}"));
        }
    }
    Ok(())
}

/// Converged outputs of all three programs are PSD within tolerance, and the
/// exact-data programs reproduce the measurement.
pub fn solver_certificates(k: usize, seed: u64) -> Result<(), String> {
    let array = ArrayDeployment::uniform([1, 3, 6], [0.5; 3]).map_err(|e| e.to_string())?;
    let a = embed_in_virtual(&array, [1, 3, 6]).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: FrequencySet = sample_frequencies(k, 2, &mut rng);
    let scene = Scene::new(truth, 0.0, a.clone(), seed).map_err(|e| e.to_string())?;
    let y = synthesize_measurement(&scene);
    let params = SolverParams::default();
    let dims = a.virtual_dims();
    let l1 = solve_l1_an(&y, &a, dims, &params).map_err(|e| e.to_string())?;
    certify("l1", &l1, &a, &y, true)?;
    let l2 = solve_l2_l1_an(&y, &a, dims, 0.5, &params).map_err(|e| e.to_string())?;
    certify("l2l1", &l2, &a, &y, false)?;
    match solve_l0_rank_min(&y, &a, dims, &params, 4) {
        Ok(l0) => {
            certify("l0", &l0, &a, &y, true)?;
            if l0.scalar.fract() != 0.0 {
                return Err(format!("l0: scalar {} is not a rank", l0.scalar));
            }
        }
        Err(gridless::solvers::SolverError::NotConverged { .. }) => {}
        Err(e) => return Err(e.to_string()),
    }
    Ok(())
}

/// Fraction of random selections of `n` antennas from `virtual_dims` for
/// which `A R(f)` is injective on `k` random frequencies.
pub fn injectivity_fraction(virtual_dims: Dims, n: usize, k: usize, draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: usize = virtual_dims.iter().product();
    let d = gridless::geometry::active_dimension(virtual_dims);
    let mut hits = 0;
    for _ in 0..draws {
        let mut idx: Vec<usize> = (0..total).collect();
        idx.shuffle(&mut rng);
        idx.truncate(n);
        idx.sort_unstable();
        let a = SensingMatrix::new(virtual_dims, idx).expect("indices are in range");
        let f = sample_frequencies(k, d, &mut rng);
        if check_injectivity(&a, f.points()).injective {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}
