//! Scene sampling, measurement synthesis, error scoring, Cramér–Rao
//! references and seeded Monte Carlo experiments.

mod crlb;
mod metric;
mod montecarlo;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::geometry::{Freq, FrequencySet, GeometryError, SensingMatrix};
use crate::solvers::SolverError;

pub use crlb::crlb;
pub use metric::{assignment, frequency_error, score_recovery, torus_distance, Score, UNMATCHED_PENALTY};
pub use montecarlo::{
    noise_sigma, pairwise_sum, run_cell, run_monte_carlo, run_solver, sweep_tau, trial_seed, ErrorRow,
    ErrorTable, ExperimentConfig, SolverKind, Sweep, TauRule, TauSweep,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("recovered {recovered} frequencies but the truth has {truth}")]
    SizeMismatch { recovered: usize, truth: usize },
    #[error("Fisher information matrix is singular")]
    SingularFisher,
    #[error("scene needs amplitudes on its frequency set")]
    MissingAmplitudes,
    #[error("invalid experiment: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// One synthetic acquisition: sources with amplitudes, noise level, array
/// and the seed of the noise stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub freqs: FrequencySet,
    /// Standard deviation of each complex noise entry.
    pub sigma: f64,
    pub sensing: SensingMatrix,
    pub seed: u64,
}

impl Scene {
    pub fn new(freqs: FrequencySet, sigma: f64, sensing: SensingMatrix, seed: u64) -> Result<Self, EvalError> {
        if freqs.amplitudes().is_none() {
            return Err(EvalError::MissingAmplitudes);
        }
        if freqs.is_empty() {
            return Err(EvalError::InvalidConfig("a scene needs at least one source".into()));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(EvalError::InvalidConfig(format!("sigma = {sigma}")));
        }
        Ok(Self {
            freqs,
            sigma,
            sensing,
            seed,
        })
    }

    /// `E‖u‖²/σ²` for the scene's own amplitudes.
    pub fn snr(&self) -> f64 {
        let energy: f64 = self.freqs.amplitudes().unwrap_or(&[]).iter().map(|u| u.norm_sqr()).sum();
        energy / (self.sigma * self.sigma)
    }
}

/// Axes carrying frequencies for a `d`-dimensional canonical lattice: the
/// last `d` axes.
pub fn active_for(d: usize) -> [bool; 3] {
    [d >= 3, d >= 2, d >= 1]
}

/// `k` i.i.d. points uniform on the `d`-torus, with unit-modulus amplitudes
/// of uniform phase. Colliding draws are redrawn.
pub fn sample_frequencies<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> FrequencySet {
    let active = active_for(d);
    let mut points: Vec<Freq> = Vec::with_capacity(k);
    while points.len() < k {
        let mut p = [0.0; 3];
        for (a, v) in p.iter_mut().enumerate() {
            if active[a] {
                *v = rng.gen::<f64>();
            }
        }
        if !points.contains(&p) {
            points.push(p);
        }
    }
    let amps = (0..k)
        .map(|_| Complex64::from_polar(1.0, std::f64::consts::TAU * rng.gen::<f64>()))
        .collect();
    FrequencySet::new(active, points)
        .and_then(|f| f.with_amplitudes(amps))
        .expect("sampled points are in range and distinct")
}

/// `y = A R u + w` with circular complex Gaussian `w` of per-entry variance `σ²`.
pub fn synthesize_measurement(scene: &Scene) -> DVector<Complex64> {
    let dims = scene.sensing.virtual_dims();
    let r = scene.freqs.steering_matrix(dims);
    let u = DVector::from_column_slice(scene.freqs.amplitudes().unwrap_or(&[]));
    let mut y = scene.sensing.apply(&(r * u));
    if scene.sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
        let s = scene.sigma / std::f64::consts::SQRT_2;
        for v in y.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += Complex64::new(re * s, im * s);
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{embed_in_virtual, steering_vector_uniform, ArrayDeployment};

    #[test]
    fn sampling_is_reproducible_and_uniform() {
        let a = sample_frequencies(5, 2, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_frequencies(5, 2, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert!(a.points().iter().all(|p| p[0] == 0.0));
        assert!(a.amplitudes().unwrap().iter().all(|u| (u.norm() - 1.0).abs() < 1e-15));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut sum = 0.0;
        for _ in 0..10_000 {
            sum += sample_frequencies(1, 1, &mut rng).points()[0][2];
        }
        assert!((sum / 10_000.0 - 0.5).abs() < 0.01);
        let two = sample_frequencies(2, 3, &mut rng);
        assert_ne!(two.points()[0], two.points()[1]);
    }

    #[test]
    fn noiseless_dc_tone() {
        let f = FrequencySet::new([false, false, true], vec![[0.0; 3]])
            .unwrap()
            .with_amplitudes(vec![Complex64::new(1.0, 0.0)])
            .unwrap();
        let scene = Scene::new(f, 0.0, SensingMatrix::identity([1, 1, 4]), 0).unwrap();
        let y = synthesize_measurement(&scene);
        assert!(y.iter().all(|v| (v - Complex64::new(0.5, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn noiseless_two_tones_match_direct_sum() {
        let arr = ArrayDeployment::uniform([1, 3, 4], [0.5; 3]).unwrap();
        let a = embed_in_virtual(&arr, [1, 3, 6]).unwrap();
        let f = sample_frequencies(2, 2, &mut ChaCha8Rng::seed_from_u64(4));
        let scene = Scene::new(f.clone(), 0.0, a.clone(), 0).unwrap();
        let y = synthesize_measurement(&scene);
        let u = f.amplitudes().unwrap();
        let direct = steering_vector_uniform([1, 3, 6], f.points()[0]) * u[0]
            + steering_vector_uniform([1, 3, 6], f.points()[1]) * u[1];
        assert!((a.apply(&direct) - y).camax() < 1e-12);
    }

    #[test]
    fn noise_energy_matches_variance() {
        let f = sample_frequencies(1, 1, &mut ChaCha8Rng::seed_from_u64(0));
        let a = SensingMatrix::identity([1, 1, 8]);
        let clean = synthesize_measurement(&Scene::new(f.clone(), 0.0, a.clone(), 0).unwrap());
        let sigma = 0.7;
        let mut total = 0.0;
        for seed in 0..10_000 {
            let y = synthesize_measurement(&Scene::new(f.clone(), sigma, a.clone(), seed).unwrap());
            total += (y - &clean).norm_squared();
        }
        let mean = total / 10_000.0;
        let expected = 8.0 * sigma * sigma;
        assert!((mean / expected - 1.0).abs() < 0.02, "{mean} vs {expected}");
    }

    #[test]
    fn scene_validation() {
        let f = FrequencySet::new([false, false, true], vec![[0.0, 0.0, 0.1]]).unwrap();
        let a = SensingMatrix::identity([1, 1, 4]);
        assert_eq!(Scene::new(f.clone(), 0.0, a.clone(), 0), Err(EvalError::MissingAmplitudes));
        let f = f.with_amplitudes(vec![Complex64::new(2.0, 0.0)]).unwrap();
        assert!(Scene::new(f.clone(), -1.0, a.clone(), 0).is_err());
        assert!((Scene::new(f, 0.5, a, 0).unwrap().snr() - 16.0).abs() < 1e-12);
    }
}
