//! Denoising recovery on the hollow cube: regularization bounds, the
//! resulting error and its Cramér–Rao reference.

use gridless::evalkit::{
    crlb, noise_sigma, run_solver, sample_frequencies, score_recovery, synthesize_measurement, Scene, SolverKind,
    TauRule,
};
use gridless::geometry::{embed_in_virtual, ArrayDeployment};
use gridless::solvers::{extract_frequencies_with, tau_bounds, SolverParams, EXTRACT_PSD_TOL};
use gridless::vandermonde::DecomposeOptions;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let array = ArrayDeployment::cubic_shell(4, [0.5; 3])?;
    let a = embed_in_virtual(&array, [4, 4, 4])?;
    let k = 3;
    let snr_db = 20.0;
    let sigma = noise_sigma(k as f64, snr_db);
    let (tau_l, tau_u) = tau_bounds(sigma, a.n())?;
    println!("sigma {sigma:.4}, tau in [{tau_l:.4}, {tau_u:.4}]");

    let truth = sample_frequencies(k, 3, &mut ChaCha8Rng::seed_from_u64(8));
    // the measurement uses unit-norm atoms, so the noise shrinks by the same factor
    let scene = Scene::new(truth.clone(), sigma / (a.n_virtual() as f64).sqrt(), a.clone(), 99)?;
    let y = synthesize_measurement(&scene);

    let params = SolverParams {
        rho: 0.1,
        ..Default::default()
    };
    let sol = run_solver(SolverKind::L2L1(TauRule::Upper), &y, &a, &params, None, sigma)?;
    let opts = DecomposeOptions {
        rank_tol: params.rank_tol,
        psd_tol: EXTRACT_PSD_TOL,
        target_rank: Some(k),
        pairing_tol: f64::INFINITY,
        ..Default::default()
    };
    let dec = extract_frequencies_with(&sol, &opts)?;
    let score = score_recovery(dec.freqs.points(), truth.points(), 3);
    println!("error {:.3e} against a bound of {:.3e}", score.error, crlb(&scene)?);
    Ok(())
}
