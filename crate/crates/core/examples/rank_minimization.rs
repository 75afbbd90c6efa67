//! The rank heuristic recovers more sources than the convex program when the
//! array is embedded in a larger virtual lattice.

use gridless::evalkit::{frequency_error, sample_frequencies, synthesize_measurement, Scene};
use gridless::geometry::{embed_in_virtual, ArrayDeployment};
use gridless::solvers::{extract_frequencies_with, solve_l0_rank_min, SolverParams, EXTRACT_PSD_TOL};
use gridless::vandermonde::DecomposeOptions;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let array = ArrayDeployment::uniform([1, 3, 6], [0.5; 3])?;
    let a = embed_in_virtual(&array, [1, 3, 10])?;
    let k = 4;
    let truth = sample_frequencies(k, 2, &mut ChaCha8Rng::seed_from_u64(3));
    let y = synthesize_measurement(&Scene::new(truth.clone(), 0.0, a.clone(), 0)?);

    let params = SolverParams::default();
    let sol = solve_l0_rank_min(&y, &a, a.virtual_dims(), &params, 9)?;
    println!("feasible at rank {} after {} iterations", sol.scalar, sol.iterations);
    let opts = DecomposeOptions {
        rank_tol: params.rank_tol,
        psd_tol: EXTRACT_PSD_TOL,
        target_rank: Some(k),
        pairing_tol: f64::INFINITY,
        ..Default::default()
    };
    let dec = extract_frequencies_with(&sol, &opts)?;
    println!("torus error {:.3e}", frequency_error(&dec.freqs, &truth, 2)?);
    Ok(())
}
