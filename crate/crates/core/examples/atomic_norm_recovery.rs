//! Noiseless recovery of three sources from a 1 x 3 x 6 planar array with
//! the convex atomic-norm program.

use gridless::evalkit::{frequency_error, sample_frequencies, synthesize_measurement, Scene};
use gridless::geometry::{embed_in_virtual, ArrayDeployment};
use gridless::solvers::{extract_frequencies_with, solve_l1_an, SolverParams, EXTRACT_PSD_TOL};
use gridless::vandermonde::DecomposeOptions;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let array = ArrayDeployment::uniform([1, 3, 6], [0.5; 3])?;
    let a = embed_in_virtual(&array, [1, 3, 6])?;
    let truth = sample_frequencies(3, 2, &mut ChaCha8Rng::seed_from_u64(11));
    let y = synthesize_measurement(&Scene::new(truth.clone(), 0.0, a.clone(), 0)?);

    let params = SolverParams::default();
    let sol = solve_l1_an(&y, &a, a.virtual_dims(), &params)?;
    println!("{} iterations, converged: {}", sol.iterations, sol.converged);
    // keep as many atoms as there are sources
    let opts = DecomposeOptions {
        rank_tol: params.rank_tol,
        psd_tol: EXTRACT_PSD_TOL,
        target_rank: Some(truth.len()),
        pairing_tol: f64::INFINITY,
        ..Default::default()
    };
    let dec = extract_frequencies_with(&sol, &opts)?;
    for f in dec.freqs.points() {
        println!("recovered [{:.6}, {:.6}]", f[1], f[2]);
    }
    for f in truth.points() {
        println!("truth     [{:.6}, {:.6}]", f[1], f[2]);
    }
    println!("torus error {:.3e}", frequency_error(&dec.freqs, &truth, 2)?);
    Ok(())
}
