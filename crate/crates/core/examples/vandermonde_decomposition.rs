//! Builds a three-level Toeplitz matrix from known atoms and recovers them.

use gridless::mlt::mlt_from_atoms;
use gridless::vandermonde::decompose;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dims = [2, 3, 5];
    let freqs = [[0.12, 0.40, 0.05], [0.70, 0.15, 0.55], [0.33, 0.81, 0.90]];
    let powers = [1.0, 0.6, 2.5];
    let s = mlt_from_atoms(dims, &freqs, &powers)?;

    let dec = decompose(&s, 1e-8, 0)?;
    println!("rank {} with residual {:.2e}", dec.rank_used, dec.residual);
    for (f, p) in dec.freqs.points().iter().zip(&dec.powers) {
        println!("f = [{:.6}, {:.6}, {:.6}]  power {:.6}", f[0], f[1], f[2], p);
    }
    Ok(())
}
