//! A small seeded sweep over the number of sources, printed as CSV.

use gridless::evalkit::{run_monte_carlo, ExperimentConfig, SolverKind, Sweep};
use gridless::geometry::{embed_in_virtual, ArrayDeployment};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let array = ArrayDeployment::uniform([1, 3, 6], [0.5; 3])?;
    let a = embed_in_virtual(&array, [1, 3, 6])?;
    let mut cfg = ExperimentConfig::new(SolverKind::L1, a, Sweep::K(vec![1, 2, 3, 4]));
    cfg.trials = 10;
    cfg.seed = 2024;
    cfg.threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    print!("{}", run_monte_carlo(&cfg)?.to_csv());
    Ok(())
}
