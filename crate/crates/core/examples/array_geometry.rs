//! Embeds a planar array with missing antennas in its virtual lattice and
//! reports the hidden uniform sub-array and the resolvable region.

use gridless::geometry::{
    active_dimension, embed_in_virtual, find_embedded_uniform, lattice_point, min_antennas_probabilistic,
    one_based_ranges, resolvable_region, ArrayDeployment,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dims = [1, 3, 4];
    let removed = [[0, 0, 0], [0, 1, 1], [0, 1, 2]];
    let positions = (0..12)
        .map(|i| lattice_point(dims, i))
        .filter(|p| !removed.contains(p))
        .collect();
    let array = ArrayDeployment::new(dims, positions, [0.5; 3])?;
    let a = embed_in_virtual(&array, dims)?;
    println!("sensed set      {}", one_based_ranges(&a.sensed_set()));

    let report = find_embedded_uniform(&a);
    println!("embedded lattice {:?} with strides {:?}", report.sub_dims, report.strides);
    println!("I_c             {}", one_based_ranges(&report.indices));

    for (name, arr, virt) in [
        ("planar 1x3x6", ArrayDeployment::uniform([1, 3, 6], [0.5; 3])?, [1, 3, 6]),
        ("hollow cube", ArrayDeployment::cubic_shell(4, [0.5; 3])?, [4, 4, 4]),
    ] {
        let rep = find_embedded_uniform(&embed_in_virtual(&arr, virt)?);
        let region = resolvable_region(&rep, active_dimension(virt));
        println!(
            "{name:>13}: S_c={}, N_c={}, K_cor={}, K_conj={}",
            rep.s_c(),
            rep.n_c(),
            region.k_corollary,
            region.k_conjecture
        );
    }
    println!("random selection needs {} antennas for K=2 at eps=0.05", min_antennas_probabilistic(2, 0.05)?);
    Ok(())
}
