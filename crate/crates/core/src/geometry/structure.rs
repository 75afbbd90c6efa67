use num_complex::Complex64;

use super::sensing::SensingMatrix;
use super::{flat_index, num_points, Dims, Freq, GeometryError};

/// Ascending-order relabeling of the axes of a lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Canonical {
    /// Dimensions sorted so that `X̄ ≤ Ȳ ≤ Z̄`.
    pub dims: Dims,
    /// New axis `i` is old axis `perm[i]`.
    pub perm: [usize; 3],
}

impl Canonical {
    pub fn is_identity(&self) -> bool {
        self.perm == [0, 1, 2]
    }

    /// Reorders a per-axis quantity (frequency, position, spacing) into canonical axes.
    pub fn apply<T: Copy>(&self, v: [T; 3]) -> [T; 3] {
        [v[self.perm[0]], v[self.perm[1]], v[self.perm[2]]]
    }

    /// Maps a canonical per-axis quantity back to the original axes.
    pub fn invert<T: Copy>(&self, v: [T; 3]) -> [T; 3] {
        let mut out = v;
        for i in 0..3 {
            out[self.perm[i]] = v[i];
        }
        out
    }
}

/// Sorts the axes ascending by size. Ties keep their original order.
pub fn canonicalize(dims: Dims) -> Canonical {
    let mut perm = [0, 1, 2];
    perm.sort_by_key(|&a| dims[a]);
    Canonical {
        dims: [dims[perm[0]], dims[perm[1]], dims[perm[2]]],
        perm,
    }
}

/// Largest strided uniform sub-lattice hidden inside the sensed positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddedUniformReport {
    pub sub_dims: Dims,
    pub strides: [usize; 3],
    pub offsets: [usize; 3],
    /// Virtual flat indices of the sub-lattice, in its own Kronecker order.
    pub indices: Vec<usize>,
    /// Row of the sensing matrix that measures each entry of `indices`.
    pub rows: Vec<usize>,
}

impl EmbeddedUniformReport {
    /// `S_c = X_c + Y_c + Z_c`.
    pub fn s_c(&self) -> usize {
        self.sub_dims.iter().sum()
    }

    /// `N_c = X_c·Y_c·Z_c`.
    pub fn n_c(&self) -> usize {
        num_points(self.sub_dims)
    }

    /// Frequency seen by the sub-lattice: `[ℓx fx, ℓy fy, ℓz fz]` wrapped to `[0, 1)`.
    pub fn sub_frequency(&self, f: Freq) -> Freq {
        let mut g = [0.0; 3];
        for a in 0..3 {
            g[a] = super::wrap_unit(self.strides[a] as f64 * f[a]);
        }
        g
    }

    /// Factor `c` with `r_virtual(f)[indices] = c · r_sub(ℓ f)`, namely
    /// `√(N_c/N̄) · exp(-j2π Δ·f)`.
    pub fn phase_factor(&self, virtual_dims: Dims, f: Freq) -> Complex64 {
        let dot: f64 = (0..3).map(|a| self.offsets[a] as f64 * f[a]).sum();
        let scale = (self.n_c() as f64 / num_points(virtual_dims) as f64).sqrt();
        Complex64::from_polar(scale, -2.0 * std::f64::consts::PI * dot)
    }
}

/// Searches every offset `Δ` and stride `ℓ` for the largest fully sensed box
/// `{Δ + ℓ⊙(i, j, k)}`.
///
/// Candidates are ranked by larger `N_c`, then larger `S_c`, then
/// lexicographically smaller `sub_dims`, then smaller `(Δ, ℓ)`.
pub fn find_embedded_uniform(a: &SensingMatrix) -> EmbeddedUniformReport {
    let dims = a.virtual_dims();
    let n_virtual = num_points(dims);
    let mut row_of = vec![usize::MAX; n_virtual];
    for (row, &j) in a.row_to_virtual().iter().enumerate() {
        row_of[j] = row;
    }
    let sensed = |p: [usize; 3]| row_of[flat_index(dims, p)] != usize::MAX;

    // (n_c, s_c, sub_dims, offsets, strides)
    type Key = (usize, usize, Dims, [usize; 3], [usize; 3]);
    let better = |cand: &Key, best: &Option<Key>| -> bool {
        let Some(b) = best else { return true };
        if cand.0 != b.0 {
            return cand.0 > b.0;
        }
        if cand.1 != b.1 {
            return cand.1 > b.1;
        }
        (cand.2, cand.3, cand.4) < (b.2, b.3, b.4)
    };
    let mut best: Option<Key> = None;

    // full[i][j][k]: the box of counts (i+1, j+1, k+1) is entirely sensed
    let mut full: Vec<bool> = Vec::new();
    for ox in 0..dims[0] {
        for oy in 0..dims[1] {
            for oz in 0..dims[2] {
                let off = [ox, oy, oz];
                if !sensed(off) {
                    continue;
                }
                let stride_max = |ax: usize| (dims[ax] - off[ax] - 1).max(1);
                for lx in 1..=stride_max(0) {
                    for ly in 1..=stride_max(1) {
                        for lz in 1..=stride_max(2) {
                            let l = [lx, ly, lz];
                            let cap = [
                                (dims[0] - ox - 1) / lx + 1,
                                (dims[1] - oy - 1) / ly + 1,
                                (dims[2] - oz - 1) / lz + 1,
                            ];
                            // a stride only matters when it admits a second element
                            if (0..3).any(|ax| l[ax] > 1 && cap[ax] == 1) {
                                continue;
                            }
                            full.clear();
                            full.resize(cap[0] * cap[1] * cap[2], false);
                            let at = |i: usize, j: usize, k: usize| (i * cap[1] + j) * cap[2] + k;
                            for i in 0..cap[0] {
                                for j in 0..cap[1] {
                                    for k in 0..cap[2] {
                                        let p = [ox + i * lx, oy + j * ly, oz + k * lz];
                                        let ok = sensed(p)
                                            && (i == 0 || full[at(i - 1, j, k)])
                                            && (j == 0 || full[at(i, j - 1, k)])
                                            && (k == 0 || full[at(i, j, k - 1)]);
                                        full[at(i, j, k)] = ok;
                                        if !ok {
                                            continue;
                                        }
                                        let sub = [i + 1, j + 1, k + 1];
                                        // strides on single-element axes are reported as 1
                                        let mut ls = l;
                                        for ax in 0..3 {
                                            if sub[ax] == 1 {
                                                ls[ax] = 1;
                                            }
                                        }
                                        let cand = (num_points(sub), sub.iter().sum(), sub, off, ls);
                                        if better(&cand, &best) {
                                            best = Some(cand);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    let Some((_, _, sub_dims, offsets, strides)) = best else {
        return EmbeddedUniformReport {
            sub_dims: [0; 3],
            strides: [1; 3],
            offsets: [0; 3],
            indices: vec![],
            rows: vec![],
        };
    };
    let mut indices = Vec::with_capacity(num_points(sub_dims));
    for i in 0..sub_dims[0] {
        for j in 0..sub_dims[1] {
            for k in 0..sub_dims[2] {
                let p = [
                    offsets[0] + i * strides[0],
                    offsets[1] + j * strides[1],
                    offsets[2] + k * strides[2],
                ];
                indices.push(flat_index(dims, p));
            }
        }
    }
    let rows = indices.iter().map(|&j| row_of[j]).collect();
    EmbeddedUniformReport {
        sub_dims,
        strides,
        offsets,
        indices,
        rows,
    }
}

/// Guaranteed and conjectured limits on the number of resolvable sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvableRegion {
    /// `⌊(S_c − (d − 1))/2⌋`.
    pub k_corollary: usize,
    /// `⌈N_c/2 − 1⌉`.
    pub k_conjecture: usize,
}

pub fn resolvable_region(report: &EmbeddedUniformReport, d: usize) -> ResolvableRegion {
    if d == 0 {
        return ResolvableRegion {
            k_corollary: 0,
            k_conjecture: 0,
        };
    }
    ResolvableRegion {
        k_corollary: report.s_c().saturating_sub(d - 1) / 2,
        k_conjecture: report.n_c().saturating_sub(1) / 2,
    }
}

/// Antenna count `⌈24 K ln(2K/ε)⌉` sufficient for injectivity with
/// probability at least `1 − ε` under random selection.
pub fn min_antennas_probabilistic(k: usize, eps: f64) -> Result<usize, GeometryError> {
    if k == 0 {
        return Err(GeometryError::InvalidParameter("K must be at least 1".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(GeometryError::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {eps}"
        )));
    }
    let k = k as f64;
    let raw = 24.0 * k * (2.0 * k / eps).ln();
    // absorb rounding noise so exact integers are not bumped up
    Ok((raw - 1e-9).ceil().max(1.0) as usize)
}
