//! Antenna arrays on a normalized integer lattice, steering vectors and
//! sensing matrices.
//!
//! Lattice points are flattened in Kronecker order: `z` varies fastest, then
//! `y`, then `x`, so the flat index of `(x, y, z)` on a lattice with counts
//! `[X, Y, Z]` is `x·Y·Z + y·Z + z`. All indices are 0-based.

mod frequencies;
mod sensing;
mod structure;

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use thiserror::Error;

pub use frequencies::{steering_matrix, FrequencySet};
pub use sensing::{
    check_injectivity, embed_in_virtual, one_based_ranges, Injectivity, SensingMatrix,
    INJECTIVITY_RTOL,
};
pub use structure::{
    canonicalize, find_embedded_uniform, min_antennas_probabilistic, resolvable_region,
    Canonical, EmbeddedUniformReport, ResolvableRegion,
};

/// Per-axis lattice counts `[X, Y, Z]`.
pub type Dims = [usize; 3];
/// Integer lattice coordinate `[x, y, z]`.
pub type LatticePoint = [usize; 3];
/// Normalized frequency `[f^x, f^y, f^z]` on the 3-torus. Inactive axes hold 0.
pub type Freq = [f64; 3];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("lattice dimensions must be positive, got {0:?}")]
    ZeroDimension(Dims),
    #[error("array has no antennas")]
    EmptyArray,
    #[error("duplicate antenna position {0:?}")]
    DuplicatePosition(LatticePoint),
    #[error("position {position:?} lies outside the lattice {dims:?}")]
    OutOfLattice { position: LatticePoint, dims: Dims },
    #[error("array extent {extent:?} does not fit in virtual lattice {virtual_dims:?}")]
    DimensionTooSmall { extent: Dims, virtual_dims: Dims },
    #[error("coordinate {coordinate:?} is not on the lattice with spacing {spacing:?}")]
    NonLatticePosition { coordinate: [f64; 3], spacing: [f64; 3] },
    #[error("sensing matrix selects virtual index {0} twice")]
    DuplicateRow(usize),
    #[error("virtual index {index} out of range for {n_virtual} virtual antennas")]
    RowOutOfRange { index: usize, n_virtual: usize },
    #[error("frequency component {0} outside [0, 1)")]
    FrequencyOutOfRange(f64),
    #[error("duplicate frequency {0:?}")]
    DuplicateFrequency(Freq),
    #[error("{what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub(crate) fn num_points(dims: Dims) -> usize {
    dims[0] * dims[1] * dims[2]
}

/// Flat Kronecker index of a lattice point (`z` fastest).
pub fn flat_index(dims: Dims, p: LatticePoint) -> usize {
    (p[0] * dims[1] + p[1]) * dims[2] + p[2]
}

/// Inverse of [`flat_index`].
pub fn lattice_point(dims: Dims, idx: usize) -> LatticePoint {
    let z = idx % dims[2];
    let y = (idx / dims[2]) % dims[1];
    let x = idx / (dims[1] * dims[2]);
    [x, y, z]
}

/// Number of axes with more than one element.
pub fn active_dimension(dims: Dims) -> usize {
    dims.iter().filter(|&&n| n > 1).count()
}

/// Axis mask of the axes with more than one element.
pub fn active_axes(dims: Dims) -> [bool; 3] {
    [dims[0] > 1, dims[1] > 1, dims[2] > 1]
}

/// Reduces `x` into `[0, 1)`; negative arguments wrap.
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// An antenna deployment: a set of distinct integer lattice positions with
/// per-axis normalized (wavelength-relative) spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayDeployment {
    dims: Dims,
    positions: Vec<LatticePoint>,
    spacing: [f64; 3],
}

impl ArrayDeployment {
    /// Full uniform lattice, positions enumerated in Kronecker order.
    pub fn uniform(dims: Dims, spacing: [f64; 3]) -> Result<Self, GeometryError> {
        if dims.contains(&0) {
            return Err(GeometryError::ZeroDimension(dims));
        }
        let positions = (0..num_points(dims))
            .map(|i| lattice_point(dims, i))
            .collect();
        Ok(Self {
            dims,
            positions,
            spacing,
        })
    }

    /// Arbitrary deployment inside the lattice `dims`.
    pub fn new(
        dims: Dims,
        positions: Vec<LatticePoint>,
        spacing: [f64; 3],
    ) -> Result<Self, GeometryError> {
        if dims.contains(&0) {
            return Err(GeometryError::ZeroDimension(dims));
        }
        if positions.is_empty() {
            return Err(GeometryError::EmptyArray);
        }
        let mut seen = vec![false; num_points(dims)];
        for &p in &positions {
            if (0..3).any(|a| p[a] >= dims[a]) {
                return Err(GeometryError::OutOfLattice { position: p, dims });
            }
            let i = flat_index(dims, p);
            if seen[i] {
                return Err(GeometryError::DuplicatePosition(p));
            }
            seen[i] = true;
        }
        Ok(Self {
            dims,
            positions,
            spacing,
        })
    }

    /// Deployment whose lattice is the bounding box of `positions`.
    pub fn from_positions(
        positions: Vec<LatticePoint>,
        spacing: [f64; 3],
    ) -> Result<Self, GeometryError> {
        if positions.is_empty() {
            return Err(GeometryError::EmptyArray);
        }
        let mut dims = [1; 3];
        for p in &positions {
            for a in 0..3 {
                dims[a] = dims[a].max(p[a] + 1);
            }
        }
        Self::new(dims, positions, spacing)
    }

    /// Deployment from normalized physical coordinates, which must be integer
    /// multiples of `spacing` (within 1e-9 relative).
    pub fn from_coordinates(
        coords: &[[f64; 3]],
        spacing: [f64; 3],
    ) -> Result<Self, GeometryError> {
        let mut positions = Vec::with_capacity(coords.len());
        for c in coords {
            let mut p = [0usize; 3];
            for a in 0..3 {
                let q = if spacing[a] > 0.0 {
                    c[a] / spacing[a]
                } else if c[a] == 0.0 {
                    0.0
                } else {
                    f64::NAN
                };
                let r = q.round();
                if !q.is_finite() || r < 0.0 || (q - r).abs() > 1e-9 * (1.0 + r.abs()) {
                    return Err(GeometryError::NonLatticePosition {
                        coordinate: *c,
                        spacing,
                    });
                }
                p[a] = r as usize;
            }
            positions.push(p);
        }
        Self::from_positions(positions, spacing)
    }

    /// `side × side × side` cube with antennas only on its six faces.
    pub fn cubic_shell(side: usize, spacing: [f64; 3]) -> Result<Self, GeometryError> {
        let dims = [side; 3];
        if side == 0 {
            return Err(GeometryError::ZeroDimension(dims));
        }
        let on_face = |v: usize| v == 0 || v + 1 == side;
        let positions = (0..num_points(dims))
            .map(|i| lattice_point(dims, i))
            .filter(|p| p.iter().any(|&v| on_face(v)))
            .collect();
        Self::new(dims, positions, spacing)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn positions(&self) -> &[LatticePoint] {
        &self.positions
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Number of axes with more than one lattice element.
    pub fn d(&self) -> usize {
        active_dimension(self.dims)
    }

    /// Per-axis extent actually occupied (max coordinate + 1).
    pub fn extent(&self) -> Dims {
        let mut e = [1; 3];
        for p in &self.positions {
            for a in 0..3 {
                e[a] = e[a].max(p[a] + 1);
            }
        }
        e
    }

    /// True when the deployment fills its lattice in Kronecker order.
    pub fn is_uniform(&self) -> bool {
        self.positions.len() == num_points(self.dims)
            && self
                .positions
                .iter()
                .enumerate()
                .all(|(i, &p)| flat_index(self.dims, p) == i)
    }

    /// Relabels axes: new axis `i` is old axis `perm[i]`.
    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        let dims = [self.dims[perm[0]], self.dims[perm[1]], self.dims[perm[2]]];
        let spacing = [
            self.spacing[perm[0]],
            self.spacing[perm[1]],
            self.spacing[perm[2]],
        ];
        let positions = self
            .positions
            .iter()
            .map(|p| [p[perm[0]], p[perm[1]], p[perm[2]]])
            .collect();
        Self {
            dims,
            positions,
            spacing,
        }
    }
}

/// Uniform steering vector: entry for lattice point `n` is `exp(-j2π f·n)/√N`
/// in Kronecker order.
pub fn steering_vector_uniform(dims: Dims, f: Freq) -> DVector<Complex64> {
    let n = num_points(dims);
    let scale = 1.0 / (n as f64).sqrt();
    // per-axis phasors, then the Kronecker product
    let axis = |len: usize, fa: f64| -> Vec<Complex64> {
        (0..len)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * fa * k as f64))
            .collect()
    };
    let (rx, ry, rz) = (axis(dims[0], f[0]), axis(dims[1], f[1]), axis(dims[2], f[2]));
    let mut out = DVector::<Complex64>::zeros(n);
    let mut i = 0;
    for ex in &rx {
        for ey in &ry {
            let exy = ex * ey;
            for ez in &rz {
                out[i] = exy * ez * scale;
                i += 1;
            }
        }
    }
    out
}

/// Steering vector of an arbitrary deployment for the direction `(θ, φ)`.
///
/// Entry `n` is `exp(jΦ_n)/√N` with
/// `Φ_n = -2π(p^x sinθ cosφ + p^y sinθ sinφ + p^z cosθ)`, which coincides
/// with [`steering_vector_uniform`] at [`freq_from_angles`] on uniform arrays.
pub fn steering_vector_angles(array: &ArrayDeployment, theta: f64, phi: f64) -> DVector<Complex64> {
    let dir = [
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    ];
    let sp = array.spacing();
    let scale = 1.0 / (array.len() as f64).sqrt();
    DVector::from_iterator(
        array.len(),
        array.positions().iter().map(|p| {
            let proj: f64 = (0..3).map(|a| p[a] as f64 * sp[a] * dir[a]).sum();
            Complex64::from_polar(scale, -2.0 * PI * proj)
        }),
    )
}

/// Normalized frequency `[mod(δx sinθ cosφ, 1), mod(δy sinθ sinφ, 1), mod(δz cosθ, 1)]`.
pub fn freq_from_angles(theta: f64, phi: f64, spacing: [f64; 3]) -> Freq {
    [
        wrap_unit(spacing[0] * theta.sin() * phi.cos()),
        wrap_unit(spacing[1] * theta.sin() * phi.sin()),
        wrap_unit(spacing[2] * theta.cos()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    fn kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
    }

    #[test]
    fn zero_frequency_is_flat() {
        let r = steering_vector_uniform([1, 1, 4], [0.0; 3]);
        for v in r.iter() {
            assert!(close(*v, Complex64::new(0.5, 0.0), 1e-15));
        }
    }

    #[test]
    fn half_frequency_alternates() {
        let r = steering_vector_uniform([1, 1, 2], [0.0, 0.0, 0.5]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(r[0], Complex64::new(h, 0.0), 1e-15));
        assert!(close(r[1], Complex64::new(-h, 0.0), 1e-15));
    }

    #[test]
    fn kronecker_factorisation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let f = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
            let full = steering_vector_uniform([2, 3, 4], f);
            let rx = steering_vector_uniform([2, 1, 1], [f[0], 0.0, 0.0]);
            let ry = steering_vector_uniform([1, 3, 1], [0.0, f[1], 0.0]);
            let rz = steering_vector_uniform([1, 1, 4], [0.0, 0.0, f[2]]);
            let k = kron(rx.as_slice(), &kron(ry.as_slice(), rz.as_slice()));
            for (a, b) in full.iter().zip(&k) {
                assert!(close(*a, *b, 1e-12));
            }
            assert!((full.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn freq_from_angles_examples() {
        let d = [0.5; 3];
        let f = freq_from_angles(0.0, 1.234, d);
        assert!(f[0].abs() < 1e-15 && f[1].abs() < 1e-15 && (f[2] - 0.5).abs() < 1e-15);
        let f = freq_from_angles(PI / 2.0, 0.0, d);
        assert!((f[0] - 0.5).abs() < 1e-15 && f[1].abs() < 1e-15);
        assert!(f[2] < 1e-15 || f[2] > 1.0 - 1e-15 || f[2] == 0.0);
        assert_eq!(freq_from_angles(0.3, 0.2, [0.0; 3]), [0.0; 3]);
        // negative arguments wrap into [0, 1)
        let f = freq_from_angles(PI, 0.0, d);
        assert!((f[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn angle_steering_two_antennas() {
        let arr = ArrayDeployment::new([2, 1, 1], vec![[0, 0, 0], [1, 0, 0]], [0.5, 0.5, 0.5]).unwrap();
        let r = steering_vector_angles(&arr, PI / 2.0, 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(r[0], Complex64::new(h, 0.0), 1e-15));
        assert!(close(r[1], Complex64::new(-h, 0.0), 1e-12));
    }

    #[test]
    fn angle_steering_zero_positions_is_flat() {
        let arr = ArrayDeployment::uniform([1, 1, 3], [0.0; 3]).unwrap();
        let r = steering_vector_angles(&arr, PI / 2.0, 0.0);
        for v in r.iter() {
            assert!(close(*v, Complex64::new(1.0 / 3f64.sqrt(), 0.0), 1e-15));
        }
    }

    #[test]
    fn angle_steering_matches_uniform_formula() {
        let arr = ArrayDeployment::uniform([1, 1, 3], [0.0, 0.0, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let theta = rng.gen_range(0.0..2.0 * PI);
            let phi = rng.gen_range(-PI / 2.0..PI / 2.0);
            let a = steering_vector_angles(&arr, theta, phi);
            let b = steering_vector_uniform(arr.dims(), freq_from_angles(theta, phi, arr.spacing()));
            for (x, y) in a.iter().zip(b.iter()) {
                assert!(close(*x, *y, 1e-12));
            }
        }
    }

    #[test]
    fn deployment_validation() {
        assert_eq!(
            ArrayDeployment::new([1, 1, 2], vec![[0, 0, 0], [0, 0, 0]], [0.5; 3]),
            Err(GeometryError::DuplicatePosition([0, 0, 0]))
        );
        assert!(matches!(
            ArrayDeployment::new([1, 1, 2], vec![[0, 0, 2]], [0.5; 3]),
            Err(GeometryError::OutOfLattice { .. })
        ));
        assert!(ArrayDeployment::uniform([1, 0, 2], [0.5; 3]).is_err());
        let u = ArrayDeployment::uniform([2, 3, 4], [0.5; 3]).unwrap();
        assert!(u.is_uniform());
        assert_eq!(u.d(), 3);
        assert_eq!(u.positions()[1], [0, 0, 1]);
        assert_eq!(u.positions()[4], [0, 1, 0]);
    }

    #[test]
    fn physical_coordinates_must_sit_on_lattice() {
        let ok = ArrayDeployment::from_coordinates(&[[0.0, 0.0, 0.0], [0.0, 0.0, 1.0]], [0.5; 3]).unwrap();
        assert_eq!(ok.positions()[1], [0, 0, 2]);
        assert!(matches!(
            ArrayDeployment::from_coordinates(&[[0.0, 0.0, 0.3]], [0.5; 3]),
            Err(GeometryError::NonLatticePosition { .. })
        ));
    }

    #[test]
    fn cubic_shell_counts() {
        let c = ArrayDeployment::cubic_shell(4, [0.5; 3]).unwrap();
        assert_eq!(c.len(), 56);
        assert_eq!(c.d(), 3);
    }

    #[test]
    fn index_round_trip() {
        let dims = [3, 2, 5];
        for i in 0..30 {
            assert_eq!(flat_index(dims, lattice_point(dims, i)), i);
        }
    }
}
