use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::frequencies::steering_matrix;
use super::{flat_index, lattice_point, num_points, ArrayDeployment, Dims, Freq, GeometryError};

/// Binary row-selection matrix from a virtual uniform lattice to the
/// physical antennas, stored as an index map.
///
/// Row `n` of `A` is the standard basis vector `e_{row_to_virtual[n]}`, so
/// `A x` is a gather and `Aᵀ y` a scatter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensingMatrix {
    virtual_dims: Dims,
    row_to_virtual: Vec<usize>,
}

impl SensingMatrix {
    pub fn new(virtual_dims: Dims, row_to_virtual: Vec<usize>) -> Result<Self, GeometryError> {
        if virtual_dims.contains(&0) {
            return Err(GeometryError::ZeroDimension(virtual_dims));
        }
        let n_virtual = num_points(virtual_dims);
        let mut seen = vec![false; n_virtual];
        for &i in &row_to_virtual {
            if i >= n_virtual {
                return Err(GeometryError::RowOutOfRange { index: i, n_virtual });
            }
            if seen[i] {
                return Err(GeometryError::DuplicateRow(i));
            }
            seen[i] = true;
        }
        Ok(Self {
            virtual_dims,
            row_to_virtual,
        })
    }

    /// The identity selection (physical array equals the virtual array).
    pub fn identity(virtual_dims: Dims) -> Self {
        Self {
            virtual_dims,
            row_to_virtual: (0..num_points(virtual_dims)).collect(),
        }
    }

    pub fn virtual_dims(&self) -> Dims {
        self.virtual_dims
    }

    pub fn row_to_virtual(&self) -> &[usize] {
        &self.row_to_virtual
    }

    /// Number of physical antennas `N`.
    pub fn n(&self) -> usize {
        self.row_to_virtual.len()
    }

    /// Number of virtual antennas `N̄`.
    pub fn n_virtual(&self) -> usize {
        num_points(self.virtual_dims)
    }

    /// `A x` for `x ∈ C^N̄`.
    pub fn apply(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        DVector::from_iterator(self.n(), self.row_to_virtual.iter().map(|&j| x[j]))
    }

    /// `A M` for a matrix with `N̄` rows.
    pub fn apply_rows(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n(), m.ncols(), |i, j| m[(self.row_to_virtual[i], j)])
    }

    /// `Aᵀ y` for `y ∈ C^N` (zero on unsensed coordinates).
    pub fn adjoint(&self, y: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = DVector::<Complex64>::zeros(self.n_virtual());
        for (n, &j) in self.row_to_virtual.iter().enumerate() {
            out[j] = y[n];
        }
        out
    }

    /// Mask over virtual indices: true where sensed.
    pub fn sensed_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n_virtual()];
        for &j in &self.row_to_virtual {
            m[j] = true;
        }
        m
    }

    /// Sorted sensed index set `I` (0-based).
    pub fn sensed_set(&self) -> Vec<usize> {
        let mut s = self.row_to_virtual.clone();
        s.sort_unstable();
        s
    }

    /// Dense `N × N̄` matrix, for tests and small diagnostics.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::<f64>::zeros(self.n(), self.n_virtual());
        for (n, &j) in self.row_to_virtual.iter().enumerate() {
            a[(n, j)] = 1.0;
        }
        a
    }

    /// Relabels axes of the virtual lattice: new axis `i` is old axis `perm[i]`.
    /// Row order (the physical antenna order) is preserved.
    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        let old = self.virtual_dims;
        let dims = [old[perm[0]], old[perm[1]], old[perm[2]]];
        let row_to_virtual = self
            .row_to_virtual
            .iter()
            .map(|&j| {
                let p = lattice_point(old, j);
                flat_index(dims, [p[perm[0]], p[perm[1]], p[perm[2]]])
            })
            .collect();
        Self {
            virtual_dims: dims,
            row_to_virtual,
        }
    }
}

/// Formats a 0-based index set in 1-based range notation, e.g. `{2:5,8:12}`.
pub fn one_based_ranges(indices: &[usize]) -> String {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    let mut parts = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let start = sorted[i];
        let mut end = start;
        while i + 1 < sorted.len() && sorted[i + 1] == end + 1 {
            i += 1;
            end = sorted[i];
        }
        if start == end {
            parts.push(format!("{}", start + 1));
        } else {
            parts.push(format!("{}:{}", start + 1, end + 1));
        }
        i += 1;
    }
    format!("{{{}}}", parts.join(","))
}

/// Sensing matrix placing `array` on the virtual lattice `virtual_dims`
/// (same spacing, shared origin).
pub fn embed_in_virtual(
    array: &ArrayDeployment,
    virtual_dims: Dims,
) -> Result<SensingMatrix, GeometryError> {
    let extent = array.extent();
    if (0..3).any(|a| extent[a] > virtual_dims[a]) {
        return Err(GeometryError::DimensionTooSmall {
            extent,
            virtual_dims,
        });
    }
    let rows = array
        .positions()
        .iter()
        .map(|&p| flat_index(virtual_dims, p))
        .collect();
    SensingMatrix::new(virtual_dims, rows)
}

/// Outcome of the injectivity test for `A R(f_{1:m})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injectivity {
    pub injective: bool,
    pub smallest_singular_value: f64,
    pub largest_singular_value: f64,
}

/// Relative singular-value gap below which `A R(f)` is declared rank deficient.
pub const INJECTIVITY_RTOL: f64 = 1e-8;

/// Checks whether `A R(f_{1:m})` (an `N × m` matrix) has full column rank `m`.
pub fn check_injectivity(a: &SensingMatrix, freqs: &[Freq]) -> Injectivity {
    let m = freqs.len();
    if m == 0 {
        return Injectivity {
            injective: true,
            smallest_singular_value: f64::INFINITY,
            largest_singular_value: 0.0,
        };
    }
    let b = a.apply_rows(&steering_matrix(a.virtual_dims(), freqs));
    let sv = b.singular_values();
    let largest = sv.iter().cloned().fold(0.0, f64::max);
    let smallest = if m > a.n() {
        0.0
    } else {
        sv.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    Injectivity {
        injective: m <= a.n() && largest > 0.0 && smallest > INJECTIVITY_RTOL * largest,
        smallest_singular_value: smallest,
        largest_singular_value: largest,
    }
}

#[cfg(test)]
mod tests {
    use super::super::steering_vector_uniform;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// The planar example array: 3 × 4 lattice with (0,0), (1,1), (1,2) removed.
    pub(crate) fn planar_example() -> ArrayDeployment {
        let removed = [[0, 0, 0], [0, 1, 1], [0, 1, 2]];
        let pos = (0..12)
            .map(|i| lattice_point([1, 3, 4], i))
            .filter(|p| !removed.contains(p))
            .collect();
        ArrayDeployment::new([1, 3, 4], pos, [0.5; 3]).unwrap()
    }

    #[test]
    fn uniform_embeds_as_identity() {
        let u = ArrayDeployment::uniform([2, 2, 3], [0.5; 3]).unwrap();
        let a = embed_in_virtual(&u, [2, 2, 3]).unwrap();
        assert_eq!(a.row_to_virtual(), (0..12).collect::<Vec<_>>().as_slice());
        assert_eq!(a, SensingMatrix::identity([2, 2, 3]));
    }

    #[test]
    fn planar_example_sensed_set() {
        let a = embed_in_virtual(&planar_example(), [1, 3, 4]).unwrap();
        assert_eq!(a.n(), 9);
        assert_eq!(one_based_ranges(&a.sensed_set()), "{2:5,8:12}");
    }

    #[test]
    fn cubic_shell_embedding() {
        let c = ArrayDeployment::cubic_shell(4, [0.5; 3]).unwrap();
        let a = embed_in_virtual(&c, [4, 4, 4]).unwrap();
        assert_eq!((a.n(), a.n_virtual()), (56, 64));
    }

    #[test]
    fn too_small_virtual_lattice() {
        let u = ArrayDeployment::uniform([1, 3, 6], [0.5; 3]).unwrap();
        assert!(matches!(
            embed_in_virtual(&u, [1, 3, 5]),
            Err(GeometryError::DimensionTooSmall { .. })
        ));
    }

    #[test]
    fn sensing_identity_on_random_frequencies() {
        let arr = planar_example();
        let a = embed_in_virtual(&arr, [1, 3, 7]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let f = [0.0, rng.gen::<f64>(), rng.gen::<f64>()];
            let virt = steering_vector_uniform([1, 3, 7], f);
            let sensed = a.apply(&virt);
            // direct evaluation on the physical positions, same 1/sqrt(N̄) scale
            for (n, p) in arr.positions().iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * (f[1] * p[1] as f64 + f[2] * p[2] as f64);
                let direct = Complex64::from_polar(1.0 / 21f64.sqrt(), phase);
                assert!((sensed[n] - direct).norm() < 1e-12);
            }
            let dense = a.to_dense().map(|v| Complex64::new(v, 0.0));
            assert!((dense * &virt - &sensed).norm() < 1e-12);
        }
    }

    #[test]
    fn adjoint_scatters() {
        let a = SensingMatrix::new([1, 1, 4], vec![3, 1]).unwrap();
        let y = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)]);
        let x = a.adjoint(&y);
        assert_eq!(x[3], Complex64::new(1.0, 0.0));
        assert_eq!(x[1], Complex64::new(2.0, 0.0));
        assert_eq!(x[0], Complex64::new(0.0, 0.0));
        assert_eq!(a.apply(&x), y);
    }

    #[test]
    fn rejects_duplicate_rows() {
        assert_eq!(
            SensingMatrix::new([1, 1, 4], vec![1, 1]),
            Err(GeometryError::DuplicateRow(1))
        );
        assert!(SensingMatrix::new([1, 1, 4], vec![4]).is_err());
    }

    #[test]
    fn injectivity_dimension_bound_and_duplicates() {
        let a = SensingMatrix::identity([1, 1, 3]);
        let four = [[0.0, 0.0, 0.1], [0.0, 0.0, 0.2], [0.0, 0.0, 0.3], [0.0, 0.0, 0.4]];
        assert!(!check_injectivity(&a, &four).injective);
        let dup = [[0.0, 0.0, 0.1], [0.0, 0.0, 0.1]];
        assert!(!check_injectivity(&a, &dup).injective);
    }

    #[test]
    fn injectivity_linear_uniform_random() {
        let a = SensingMatrix::identity([1, 1, 8]);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let f: Vec<Freq> = (0..4).map(|_| [0.0, 0.0, rng.gen::<f64>()]).collect();
            assert!(check_injectivity(&a, &f).injective);
        }
    }

    #[test]
    fn permuted_sensing_commutes_with_steering() {
        let arr = planar_example();
        let a = embed_in_virtual(&arr, [1, 3, 4]).unwrap();
        let perm = [2, 1, 0];
        let ap = a.permuted(perm);
        assert_eq!(ap.virtual_dims(), [4, 3, 1]);
        let f = [0.0, 0.31, 0.77];
        let fp = [f[perm[0]], f[perm[1]], f[perm[2]]];
        let lhs = a.apply(&steering_vector_uniform([1, 3, 4], f));
        let rhs = ap.apply(&steering_vector_uniform([4, 3, 1], fp));
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
