//! Multilevel (d-level) Toeplitz Hermitian matrices.
//!
//! An [`MLTMatrix`] on virtual dims `[X̄, Ȳ, Z̄]` is stored through its
//! generator `v_{abc}`, `a ∈ [-X̄+1, X̄-1]` and likewise for `b`, `c`. The
//! dense matrix has entry `((x,y,z), (x',y',z')) = v_{x'-x, y'-y, z'-z}` with
//! rows and columns in Kronecker order (`z` fastest).

pub mod eigen;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{lattice_point, Dims, Freq};
pub use eigen::{eigh, jacobi_eigh, Eigen};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MltError {
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("eigensolver did not converge after {sweeps} sweeps (relative off-diagonal {off_diagonal:e})")]
    EigenFailure { sweeps: usize, off_diagonal: f64 },
    #[error("invalid atoms: {0}")]
    InvalidAtoms(String),
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dense Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(DMatrix<Complex64>);

impl HermitianMatrix {
    /// Tolerance (relative to the Frobenius norm, plus an absolute floor) for
    /// accepting a matrix as Hermitian.
    pub const TOL: f64 = 1e-12;

    pub fn new(m: DMatrix<Complex64>) -> Result<Self, MltError> {
        if m.nrows() != m.ncols() {
            return Err(MltError::SizeMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let dev = (&m - m.adjoint()).norm();
        if dev > Self::TOL * (1.0 + m.norm()) {
            return Err(MltError::NotHermitian(dev));
        }
        Ok(Self::from_hermitian_part(m))
    }

    /// `(M + M†)/2`.
    pub fn from_hermitian_part(m: DMatrix<Complex64>) -> Self {
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        Self(h)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn eigh(&self) -> Result<Eigen, MltError> {
        eigh(&self.0)
    }

    /// Number of eigenvalues above `rtol · λ_max`.
    pub fn numerical_rank(&self, rtol: f64) -> Result<usize, MltError> {
        let e = self.eigh()?;
        let top = e.values.first().copied().unwrap_or(0.0);
        if top <= 0.0 {
            return Ok(0);
        }
        Ok(e.values.iter().filter(|&&l| l > rtol * top).count())
    }
}

/// d-level Toeplitz Hermitian matrix held by its generator.
#[derive(Debug, Clone, PartialEq)]
pub struct MLTMatrix {
    dims: Dims,
    generator: Vec<Complex64>,
}

/// Number of generator entries, `(2X̄-1)(2Ȳ-1)(2Z̄-1)`.
pub fn generator_len(dims: Dims) -> usize {
    dims.iter().map(|&n| 2 * n - 1).product()
}

impl MLTMatrix {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            generator: vec![ZERO; generator_len(dims)],
        }
    }

    /// Builds from a generator laid out with `c` fastest and `a` slowest,
    /// offsets shifted to be non-negative. The generator is
    /// conjugate-symmetrized, so `v_{-a-b-c} = conj(v_{abc})` holds on return.
    pub fn from_generator(dims: Dims, generator: Vec<Complex64>) -> Result<Self, MltError> {
        let expected = generator_len(dims);
        if generator.len() != expected {
            return Err(MltError::SizeMismatch {
                expected,
                got: generator.len(),
            });
        }
        let mut m = Self { dims, generator };
        m.symmetrize();
        Ok(m)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Size `N̄` of the materialized matrix.
    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn generator(&self) -> &[Complex64] {
        &self.generator
    }

    fn slot(&self, a: isize, b: isize, c: isize) -> usize {
        let [x, y, z] = self.dims.map(|n| n as isize);
        assert!(a.abs() < x && b.abs() < y && c.abs() < z, "generator offset out of range");
        (((a + x - 1) * (2 * y - 1) + (b + y - 1)) * (2 * z - 1) + (c + z - 1)) as usize
    }

    /// `v_{abc}`.
    pub fn get(&self, a: isize, b: isize, c: isize) -> Complex64 {
        self.generator[self.slot(a, b, c)]
    }

    /// Sets `v_{abc}` and its mirror `v_{-a-b-c}` to keep conjugate symmetry.
    pub fn set(&mut self, a: isize, b: isize, c: isize, v: Complex64) {
        let (i, j) = (self.slot(a, b, c), self.slot(-a, -b, -c));
        if i == j {
            self.generator[i] = Complex64::new(v.re, 0.0);
        } else {
            self.generator[i] = v;
            self.generator[j] = v.conj();
        }
    }

    fn symmetrize(&mut self) {
        let n = self.generator.len();
        // the layout is centrally symmetric: slot k mirrors slot n-1-k
        for k in 0..=n / 2 {
            let m = n - 1 - k;
            let avg = (self.generator[k] + self.generator[m].conj()) * 0.5;
            self.generator[k] = avg;
            self.generator[m] = avg.conj();
        }
    }

    pub fn materialize(&self) -> HermitianMatrix {
        let n = self.size();
        let pts: Vec<[isize; 3]> = (0..n)
            .map(|i| lattice_point(self.dims, i).map(|v| v as isize))
            .collect();
        let m = DMatrix::from_fn(n, n, |r, c| {
            let (p, q) = (pts[r], pts[c]);
            self.get(q[0] - p[0], q[1] - p[1], q[2] - p[2])
        });
        HermitianMatrix(m)
    }

    /// The leading `w × w` principal submatrix of the materialization.
    pub fn upper_left_corner(&self, w: usize) -> Result<HermitianMatrix, MltError> {
        if w > self.size() {
            return Err(MltError::SizeMismatch {
                expected: self.size(),
                got: w,
            });
        }
        let pts: Vec<[isize; 3]> = (0..w)
            .map(|i| lattice_point(self.dims, i).map(|v| v as isize))
            .collect();
        Ok(HermitianMatrix(DMatrix::from_fn(w, w, |r, c| {
            let (p, q) = (pts[r], pts[c]);
            self.get(q[0] - p[0], q[1] - p[1], q[2] - p[2])
        })))
    }

    /// Frobenius inner product of two materializations, computed on generators.
    pub fn inner(&self, other: &MLTMatrix) -> f64 {
        assert_eq!(self.dims, other.dims);
        let [x, y, z] = self.dims.map(|n| n as isize);
        let mut acc = 0.0;
        for a in -(x - 1)..x {
            for b in -(y - 1)..y {
                for c in -(z - 1)..z {
                    let mult = ((x - a.abs()) * (y - b.abs()) * (z - c.abs())) as f64;
                    acc += mult * (self.get(a, b, c).conj() * other.get(a, b, c)).re;
                }
            }
        }
        acc
    }
}

/// `Σ_k p_k r(f_k) r(f_k)†` as a d-LT matrix.
pub fn mlt_from_atoms(dims: Dims, freqs: &[Freq], powers: &[f64]) -> Result<MLTMatrix, MltError> {
    if freqs.len() != powers.len() {
        return Err(MltError::SizeMismatch {
            expected: freqs.len(),
            got: powers.len(),
        });
    }
    if let Some(p) = powers.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
        return Err(MltError::InvalidAtoms(format!("power {p} is not positive")));
    }
    let n = dims.iter().product::<usize>() as f64;
    let mut m = MLTMatrix::zeros(dims);
    let [x, y, z] = dims.map(|n| n as isize);
    for a in -(x - 1)..x {
        for b in -(y - 1)..y {
            for c in -(z - 1)..z {
                // entry (0, (a,b,c)) of r r† for a,b,c ≥ 0; general offsets follow the same phase law
                let v: Complex64 = freqs
                    .iter()
                    .zip(powers)
                    .map(|(f, &p)| {
                        let phase = 2.0 * std::f64::consts::PI
                            * (f[0] * a as f64 + f[1] * b as f64 + f[2] * c as f64);
                        Complex64::from_polar(p / n, phase)
                    })
                    .sum();
                let slot = m.slot(a, b, c);
                m.generator[slot] = v;
            }
        }
    }
    Ok(m)
}

/// Frobenius projection of the leading `N̄ × N̄` block of `h` onto the d-LT
/// matrices: each generator entry is the mean of its multilevel diagonal,
/// then conjugate-symmetrized. `h` may be larger than `N̄` (augmented matrices).
pub fn project_mlt_block(h: &DMatrix<Complex64>, dims: Dims) -> Result<MLTMatrix, MltError> {
    let n: usize = dims.iter().product();
    if h.nrows() < n || h.ncols() < n {
        return Err(MltError::SizeMismatch {
            expected: n,
            got: h.nrows().min(h.ncols()),
        });
    }
    let mut m = MLTMatrix::zeros(dims);
    let [x, y, z] = dims;
    let (sy, sz) = (2 * y - 1, 2 * z - 1);
    // generator slot of (x'-x, y'-y, z'-z) is linear in the two points
    let base = |p: [usize; 3]| (p[0] * sy + p[1]) * sz + p[2];
    let origin = ((x - 1) * sy + (y - 1)) * sz + (z - 1);
    let keys: Vec<usize> = (0..n).map(|i| base(lattice_point(dims, i))).collect();
    for col in 0..n {
        let kc = origin + keys[col];
        let column = h.column(col);
        for row in 0..n {
            m.generator[kc - keys[row]] += column[row];
        }
    }
    for a in 0..2 * x - 1 {
        for b in 0..sy {
            for c in 0..sz {
                let da = (a as isize - (x as isize - 1)).unsigned_abs();
                let db = (b as isize - (y as isize - 1)).unsigned_abs();
                let dc = (c as isize - (z as isize - 1)).unsigned_abs();
                let count = ((x - da) * (y - db) * (z - dc)) as f64;
                m.generator[(a * sy + b) * sz + c] /= count;
            }
        }
    }
    m.symmetrize();
    Ok(m)
}

pub fn project_mlt(h: &HermitianMatrix, dims: Dims) -> Result<MLTMatrix, MltError> {
    let n: usize = dims.iter().product();
    if h.dim() != n {
        return Err(MltError::SizeMismatch {
            expected: n,
            got: h.dim(),
        });
    }
    project_mlt_block(h.as_matrix(), dims)
}

/// Projection onto the PSD cone; with `rank_cap = Some(r)` only the `r`
/// largest positive eigenvalues survive.
pub fn project_psd(h: &HermitianMatrix, rank_cap: Option<usize>) -> Result<HermitianMatrix, MltError> {
    let e = h.eigh()?;
    let cap = rank_cap.unwrap_or(usize::MAX);
    let m = e.reconstruct(|k, l| (k < cap && l > 0.0).then_some(l));
    Ok(HermitianMatrix::from_hermitian_part(m))
}
