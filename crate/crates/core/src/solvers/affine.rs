//! The structured affine block shared by all solvers: augmented matrices
//! whose leading block is d-LT, with data constraints on `s` and a rule for
//! the lower-right scalar.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::geometry::{Dims, SensingMatrix};
use crate::mlt::{project_mlt_block, MLTMatrix, MltError};

#[derive(Debug, Clone, Copy)]
pub(crate) enum ScalarRule {
    /// `t = Re g_nn − shift`.
    Shift(f64),
    /// `t` is fixed.
    Pinned(f64),
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum DataRule {
    /// Sensed coordinates of `s` equal `y`.
    Exact,
    /// Sensed coordinates minimize `weight·|s − y|² + rho·|s − g|²`.
    Prox { weight: f64, rho: f64 },
}

#[derive(Debug, Clone)]
pub(crate) struct AffineSet {
    pub dims: Dims,
    pub mask: Vec<bool>,
    pub y_virtual: DVector<Complex64>,
    pub scalar: ScalarRule,
    pub data: DataRule,
    /// Subtracted from `v_000` after the diagonal averaging.
    pub trace_shift: f64,
}

pub(crate) struct AffinePoint {
    pub structured: MLTMatrix,
    pub s: DVector<Complex64>,
    pub t: f64,
}

impl AffineSet {
    pub fn new(a: &SensingMatrix, y: &DVector<Complex64>, scalar: ScalarRule, data: DataRule, trace_shift: f64) -> Self {
        Self {
            dims: a.virtual_dims(),
            mask: a.sensed_mask(),
            y_virtual: a.adjoint(y),
            scalar,
            data,
            trace_shift,
        }
    }

    pub fn project(&self, g: &DMatrix<Complex64>) -> Result<AffinePoint, MltError> {
        let n = self.mask.len();
        let mut structured = project_mlt_block(g, self.dims)?;
        if self.trace_shift != 0.0 {
            let v = structured.get(0, 0, 0);
            structured.set(0, 0, 0, v - self.trace_shift);
        }
        let s = DVector::from_fn(n, |j, _| {
            let free = (g[(j, n)] + g[(n, j)].conj()) * 0.5;
            if !self.mask[j] {
                return free;
            }
            match self.data {
                DataRule::Exact => self.y_virtual[j],
                DataRule::Prox { weight, rho } => (self.y_virtual[j] * weight + free * rho) / (weight + rho),
            }
        });
        let t = match self.scalar {
            ScalarRule::Shift(shift) => g[(n, n)].re - shift,
            ScalarRule::Pinned(v) => v,
        };
        Ok(AffinePoint { structured, s, t })
    }
}

impl AffinePoint {
    pub fn assemble(&self) -> DMatrix<Complex64> {
        assemble(&self.structured, &self.s, self.t)
    }
}

/// `[[materialize(T), s], [s†, t]]`.
pub(crate) fn assemble(structured: &MLTMatrix, s: &DVector<Complex64>, t: f64) -> DMatrix<Complex64> {
    let n = structured.size();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(structured.materialize().as_matrix());
    for j in 0..n {
        m[(j, n)] = s[j];
        m[(n, j)] = s[j].conj();
    }
    m[(n, n)] = Complex64::new(t, 0.0);
    m
}
