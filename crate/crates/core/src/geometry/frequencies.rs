use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{steering_vector_uniform, Dims, Freq, GeometryError};

/// `K` points on the torus, with the axes they live on and optional complex
/// amplitudes.
///
/// Components on inactive axes are stored as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySet {
    active: [bool; 3],
    points: Vec<Freq>,
    amplitudes: Option<Vec<Complex64>>,
}

impl FrequencySet {
    pub fn new(active: [bool; 3], points: Vec<Freq>) -> Result<Self, GeometryError> {
        let mut points = points;
        for p in points.iter_mut() {
            for a in 0..3 {
                if !active[a] {
                    p[a] = 0.0;
                }
                if !(0.0..1.0).contains(&p[a]) {
                    return Err(GeometryError::FrequencyOutOfRange(p[a]));
                }
            }
        }
        for (i, p) in points.iter().enumerate() {
            if points[..i].contains(p) {
                return Err(GeometryError::DuplicateFrequency(*p));
            }
        }
        Ok(Self {
            active,
            points,
            amplitudes: None,
        })
    }

    /// An empty set on the given axes.
    pub fn empty(active: [bool; 3]) -> Self {
        Self {
            active,
            points: vec![],
            amplitudes: None,
        }
    }

    pub fn with_amplitudes(mut self, amplitudes: Vec<Complex64>) -> Result<Self, GeometryError> {
        if amplitudes.len() != self.points.len() {
            return Err(GeometryError::LengthMismatch {
                what: "amplitudes",
                expected: self.points.len(),
                got: amplitudes.len(),
            });
        }
        self.amplitudes = Some(amplitudes);
        Ok(self)
    }

    pub fn active(&self) -> [bool; 3] {
        self.active
    }

    /// Dimension of the parameter space (number of active axes, at least 1).
    pub fn d(&self) -> usize {
        self.active.iter().filter(|&&a| a).count().max(1)
    }

    pub fn points(&self) -> &[Freq] {
        &self.points
    }

    pub fn amplitudes(&self) -> Option<&[Complex64]> {
        self.amplitudes.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `N̄ × K` matrix whose columns are the uniform steering vectors on `dims`.
    pub fn steering_matrix(&self, dims: Dims) -> DMatrix<Complex64> {
        steering_matrix(dims, &self.points)
    }
}

/// `N̄ × K` steering matrix for raw frequency points (duplicates allowed).
pub fn steering_matrix(dims: Dims, points: &[Freq]) -> DMatrix<Complex64> {
    let n = super::num_points(dims);
    let mut r = DMatrix::<Complex64>::zeros(n, points.len());
    for (k, f) in points.iter().enumerate() {
        r.set_column(k, &steering_vector_uniform(dims, *f));
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inactive_axes_are_zeroed() {
        let s = FrequencySet::new([false, true, true], vec![[0.7, 0.1, 0.2]]).unwrap();
        assert_eq!(s.points()[0], [0.0, 0.1, 0.2]);
        assert_eq!(s.d(), 2);
    }

    #[test]
    fn rejects_out_of_range_and_duplicates() {
        assert!(FrequencySet::new([true; 3], vec![[1.0, 0.0, 0.0]]).is_err());
        assert!(FrequencySet::new([true; 3], vec![[-0.1, 0.0, 0.0]]).is_err());
        assert_eq!(
            FrequencySet::new([true; 3], vec![[0.1; 3], [0.1; 3]]),
            Err(GeometryError::DuplicateFrequency([0.1; 3]))
        );
    }

    #[test]
    fn amplitude_length_checked() {
        let s = FrequencySet::new([true; 3], vec![[0.1; 3]]).unwrap();
        assert!(s.clone().with_amplitudes(vec![]).is_err());
        assert!(s.with_amplitudes(vec![Complex64::new(1.0, 0.0)]).is_ok());
    }
}
