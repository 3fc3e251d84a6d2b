use num_complex::Complex64;

use crate::error::{Error, Result};

/// Amplitudes of a pure state on `q` qubits. Qubit 0 is the least
/// significant bit of the amplitude index.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

pub(crate) fn log2_exact(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros() as usize)
}

impl StateVector {
    /// Wraps raw amplitudes. The length must be a power of two; the vector is
    /// not normalized here.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        log2_exact(amps.len())?;
        Ok(Self { amps })
    }

    /// Computational basis state `|index⟩` on `n_qubits` qubits.
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let dim = 1usize << n_qubits;
        assert!(index < dim, "basis index {index} out of range for {n_qubits} qubits");
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn zero_state(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub(crate) fn zeros(dim: usize) -> Self {
        Self {
            amps: vec![Complex64::new(0.0, 0.0); dim],
        }
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn n_qubits(&self) -> usize {
        self.amps.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Returns the state rescaled to unit norm.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scaled(Complex64::new(1.0 / norm, 0.0)))
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            amps: self.amps.iter().map(|a| a * factor).collect(),
        }
    }

    /// In-place `self += factor * other`. Lengths must agree.
    pub(crate) fn add_scaled(&mut self, factor: Complex64, other: &StateVector) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += factor * b;
        }
    }

    /// Tensor product `self ⊗ low`, where `low` occupies the least
    /// significant qubits.
    pub fn tensor(&self, low: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.len() * low.len());
        for hi in &self.amps {
            for lo in &low.amps {
                amps.push(hi * lo);
            }
        }
        StateVector { amps }
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        let amps = vec![Complex64::new(1.0, 0.0); 3];
        assert!(matches!(
            StateVector::from_amplitudes(amps),
            Err(Error::NotPowerOfTwo(3))
        ));
        assert!(StateVector::from_amplitudes(Vec::new()).is_err());
    }

    #[test]
    fn normalizes_and_reports_zero_norm() {
        let s = StateVector::from_amplitudes(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(0.0, 4.0),
        ])
        .unwrap();
        let n = s.normalized().unwrap();
        assert!((n.norm() - 1.0).abs() < 1e-12);
        assert!(matches!(
            StateVector::zeros(4).normalized(),
            Err(Error::ZeroNorm)
        ));
    }

    #[test]
    fn tensor_places_low_factor_on_low_bits() {
        let hi = StateVector::basis(1, 1);
        let lo = StateVector::basis(2, 2);
        let t = hi.tensor(&lo);
        assert_eq!(t.n_qubits(), 3);
        assert_eq!(t.amplitudes()[0b110], Complex64::new(1.0, 0.0));
    }
}
