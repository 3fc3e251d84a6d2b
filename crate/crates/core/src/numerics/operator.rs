use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::state::{log2_exact, StateVector};
use crate::error::{Error, Result};

/// Dense square operator on `q` qubits (dimension `2^q`).
///
/// Unitarity and Hermiticity are never assumed; use [`Operator::is_unitary`]
/// and [`Operator::is_hermitian`] where a contract needs them.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    m: DMatrix<Complex64>,
}

impl Operator {
    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        log2_exact(m.nrows())?;
        Ok(Self { m })
    }

    /// Builds a `dim x dim` operator from row-major entries.
    pub fn from_row_major(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Result<Self> {
        log2_exact(diag.len())?;
        let dim = diag.len();
        let mut m = DMatrix::zeros(dim, dim);
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        Ok(Self { m })
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim.is_power_of_two(), "operator dimension must be a power of two");
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim.is_power_of_two(), "operator dimension must be a power of two");
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.m[(row, col)]
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            m: self.m.adjoint(),
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Operator {
        Operator {
            m: &self.m * factor,
        }
    }

    /// `self ⊗ low`, with `low` acting on the least significant qubits.
    pub fn kron(&self, low: &Operator) -> Operator {
        Operator {
            m: self.m.kronecker(&low.m),
        }
    }

    /// Block-diagonal operator `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ self`, with the control
    /// as the new most significant qubit.
    pub fn controlled(&self) -> Operator {
        let d = self.dim();
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m.view_mut((d, d), (d, d)).copy_from(&self.m);
        Operator { m }
    }

    /// Matrix-vector product.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if state.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: state.len(),
            });
        }
        Ok(self.apply_unchecked(state))
    }

    pub(crate) fn apply_unchecked(&self, state: &StateVector) -> StateVector {
        let dim = self.dim();
        let src = state.amplitudes();
        let mut out = StateVector::zeros(dim);
        let dst = out.amplitudes_mut();
        // nalgebra stores column-major
        for (col, s) in src.iter().enumerate() {
            if *s == Complex64::new(0.0, 0.0) {
                continue;
            }
            let column = self.m.column(col);
            for (row, d) in dst.iter_mut().enumerate() {
                *d += column[row] * s;
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    /// `‖H − H†‖`.
    pub fn hermiticity_defect(&self) -> f64 {
        super::operator_norm(&Operator {
            m: &self.m - self.m.adjoint(),
        })
    }

    /// `‖U†U − I‖`.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.m.adjoint() * &self.m;
        super::operator_norm(&Operator {
            m: gram - DMatrix::identity(self.dim(), self.dim()),
        })
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|r| (0..d).all(|c| r == c || self.m[(r, c)].norm() <= tol))
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `‖self − e^{iφ}·other‖` with the phase `φ` aligned through
    /// `tr(other† self)`. Zero exactly when the operators agree up to a global
    /// phase.
    pub fn distance_up_to_phase(&self, other: &Operator) -> f64 {
        let overlap = (other.m.adjoint() * &self.m).trace();
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        super::operator_norm(&Operator {
            m: &self.m - &other.m * phase,
        })
    }
}

impl Mul for &Operator {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator { m: &self.m * &rhs.m }
    }
}

impl Add for &Operator {
    type Output = Operator;

    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator { m: &self.m + &rhs.m }
    }
}

impl Sub for &Operator {
    type Output = Operator;

    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator { m: &self.m - &rhs.m }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            Operator::from_matrix(DMatrix::zeros(2, 4)),
            Err(Error::NotSquare { .. })
        ));
        assert!(matches!(
            Operator::from_matrix(DMatrix::zeros(3, 3)),
            Err(Error::NotPowerOfTwo(3))
        ));
        assert!(Operator::from_row_major(2, &[c(1.0, 0.0); 3]).is_err());
    }

    #[test]
    fn row_major_layout() {
        let op = Operator::from_row_major(2, &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)])
            .unwrap();
        assert_eq!(op.entry(0, 1), c(2.0, 0.0));
        assert_eq!(op.entry(1, 0), c(3.0, 0.0));
        let out = op.apply(&StateVector::basis(1, 1)).unwrap();
        assert_eq!(out.amplitudes(), &[c(2.0, 0.0), c(4.0, 0.0)]);
    }

    #[test]
    fn controlled_is_block_diagonal() {
        let x = Operator::from_row_major(2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
            .unwrap();
        let cx = x.controlled();
        assert_eq!(cx.dim(), 4);
        let out = cx.apply(&StateVector::basis(2, 0b10)).unwrap();
        assert_eq!(out, StateVector::basis(2, 0b11));
        let out = cx.apply(&StateVector::basis(2, 0b01)).unwrap();
        assert_eq!(out, StateVector::basis(2, 0b01));
    }

    #[test]
    fn phase_aligned_distance_ignores_global_phase() {
        let d = Operator::from_diagonal(&[c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let rotated = d.scaled(Complex64::from_polar(1.0, 0.7));
        assert!(d.distance_up_to_phase(&rotated) < 1e-14);
        assert!(d.max_abs_diff(&rotated) > 0.1);
    }
}
