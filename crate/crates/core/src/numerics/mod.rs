//! Dense complex linear algebra for desk-scale state-vector simulation.
//!
//! Everything here is a pure function over immutable values. Matrix
//! factorizations are delegated to `nalgebra`; the gate-application kernel is
//! hand-written so the qubit ordering convention (qubit 0 = least significant
//! bit of the amplitude index) lives in exactly one place.

mod operator;
pub mod random;
mod state;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

pub use operator::Operator;
pub use state::StateVector;

use crate::error::{Error, Result};

/// Hermiticity tolerance accepted by [`expm_neg_i_hermitian`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// `e^{-iHt}` for Hermitian `H`, via the Hermitian eigendecomposition
/// `H = Q Λ Q†`.
pub fn expm_neg_i_hermitian(h: &Operator, t: f64) -> Result<Operator> {
    let defect = h.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian { defect });
    }
    let eig = SymmetricEigen::new(h.matrix().clone());
    let q = &eig.eigenvectors;
    let mut scaled = q.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -lambda * t);
        for entry in scaled.column_mut(j).iter_mut() {
            *entry *= phase;
        }
    }
    Operator::from_matrix(scaled * q.adjoint())
}

/// Largest singular value.
pub fn operator_norm(a: &Operator) -> f64 {
    if a.dim() == 1 {
        return a.entry(0, 0).norm();
    }
    let svd = a.matrix().clone().svd(false, false);
    svd.singular_values.iter().copied().fold(0.0, f64::max)
}

/// `|⟨u|v⟩|`, the phase-insensitive overlap of two normalized states.
pub fn fidelity(u: &StateVector, v: &StateVector) -> Result<f64> {
    Ok(u.inner(v)?.norm())
}

/// Applies `gate` to the qubits listed in `targets`, identity elsewhere.
///
/// Gate-local qubit `j` is register qubit `targets[j]`, so `targets[0]` is the
/// gate's least significant qubit.
pub fn apply_to_targets(
    state: &StateVector,
    gate: &Operator,
    targets: &[usize],
) -> Result<StateVector> {
    let n = state.n_qubits();
    let expected = 1usize << targets.len();
    if gate.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: gate.dim(),
        });
    }
    let mut mask = 0usize;
    for &t in targets {
        if t >= n {
            return Err(Error::TargetOutOfRange {
                qubit: t,
                n_qubits: n,
            });
        }
        if mask & (1 << t) != 0 {
            return Err(Error::DuplicateTarget(t));
        }
        mask |= 1 << t;
    }

    // offsets[local] = register index bits for gate-local basis state `local`
    let offsets: Vec<usize> = (0..expected)
        .map(|local| {
            targets
                .iter()
                .enumerate()
                .filter(|(j, _)| local >> j & 1 == 1)
                .fold(0, |acc, (_, &t)| acc | 1 << t)
        })
        .collect();

    let src = state.amplitudes();
    let mut out = state.clone();
    let dst = out.amplitudes_mut();
    let mut gathered = vec![Complex64::new(0.0, 0.0); expected];
    let matrix = gate.matrix();
    for base in (0..src.len()).filter(|i| i & mask == 0) {
        for (g, off) in gathered.iter_mut().zip(&offsets) {
            *g = src[base | off];
        }
        for (row, off) in offsets.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (col, g) in gathered.iter().enumerate() {
                acc += matrix[(row, col)] * g;
            }
            dst[base | off] = acc;
        }
    }
    Ok(out)
}
