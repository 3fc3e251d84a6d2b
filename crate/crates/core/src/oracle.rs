//! Phase oracles built from a hidden bit string `x` of length `N = 2^n`.
//!
//! Only the phase form of a query is used: `Q_x|j⟩ = (−1)^{x_j}|j⟩`. The
//! fractional query `Q_x^θ` applies `e^{−iθ x_j}` and is a full query at
//! `θ = π`. This module also owns [`QueryCounter`], the one place where full
//! queries are tallied.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Operator, StateVector};

/// Hidden string `x = (x_0, …, x_{N−1})`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleInstance {
    n_qubits: usize,
    bits: Vec<u8>,
}

impl OracleInstance {
    pub fn new(n_qubits: usize, bits: Vec<u8>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidOracle("n_qubits must be positive".into()));
        }
        let expected = 1usize << n_qubits;
        if bits.len() != expected {
            return Err(Error::InvalidOracle(format!(
                "expected {expected} bits for {n_qubits} qubits, found {}",
                bits.len()
            )));
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::InvalidOracle(format!(
                "bit {pos} has value {}, expected 0 or 1",
                bits[pos]
            )));
        }
        Ok(Self { n_qubits, bits })
    }

    pub fn random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Self {
        let bits = (0..1usize << n_qubits)
            .map(|_| rng.random_range(0..=1u8))
            .collect();
        Self::new(n_qubits, bits).expect("generated bits are well formed")
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn is_all_zero(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    fn diagonal(&self, phase_of_one: Complex64) -> Vec<Complex64> {
        self.bits
            .iter()
            .map(|&b| if b == 1 { phase_of_one } else { Complex64::new(1.0, 0.0) })
            .collect()
    }

    fn check_state(&self, psi: &StateVector) -> Result<()> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: psi.len(),
            });
        }
        Ok(())
    }

    /// `Q_x ψ` computed on the diagonal, charging one full query.
    pub fn apply_full_query(&self, psi: &StateVector, counter: &mut QueryCounter) -> Result<StateVector> {
        self.check_state(psi)?;
        counter.charge(1);
        Ok(self.apply_diagonal(psi, Complex64::new(-1.0, 0.0)))
    }

    /// `Q_x^θ ψ` computed on the diagonal. Fractional queries are not full
    /// queries and are never charged.
    pub fn apply_fractional_query(&self, psi: &StateVector, theta: f64) -> Result<StateVector> {
        check_theta(theta)?;
        self.check_state(psi)?;
        Ok(self.apply_diagonal(psi, Complex64::from_polar(1.0, -theta)))
    }

    pub(crate) fn apply_diagonal(&self, psi: &StateVector, phase_of_one: Complex64) -> StateVector {
        let mut out = psi.clone();
        for (a, &b) in out.amplitudes_mut().iter_mut().zip(&self.bits) {
            if b == 1 {
                *a *= phase_of_one;
            }
        }
        out
    }
}

/// Tally of full (discrete) queries.
///
/// Every construction or execution step that contains a full query charges it
/// here; reported query costs are read from this counter and nowhere else.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryCounter {
    full: u64,
}

impl QueryCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, queries: u64) {
        self.full += queries;
    }

    pub fn count(&self) -> u64 {
        self.full
    }

    pub fn merge(&mut self, other: &QueryCounter) {
        self.full += other.full;
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > -PI && theta <= PI) {
        return Err(Error::OutOfRange {
            name: "theta",
            value: theta,
            range: "(-pi, pi]",
        });
    }
    Ok(())
}

/// `H_x = Σ_j x_j |j⟩⟨j|`.
pub fn query_hamiltonian(x: &OracleInstance) -> Operator {
    let diag: Vec<Complex64> = x.bits.iter().map(|&b| Complex64::new(b as f64, 0.0)).collect();
    Operator::from_diagonal(&diag).expect("oracle dimension is a power of two")
}

/// `Q_x = Σ_j (−1)^{x_j} |j⟩⟨j|`.
pub fn full_query(x: &OracleInstance) -> Operator {
    Operator::from_diagonal(&x.diagonal(Complex64::new(-1.0, 0.0)))
        .expect("oracle dimension is a power of two")
}

/// `Q_x^θ = Σ_j e^{−iθ x_j} |j⟩⟨j|` for `θ ∈ (−π, π]`.
pub fn fractional_query(x: &OracleInstance, theta: f64) -> Result<Operator> {
    check_theta(theta)?;
    Operator::from_diagonal(&x.diagonal(Complex64::from_polar(1.0, -theta)))
}

/// `Q_x` controlled on `|1⟩` of an extra control qubit placed above the
/// system register (most significant bit).
pub fn controlled_full_query(x: &OracleInstance) -> Operator {
    full_query(x).controlled()
}
