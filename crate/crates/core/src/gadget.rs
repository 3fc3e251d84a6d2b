//! Single-query probabilistic simulation of a fractional query, and the
//! deterministic two-query circuit for arbitrary fractional angles.
//!
//! The probabilistic gadget prepares one ancilla with `R₁` (or `R₁′ = σ_z R₁`
//! for the conjugate query), applies `Q_x` controlled on the ancilla, applies
//! `R₂`, and measures. Outcome 0 leaves `e^{iθ/2} Q_x^θ ψ` (forward); outcome
//! 1 leaves `e^{−iπ/4} Q_x^{−π/2} ψ`. The reverse gadget realizes
//! `e^{−iθ/2} Q_x^{−θ} ψ` or `e^{iπ/4} Q_x^{π/2} ψ`.
//!
//! Ancillas are always placed above the system register (most significant
//! qubit), so joint states are `|a⟩ ⊗ |ψ⟩` in index order.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{apply_to_targets, expm_neg_i_hermitian, Operator, StateVector};
use crate::oracle::{OracleInstance, QueryCounter};

/// Which fractional query the gadget simulates: `Q_x^{+θ}` or `Q_x^{−θ}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    pub fn flipped(self) -> Direction {
        match self {
            Direction::Forward => Direction::Reverse,
            Direction::Reverse => Direction::Forward,
        }
    }

    /// Sign of the simulated angle.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Reverse => -1.0,
        }
    }

    /// Angle of the error operator left behind by a failed gadget.
    pub fn error_angle(self) -> f64 {
        -self.sign() * PI / 2.0
    }
}

/// Operator realized on the system by one gadget run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AppliedOp {
    FracPlus,
    FracMinus,
    ErrMinusHalfPi,
    ErrPlusHalfPi,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GadgetOutcome {
    pub measured_bit: u8,
    pub applied: AppliedOp,
    /// Probability of the branch that was taken.
    pub probability: f64,
}

impl GadgetOutcome {
    pub fn succeeded(&self) -> bool {
        self.measured_bit == 0
    }
}

fn check_gadget_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta <= PI) {
        return Err(Error::OutOfRange {
            name: "theta",
            value: theta,
            range: "(0, pi]",
        });
    }
    Ok(())
}

/// `v = cos(θ/2) + sin(θ/2)`.
pub fn gadget_v(theta: f64) -> f64 {
    (theta / 2.0).cos() + (theta / 2.0).sin()
}

/// `p_s = 1/v²`, independent of the input state and of `x`.
pub fn success_probability(theta: f64) -> f64 {
    let v = gadget_v(theta);
    1.0 / (v * v)
}

/// `(√(cos(θ/2)/v), √(sin(θ/2)/v))`.
pub(crate) fn amplitudes(theta: f64) -> (f64, f64) {
    let v = gadget_v(theta);
    (((theta / 2.0).cos() / v).sqrt(), ((theta / 2.0).sin() / v).sqrt())
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `R₁` with first column `(√cos(θ/2), i√sin(θ/2))/√v`. The second column is
/// the orthonormal completion with a real nonnegative leading entry.
pub fn r1_matrix(theta: f64) -> Result<Operator> {
    check_gadget_theta(theta)?;
    let (a, b) = amplitudes(theta);
    Operator::from_row_major(2, &[c(a, 0.0), c(b, 0.0), c(0.0, b), c(0.0, -a)])
}

/// `R₁′ = σ_z R₁`, used for the conjugate query `Q_x^{−θ}`.
pub fn r1_conjugate_matrix(theta: f64) -> Result<Operator> {
    let r1 = r1_matrix(theta)?;
    let z = Operator::from_diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)])?;
    Ok(&z * &r1)
}

/// `R₂: |0⟩ ↦ (√cos|0⟩ + √sin|1⟩)/√v, |1⟩ ↦ (√sin|0⟩ − √cos|1⟩)/√v`.
pub fn r2_matrix(theta: f64) -> Result<Operator> {
    check_gadget_theta(theta)?;
    let (a, b) = amplitudes(theta);
    Operator::from_row_major(2, &[c(a, 0.0), c(b, 0.0), c(b, 0.0), c(-a, 0.0)])
}

/// Ancilla preparation for the given direction.
pub fn preparation_matrix(theta: f64, direction: Direction) -> Result<Operator> {
    match direction {
        Direction::Forward => r1_matrix(theta),
        Direction::Reverse => r1_conjugate_matrix(theta),
    }
}

/// Controlled-`Q_x` with control on `control_qubit` of a joint register whose
/// low `n` qubits are the system. Charges one full query.
pub(crate) fn apply_controlled_query(
    joint: &mut StateVector,
    x: &OracleInstance,
    control_qubit: usize,
    counter: &mut QueryCounter,
) {
    counter.charge(1);
    let sys_mask = x.dim() - 1;
    let bits = x.bits();
    for (idx, amp) in joint.amplitudes_mut().iter_mut().enumerate() {
        if idx >> control_qubit & 1 == 1 && bits[idx & sys_mask] == 1 {
            *amp = -*amp;
        }
    }
}

/// Joint ancilla-system state just before the ancilla measurement.
pub fn gadget_pre_measurement(
    psi: &StateVector,
    x: &OracleInstance,
    theta: f64,
    direction: Direction,
    counter: &mut QueryCounter,
) -> Result<StateVector> {
    gadget_pre_measurement_with(psi, x, theta, direction, &r2_matrix(theta)?, counter)
}

pub(crate) fn gadget_pre_measurement_with(
    psi: &StateVector,
    x: &OracleInstance,
    theta: f64,
    direction: Direction,
    r2: &Operator,
    counter: &mut QueryCounter,
) -> Result<StateVector> {
    if psi.len() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: psi.len(),
        });
    }
    let n = x.n_qubits();
    let prep = preparation_matrix(theta, direction)?;
    let mut joint = StateVector::zero_state(1).tensor(psi);
    joint = apply_to_targets(&joint, &prep, &[n])?;
    apply_controlled_query(&mut joint, x, n, counter);
    apply_to_targets(&joint, r2, &[n])
}

/// Runs the gadget on `ψ`. The branch is chosen by comparing the caller's
/// uniform variate `rand ∈ [0, 1)` with the outcome-0 probability, so runs
/// replay deterministically. Exactly one full query is charged.
pub fn apply_gadget(
    psi: &StateVector,
    x: &OracleInstance,
    theta: f64,
    direction: Direction,
    rand: f64,
    counter: &mut QueryCounter,
) -> Result<(GadgetOutcome, StateVector)> {
    let joint = gadget_pre_measurement(psi, x, theta, direction, counter)?;
    let dim = psi.len();
    let amps = joint.amplitudes();
    let branch0 = StateVector::from_amplitudes(amps[..dim].to_vec())?;
    let branch1 = StateVector::from_amplitudes(amps[dim..].to_vec())?;
    let p0 = branch0.norm_sqr();
    let p1 = branch1.norm_sqr();
    let total = p0 + p1;
    let (bit, branch, prob) = if rand * total < p0 {
        (0, branch0, p0 / total)
    } else {
        (1, branch1, p1 / total)
    };
    let applied = match (bit, direction) {
        (0, Direction::Forward) => AppliedOp::FracPlus,
        (0, Direction::Reverse) => AppliedOp::FracMinus,
        (_, Direction::Forward) => AppliedOp::ErrMinusHalfPi,
        (_, Direction::Reverse) => AppliedOp::ErrPlusHalfPi,
    };
    Ok((
        GadgetOutcome {
            measured_bit: bit,
            applied,
            probability: prob,
        },
        branch.normalized()?,
    ))
}

/// Deterministic two-query circuit for `Q_x^{θ′}`: ancilla `|+⟩`,
/// controlled-`Q_x`, `R^a_{θ′} = exp(−iθ′(𝟙 − σ_x)/2)` on the ancilla,
/// controlled-`Q_x`, then projection of the ancilla onto `|+⟩`.
///
/// Returns the induced system operator and charges two full queries.
pub fn exact_fractional_circuit(
    x: &OracleInstance,
    theta_prime: f64,
    counter: &mut QueryCounter,
) -> Result<Operator> {
    if !(theta_prime > -PI && theta_prime <= PI) {
        return Err(Error::OutOfRange {
            name: "theta_prime",
            value: theta_prime,
            range: "(-pi, pi]",
        });
    }
    let n = x.n_qubits();
    let dim = x.dim();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = StateVector::from_amplitudes(vec![c(s, 0.0), c(s, 0.0)])?;
    let generator = Operator::from_row_major(2, &[c(0.5, 0.0), c(-0.5, 0.0), c(-0.5, 0.0), c(0.5, 0.0)])?;
    let rotation = expm_neg_i_hermitian(&generator, theta_prime)?;

    let mut circuit_queries = QueryCounter::new();
    let mut columns = Vec::with_capacity(dim * dim);
    for j in 0..dim {
        let mut joint = plus.tensor(&StateVector::basis(n, j));
        apply_controlled_query(&mut joint, x, n, &mut circuit_queries);
        joint = apply_to_targets(&joint, &rotation, &[n])?;
        apply_controlled_query(&mut joint, x, n, &mut circuit_queries);
        // ⟨+|_a ⊗ 𝟙
        let amps = joint.amplitudes();
        columns.push((0..dim).map(|i| (amps[i] + amps[dim + i]) * s).collect::<Vec<_>>());
    }
    counter.charge(2);
    let mut row_major = vec![c(0.0, 0.0); dim * dim];
    for (col, column) in columns.iter().enumerate() {
        for (row, v) in column.iter().enumerate() {
            row_major[row * dim + col] = *v;
        }
    }
    Operator::from_row_major(dim, &row_major)
}
