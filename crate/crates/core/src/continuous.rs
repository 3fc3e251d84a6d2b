//! Continuous-time query algorithms with piecewise-constant driving
//! Hamiltonians, and their exact reference evolution.

use crate::error::{Error, Result};
use crate::numerics::{expm_neg_i_hermitian, operator_norm, Operator, StateVector, HERMITIAN_TOL};
use crate::oracle::{query_hamiltonian, OracleInstance};

/// Slack allowed when an interval endpoint lands on `T` up to rounding.
const TIME_SLACK: f64 = 1e-12;

/// One constant stretch of the driving Hamiltonian.
#[derive(Clone, Debug)]
pub struct Piece {
    pub duration: f64,
    pub generator: Operator,
}

/// Piecewise-constant driving Hamiltonian `D(t)` on `[0, T]`.
#[derive(Clone, Debug)]
pub struct DrivingSchedule {
    pieces: Vec<Piece>,
    total_time: f64,
}

impl DrivingSchedule {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        let first = pieces
            .first()
            .ok_or_else(|| Error::InvalidSchedule("schedule has no pieces".into()))?;
        let dim = first.generator.dim();
        for (i, piece) in pieces.iter().enumerate() {
            if !(piece.duration > 0.0 && piece.duration.is_finite()) {
                return Err(Error::InvalidSchedule(format!(
                    "piece {i} has non-positive duration {}",
                    piece.duration
                )));
            }
            if piece.generator.dim() != dim {
                return Err(Error::InvalidSchedule(format!(
                    "piece {i} has dimension {}, expected {dim}",
                    piece.generator.dim()
                )));
            }
            let defect = piece.generator.hermiticity_defect();
            if defect > HERMITIAN_TOL {
                return Err(Error::InvalidSchedule(format!(
                    "piece {i} generator is not Hermitian (defect {defect:.3e})"
                )));
            }
        }
        let total_time = pieces.iter().map(|p| p.duration).sum();
        Ok(Self { pieces, total_time })
    }

    /// A single time-independent piece.
    pub fn constant(generator: Operator, duration: f64) -> Result<Self> {
        Self::new(vec![Piece {
            duration,
            generator,
        }])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].generator.dim()
    }

    /// Same piece boundaries with every generator multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> DrivingSchedule {
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                duration: p.duration,
                generator: p.generator.scaled(num_complex::Complex64::new(factor, 0.0)),
            })
            .collect();
        DrivingSchedule {
            pieces,
            total_time: self.total_time,
        }
    }

    /// Same generators with every duration multiplied by `factor`.
    pub fn stretched(&self, factor: f64) -> Result<DrivingSchedule> {
        DrivingSchedule::new(
            self.pieces
                .iter()
                .map(|p| Piece {
                    duration: p.duration * factor,
                    generator: p.generator.clone(),
                })
                .collect(),
        )
    }

    /// Time-ordered propagator over `[t_a, t_b]` of `D(t) + extra`, where
    /// `extra` is a constant Hermitian term.
    pub(crate) fn propagator(&self, t_a: f64, t_b: f64, extra: Option<&Operator>) -> Result<Operator> {
        if !(t_a >= 0.0 && t_a <= t_b && t_b <= self.total_time + TIME_SLACK) {
            return Err(Error::OutOfRange {
                name: "interval",
                value: if t_a < 0.0 || t_a > t_b { t_a } else { t_b },
                range: "0 <= t_a <= t_b <= T",
            });
        }
        let t_b = t_b.min(self.total_time);
        let mut u = Operator::identity(self.dim());
        let mut start = 0.0;
        for piece in &self.pieces {
            let end = start + piece.duration;
            let lo = start.max(t_a);
            let hi = end.min(t_b);
            if hi > lo {
                let step = match extra {
                    Some(h) => expm_neg_i_hermitian(&(&piece.generator + h), hi - lo)?,
                    None => expm_neg_i_hermitian(&piece.generator, hi - lo)?,
                };
                u = &step * &u;
            }
            if end >= t_b {
                break;
            }
            start = end;
        }
        Ok(u)
    }
}

/// `r = (1/T) ∫ ‖D(t)‖ dt`, exact for piecewise-constant schedules.
pub fn average_norm(schedule: &DrivingSchedule) -> f64 {
    let weighted: f64 = schedule
        .pieces
        .iter()
        .map(|p| p.duration * operator_norm(&p.generator))
        .sum();
    weighted / schedule.total_time
}

/// `U_D(t_b, t_a)`: evolution under the drive alone.
pub fn drive_evolve(schedule: &DrivingSchedule, t_a: f64, t_b: f64) -> Result<Operator> {
    schedule.propagator(t_a, t_b, None)
}

/// Driving schedule plus initial state; the total time is the schedule's.
#[derive(Clone, Debug)]
pub struct ContinuousAlgorithm {
    schedule: DrivingSchedule,
    initial_state: StateVector,
}

impl ContinuousAlgorithm {
    pub fn new(schedule: DrivingSchedule, initial_state: StateVector) -> Result<Self> {
        if initial_state.len() != schedule.dim() {
            return Err(Error::DimensionMismatch {
                expected: schedule.dim(),
                found: initial_state.len(),
            });
        }
        let initial_state = initial_state.normalized()?;
        Ok(Self {
            schedule,
            initial_state,
        })
    }

    pub fn schedule(&self) -> &DrivingSchedule {
        &self.schedule
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.initial_state
    }

    pub fn total_time(&self) -> f64 {
        self.schedule.total_time
    }
}

fn check_oracle(alg: &ContinuousAlgorithm, x: &OracleInstance) -> Result<()> {
    if x.dim() != alg.schedule.dim() {
        return Err(Error::DimensionMismatch {
            expected: alg.schedule.dim(),
            found: x.dim(),
        });
    }
    Ok(())
}

/// `U_{D+H_x}(t_b, t_a)`.
pub fn full_evolve(
    alg: &ContinuousAlgorithm,
    x: &OracleInstance,
    t_a: f64,
    t_b: f64,
) -> Result<Operator> {
    check_oracle(alg, x)?;
    alg.schedule.propagator(t_a, t_b, Some(&query_hamiltonian(x)))
}

/// Final state `|ψ₁⟩` of the continuous-time algorithm: exact evolution under
/// `H_x + D(t)` from `0` to `T`.
pub fn reference_evolve(alg: &ContinuousAlgorithm, x: &OracleInstance) -> Result<StateVector> {
    let u = full_evolve(alg, x, 0.0, alg.total_time())?;
    u.apply(&alg.initial_state)
}
