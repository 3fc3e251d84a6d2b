use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gadget::{exact_fractional_circuit, Direction};
use crate::numerics::Operator;
use crate::oracle::{fractional_query, OracleInstance, QueryCounter};

/// Segment length `m = ⌊1/(4θ)⌋`, so that `mθ ≤ 1/4`.
pub fn choose_m(theta: f64) -> Result<usize> {
    if !(theta > 0.0 && theta <= 0.25) {
        return Err(Error::OutOfRange { name: "theta", value: theta, range: "(0, 1/4]" });
    }
    // tolerate θ = 1/(4m) landing a hair above its exact value
    let m = (1.0 / (4.0 * theta) * (1.0 + 1e-12)).floor();
    Ok((m as usize).max(1))
}

/// One element of a segment, in time order.
#[derive(Clone, Debug)]
pub enum Step {
    /// Probabilistic fractional query `Q_x^{±θ}` (sign from the plan's
    /// direction), one controlled full query.
    Gadget,
    /// Known driving unitary.
    Drive(Operator),
    /// Deterministic error fix `Q_x^{angle}`, `angle = ±π/2`, realized by the
    /// two-query exact circuit.
    Fix { angle: f64 },
}

/// A block of gadget steps executed and post-selected as a unit.
///
/// Forward plans come straight from the fractional program
/// (`Gadget, V_0, Gadget, V_1, …`). Undo plans are reversed and inverted
/// copies of a realized plan and may begin with a drive and contain fixes.
/// All gadgets in a plan share one direction.
#[derive(Clone, Debug)]
pub struct SegmentPlan {
    theta: f64,
    direction: Direction,
    k: usize,
    steps: Vec<Step>,
    dim: usize,
}

impl SegmentPlan {
    /// `Gadget, V_0, Gadget, V_1, …, Gadget, V_{m−1}` with truncation weight `k`.
    pub fn forward(theta: f64, drives: Vec<Operator>, k: usize) -> Result<Self> {
        let steps = drives
            .into_iter()
            .flat_map(|v| [Step::Gadget, Step::Drive(v)])
            .collect();
        Self::from_steps(theta, Direction::Forward, k, steps)
    }

    pub fn from_steps(theta: f64, direction: Direction, k: usize, steps: Vec<Step>) -> Result<Self> {
        if !(theta > 0.0 && theta <= PI) {
            return Err(Error::OutOfRange { name: "theta", value: theta, range: "(0, pi]" });
        }
        let dim = steps
            .iter()
            .find_map(|s| match s {
                Step::Drive(v) => Some(v.dim()),
                _ => None,
            })
            .ok_or_else(|| Error::InconsistentRecord("segment plan has no drive steps".into()))?;
        for step in &steps {
            match step {
                Step::Drive(v) if v.dim() != dim => {
                    return Err(Error::DimensionMismatch { expected: dim, found: v.dim() })
                }
                Step::Fix { angle } if (angle.abs() - PI / 2.0).abs() > 1e-12 => {
                    return Err(Error::OutOfRange { name: "fix angle", value: *angle, range: "{-pi/2, pi/2}" })
                }
                _ => {}
            }
        }
        Ok(Self { theta, direction, k, steps, dim })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of gadget steps, the segment length `m`.
    pub fn m(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, Step::Gadget)).count()
    }

    /// Configured truncation weight.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Truncation weight actually usable, `min(k, m)`.
    pub fn k_effective(&self) -> usize {
        self.k.min(self.m())
    }

    pub fn fix_count(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, Step::Fix { .. })).count()
    }

    /// Number of gadgets preceding each fix step, in step order.
    pub(crate) fn fix_positions(&self) -> Vec<usize> {
        let mut gadgets = 0;
        let mut out = Vec::new();
        for step in &self.steps {
            match step {
                Step::Gadget => gadgets += 1,
                Step::Fix { .. } => out.push(gadgets),
                Step::Drive(_) => {}
            }
        }
        out
    }

    /// Copy of the plan with a different truncation weight.
    pub fn with_k(&self, k: usize) -> SegmentPlan {
        SegmentPlan { k, ..self.clone() }
    }

    /// Splits the plan into the unconditional prefix `B_0` and the per-gadget
    /// drives `V_i` (everything between gadget `i` and gadget `i + 1`), with
    /// fixes multiplied in as the given operators.
    pub fn blocks(&self, fixes: &FixOperators) -> (Operator, Vec<Operator>) {
        let mut pre = Operator::identity(self.dim);
        let mut drives: Vec<Operator> = Vec::new();
        for step in &self.steps {
            let op = match step {
                Step::Gadget => {
                    drives.push(Operator::identity(self.dim));
                    continue;
                }
                Step::Drive(v) => v,
                Step::Fix { angle } => fixes.get(*angle),
            };
            let target = drives.last_mut().unwrap_or(&mut pre);
            *target = op * &*target;
        }
        (pre, drives)
    }
}

/// System operators of the two error fixes `Q_x^{±π/2}`, each obtained from
/// the two-query exact circuit.
#[derive(Clone, Debug)]
pub struct FixOperators {
    plus: Operator,
    minus: Operator,
}

impl FixOperators {
    /// Builds both circuits once. Construction charges a scratch counter; each
    /// later application is charged by the executor.
    pub fn new(x: &OracleInstance) -> Result<Self> {
        let mut scratch = QueryCounter::new();
        Ok(Self {
            plus: exact_fractional_circuit(x, PI / 2.0, &mut scratch)?,
            minus: exact_fractional_circuit(x, -PI / 2.0, &mut scratch)?,
        })
    }

    pub fn get(&self, angle: f64) -> &Operator {
        if angle > 0.0 {
            &self.plus
        } else {
            &self.minus
        }
    }
}

/// System operator realized by one gadget with the given outcome, including
/// its global phase.
pub fn realized_gadget_operator(
    x: &OracleInstance,
    theta: f64,
    direction: Direction,
    outcome: u8,
) -> Result<Operator> {
    let sign = direction.sign();
    if outcome == 0 {
        Ok(fractional_query(x, sign * theta)?.scaled(Complex64::from_polar(1.0, sign * theta / 2.0)))
    } else {
        Ok(fractional_query(x, direction.error_angle())?.scaled(Complex64::from_polar(1.0, -sign * PI / 4.0)))
    }
}

/// Unitary realized by the plan when its gadgets produce `outcomes`.
pub fn realized_unitary(plan: &SegmentPlan, x: &OracleInstance, outcomes: &[u8]) -> Result<Operator> {
    if outcomes.len() != plan.m() {
        return Err(Error::InconsistentRecord(format!(
            "{} outcomes for a plan with {} gadgets",
            outcomes.len(),
            plan.m()
        )));
    }
    let fixes = FixOperators::new(x)?;
    let mut u = Operator::identity(plan.dim());
    let mut next = outcomes.iter();
    for step in plan.steps() {
        let op = match step {
            Step::Gadget => {
                let bit = *next.next().expect("length checked above");
                realized_gadget_operator(x, plan.theta(), plan.direction(), bit)?
            }
            Step::Drive(v) => v.clone(),
            Step::Fix { angle } => fixes.get(*angle).clone(),
        };
        u = &op * &u;
    }
    Ok(u)
}

/// Unitary realized when every gadget succeeds.
pub fn ideal_unitary(plan: &SegmentPlan, x: &OracleInstance) -> Result<Operator> {
    realized_unitary(plan, x, &vec![0; plan.m()])
}
