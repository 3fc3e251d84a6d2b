//! Undo/redo recovery of failed segments.
//!
//! A failed segment leaves the system in `U_fail|ψ⟩`, where `U_fail` differs
//! from the intended segment unitary by `Q_x^{∓π/2}` at the measured error
//! positions. The walk undoes it by running the realized sequence backwards
//! (reverse gadgets for the successful positions, exact fixes for the errors)
//! and then redoes the original segment. Undo segments can themselves fail,
//! so the pending work is kept on an explicit stack.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretize::{ceil_tolerant, FractionalProgram};
use crate::error::{Error, Result};
use crate::numerics::StateVector;
use crate::oracle::{OracleInstance, QueryCounter};
use crate::segment::{choose_m, ExecutionMode, SegmentPlan, SegmentRunner, Step, DEFAULT_M_CAP};

/// Error positions of one segment computation and the residual rotation
/// left at each (`−π/2` for forward gadgets, `+π/2` for reverse ones).
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRecord {
    pub positions: Vec<usize>,
    pub signs: Vec<f64>,
}

impl ErrorRecord {
    pub fn new(positions: Vec<usize>, signs: Vec<f64>) -> Result<Self> {
        if positions.len() != signs.len() {
            return Err(Error::InconsistentRecord(format!(
                "{} positions but {} signs",
                positions.len(),
                signs.len()
            )));
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InconsistentRecord("positions must be strictly increasing".into()));
        }
        Ok(Self { positions, signs })
    }

    /// Record for a measured outcome string of a plan.
    pub fn from_outcomes(plan: &SegmentPlan, outcomes: &[u8]) -> Self {
        let positions: Vec<usize> = outcomes
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| i)
            .collect();
        let signs = vec![plan.direction().error_angle(); positions.len()];
        Self { positions, signs }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Plan that inverts `failed` as realized with the errors in `record`.
///
/// The realized step sequence is reversed and each step inverted: a
/// successful gadget becomes an opposite-direction gadget, an error at
/// position `j` becomes the exact fix `Q_x^{−sign_j}`, a fix `Q_x^s` becomes
/// `Q_x^{−s}` and a drive `V` becomes `V†`. The result has `m − α` gadgets.
pub fn undo_plan(failed: &SegmentPlan, record: &ErrorRecord) -> Result<SegmentPlan> {
    let m = failed.m();
    if record.positions.iter().any(|&p| p >= m) {
        return Err(Error::InconsistentRecord(format!(
            "error position beyond the {m} gadgets of the segment"
        )));
    }
    let expected = failed.direction().error_angle();
    if record.signs.iter().any(|s| (s - expected).abs() > 1e-12) {
        return Err(Error::InconsistentRecord(format!(
            "error signs must all be {expected} for this direction"
        )));
    }
    let mut errors = record.positions.iter().zip(&record.signs).peekable();
    let mut realized = Vec::with_capacity(failed.steps().len());
    let mut gadget = 0;
    for step in failed.steps() {
        realized.push(match step {
            Step::Gadget => {
                let inverted = match errors.peek() {
                    Some((&pos, &sign)) if pos == gadget => {
                        errors.next();
                        Step::Fix { angle: -sign }
                    }
                    _ => Step::Gadget,
                };
                gadget += 1;
                inverted
            }
            Step::Drive(v) => Step::Drive(v.adjoint()),
            Step::Fix { angle } => Step::Fix { angle: -angle },
        });
    }
    realized.reverse();
    SegmentPlan::from_steps(failed.theta(), failed.direction().flipped(), failed.k(), realized)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    pub eps2: f64,
    pub budget_factor: f64,
    pub mode: ExecutionMode,
    pub m_cap: usize,
    /// Truncation weight of forward segments (truncated mode only).
    pub k: usize,
}

impl RecoveryOptions {
    pub fn exact(eps2: f64) -> Self {
        Self {
            eps2,
            budget_factor: 2.0,
            mode: ExecutionMode::ExactSequential,
            m_cap: DEFAULT_M_CAP,
            k: usize::MAX,
        }
    }

    pub fn truncated(eps2: f64, k: usize) -> Self {
        Self {
            mode: ExecutionMode::Truncated,
            k,
            ..Self::exact(eps2)
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps2 > 0.0 && self.eps2 < 1.0) {
            return Err(Error::OutOfRange { name: "eps2", value: self.eps2, range: "(0, 1)" });
        }
        if !(self.budget_factor >= 1.0 && self.budget_factor.is_finite()) {
            return Err(Error::OutOfRange { name: "budget_factor", value: self.budget_factor, range: "[1, inf)" });
        }
        Ok(())
    }

    /// Cap on segment computations, and separately on error fixes:
    /// `⌈budget_factor · segments / ε₂⌉`.
    pub fn budget(&self, segments: usize) -> u64 {
        ceil_tolerant(self.budget_factor * segments as f64 / self.eps2) as u64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub full_queries: u64,
    pub segment_computations: u64,
    pub successful_computations: u64,
    pub error_fixes: u64,
    pub succeeded: bool,
    pub max_recursion_depth: usize,
}

/// One segment computation of the walk, as reported to a trace callback.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkEvent {
    /// Undo nesting level of the computed plan; original segments are 0.
    pub depth: usize,
    /// Gadgets in the computed plan.
    pub m: usize,
    pub succeeded: bool,
    /// Plans still on the stack after this computation.
    pub pending: usize,
}

/// Splits the program into forward segments of `m` gadgets; the last one is
/// shorter when `m` does not divide `p`.
pub fn segment_plans(prog: &FractionalProgram, m: usize, k: usize) -> Result<Vec<SegmentPlan>> {
    prog.drives()
        .chunks(m.max(1))
        .map(|chunk| SegmentPlan::forward(prog.theta(), chunk.to_vec(), k))
        .collect()
}

/// Runs the whole program with undo/redo recovery.
///
/// On budget exhaustion the returned stats have `succeeded = false` and the
/// returned state is wherever the walk stopped.
pub fn run_with_recovery<R: Rng + ?Sized>(
    psi0: &StateVector,
    x: &OracleInstance,
    prog: &FractionalProgram,
    options: &RecoveryOptions,
    rng: &mut R,
    counter: &mut QueryCounter,
) -> Result<(StateVector, TrajectoryStats)> {
    run_with_recovery_traced(psi0, x, prog, options, rng, counter, &mut |_| {})
}

pub fn run_with_recovery_traced<R: Rng + ?Sized>(
    psi0: &StateVector,
    x: &OracleInstance,
    prog: &FractionalProgram,
    options: &RecoveryOptions,
    rng: &mut R,
    counter: &mut QueryCounter,
    trace: &mut dyn FnMut(&WalkEvent),
) -> Result<(StateVector, TrajectoryStats)> {
    options.validate()?;
    if psi0.len() != prog.dim() {
        return Err(Error::DimensionMismatch { expected: prog.dim(), found: psi0.len() });
    }
    let m = choose_m(prog.theta())?;
    if options.mode == ExecutionMode::Truncated && m.min(prog.p()) > options.m_cap {
        return Err(Error::SegmentCapExceeded { m, cap: options.m_cap });
    }
    let plans = segment_plans(prog, m, options.k)?;
    let runner = SegmentRunner::new(x, options.mode, options.m_cap)?;
    let budget = options.budget(plans.len());

    let start = counter.count();
    let mut stats = TrajectoryStats::default();
    let mut state = psi0.normalized()?;
    let mut stack: Vec<(SegmentPlan, usize)> = plans.into_iter().rev().map(|p| (p, 0)).collect();

    while let Some((plan, depth)) = stack.pop() {
        if stats.segment_computations >= budget || stats.error_fixes > budget {
            stats.full_queries = counter.count() - start;
            return Ok((state, stats));
        }
        let run = runner.run(&state, &plan, rng, counter)?;
        stats.segment_computations += 1;
        stats.error_fixes += run.fix_applications as u64;
        stats.max_recursion_depth = stats.max_recursion_depth.max(depth);
        let succeeded = run.succeeded();
        state = run.state;
        if succeeded {
            stats.successful_computations += 1;
        } else {
            let undo = undo_plan(&plan, &ErrorRecord::from_outcomes(&plan, &run.outcomes))?;
            stack.push((plan, depth));
            stack.push((undo, depth + 1));
        }
        trace(&WalkEvent { depth, m: run.outcomes.len(), succeeded, pending: stack.len() });
    }
    stats.full_queries = counter.count() - start;
    stats.succeeded = stats.error_fixes <= budget;
    Ok((state, stats))
}

/// Deterministic per-trial random stream: the master seed with the trial
/// index as the ChaCha stream id.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Monte Carlo walk statistics, normalized per original segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkSummary {
    pub trials: usize,
    pub segments: usize,
    pub mean_computations_per_segment: f64,
    pub computations_stderr: f64,
    pub mean_fixes_per_segment: f64,
    pub fixes_stderr: f64,
    /// Pooled fraction of segment computations that succeeded.
    pub computation_success_rate: f64,
    pub success_rate_stderr: f64,
    pub budget_failure_rate: f64,
    pub budget_failure_stderr: f64,
    pub mean_full_queries: f64,
}

pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn estimate_walk_stats(
    psi0: &StateVector,
    x: &OracleInstance,
    prog: &FractionalProgram,
    options: &RecoveryOptions,
    trials: usize,
    seed: u64,
) -> Result<WalkSummary> {
    if trials == 0 {
        return Err(Error::OutOfRange { name: "trials", value: 0.0, range: "[1, inf)" });
    }
    let segments = prog.p().div_ceil(choose_m(prog.theta())?);
    let mut all = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial as u64);
        let (_, stats) = run_with_recovery(psi0, x, prog, options, &mut rng, &mut QueryCounter::new())?;
        all.push(stats);
    }
    let per_segment = |f: &dyn Fn(&TrajectoryStats) -> u64| -> Vec<f64> {
        all.iter().map(|s| f(s) as f64 / segments as f64).collect()
    };
    let (mean_comp, comp_se) = mean_and_stderr(&per_segment(&|s| s.segment_computations));
    let (mean_fix, fix_se) = mean_and_stderr(&per_segment(&|s| s.error_fixes));
    let computations: u64 = all.iter().map(|s| s.segment_computations).sum();
    let successes: u64 = all.iter().map(|s| s.successful_computations).sum();
    let rate = successes as f64 / computations as f64;
    let failures: Vec<f64> = all.iter().map(|s| if s.succeeded { 0.0 } else { 1.0 }).collect();
    let (fail_rate, fail_se) = mean_and_stderr(&failures);
    let queries: Vec<f64> = all.iter().map(|s| s.full_queries as f64).collect();
    Ok(WalkSummary {
        trials,
        segments,
        mean_computations_per_segment: mean_comp,
        computations_stderr: comp_se,
        mean_fixes_per_segment: mean_fix,
        fixes_stderr: fix_se,
        computation_success_rate: rate,
        success_rate_stderr: (rate * (1.0 - rate) / computations as f64).sqrt(),
        budget_failure_rate: fail_rate,
        budget_failure_stderr: fail_se,
        mean_full_queries: mean_and_stderr(&queries).0,
    })
}

/// Attempt cap `⌈ln(1/ε₂′) / ln(1/ε₂)⌉` for amplification.
pub fn max_attempts(eps2: f64, eps2_prime: f64) -> Result<usize> {
    for (name, eps) in [("eps2", eps2), ("eps2_prime", eps2_prime)] {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::OutOfRange { name, value: eps, range: "(0, 1)" });
        }
    }
    Ok(ceil_tolerant((1.0 / eps2_prime).ln() / (1.0 / eps2).ln()).max(1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Amplified<T> {
    /// First successful result, if any attempt succeeded.
    pub result: Option<T>,
    pub attempts: usize,
}

/// Repeats `attempt` until it reports success or the attempt cap is reached.
/// The closure receives the attempt index and returns `(value, succeeded)`.
pub fn amplify<T, F>(mut attempt: F, eps2: f64, eps2_prime: f64) -> Result<Amplified<T>>
where
    F: FnMut(usize) -> Result<(T, bool)>,
{
    let cap = max_attempts(eps2, eps2_prime)?;
    for i in 0..cap {
        let (value, ok) = attempt(i)?;
        if ok {
            return Ok(Amplified { result: Some(value), attempts: i + 1 });
        }
    }
    Ok(Amplified { result: None, attempts: cap })
}
