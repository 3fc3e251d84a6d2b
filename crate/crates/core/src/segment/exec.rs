//! Segment execution.
//!
//! `ExactSequential` runs the gadgets one at a time: each control qubit is
//! prepared, used by its controlled query, measured and discarded. This is the
//! reference semantics and costs one full query per gadget.
//!
//! `Truncated` prepares the joint control state `|χ′⟩` on the Hamming ball of
//! radius `k`, applies the truncated circuit (`k + 1` full queries), then
//! `R₂^{⊗m}`, and samples the `m`-bit outcome by the chain rule over control
//! qubits. Because every circuit involved is block diagonal in the control
//! basis and agrees with the naive circuit on the ball, the sampler streams
//! over control positions and keeps one system vector per prefix weight
//! `w ≤ k`; the marginal of an outcome prefix is
//! `Σ_d F(d) ‖Σ_{w ≤ k−d} φ_w‖²`, where `F(d)` is the probability that the
//! unmeasured controls carry weight `d`. [`JointSegmentState`] evaluates the
//! same distribution literally from the truncated circuit's blocks and is used
//! to cross-check the sampler.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gadget::{amplitudes, gadget_pre_measurement_with, r2_matrix};
use crate::numerics::{Operator, StateVector};
use crate::oracle::{full_query, OracleInstance, QueryCounter};

use super::chi::{binomial, chi_restricted, control_amplitudes, overlap_bound, weight_probability};
use super::circuit::{truncated_block, truncated_query_count};
use super::plan::{FixOperators, SegmentPlan, Step};

/// Default cap on the segment length `m` in truncated mode.
pub const DEFAULT_M_CAP: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    #[serde(alias = "exact")]
    ExactSequential,
    Truncated,
}

impl std::str::FromStr for ExecutionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exact" | "exact_sequential" => Ok(ExecutionMode::ExactSequential),
            "truncated" => Ok(ExecutionMode::Truncated),
            other => Err(format!("unknown mode `{other}` (expected exact or truncated)")),
        }
    }
}

/// Result of one segment computation.
#[derive(Clone, Debug)]
pub struct SegmentRun {
    /// Measured control bits, one per gadget; 0 is success at that position.
    pub outcomes: Vec<u8>,
    /// Post-measurement system state, renormalized.
    pub state: StateVector,
    /// Full queries charged by this computation.
    pub queries: u64,
    /// Explicit `Q_x^{±π/2}` fix steps executed.
    pub fix_applications: usize,
    /// Probability of the realized outcome string.
    pub probability: f64,
}

impl SegmentRun {
    pub fn succeeded(&self) -> bool {
        self.outcomes.iter().all(|&b| b == 0)
    }

    pub fn error_positions(&self) -> Vec<usize> {
        self.outcomes
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Executes segment plans against one oracle instance.
#[derive(Clone, Debug)]
pub struct SegmentRunner {
    x: OracleInstance,
    fixes: FixOperators,
    mode: ExecutionMode,
    m_cap: usize,
}

impl SegmentRunner {
    pub fn new(x: &OracleInstance, mode: ExecutionMode, m_cap: usize) -> Result<Self> {
        Ok(Self {
            x: x.clone(),
            fixes: FixOperators::new(x)?,
            mode,
            m_cap,
        })
    }

    pub fn mode(&self) -> ExecutionMode {
        self.mode
    }

    pub fn oracle(&self) -> &OracleInstance {
        &self.x
    }

    pub fn fixes(&self) -> &FixOperators {
        &self.fixes
    }

    /// Runs the plan, drawing one uniform variate per measured control qubit.
    pub fn run<R: Rng + ?Sized>(
        &self,
        psi: &StateVector,
        plan: &SegmentPlan,
        rng: &mut R,
        counter: &mut QueryCounter,
    ) -> Result<SegmentRun> {
        self.execute(psi, plan, counter, &mut |_, p_zero| {
            if rng.random::<f64>() < p_zero {
                0
            } else {
                1
            }
        })
    }

    /// Runs the plan with a prescribed outcome string. The returned
    /// probability is that of `outcomes`.
    pub fn run_forced(
        &self,
        psi: &StateVector,
        plan: &SegmentPlan,
        outcomes: &[u8],
        counter: &mut QueryCounter,
    ) -> Result<SegmentRun> {
        if outcomes.len() != plan.m() {
            return Err(Error::InconsistentRecord(format!(
                "{} forced outcomes for {} gadgets",
                outcomes.len(),
                plan.m()
            )));
        }
        self.execute(psi, plan, counter, &mut |i, _| outcomes[i])
    }

    fn execute(
        &self,
        psi: &StateVector,
        plan: &SegmentPlan,
        counter: &mut QueryCounter,
        choose: &mut dyn FnMut(usize, f64) -> u8,
    ) -> Result<SegmentRun> {
        if psi.len() != plan.dim() || self.x.dim() != plan.dim() {
            return Err(Error::DimensionMismatch {
                expected: plan.dim(),
                found: if psi.len() != plan.dim() { psi.len() } else { self.x.dim() },
            });
        }
        match self.mode {
            ExecutionMode::ExactSequential => self.execute_sequential(psi, plan, counter, choose),
            ExecutionMode::Truncated => {
                if plan.m() > self.m_cap {
                    return Err(Error::SegmentCapExceeded { m: plan.m(), cap: self.m_cap });
                }
                self.execute_truncated(psi, plan, counter, choose)
            }
        }
    }

    fn execute_sequential(
        &self,
        psi: &StateVector,
        plan: &SegmentPlan,
        counter: &mut QueryCounter,
        choose: &mut dyn FnMut(usize, f64) -> u8,
    ) -> Result<SegmentRun> {
        let r2 = r2_matrix(plan.theta())?;
        let start = counter.count();
        let dim = psi.len();
        let mut state = psi.clone();
        let mut outcomes = Vec::with_capacity(plan.m());
        let mut probability = 1.0;
        let mut fix_applications = 0;
        for step in plan.steps() {
            match step {
                Step::Drive(v) => state = v.apply_unchecked(&state),
                Step::Fix { angle } => {
                    counter.charge(2);
                    fix_applications += 1;
                    state = self.fixes.get(*angle).apply_unchecked(&state);
                }
                Step::Gadget => {
                    let joint = gadget_pre_measurement_with(&state, &self.x, plan.theta(), plan.direction(), &r2, counter)?;
                    let amps = joint.amplitudes();
                    let branches = [
                        StateVector::from_amplitudes(amps[..dim].to_vec())?,
                        StateVector::from_amplitudes(amps[dim..].to_vec())?,
                    ];
                    let weights = [branches[0].norm_sqr(), branches[1].norm_sqr()];
                    let total = weights[0] + weights[1];
                    let bit = choose(outcomes.len(), weights[0] / total);
                    probability *= weights[bit as usize] / total;
                    state = branches[bit as usize].normalized()?;
                    outcomes.push(bit);
                }
            }
        }
        Ok(SegmentRun {
            outcomes,
            state,
            queries: counter.count() - start,
            fix_applications,
            probability,
        })
    }

    fn execute_truncated(
        &self,
        psi: &StateVector,
        plan: &SegmentPlan,
        counter: &mut QueryCounter,
        choose: &mut dyn FnMut(usize, f64) -> u8,
    ) -> Result<SegmentRun> {
        let queries = truncated_query_count(plan);
        counter.charge(queries);
        let (pre, drives) = plan.blocks(&self.fixes);
        let m = plan.m();
        let start = pre.apply_unchecked(psi);
        if m == 0 {
            return Ok(SegmentRun {
                outcomes: Vec::new(),
                state: start.normalized()?,
                queries,
                fix_applications: plan.fix_count(),
                probability: 1.0,
            });
        }

        let theta = plan.theta();
        let k = plan.k_effective();
        let (a0, a1) = control_amplitudes(theta, plan.direction());
        let (ra, rb) = amplitudes(theta);
        let r2 = [[ra, rb], [rb, -ra]];
        let b = weight_probability(theta);
        let ball_mass = overlap_bound(m, theta, k);
        let minus_one = Complex64::new(-1.0, 0.0);

        let dim = psi.len();
        let mut phi: Vec<StateVector> = (0..=k).map(|_| StateVector::zeros(dim)).collect();
        phi[0] = start.scaled(Complex64::new(1.0 / ball_mass.sqrt(), 0.0));
        let mut outcomes = Vec::with_capacity(m);
        let mut probability = 1.0;

        for (i, v) in drives.iter().enumerate() {
            let live = (i + 1).min(k + 1);
            let queried: Vec<StateVector> = phi[..live].iter().map(|s| self.x.apply_diagonal(s, minus_one)).collect();
            let remaining = m - i - 1;
            let future: Vec<f64> = (0..=k.min(remaining))
                .map(|d| binomial(remaining, d) * (1.0 - b).powi((remaining - d) as i32) * b.powi(d as i32))
                .collect();

            let mut candidates: [Vec<StateVector>; 2] = [Vec::new(), Vec::new()];
            let mut marginals = [0.0; 2];
            for y in 0..2 {
                let cands: Vec<StateVector> = (0..=k.min(i + 1))
                    .map(|w| {
                        let mut s = StateVector::zeros(dim);
                        if w < live {
                            s.add_scaled(a0 * r2[y][0], &phi[w]);
                        }
                        if w >= 1 && w - 1 < live {
                            s.add_scaled(a1 * r2[y][1], &queried[w - 1]);
                        }
                        v.apply_unchecked(&s)
                    })
                    .collect();
                // running prefix sums Σ_{w ≤ j} cand[w]
                let mut prefix = StateVector::zeros(dim);
                let mut prefix_norms = Vec::with_capacity(k + 1);
                for w in 0..=k {
                    if let Some(c) = cands.get(w) {
                        prefix.add_scaled(Complex64::new(1.0, 0.0), c);
                    }
                    prefix_norms.push(prefix.norm_sqr());
                }
                marginals[y] = future
                    .iter()
                    .enumerate()
                    .map(|(d, f)| f * prefix_norms[k - d])
                    .sum();
                candidates[y] = cands;
            }
            let total = marginals[0] + marginals[1];
            if !(total > 0.0) {
                return Err(Error::ZeroNorm);
            }
            let bit = choose(i, marginals[0] / total);
            probability *= marginals[bit as usize] / total;
            outcomes.push(bit);
            let mut next = std::mem::take(&mut candidates[bit as usize]);
            next.resize_with(k + 1, || StateVector::zeros(dim));
            phi = next;
        }

        let mut state = StateVector::zeros(dim);
        for s in &phi {
            state.add_scaled(Complex64::new(1.0, 0.0), s);
        }
        Ok(SegmentRun {
            outcomes,
            state: state.normalized()?,
            queries,
            fix_applications: plan.fix_count(),
            probability,
        })
    }
}

/// Convenience wrapper around [`SegmentRunner::run`] for a single segment.
pub fn run_segment<R: Rng + ?Sized>(
    psi: &StateVector,
    x: &OracleInstance,
    plan: &SegmentPlan,
    mode: ExecutionMode,
    rng: &mut R,
    counter: &mut QueryCounter,
) -> Result<SegmentRun> {
    SegmentRunner::new(x, mode, DEFAULT_M_CAP)?.run(psi, plan, rng, counter)
}

/// Joint control/system state after the truncated circuit, stored on the
/// Hamming ball: one system vector `χ′_z · T_z |ψ⟩` per control mask `z` with
/// `Δ(z) ≤ k`, where `T_z` is the truncated circuit's block.
#[derive(Clone, Debug)]
pub struct JointSegmentState {
    m: usize,
    entries: Vec<(usize, StateVector)>,
}

impl JointSegmentState {
    /// Prepares `|χ′⟩ ⊗ |ψ⟩` and applies the truncated circuit block by block.
    /// Charges the truncated circuit's query count.
    pub fn prepare(
        psi: &StateVector,
        x: &OracleInstance,
        plan: &SegmentPlan,
        counter: &mut QueryCounter,
    ) -> Result<Self> {
        let m = plan.m();
        let fixes = FixOperators::new(x)?;
        let (pre, drives) = plan.blocks(&fixes);
        let q = full_query(x);
        let k = plan.k_effective();
        let chi = chi_restricted(m, plan.theta(), plan.direction(), k)?;
        counter.charge(truncated_query_count(plan));
        let entries = chi
            .entries()
            .iter()
            .map(|(z, amp)| {
                let block = truncated_block(&pre, &drives, &q, *z, k);
                (*z, block.apply_unchecked(psi).scaled(*amp))
            })
            .collect();
        Ok(Self { m, entries })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of stored control masks.
    pub fn support(&self) -> usize {
        self.entries.len()
    }

    /// Unnormalized system state for measured string `y` after `R₂^{⊗m}`;
    /// its squared norm is the probability of `y`.
    pub fn outcome_branch(&self, y: usize, r2: &Operator) -> StateVector {
        let dim = self.entries[0].1.len();
        let mut out = StateVector::zeros(dim);
        for (z, vec) in &self.entries {
            let coeff = (0..self.m).fold(Complex64::new(1.0, 0.0), |acc, i| {
                acc * r2.entry(y >> i & 1, z >> i & 1)
            });
            out.add_scaled(coeff, vec);
        }
        out
    }
}
