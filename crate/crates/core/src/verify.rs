//! Self-verification suite behind `cqdsim verify`.
//!
//! Each check reports a measured value next to the bound it must respect.
//! `Fast` uses small random samples; `Full` adds the brute-force circuit
//! equivalences for every `m ≤ 6` and larger Monte Carlo runs.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::continuous::{average_norm, reference_evolve, ContinuousAlgorithm, DrivingSchedule, Piece};
use crate::discretize::{build_program, choose_p, run_ideal, trotter_bound, trotter_defect, FractionalProgram};
use crate::error::Result;
use crate::gadget::{
    gadget_pre_measurement_with, gadget_v, r1_conjugate_matrix, r1_matrix, r2_matrix, success_probability,
    exact_fractional_circuit, Direction,
};
use crate::numerics::random::{random_hermitian_with_norm, random_state, random_unitary};
use crate::numerics::{fidelity, Operator, StateVector};
use crate::oracle::{fractional_query, OracleInstance, QueryCounter};
use crate::recovery::{estimate_walk_stats, run_with_recovery, trial_rng, undo_plan, ErrorRecord, RecoveryOptions};
use crate::segment::circuit::{build_naive, build_rearranged, build_truncated, DENSE_QUBIT_CAP};
use crate::segment::{
    chi_restricted, chi_state, choose_k, overlap_bound, realized_unitary, truncate_chi, ExecutionMode,
    JointSegmentState, SegmentPlan, SegmentRunner, DEFAULT_M_CAP,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Fast,
    Full,
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            other => Err(format!("unknown level `{other}` (expected fast or full)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub level: Level,
    pub seed: u64,
    /// Fault injection: added to `R₂[0][0]` wherever the suite uses `R₂`.
    pub r2_perturbation: f64,
}

impl VerifyOptions {
    pub fn new(level: Level) -> Self {
        Self { level, seed: 2024, r2_perturbation: 0.0 }
    }
}

/// How a measured value is compared with its bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub comparison: Comparison,
}

impl Check {
    fn at_most(name: &str, measured: f64, bound: f64) -> Self {
        Self { name: name.into(), measured, bound, comparison: Comparison::AtMost }
    }

    fn at_least(name: &str, measured: f64, bound: f64) -> Self {
        Self { name: name.into(), measured, bound, comparison: Comparison::AtLeast }
    }

    pub fn passed(&self) -> bool {
        match self.comparison {
            Comparison::AtMost => self.measured <= self.bound,
            Comparison::AtLeast => self.measured >= self.bound,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.comparison {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
        };
        write!(
            f,
            "{} {:<48} measured {:.6e} {op} bound {:.6e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.bound
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed()).collect()
    }
}

pub fn verify(level: Level) -> Result<VerifyReport> {
    verify_with(&VerifyOptions::new(level))
}

pub fn verify_with(options: &VerifyOptions) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let full = options.level == Level::Full;
    let mut checks = Vec::new();
    checks.extend(gadget_checks(options, &mut rng)?);
    checks.push(exact_circuit_check(&mut rng)?);
    checks.push(trotter_check(&mut rng, if full { 20 } else { 5 })?);
    checks.extend(circuit_checks(&mut rng, if full { 6 } else { 4 })?);
    checks.extend(truncation_checks(options, &mut rng)?);
    checks.push(undo_check(&mut rng)?);
    checks.push(lossless_check(&mut rng, if full { 50 } else { 10 })?);
    checks.extend(walk_checks(options, if full { 5000 } else { 600 })?);
    Ok(VerifyReport { checks })
}

fn perturbed_r2(theta: f64, delta: f64) -> Result<Operator> {
    let r2 = r2_matrix(theta)?;
    if delta == 0.0 {
        return Ok(r2);
    }
    let mut entries: Vec<Complex64> = (0..4).map(|i| r2.entry(i / 2, i % 2)).collect();
    entries[0] += delta;
    Operator::from_row_major(2, &entries)
}

fn gadget_checks<R: Rng>(options: &VerifyOptions, rng: &mut R) -> Result<Vec<Check>> {
    let (mut unitarity, mut closed_form, mut prob_err, mut margin) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..50 {
        let n = rng.random_range(1..=3);
        let theta = rng.random_range(1e-4..=PI);
        let x = OracleInstance::random(n, rng);
        let psi = random_state(n, rng);
        let r2 = perturbed_r2(theta, options.r2_perturbation)?;
        for op in [r1_matrix(theta)?, r1_conjugate_matrix(theta)?, r2.clone()] {
            unitarity = unitarity.max(op.unitarity_defect());
        }
        let ps = success_probability(theta);
        prob_err = prob_err.max((ps - 1.0 / gadget_v(theta).powi(2)).abs());
        margin = margin.min(ps - (1.0 - theta));
        for direction in [Direction::Forward, Direction::Reverse] {
            let joint = gadget_pre_measurement_with(&psi, &x, theta, direction, &r2, &mut QueryCounter::new())?;
            let s = direction.sign();
            let fail_amp = (1.0 - ps).sqrt();
            let success = fractional_query(&x, s * theta)?
                .apply(&psi)?
                .scaled(Complex64::from_polar(1.0 / gadget_v(theta), s * theta / 2.0));
            let failure = fractional_query(&x, direction.error_angle())?
                .apply(&psi)?
                .scaled(Complex64::from_polar(fail_amp, -s * PI / 4.0));
            let expected = StateVector::basis(1, 0)
                .tensor(&success)
                .amplitudes()
                .iter()
                .zip(StateVector::basis(1, 1).tensor(&failure).amplitudes())
                .map(|(a, b)| a + b)
                .collect();
            closed_form = closed_form.max(joint.max_abs_diff(&StateVector::from_amplitudes(expected)?));
        }
    }
    Ok(vec![
        Check::at_most("gadget.r1_r2_unitarity", unitarity, 1e-12),
        Check::at_most("gadget.joint_state_closed_form", closed_form, 1e-12),
        Check::at_most("gadget.success_probability_1_over_v2", prob_err, 1e-12),
        Check::at_least("gadget.success_probability_margin", margin, 0.0),
    ])
}

fn exact_circuit_check<R: Rng>(rng: &mut R) -> Result<Check> {
    let mut worst = 0.0f64;
    for i in 0..50 {
        let n = rng.random_range(1..=3);
        let x = OracleInstance::random(n, rng);
        let theta = match i {
            0 => PI / 2.0,
            1 => -PI / 2.0,
            _ => rng.random_range(-PI + 1e-9..=PI),
        };
        let circuit = exact_fractional_circuit(&x, theta, &mut QueryCounter::new())?;
        worst = worst.max(circuit.distance_up_to_phase(&fractional_query(&x, theta)?));
    }
    Ok(Check::at_most("exact_circuit.equals_fractional_query", worst, 1e-12))
}

fn random_algorithm<R: Rng>(n: usize, total_time: f64, norm: f64, rng: &mut R) -> Result<ContinuousAlgorithm> {
    let pieces = (0..3)
        .map(|_| Piece {
            duration: total_time / 3.0,
            generator: random_hermitian_with_norm(1 << n, norm, rng),
        })
        .collect();
    ContinuousAlgorithm::new(DrivingSchedule::new(pieces)?, random_state(n, rng))
}

fn trotter_check<R: Rng>(rng: &mut R, instances: usize) -> Result<Check> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..instances {
        let total_time = rng.random_range(0.2..=2.0);
        let alg = random_algorithm(2, total_time, rng.random_range(0.1..=2.0), rng)?;
        let x = OracleInstance::random(2, rng);
        let r = average_norm(alg.schedule());
        let p = choose_p(total_time, r, 0.04)?;
        let prog = build_program(&alg, p)?;
        worst = worst.max(trotter_defect(&alg, &prog, &x)? - trotter_bound(total_time, r, p));
    }
    Ok(Check::at_most("trotter.defect_minus_bound", worst, 1e-9))
}

fn random_plan<R: Rng>(m: usize, k: usize, theta: f64, rng: &mut R) -> Result<SegmentPlan> {
    SegmentPlan::forward(theta, (0..m).map(|_| random_unitary(4, rng)).collect(), k)
}

fn circuit_checks<R: Rng>(rng: &mut R, max_m: usize) -> Result<Vec<Check>> {
    let (mut rearranged, mut truncated, mut query_excess) = (0.0f64, 0.0f64, 0.0f64);
    for m in 1..=max_m {
        let x = OracleInstance::random(2, rng);
        let plan = random_plan(m, m, 0.05, rng)?;
        let naive = build_naive(&plan, &x, DENSE_QUBIT_CAP, &mut QueryCounter::new())?;
        let rearr = build_rearranged(&plan, &x, DENSE_QUBIT_CAP, &mut QueryCounter::new())?;
        rearranged = rearranged.max(naive.max_abs_diff(&rearr));
        for k in 0..=m {
            let mut counter = QueryCounter::new();
            let trunc = build_truncated(&plan.with_k(k), &x, DENSE_QUBIT_CAP, &mut counter)?;
            query_excess = query_excess.max((counter.count() as f64 - (k + 1) as f64).abs());
            let sys = x.dim();
            for z in (0..1usize << m).filter(|z| z.count_ones() as usize <= k) {
                for r in 0..sys {
                    for c in 0..sys {
                        let (i, j) = (z * sys + r, z * sys + c);
                        truncated = truncated.max((trunc.entry(i, j) - rearr.entry(i, j)).norm());
                    }
                }
            }
        }
    }
    Ok(vec![
        Check::at_most("circuit.rearranged_equals_naive", rearranged, 1e-9),
        Check::at_most("circuit.truncated_equals_rearranged_on_ball", truncated, 1e-9),
        Check::at_most("circuit.truncated_query_count_minus_k_plus_1", query_excess, 0.0),
    ])
}

fn truncation_checks<R: Rng>(options: &VerifyOptions, rng: &mut R) -> Result<Vec<Check>> {
    let mut overlap = 0.0f64;
    for m in [2, 5, 10, 16] {
        for theta in [0.01, 1.0 / (4.0 * m as f64), 0.2] {
            let chi = chi_state(m, theta, Direction::Forward)?;
            for k in 0..=m {
                let trunc = truncate_chi(&chi, k)?;
                overlap = overlap.max((trunc.overlap(&chi).norm_sqr() - overlap_bound(m, theta, k)).abs());
            }
        }
    }
    let mut minimality = 0.0f64;
    for (m, theta, t) in [(10, 0.025, 1.0), (20, 0.0125, 1.0), (6, 0.04, 2.0)] {
        let target = 0.01 * 0.01 / t;
        let k = choose_k(t, 0.01, 0.01, m, theta)?;
        let scanned = (0..=m).find(|&j| 1.0 - overlap_bound(m, theta, j) <= target).unwrap_or(m);
        minimality = minimality.max((k as f64 - scanned as f64).abs());
    }
    // streaming sampler against the literal Hamming-ball state
    let mut sampler = 0.0f64;
    for (m, k) in [(4, 1), (5, 2)] {
        let x = OracleInstance::random(2, rng);
        let plan = random_plan(m, k, 0.1, rng)?;
        let psi = random_state(2, rng);
        let joint = JointSegmentState::prepare(&psi, &x, &plan, &mut QueryCounter::new())?;
        let r2 = perturbed_r2(0.1, options.r2_perturbation)?;
        let runner = SegmentRunner::new(&x, ExecutionMode::Truncated, DEFAULT_M_CAP)?;
        for y in 0..1usize << m {
            let bits: Vec<u8> = (0..m).map(|i| (y >> i & 1) as u8).collect();
            let run = runner.run_forced(&psi, &plan, &bits, &mut QueryCounter::new())?;
            sampler = sampler.max((run.probability - joint.outcome_branch(y, &r2).norm_sqr()).abs());
        }
        let direct = chi_restricted(m, 0.1, Direction::Forward, k)?;
        sampler = sampler.max((direct.norm_sqr() - 1.0).abs());
    }
    Ok(vec![
        Check::at_most("chi.overlap_equals_binomial_formula", overlap, 1e-12),
        Check::at_most("chi.choose_k_minimal", minimality, 0.0),
        Check::at_most("segment.truncated_sampler_matches_joint", sampler, 1e-12),
    ])
}

fn undo_check<R: Rng>(rng: &mut R) -> Result<Check> {
    let mut worst = 0.0f64;
    for errors in [vec![], vec![1], vec![0, 3], vec![0, 1, 2, 3]] {
        let x = OracleInstance::random(2, rng);
        let plan = random_plan(4, 4, 0.06, rng)?;
        let bits: Vec<u8> = (0..4).map(|i| errors.contains(&i) as u8).collect();
        let undo = undo_plan(&plan, &ErrorRecord::from_outcomes(&plan, &bits))?;
        let failed = realized_unitary(&plan, &x, &bits)?;
        let undone = realized_unitary(&undo, &x, &vec![0; undo.m()])?;
        worst = worst.max((&undone * &failed).distance_up_to_phase(&Operator::identity(4)));
    }
    Ok(Check::at_most("recovery.undo_inverts_failed_segment", worst, 1e-10))
}

fn random_program<R: Rng>(p: usize, theta: f64, rng: &mut R) -> Result<FractionalProgram> {
    FractionalProgram::from_drives(theta, (0..p).map(|_| random_unitary(4, rng)).collect())
}

fn lossless_check<R: Rng>(rng: &mut R, instances: usize) -> Result<Check> {
    let mut worst = 0.0f64;
    for i in 0..instances {
        let x = OracleInstance::random(2, rng);
        let prog = random_program(10, 0.1, rng)?;
        let psi = random_state(2, rng);
        let (out, stats) = run_with_recovery(
            &psi,
            &x,
            &prog,
            &RecoveryOptions::exact(0.1),
            &mut trial_rng(7, i as u64),
            &mut QueryCounter::new(),
        )?;
        if stats.succeeded {
            worst = worst.max(1.0 - fidelity(&out, &run_ideal(&prog, &x, &psi)?)?);
        }
    }
    Ok(Check::at_most("recovery.exact_mode_infidelity", worst, 1e-9))
}

fn walk_checks(options: &VerifyOptions, trials: usize) -> Result<Vec<Check>> {
    // T = 1, r = 1, ε₁ = 0.04 gives p = 10, θ = 0.1, m = 2
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0x5eed);
    let generator = random_hermitian_with_norm(4, 1.0, &mut rng);
    let alg = ContinuousAlgorithm::new(DrivingSchedule::constant(generator, 1.0)?, StateVector::zero_state(2))?;
    let x = OracleInstance::random(2, &mut rng);
    let p = choose_p(1.0, average_norm(alg.schedule()), 0.04)?;
    let prog = build_program(&alg, p)?;
    let eps2 = 0.1;
    let summary = estimate_walk_stats(alg.initial_state(), &x, &prog, &RecoveryOptions::exact(eps2), trials, options.seed)?;
    let reference = reference_evolve(&alg, &x)?;
    let ideal = run_ideal(&prog, &x, alg.initial_state())?;
    Ok(vec![
        Check::at_most(
            "walk.computations_per_segment",
            summary.mean_computations_per_segment,
            2.0 + 3.0 * summary.computations_stderr,
        ),
        Check::at_most("walk.fixes_per_segment", summary.mean_fixes_per_segment, 1.0 + 3.0 * summary.fixes_stderr),
        Check::at_least(
            "walk.computation_success_rate",
            summary.computation_success_rate,
            0.75 - 3.0 * summary.success_rate_stderr,
        ),
        Check::at_most("walk.budget_failure_rate", summary.budget_failure_rate, eps2 + 3.0 * summary.budget_failure_stderr),
        Check::at_least("trotter.ideal_fidelity", fidelity(&ideal, &reference)?, (1.0f64 - 0.04).sqrt()),
    ])
}
