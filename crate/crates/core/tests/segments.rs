use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cqdsim::gadget::{success_probability, Direction};
use cqdsim::numerics::random::{random_state, random_unitary};
use cqdsim::numerics::Operator;
use cqdsim::oracle::{OracleInstance, QueryCounter};
use cqdsim::recovery::{undo_plan, ErrorRecord};
use cqdsim::segment::{choose_m, realized_unitary, ExecutionMode, SegmentPlan, SegmentRunner, DEFAULT_M_CAP};

fn binomial_pmf(m: usize, q: f64, j: usize) -> f64 {
    let c = (0..j).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64);
    c * q.powi(j as i32) * (1.0 - q).powi((m - j) as i32)
}

fn forward_plan(m: usize, k: usize, theta: f64, rng: &mut ChaCha8Rng) -> SegmentPlan {
    SegmentPlan::forward(theta, (0..m).map(|_| random_unitary(4, rng)).collect(), k).unwrap()
}

#[test]
fn exact_mode_error_counts_are_binomial() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let theta = 1.0 / 32.0;
    let m = choose_m(theta).unwrap();
    assert_eq!(m, 8);
    let x = OracleInstance::random(2, &mut rng);
    let plan = forward_plan(m, m, theta, &mut rng);
    let runner = SegmentRunner::new(&x, ExecutionMode::ExactSequential, DEFAULT_M_CAP).unwrap();
    let psi = random_state(2, &mut rng);
    let runs = 20_000;
    let mut histogram = vec![0usize; m + 1];
    for _ in 0..runs {
        let run = runner.run(&psi, &plan, &mut rng, &mut QueryCounter::new()).unwrap();
        histogram[run.error_positions().len()] += 1;
    }
    let q = 1.0 - success_probability(theta);
    for (j, &count) in histogram.iter().enumerate() {
        let p = binomial_pmf(m, q, j);
        let expected = runs as f64 * p;
        let sigma = (runs as f64 * p * (1.0 - p)).sqrt();
        assert!((count as f64 - expected).abs() <= 4.0 * sigma + 1.0, "j = {j}: {count} vs {expected:.1}");
    }
    let mean = histogram.iter().enumerate().map(|(j, c)| j * c).sum::<usize>() as f64 / runs as f64;
    assert!(m as f64 * q <= m as f64 * theta);
    assert!(mean <= 0.25 + 3.0 * (m as f64 * q * (1.0 - q) / runs as f64).sqrt());
}

#[test]
fn segment_success_probability_is_at_least_three_quarters() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for theta in [0.25, 0.1, 1.0 / 12.0, 0.03, 0.004] {
        let m = choose_m(theta).unwrap();
        let analytic = success_probability(theta).powi(m as i32);
        assert!(analytic >= 0.75, "theta {theta}: {analytic}");
        let x = OracleInstance::random(2, &mut rng);
        let plan = forward_plan(m.min(12), m, theta, &mut rng);
        let runner = SegmentRunner::new(&x, ExecutionMode::ExactSequential, DEFAULT_M_CAP).unwrap();
        let psi = random_state(2, &mut rng);
        let forced = runner.run_forced(&psi, &plan, &vec![0; plan.m()], &mut QueryCounter::new()).unwrap();
        assert!((forced.probability - success_probability(theta).powi(plan.m() as i32)).abs() < 1e-12);
    }

    let theta = 0.1;
    let x = OracleInstance::random(2, &mut rng);
    let plan = forward_plan(choose_m(theta).unwrap(), 2, theta, &mut rng);
    let runner = SegmentRunner::new(&x, ExecutionMode::ExactSequential, DEFAULT_M_CAP).unwrap();
    let psi = random_state(2, &mut rng);
    let trials = 4000;
    let successes = (0..trials)
        .filter(|_| runner.run(&psi, &plan, &mut rng, &mut QueryCounter::new()).unwrap().succeeded())
        .count();
    let rate = successes as f64 / trials as f64;
    assert!(rate >= 0.75 - 3.0 * (0.75 * 0.25 / trials as f64).sqrt(), "{rate}");
}

#[test]
fn shorter_final_segment_uses_its_own_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let prog = cqdsim::discretize::FractionalProgram::from_drives(
        0.1,
        (0..7).map(|_| random_unitary(4, &mut rng)).collect(),
    )
    .unwrap();
    let plans = cqdsim::recovery::segment_plans(&prog, choose_m(0.1).unwrap(), 2).unwrap();
    let lengths: Vec<usize> = plans.iter().map(SegmentPlan::m).collect();
    assert_eq!(lengths, vec![2, 2, 2, 1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn undo_plan_inverts_any_error_pattern(seed in any::<u64>(), m in 1usize..6, mask in any::<u8>(), reverse in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = OracleInstance::random(2, &mut rng);
        let mut plan = forward_plan(m, m, 0.05, &mut rng);
        if reverse {
            plan = SegmentPlan::from_steps(0.05, Direction::Reverse, m, plan.steps().to_vec()).unwrap();
        }
        let bits: Vec<u8> = (0..m).map(|i| mask >> i & 1).collect();
        let undo = undo_plan(&plan, &ErrorRecord::from_outcomes(&plan, &bits)).unwrap();
        prop_assert_eq!(undo.direction(), plan.direction().flipped());
        prop_assert_eq!(undo.m() + bits.iter().filter(|&&b| b == 1).count(), m);
        let failed = realized_unitary(&plan, &x, &bits).unwrap();
        let undone = realized_unitary(&undo, &x, &vec![0; undo.m()]).unwrap();
        prop_assert!((&undone * &failed).distance_up_to_phase(&Operator::identity(4)) < 1e-10);
    }

    #[test]
    fn truncated_outcome_distribution_is_normalized(seed in any::<u64>(), m in 1usize..6, k in 0usize..6, theta in 0.01f64..0.25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = OracleInstance::random(2, &mut rng);
        let plan = forward_plan(m, k, theta, &mut rng);
        let psi = random_state(2, &mut rng);
        let runner = SegmentRunner::new(&x, ExecutionMode::Truncated, DEFAULT_M_CAP).unwrap();
        let mut total = 0.0;
        for y in 0..1usize << m {
            let bits: Vec<u8> = (0..m).map(|i| (y >> i & 1) as u8).collect();
            let run = runner.run_forced(&psi, &plan, &bits, &mut QueryCounter::new()).unwrap();
            prop_assert!(run.probability >= 0.0);
            if run.probability > 1e-14 {
                prop_assert!((run.state.norm() - 1.0).abs() < 1e-12);
            }
            prop_assert_eq!(run.queries, (plan.k_effective() + 1) as u64);
            total += run.probability;
        }
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
