//! Segment circuits as operators on `m` control qubits plus the system.
//!
//! Every circuit here is block diagonal in the control computational basis,
//! so each is assembled from per-`z` system blocks. Control qubit `i` sits at
//! joint qubit `n + i`, above the system register.
//!
//! * naive: `V_{m−1} Q^{z_{m−1}} ⋯ V_0 Q^{z_0}` (one controlled query per
//!   gadget).
//! * rearranged: `V̄_0, Q, V̄_1, Q, …, Q, V̄_m`, then a final `Q` applied when
//!   `Δ(z) + m` is odd.
//! * truncated: only the first `k` fixed queries are kept; the final query
//!   fires when `Δ(z) + k` is odd.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::numerics::Operator;
use crate::oracle::{full_query, OracleInstance, QueryCounter};

use super::plan::{FixOperators, SegmentPlan};

/// Largest `m + n` for which dense segment operators are assembled.
pub const DENSE_QUBIT_CAP: usize = 10;

/// Index range of the drives `V̄_h` applies for control basis state `z`.
///
/// With `i_h` the position of the `h`-th one in `z`: `V̄_0` covers
/// `[0, i_1)` (all of `[0, m)` for `z = 0`), and `V̄_h` covers
/// `[i_h, i_{h+1})`, `[i_h, m)` when `i_{h+1}` is undefined, or nothing when
/// `i_h` is undefined.
pub fn vbar_targets(h: usize, z: usize, m: usize) -> Range<usize> {
    let ones: Vec<usize> = (0..m).filter(|i| z >> i & 1 == 1).collect();
    if h == 0 {
        return 0..ones.first().copied().unwrap_or(m);
    }
    match (ones.get(h - 1), ones.get(h)) {
        (None, _) => 0..0,
        (Some(&start), Some(&end)) => start..end,
        (Some(&start), None) => start..m,
    }
}

fn apply_range(acc: Operator, drives: &[Operator], range: Range<usize>) -> Operator {
    drives[range].iter().fold(acc, |u, v| v * &u)
}

/// Naive per-`z` block: `V_{m−1} Q^{z_{m−1}} ⋯ V_0 Q^{z_0} B_0`.
pub fn naive_block(pre: &Operator, drives: &[Operator], q: &Operator, z: usize) -> Operator {
    drives.iter().enumerate().fold(pre.clone(), |u, (i, v)| {
        if z >> i & 1 == 1 {
            &(v * q) * &u
        } else {
            v * &u
        }
    })
}

/// Rearranged per-`z` block with `m` fixed queries and the parity-controlled
/// final query.
pub fn rearranged_block(pre: &Operator, drives: &[Operator], q: &Operator, z: usize) -> Operator {
    let m = drives.len();
    weight_controlled_block(pre, drives, q, z, m)
}

/// Truncated per-`z` block: `V̄_0, Q, …, Q, V̄_k` with `k` fixed queries,
/// then `V̄_{k+1}, …, V̄_m` with no queries between them, then the final
/// query controlled on `Δ(z) + k` being odd. Agrees with the rearranged block
/// whenever `Δ(z) ≤ k`.
pub fn truncated_block(pre: &Operator, drives: &[Operator], q: &Operator, z: usize, k: usize) -> Operator {
    weight_controlled_block(pre, drives, q, z, k.min(drives.len()))
}

fn weight_controlled_block(pre: &Operator, drives: &[Operator], q: &Operator, z: usize, fixed_queries: usize) -> Operator {
    let m = drives.len();
    let mut u = pre.clone();
    for h in 0..=m {
        u = apply_range(u, drives, vbar_targets(h, z, m));
        if h < fixed_queries {
            u = q * &u;
        }
    }
    let weight = (z & ((1usize << m) - 1)).count_ones() as usize;
    if (weight + fixed_queries) % 2 == 1 {
        u = q * &u;
    }
    u
}

fn assemble(m: usize, n: usize, mut block: impl FnMut(usize) -> Operator) -> Operator {
    let sys = 1usize << n;
    let dim = sys << m;
    let mut entries = vec![num_complex::Complex64::new(0.0, 0.0); dim * dim];
    for z in 0..1usize << m {
        let b = block(z);
        let off = z * sys;
        for r in 0..sys {
            for c in 0..sys {
                entries[(off + r) * dim + off + c] = b.entry(r, c);
            }
        }
    }
    Operator::from_row_major(dim, &entries).expect("block sizes are powers of two")
}

fn check_cap(plan: &SegmentPlan, x: &OracleInstance, cap: usize) -> Result<()> {
    if x.dim() != plan.dim() {
        return Err(Error::DimensionMismatch { expected: plan.dim(), found: x.dim() });
    }
    let total = plan.m() + x.n_qubits();
    if total > cap {
        return Err(Error::SegmentCapExceeded { m: plan.m(), cap: cap.saturating_sub(x.n_qubits()) });
    }
    Ok(())
}

/// Number of full queries in a fix occurrence set: a fix after gadget `g`
/// lives in `V̄_h` for `h = 0..=min(g, k)`; a fix before the first gadget is
/// applied once.
pub(crate) fn truncated_fix_occurrences(gadgets_before: usize, k: usize) -> u64 {
    if gadgets_before == 0 {
        1
    } else {
        (gadgets_before.min(k) + 1) as u64
    }
}

fn fix_queries(plan: &SegmentPlan, k: usize) -> u64 {
    plan.fix_positions()
        .into_iter()
        .map(|g| 2 * truncated_fix_occurrences(g, k))
        .sum()
}

/// Dense naive circuit `U` (controls as given, one controlled query per
/// gadget). Charges `m` queries plus two per fix.
pub fn build_naive(plan: &SegmentPlan, x: &OracleInstance, cap: usize, counter: &mut QueryCounter) -> Result<Operator> {
    check_cap(plan, x, cap)?;
    let fixes = FixOperators::new(x)?;
    let (pre, drives) = plan.blocks(&fixes);
    let q = full_query(x);
    counter.charge(plan.m() as u64 + 2 * plan.fix_count() as u64);
    Ok(assemble(plan.m(), x.n_qubits(), |z| naive_block(&pre, &drives, &q, z)))
}

/// Dense rearranged circuit with weight-controlled drives and `m + 1` fixed
/// queries.
pub fn build_rearranged(plan: &SegmentPlan, x: &OracleInstance, cap: usize, counter: &mut QueryCounter) -> Result<Operator> {
    check_cap(plan, x, cap)?;
    let fixes = FixOperators::new(x)?;
    let (pre, drives) = plan.blocks(&fixes);
    let q = full_query(x);
    let m = plan.m();
    counter.charge(m as u64 + 1 + fix_queries(plan, m));
    Ok(assemble(m, x.n_qubits(), |z| rearranged_block(&pre, &drives, &q, z)))
}

/// Dense truncated circuit with `k + 1` full queries, valid on control
/// states of Hamming weight `≤ k`.
pub fn build_truncated(plan: &SegmentPlan, x: &OracleInstance, cap: usize, counter: &mut QueryCounter) -> Result<Operator> {
    check_cap(plan, x, cap)?;
    let fixes = FixOperators::new(x)?;
    let (pre, drives) = plan.blocks(&fixes);
    let q = full_query(x);
    let k = plan.k_effective();
    counter.charge(truncated_query_count(plan));
    Ok(assemble(plan.m(), x.n_qubits(), |z| truncated_block(&pre, &drives, &q, z, k)))
}

/// Full queries used by one truncated execution of `plan`: `k + 1` for the
/// fixed and parity-controlled queries (none when the plan has no gadgets),
/// plus two per occurrence of each absorbed fix.
pub fn truncated_query_count(plan: &SegmentPlan) -> u64 {
    let k = plan.k_effective();
    let base = if plan.m() == 0 { 0 } else { k as u64 + 1 };
    base + fix_queries(plan, k)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::numerics::random::random_unitary;

    fn random_plan(m: usize, k: usize, rng: &mut ChaCha8Rng) -> SegmentPlan {
        let drives = (0..m).map(|_| random_unitary(4, rng)).collect();
        SegmentPlan::forward(0.05, drives, k).unwrap()
    }

    #[test]
    fn vbar_rules() {
        assert_eq!(vbar_targets(0, 0, 4), 0..4);
        // z = 010 over m = 3 (position 1 holds the only one)
        assert_eq!(vbar_targets(0, 0b010, 3), 0..1);
        assert_eq!(vbar_targets(1, 0b010, 3), 1..3);
        assert!(vbar_targets(2, 0b010, 3).is_empty());
        assert!(vbar_targets(3, 0b010, 3).is_empty());
        // i_1 = 0
        assert!(vbar_targets(0, 0b1, 2).is_empty());
    }

    #[test]
    fn single_gadget_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = OracleInstance::random(2, &mut rng);
        let plan = random_plan(1, 1, &mut rng);
        let mut c = QueryCounter::new();
        let naive = build_naive(&plan, &x, DENSE_QUBIT_CAP, &mut c).unwrap();
        let re = build_rearranged(&plan, &x, DENSE_QUBIT_CAP, &mut c).unwrap();
        assert!(naive.max_abs_diff(&re) < 1e-12);
    }

    #[test]
    fn identity_drives_reduce_to_parity_queries() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = OracleInstance::random(2, &mut rng);
        let q = full_query(&x);
        let id = Operator::identity(4);
        for m in 1..=4 {
            let drives = vec![id.clone(); m];
            for z in 0..1usize << m {
                let expected = if z.count_ones() % 2 == 1 { q.clone() } else { id.clone() };
                assert!(rearranged_block(&id, &drives, &q, z).max_abs_diff(&expected) < 1e-14);
                assert!(naive_block(&id, &drives, &q, z).max_abs_diff(&expected) < 1e-14);
            }
        }
    }

    #[test]
    fn rearranged_equals_naive_on_every_control_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in 1..=5 {
            let x = OracleInstance::random(2, &mut rng);
            let plan = random_plan(m, m, &mut rng);
            let mut c = QueryCounter::new();
            let naive = build_naive(&plan, &x, DENSE_QUBIT_CAP, &mut c).unwrap();
            let re = build_rearranged(&plan, &x, DENSE_QUBIT_CAP, &mut c).unwrap();
            assert!(crate::numerics::operator_norm(&(&naive - &re)) <= 1e-9, "m = {m}");
        }
    }

    #[test]
    fn truncated_agrees_on_low_weight_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = OracleInstance::random(2, &mut rng);
        let plan = random_plan(5, 2, &mut rng);
        let fixes = FixOperators::new(&x).unwrap();
        let (pre, drives) = plan.blocks(&fixes);
        let q = full_query(&x);
        let mut checked = 0;
        for z in 0..32usize {
            if z.count_ones() <= 2 {
                let a = truncated_block(&pre, &drives, &q, z, 2);
                let b = rearranged_block(&pre, &drives, &q, z);
                assert!(a.max_abs_diff(&b) < 1e-9);
                checked += 1;
            }
        }
        assert_eq!(checked, 16);
        let mut c = QueryCounter::new();
        build_truncated(&plan, &x, DENSE_QUBIT_CAP, &mut c).unwrap();
        assert_eq!(c.count(), 3);
    }

    #[test]
    fn full_weight_truncation_is_the_rearranged_circuit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = OracleInstance::random(2, &mut rng);
        let plan = random_plan(4, 4, &mut rng);
        let mut c = QueryCounter::new();
        let t = build_truncated(&plan, &x, DENSE_QUBIT_CAP, &mut c).unwrap();
        let r = build_rearranged(&plan, &x, DENSE_QUBIT_CAP, &mut c).unwrap();
        assert!(t.max_abs_diff(&r) < 1e-15);
    }

    #[test]
    fn dense_cap_is_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = OracleInstance::random(2, &mut rng);
        let plan = random_plan(9, 2, &mut rng);
        let err = build_truncated(&plan, &x, DENSE_QUBIT_CAP, &mut QueryCounter::new());
        assert!(matches!(err, Err(Error::SegmentCapExceeded { m: 9, .. })));
    }
}
