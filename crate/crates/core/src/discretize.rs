//! First-order Trotterization of a continuous algorithm into a fractional
//! query program `(V_{p−1} Q_x^θ) ⋯ (V_0 Q_x^θ)`.

use std::f64::consts::PI;

use crate::continuous::{drive_evolve, full_evolve, ContinuousAlgorithm};
use crate::error::{Error, Result};
use crate::numerics::{operator_norm, Operator, StateVector};
use crate::oracle::{fractional_query, OracleInstance};

/// Number of slices `p` for Trotter precision `ε₁`.
///
/// `p = max(⌈2T²r/√ε₁⌉, ⌊T/π⌋ + 1)`; the second term keeps `θ = T/p < π` so
/// every slice is a valid fractional query.
pub fn choose_p(total_time: f64, avg_norm: f64, eps1: f64) -> Result<usize> {
    if !(total_time > 0.0 && total_time.is_finite()) {
        return Err(Error::OutOfRange { name: "T", value: total_time, range: "(0, inf)" });
    }
    if !(avg_norm >= 0.0 && avg_norm.is_finite()) {
        return Err(Error::OutOfRange { name: "r", value: avg_norm, range: "[0, inf)" });
    }
    if !(eps1 > 0.0 && eps1 < 1.0) {
        return Err(Error::OutOfRange { name: "eps1", value: eps1, range: "(0, 1)" });
    }
    let trotter = 2.0 * total_time * total_time * avg_norm / eps1.sqrt();
    Ok(ceil_tolerant(trotter)
        .max((total_time / PI).floor() as usize + 1)
        .max(1))
}

/// `⌈v⌉` that does not round `10.000000000000002` up to 11.
pub(crate) fn ceil_tolerant(v: f64) -> usize {
    (v - 1e-9 * v.abs().max(1.0)).ceil().max(0.0) as usize
}

/// The Trotterized algorithm: `p` fractional queries of angle `θ = T/p`,
/// each followed by the drive slice `V_k = U_D((k+1)θ, kθ)`.
#[derive(Clone, Debug)]
pub struct FractionalProgram {
    theta: f64,
    total_time: f64,
    drives: Vec<Operator>,
}

impl FractionalProgram {
    /// Assembles a program from explicit drive unitaries.
    pub fn from_drives(theta: f64, drives: Vec<Operator>) -> Result<Self> {
        if !(theta > 0.0 && theta < PI) {
            return Err(Error::OutOfRange { name: "theta", value: theta, range: "(0, pi)" });
        }
        let dim = drives
            .first()
            .map(Operator::dim)
            .ok_or_else(|| Error::OutOfRange { name: "p", value: 0.0, range: "[1, inf)" })?;
        if let Some(bad) = drives.iter().find(|d| d.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
        }
        Ok(Self {
            theta,
            total_time: theta * drives.len() as f64,
            drives,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn p(&self) -> usize {
        self.drives.len()
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn drives(&self) -> &[Operator] {
        &self.drives
    }

    pub fn dim(&self) -> usize {
        self.drives[0].dim()
    }

    pub fn n_qubits(&self) -> usize {
        self.drives[0].n_qubits()
    }
}

/// Slices the schedule into `p` drive unitaries of duration `θ = T/p`.
pub fn build_program(alg: &ContinuousAlgorithm, p: usize) -> Result<FractionalProgram> {
    if p == 0 {
        return Err(Error::OutOfRange { name: "p", value: 0.0, range: "[1, inf)" });
    }
    let total = alg.total_time();
    let theta = total / p as f64;
    if theta >= PI {
        return Err(Error::OutOfRange { name: "theta", value: theta, range: "(0, pi)" });
    }
    let drives = (0..p)
        .map(|k| {
            let t_a = k as f64 * theta;
            let t_b = if k + 1 == p { total } else { (k + 1) as f64 * theta };
            drive_evolve(alg.schedule(), t_a, t_b)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut prog = FractionalProgram::from_drives(theta, drives)?;
    prog.total_time = total;
    Ok(prog)
}

/// `|ψ₂⟩ = (V_{p−1} Q_x^θ) ⋯ (V_0 Q_x^θ)|ψ₀⟩`, applied exactly.
pub fn run_ideal(prog: &FractionalProgram, x: &OracleInstance, psi0: &StateVector) -> Result<StateVector> {
    if psi0.len() != prog.dim() {
        return Err(Error::DimensionMismatch { expected: prog.dim(), found: psi0.len() });
    }
    if x.dim() != prog.dim() {
        return Err(Error::DimensionMismatch { expected: prog.dim(), found: x.dim() });
    }
    let mut psi = psi0.clone();
    for v in &prog.drives {
        psi = x.apply_fractional_query(&psi, prog.theta)?;
        psi = v.apply(&psi)?;
    }
    Ok(psi)
}

/// Operator-norm distance between the exact propagator `W_{p−1}⋯W_0` and the
/// Trotter product `(V_{p−1}Q_x^θ)⋯(V_0 Q_x^θ)`. Bounded by `2T²r/p`.
pub fn trotter_defect(alg: &ContinuousAlgorithm, prog: &FractionalProgram, x: &OracleInstance) -> Result<f64> {
    let q = fractional_query(x, prog.theta)?;
    let dim = prog.dim();
    let mut exact = Operator::identity(dim);
    let mut trotter = Operator::identity(dim);
    let p = prog.p();
    for (k, v) in prog.drives.iter().enumerate() {
        let t_a = k as f64 * prog.theta;
        let t_b = if k + 1 == p { prog.total_time } else { (k + 1) as f64 * prog.theta };
        exact = &full_evolve(alg, x, t_a, t_b)? * &exact;
        trotter = &(v * &q) * &trotter;
    }
    Ok(operator_norm(&(&exact - &trotter)))
}

/// The analytic Trotter bound `2T²r/p`.
pub fn trotter_bound(total_time: f64, avg_norm: f64, p: usize) -> f64 {
    2.0 * total_time * total_time * avg_norm / p as f64
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::continuous::{average_norm, reference_evolve, DrivingSchedule, Piece};
    use crate::numerics::random::{random_hermitian, random_hermitian_with_norm, random_state};
    use crate::numerics::{expm_neg_i_hermitian, fidelity};

    fn alg_with(schedule: DrivingSchedule, rng: &mut ChaCha8Rng) -> ContinuousAlgorithm {
        let n = schedule.dim().trailing_zeros() as usize;
        ContinuousAlgorithm::new(schedule, random_state(n, rng)).unwrap()
    }

    #[test]
    fn choose_p_examples() {
        assert_eq!(choose_p(1.0, 1.0, 0.04).unwrap(), 10);
        assert_eq!(choose_p(1.0, 0.0, 0.5).unwrap(), 1);
        assert_eq!(choose_p(2.0, 2.0, 0.01).unwrap(), 160);
        // the θ < π floor
        assert_eq!(choose_p(4.0, 0.0, 0.5).unwrap(), 2);
        assert!(choose_p(1.0, 1.0, 1.0).is_err());
        assert!(choose_p(0.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn zero_drive_program_is_identity_drives() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let alg = alg_with(DrivingSchedule::constant(Operator::zeros(4), 1.0).unwrap(), &mut rng);
        let prog = build_program(&alg, 7).unwrap();
        assert_eq!(prog.p(), 7);
        assert!((prog.theta() * 7.0 - 1.0).abs() < 1e-12);
        for v in prog.drives() {
            assert!(v.max_abs_diff(&Operator::identity(4)) < 1e-15);
        }
    }

    #[test]
    fn constant_drive_slices_are_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = random_hermitian(4, &mut rng);
        let alg = alg_with(DrivingSchedule::constant(d.clone(), 1.5).unwrap(), &mut rng);
        let prog = build_program(&alg, 6).unwrap();
        let expected = expm_neg_i_hermitian(&d, prog.theta()).unwrap();
        for v in prog.drives() {
            assert!(v.max_abs_diff(&expected) < 1e-12);
            assert!(v.is_unitary(1e-10));
        }
    }

    #[test]
    fn off_grid_boundary_gives_two_factor_slice() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = DrivingSchedule::new(vec![
            Piece { duration: 0.33, generator: random_hermitian(4, &mut rng) },
            Piece { duration: 0.67, generator: random_hermitian(4, &mut rng) },
        ])
        .unwrap();
        let alg = alg_with(s.clone(), &mut rng);
        let prog = build_program(&alg, 4).unwrap();
        // slice [0.25, 0.5) straddles the boundary at 0.33
        let straddle = &prog.drives()[1];
        let two_factor = &expm_neg_i_hermitian(&s.pieces()[1].generator, 0.5 - 0.33).unwrap()
            * &expm_neg_i_hermitian(&s.pieces()[0].generator, 0.33 - 0.25).unwrap();
        assert!(straddle.max_abs_diff(&two_factor) < 1e-12);
        assert!(straddle.max_abs_diff(&drive_evolve(&s, 0.25, 0.5).unwrap()) < 1e-12);
    }

    #[test]
    fn build_program_rejects_coarse_slices() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let alg = alg_with(DrivingSchedule::constant(Operator::zeros(2), 4.0).unwrap(), &mut rng);
        assert!(build_program(&alg, 1).is_err());
        assert!(build_program(&alg, 0).is_err());
        assert!(build_program(&alg, 2).is_ok());
    }

    #[test]
    fn run_ideal_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = random_hermitian(4, &mut rng);
        let alg = alg_with(DrivingSchedule::constant(d.clone(), 1.0).unwrap(), &mut rng);
        let prog = build_program(&alg, 5).unwrap();
        let zero = OracleInstance::new(2, vec![0; 4]).unwrap();
        let out = run_ideal(&prog, &zero, alg.initial_state()).unwrap();
        let drive_only = expm_neg_i_hermitian(&d, 1.0).unwrap().apply(alg.initial_state()).unwrap();
        assert!(out.max_abs_diff(&drive_only) < 1e-12);
        assert!((out.norm() - 1.0).abs() < 1e-10);

        let alg0 = alg_with(DrivingSchedule::constant(Operator::zeros(4), 2.0).unwrap(), &mut rng);
        let prog0 = build_program(&alg0, 3).unwrap();
        let x = OracleInstance::random(2, &mut rng);
        let out = run_ideal(&prog0, &x, alg0.initial_state()).unwrap();
        let direct = fractional_query(&x, 2.0).unwrap().apply(alg0.initial_state()).unwrap();
        assert!(out.max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn run_ideal_meets_trotter_fidelity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let eps1 = 0.04;
        let d = random_hermitian_with_norm(4, 1.0, &mut rng);
        let alg = alg_with(DrivingSchedule::constant(d, 1.0).unwrap(), &mut rng);
        let x = OracleInstance::random(2, &mut rng);
        let p = choose_p(1.0, average_norm(alg.schedule()), eps1).unwrap();
        assert_eq!(p, 10);
        let prog = build_program(&alg, p).unwrap();
        let f = fidelity(
            &run_ideal(&prog, &x, alg.initial_state()).unwrap(),
            &reference_evolve(&alg, &x).unwrap(),
        )
        .unwrap();
        assert!(f >= (1.0 - eps1).sqrt());
    }

    #[test]
    fn defect_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = OracleInstance::random(2, &mut rng);

        let alg = alg_with(DrivingSchedule::constant(Operator::zeros(4), 1.0).unwrap(), &mut rng);
        let prog = build_program(&alg, 4).unwrap();
        assert!(trotter_defect(&alg, &prog, &x).unwrap() < 1e-12);

        let diag = Operator::from_diagonal(&[0.4, -0.2, 1.3, 0.0].map(|v| Complex64::new(v, 0.0))).unwrap();
        let alg = alg_with(DrivingSchedule::constant(diag, 1.0).unwrap(), &mut rng);
        let prog = build_program(&alg, 4).unwrap();
        assert!(trotter_defect(&alg, &prog, &x).unwrap() <= 1e-10);

        let d = random_hermitian_with_norm(4, 2.0, &mut rng);
        let alg = alg_with(DrivingSchedule::constant(d, 1.0).unwrap(), &mut rng);
        let prog = build_program(&alg, 40).unwrap();
        let defect = trotter_defect(&alg, &prog, &x).unwrap();
        assert!(defect <= 0.1 + 1e-9, "defect {defect}");
    }

    #[test]
    fn per_slice_defect_bounds_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = OracleInstance::random(2, &mut rng);
        let s = DrivingSchedule::new(vec![
            Piece { duration: 0.3, generator: random_hermitian_with_norm(4, 1.5, &mut rng) },
            Piece { duration: 0.5, generator: random_hermitian_with_norm(4, 0.5, &mut rng) },
        ])
        .unwrap();
        let alg = alg_with(s.clone(), &mut rng);
        let prog = build_program(&alg, 8).unwrap();
        let q = fractional_query(&x, prog.theta()).unwrap();
        for (k, v) in prog.drives().iter().enumerate() {
            let (t_a, t_b) = (k as f64 * prog.theta(), (k + 1) as f64 * prog.theta());
            let w = full_evolve(&alg, &x, t_a, t_b.min(s.total_time())).unwrap();
            // 2θ ∫ ‖D‖ over the slice, integrated piecewise
            let mut integral = 0.0;
            let mut start = 0.0;
            for p in s.pieces() {
                let end = start + p.duration;
                let overlap = (end.min(t_b) - start.max(t_a)).max(0.0);
                integral += overlap * operator_norm(&p.generator);
                start = end;
            }
            let defect = operator_norm(&(&w - &(v * &q)));
            assert!(defect <= 2.0 * prog.theta() * integral + 1e-12);
        }
    }

    #[test]
    fn doubling_p_shrinks_the_defect() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = OracleInstance::random(2, &mut rng);
        let d = random_hermitian_with_norm(4, 2.0, &mut rng);
        let alg = alg_with(DrivingSchedule::constant(d, 1.0).unwrap(), &mut rng);
        let mut last = f64::INFINITY;
        for p in [10, 20, 40, 80] {
            let defect = trotter_defect(&alg, &build_program(&alg, p).unwrap(), &x).unwrap();
            assert!(defect < last);
            assert!(defect <= trotter_bound(1.0, 2.0, p) + 1e-9);
            last = defect;
        }
    }
}
