//! Random instances for tests, verification suites, and experiment
//! generators. All draws go through a caller-supplied RNG.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{operator_norm, Operator, StateVector};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Matrix with i.i.d. complex Gaussian entries.
pub fn random_operator<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Operator {
    let m = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    Operator::from_matrix(m).expect("power-of-two dimension")
}

/// `(G + G†)/2` for a complex Gaussian `G`.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Operator {
    let g = random_operator(dim, rng);
    (&g + &g.adjoint()).scaled(Complex64::new(0.5, 0.0))
}

/// Random Hermitian operator rescaled to the requested operator norm.
pub fn random_hermitian_with_norm<R: Rng + ?Sized>(dim: usize, norm: f64, rng: &mut R) -> Operator {
    let h = random_hermitian(dim, rng);
    let current = operator_norm(&h);
    h.scaled(Complex64::new(norm / current, 0.0))
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix,
/// with the phases of `R`'s diagonal folded back into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Operator {
    let g = random_operator(dim, rng);
    let qr = g.matrix().clone().qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for entry in q.column_mut(j).iter_mut() {
            *entry *= phase;
        }
    }
    Operator::from_matrix(q).expect("power-of-two dimension")
}

/// Uniformly random normalized state on `n_qubits` qubits.
pub fn random_state<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> StateVector {
    let amps = (0..1usize << n_qubits).map(|_| gaussian(rng)).collect();
    StateVector::from_amplitudes(amps)
        .and_then(|s| s.normalized())
        .expect("nonzero Gaussian vector")
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn generators_honor_their_contracts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(random_hermitian(8, &mut rng).is_hermitian(1e-14));
        assert!(random_unitary(8, &mut rng).is_unitary(1e-12));
        let h = random_hermitian_with_norm(4, 2.0, &mut rng);
        assert!((operator_norm(&h) - 2.0).abs() < 1e-12);
        assert!((random_state(3, &mut rng).norm() - 1.0).abs() < 1e-12);
    }
}
