use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gadget::{amplitudes, Direction};

/// Largest control register handled with explicit basis-state bit masks.
pub const MAX_CONTROL_BITS: usize = 60;

/// State of the `m` control qubits of a segment, stored sparsely as
/// `(z, amplitude)` pairs sorted by `z`. Bit `i` of `z` is control position
/// `i` (position 0 = the first gadget of the segment).
#[derive(Clone, Debug, PartialEq)]
pub struct ControlState {
    m: usize,
    max_weight: Option<usize>,
    entries: Vec<(usize, Complex64)>,
}

impl ControlState {
    pub fn m(&self) -> usize {
        self.m
    }

    /// `Some(k)` when the state is restricted to Hamming weight `≤ k`.
    pub fn max_weight(&self) -> Option<usize> {
        self.max_weight
    }

    pub fn entries(&self) -> &[(usize, Complex64)] {
        &self.entries
    }

    pub fn amplitude(&self, z: usize) -> Complex64 {
        self.entries
            .binary_search_by_key(&z, |(b, _)| *b)
            .map(|i| self.entries[i].1)
            .unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        compensated_sum(self.entries.iter().map(|(_, a)| a.norm_sqr()))
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &ControlState) -> Complex64 {
        // both entry lists are sorted by z
        let mut terms = Vec::with_capacity(self.entries.len().min(other.entries.len()));
        let mut rest = other.entries.iter().peekable();
        for (z, a) in &self.entries {
            while rest.next_if(|(w, _)| w < z).is_some() {}
            if let Some((_, b)) = rest.next_if(|(w, _)| w == z) {
                terms.push(a.conj() * b);
            }
        }
        Complex64::new(
            compensated_sum(terms.iter().map(|t| t.re)),
            compensated_sum(terms.iter().map(|t| t.im)),
        )
    }
}

/// Neumaier summation; the dense control states have up to `2^24` terms.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 || m > MAX_CONTROL_BITS {
        return Err(Error::OutOfRange {
            name: "m",
            value: m as f64,
            range: "[1, 60]",
        });
    }
    Ok(())
}

/// Single-qubit amplitudes `(⟨0|R₁|0⟩, ⟨1|R₁|0⟩)` for the direction.
pub(crate) fn control_amplitudes(theta: f64, direction: Direction) -> (Complex64, Complex64) {
    let (a, b) = amplitudes(theta);
    (
        Complex64::new(a, 0.0),
        Complex64::new(0.0, direction.sign() * b),
    )
}

fn product_amplitude(z: usize, m: usize, zero: Complex64, one: Complex64) -> Complex64 {
    let w = z.count_ones() as i32;
    zero.powi(m as i32 - w) * one.powi(w)
}

/// `|χ⟩ = (R₁|0⟩)^{⊗m}` (or `R₁′` for the reverse direction), all `2^m`
/// amplitudes.
pub fn chi_state(m: usize, theta: f64, direction: Direction) -> Result<ControlState> {
    check_m(m)?;
    if m > 24 {
        return Err(Error::OutOfRange {
            name: "m",
            value: m as f64,
            range: "[1, 24] for a dense control state",
        });
    }
    let (zero, one) = control_amplitudes(theta, direction);
    let entries = (0..1usize << m)
        .map(|z| (z, product_amplitude(z, m, zero, one)))
        .collect();
    Ok(ControlState {
        m,
        max_weight: None,
        entries,
    })
}

/// `|χ′⟩ = P|χ⟩/√⟨χ|P|χ⟩`, with `P` the projector onto Hamming weight `≤ k`.
pub fn truncate_chi(chi: &ControlState, k: usize) -> Result<ControlState> {
    let kept: Vec<(usize, Complex64)> = chi
        .entries
        .iter()
        .filter(|(z, _)| z.count_ones() as usize <= k)
        .copied()
        .collect();
    let mass = compensated_sum(kept.iter().map(|(_, a)| a.norm_sqr()));
    if mass == 0.0 {
        return Err(Error::EmptyProjection { k });
    }
    let scale = 1.0 / mass.sqrt();
    Ok(ControlState {
        m: chi.m,
        max_weight: Some(k.min(chi.m)),
        entries: kept.into_iter().map(|(z, a)| (z, a * scale)).collect(),
    })
}

/// `|χ′⟩` built directly on the Hamming ball, without the `2^m` intermediate.
pub fn chi_restricted(m: usize, theta: f64, direction: Direction, k: usize) -> Result<ControlState> {
    check_m(m)?;
    let k = k.min(m);
    let (zero, one) = control_amplitudes(theta, direction);
    let mut entries: Vec<(usize, Complex64)> = hamming_ball(m, k)
        .into_iter()
        .map(|z| (z, product_amplitude(z, m, zero, one)))
        .collect();
    let mass = compensated_sum(entries.iter().map(|(_, a)| a.norm_sqr()));
    if mass == 0.0 {
        return Err(Error::EmptyProjection { k });
    }
    let scale = 1.0 / mass.sqrt();
    for (_, a) in &mut entries {
        *a *= scale;
    }
    Ok(ControlState {
        m,
        max_weight: Some(k),
        entries,
    })
}

/// All `m`-bit masks of Hamming weight `≤ k`, ascending.
pub fn hamming_ball(m: usize, k: usize) -> Vec<usize> {
    let k = k.min(m);
    let mut out = Vec::new();
    for w in 0..=k {
        if w == 0 {
            out.push(0);
            continue;
        }
        // Gosper's hack over masks with exactly `w` set bits
        let mut z: usize = (1 << w) - 1;
        let limit = 1usize << m;
        while z < limit {
            out.push(z);
            let lowest = z & z.wrapping_neg();
            let ripple = z + lowest;
            z = (((ripple ^ z) >> 2) / lowest) | ripple;
        }
    }
    out.sort_unstable();
    out
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Per-qubit weight probability `B = sin(θ/2) / (cos(θ/2) + sin(θ/2))`.
pub fn weight_probability(theta: f64) -> f64 {
    let (s, c) = ((theta / 2.0).sin(), (theta / 2.0).cos());
    s / (c + s)
}

/// `Σ_{j>k} C(m,j) (1−B)^{m−j} B^j`, summed term by term.
pub fn tail_mass(m: usize, theta: f64, k: usize) -> f64 {
    let b = weight_probability(theta);
    ((k + 1)..=m)
        .map(|j| binomial(m, j) * (1.0 - b).powi((m - j) as i32) * b.powi(j as i32))
        .rev()
        .sum()
}

/// `|⟨χ′|χ⟩|² = 1 − Σ_{j>k} C(m,j)(1−B)^{m−j}B^j`, exact binomial tail.
pub fn overlap_bound(m: usize, theta: f64, k: usize) -> f64 {
    1.0 - tail_mass(m, theta, k)
}

/// Smallest `k ≤ m` with `1 − |⟨χ′|χ⟩|² ≤ ε₂ε₃/T`.
pub fn choose_k(total_time: f64, eps2: f64, eps3: f64, m: usize, theta: f64) -> Result<usize> {
    for (name, eps) in [("eps2", eps2), ("eps3", eps3)] {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::OutOfRange { name, value: eps, range: "(0, 1)" });
        }
    }
    if !(total_time > 0.0) {
        return Err(Error::OutOfRange { name: "T", value: total_time, range: "(0, inf)" });
    }
    let target = eps2 * eps3 / total_time;
    // tail_mass is non-increasing in k and zero at k = m
    let (mut lo, mut hi) = (0usize, m);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if tail_mass(m, theta, mid) <= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_examples() {
        let theta = 0.3;
        let one = chi_state(1, theta, Direction::Forward).unwrap();
        let r1 = crate::gadget::r1_matrix(theta).unwrap();
        assert!((one.amplitude(0) - r1.entry(0, 0)).norm() < 1e-15);
        assert!((one.amplitude(1) - r1.entry(1, 0)).norm() < 1e-15);

        let m = 6;
        let chi = chi_state(m, theta, Direction::Forward).unwrap();
        let v = crate::gadget::gadget_v(theta);
        let expected = (theta / 2.0).cos().powf(m as f64 / 2.0) / v.powf(m as f64 / 2.0);
        assert!((chi.amplitude(0).re - expected).abs() < 1e-14);
        assert!((chi.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_examples() {
        let chi = chi_state(5, 0.2, Direction::Forward).unwrap();
        let full = truncate_chi(&chi, 5).unwrap();
        assert_eq!(full.entries().len(), chi.entries().len());
        assert!((full.overlap(&chi).norm() - 1.0).abs() < 1e-14);
        let zero = truncate_chi(&chi, 0).unwrap();
        assert_eq!(zero.entries().len(), 1);
        assert!((zero.amplitude(0).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn truncated_overlap_matches_binomial_formula() {
        let (m, theta, k) = (10, 1.0 / 40.0, 2);
        let chi = chi_state(m, theta, Direction::Forward).unwrap();
        let trunc = truncate_chi(&chi, k).unwrap();
        assert!((trunc.overlap(&chi).norm_sqr() - overlap_bound(m, theta, k)).abs() < 1e-12);
        let direct = chi_restricted(m, theta, Direction::Forward, k).unwrap();
        assert!((direct.overlap(&trunc).norm() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn empty_projection_is_an_error() {
        let chi = ControlState { m: 2, max_weight: None, entries: vec![(3, Complex64::new(1.0, 0.0))] };
        assert!(matches!(truncate_chi(&chi, 1), Err(Error::EmptyProjection { k: 1 })));
    }

    #[test]
    fn overlap_bound_examples() {
        assert_eq!(overlap_bound(7, 0.1, 7), 1.0);
        let theta = 0.3;
        assert!((overlap_bound(1, theta, 0) - (1.0 - weight_probability(theta))).abs() < 1e-15);
        let v = overlap_bound(20, 1.0 / 80.0, 3);
        assert!(v > 0.9999 && v < 1.0);
        assert!(v >= 1.0 - (1.0f64 / 8.0).powi(4));
    }

    #[test]
    fn ball_enumeration() {
        let ball = hamming_ball(5, 2);
        assert_eq!(ball.len(), 1 + 5 + 10);
        assert!(ball.iter().all(|z| z.count_ones() <= 2 && *z < 32));
        assert!(ball.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(hamming_ball(3, 9).len(), 8);
        assert_eq!(binomial(50, 3), 19600.0);
    }

    #[test]
    fn choose_k_is_minimal() {
        let (m, theta, t) = (20, 1.0 / 80.0, 1.0);
        let k = choose_k(t, 0.1, 0.1, m, theta).unwrap();
        let target = 0.01;
        let scanned = (0..=m).find(|&k| tail_mass(m, theta, k) <= target).unwrap();
        assert_eq!(k, scanned);
        assert!(1.0 - overlap_bound(m, theta, k) <= target);
        assert!(k == 0 || 1.0 - overlap_bound(m, theta, k - 1) > target);

        // loose requirement: nothing needed beyond the zero-weight state
        assert_eq!(choose_k(1.0, 0.9, 0.9, 2, 0.01).unwrap(), 0);
        // unreachable before k = m
        assert_eq!(choose_k(1e9, 0.01, 0.01, 3, 0.5).unwrap(), 3);
    }
}
