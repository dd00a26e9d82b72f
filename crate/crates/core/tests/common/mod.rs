//! Independent reference computations shared by the integration tests.
//! Nothing here goes through the simulator's circuit code.
#![allow(dead_code)]

use num_complex::Complex64 as C64;
use qubus_forge::state::{HybridState, NormMode};
use rand::Rng;

/// `⟨a|b⟩` by summing the Fock expansion `Σ_m (a*)^m b^m / m!` times
/// `e^{-(|a|²+|b|²)/2}`. Converges in double precision for `|a|, |b| ≤ 4`.
pub fn fock_overlap(a: C64, b: C64) -> C64 {
    let x = a.conj() * b;
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    for m in 1..400 {
        term *= x / m as f64;
        sum += term;
        if term.norm() < 1e-30 && m as f64 > x.norm() {
            break;
        }
    }
    sum * (-(a.norm_sqr() + b.norm_sqr()) / 2.0).exp()
}

fn log_add_exp(x: f64, y: f64) -> f64 {
    let m = x.max(y);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((x - m).exp() + (y - m).exp()).ln()
}

/// `ln` of the two-term qutrit silent-error formula
/// `(4/9) e^{-2|α|² sin²(θ/2)} + (2/9) e^{-2|α|² sin²θ}`.
pub fn qutrit_error_ln(alpha: f64, theta: f64) -> f64 {
    let a2 = alpha * alpha;
    log_add_exp(
        (4.0f64 / 9.0).ln() - 2.0 * a2 * (theta / 2.0).sin().powi(2),
        (2.0f64 / 9.0).ln() - 2.0 * a2 * theta.sin().powi(2),
    )
}

/// Relative XPM phase (in units of θ) of each `(j, s)` pair of the qutrit
/// stage, read off the five displayed branches:
/// 2θ: (0,0),(1,1),(2,2); 3θ: (0,1),(1,2); 4θ: (0,2); θ: (1,0),(2,1); 0: (2,0).
pub const QUTRIT_PHASE_TABLE: [((usize, usize), u32); 9] = [
    ((0, 0), 2), ((1, 1), 2), ((2, 2), 2),
    ((0, 1), 3), ((1, 2), 3),
    ((0, 2), 4),
    ((1, 0), 1), ((2, 1), 1),
    ((2, 0), 0),
];

/// `Σ_j |a_j b_{(j+k) mod n}|²`.
pub fn stage_two_success(a: &[C64], b: &[C64], k: usize) -> f64 {
    let n = a.len();
    (0..n).map(|j| (a[j] * b[(j + k) % n]).norm_sqr()).sum()
}

pub fn random_unit_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// The state an ideal run must produce, written out term by term:
/// `Σ_j τ^{jm}/√n |j⟩|(j+k) mod n⟩`.
pub fn pair_target_by_hand(n: usize, m: usize, k: usize) -> HybridState {
    let amps = (0..n).map(|j| {
        let phase = 2.0 * std::f64::consts::PI * (j * m) as f64 / n as f64;
        (C64::from_polar(1.0 / (n as f64).sqrt(), phase), vec![j, (j + k) % n])
    });
    HybridState::from_party_amplitudes(vec![n, n], amps, NormMode::GramExact).unwrap()
}

/// `|⟨a|b⟩|²/(‖a‖²‖b‖²)` over party labels, computed by dense vectors.
pub fn dense_fidelity(a: &HybridState, b: &HybridState) -> f64 {
    let dims = a.layout().party_dims().to_vec();
    assert_eq!(dims, b.layout().party_dims());
    let size: usize = dims.iter().product();
    let index = |labels: &[usize]| labels.iter().zip(&dims).fold(0, |acc, (l, d)| acc * d + l);
    let dense = |s: &HybridState| {
        let mut v = vec![C64::new(0.0, 0.0); size];
        for t in s.terms() {
            v[index(&t.labels)] += t.amp;
        }
        v
    };
    let (va, vb) = (dense(a), dense(b));
    let ip: C64 = va.iter().zip(&vb).map(|(x, y)| x.conj() * y).sum();
    let na: f64 = va.iter().map(|z| z.norm_sqr()).sum();
    let nb: f64 = vb.iter().map(|z| z.norm_sqr()).sum();
    ip.norm_sqr() / (na * nb)
}
