//! Figures of merit: fidelity, reduced entropy, the closed-form silent-error
//! probability of the first stage, parameter sweeps and basis verification.

use std::f64::consts::LN_10;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::{
    error::{Error, Result},
    herald::{log_sum_exp, DetectorModel},
    protocol::{entangle_stage, prepare_single_photon_qudit, target_state_pair, ProtocolSpec},
    state::HybridState,
};

/// `|⟨a|b⟩|² / (‖a‖² ‖b‖²)`.
pub fn fidelity(a: &HybridState, b: &HybridState) -> Result<f64> {
    let overlap = a.inner(b)?.norm_sqr();
    let f = overlap / (a.norm_sq()? * b.norm_sq()?);
    Ok(f.clamp(0.0, 1.0))
}

/// Von Neumann entropy (bits) of one party of a two-party pure state.
pub fn reduced_entropy(state: &HybridState, party: usize) -> Result<f64> {
    let layout = state.layout();
    if layout.party_count() != 2 {
        return Err(Error::param(
            "state",
            format!("reduced entropy needs exactly two parties, state has {}", layout.party_count()),
        ));
    }
    if layout.has_ancilla() || layout.qubus_count() > 0 {
        return Err(Error::param("state", "reduced entropy needs a party-only state"));
    }
    layout.party_slot(party)?;
    let (d0, d1) = (layout.party_dims()[0], layout.party_dims()[1]);
    let mut coeffs = DMatrix::<C64>::zeros(d0, d1);
    for t in state.terms() {
        coeffs[(t.labels[0], t.labels[1])] += t.amp;
    }
    if party == 1 {
        coeffs = coeffs.transpose();
    }
    let svals = coeffs.svd(false, false).singular_values;
    let total: f64 = svals.iter().map(|s| s * s).sum();
    if total <= 0.0 {
        return Err(Error::EmptyState);
    }
    Ok(svals
        .iter()
        .map(|s| s * s / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum())
}

/// Mean photon number `2|α|² sin²(kθ/2)` of the herald-beam branch whose
/// relative phase offset is `kθ`.
pub fn branch_mean_photons(alpha: f64, theta: f64, k: i64) -> f64 {
    2.0 * alpha * alpha * (k as f64 * theta / 2.0).sin().powi(2)
}

/// `ln P_E` for the first stage with balanced inputs.
///
/// Offset `d ≠ 0` between party label and ancilla mode occurs with weight
/// `(n - |d|)/n²` and leaves `2|α|² sin²(dθ/2)` mean photons in the herald
/// beam; an on/off detector with efficiency `η` stays silent with probability
/// `e^{-η · mean}`.
pub fn error_prob_closed_form_ln(alpha: f64, theta: f64, eta: f64, n: usize) -> f64 {
    let n_f = n as f64;
    log_sum_exp((1..n as i64).map(|d| {
        let weight = 2.0 * (n_f - d as f64) / (n_f * n_f);
        weight.ln() - eta * branch_mean_photons(alpha, theta, d)
    }))
}

pub fn error_prob_closed_form(alpha: f64, theta: f64, eta: f64, n: usize) -> f64 {
    error_prob_closed_form_ln(alpha, theta, eta, n).exp()
}

/// Simulated `(P_E, ln P_E)` of the first stage with balanced inputs.
pub fn simulate_stage_one_error(alpha: f64, theta: f64, eta: f64, n: usize) -> Result<(f64, f64)> {
    let mut spec = ProtocolSpec::balanced(n, vec![0, 0], theta, alpha);
    spec.detector = if eta == 1.0 { DetectorModel::IdealPnnd } else { DetectorModel::on_off(eta)? };
    let prepared = prepare_single_photon_qudit(n)?.with_norm_mode(spec.norm_mode);
    let outcome = entangle_stage(&prepared, &spec, 0)?;
    let ln = outcome.error_prob_log10.map_or(f64::NEG_INFINITY, |l| l * LN_10);
    Ok((outcome.error_prob, ln))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub alpha_values: Vec<f64>,
    pub theta_values: Vec<f64>,
    pub eta_values: Vec<f64>,
    pub n: usize,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        let axes: [(&'static str, &Vec<f64>); 3] =
            [("alpha", &self.alpha_values), ("theta", &self.theta_values), ("eta", &self.eta_values)];
        for (field, values) in axes {
            if values.is_empty() {
                return Err(Error::param(field, "axis is empty"));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::param(field, "values must be finite"));
            }
        }
        if self.alpha_values.iter().any(|&a| a < 0.0) {
            return Err(Error::param("alpha", "values must be ≥ 0"));
        }
        if self.theta_values.iter().any(|&t| t <= 0.0) {
            return Err(Error::param("theta", "values must be > 0"));
        }
        if self.eta_values.iter().any(|&e| !(0.0..=1.0).contains(&e)) {
            return Err(Error::param("eta", "values must lie in [0, 1]"));
        }
        if self.n < 2 {
            return Err(Error::param("n", format!("dimension {} < 2", self.n)));
        }
        Ok(())
    }

    /// Grid points in output order: alpha outermost, eta innermost.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &a in &self.alpha_values {
            for &t in &self.theta_values {
                for &e in &self.eta_values {
                    out.push((a, t, e));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub theta: f64,
    pub eta: f64,
    pub mean_photons_k1: f64,
    pub mean_photons_k2: f64,
    pub p_error_closed: f64,
    pub p_error_simulated: f64,
    pub p_error_closed_log10: Option<f64>,
    pub p_error_simulated_log10: Option<f64>,
}

pub const SWEEP_CSV_HEADER: [&str; 7] =
    ["alpha", "theta", "eta", "mean_k1", "mean_k2", "p_err_closed", "p_err_sim"];

fn finite_log10(ln: f64) -> Option<f64> {
    ln.is_finite().then(|| ln / LN_10)
}

fn sweep_row(alpha: f64, theta: f64, eta: f64, n: usize) -> Result<SweepRow> {
    let closed_ln = error_prob_closed_form_ln(alpha, theta, eta, n);
    let (sim, sim_ln) = simulate_stage_one_error(alpha, theta, eta, n)?;
    Ok(SweepRow {
        alpha,
        theta,
        eta,
        mean_photons_k1: branch_mean_photons(alpha, theta, 1),
        mean_photons_k2: branch_mean_photons(alpha, theta, 2),
        p_error_closed: closed_ln.exp(),
        p_error_simulated: sim,
        p_error_closed_log10: finite_log10(closed_ln),
        p_error_simulated_log10: finite_log10(sim_ln),
    })
}

/// One row per grid point, in [`SweepGrid::points`] order. Points are
/// evaluated on the current rayon pool.
pub fn run_sweep(grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    grid.points()
        .into_par_iter()
        .map(|(a, t, e)| sweep_row(a, t, e, grid.n))
        .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.alpha.to_string(),
            r.theta.to_string(),
            r.eta.to_string(),
            r.mean_photons_k1.to_string(),
            r.mean_photons_k2.to_string(),
            r.p_error_closed.to_string(),
            r.p_error_simulated.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasisReport {
    pub n: usize,
    pub state_count: usize,
    pub pairs_checked: usize,
    pub max_pair_overlap: f64,
    pub max_entropy_deviation: f64,
    pub symmetric: usize,
    pub asymmetric: usize,
    pub failures: Vec<String>,
    pub passed: bool,
}

/// Checks that the `n²` states `target_state_pair(n, m, k)` are pairwise
/// orthogonal and maximally entangled.
pub fn verify_basis(n: usize) -> Result<BasisReport> {
    if !(2..=8).contains(&n) {
        return Err(Error::param("n", format!("basis verification supports 2 ≤ n ≤ 8, got {n}")));
    }
    let mut states = Vec::with_capacity(n * n);
    for k in 0..n {
        for m in 0..n {
            states.push(((m, k), target_state_pair(n, m, k)?));
        }
    }
    let mut failures = Vec::new();
    let mut max_overlap: f64 = 0.0;
    let mut pairs = 0;
    for (i, (ia, a)) in states.iter().enumerate() {
        for (ib, b) in &states[i + 1..] {
            pairs += 1;
            let ov = a.inner(b)?.norm();
            max_overlap = max_overlap.max(ov);
            if ov >= 1e-12 {
                failures.push(format!("states (m,k)={ia:?} and {ib:?} overlap {ov:e}"));
            }
        }
    }
    let log_n = (n as f64).log2();
    let mut max_dev: f64 = 0.0;
    for (idx, s) in &states {
        let dev = (reduced_entropy(s, 0)? - log_n).abs();
        max_dev = max_dev.max(dev);
        if dev > 1e-10 {
            failures.push(format!("state (m,k)={idx:?} entropy off by {dev:e}"));
        }
    }
    let symmetric = states.iter().filter(|((_, k), _)| *k == 0).count();
    let asymmetric = states.len() - symmetric;
    if symmetric != n || asymmetric != n * (n - 1) {
        failures.push(format!("partition {asymmetric} asymmetric + {symmetric} symmetric"));
    }
    Ok(BasisReport {
        n,
        state_count: states.len(),
        pairs_checked: pairs,
        max_pair_overlap: max_overlap,
        max_entropy_deviation: max_dev,
        symmetric,
        asymmetric,
        passed: failures.is_empty(),
        failures,
    })
}
