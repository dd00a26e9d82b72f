//! Vacuum heralding on a qubus beam and ancilla erasure by feedforward.
//!
//! Heralding enumerates every branch exactly; nothing is sampled. The branch
//! a detector is meant to select is the one whose beam tag is zero (see
//! [`crate::state::Beam`]). The silent-failure probability is
//! `Σ_wrong w · e^{-η|β|²}`, accumulated in log space.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::{
    error::{Error, Result},
    state::{amplitudes_match, HybridState, Term, NORM_TOL},
};

/// Photon-number non-resolving (on/off) detector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorModel {
    #[default]
    IdealPnnd,
    OnOff { efficiency: f64 },
}

impl DetectorModel {
    pub fn on_off(efficiency: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(Error::param("eta", format!("efficiency {efficiency} outside [0, 1]")));
        }
        Ok(DetectorModel::OnOff { efficiency })
    }

    pub fn efficiency(&self) -> f64 {
        match *self {
            DetectorModel::IdealPnnd => 1.0,
            DetectorModel::OnOff { efficiency } => efficiency,
        }
    }

    /// `ln P(no click | coherent state β) = -η|β|²`.
    pub fn log_no_click(&self, beta: C64) -> f64 {
        -self.efficiency() * beta.norm_sqr()
    }
}

/// One phase class of the heralded beam.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchRecord {
    /// Beam amplitude the class would have for unit injected beams.
    pub phase_class: [f64; 2],
    pub amplitude: [f64; 2],
    pub mean_photons: f64,
    pub weight: f64,
    pub no_click_prob: f64,
    pub no_click_log10: f64,
    pub heralded: bool,
}

#[derive(Clone, Debug)]
pub struct HeraldOutcome {
    /// Renormalized post-herald state with the heralded beam removed; `None`
    /// when no term lies in the vacuum class.
    pub heralded_state: Option<HybridState>,
    pub success_prob: f64,
    pub error_prob: f64,
    /// `log10(error_prob)`, finite even when `error_prob` underflows; `None` when it is exactly 0.
    pub error_prob_log10: Option<f64>,
    pub branch_table: Vec<BranchRecord>,
}

impl HeraldOutcome {
    pub fn succeeded(&self) -> bool {
        self.heralded_state.is_some()
    }
}

/// `ln Σ exp(x_i)`, `-∞` for an empty input.
pub(crate) fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().filter(|x| *x > f64::NEG_INFINITY).collect();
    let Some(max) = xs.iter().copied().reduce(f64::max) else {
        return f64::NEG_INFINITY;
    };
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

struct Class {
    tag: C64,
    amplitude: C64,
    terms: Vec<Term>,
}

/// Projects `beam` onto the detector's no-click outcome for the vacuum branch.
pub fn herald_vacuum(state: &HybridState, beam: usize, det: &DetectorModel) -> Result<HeraldOutcome> {
    state.layout().check_beam(beam)?;
    let eta = det.efficiency();
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::param("eta", format!("efficiency {eta} outside [0, 1]")));
    }
    let norm = state.norm_sq()?;
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(norm));
    }

    let mut classes: Vec<Class> = Vec::new();
    for t in state.terms() {
        let b = t.qubus[beam];
        match classes
            .iter_mut()
            .find(|c| amplitudes_match(c.tag, b.tag) && amplitudes_match(c.amplitude, b.amplitude))
        {
            Some(c) => c.terms.push(t.clone()),
            None => classes.push(Class { tag: b.tag, amplitude: b.amplitude, terms: vec![t.clone()] }),
        }
    }

    let is_vacuum = |tag: C64| amplitudes_match(tag, C64::new(0.0, 0.0));
    let mut table = Vec::with_capacity(classes.len());
    let mut log_errors = Vec::new();
    let mut vacuum_terms = Vec::new();
    for class in classes {
        let sub = HybridState::from_parts(state.layout().clone(), class.terms.clone(), state.norm_mode());
        // relative to the input norm so that rounding in it cancels
        let weight = sub.norm_sq()? / norm;
        let log_nc = det.log_no_click(class.amplitude);
        let heralded = is_vacuum(class.tag);
        if heralded {
            vacuum_terms.extend(class.terms);
        } else if weight > 0.0 {
            log_errors.push(weight.ln() + log_nc);
        }
        table.push(BranchRecord {
            phase_class: [class.tag.re, class.tag.im],
            amplitude: [class.amplitude.re, class.amplitude.im],
            mean_photons: class.amplitude.norm_sqr(),
            weight,
            no_click_prob: log_nc.exp(),
            no_click_log10: log_nc / std::f64::consts::LN_10,
            heralded,
        });
    }

    let log_error = log_sum_exp(log_errors);
    let error_prob = log_error.exp();
    let error_prob_log10 = (log_error > f64::NEG_INFINITY).then(|| log_error / std::f64::consts::LN_10);

    let (heralded_state, success_prob) = if vacuum_terms.is_empty() {
        (None, 0.0)
    } else {
        let sub = HybridState::from_parts(state.layout().clone(), vacuum_terms, state.norm_mode());
        let success = sub.norm_sq()? / norm;
        let reduced = sub.remove_beam_unchecked(beam);
        if reduced.is_empty() {
            (None, 0.0)
        } else {
            (Some(reduced.normalized()?), success)
        }
    };

    if error_prob > 1.0 - success_prob + 1e-12 {
        return Err(Error::Invariant(format!(
            "error probability {error_prob} exceeds 1 - success ({success_prob})"
        )));
    }
    Ok(HeraldOutcome { heralded_state, success_prob, error_prob, error_prob_log10, branch_table: table })
}

fn pure_fidelity(a: &HybridState, b: &HybridState) -> Result<f64> {
    let ab = a.inner(b)?.norm_sqr();
    Ok(ab / (a.norm_sq()? * b.norm_sq()?))
}

/// Measures the ancilla in its spatial-mode basis and undoes the residual
/// phase `e^{2πi j k₀/n}` on the label `j` of `correction_party`, for every
/// possible outcome `k₀`. Returns the corrected party state once every
/// outcome has been checked to give the same state.
pub fn measure_ancilla_and_feedforward(state: &HybridState, correction_party: usize) -> Result<HybridState> {
    let layout = state.layout();
    let ancilla = layout.ancilla_slot()?;
    let party = layout.party_slot(correction_party)?;
    if layout.prep().is_some() {
        return Err(Error::param("state", "ancilla is still in preparation"));
    }
    let n = layout.ancilla_modes();
    let reduced_layout = layout.without_ancilla();

    let mut outcomes = Vec::with_capacity(n);
    for k0 in 0..n {
        let Some(branch) = state.project(|t| t.labels[ancilla] == k0) else {
            continue;
        };
        let corrected = branch.remap(reduced_layout.clone(), |t| {
            let mut labels = t.labels.clone();
            labels.remove(ancilla);
            let phase = -2.0 * PI * ((t.labels[party] * k0) % n) as f64 / n as f64;
            vec![Term::new(t.amp * C64::from_polar(1.0, phase), labels, t.qubus.clone())]
        });
        if corrected.is_empty() {
            continue;
        }
        outcomes.push((k0, corrected.normalized()?));
    }

    let Some((_, first)) = outcomes.first() else {
        return Err(Error::EmptyState);
    };
    for (k0, other) in &outcomes[1..] {
        let f = pure_fidelity(first, other)?;
        if (1.0 - f).abs() > 1e-10 {
            return Err(Error::FeedforwardFailed(format!(
                "outcome {k0} gives fidelity {f} with outcome {}",
                outcomes[0].0
            )));
        }
    }
    Ok(first.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{Beam, NormMode, RegisterLayout};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn all_vacuum_beam_heralds_with_certainty() {
        let layout = RegisterLayout::new(vec![2], 0, None, 1).unwrap();
        let terms = vec![
            Term::new(c(0.6, 0.0), vec![0], vec![Beam { amplitude: c(0.0, 0.0), tag: c(0.0, 0.0) }]),
            Term::new(c(0.8, 0.0), vec![1], vec![Beam { amplitude: c(0.0, 0.0), tag: c(0.0, 0.0) }]),
        ];
        let s = HybridState::new(layout, terms, NormMode::GramExact).unwrap();
        let out = herald_vacuum(&s, 0, &DetectorModel::IdealPnnd).unwrap();
        assert_abs_diff_eq!(out.success_prob, 1.0, epsilon = 1e-15);
        assert_eq!(out.error_prob, 0.0);
        assert_eq!(out.error_prob_log10, None);
        let h = out.heralded_state.unwrap();
        assert_eq!(h.layout().qubus_count(), 0);
        assert_abs_diff_eq!(h.amplitude_of(&[1]).re, 0.8, epsilon = 1e-15);
    }

    #[test]
    fn no_vacuum_branch_is_reported_not_raised() {
        let layout = RegisterLayout::new(vec![2], 0, None, 1).unwrap();
        let terms = vec![Term::new(c(1.0, 0.0), vec![0], vec![Beam::injected(c(3.0, 0.0))])];
        let s = HybridState::new(layout, terms, NormMode::GramExact).unwrap();
        let out = herald_vacuum(&s, 0, &DetectorModel::IdealPnnd).unwrap();
        assert!(!out.succeeded());
        assert_eq!(out.success_prob, 0.0);
        assert_abs_diff_eq!(out.error_prob, (-9.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn unnormalized_input_rejected() {
        let layout = RegisterLayout::new(vec![2], 0, None, 1).unwrap();
        let terms = vec![Term::new(c(0.5, 0.0), vec![0], vec![Beam::injected(c(0.0, 0.0))])];
        let s = HybridState::new(layout, terms, NormMode::GramExact).unwrap();
        assert!(matches!(herald_vacuum(&s, 0, &DetectorModel::IdealPnnd), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn detector_efficiency_validated() {
        assert!(DetectorModel::on_off(1.2).is_err());
        assert_eq!(DetectorModel::on_off(1.0).unwrap().efficiency(), DetectorModel::IdealPnnd.efficiency());
        assert_abs_diff_eq!(DetectorModel::on_off(0.7).unwrap().log_no_click(c(0.0, 2.0)), -2.8, epsilon = 1e-15);
    }

    #[test]
    fn log_sum_exp_handles_underflow() {
        assert_eq!(log_sum_exp([]), f64::NEG_INFINITY);
        let v = log_sum_exp([-1e5, -1e5]);
        assert_abs_diff_eq!(v, -1e5 + 2f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn feedforward_outcome_zero_is_identity_and_removes_ancilla() {
        // Σ_j |j⟩|j⟩_s after the Fourier transform, projected on k0 = 0, needs no correction.
        let layout = RegisterLayout::new(vec![2], 2, None, 0).unwrap();
        let terms = vec![
            Term::new(c(0.5, 0.0), vec![0, 0], vec![]),
            Term::new(c(0.5, 0.0), vec![1, 0], vec![]),
            Term::new(c(0.5, 0.0), vec![0, 1], vec![]),
            Term::new(c(-0.5, 0.0), vec![1, 1], vec![]),
        ];
        let s = HybridState::new(layout, terms, NormMode::GramExact).unwrap();
        let out = measure_ancilla_and_feedforward(&s, 0).unwrap();
        assert!(!out.layout().has_ancilla());
        assert_abs_diff_eq!(out.amplitude_of(&[0]).re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(out.amplitude_of(&[1]).re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn feedforward_detects_outcome_dependence() {
        // ancilla not correlated with the corrected party: outcomes disagree
        let layout = RegisterLayout::new(vec![2], 2, None, 0).unwrap();
        let terms = vec![
            Term::new(c(0.5, 0.0), vec![0, 0], vec![]),
            Term::new(c(0.5, 0.0), vec![1, 0], vec![]),
            Term::new(c(0.5, 0.0), vec![0, 1], vec![]),
            Term::new(c(0.5, 0.0), vec![1, 1], vec![]),
        ];
        let s = HybridState::new(layout, terms, NormMode::GramExact).unwrap();
        assert!(matches!(measure_ancilla_and_feedforward(&s, 0), Err(Error::FeedforwardFailed(_))));
        let no_ancilla = HybridState::from_party_amplitudes(vec![2], vec![(c(1.0, 0.0), vec![0])], NormMode::GramExact).unwrap();
        assert_eq!(measure_ancilla_and_feedforward(&no_ancilla, 0), Err(Error::NoAncilla));
    }
}
