//! End-to-end circuits: single-photon qudit preparation, the per-party
//! entangling stage, multi-party composition and the target states.
//!
//! Every stage attaches one party qudit, couples it and the ancilla to a
//! fresh `|α⟩|α⟩` qubus pair, rotates the second beam back by `(n-1)θ`,
//! interferes the pair on a balanced beam splitter and heralds on vacuum in
//! the first output. With shift `k` for the stage, the surviving terms are
//! those with party label `(s + k) mod n` for ancilla mode `s`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::{
    elements::{apply_bs_5050, apply_fourier_lomi, apply_pbs, apply_qubus_phase, apply_su2, apply_xpm, PhaseMap, Unitary2},
    error::{Error, Result},
    herald::{herald_vacuum, measure_ancilla_and_feedforward, BranchRecord, DetectorModel, HeraldOutcome},
    state::{HybridState, NormMode, PrepRegister, RegisterLayout, Term, H},
};

/// Balanced coefficients `1/√n`.
pub fn balanced_coeffs(n: usize) -> Vec<C64> {
    vec![C64::new(1.0 / (n as f64).sqrt(), 0.0); n]
}

/// Balanced coefficients with a phase ramp, `τ^{jm}/√n` with `τ = e^{2πi/n}`.
pub fn phased_coeffs(n: usize, m: usize) -> Vec<C64> {
    let norm = 1.0 / (n as f64).sqrt();
    (0..n).map(|j| C64::from_polar(norm, 2.0 * PI * ((j * m) % n) as f64 / n as f64)).collect()
}

/// A complete run description.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSpec {
    pub n: usize,
    /// One offset per party; the first must be 0.
    pub shifts: Vec<usize>,
    /// One length-`n` unit vector per party.
    pub coeffs: Vec<Vec<C64>>,
    pub theta: f64,
    pub alpha: C64,
    pub detector: DetectorModel,
    pub norm_mode: NormMode,
}

impl ProtocolSpec {
    /// Balanced inputs for every party, ideal detector, Gram-exact norms.
    pub fn balanced(n: usize, shifts: Vec<usize>, theta: f64, alpha: f64) -> Self {
        let coeffs = vec![balanced_coeffs(n); shifts.len()];
        Self {
            n,
            shifts,
            coeffs,
            theta,
            alpha: C64::new(alpha, 0.0),
            detector: DetectorModel::IdealPnnd,
            norm_mode: NormMode::GramExact,
        }
    }

    pub fn parties(&self) -> usize {
        self.shifts.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param("n", format!("dimension {} < 2", self.n)));
        }
        if self.shifts.len() < 2 {
            return Err(Error::param("shifts", format!("{} parties given, need at least 2", self.shifts.len())));
        }
        if let Some(&k) = self.shifts.iter().find(|&&k| k >= self.n) {
            return Err(Error::param("shifts", format!("shift {k} not in [0, {}]", self.n - 1)));
        }
        if self.shifts[0] != 0 {
            return Err(Error::param("shifts", "the first party's shift must be 0"));
        }
        if self.coeffs.len() != self.shifts.len() {
            return Err(Error::param(
                "coeffs",
                format!("{} coefficient vectors for {} parties", self.coeffs.len(), self.shifts.len()),
            ));
        }
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.len() != self.n {
                return Err(Error::param("coeffs", format!("party {i} has {} coefficients, expected {}", c.len(), self.n)));
            }
            let norm: f64 = c.iter().map(|z| z.norm_sqr()).sum();
            if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
                return Err(Error::param("coeffs", format!("party {i} has norm² {norm}, expected 1")));
            }
        }
        if !self.theta.is_finite() {
            return Err(Error::param("theta", "must be finite"));
        }
        if !self.alpha.is_finite() {
            return Err(Error::param("alpha", "must be finite"));
        }
        if self.alpha != C64::new(0.0, 0.0) && self.theta == 0.0 {
            return Err(Error::param("theta", "must be non-zero when alpha is non-zero"));
        }
        let eta = self.detector.efficiency();
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::param("eta", format!("efficiency {eta} outside [0, 1]")));
        }
        Ok(())
    }

    /// Phase index `m` of the basis state this spec produces, when every
    /// party's input is balanced up to a phase ramp `τ^{j m_i}`.
    pub fn basis_phase_index(&self) -> Option<usize> {
        let mut total = 0;
        for c in &self.coeffs {
            let m = (0..self.n).find(|&m| {
                let ip: C64 = phased_coeffs(self.n, m).iter().zip(c).map(|(p, z)| p.conj() * z).sum();
                (ip.norm() - 1.0).abs() < 1e-12
            })?;
            total += m;
        }
        Some(total % self.n)
    }
}

/// Builds `(1/√n) Σ_j |j⟩_s` by the polarization cascade: `U_j` then a PBS
/// reflecting V into mode `j` for `j = 0..n-2`, then σ_x on the last mode.
pub fn prepare_single_photon_qudit(n: usize) -> Result<HybridState> {
    if n < 1 {
        return Err(Error::param("n", "dimension must be at least 1"));
    }
    let work = n - 1;
    let layout = RegisterLayout::new(vec![], n, Some(PrepRegister { work_mode: work }), 0)?;
    let mut state = HybridState::new(layout, vec![Term::new(C64::new(1.0, 0.0), vec![work, H], vec![])], NormMode::GramExact)?;
    for j in 0..n - 1 {
        state = apply_su2(&state, &Unitary2::cascade_splitter(n, j)?)?;
        state = apply_pbs(&state, work, j)?;
    }
    state = apply_su2(&state, &Unitary2::pauli_x())?;
    state.release_prep()
}

fn check_stage_input(state: &HybridState, spec: &ProtocolSpec, party: usize) -> Result<()> {
    if party >= spec.parties() {
        return Err(Error::PartyOutOfRange { index: party, count: spec.parties() });
    }
    let layout = state.layout();
    if layout.ancilla_modes() != spec.n || layout.prep().is_some() {
        return Err(Error::param("state", format!("expected a prepared {}-mode ancilla", spec.n)));
    }
    if layout.party_count() != party {
        return Err(Error::param(
            "party",
            format!("stage for party {party} but state already holds {} parties", layout.party_count()),
        ));
    }
    Ok(())
}

/// The entangling stage up to (not including) the herald. The herald beam is
/// the returned state's second-to-last beam.
pub fn stage_circuit(state: &HybridState, spec: &ProtocolSpec, party: usize) -> Result<HybridState> {
    check_stage_input(state, spec, party)?;
    let n = spec.n;
    let with_party = state.attach_party(&spec.coeffs[party])?;
    let herald_beam = with_party.layout().qubus_count();
    let probe_beam = herald_beam + 1;
    let s = with_party.append_beams(&[spec.alpha, spec.alpha]);
    let s = apply_xpm(&s, Some(party), &PhaseMap::shifted(n, spec.shifts[party], spec.theta, probe_beam))?;
    let s = apply_qubus_phase(&s, probe_beam, -((n - 1) as f64) * spec.theta)?;
    apply_bs_5050(&s, (herald_beam, probe_beam))
}

/// Runs one entangling stage and heralds it. On success the spectator beam
/// (`|√2 α⟩` on the heralded branch) is discarded as well.
pub fn entangle_stage(state: &HybridState, spec: &ProtocolSpec, party: usize) -> Result<HeraldOutcome> {
    let pre = stage_circuit(state, spec, party)?;
    let herald_beam = pre.layout().qubus_count() - 2;
    let mut outcome = herald_vacuum(&pre, herald_beam, &spec.detector)?;
    if let Some(h) = outcome.heralded_state.take() {
        outcome.heralded_state = Some(h.discard_beam(herald_beam)?);
    }
    Ok(outcome)
}

/// Which state the final output was compared against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetKind {
    /// `target_state(n, m, shifts)`.
    Basis { m: usize },
    /// The normalized coefficient product `Σ_j Π_i c_i[(j + k_i) mod n] ⊗_i |(j + k_i) mod n⟩`.
    Ideal,
}

#[derive(Clone, Debug)]
pub struct StageSummary {
    pub party: usize,
    pub success_prob: f64,
    pub error_prob: f64,
    pub error_prob_log10: Option<f64>,
    pub branch_table: Vec<BranchRecord>,
}

#[derive(Clone, Debug)]
pub struct GenerationReport {
    /// Party-only output state; `None` when a stage failed.
    pub final_state: Option<HybridState>,
    pub success_prob: f64,
    pub error_prob_total: f64,
    pub per_stage: Vec<StageSummary>,
    pub fidelity_vs_target: Option<f64>,
    pub target: TargetKind,
    pub failed_stage: Option<usize>,
}

/// Prepares the ancilla, runs every party's stage, erases the ancilla and
/// certifies the output.
pub fn generate(spec: &ProtocolSpec) -> Result<GenerationReport> {
    spec.validate()?;
    let target = match spec.basis_phase_index() {
        Some(m) => TargetKind::Basis { m },
        None => TargetKind::Ideal,
    };
    let mut state = prepare_single_photon_qudit(spec.n)?.with_norm_mode(spec.norm_mode);
    let mut per_stage = Vec::with_capacity(spec.parties());
    let mut success = 1.0;
    let mut log_keep = 0.0;
    for party in 0..spec.parties() {
        let outcome = entangle_stage(&state, spec, party)?;
        success *= outcome.success_prob;
        log_keep += (-outcome.error_prob).ln_1p();
        per_stage.push(StageSummary {
            party,
            success_prob: outcome.success_prob,
            error_prob: outcome.error_prob,
            error_prob_log10: outcome.error_prob_log10,
            branch_table: outcome.branch_table,
        });
        match outcome.heralded_state {
            Some(next) => state = next,
            None => {
                return Ok(GenerationReport {
                    final_state: None,
                    success_prob: 0.0,
                    error_prob_total: -log_keep.exp_m1(),
                    per_stage,
                    fidelity_vs_target: None,
                    target,
                    failed_stage: Some(party),
                });
            }
        }
    }
    let erased = measure_ancilla_and_feedforward(&apply_fourier_lomi(&state)?, 0)?;
    let reference = match target {
        TargetKind::Basis { m } => target_state(spec.n, m, &spec.shifts)?,
        TargetKind::Ideal => ideal_output(spec)?,
    }
    .with_norm_mode(spec.norm_mode);
    let fidelity = crate::analysis::fidelity(&erased, &reference)?;
    Ok(GenerationReport {
        final_state: Some(erased),
        success_prob: success,
        error_prob_total: -log_keep.exp_m1(),
        per_stage,
        fidelity_vs_target: Some(fidelity),
        target,
        failed_stage: None,
    })
}

fn check_shifts(n: usize, shifts: &[usize]) -> Result<()> {
    if shifts.is_empty() {
        return Err(Error::param("shifts", "at least one party required"));
    }
    if let Some(&k) = shifts.iter().find(|&&k| k >= n) {
        return Err(Error::param("k", format!("shift {k} not in [0, {}]", n - 1)));
    }
    Ok(())
}

/// `(1/√n) Σ_j τ^{jm} ⊗_i |(j + k_i) mod n⟩`, `τ = e^{2πi/n}`.
///
/// For two parties with shifts `[0, k]` this is the maximally entangled
/// basis state labelled `(m, k)`; with more parties it is the straightforward
/// extension with one offset per party.
pub fn target_state(n: usize, m: usize, shifts: &[usize]) -> Result<HybridState> {
    if n < 1 {
        return Err(Error::param("n", "dimension must be at least 1"));
    }
    if m >= n {
        return Err(Error::param("m", format!("phase index {m} not in [0, {}]", n - 1)));
    }
    check_shifts(n, shifts)?;
    let amps = phased_coeffs(n, m)
        .into_iter()
        .enumerate()
        .map(|(j, a)| (a, shifts.iter().map(|k| (j + k) % n).collect()));
    HybridState::from_party_amplitudes(vec![n; shifts.len()], amps, NormMode::GramExact)
}

/// Two-party shorthand for [`target_state`] with shifts `[0, k]`.
pub fn target_state_pair(n: usize, m: usize, k: usize) -> Result<HybridState> {
    target_state(n, m, &[0, k])
}

/// Output the protocol should produce for arbitrary inputs: the normalized
/// `Σ_j Π_i c_i[(j + k_i) mod n] ⊗_i |(j + k_i) mod n⟩`.
pub fn ideal_output(spec: &ProtocolSpec) -> Result<HybridState> {
    spec.validate()?;
    let n = spec.n;
    let amps = (0..n).map(|j| {
        let labels: Vec<usize> = spec.shifts.iter().map(|k| (j + k) % n).collect();
        let amp = labels.iter().zip(&spec.coeffs).map(|(&l, c)| c[l]).product::<C64>();
        (amp, labels)
    });
    let s = HybridState::from_party_amplitudes(vec![n; spec.parties()], amps, NormMode::GramExact)?;
    if s.is_empty() {
        return Err(Error::param("coeffs", "inputs leave no surviving branch"));
    }
    s.normalized()
}
