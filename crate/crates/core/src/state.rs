//! Hybrid states: finite superpositions of discrete register labels tensored
//! with coherent states on a set of qubus beams.
//!
//! Coherent beams are never expanded in a Fock basis. Every element used by
//! the qubus circuits maps coherent states to coherent states, so a term only
//! needs to carry the complex amplitude of each beam. Overlaps between
//! coherent states are evaluated in log form ([`LogComplex`]) because
//! `⟨0|α⟩` at `|α| = 500` is `e^{-125000}`, far below the smallest `f64`.
//!
//! Label slots inside a [`Term`] follow the order declared by the
//! [`RegisterLayout`]: one slot per party qudit, then the ancilla spatial
//! mode (if any), then the preparation polarization (if any).
//!
//! Besides its physical amplitude, every beam carries a *branch tag*: the
//! amplitude the beam would have if each injected beam had amplitude 1. Tags
//! undergo exactly the same linear optics as the amplitudes, so they label the
//! phase class of a term even in the degenerate `α = 0` case where all the
//! physical amplitudes coincide.

use std::{
    cmp::Ordering,
    collections::{BTreeMap, HashMap},
    f64::consts::PI,
    ops::Mul,
};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance (absolute near zero) under which two beam amplitudes
/// are considered the same coherent state.
pub const MERGE_TOL: f64 = 1e-12;

/// Terms with `|amp|` below this are dropped by [`canonicalize`].
pub const DROP_TOL: f64 = 1e-14;

/// Tolerance on `‖ψ‖² = 1` for operations that require a normalized input.
pub const NORM_TOL: f64 = 1e-9;

/// Polarization label of a horizontally polarized photon.
pub const H: usize = 0;
/// Polarization label of a vertically polarized photon.
pub const V: usize = 1;

/// `true` when two coherent amplitudes agree within [`MERGE_TOL`].
pub fn amplitudes_match(a: C64, b: C64) -> bool {
    let scale = 1f64.max(a.norm()).max(b.norm());
    (a - b).norm() <= MERGE_TOL * scale
}

/// A complex number stored as `(ln|z|, arg z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogComplex {
    pub log_magnitude: f64,
    pub phase: f64,
}

impl LogComplex {
    pub const ONE: LogComplex = LogComplex { log_magnitude: 0.0, phase: 0.0 };
    pub const ZERO: LogComplex = LogComplex { log_magnitude: f64::NEG_INFINITY, phase: 0.0 };

    pub fn new(log_magnitude: f64, phase: f64) -> Self {
        Self { log_magnitude, phase: wrap_phase(phase) }
    }

    pub fn from_complex(z: C64) -> Self {
        if z == C64::new(0.0, 0.0) {
            Self::ZERO
        } else {
            Self::new(z.norm().ln(), z.arg())
        }
    }

    pub fn to_complex(self) -> C64 {
        C64::from_polar(self.log_magnitude.exp(), self.phase)
    }

    pub fn magnitude(self) -> f64 {
        self.log_magnitude.exp()
    }

    /// `ln |z|²`.
    pub fn log_norm_sqr(self) -> f64 {
        2.0 * self.log_magnitude
    }

    pub fn is_zero(self) -> bool {
        self.log_magnitude == f64::NEG_INFINITY
    }

    pub fn conj(self) -> Self {
        Self::new(self.log_magnitude, -self.phase)
    }
}

impl Mul for LogComplex {
    type Output = LogComplex;

    fn mul(self, rhs: LogComplex) -> LogComplex {
        if self.is_zero() || rhs.is_zero() {
            return LogComplex::ZERO;
        }
        LogComplex::new(self.log_magnitude + rhs.log_magnitude, self.phase + rhs.phase)
    }
}

fn wrap_phase(phase: f64) -> f64 {
    if (-PI..=PI).contains(&phase) {
        phase
    } else {
        let w = (phase + PI).rem_euclid(2.0 * PI) - PI;
        if w == -PI { PI } else { w }
    }
}

/// Inner product `⟨a|b⟩ = exp(-|a|²/2 - |b|²/2 + a*b)` of two coherent states.
///
/// The magnitude is evaluated as `exp(-|a-b|²/2)`, which is algebraically the
/// same but does not lose digits to cancellation when `|a|` is large.
pub fn coherent_overlap(a: C64, b: C64) -> LogComplex {
    let log_magnitude = -0.5 * (a - b).norm_sqr();
    let phase = (a.conj() * b).im;
    LogComplex::new(log_magnitude, phase)
}

/// How cross terms between different coherent-state tuples enter norms and
/// inner products.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// Full coherent-state Gram matrix.
    #[default]
    GramExact,
    /// Distinct qubus tuples are treated as orthogonal.
    OrthogonalApprox,
}

impl std::str::FromStr for NormMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gram_exact" | "gram-exact" => Ok(NormMode::GramExact),
            "orthogonal_approx" | "orthogonal-approx" => Ok(NormMode::OrthogonalApprox),
            other => Err(format!("unknown norm mode '{other}' (expected gram_exact or orthogonal_approx)")),
        }
    }
}

impl NormMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NormMode::GramExact => "gram_exact",
            NormMode::OrthogonalApprox => "orthogonal_approx",
        }
    }
}

/// Polarization register of the single photon while the ancilla is being
/// prepared. Single-photon rotations act on the photon when it sits in
/// `work_mode`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepRegister {
    pub work_mode: usize,
}

/// Declares the discrete registers and number of qubus beams of a state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    party_dims: Vec<usize>,
    ancilla_modes: usize,
    prep: Option<PrepRegister>,
    qubus_count: usize,
}

impl RegisterLayout {
    pub fn new(
        party_dims: Vec<usize>,
        ancilla_modes: usize,
        prep: Option<PrepRegister>,
        qubus_count: usize,
    ) -> Result<Self> {
        if let Some(i) = party_dims.iter().position(|&d| d == 0) {
            return Err(Error::param("party_dims", format!("party {i} has dimension 0")));
        }
        if let Some(p) = prep {
            if ancilla_modes == 0 {
                return Err(Error::param("prep_registers", "preparation register needs ancilla spatial modes"));
            }
            if p.work_mode >= ancilla_modes {
                return Err(Error::ModeOutOfRange { mode: p.work_mode, modes: ancilla_modes });
            }
        }
        Ok(Self { party_dims, ancilla_modes, prep, qubus_count })
    }

    /// Layout holding only party registers.
    pub fn parties(party_dims: Vec<usize>) -> Result<Self> {
        Self::new(party_dims, 0, None, 0)
    }

    pub fn party_dims(&self) -> &[usize] {
        &self.party_dims
    }

    pub fn party_count(&self) -> usize {
        self.party_dims.len()
    }

    pub fn ancilla_modes(&self) -> usize {
        self.ancilla_modes
    }

    pub fn prep(&self) -> Option<PrepRegister> {
        self.prep
    }

    pub fn qubus_count(&self) -> usize {
        self.qubus_count
    }

    pub fn has_ancilla(&self) -> bool {
        self.ancilla_modes > 0
    }

    pub fn label_count(&self) -> usize {
        self.party_dims.len() + usize::from(self.has_ancilla()) + usize::from(self.prep.is_some())
    }

    /// Exclusive upper bound of each label slot.
    pub fn label_ranges(&self) -> Vec<usize> {
        let mut out = self.party_dims.clone();
        if self.has_ancilla() {
            out.push(self.ancilla_modes);
        }
        if self.prep.is_some() {
            out.push(2);
        }
        out
    }

    pub fn party_slot(&self, party: usize) -> Result<usize> {
        if party < self.party_dims.len() {
            Ok(party)
        } else {
            Err(Error::PartyOutOfRange { index: party, count: self.party_dims.len() })
        }
    }

    pub fn ancilla_slot(&self) -> Result<usize> {
        if self.has_ancilla() { Ok(self.party_dims.len()) } else { Err(Error::NoAncilla) }
    }

    pub fn polarization_slot(&self) -> Result<usize> {
        match self.prep {
            Some(_) => Ok(self.party_dims.len() + usize::from(self.has_ancilla())),
            None => Err(Error::NoPrepRegister),
        }
    }

    pub fn check_beam(&self, beam: usize) -> Result<()> {
        if beam < self.qubus_count {
            Ok(())
        } else {
            Err(Error::BeamOutOfRange { index: beam, count: self.qubus_count })
        }
    }

    pub(crate) fn with_party(&self, dim: usize) -> Self {
        let mut out = self.clone();
        out.party_dims.push(dim);
        out
    }

    pub(crate) fn with_beams(&self, extra: usize) -> Self {
        let mut out = self.clone();
        out.qubus_count += extra;
        out
    }

    pub(crate) fn without_beam(&self) -> Self {
        let mut out = self.clone();
        out.qubus_count -= 1;
        out
    }

    pub(crate) fn without_ancilla(&self) -> Self {
        let mut out = self.clone();
        out.ancilla_modes = 0;
        out.prep = None;
        out
    }

    pub(crate) fn without_prep(&self) -> Self {
        let mut out = self.clone();
        out.prep = None;
        out
    }

    pub(crate) fn with_permuted_parties(&self, order: &[usize]) -> Self {
        let mut out = self.clone();
        out.party_dims = order.iter().map(|&i| self.party_dims[i]).collect();
        out
    }
}

/// One qubus beam of a term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Beam {
    /// Coherent amplitude, in units of √photons.
    pub amplitude: C64,
    /// Amplitude the beam would have had if every injected beam were `|1⟩`.
    pub tag: C64,
}

impl Beam {
    pub fn injected(amplitude: C64) -> Self {
        Self { amplitude, tag: C64::new(1.0, 0.0) }
    }

    /// Multiplies both amplitude and tag by `factor`.
    pub fn scaled(self, factor: C64) -> Self {
        Self { amplitude: self.amplitude * factor, tag: self.tag * factor }
    }

    pub fn same_state(&self, other: &Beam) -> bool {
        amplitudes_match(self.amplitude, other.amplitude)
    }

    pub fn same_branch(&self, other: &Beam) -> bool {
        amplitudes_match(self.tag, other.tag)
    }
}

fn beams_mergeable(a: &[Beam], b: &[Beam]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_state(y) && x.same_branch(y))
}

fn beam_states_match(a: &[Beam], b: &[Beam]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_state(y))
}

/// Amplitude × register labels × qubus beams.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub amp: C64,
    pub labels: Vec<usize>,
    pub qubus: Vec<Beam>,
}

impl Term {
    pub fn new(amp: C64, labels: Vec<usize>, qubus: Vec<Beam>) -> Self {
        Self { amp, labels, qubus }
    }

    fn sort_cmp(&self, other: &Term) -> Ordering {
        self.labels.cmp(&other.labels).then_with(|| {
            for (a, b) in self.qubus.iter().zip(&other.qubus) {
                let ord = a.amplitude.re.total_cmp(&b.amplitude.re)
                    .then(a.amplitude.im.total_cmp(&b.amplitude.im))
                    .then(a.tag.re.total_cmp(&b.tag.re))
                    .then(a.tag.im.total_cmp(&b.tag.im));
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            Ordering::Equal
        })
    }
}

/// A finite superposition of [`Term`]s over a fixed [`RegisterLayout`].
#[derive(Clone, Debug, PartialEq)]
pub struct HybridState {
    layout: RegisterLayout,
    terms: Vec<Term>,
    norm_mode: NormMode,
}

impl HybridState {
    /// Builds a canonical state after checking every term against `layout`.
    pub fn new(layout: RegisterLayout, terms: Vec<Term>, norm_mode: NormMode) -> Result<Self> {
        let ranges = layout.label_ranges();
        for t in &terms {
            if t.labels.len() != ranges.len() {
                return Err(Error::LayoutMismatch(format!(
                    "term has {} labels, layout declares {}",
                    t.labels.len(),
                    ranges.len()
                )));
            }
            if let Some((slot, (&l, &r))) = t.labels.iter().zip(&ranges).enumerate().find(|(_, (l, r))| l >= r) {
                return Err(Error::LayoutMismatch(format!("label {l} in slot {slot} exceeds range {r}")));
            }
            if t.qubus.len() != layout.qubus_count {
                return Err(Error::LayoutMismatch(format!(
                    "term has {} beams, layout declares {}",
                    t.qubus.len(),
                    layout.qubus_count
                )));
            }
            if !t.amp.is_finite() || t.qubus.iter().any(|b| !b.amplitude.is_finite() || !b.tag.is_finite()) {
                return Err(Error::param("amp", "non-finite amplitude"));
            }
        }
        Ok(Self::from_parts(layout, terms, norm_mode))
    }

    /// Party-only state from `(amplitude, labels)` pairs.
    pub fn from_party_amplitudes(
        party_dims: Vec<usize>,
        amps: impl IntoIterator<Item = (C64, Vec<usize>)>,
        norm_mode: NormMode,
    ) -> Result<Self> {
        let layout = RegisterLayout::parties(party_dims)?;
        let terms = amps.into_iter().map(|(a, l)| Term::new(a, l, Vec::new())).collect();
        Self::new(layout, terms, norm_mode)
    }

    /// Trusted constructor for crate-internal transforms; canonicalizes.
    pub(crate) fn from_parts(layout: RegisterLayout, terms: Vec<Term>, norm_mode: NormMode) -> Self {
        Self { layout, terms: canonical_terms(terms), norm_mode }
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn norm_mode(&self) -> NormMode {
        self.norm_mode
    }

    pub fn with_norm_mode(mut self, mode: NormMode) -> Self {
        self.norm_mode = mode;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// Squared norm in this state's [`NormMode`].
    pub fn norm_sq(&self) -> Result<f64> {
        state_norm_sq(self)
    }

    /// `⟨self|other⟩`. Both states must share a layout.
    pub fn inner(&self, other: &HybridState) -> Result<C64> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch(format!("{:?} vs {:?}", self.layout, other.layout)));
        }
        Ok(gram_inner(&self.terms, &other.terms, self.norm_mode))
    }

    pub fn scaled(&self, factor: C64) -> HybridState {
        let terms = self.terms.iter().map(|t| Term { amp: t.amp * factor, ..t.clone() }).collect();
        Self::from_parts(self.layout.clone(), terms, self.norm_mode)
    }

    pub fn normalized(&self) -> Result<HybridState> {
        let n = self.norm_sq()?;
        if n <= 0.0 {
            return Err(Error::Invariant("cannot normalize a zero-norm state".into()));
        }
        Ok(self.scaled(C64::new(1.0 / n.sqrt(), 0.0)))
    }

    /// Keeps only the terms for which `keep` holds. `None` when nothing survives.
    pub fn project(&self, keep: impl Fn(&Term) -> bool) -> Option<HybridState> {
        let terms: Vec<Term> = self.terms.iter().filter(|t| keep(t)).cloned().collect();
        if terms.is_empty() {
            None
        } else {
            Some(Self::from_parts(self.layout.clone(), terms, self.norm_mode))
        }
    }

    /// Sum of the amplitudes of all terms carrying `labels`.
    pub fn amplitude_of(&self, labels: &[usize]) -> C64 {
        self.terms.iter().filter(|t| t.labels == labels).map(|t| t.amp).sum()
    }

    /// Tensors a new party register in state `Σ_j coeffs[j] |j⟩` onto every term.
    pub fn attach_party(&self, coeffs: &[C64]) -> Result<HybridState> {
        if coeffs.is_empty() {
            return Err(Error::param("coeffs", "empty coefficient vector"));
        }
        let slot = self.layout.party_count();
        let layout = self.layout.with_party(coeffs.len());
        let mut terms = Vec::with_capacity(self.terms.len() * coeffs.len());
        for t in &self.terms {
            for (j, &c) in coeffs.iter().enumerate() {
                let mut labels = t.labels.clone();
                labels.insert(slot, j);
                terms.push(Term::new(t.amp * c, labels, t.qubus.clone()));
            }
        }
        Ok(Self::from_parts(layout, terms, self.norm_mode))
    }

    /// Appends freshly injected coherent beams to every term.
    pub fn append_beams(&self, amplitudes: &[C64]) -> HybridState {
        let layout = self.layout.with_beams(amplitudes.len());
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut qubus = t.qubus.clone();
                qubus.extend(amplitudes.iter().map(|&a| Beam::injected(a)));
                Term { qubus, ..t.clone() }
            })
            .collect();
        Self::from_parts(layout, terms, self.norm_mode)
    }

    /// Removes a beam that is in the same coherent state in every term, i.e.
    /// a beam that factors out of the superposition.
    pub fn discard_beam(&self, beam: usize) -> Result<HybridState> {
        self.layout.check_beam(beam)?;
        if let Some(first) = self.terms.first() {
            let reference = first.qubus[beam];
            if self.terms.iter().any(|t| !t.qubus[beam].same_state(&reference)) {
                return Err(Error::BeamNotSeparable(beam));
            }
        }
        Ok(self.remove_beam_unchecked(beam))
    }

    pub(crate) fn remove_beam_unchecked(&self, beam: usize) -> HybridState {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut qubus = t.qubus.clone();
                qubus.remove(beam);
                Term { qubus, ..t.clone() }
            })
            .collect();
        Self::from_parts(self.layout.without_beam(), terms, self.norm_mode)
    }

    /// Drops the preparation polarization register once every term carries
    /// the same polarization.
    pub fn release_prep(&self) -> Result<HybridState> {
        let slot = self.layout.polarization_slot()?;
        if let Some(first) = self.terms.first() {
            let pol = first.labels[slot];
            if self.terms.iter().any(|t| t.labels[slot] != pol) {
                return Err(Error::Invariant("polarization is not uniform across spatial modes".into()));
            }
        }
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut labels = t.labels.clone();
                labels.remove(slot);
                Term { labels, ..t.clone() }
            })
            .collect();
        Ok(Self::from_parts(self.layout.without_prep(), terms, self.norm_mode))
    }

    /// Reorders the party registers: new party `i` is old party `order[i]`.
    pub fn permute_parties(&self, order: &[usize]) -> Result<HybridState> {
        let m = self.layout.party_count();
        let mut seen = vec![false; m];
        if order.len() != m || order.iter().any(|&i| i >= m || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::param("order", format!("{order:?} is not a permutation of {m} parties")));
        }
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut labels = t.labels.clone();
                for (new, &old) in order.iter().enumerate() {
                    labels[new] = t.labels[old];
                }
                Term { labels, ..t.clone() }
            })
            .collect();
        Ok(Self::from_parts(self.layout.with_permuted_parties(order), terms, self.norm_mode))
    }

    /// Applies `f` to every term and re-canonicalizes under `layout`.
    pub(crate) fn remap(&self, layout: RegisterLayout, f: impl FnMut(&Term) -> Vec<Term>) -> HybridState {
        let terms = self.terms.iter().flat_map(f).collect();
        Self::from_parts(layout, terms, self.norm_mode)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let pair = |z: C64| [z.re, z.im];
        let terms: Vec<TermJson> = self
            .terms
            .iter()
            .map(|t| TermJson {
                amp: pair(t.amp),
                labels: t.labels.clone(),
                qubus: t.qubus.iter().map(|b| pair(b.amplitude)).collect(),
                branch: t.qubus.iter().map(|b| pair(b.tag)).collect(),
            })
            .collect();
        serde_json::json!({
            "layout": self.layout,
            "norm_mode": self.norm_mode,
            "terms": terms,
        })
    }
}

#[derive(Serialize)]
struct TermJson {
    amp: [f64; 2],
    labels: Vec<usize>,
    qubus: Vec<[f64; 2]>,
    branch: Vec<[f64; 2]>,
}

/// Merges mergeable terms, drops negligible ones and sorts deterministically.
pub fn canonicalize(state: &HybridState) -> HybridState {
    HybridState {
        layout: state.layout.clone(),
        terms: canonical_terms(state.terms.clone()),
        norm_mode: state.norm_mode,
    }
}

fn canonical_terms(terms: Vec<Term>) -> Vec<Term> {
    let mut groups: BTreeMap<Vec<usize>, Vec<Term>> = BTreeMap::new();
    for t in terms {
        let group = groups.entry(t.labels.clone()).or_default();
        match group.iter_mut().find(|g| beams_mergeable(&g.qubus, &t.qubus)) {
            Some(existing) => existing.amp += t.amp,
            None => group.push(t),
        }
    }
    let mut out: Vec<Term> = groups
        .into_values()
        .flatten()
        .filter(|t| t.amp.norm() >= DROP_TOL)
        .collect();
    out.sort_by(Term::sort_cmp);
    out
}

fn qubus_overlap(a: &[Beam], b: &[Beam], mode: NormMode) -> C64 {
    match mode {
        NormMode::GramExact => a
            .iter()
            .zip(b)
            .fold(LogComplex::ONE, |acc, (x, y)| acc * coherent_overlap(x.amplitude, y.amplitude))
            .to_complex(),
        NormMode::OrthogonalApprox => {
            if beam_states_match(a, b) { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
        }
    }
}

fn gram_inner(bra: &[Term], ket: &[Term], mode: NormMode) -> C64 {
    let mut by_labels: HashMap<&[usize], Vec<&Term>> = HashMap::new();
    for t in ket {
        by_labels.entry(t.labels.as_slice()).or_default().push(t);
    }
    let mut acc = C64::new(0.0, 0.0);
    for b in bra {
        if let Some(kets) = by_labels.get(b.labels.as_slice()) {
            for k in kets {
                acc += b.amp.conj() * k.amp * qubus_overlap(&b.qubus, &k.qubus, mode);
            }
        }
    }
    acc
}

/// `⟨ψ|ψ⟩` including coherent-state cross terms as dictated by the state's
/// [`NormMode`].
pub fn state_norm_sq(state: &HybridState) -> Result<f64> {
    if state.terms.is_empty() {
        return Err(Error::EmptyState);
    }
    let z = gram_inner(&state.terms, &state.terms, state.norm_mode);
    let scale = z.norm().max(1.0);
    if z.im.abs() > 1e-12 * scale || z.re < -1e-12 * scale {
        return Err(Error::Invariant(format!("norm² is not a non-negative real: {z}")));
    }
    Ok(z.re.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn one_beam_layout() -> RegisterLayout {
        RegisterLayout::new(vec![3], 0, None, 1).unwrap()
    }

    #[test]
    fn overlap_identity_is_one() {
        let a = c(3.0, -1.5);
        let o = coherent_overlap(a, a);
        assert_eq!(o.log_magnitude, 0.0);
        assert_eq!(o.phase, 0.0);
    }

    #[test]
    fn overlap_with_vacuum_stays_representable() {
        let o = coherent_overlap(c(0.0, 0.0), c(500.0, 0.0));
        assert_eq!(o.log_magnitude, -125000.0);
        assert_eq!(o.phase, 0.0);
        assert_eq!(o.to_complex(), c(0.0, 0.0));
    }

    #[test]
    fn overlap_of_rotated_bright_beam() {
        let alpha = c(500.0, 0.0);
        let theta: f64 = 0.01;
        let o = coherent_overlap(alpha, alpha * C64::from_polar(1.0, theta));
        let expected = -4.0 * 500.0_f64.powi(2) * (theta / 2.0).sin().powi(2);
        assert_abs_diff_eq!(o.log_norm_sqr(), expected, epsilon = 1e-9);
        assert_abs_diff_eq!(o.log_norm_sqr(), -25.0, epsilon = 1e-2);
        assert!((o.log_norm_sqr().exp() - 1.39e-11).abs() < 0.01e-11);
    }

    #[test]
    fn log_complex_round_trip() {
        for z in [c(1.0, 0.0), c(-2.5, 0.25), c(0.0, -1e-300), c(0.0, 0.0)] {
            let back = LogComplex::from_complex(z).to_complex();
            assert!((back - z).norm() <= 1e-13 * z.norm(), "{z} -> {back}");
        }
        let tiny = LogComplex::new(-125000.0, 1.0);
        assert_eq!((tiny * tiny.conj()).log_magnitude, -250000.0);
    }

    #[test]
    fn single_term_norm() {
        let layout = one_beam_layout();
        let s = HybridState::new(
            layout,
            vec![Term::new(c(1.0 / 3f64.sqrt(), 0.0), vec![1], vec![Beam::injected(c(2.0, 1.0))])],
            NormMode::GramExact,
        )
        .unwrap();
        assert_abs_diff_eq!(s.norm_sq().unwrap(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn identical_terms_merge_before_norm() {
        let s = HybridState::from_party_amplitudes(
            vec![2],
            vec![(c(0.5, 0.0), vec![0]), (c(0.5, 0.0), vec![0])],
            NormMode::GramExact,
        )
        .unwrap();
        assert_eq!(s.len(), 1);
        assert_abs_diff_eq!(s.norm_sq().unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn merge_sums_amplitudes() {
        let s = HybridState::from_party_amplitudes(
            vec![2],
            vec![(c(0.3, 0.0), vec![1]), (c(0.4, 0.0), vec![1])],
            NormMode::GramExact,
        )
        .unwrap();
        assert_eq!(s.terms().len(), 1);
        assert_abs_diff_eq!(s.terms()[0].amp.re, 0.7, epsilon = 1e-15);
    }

    #[test]
    fn zero_amplitude_dropped() {
        let s = HybridState::from_party_amplitudes(
            vec![2],
            vec![(c(0.0, 0.0), vec![1]), (c(1.0, 0.0), vec![0])],
            NormMode::GramExact,
        )
        .unwrap();
        assert_eq!(s.terms().len(), 1);
        assert_eq!(s.terms()[0].labels, vec![0]);
    }

    #[test]
    fn nearly_equal_beams_merge_and_canonicalize_is_idempotent() {
        let a = c(1.0, 0.5);
        let terms = vec![
            Term::new(c(0.5, 0.0), vec![0], vec![Beam::injected(a)]),
            Term::new(c(0.5, 0.0), vec![0], vec![Beam::injected(a + c(1e-15, 0.0))]),
            Term::new(c(0.1, 0.0), vec![2], vec![Beam::injected(-a)]),
        ];
        let s = HybridState::new(one_beam_layout(), terms, NormMode::GramExact).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(canonicalize(&s), s);
        assert_eq!(canonicalize(&canonicalize(&s)), canonicalize(&s));
    }

    #[test]
    fn empty_state_norm_errors() {
        let s = HybridState::new(one_beam_layout(), vec![], NormMode::GramExact).unwrap();
        assert_eq!(state_norm_sq(&s), Err(Error::EmptyState));
    }

    #[test]
    fn labels_are_range_checked() {
        let r = HybridState::from_party_amplitudes(vec![2], vec![(c(1.0, 0.0), vec![2])], NormMode::GramExact);
        assert!(matches!(r, Err(Error::LayoutMismatch(_))));
    }

    #[test]
    fn cross_terms_distinguish_norm_modes() {
        // |0⟩(|β⟩ + |-β⟩): the cat-state norm 2 + 2e^{-2|β|²} only shows up in gram mode.
        let beta = c(0.5, 0.0);
        let terms = vec![
            Term::new(c(1.0, 0.0), vec![0], vec![Beam::injected(beta)]),
            Term::new(c(1.0, 0.0), vec![0], vec![Beam::injected(-beta)]),
        ];
        let gram = HybridState::new(one_beam_layout(), terms, NormMode::GramExact).unwrap();
        let orth = gram.clone().with_norm_mode(NormMode::OrthogonalApprox);
        assert_abs_diff_eq!(gram.norm_sq().unwrap(), 2.0 + 2.0 * (-0.5f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(orth.norm_sq().unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn discard_requires_common_beam() {
        let terms = vec![
            Term::new(c(0.6, 0.0), vec![0], vec![Beam::injected(c(1.0, 0.0))]),
            Term::new(c(0.8, 0.0), vec![1], vec![Beam::injected(c(2.0, 0.0))]),
        ];
        let s = HybridState::new(one_beam_layout(), terms, NormMode::GramExact).unwrap();
        assert_eq!(s.discard_beam(0), Err(Error::BeamNotSeparable(0)));
        assert!(matches!(s.discard_beam(3), Err(Error::BeamOutOfRange { .. })));
    }

    #[test]
    fn attach_and_permute_parties() {
        let s = HybridState::from_party_amplitudes(vec![2], vec![(c(1.0, 0.0), vec![1])], NormMode::GramExact)
            .unwrap()
            .attach_party(&[c(0.6, 0.0), c(0.0, 0.0), c(0.8, 0.0)])
            .unwrap();
        assert_eq!(s.layout().party_dims(), &[2, 3]);
        assert_abs_diff_eq!(s.amplitude_of(&[1, 2]).re, 0.8);
        let p = s.permute_parties(&[1, 0]).unwrap();
        assert_eq!(p.layout().party_dims(), &[3, 2]);
        assert_abs_diff_eq!(p.amplitude_of(&[2, 1]).re, 0.8);
        assert!(s.permute_parties(&[0, 0]).is_err());
    }

    #[test]
    fn json_has_documented_shape() {
        let s = HybridState::new(
            one_beam_layout(),
            vec![Term::new(c(1.0, 0.0), vec![2], vec![Beam::injected(c(3.0, -1.0))])],
            NormMode::GramExact,
        )
        .unwrap();
        let v = s.to_json();
        assert_eq!(v["terms"][0]["amp"], serde_json::json!([1.0, 0.0]));
        assert_eq!(v["terms"][0]["labels"], serde_json::json!([2]));
        assert_eq!(v["terms"][0]["qubus"], serde_json::json!([[3.0, -1.0]]));
        assert_eq!(v["norm_mode"], "gram_exact");
    }
}
