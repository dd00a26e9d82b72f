//! Optical elements acting on [`HybridState`]s.
//!
//! Qubus elements (cross-phase modulation, phase rotation, 50:50 beam
//! splitter) act on the coherent amplitudes and branch tags of each term.
//! Single-photon elements (polarization rotations, PBS, Fourier LOMI) act on
//! the discrete labels.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64 as C64;

use crate::{
    error::{Error, Result},
    state::{Beam, HybridState, Term, V},
};

/// Phase picked up by one qubus beam from a cross-Kerr coupling.
///
/// A party qudit in label `j` of dimension `d` has `d - 1 - j` horizontal
/// photons in its upper rail, each contributing `per_upper_photon`. The
/// ancilla contributes `spatial_phase[s]` when it occupies spatial mode `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseMap {
    pub per_upper_photon: f64,
    pub spatial_phase: Vec<f64>,
    pub target_beam: usize,
}

impl PhaseMap {
    /// The map used by every entangling stage: `θ` per upper photon and
    /// `((s + shift) mod n)·θ` for ancilla mode `s`.
    pub fn shifted(n: usize, shift: usize, theta: f64, target_beam: usize) -> Self {
        Self {
            per_upper_photon: theta,
            spatial_phase: (0..n).map(|s| ((s + shift) % n) as f64 * theta).collect(),
            target_beam,
        }
    }
}

/// A 2×2 unitary acting on the `(H, V)` polarization of a single photon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unitary2 {
    m: [[C64; 2]; 2],
}

impl Unitary2 {
    pub fn new(m: [[C64; 2]; 2]) -> Result<Self> {
        let mut dev: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let uu: C64 = (0..2).map(|k| m[k][i].conj() * m[k][j]).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((uu - id).norm());
            }
        }
        if dev.is_nan() || dev > 1e-12 {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { m })
    }

    /// `U_j` of the single-photon qudit cascade:
    /// `[[√((n-j-1)/(n-j)), -1/√(n-j)], [1/√(n-j), √((n-j-1)/(n-j))]]`.
    pub fn cascade_splitter(n: usize, j: usize) -> Result<Self> {
        if j >= n {
            return Err(Error::param("j", format!("cascade step {j} needs j < n = {n}")));
        }
        let r = (n - j) as f64;
        let keep = ((r - 1.0) / r).sqrt();
        let out = 1.0 / r.sqrt();
        Self::new([
            [C64::new(keep, 0.0), C64::new(-out, 0.0)],
            [C64::new(out, 0.0), C64::new(keep, 0.0)],
        ])
    }

    pub fn pauli_x() -> Self {
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        Self { m: [[z, o], [o, z]] }
    }

    pub fn matrix(&self) -> [[C64; 2]; 2] {
        self.m
    }
}

fn check_party(state: &HybridState, party: Option<usize>) -> Result<Option<(usize, usize)>> {
    party
        .map(|p| {
            let slot = state.layout().party_slot(p)?;
            Ok((slot, state.layout().party_dims()[p]))
        })
        .transpose()
}

/// Cross-phase modulation of `map.target_beam` by a party qudit (if any) and
/// the ancilla spatial mode.
pub fn apply_xpm(state: &HybridState, party: Option<usize>, map: &PhaseMap) -> Result<HybridState> {
    let layout = state.layout();
    layout.check_beam(map.target_beam)?;
    let party = check_party(state, party)?;
    if map.spatial_phase.len() != layout.ancilla_modes() {
        return Err(Error::param(
            "spatial_phase",
            format!("{} entries for {} ancilla modes", map.spatial_phase.len(), layout.ancilla_modes()),
        ));
    }
    if !map.per_upper_photon.is_finite() || map.spatial_phase.iter().any(|p| !p.is_finite()) {
        return Err(Error::param("phase_map", "non-finite phase"));
    }
    let ancilla = layout.ancilla_slot().ok();
    Ok(state.remap(layout.clone(), |t| {
        let mut phase = 0.0;
        if let Some((slot, dim)) = party {
            phase += (dim - 1 - t.labels[slot]) as f64 * map.per_upper_photon;
        }
        if let Some(slot) = ancilla {
            phase += map.spatial_phase[t.labels[slot]];
        }
        let mut t = t.clone();
        t.qubus[map.target_beam] = t.qubus[map.target_beam].scaled(C64::from_polar(1.0, phase));
        vec![t]
    }))
}

/// Phase-space rotation `β → β e^{iφ}` of one beam.
pub fn apply_qubus_phase(state: &HybridState, beam: usize, phi: f64) -> Result<HybridState> {
    state.layout().check_beam(beam)?;
    let factor = C64::from_polar(1.0, phi);
    Ok(state.remap(state.layout().clone(), |t| {
        let mut t = t.clone();
        t.qubus[beam] = t.qubus[beam].scaled(factor);
        vec![t]
    }))
}

/// Balanced beam splitter `(a, b) → ((a - b)/√2, (a + b)/√2)`.
pub fn apply_bs_5050(state: &HybridState, beams: (usize, usize)) -> Result<HybridState> {
    let (i, j) = beams;
    if i == j {
        return Err(Error::IdenticalBeams(i));
    }
    state.layout().check_beam(i)?;
    state.layout().check_beam(j)?;
    let mix = |a: C64, b: C64| ((a - b) * FRAC_1_SQRT_2, (a + b) * FRAC_1_SQRT_2);
    Ok(state.remap(state.layout().clone(), |t| {
        let mut t = t.clone();
        let (a, b) = (t.qubus[i], t.qubus[j]);
        let (amp_i, amp_j) = mix(a.amplitude, b.amplitude);
        let (tag_i, tag_j) = mix(a.tag, b.tag);
        t.qubus[i] = Beam { amplitude: amp_i, tag: tag_i };
        t.qubus[j] = Beam { amplitude: amp_j, tag: tag_j };
        vec![t]
    }))
}

/// Rotates the polarization of the preparation photon while it sits in the
/// work mode. Terms with the photon elsewhere are untouched.
pub fn apply_su2(state: &HybridState, u: &Unitary2) -> Result<HybridState> {
    let layout = state.layout();
    let work = layout.prep().ok_or(Error::NoPrepRegister)?.work_mode;
    let pol = layout.polarization_slot()?;
    let spatial = layout.ancilla_slot()?;
    let m = u.matrix();
    Ok(state.remap(layout.clone(), |t| {
        if t.labels[spatial] != work {
            return vec![t.clone()];
        }
        let p = t.labels[pol];
        (0..2)
            .map(|q| {
                let mut labels = t.labels.clone();
                labels[pol] = q;
                Term::new(t.amp * m[q][p], labels, t.qubus.clone())
            })
            .collect()
    }))
}

/// Polarizing beam splitter joining `from_mode` and `new_mode`: H is
/// transmitted, V is reflected into the other port. In the preparation
/// cascade `new_mode` is empty, so this just moves V out of `from_mode`.
pub fn apply_pbs(state: &HybridState, from_mode: usize, new_mode: usize) -> Result<HybridState> {
    let layout = state.layout();
    let pol = layout.polarization_slot()?;
    let spatial = layout.ancilla_slot()?;
    let modes = layout.ancilla_modes();
    for mode in [from_mode, new_mode] {
        if mode >= modes {
            return Err(Error::ModeOutOfRange { mode, modes });
        }
    }
    if from_mode == new_mode {
        return Err(Error::param("new_mode", "PBS output mode must differ from its input mode"));
    }
    Ok(state.remap(layout.clone(), |t| {
        let mut t = t.clone();
        if t.labels[pol] == V {
            if t.labels[spatial] == from_mode {
                t.labels[spatial] = new_mode;
            } else if t.labels[spatial] == new_mode {
                t.labels[spatial] = from_mode;
            }
        }
        vec![t]
    }))
}

fn fourier(state: &HybridState, sign: f64) -> Result<HybridState> {
    let layout = state.layout();
    let slot = layout.ancilla_slot()?;
    let n = layout.ancilla_modes();
    let norm = 1.0 / (n as f64).sqrt();
    Ok(state.remap(layout.clone(), |t| {
        let j = t.labels[slot];
        (0..n)
            .map(|k| {
                let mut labels = t.labels.clone();
                labels[slot] = k;
                // reduce j·k mod n before scaling so the phase stays exact for large labels
                let phase = sign * 2.0 * PI * ((j * k) % n) as f64 / n as f64;
                Term::new(t.amp * C64::from_polar(norm, phase), labels, t.qubus.clone())
            })
            .collect()
    }))
}

/// n-port LOMI: `|j⟩_s → (1/√n) Σ_k e^{2πijk/n} |k⟩_s`.
pub fn apply_fourier_lomi(state: &HybridState) -> Result<HybridState> {
    fourier(state, 1.0)
}

/// Inverse of [`apply_fourier_lomi`].
pub fn apply_inverse_fourier_lomi(state: &HybridState) -> Result<HybridState> {
    fourier(state, -1.0)
}
