use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PhysicalParams;

use super::basis::Level;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    /// Two-photon `g <-> up` drive with detunings; effective damping active.
    Optical,
    /// `up <-> down` drive, uniform over the array.
    Microwave,
    /// Interactions only.
    FreeEvolution,
}

/// One step of a pulse sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSegment {
    pub kind: SegmentKind,
    /// us, strictly positive.
    pub duration: f64,
    /// `true` marks atoms shifted out of resonance by the addressing beam.
    /// Empty means no atom is addressed.
    #[serde(default)]
    pub addressing_mask: Vec<bool>,
}

impl PulseSegment {
    pub fn new(kind: SegmentKind, duration: f64) -> Self {
        Self { kind, duration, addressing_mask: Vec::new() }
    }

    pub fn addressed(mut self, mask: Vec<bool>) -> Self {
        self.addressing_mask = mask;
        self
    }

    #[inline]
    pub fn is_addressed(&self, atom: usize) -> bool {
        self.addressing_mask.get(atom).copied().unwrap_or(false)
    }

    pub fn optical_active(&self) -> bool {
        self.kind == SegmentKind::Optical
    }

    pub fn microwave_active(&self) -> bool {
        self.kind == SegmentKind::Microwave
    }
}

/// How final level populations map to recaptured (1) / lost (0) atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutConvention {
    /// A de-excitation pulse already ran: `g` is recaptured, both Rydberg
    /// levels are lost.
    #[default]
    AfterDeexcitation,
    /// A perfect de-excitation maps `up -> g` first: `g` and `up` are
    /// recaptured, `down` is lost.
    IdealDeexcitation,
}

/// Pulse durations. `None` derives a pi pulse from the Rabi frequency.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceTiming {
    pub optical_pulse: Option<f64>,
    pub microwave_pulse: Option<f64>,
}

impl SequenceTiming {
    /// `1 / (2 Omega_opt)` with the mean optical Rabi frequency.
    pub fn optical(&self, params: &PhysicalParams) -> f64 {
        self.optical_pulse.unwrap_or_else(|| {
            let v = params.omega_opt.values();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            0.5 / mean
        })
    }

    pub fn microwave(&self, params: &PhysicalParams) -> f64 {
        self.microwave_pulse.unwrap_or(0.5 / params.omega_mw)
    }
}

/// Preparation pulses, a variable-length evolution window of length `tau`,
/// then readout pulses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub initial: Vec<Level>,
    pub preparation: Vec<PulseSegment>,
    /// Kind of the evolution window (normally free evolution).
    pub evolution: SegmentKind,
    pub readout: Vec<PulseSegment>,
    pub convention: ReadoutConvention,
}

impl PulseSequence {
    /// Starts in `initial` and only evolves; perfect readout.
    pub fn ideal(initial: Vec<Level>) -> Self {
        Self {
            initial,
            preparation: Vec::new(),
            evolution: SegmentKind::FreeEvolution,
            readout: Vec::new(),
            convention: ReadoutConvention::IdealDeexcitation,
        }
    }

    /// Two atoms, prepared in `|up down>`: address atom 1 and excite atom 2,
    /// transfer atom 2 to `down`, excite atom 1, evolve, de-excite.
    pub fn two_atom_exchange(params: &PhysicalParams, timing: &SequenceTiming) -> Self {
        Self::chain_with_first_excited(2, params, timing)
    }

    /// Same protocol for a chain: atoms 2..N end in `down`, atom 1 in `up`.
    pub fn chain_with_first_excited(n: usize, params: &PhysicalParams, timing: &SequenceTiming) -> Self {
        let opt = timing.optical(params);
        let mw = timing.microwave(params);
        let mut mask = vec![false; n];
        mask[0] = true;
        Self {
            initial: vec![Level::Ground; n],
            preparation: vec![
                PulseSegment::new(SegmentKind::Optical, opt).addressed(mask),
                PulseSegment::new(SegmentKind::Microwave, mw),
                PulseSegment::new(SegmentKind::Optical, opt),
            ],
            evolution: SegmentKind::FreeEvolution,
            readout: vec![PulseSegment::new(SegmentKind::Optical, opt)],
            convention: ReadoutConvention::AfterDeexcitation,
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.initial.len()
    }

    pub fn preparation_duration(&self) -> f64 {
        self.preparation.iter().map(|s| s.duration).sum()
    }

    pub fn readout_duration(&self) -> f64 {
        self.readout.iter().map(|s| s.duration).sum()
    }

    /// The full ordered segment list for an evolution time `tau`.
    pub fn segments_for(&self, tau: f64) -> Vec<PulseSegment> {
        let mut out = self.preparation.clone();
        if tau > 0.0 {
            out.push(PulseSegment::new(self.evolution, tau));
        }
        out.extend(self.readout.iter().cloned());
        out
    }

    pub fn total_duration(&self, tau: f64) -> f64 {
        self.segments_for(tau).iter().map(|s| s.duration).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for s in self.preparation.iter().chain(&self.readout) {
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(Error::Config(format!("segment duration {} must be positive", s.duration)));
            }
            if !s.addressing_mask.is_empty() && s.addressing_mask.len() != self.n_atoms() {
                return Err(Error::Config(format!(
                    "addressing mask has {} entries for {} atoms",
                    s.addressing_mask.len(),
                    self.n_atoms()
                )));
            }
        }
        Ok(())
    }
}
