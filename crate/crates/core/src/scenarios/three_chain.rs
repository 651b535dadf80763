use serde::Serialize;

use crate::analysis::{beat_spectrum, envelope_contrast, Envelope};
use crate::detection::EpsilonModel;
use crate::error::Result;
use crate::model::{ChainGeometry, RangeMode};
use crate::obe::{ObeOptions, PulseSequence};
use crate::table::Table;
use crate::xy::{build_coupling_matrix, eigenmodes, propagate, SpinState};

use super::config::{check_obe_size, ScenarioConfig};
use super::{epsilon_per_tau, sequence_ensemble, PatternSeries};

/// Pattern index of "only the first atom recaptured".
const P_100: usize = 0b100;

#[derive(Debug, Clone, Serialize)]
pub struct ThreeChainResult {
    pub ideal: bool,
    pub range: RangeMode,
    pub spacing: f64,
    pub taus: Vec<f64>,
    /// Ideal mode: `[P_udd, P_dud, P_ddu]` versus time.
    pub site_populations: Option<[Vec<f64>; 3]>,
    /// Full mode: observed recapture patterns.
    pub patterns: Option<PatternSeries>,
    /// Single-excitation spectrum at rest, MHz.
    pub eigenvalues: Vec<f64>,
    pub beat_frequencies: Vec<f64>,
    /// Contrast envelope of `P_udd` (ideal) or `P_100` (full).
    pub envelope: Envelope,
    pub n_realizations: usize,
    pub epsilon_span: (f64, f64),
}

#[derive(Serialize)]
pub struct ThreeChainSummary<'a> {
    pub ideal: bool,
    pub range: RangeMode,
    pub spacing_um: f64,
    pub eigenvalues_mhz: &'a [f64],
    pub beat_frequencies_mhz: &'a [f64],
    pub envelope_min: f64,
    pub envelope_min_at_us: f64,
    pub envelope_max: f64,
    pub n_realizations: usize,
    pub epsilon_first: f64,
    pub epsilon_last: f64,
    pub max_pattern_sum_deviation: Option<f64>,
}

impl ThreeChainResult {
    /// `P_udd` in ideal mode, `P_100` in full mode.
    pub fn first_site_series(&self) -> Vec<f64> {
        match (&self.site_populations, &self.patterns) {
            (Some(p), _) => p[0].clone(),
            (None, Some(p)) => p.pattern(P_100),
            (None, None) => unreachable!("a three-chain result holds one of the two series"),
        }
    }

    pub fn summary(&self) -> ThreeChainSummary<'_> {
        let (k_min, min) = self
            .envelope
            .contrast
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, f64::NAN));
        ThreeChainSummary {
            ideal: self.ideal,
            range: self.range,
            spacing_um: self.spacing,
            eigenvalues_mhz: &self.eigenvalues,
            beat_frequencies_mhz: &self.beat_frequencies,
            envelope_min: min,
            envelope_min_at_us: self.envelope.times.get(k_min).copied().unwrap_or(f64::NAN),
            envelope_max: self.envelope.contrast.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            n_realizations: self.n_realizations,
            epsilon_first: self.epsilon_span.0,
            epsilon_last: self.epsilon_span.1,
            max_pattern_sum_deviation: self.patterns.as_ref().map(PatternSeries::max_sum_deviation),
        }
    }

    pub fn tables(&self) -> Vec<(String, Table)> {
        let mut out = Vec::new();
        if let Some([a, b, c]) = &self.site_populations {
            out.push((
                "populations".to_owned(),
                Table::time_series(self.taus.clone())
                    .with_column("P_udd", a.clone())
                    .with_column("P_dud", b.clone())
                    .with_column("P_ddu", c.clone()),
            ));
        }
        if let Some(p) = &self.patterns {
            out.push(("patterns".to_owned(), p.table()));
            if self.n_realizations > 1 {
                out.push(("patterns_stderr".to_owned(), p.stderr_table()));
            }
        }
        out.push((
            "envelope".to_owned(),
            Table::time_series(self.envelope.times.clone()).with_column("contrast", self.envelope.contrast.clone()),
        ));
        out
    }
}

/// Three-atom chain with the excitation starting on the first atom.
pub fn three_chain(config: &ScenarioConfig) -> Result<ThreeChainResult> {
    let c = &config.three_chain;
    let geometry = ChainGeometry::linear(3, c.spacing)?;
    let taus = c.taus.times()?;
    let matrix = build_coupling_matrix(&geometry, &config.physics, c.range)?;
    let modes = eigenmodes(&matrix);
    let beat_frequencies = beat_spectrum(&modes.values)?;

    let (site_populations, patterns, n_realizations, epsilon_span) = if c.ideal {
        let pops = propagate(&matrix, &SpinState::excited_at(3, 0), &taus)?;
        (Some([pops.site(0), pops.site(1), pops.site(2)]), None, 1, (0.0, 0.0))
    } else {
        check_obe_size(3)?;
        let params = &config.physics;
        let seq = PulseSequence::chain_with_first_excited(3, params, &config.timing);
        let options = ObeOptions { range: c.range, ..config.integrator };
        let (truth, used) =
            sequence_ensemble(&seq, &geometry, params, &taus, &options, c.n_realizations, config.thermal_seed())?;
        let model = if c.detection { config.epsilon.build(params, config.seed)? } else { EpsilonModel::zero() };
        let eps = epsilon_per_tau(&model, &seq, &taus);
        let span = (eps[0], eps[eps.len() - 1]);
        (None, Some(truth.with_loss(&eps)?), used, span)
    };

    let mut result = ThreeChainResult {
        ideal: c.ideal,
        range: c.range,
        spacing: c.spacing,
        taus,
        site_populations,
        patterns,
        eigenvalues: modes.values,
        beat_frequencies,
        envelope: Envelope { times: Vec::new(), contrast: Vec::new() },
        n_realizations,
        epsilon_span,
    };
    result.envelope = envelope_contrast(&result.taus, &result.first_site_series(), c.envelope_window)?;
    Ok(result)
}
