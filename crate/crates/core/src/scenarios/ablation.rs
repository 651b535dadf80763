use serde::Serialize;

use crate::analysis::{envelope_contrast, Envelope};
use crate::detection::EpsilonModel;
use crate::error::{Error, Result};
use crate::model::ChainGeometry;
use crate::obe::{ObeOptions, PulseSequence};
use crate::table::Table;

use super::config::{check_obe_size, ScenarioConfig};
use super::{epsilon_per_tau, sequence_ensemble};

/// Pattern index of "only the last atom recaptured".
const P_001: usize = 0b001;

/// One `P_001` curve and its contrast envelope.
#[derive(Debug, Clone, Serialize)]
pub struct AblationCurve {
    pub label: &'static str,
    pub values: Vec<f64>,
    pub envelope: Envelope,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationMetrics {
    pub compare_at_us: f64,
    pub static_envelope: f64,
    pub loss_only_envelope: f64,
    pub motion_only_envelope: f64,
    /// `|envelope(static) - envelope(loss only)|` at `compare_at_us`.
    pub loss_only_deviation: f64,
    pub motion_only_deviation: f64,
    pub low_temperature_compare_at_us: f64,
    pub low_temperature_uk: f64,
    pub low_temperature_envelope: f64,
    /// Envelope of the curve with both effects at the nominal temperature.
    pub nominal_envelope: f64,
    /// Trap depth of the recapture model used for the cold run, uK.
    pub trap_depth_uk: f64,
    pub n_realizations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationResult {
    pub taus: Vec<f64>,
    /// No motion, no loss.
    pub static_curve: AblationCurve,
    pub loss_only: AblationCurve,
    pub motion_only: AblationCurve,
    pub both: AblationCurve,
    /// Motion and recapture-model loss at the low temperature.
    pub low_temperature: AblationCurve,
    pub metrics: AblationMetrics,
}

impl AblationResult {
    pub fn curves(&self) -> [&AblationCurve; 5] {
        [&self.static_curve, &self.loss_only, &self.motion_only, &self.both, &self.low_temperature]
    }

    pub fn summary(&self) -> &AblationMetrics {
        &self.metrics
    }

    pub fn tables(&self) -> Vec<(String, Table)> {
        let mut series = Table::time_series(self.taus.clone());
        for c in self.curves() {
            series.push_column(format!("P_001_{}", c.label), c.values.clone());
        }
        let env_times = self.static_curve.envelope.times.clone();
        let mut env = Table::time_series(env_times);
        for c in self.curves() {
            env.push_column(format!("contrast_{}", c.label), c.envelope.contrast.clone());
        }
        vec![("p001".to_owned(), series), ("envelope".to_owned(), env)]
    }
}

fn envelope_at(env: &Envelope, t: f64) -> Result<f64> {
    let (first, last) = (env.times.first().copied(), env.times.last().copied());
    match (first, last) {
        (Some(a), Some(b)) if t >= a - 1e-9 && t <= b + 1e-9 => Ok(env.at(t).expect("non-empty envelope")),
        _ => Err(Error::Config(format!(
            "comparison time {t} us lies outside the envelope range; extend taus.max or shrink envelope_window"
        ))),
    }
}

/// `P_001` of the three-atom chain with atom loss and thermal motion
/// switched on separately, plus a colder run.
pub fn temperature_ablation(config: &ScenarioConfig) -> Result<AblationResult> {
    check_obe_size(3)?;
    let c = &config.temperature_ablation;
    let geometry = ChainGeometry::linear(3, c.spacing)?;
    let taus = c.taus.times()?;
    let nominal = &config.physics;
    let seq = PulseSequence::chain_with_first_excited(3, nominal, &config.timing);
    let options = ObeOptions { range: c.range, ..config.integrator };
    let seed = config.thermal_seed();

    let at_rest = {
        let mut p = nominal.clone();
        p.temperature = 0.0;
        sequence_ensemble(&seq, &geometry, &p, &taus, &options, 1, seed)?.0
    };
    let (moving, used) = sequence_ensemble(&seq, &geometry, nominal, &taus, &options, c.n_realizations, seed)?;
    let cold_params = {
        let mut p = nominal.clone();
        p.temperature = c.low_temperature;
        p
    };
    // same seeds: the cold draws are the nominal ones scaled down
    let (cold, _) = sequence_ensemble(&seq, &geometry, &cold_params, &taus, &options, c.n_realizations, seed)?;

    let eps_nominal = epsilon_per_tau(&config.epsilon.build(nominal, config.seed)?, &seq, &taus);
    let recapture = config.epsilon.recapture_model(nominal, config.seed)?;
    let eps_cold = epsilon_per_tau(&EpsilonModel::recapture(recapture.clone(), &cold_params), &seq, &taus);

    let curve = |label: &'static str, values: Vec<f64>| -> Result<AblationCurve> {
        let envelope = envelope_contrast(&taus, &values, c.envelope_window)?;
        Ok(AblationCurve { label, values, envelope })
    };
    let static_curve = curve("static", at_rest.pattern(P_001))?;
    let loss_only = curve("loss_only", at_rest.with_loss(&eps_nominal)?.pattern(P_001))?;
    let motion_only = curve("motion_only", moving.pattern(P_001))?;
    let both = curve("both", moving.with_loss(&eps_nominal)?.pattern(P_001))?;
    let low_temperature = curve("low_temperature", cold.with_loss(&eps_cold)?.pattern(P_001))?;

    let s = envelope_at(&static_curve.envelope, c.compare_at)?;
    let l = envelope_at(&loss_only.envelope, c.compare_at)?;
    let m = envelope_at(&motion_only.envelope, c.compare_at)?;
    let metrics = AblationMetrics {
        compare_at_us: c.compare_at,
        static_envelope: s,
        loss_only_envelope: l,
        motion_only_envelope: m,
        loss_only_deviation: (s - l).abs(),
        motion_only_deviation: (s - m).abs(),
        low_temperature_compare_at_us: c.low_temperature_compare_at,
        low_temperature_uk: c.low_temperature,
        low_temperature_envelope: envelope_at(&low_temperature.envelope, c.low_temperature_compare_at)?,
        nominal_envelope: envelope_at(&both.envelope, c.low_temperature_compare_at)?,
        trap_depth_uk: recapture.trap_depth,
        n_realizations: used,
    };
    Ok(AblationResult { taus, static_curve, loss_only, motion_only, both, low_temperature, metrics })
}
