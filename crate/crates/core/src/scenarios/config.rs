use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detection::{self, EpsilonModel, TableColumn};
use crate::error::{Error, Result};
use crate::model::{self, ChainGeometry, PhysicalParams, RangeMode};
use crate::obe::{ObeOptions, SequenceTiming, MAX_OBE_ATOMS};
use crate::thermal::{derive_seed, RecaptureModel};

/// Seed streams derived from the master seed.
pub(crate) const STREAM_THERMAL: u64 = 1;
pub(crate) const STREAM_DISTANCE_NOISE: u64 = 2;
pub(crate) const STREAM_RECAPTURE: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    CalibrateEpsilon,
    DistanceScan,
    LongChain,
    TemperatureAblation,
    ThreeChain,
    TwoAtomExchange,
}

impl ScenarioKind {
    /// Sorted by name.
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::CalibrateEpsilon,
        ScenarioKind::DistanceScan,
        ScenarioKind::LongChain,
        ScenarioKind::TemperatureAblation,
        ScenarioKind::ThreeChain,
        ScenarioKind::TwoAtomExchange,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::CalibrateEpsilon => "calibrate-epsilon",
            ScenarioKind::DistanceScan => "distance-scan",
            ScenarioKind::LongChain => "long-chain",
            ScenarioKind::TemperatureAblation => "temperature-ablation",
            ScenarioKind::ThreeChain => "three-chain",
            ScenarioKind::TwoAtomExchange => "two-atom-exchange",
        }
    }

    /// Name of the configuration section holding the scenario's settings.
    pub fn section(self) -> &'static str {
        match self {
            ScenarioKind::CalibrateEpsilon => "calibrate_epsilon",
            ScenarioKind::DistanceScan => "distance_scan",
            ScenarioKind::LongChain => "long_chain",
            ScenarioKind::TemperatureAblation => "temperature_ablation",
            ScenarioKind::ThreeChain => "three_chain",
            ScenarioKind::TwoAtomExchange => "two_atom_exchange",
        }
    }

    pub fn has_ideal_mode(self) -> bool {
        matches!(
            self,
            ScenarioKind::DistanceScan | ScenarioKind::LongChain | ScenarioKind::ThreeChain | ScenarioKind::TwoAtomExchange
        )
    }

    pub fn has_range(self) -> bool {
        matches!(self, ScenarioKind::LongChain | ScenarioKind::TemperatureAblation | ScenarioKind::ThreeChain)
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s || k.section() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!("unknown scenario {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Evolution-time grid `0, step, 2 step, ..., max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauGrid {
    pub max: f64,
    pub step: f64,
}

impl TauGrid {
    pub const fn new(max: f64, step: f64) -> Self {
        Self { max, step }
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0 && self.max >= 0.0 && self.max.is_finite()) {
            return Err(Error::Config(format!("invalid time grid: max {} us, step {} us", self.max, self.step)));
        }
        let n = (self.max / self.step + 1e-9).floor() as usize;
        if n > 1_000_000 {
            return Err(Error::Config(format!("time grid has {n} points; at most 10^6 allowed")));
        }
        Ok((0..=n).map(|k| k as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonBackend {
    /// No atom loss.
    None,
    /// Interpolated calibration table.
    #[default]
    Table,
    /// Polynomial fit of the calibration table.
    Polynomial,
    /// Release-recapture Monte Carlo.
    RecaptureMc,
}

/// Atom-loss model used by full-model scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonConfig {
    pub backend: EpsilonBackend,
    /// Two-column calibration file; the built-in table when unset.
    pub file: Option<PathBuf>,
    pub column: TableColumn,
    /// Polynomial degree of the `polynomial` backend.
    pub degree: usize,
    /// Trap depth of the `recapture_mc` backend, uK. Calibrated against
    /// `calibration_time` / `calibration_target` when unset.
    pub trap_depth: Option<f64>,
    /// Loss probability without flight.
    pub floor: f64,
    pub calibration_time: f64,
    pub calibration_target: f64,
    pub n_mc: usize,
}

impl Default for EpsilonConfig {
    fn default() -> Self {
        Self {
            backend: EpsilonBackend::Table,
            file: None,
            column: TableColumn::P111,
            degree: 2,
            trap_depth: None,
            floor: 0.01,
            calibration_time: 7.0,
            calibration_target: 0.2,
            n_mc: 20_000,
        }
    }
}

impl EpsilonConfig {
    fn calibration_text(&self) -> Result<String> {
        match &self.file {
            None => Ok(detection::DEFAULT_CALIBRATION.to_owned()),
            Some(path) => std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source }),
        }
    }

    /// Release-recapture model; the trap depth is calibrated at the
    /// temperature of `params` when not given.
    pub fn recapture_model(&self, params: &PhysicalParams, master_seed: u64) -> Result<RecaptureModel> {
        let seed = derive_seed(master_seed, STREAM_RECAPTURE);
        match self.trap_depth {
            Some(trap_depth) => Ok(RecaptureModel { trap_depth, floor: self.floor, n_mc: self.n_mc, seed }),
            None => RecaptureModel::calibrate(
                params,
                self.calibration_time,
                self.calibration_target,
                self.floor,
                self.n_mc,
                seed,
            ),
        }
    }

    pub fn build(&self, params: &PhysicalParams, master_seed: u64) -> Result<EpsilonModel> {
        let model = match self.backend {
            EpsilonBackend::None => EpsilonModel::zero(),
            EpsilonBackend::Table => detection::load_calibration(&self.calibration_text()?, self.column)?,
            EpsilonBackend::Polynomial => {
                let rows = detection::parse_two_column(&self.calibration_text()?)?;
                let p111 = match self.column {
                    TableColumn::P111 => rows,
                    TableColumn::Epsilon => rows.into_iter().map(|(t, e)| (t, (1.0 - e).powi(3))).collect(),
                };
                detection::fit_epsilon(&p111, self.degree)?.model
            }
            EpsilonBackend::RecaptureMc => EpsilonModel::recapture(self.recapture_model(params, master_seed)?, params),
        };
        for d in model.diagnostics() {
            log::warn!("epsilon model: {d}");
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoAtomConfig {
    /// Interatomic distance, um.
    pub distance: f64,
    pub taus: TauGrid,
    /// Perfect instantaneous preparation, no damping, no motion, no loss.
    pub ideal: bool,
    pub n_realizations: usize,
}

impl Default for TwoAtomConfig {
    fn default() -> Self {
        Self { distance: 30.0, taus: TauGrid::new(10.0, 0.05), ideal: false, n_realizations: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceScanConfig {
    pub distances: Vec<f64>,
    pub taus: TauGrid,
    pub ideal: bool,
    pub n_realizations: usize,
    /// Relative rms error of each simulated distance; the fit uses the
    /// nominal values.
    pub distance_noise: f64,
    /// Independent noisy scans used to estimate the exponent scatter.
    pub noise_trials: usize,
}

impl Default for DistanceScanConfig {
    fn default() -> Self {
        Self {
            distances: vec![20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0],
            taus: TauGrid::new(10.0, 0.05),
            ideal: true,
            n_realizations: 100,
            distance_noise: 0.0,
            noise_trials: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThreeChainConfig {
    pub spacing: f64,
    pub taus: TauGrid,
    pub range: RangeMode,
    /// Closed-system dynamics of a perfectly prepared excitation.
    pub ideal: bool,
    pub n_realizations: usize,
    /// Apply atom loss in full mode.
    pub detection: bool,
    /// Width of the sliding window of the contrast envelope, us.
    pub envelope_window: f64,
}

impl Default for ThreeChainConfig {
    fn default() -> Self {
        Self {
            spacing: 20.0,
            taus: TauGrid::new(7.0, 0.05),
            range: RangeMode::Full,
            ideal: false,
            n_realizations: 100,
            detection: true,
            envelope_window: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub spacing: f64,
    pub taus: TauGrid,
    pub range: RangeMode,
    pub n_realizations: usize,
    /// Temperature of the cold comparison run, uK. Its loss uses the
    /// release-recapture model.
    pub low_temperature: f64,
    pub envelope_window: f64,
    /// Evolution time at which the loss-only and motion-only curves are
    /// compared, us.
    pub compare_at: f64,
    /// Evolution time at which the cold run is compared, us.
    pub low_temperature_compare_at: f64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            spacing: 20.0,
            taus: TauGrid::new(7.0, 0.05),
            range: RangeMode::Full,
            n_realizations: 100,
            low_temperature: 10.0,
            envelope_window: 1.0,
            compare_at: 6.0,
            low_temperature_compare_at: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LongChainConfig {
    pub n_atoms: usize,
    pub spacing: f64,
    pub taus: TauGrid,
    pub range: RangeMode,
    /// Zero temperature and no loss.
    pub ideal: bool,
    pub n_realizations: usize,
    /// Propagation step, us.
    pub dt: f64,
    /// Evolution times up to this value count as before the excitation
    /// reaches the last site, us.
    pub baseline_until: f64,
}

impl Default for LongChainConfig {
    fn default() -> Self {
        Self {
            n_atoms: 20,
            spacing: 20.0,
            taus: TauGrid::new(10.0, 0.05),
            range: RangeMode::Full,
            ideal: false,
            n_realizations: 100,
            dt: 0.0025,
            baseline_until: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Measured `P_111(t)` (or epsilon) table; synthetic data when unset.
    pub file: Option<PathBuf>,
    pub column: TableColumn,
    pub degree: usize,
    /// Release times of the synthetic data set, us.
    pub times: TauGrid,
    /// Synthetic ground truth `epsilon(t) = floor + slope t`.
    pub synthetic_floor: f64,
    pub synthetic_slope: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            file: None,
            column: TableColumn::P111,
            degree: 2,
            times: TauGrid::new(7.0, 0.25),
            synthetic_floor: 0.01,
            synthetic_slope: 0.027,
        }
    }
}

/// Everything a scenario run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Option<ScenarioKind>,
    /// Master seed; every random stream derives from it.
    pub seed: u64,
    pub physics: PhysicalParams,
    pub timing: SequenceTiming,
    pub integrator: ObeOptions,
    pub epsilon: EpsilonConfig,
    pub two_atom_exchange: TwoAtomConfig,
    pub distance_scan: DistanceScanConfig,
    pub three_chain: ThreeChainConfig,
    pub temperature_ablation: AblationConfig,
    pub long_chain: LongChainConfig,
    pub calibrate_epsilon: CalibrationConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            seed: 1,
            physics: PhysicalParams::default(),
            timing: SequenceTiming::default(),
            integrator: ObeOptions::default(),
            epsilon: EpsilonConfig::default(),
            two_atom_exchange: TwoAtomConfig::default(),
            distance_scan: DistanceScanConfig::default(),
            three_chain: ThreeChainConfig::default(),
            temperature_ablation: AblationConfig::default(),
            long_chain: LongChainConfig::default(),
            calibrate_epsilon: CalibrationConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn for_scenario(kind: ScenarioKind) -> Self {
        Self { scenario: Some(kind), ..Self::default() }
    }

    pub fn kind(&self) -> Result<ScenarioKind> {
        self.scenario.ok_or_else(|| Error::Config("no scenario selected".into()))
    }

    /// Seed of the thermal Monte-Carlo stream.
    pub fn thermal_seed(&self) -> u64 {
        derive_seed(self.seed, STREAM_THERMAL)
    }

    fn check_geometry(&self, geometry: &ChainGeometry) -> Result<()> {
        let (warnings, diags): (Vec<_>, Vec<_>) = model::validate(geometry, &self.physics)
            .into_iter()
            .partition(|d| d.kind == model::DiagnosticKind::NonMonotonicChain);
        for w in warnings {
            log::warn!("{w}");
        }
        if diags.is_empty() {
            return Ok(());
        }
        let text: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        Err(Error::Config(text.join("; ")))
    }

    /// Checks the settings the selected scenario depends on.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{}.{name} must be positive, got {v}", kind.section())))
            }
        };
        let realizations = |n: usize| {
            if n >= 1 {
                Ok(())
            } else {
                Err(Error::Config(format!("{}.n_realizations must be at least 1", kind.section())))
            }
        };
        if !(self.integrator.max_step_phase > 0.0 && self.integrator.dt_max > 0.0) {
            return Err(Error::Config("integrator step bounds must be positive".into()));
        }
        match kind {
            ScenarioKind::TwoAtomExchange => {
                let c = &self.two_atom_exchange;
                if !(2.0..=100.0).contains(&c.distance) {
                    return Err(Error::Config(format!(
                        "two_atom_exchange.distance must lie in [2, 100] um, got {}",
                        c.distance
                    )));
                }
                c.taus.times()?;
                realizations(c.n_realizations)?;
                self.check_geometry(&ChainGeometry::linear(2, c.distance)?)
            }
            ScenarioKind::DistanceScan => {
                let c = &self.distance_scan;
                if c.distances.len() < 3 {
                    return Err(Error::Config(format!(
                        "distance_scan.distances needs at least 3 values for a power-law fit, got {}",
                        c.distances.len()
                    )));
                }
                if let Some(r) = c.distances.iter().find(|r| !(2.0..=100.0).contains(*r)) {
                    return Err(Error::Config(format!("distance_scan.distances: {r} um is outside [2, 100]")));
                }
                if !(0.0..0.5).contains(&c.distance_noise) {
                    return Err(Error::Config("distance_scan.distance_noise must lie in [0, 0.5)".into()));
                }
                c.taus.times()?;
                realizations(c.n_realizations)?;
                self.check_geometry(&ChainGeometry::linear(2, c.distances[0])?)
            }
            ScenarioKind::ThreeChain => {
                let c = &self.three_chain;
                positive("spacing", c.spacing)?;
                positive("envelope_window", c.envelope_window)?;
                c.taus.times()?;
                realizations(c.n_realizations)?;
                self.check_geometry(&ChainGeometry::linear(3, c.spacing)?)
            }
            ScenarioKind::TemperatureAblation => {
                let c = &self.temperature_ablation;
                positive("spacing", c.spacing)?;
                positive("envelope_window", c.envelope_window)?;
                if c.low_temperature < 0.0 || self.physics.temperature <= 0.0 {
                    return Err(Error::Config(
                        "temperature_ablation needs physics.temperature > 0 and low_temperature >= 0".into(),
                    ));
                }
                c.taus.times()?;
                realizations(c.n_realizations)?;
                self.check_geometry(&ChainGeometry::linear(3, c.spacing)?)
            }
            ScenarioKind::LongChain => {
                let c = &self.long_chain;
                if !(1..=100).contains(&c.n_atoms) {
                    return Err(Error::Config(format!("long_chain.n_atoms must lie in [1, 100], got {}", c.n_atoms)));
                }
                positive("spacing", c.spacing)?;
                positive("dt", c.dt)?;
                c.taus.times()?;
                realizations(c.n_realizations)?;
                self.check_geometry(&ChainGeometry::linear(c.n_atoms, c.spacing)?)
            }
            ScenarioKind::CalibrateEpsilon => {
                let c = &self.calibrate_epsilon;
                c.times.times()?;
                Ok(())
            }
        }
    }
}

pub(crate) fn check_obe_size(n: usize) -> Result<()> {
    if n > MAX_OBE_ATOMS {
        return Err(Error::Config(format!("the master-equation path supports at most {MAX_OBE_ATOMS} atoms")));
    }
    Ok(())
}
