//! End-to-end experiments assembled from the lower-level modules.
//!
//! Each scenario reads its settings from a [`ScenarioConfig`] section and
//! returns a typed result; [`run`] converts any of them into tables and a
//! JSON summary for serialization.

mod ablation;
mod calibration;
mod config;
mod long_chain;
mod three_chain;
mod two_atom;

use serde::Serialize;

use crate::detection::{apply_loss, pattern_label, EpsilonModel};
use crate::error::Result;
use crate::model::{ChainGeometry, PhysicalParams, Trajectories};
use crate::obe::{project_to_readout, run_sequence, ObeOptions, PulseSequence};
use crate::table::Table;
use crate::thermal::{monte_carlo, sample_thermal};

pub use ablation::{temperature_ablation, AblationResult};
pub use calibration::{calibrate_epsilon, CalibrationResult};
pub use config::{
    AblationConfig, CalibrationConfig, DistanceScanConfig, EpsilonBackend, EpsilonConfig, LongChainConfig,
    ScenarioConfig, ScenarioKind, TauGrid, ThreeChainConfig, TwoAtomConfig,
};
pub use long_chain::{long_chain, LongChainResult};
pub use three_chain::{three_chain, ThreeChainResult};
pub use two_atom::{distance_scan, two_atom_exchange, DistanceScanResult, NoiseStudy, TwoAtomResult};

/// Catalog entry.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioInfo {
    pub name: &'static str,
    /// The figure the scenario's output reproduces.
    pub figure: &'static str,
    pub description: &'static str,
    /// `(key, meaning)` for the scenario's configuration section.
    pub parameters: &'static [(&'static str, &'static str)],
}

const TAUS: (&str, &str) = ("taus.max, taus.step", "evolution-time grid, us");

/// All scenarios, sorted by name.
pub fn catalog() -> Vec<ScenarioInfo> {
    let mut out: Vec<ScenarioInfo> = ScenarioKind::ALL.iter().map(|k| info(*k)).collect();
    out.sort_by_key(|i| i.name);
    out
}

pub fn info(kind: ScenarioKind) -> ScenarioInfo {
    match kind {
        ScenarioKind::CalibrateEpsilon => ScenarioInfo {
            name: kind.name(),
            figure: "recapture probabilities P_111, two-, one- and zero-atom partitions versus release time",
            description: "fits the atom-loss probability to P_111(t) data and predicts the loss partitions",
            parameters: &[
                ("file", "two-column calibration table; synthetic data when unset"),
                ("column", "p111 or epsilon"),
                ("degree", "polynomial degree"),
                ("times.max, times.step", "release-time grid of the synthetic data, us"),
                ("synthetic_floor, synthetic_slope", "synthetic epsilon(t) = floor + slope t"),
            ],
        },
        ScenarioKind::DistanceScan => ScenarioInfo {
            name: kind.name(),
            figure: "interaction energy versus distance, log-log with 1/R^3 law",
            description: "two-atom exchange frequency over a list of distances and a power-law fit",
            parameters: &[
                ("distances", "interatomic distances, um (at least 3)"),
                TAUS,
                ("ideal", "perfect pulses, no damping, motion or loss"),
                ("n_realizations", "thermal draws per distance in full mode"),
                ("distance_noise", "relative rms error of each simulated distance"),
                ("noise_trials", "independent noisy scans"),
            ],
        },
        ScenarioKind::LongChain => ScenarioInfo {
            name: kind.name(),
            figure: "excitation transport along a 20-atom chain, per-site probability map",
            description: "single-excitation dynamics of a long chain with thermal motion and loss scaling",
            parameters: &[
                ("n_atoms", "chain length (at most 100)"),
                ("spacing", "nearest-neighbour distance, um"),
                TAUS,
                ("range", "full or nearest_neighbor"),
                ("ideal", "zero temperature and no loss"),
                ("n_realizations", "thermal draws"),
                ("dt", "propagation step, us"),
                ("baseline_until", "end of the pre-arrival window of the last site, us"),
            ],
        },
        ScenarioKind::TemperatureAblation => ScenarioInfo {
            name: kind.name(),
            figure: "P_001 of the three-atom chain with loss only, motion only and both",
            description: "separates the damping caused by atom loss from the dephasing caused by thermal motion",
            parameters: &[
                ("spacing", "nearest-neighbour distance, um"),
                TAUS,
                ("range", "full or nearest_neighbor"),
                ("n_realizations", "thermal draws"),
                ("low_temperature", "temperature of the cold comparison run, uK"),
                ("envelope_window", "contrast window, us"),
                ("compare_at, low_temperature_compare_at", "comparison times, us"),
            ],
        },
        ScenarioKind::ThreeChain => ScenarioInfo {
            name: kind.name(),
            figure: "spin transport in a three-atom chain: nearest-neighbour theory, full theory, full model",
            description: "three-atom excitation transfer, ideal XY dynamics or the full experimental sequence",
            parameters: &[
                ("spacing", "nearest-neighbour distance, um"),
                TAUS,
                ("range", "full or nearest_neighbor"),
                ("ideal", "closed-system dynamics of a perfectly prepared excitation"),
                ("n_realizations", "thermal draws in full mode"),
                ("detection", "apply atom loss in full mode"),
                ("envelope_window", "contrast window, us"),
            ],
        },
        ScenarioKind::TwoAtomExchange => ScenarioInfo {
            name: kind.name(),
            figure: "two-atom spin-exchange oscillations versus evolution time",
            description: "full sequence for two atoms and a sinusoidal fit of the exchange oscillation",
            parameters: &[
                ("distance", "interatomic distance, um, in [2, 100]"),
                TAUS,
                ("ideal", "perfect pulses, no damping, motion or loss"),
                ("n_realizations", "thermal draws in full mode"),
            ],
        },
    }
}

/// Observed recapture-pattern probabilities versus evolution time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternSeries {
    pub n_atoms: usize,
    pub taus: Vec<f64>,
    /// `values[k][pattern]` at `taus[k]`.
    pub values: Vec<Vec<f64>>,
    pub std_error: Vec<Vec<f64>>,
}

impl PatternSeries {
    /// Time series of one pattern.
    pub fn pattern(&self, pattern: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[pattern]).collect()
    }

    /// Largest deviation of the per-time pattern sum from one.
    pub fn max_sum_deviation(&self) -> f64 {
        self.values.iter().map(|row| (row.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Applies atom loss with a time-dependent probability.
    pub fn with_loss(&self, epsilon: &[f64]) -> Result<Self> {
        let values = self
            .values
            .iter()
            .zip(epsilon)
            .map(|(row, e)| apply_loss(row, self.n_atoms, *e))
            .collect::<Result<Vec<_>>>()?;
        // the loss map has non-negative entries, so pushing the standard
        // errors through it gives an upper bound on the observed ones
        let std_error = self
            .std_error
            .iter()
            .zip(epsilon)
            .map(|(row, e)| loss_map(row, self.n_atoms, *e))
            .collect();
        Ok(Self { n_atoms: self.n_atoms, taus: self.taus.clone(), values, std_error })
    }

    pub fn table(&self) -> Table {
        let mut t = Table::time_series(self.taus.clone());
        for p in 0..1usize << self.n_atoms {
            t.push_column(format!("P_{}", pattern_label(p, self.n_atoms)), self.pattern(p));
        }
        t
    }

    pub fn stderr_table(&self) -> Table {
        let mut t = Table::time_series(self.taus.clone());
        for p in 0..1usize << self.n_atoms {
            t.push_column(
                format!("P_{}", pattern_label(p, self.n_atoms)),
                self.std_error.iter().map(|row| row[p]).collect(),
            );
        }
        t
    }
}

/// The loss channel applied to a non-normalized vector.
fn loss_map(row: &[f64], n_atoms: usize, epsilon: f64) -> Vec<f64> {
    let mut out = row.to_vec();
    for bit in 0..n_atoms {
        let mask = 1usize << bit;
        for p in 0..out.len() {
            if p & mask != 0 {
                let moved = epsilon * out[p];
                out[p ^ mask] += moved;
                out[p] -= moved;
            }
        }
    }
    out
}

/// Ensemble of the full sequence over thermal draws, before atom loss.
/// At zero temperature a single run stands in for the ensemble.
pub(crate) fn sequence_ensemble(
    sequence: &PulseSequence,
    geometry: &ChainGeometry,
    params: &PhysicalParams,
    taus: &[f64],
    options: &ObeOptions,
    n_realizations: usize,
    base_seed: u64,
) -> Result<(PatternSeries, usize)> {
    let n = geometry.n_atoms();
    let width = 1usize << n;
    let single = |trajectories: &Trajectories| -> Result<Vec<f64>> {
        let pops = run_sequence(sequence, geometry, params, trajectories, taus, options)?;
        let mut flat = Vec::with_capacity(taus.len() * width);
        for levels in &pops.values {
            flat.extend(project_to_readout(levels, n, sequence.convention)?);
        }
        Ok(flat)
    };
    let (mean, stderr, used) = if params.temperature <= 0.0 {
        (single(&Trajectories::at_rest(n))?, vec![0.0; taus.len() * width], 1)
    } else {
        let ens = monte_carlo(|seed| single(&sample_thermal(params, n, seed).trajectories), n_realizations, base_seed)?;
        (ens.mean, ens.std_error, ens.n_realizations)
    };
    let rows = |v: Vec<f64>| v.chunks(width).map(<[f64]>::to_vec).collect();
    Ok((PatternSeries { n_atoms: n, taus: taus.to_vec(), values: rows(mean), std_error: rows(stderr) }, used))
}

/// Loss probability of each sample, at the total sequence duration.
pub(crate) fn epsilon_per_tau(model: &EpsilonModel, sequence: &PulseSequence, taus: &[f64]) -> Vec<f64> {
    taus.iter().map(|&tau| model.epsilon(sequence.total_duration(tau))).collect()
}

/// Tables and summary of any scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub kind: ScenarioKind,
    /// `(file stem, table)`.
    pub tables: Vec<(String, Table)>,
    pub summary: serde_json::Value,
}

/// Runs the scenario selected by `config`.
pub fn run(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    config.validate()?;
    let kind = config.kind()?;
    let (tables, summary) = match kind {
        ScenarioKind::TwoAtomExchange => {
            let r = two_atom_exchange(config)?;
            (r.tables(), to_json(&r.summary()))
        }
        ScenarioKind::DistanceScan => {
            let r = distance_scan(config)?;
            (r.tables(), to_json(&r.summary()))
        }
        ScenarioKind::ThreeChain => {
            let r = three_chain(config)?;
            (r.tables(), to_json(&r.summary()))
        }
        ScenarioKind::TemperatureAblation => {
            let r = temperature_ablation(config)?;
            (r.tables(), to_json(&r.summary()))
        }
        ScenarioKind::LongChain => {
            let r = long_chain(config)?;
            (r.tables(), to_json(&r.summary()))
        }
        ScenarioKind::CalibrateEpsilon => {
            let r = calibrate_epsilon(config)?;
            (r.tables(), to_json(&r.summary()))
        }
    };
    Ok(ScenarioOutput { kind, tables, summary })
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("summaries serialize")
}
