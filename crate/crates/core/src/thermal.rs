//! Thermal position/velocity sampling, free flight and seeded Monte-Carlo
//! averaging.
//!
//! Realizations are keyed by seeds derived from a master seed. They may run
//! on any number of threads; results are always reduced in ascending seed
//! order, so the ensemble mean is bit-identical across worker counts and
//! seed permutations.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PhysicalParams, Trajectories};
use crate::units::{thermal_velocity_sq, BOLTZMANN};

/// splitmix64 step; derives independent per-realization seeds.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-axis rms displacement (um) and velocity (um/us) at the params' temperature.
pub fn thermal_widths(params: &PhysicalParams) -> ([f64; 3], f64) {
    let sigma_v = thermal_velocity_sq(params.temperature.max(0.0), params.mass).sqrt();
    let axes = params.trap_frequencies();
    let sigma_r = axes.map(|w| if w > 0.0 { sigma_v / w } else { 0.0 });
    (sigma_r, sigma_v)
}

/// One thermal draw of initial displacements and velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalSample {
    pub trajectories: Trajectories,
    pub seed: u64,
}

pub fn sample_thermal(params: &PhysicalParams, n_atoms: usize, seed: u64) -> ThermalSample {
    if params.temperature <= 0.0 {
        return ThermalSample { trajectories: Trajectories::at_rest(n_atoms), seed };
    }
    let (sigma_r, sigma_v) = thermal_widths(params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut displacements = Vec::with_capacity(n_atoms);
    let mut velocities = Vec::with_capacity(n_atoms);
    for _ in 0..n_atoms {
        displacements.push(Vector3::new(sigma_r[0] * gauss(), sigma_r[1] * gauss(), sigma_r[2] * gauss()));
        velocities.push(Vector3::new(sigma_v * gauss(), sigma_v * gauss(), sigma_v * gauss()));
    }
    ThermalSample { trajectories: Trajectories { displacements, velocities }, seed }
}

/// Displacements `r0 + v0 t` of every atom.
pub fn free_flight(sample: &ThermalSample, t: f64) -> Vec<Vector3<f64>> {
    sample.trajectories.displacements_at(t)
}

/// Mean and standard error of a flattened per-realization output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub n_realizations: usize,
}

/// Runs `run(seed)` for `n` seeds derived from `base_seed`.
pub fn monte_carlo<F>(run: F, n: usize, base_seed: u64) -> Result<EnsembleResult>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    let seeds: Vec<u64> = (0..n as u64).map(|k| derive_seed(base_seed, k)).collect();
    monte_carlo_with_seeds(run, &seeds)
}

/// Runs `run(seed)` for explicit seeds; reduction follows ascending seed order.
pub fn monte_carlo_with_seeds<F>(run: F, seeds: &[u64]) -> Result<EnsembleResult>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    if seeds.is_empty() {
        return Err(Error::Config("Monte-Carlo needs at least one realization".into()));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    let outputs: Vec<Result<Vec<f64>>> = sorted.par_iter().map(|&s| run(s)).collect();
    let mut rows = Vec::with_capacity(outputs.len());
    for (seed, out) in sorted.iter().zip(outputs) {
        rows.push(out.map_err(|e| Error::Realization { seed: *seed, source: Box::new(e) })?);
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Contract("realizations returned outputs of different length".into()));
    }

    // shifted two-pass sums: identical realizations give exactly zero spread
    let n = rows.len() as f64;
    let pivot = &rows[0];
    let mut sum = vec![0.0; width];
    let mut sum_sq = vec![0.0; width];
    for r in &rows {
        for k in 0..width {
            let d = r[k] - pivot[k];
            sum[k] += d;
            sum_sq[k] += d * d;
        }
    }
    let mean = (0..width).map(|k| pivot[k] + sum[k] / n).collect();
    let std_error = (0..width)
        .map(|k| {
            if rows.len() < 2 {
                0.0
            } else {
                let var = ((sum_sq[k] - sum[k] * sum[k] / n) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            }
        })
        .collect();
    Ok(EnsembleResult { mean, std_error, n_realizations: rows.len() })
}

/// Release-recapture loss model: a thermal atom flies freely for `t` and
/// is lost when its harmonic-trap energy at recapture exceeds the trap
/// depth. A time-independent floor accounts for background losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecaptureModel {
    /// Trap depth in uK (`U / k_B`).
    pub trap_depth: f64,
    /// Loss probability at `t = 0` from background collisions.
    pub floor: f64,
    pub n_mc: usize,
    pub seed: u64,
}

/// Trap energies `E / k_B` in uK of `n_mc` thermal atoms after flight `t`.
fn recapture_energies(params: &PhysicalParams, t: f64, n_mc: usize, seed: u64) -> Vec<f64> {
    let (sigma_r, sigma_v) = thermal_widths(params);
    let axes = params.trap_frequencies();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // (um/us)^2 * kg / (J/K) = K; scaled to uK
    let to_uk = params.mass / BOLTZMANN * 1e6;
    (0..n_mc)
        .map(|_| {
            let mut e = 0.0;
            for (k, w) in axes.iter().enumerate() {
                let z0: f64 = StandardNormal.sample(&mut rng);
                let z1: f64 = StandardNormal.sample(&mut rng);
                let (r0, v) = (sigma_r[k] * z0, sigma_v * z1);
                let r = r0 + v * t;
                e += 0.5 * (v * v + w * w * r * r);
            }
            e * to_uk
        })
        .collect()
}

impl RecaptureModel {
    /// Loss probability after a release of `t` us.
    pub fn epsilon(&self, params: &PhysicalParams, t: f64) -> f64 {
        if params.temperature <= 0.0 || self.n_mc == 0 {
            return self.floor;
        }
        let lost = recapture_energies(params, t.max(0.0), self.n_mc, self.seed)
            .into_iter()
            .filter(|e| *e > self.trap_depth)
            .count();
        self.floor + (1.0 - self.floor) * lost as f64 / self.n_mc as f64
    }

    /// Trap depth for which `epsilon(target_t) = target_epsilon` at the
    /// params' temperature. The empirical loss fraction is a step function
    /// of the depth, so the root is an order statistic of the sampled
    /// energies.
    pub fn calibrate(
        params: &PhysicalParams,
        target_t: f64,
        target_epsilon: f64,
        floor: f64,
        n_mc: usize,
        seed: u64,
    ) -> Result<Self> {
        if params.temperature <= 0.0 {
            return Err(Error::Config("trap-depth calibration needs a positive temperature".into()));
        }
        if !(floor < target_epsilon && target_epsilon < 1.0) || n_mc < 2 {
            return Err(Error::Config(format!(
                "cannot calibrate to epsilon {target_epsilon} with floor {floor}"
            )));
        }
        let mut energies = recapture_energies(params, target_t, n_mc, seed);
        energies.sort_by(f64::total_cmp);
        let lost_fraction = (target_epsilon - floor) / (1.0 - floor);
        let n_lost = (lost_fraction * n_mc as f64).round() as usize;
        let k = n_mc - n_lost.clamp(1, n_mc - 1);
        // any depth in [E_(k-1), E_(k)) loses exactly n_lost atoms
        let trap_depth = 0.5 * (energies[k - 1] + energies[k]);
        Ok(Self { trap_depth, floor, n_mc, seed })
    }
}

/// Loss probability of a thermal atom after free flight `t`.
pub fn recapture_epsilon(params: &PhysicalParams, trap_depth: f64, t: f64, n_mc: usize, floor: f64, seed: u64) -> f64 {
    RecaptureModel { trap_depth, floor, n_mc, seed }.epsilon(params, t)
}
