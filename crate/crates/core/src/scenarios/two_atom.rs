use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{fit_power_law, fit_power_law_fixed, fit_sinusoid, OscillationFit, PowerLawFit};
use crate::error::{Error, Result};
use crate::model::{pair_coupling, ChainGeometry};
use crate::obe::{Level, PulseSequence};
use crate::table::Table;
use crate::thermal::derive_seed;

use super::config::{check_obe_size, ScenarioConfig, TauGrid, STREAM_DISTANCE_NOISE};
use super::{epsilon_per_tau, sequence_ensemble, PatternSeries};

/// Pattern index of "first atom recaptured, second lost".
const P_10: usize = 0b10;

#[derive(Debug, Clone, Serialize)]
pub struct TwoAtomResult {
    pub distance: f64,
    pub ideal: bool,
    /// `C3 / R^3`, MHz.
    pub coupling: f64,
    /// `2 C3 / R^3`, MHz.
    pub expected_frequency: f64,
    pub patterns: PatternSeries,
    /// Fit of `P_10`.
    pub fit: OscillationFit,
    pub n_realizations: usize,
    /// Loss probability at the first and last sample.
    pub epsilon_span: (f64, f64),
}

#[derive(Serialize)]
pub struct TwoAtomSummary<'a> {
    pub distance_um: f64,
    pub ideal: bool,
    pub coupling_mhz: f64,
    pub expected_frequency_mhz: f64,
    pub fit: &'a OscillationFit,
    pub relative_frequency_error: f64,
    pub n_realizations: usize,
    pub epsilon_first: f64,
    pub epsilon_last: f64,
    pub max_pattern_sum_deviation: f64,
}

impl TwoAtomResult {
    pub fn summary(&self) -> TwoAtomSummary<'_> {
        TwoAtomSummary {
            distance_um: self.distance,
            ideal: self.ideal,
            coupling_mhz: self.coupling,
            expected_frequency_mhz: self.expected_frequency,
            fit: &self.fit,
            relative_frequency_error: (self.fit.frequency / self.expected_frequency - 1.0).abs(),
            n_realizations: self.n_realizations,
            epsilon_first: self.epsilon_span.0,
            epsilon_last: self.epsilon_span.1,
            max_pattern_sum_deviation: self.patterns.max_sum_deviation(),
        }
    }

    pub fn tables(&self) -> Vec<(String, Table)> {
        let observed = self.patterns.pattern(P_10);
        let fitted = self.patterns.taus.iter().map(|&t| self.fit.eval(t)).collect();
        let mut out = vec![
            ("patterns".to_owned(), self.patterns.table()),
            (
                "fit".to_owned(),
                Table::time_series(self.patterns.taus.clone())
                    .with_column("P_10", observed)
                    .with_column("P_10_fit", fitted),
            ),
        ];
        if self.n_realizations > 1 {
            out.push(("patterns_stderr".to_owned(), self.patterns.stderr_table()));
        }
        out
    }
}

/// Runs the two-atom sequence with the atoms `simulated` um apart.
fn exchange_run(
    config: &ScenarioConfig,
    simulated: f64,
    taus: &TauGrid,
    ideal: bool,
    n_realizations: usize,
) -> Result<TwoAtomResult> {
    check_obe_size(2)?;
    let geometry = ChainGeometry::linear(2, simulated)?;
    let taus = taus.times()?;
    let zero = nalgebra::Vector3::zeros();
    let coupling = pair_coupling(&geometry, &config.physics, 0, 1, &zero, &zero)?;
    let options = config.integrator;

    let (patterns, used, epsilon_span) = if ideal {
        let mut params = config.physics.without_damping();
        params.temperature = 0.0;
        let seq = PulseSequence::ideal(vec![Level::Up, Level::Down]);
        let (p, used) = sequence_ensemble(&seq, &geometry, &params, &taus, &options, 1, 0)?;
        (p, used, (0.0, 0.0))
    } else {
        let params = &config.physics;
        let seq = PulseSequence::two_atom_exchange(params, &config.timing);
        let (truth, used) =
            sequence_ensemble(&seq, &geometry, params, &taus, &options, n_realizations, config.thermal_seed())?;
        let eps = epsilon_per_tau(&config.epsilon.build(params, config.seed)?, &seq, &taus);
        let span = (eps[0], eps[eps.len() - 1]);
        (truth.with_loss(&eps)?, used, span)
    };
    let fit = fit_sinusoid(&patterns.taus, &patterns.pattern(P_10))?;
    Ok(TwoAtomResult {
        distance: simulated,
        ideal,
        coupling,
        expected_frequency: 2.0 * coupling.abs(),
        patterns,
        fit,
        n_realizations: used,
        epsilon_span,
    })
}

/// Spin exchange between two atoms and a sinusoidal fit of `P_10`.
pub fn two_atom_exchange(config: &ScenarioConfig) -> Result<TwoAtomResult> {
    let c = &config.two_atom_exchange;
    exchange_run(config, c.distance, &c.taus, c.ideal, c.n_realizations)
}

/// Exponent statistics of repeated scans with noisy distances.
#[derive(Debug, Clone, Serialize)]
pub struct NoiseStudy {
    pub distance_noise: f64,
    pub exponents: Vec<f64>,
    pub exponent_mean: f64,
    /// Sample standard deviation across trials.
    pub exponent_scatter: f64,
    /// Mean of the per-scan fit standard errors.
    pub mean_exponent_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceScanResult {
    pub ideal: bool,
    /// `(R, E)` with `E` half the fitted exchange frequency.
    pub points: Vec<(f64, f64)>,
    pub fits: Vec<OscillationFit>,
    pub power_law: PowerLawFit,
    pub fixed_exponent: PowerLawFit,
    pub noise: Option<NoiseStudy>,
}

impl DistanceScanResult {
    pub fn summary(&self) -> &Self {
        self
    }

    pub fn tables(&self) -> Vec<(String, Table)> {
        let (r, e): (Vec<f64>, Vec<f64>) = self.points.iter().copied().unzip();
        let mut out = vec![(
            "interaction".to_owned(),
            Table::new("R_um", r)
                .with_column("E_MHz", e)
                .with_column("frequency_MHz", self.fits.iter().map(|f| f.frequency).collect())
                .with_column("contrast", self.fits.iter().map(|f| f.contrast).collect()),
        )];
        if let Some(noise) = &self.noise {
            out.push((
                "noise_trials".to_owned(),
                Table::new("trial", (0..noise.exponents.len()).map(|k| k as f64).collect())
                    .with_column("exponent", noise.exponents.clone()),
            ));
        }
        out
    }
}

fn interaction_energies(config: &ScenarioConfig, simulated: &[f64]) -> Result<Vec<OscillationFit>> {
    let c = &config.distance_scan;
    simulated
        .par_iter()
        .map(|&r| exchange_run(config, r, &c.taus, c.ideal, c.n_realizations).map(|res| res.fit))
        .collect()
}

/// Exchange frequency over a list of distances and a power-law fit of
/// `E = f / 2`.
pub fn distance_scan(config: &ScenarioConfig) -> Result<DistanceScanResult> {
    let c = &config.distance_scan;
    if c.distances.len() < 3 {
        return Err(Error::Config(format!("a power-law fit needs at least 3 distances, got {}", c.distances.len())));
    }
    let fits = interaction_energies(config, &c.distances)?;
    let points: Vec<(f64, f64)> = c.distances.iter().zip(&fits).map(|(r, f)| (*r, 0.5 * f.frequency)).collect();
    let power_law = fit_power_law(&points)?;
    let fixed_exponent = fit_power_law_fixed(&points, -3.0)?;

    let noise = if c.distance_noise > 0.0 && c.noise_trials > 0 {
        let stream = derive_seed(config.seed, STREAM_DISTANCE_NOISE);
        let mut exponents = Vec::with_capacity(c.noise_trials);
        let mut errors = Vec::with_capacity(c.noise_trials);
        for trial in 0..c.noise_trials as u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(stream, trial));
            let simulated: Vec<f64> = c
                .distances
                .iter()
                .map(|r| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    r * (1.0 + c.distance_noise * z)
                })
                .collect();
            let fits = interaction_energies(config, &simulated)?;
            let pts: Vec<(f64, f64)> = c.distances.iter().zip(&fits).map(|(r, f)| (*r, 0.5 * f.frequency)).collect();
            let fit = fit_power_law(&pts)?;
            exponents.push(fit.exponent);
            errors.push(fit.exponent_error);
        }
        let n = exponents.len() as f64;
        let mean = exponents.iter().sum::<f64>() / n;
        let scatter = if exponents.len() > 1 {
            (exponents.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(NoiseStudy {
            distance_noise: c.distance_noise,
            exponents,
            exponent_mean: mean,
            exponent_scatter: scatter,
            mean_exponent_error: errors.iter().sum::<f64>() / n,
        })
    } else {
        None
    };
    Ok(DistanceScanResult { ideal: c.ideal, points, fits, power_law, fixed_exponent, noise })
}
