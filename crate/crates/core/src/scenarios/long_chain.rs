use serde::Serialize;

use crate::detection::{scale_excitation_large_n, EpsilonModel};
use crate::error::Result;
use crate::model::{ChainGeometry, RangeMode, Trajectories};
use crate::table::Table;
use crate::thermal::{monte_carlo, sample_thermal};
use crate::xy::{build_coupling_matrix, propagate, propagate_time_dependent, Populations, SpinState};

use super::config::ScenarioConfig;

/// Detected signal of the last site relative to its pre-arrival level.
#[derive(Debug, Clone, Serialize)]
pub struct FarSiteSignal {
    /// Largest value up to `baseline_until`.
    pub baseline: f64,
    pub peak: f64,
    pub peak_at_us: f64,
    /// `peak / baseline`; absent when the baseline is exactly zero.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LongChainResult {
    pub n_atoms: usize,
    pub spacing: f64,
    pub ideal: bool,
    pub range: RangeMode,
    pub temperature: f64,
    pub taus: Vec<f64>,
    /// Ensemble-mean `P_i(t)`, `mean[i][k]`.
    pub mean: Vec<Vec<f64>>,
    pub std_error: Vec<Vec<f64>>,
    /// `mean` scaled by `(1 - epsilon(t))^(N-1)`.
    pub detected: Vec<Vec<f64>>,
    /// Largest `|sum_i mean_i(t) - 1|`.
    pub norm_deviation: f64,
    pub far_site: FarSiteSignal,
    /// Number of samples at which epsilon was extrapolated.
    pub epsilon_extrapolated: usize,
    pub n_realizations: usize,
}

#[derive(Serialize)]
pub struct LongChainSummary<'a> {
    pub n_atoms: usize,
    pub spacing_um: f64,
    pub ideal: bool,
    pub range: RangeMode,
    pub temperature_uk: f64,
    pub norm_deviation: f64,
    pub far_site: &'a FarSiteSignal,
    pub epsilon_extrapolated: usize,
    pub n_realizations: usize,
}

fn site_table(taus: &[f64], rows: &[Vec<f64>]) -> Table {
    let mut t = Table::time_series(taus.to_vec());
    for (i, r) in rows.iter().enumerate() {
        t.push_column(format!("P_{}", i + 1), r.clone());
    }
    t
}

impl LongChainResult {
    pub fn summary(&self) -> LongChainSummary<'_> {
        LongChainSummary {
            n_atoms: self.n_atoms,
            spacing_um: self.spacing,
            ideal: self.ideal,
            range: self.range,
            temperature_uk: self.temperature,
            norm_deviation: self.norm_deviation,
            far_site: &self.far_site,
            epsilon_extrapolated: self.epsilon_extrapolated,
            n_realizations: self.n_realizations,
        }
    }

    pub fn tables(&self) -> Vec<(String, Table)> {
        let mut out = vec![
            ("sites".to_owned(), site_table(&self.taus, &self.mean)),
            ("sites_detected".to_owned(), site_table(&self.taus, &self.detected)),
        ];
        if self.n_realizations > 1 {
            out.push(("sites_stderr".to_owned(), site_table(&self.taus, &self.std_error)));
        }
        out
    }
}

fn flatten(p: &Populations) -> Vec<f64> {
    let (n, t) = p.values.shape();
    (0..n).flat_map(|i| (0..t).map(move |k| (i, k))).map(|(i, k)| p.values[(i, k)]).collect()
}

/// A single excitation on the first atom of a long chain, with thermal
/// motion and the large-N loss scaling.
pub fn long_chain(config: &ScenarioConfig) -> Result<LongChainResult> {
    let c = &config.long_chain;
    let n = c.n_atoms;
    let geometry = ChainGeometry::linear(n, c.spacing)?;
    let taus = c.taus.times()?;
    let initial = SpinState::excited_at(n, 0);
    let mut params = config.physics.clone();
    if c.ideal {
        params.temperature = 0.0;
    }

    let (flat_mean, flat_err, used) = if params.temperature <= 0.0 {
        let matrix = build_coupling_matrix(&geometry, &params, c.range)?;
        let pops = propagate(&matrix, &initial, &taus)?;
        (flatten(&pops), vec![0.0; n * taus.len()], 1)
    } else {
        let run = |seed: u64| -> Result<Vec<f64>> {
            let traj: Trajectories = sample_thermal(&params, n, seed).trajectories;
            let pops = propagate_time_dependent(&geometry, &params, &traj, c.range, &initial, &taus, c.dt)?;
            Ok(flatten(&pops))
        };
        let ens = monte_carlo(run, c.n_realizations, config.thermal_seed())?;
        (ens.mean, ens.std_error, ens.n_realizations)
    };
    let rows = |v: &[f64]| -> Vec<Vec<f64>> { v.chunks(taus.len()).map(<[f64]>::to_vec).collect() };
    let mean = rows(&flat_mean);
    let std_error = rows(&flat_err);

    let model = if c.ideal { EpsilonModel::zero() } else { config.epsilon.build(&config.physics, config.seed)? };
    let mut detected = Vec::with_capacity(n);
    let mut extrapolated = 0;
    for site in &mean {
        let s = scale_excitation_large_n(&taus, site, &model, n)?;
        extrapolated = s.extrapolated_at.len();
        detected.push(s.values);
    }

    let norm_deviation = (0..taus.len())
        .map(|k| (mean.iter().map(|r| r[k]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);

    let last = &detected[n - 1];
    let mut baseline = 0.0f64;
    let (mut peak, mut peak_at) = (0.0f64, f64::NAN);
    for (k, &t) in taus.iter().enumerate() {
        if t <= c.baseline_until {
            baseline = baseline.max(last[k]);
        } else if last[k] > peak {
            peak = last[k];
            peak_at = t;
        }
    }
    let far_site = FarSiteSignal {
        baseline,
        peak,
        peak_at_us: peak_at,
        ratio: (baseline > 0.0).then(|| peak / baseline),
    };

    Ok(LongChainResult {
        n_atoms: n,
        spacing: c.spacing,
        ideal: c.ideal,
        range: c.range,
        temperature: params.temperature,
        taus,
        mean,
        std_error,
        detected,
        norm_deviation,
        far_site,
        epsilon_extrapolated: extrapolated,
        n_realizations: used,
    })
}
