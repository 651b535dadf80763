//! Recapture-detection forward model and loss-probability calibration.
//!
//! Pattern index convention: bit `N-1-i` of a pattern index is atom `i`,
//! so atom 0 is the most significant bit and `"100"` means only atom 0 was
//! recaptured. A set bit is a recaptured (ground-state) atom.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PhysicalParams;
use crate::obe::{project_to_readout, ReadoutConvention};
use crate::thermal::RecaptureModel;

/// Time-dependent loss probability of a ground-state atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpsilonModel {
    /// Constant loss probability, valid at all times.
    Constant { epsilon: f64 },
    /// Piecewise-linear interpolation of `(t, epsilon)` points; clamps
    /// to the end values outside the table.
    Table { points: Vec<(f64, f64)> },
    /// `sum_k c_k t^k` over `[t_min, t_max]`.
    Polynomial { coefficients: Vec<f64>, t_min: f64, t_max: f64 },
    /// Release-recapture Monte Carlo for atoms of `mass` (kg) at
    /// `temperature` (uK) in a trap with per-axis frequencies `trap_axes`.
    RecaptureMc { model: RecaptureModel, temperature: f64, trap_axes: [f64; 3], mass: f64 },
}

/// Loss probability at one time, with a flag for out-of-range lookups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonValue {
    pub epsilon: f64,
    pub extrapolated: bool,
}

impl EpsilonModel {
    pub fn zero() -> Self {
        Self::Constant { epsilon: 0.0 }
    }

    /// Recapture backend for the trap and atoms of `params`.
    pub fn recapture(model: RecaptureModel, params: &PhysicalParams) -> Self {
        Self::RecaptureMc {
            model,
            temperature: params.temperature,
            trap_axes: params.trap_frequencies(),
            mass: params.mass,
        }
    }

    pub fn table(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Data("empty epsilon table".into()));
        }
        if points.iter().any(|(t, e)| !t.is_finite() || !e.is_finite()) {
            return Err(Error::Data("non-finite entry in epsilon table".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Data("duplicate time in epsilon table".into()));
        }
        Ok(Self::Table { points })
    }

    /// Range of `t` over which the model is backed by data; unbounded
    /// backends return infinite ends.
    pub fn valid_range(&self) -> (f64, f64) {
        match self {
            Self::Constant { .. } | Self::RecaptureMc { .. } => (0.0, f64::INFINITY),
            Self::Table { points } => (points[0].0, points[points.len() - 1].0),
            Self::Polynomial { t_min, t_max, .. } => (*t_min, *t_max),
        }
    }

    /// Raw model value at `t`, clamped to `[0, 1]`.
    pub fn evaluate(&self, t: f64) -> EpsilonValue {
        let (lo, hi) = self.valid_range();
        let tol = 1e-9 * hi.abs().max(1.0);
        let extrapolated = t < lo - tol || t > hi + tol;
        let raw = match self {
            Self::Constant { epsilon } => *epsilon,
            Self::Table { points } => interpolate(points, t),
            Self::Polynomial { coefficients, .. } => coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c),
            Self::RecaptureMc { model, temperature, trap_axes, mass } => {
                let params = PhysicalParams {
                    temperature: *temperature,
                    trap_axes: Some(*trap_axes),
                    mass: *mass,
                    ..Default::default()
                };
                model.epsilon(&params, t)
            }
        };
        EpsilonValue { epsilon: raw.clamp(0.0, 1.0), extrapolated }
    }

    /// `evaluate(t).epsilon`, logging a warning on extrapolation.
    pub fn epsilon(&self, t: f64) -> f64 {
        let v = self.evaluate(t);
        if v.extrapolated {
            let (lo, hi) = self.valid_range();
            warn!("epsilon evaluated at t = {t} us outside its valid range [{lo}, {hi}]");
        }
        v.epsilon
    }

    /// Human-readable problems with the model data (range, monotonicity).
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let values: Vec<(f64, f64)> = match self {
            Self::Table { points } => points.clone(),
            Self::Polynomial { t_min, t_max, .. } => (0..=100)
                .map(|k| {
                    let t = t_min + (t_max - t_min) * k as f64 / 100.0;
                    (t, self.evaluate(t).epsilon)
                })
                .collect(),
            Self::Constant { epsilon } => vec![(0.0, *epsilon)],
            Self::RecaptureMc { .. } => return out,
        };
        if let Self::Table { points } = self {
            if let Some((t, e)) = points.iter().find(|(_, e)| !(0.0..=1.0).contains(e)) {
                out.push(format!("epsilon {e} at t = {t} us is outside [0, 1]"));
            }
        }
        if let Self::Constant { epsilon } = self {
            if !(0.0..=1.0).contains(epsilon) {
                out.push(format!("constant epsilon {epsilon} is outside [0, 1]"));
            }
        }
        if let Some(w) = values.windows(2).find(|w| w[1].1 < w[0].1 - 1e-12) {
            out.push(format!("epsilon decreases between t = {} and t = {} us", w[0].0, w[1].0));
        }
        out
    }
}

fn interpolate(points: &[(f64, f64)], t: f64) -> f64 {
    let k = points.partition_point(|p| p.0 <= t);
    if k == 0 {
        return points[0].1;
    }
    if k == points.len() {
        return points[k - 1].1;
    }
    let (t0, e0) = points[k - 1];
    let (t1, e1) = points[k];
    e0 + (e1 - e0) * (t - t0) / (t1 - t0)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Contract(format!("loss probability {epsilon} outside [0, 1]")));
    }
    Ok(())
}

/// Applies independent loss with probability `epsilon` to every recaptured
/// atom of a true ground/Rydberg pattern distribution over `2^n` patterns.
pub fn apply_loss(true_patterns: &[f64], n_atoms: usize, epsilon: f64) -> Result<Vec<f64>> {
    check_epsilon(epsilon)?;
    if true_patterns.len() != 1 << n_atoms {
        return Err(Error::Contract(format!(
            "expected {} pattern probabilities, got {}",
            1usize << n_atoms,
            true_patterns.len()
        )));
    }
    let total: f64 = true_patterns.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!("pattern distribution sums to {total}")));
    }
    let mut out = true_patterns.to_vec();
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
    Ok(out)
}

/// Observed recapture-pattern distribution for a distribution over
/// `{g, up, down}^n` (base-3, atom 0 most significant): ground atoms are
/// recaptured with probability `1 - epsilon`, Rydberg atoms never.
pub fn forward_detection(level_populations: &[f64], n_atoms: usize, epsilon: f64) -> Result<Vec<f64>> {
    let total: f64 = level_populations.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!("level populations sum to {total}")));
    }
    let truth = project_to_readout(level_populations, n_atoms, ReadoutConvention::AfterDeexcitation)?;
    apply_loss(&truth, n_atoms, epsilon)
}

/// Closed forms for the all-ground state of three atoms:
/// `[P_111, P(two recaptured), P(one recaptured), P_000]`.
pub fn three_atom_partitions(epsilon: f64) -> [f64; 4] {
    let q = 1.0 - epsilon;
    [q.powi(3), 3.0 * epsilon * q * q, 3.0 * epsilon * epsilon * q, epsilon.powi(3)]
}

/// Which quantity the second column of a calibration file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableColumn {
    #[default]
    P111,
    Epsilon,
}

/// Parses whitespace- or comma-separated two-column numeric text. Lines
/// starting with `#` and blank lines are skipped; so is a non-numeric
/// header line.
pub fn parse_two_column(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let parsed: Vec<std::result::Result<f64, _>> = fields.iter().map(|f| f.parse::<f64>()).collect();
        if out.is_empty() && parsed.iter().all(|p| p.is_err()) {
            continue;
        }
        if fields.len() != 2 || parsed.iter().any(|p| p.is_err()) {
            return Err(Error::Data(format!("line {}: expected two numbers, got {line:?}", lineno + 1)));
        }
        out.push((*parsed[0].as_ref().unwrap(), *parsed[1].as_ref().unwrap()));
    }
    if out.is_empty() {
        return Err(Error::Data("calibration table has no data rows".into()));
    }
    Ok(out)
}

/// Loads an epsilon table from calibration text.
pub fn load_calibration(text: &str, column: TableColumn) -> Result<EpsilonModel> {
    let rows = parse_two_column(text)?;
    match column {
        TableColumn::Epsilon => EpsilonModel::table(rows),
        TableColumn::P111 => EpsilonModel::table(
            rows.into_iter()
                .map(|(t, p)| raw_epsilon(p).map(|e| (t, e)))
                .collect::<Result<Vec<_>>>()?,
        ),
    }
}

/// Built-in calibration: `P_111(t)` on a 0.5 us grid, 1 % loss at `t = 0`
/// rising linearly to 20 % at 7 us.
pub const DEFAULT_CALIBRATION: &str = include_str!("../data/recapture_p111.txt");

pub fn default_epsilon_table() -> EpsilonModel {
    load_calibration(DEFAULT_CALIBRATION, TableColumn::P111).expect("built-in calibration parses")
}

/// `1 - P_111^(1/3)`.
pub fn raw_epsilon(p111: f64) -> Result<f64> {
    if !(p111 > 0.0 && p111 <= 1.0) {
        return Err(Error::Data(format!("P_111 = {p111} is outside (0, 1]")));
    }
    Ok(1.0 - p111.cbrt())
}

/// Polynomial calibration result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonFit {
    pub model: EpsilonModel,
    pub coefficients: Vec<f64>,
    pub residual_rms: f64,
}

/// Least-squares polynomial of `degree` through `1 - P_111^(1/3)`.
pub fn fit_epsilon(p111_series: &[(f64, f64)], degree: usize) -> Result<EpsilonFit> {
    if p111_series.len() < degree + 1 {
        return Err(Error::Data(format!(
            "degree {degree} needs at least {} points, got {}",
            degree + 1,
            p111_series.len()
        )));
    }
    let ts: Vec<f64> = p111_series.iter().map(|p| p.0).collect();
    let eps = p111_series.iter().map(|p| raw_epsilon(p.1)).collect::<Result<Vec<_>>>()?;
    let t_min = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let t_max = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    // fit in u = t / scale, then rescale the coefficients
    let scale = t_max.abs().max(t_min.abs()).max(1e-300);
    let a = DMatrix::from_fn(ts.len(), degree + 1, |r, c| (ts[r] / scale).powi(c as i32));
    let b = DVector::from_vec(eps.clone());
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-13).map_err(|e| Error::FitFailure(format!("epsilon fit: {e}")))?;
    let coefficients: Vec<f64> = x.iter().enumerate().map(|(k, c)| c / scale.powi(k as i32)).collect();
    let resid = &a * &x - &b;
    let residual_rms = (resid.norm_squared() / ts.len() as f64).sqrt();
    let model = EpsilonModel::Polynomial { coefficients: coefficients.clone(), t_min, t_max };
    Ok(EpsilonFit { model, coefficients, residual_rms })
}

/// Per-site excitation series scaled by `(1 - epsilon(t))^(n-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledSeries {
    pub values: Vec<f64>,
    /// Times at which `epsilon` was extrapolated.
    pub extrapolated_at: Vec<f64>,
}

pub fn scale_excitation_large_n(times: &[f64], p_excited: &[f64], model: &EpsilonModel, n_atoms: usize) -> Result<ScaledSeries> {
    if n_atoms == 0 {
        return Err(Error::Contract("n_atoms must be at least 1".into()));
    }
    if times.len() != p_excited.len() {
        return Err(Error::Contract("times and series differ in length".into()));
    }
    let mut extrapolated_at = Vec::new();
    let values = times
        .iter()
        .zip(p_excited)
        .map(|(&t, &p)| {
            let v = model.evaluate(t);
            if v.extrapolated {
                extrapolated_at.push(t);
            }
            p * (1.0 - v.epsilon).powi(n_atoms as i32 - 1)
        })
        .collect();
    if let (Some(first), Some(last)) = (extrapolated_at.first(), extrapolated_at.last()) {
        warn!("epsilon extrapolated at {} times between {first} and {last} us", extrapolated_at.len());
    }
    Ok(ScaledSeries { values, extrapolated_at })
}

/// Recapture-pattern label, e.g. `"100"` for index 4 of three atoms.
pub fn pattern_label(pattern: usize, n_atoms: usize) -> String {
    (0..n_atoms).map(|i| if pattern >> (n_atoms - 1 - i) & 1 == 1 { '1' } else { '0' }).collect()
}
