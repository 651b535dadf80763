use serde::Serialize;

use crate::detection::{fit_epsilon, forward_detection, parse_two_column, raw_epsilon, three_atom_partitions, TableColumn};
use crate::error::{Error, Result};
use crate::table::Table;

use super::config::ScenarioConfig;

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationResult {
    pub synthetic: bool,
    /// `(t, P_111)` input.
    pub data: Vec<(f64, f64)>,
    pub coefficients: Vec<f64>,
    pub residual_rms: f64,
    /// Fitted epsilon at each data time.
    pub fitted: Vec<f64>,
    /// `[P_111, two, one, P_000]` from the fitted epsilon at each data time.
    pub partitions: Vec<[f64; 4]>,
    /// Largest `|fit - truth|` of the synthetic data set.
    pub self_test_error: Option<f64>,
    /// Largest difference between the forward model on the all-ground
    /// state and the closed-form partitions.
    pub forward_model_deviation: f64,
    pub epsilon_at_zero: f64,
    pub epsilon_at_seven: f64,
}

impl CalibrationResult {
    pub fn summary(&self) -> &Self {
        self
    }

    pub fn tables(&self) -> Vec<(String, Table)> {
        let t: Vec<f64> = self.data.iter().map(|d| d.0).collect();
        let col = |k: usize| self.partitions.iter().map(|p| p[k]).collect::<Vec<f64>>();
        let table = Table::new("t_us", t)
            .with_column("P_111_data", self.data.iter().map(|d| d.1).collect())
            .with_column("epsilon_raw", self.data.iter().map(|d| 1.0 - d.1.cbrt()).collect())
            .with_column("epsilon_fit", self.fitted.clone())
            .with_column("P_111_pred", col(0))
            .with_column("P_two_pred", col(1))
            .with_column("P_one_pred", col(2))
            .with_column("P_000_pred", col(3));
        vec![("calibration".to_owned(), table)]
    }
}

/// Fits the loss probability to `P_111(t)` and predicts the partitions.
pub fn calibrate_epsilon(config: &ScenarioConfig) -> Result<CalibrationResult> {
    let c = &config.calibrate_epsilon;
    let (data, truth) = match &c.file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
            let rows = parse_two_column(&text)?;
            let data = match c.column {
                TableColumn::P111 => rows,
                TableColumn::Epsilon => rows.into_iter().map(|(t, e)| (t, (1.0 - e).powi(3))).collect(),
            };
            (data, None)
        }
        None => {
            let eps = |t: f64| c.synthetic_floor + c.synthetic_slope * t;
            let data = c.times.times()?.into_iter().map(|t| (t, (1.0 - eps(t)).powi(3))).collect();
            (data, Some(eps))
        }
    };
    for (_, p) in &data {
        raw_epsilon(*p)?;
    }
    let fit = fit_epsilon(&data, c.degree)?;
    let fitted: Vec<f64> = data.iter().map(|(t, _)| fit.model.evaluate(*t).epsilon).collect();
    let partitions: Vec<[f64; 4]> = fitted.iter().map(|e| three_atom_partitions(*e)).collect();

    let mut ground = vec![0.0; 27];
    ground[0] = 1.0;
    let mut forward_model_deviation = 0.0f64;
    for (e, closed) in fitted.iter().zip(&partitions) {
        let obs = forward_detection(&ground, 3, *e)?;
        let two = obs[0b110] + obs[0b101] + obs[0b011];
        let one = obs[0b100] + obs[0b010] + obs[0b001];
        for (a, b) in [obs[0b111], two, one, obs[0]].iter().zip(closed) {
            forward_model_deviation = forward_model_deviation.max((a - b).abs());
        }
    }
    let self_test_error = truth.map(|eps| {
        data.iter().zip(&fitted).map(|((t, _), f)| (f - eps(*t)).abs()).fold(0.0, f64::max)
    });
    Ok(CalibrationResult {
        synthetic: truth.is_some(),
        coefficients: fit.coefficients.clone(),
        residual_rms: fit.residual_rms,
        epsilon_at_zero: fit.model.evaluate(0.0).epsilon,
        epsilon_at_seven: fit.model.evaluate(7.0).epsilon,
        data,
        fitted,
        partitions,
        self_test_error,
        forward_model_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::ScenarioKind;

    #[test]
    fn synthetic_round_trip() {
        let cfg = ScenarioConfig::for_scenario(ScenarioKind::CalibrateEpsilon);
        let r = calibrate_epsilon(&cfg).unwrap();
        assert!(r.self_test_error.unwrap() < 1e-6);
        assert!((r.epsilon_at_zero - 0.01).abs() < 1e-6);
        assert!((r.epsilon_at_seven - 0.199).abs() < 1e-6);
        assert!(r.forward_model_deviation < 1e-12);
    }
}
