//! Fits and metrics on simulated time series.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// `p(t) = offset + (amplitude / 2) cos(2 pi f t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillationFit {
    /// MHz.
    pub frequency: f64,
    /// Peak-to-trough.
    pub amplitude: f64,
    pub offset: f64,
    pub phase: f64,
    /// Amplitude clamped to `[0, 1]`.
    pub contrast: f64,
    pub residual_rms: f64,
}

impl OscillationFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.offset + 0.5 * self.amplitude * (2.0 * PI * self.frequency * t + self.phase).cos()
    }
}

/// Strongest spectral component of a sampled series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralPeak {
    pub frequency: f64,
    /// Fraction of the series variance explained by a single sinusoid.
    pub power: f64,
}

/// Fraction of variance explained by `c + a cos + b sin` at `f`, and the
/// coefficients.
fn harmonic_fit(times: &[f64], values: &[f64], f: f64) -> Option<(f64, Vector3<f64>)> {
    let w = 2.0 * PI * f;
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for (&t, &y) in times.iter().zip(values) {
        let row = Vector3::new(1.0, (w * t).cos(), (w * t).sin());
        ata += row * row.transpose();
        atb += row * y;
    }
    let coef = ata.cholesky()?.solve(&atb);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (&t, &y) in times.iter().zip(values) {
        let m = coef[0] + coef[1] * (w * t).cos() + coef[2] * (w * t).sin();
        ss_res += (y - m) * (y - m);
        ss_tot += (y - mean) * (y - mean);
    }
    Some((1.0 - ss_res / ss_tot, coef))
}

fn check_series(times: &[f64], values: &[f64], min_points: usize) -> Result<()> {
    if times.len() != values.len() {
        return Err(Error::Contract("times and values differ in length".into()));
    }
    if times.len() < min_points {
        return Err(Error::FitFailure(format!("need at least {min_points} samples, got {}", times.len())));
    }
    if times.iter().chain(values).any(|x| !x.is_finite()) {
        return Err(Error::Data("non-finite sample".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Contract("sample times must be strictly increasing".into()));
    }
    Ok(())
}

/// Dominant frequency by a least-squares periodogram over
/// `[1 / (2 span), Nyquist]`. `None` when the series is flat.
pub fn dominant_frequency(times: &[f64], values: &[f64]) -> Result<Option<SpectralPeak>> {
    check_series(times, values, 4)?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let spread = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * mean.abs().max(1.0) {
        return Ok(None);
    }
    let span = times[times.len() - 1] - times[0];
    let min_dt = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let (f_lo, f_hi) = (0.5 / span, 0.5 / min_dt);
    let n_grid = ((f_hi - f_lo) * span * 10.0).ceil().clamp(16.0, 200_000.0) as usize;
    let mut best: Option<SpectralPeak> = None;
    for k in 0..=n_grid {
        let f = f_lo + (f_hi - f_lo) * k as f64 / n_grid as f64;
        if let Some((power, _)) = harmonic_fit(times, values, f) {
            if best.is_none_or(|b| power > b.power) {
                best = Some(SpectralPeak { frequency: f, power });
            }
        }
    }
    // zoom in around the grid maximum
    let mut step = (f_hi - f_lo) / n_grid as f64;
    for _ in 0..3 {
        let Some(centre) = best else { break };
        for k in -20..=20 {
            let f = centre.frequency + step * k as f64 / 20.0;
            if f < f_lo || f > f_hi {
                continue;
            }
            if let Some((power, _)) = harmonic_fit(times, values, f) {
                if best.is_none_or(|b| power > b.power) {
                    best = Some(SpectralPeak { frequency: f, power });
                }
            }
        }
        step /= 20.0;
    }
    Ok(best)
}

/// Minimum explained-variance fraction for a spectral peak to count.
const PEAK_FLOOR: f64 = 0.2;

/// Relative slack on the window-versus-period check; the periodogram peak
/// of a damped or beating series is only approximately its period.
const PERIOD_SLACK: f64 = 0.02;

/// Damped Gauss-Newton fit of a single sinusoid, seeded from the
/// dominant spectral peak.
pub fn fit_sinusoid(times: &[f64], values: &[f64]) -> Result<OscillationFit> {
    check_series(times, values, 8)?;
    let peak = dominant_frequency(times, values)?
        .ok_or_else(|| Error::FitFailure("series is constant; no spectral peak".into()))?;
    if peak.power < PEAK_FLOOR {
        return Err(Error::FitFailure(format!(
            "strongest spectral peak at {:.4} MHz explains only {:.1}% of the variance",
            peak.frequency,
            100.0 * peak.power
        )));
    }
    let (_, c) = harmonic_fit(times, values, peak.frequency)
        .ok_or_else(|| Error::FitFailure("singular harmonic fit".into()))?;
    // theta = [offset, half amplitude, frequency, phase]
    let mut theta = Vector4::new(c[0], c[1].hypot(c[2]), peak.frequency, (-c[2]).atan2(c[1]));

    let cost = |th: &Vector4<f64>| -> f64 {
        times.iter().zip(values).map(|(&t, &y)| {
            let r = th[0] + th[1] * (2.0 * PI * th[2] * t + th[3]).cos() - y;
            r * r
        }).sum()
    };
    let mut current = cost(&theta);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (&t, &y) in times.iter().zip(values) {
            let arg = 2.0 * PI * theta[2] * t + theta[3];
            let (s, co) = arg.sin_cos();
            let r = theta[0] + theta[1] * co - y;
            let j = Vector4::new(1.0, co, -theta[1] * s * 2.0 * PI * t, -theta[1] * s);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-jtr));
            let trial = theta + step;
            let c_trial = cost(&trial);
            if c_trial < current {
                let rel = (current - c_trial) / current.max(1e-300);
                theta = trial;
                current = c_trial;
                lambda = (lambda * 0.3).max(1e-12);
                improved = rel > 1e-15;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }

    let (mut half, mut phase) = (theta[1], theta[3]);
    if half < 0.0 {
        half = -half;
        phase += PI;
    }
    let mut frequency = theta[2];
    if frequency < 0.0 {
        frequency = -frequency;
        phase = -phase;
    }
    phase = (phase + PI).rem_euclid(2.0 * PI) - PI;
    if !(frequency > 0.0 && frequency.is_finite()) {
        return Err(Error::FitFailure(format!("fit converged to frequency {frequency}")));
    }
    let span = times[times.len() - 1] - times[0];
    if frequency * span < 1.0 {
        return Err(Error::FitFailure(format!(
            "series spans {:.2} periods of the fitted {frequency:.4} MHz oscillation; need at least 1",
            frequency * span
        )));
    }
    let amplitude = 2.0 * half;
    Ok(OscillationFit {
        frequency,
        amplitude,
        offset: theta[0],
        phase,
        contrast: amplitude.clamp(0.0, 1.0),
        residual_rms: (current / times.len() as f64).sqrt(),
    })
}

/// `E = prefactor * R^exponent`, fitted in log-log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub exponent_error: f64,
    pub prefactor: f64,
    pub prefactor_error: f64,
}

fn log_points(points: &[(f64, f64)], min_points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if points.len() < min_points {
        return Err(Error::FitFailure(format!("power-law fit needs at least {min_points} points, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::Data(format!("power-law fit needs positive values, got {p:?}")));
    }
    Ok(points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip())
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    let (x, y) = log_points(points, 3)?;
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - xm) * (v - xm)).sum();
    if sxx <= 0.0 {
        return Err(Error::FitFailure("all abscissae are equal".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let s2 = rss / (n - 2.0);
    let slope_se = (s2 / sxx).sqrt();
    let intercept_se = (s2 * (1.0 / n + xm * xm / sxx)).sqrt();
    let prefactor = intercept.exp();
    Ok(PowerLawFit { exponent: slope, exponent_error: slope_se, prefactor, prefactor_error: prefactor * intercept_se })
}

/// Prefactor with the exponent held fixed.
pub fn fit_power_law_fixed(points: &[(f64, f64)], exponent: f64) -> Result<PowerLawFit> {
    let (x, y) = log_points(points, 1)?;
    let n = x.len() as f64;
    let resid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b - exponent * a).collect();
    let ln_c = resid.iter().sum::<f64>() / n;
    let se = if x.len() > 1 {
        (resid.iter().map(|r| (r - ln_c).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    let prefactor = ln_c.exp();
    Ok(PowerLawFit { exponent, exponent_error: 0.0, prefactor, prefactor_error: prefactor * se })
}

/// All pairwise `|lambda_i - lambda_j|`, ascending.
pub fn beat_spectrum(eigenvalues: &[f64]) -> Result<Vec<f64>> {
    if eigenvalues.len() < 2 {
        return Err(Error::Contract("beat spectrum needs at least two eigenvalues".into()));
    }
    let mut out = Vec::with_capacity(eigenvalues.len() * (eigenvalues.len() - 1) / 2);
    for (i, a) in eigenvalues.iter().enumerate() {
        for b in &eigenvalues[i + 1..] {
            out.push((a - b).abs());
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Sliding-window contrast; only centers whose whole window lies inside
/// the sampled range are reported.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub times: Vec<f64>,
    pub contrast: Vec<f64>,
}

impl Envelope {
    /// Contrast at the reported center closest to `t`.
    pub fn at(&self, t: f64) -> Option<f64> {
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        Some(self.contrast[k])
    }
}

/// `max - min` of `values` over a centered window of width `window` us.
/// The window must hold at least three samples and span at least one
/// period of the series' dominant oscillation.
pub fn envelope_contrast(times: &[f64], values: &[f64], window: f64) -> Result<Envelope> {
    check_series(times, values, 3)?;
    let max_dt = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if !(window >= 2.0 * max_dt) {
        return Err(Error::Config(format!("envelope window {window} us holds fewer than 3 samples (spacing {max_dt} us)")));
    }
    if let Some(peak) = dominant_frequency(times, values)? {
        if peak.power >= PEAK_FLOOR && window * peak.frequency < 1.0 - PERIOD_SLACK {
            return Err(Error::Config(format!(
                "envelope window {window} us is shorter than the {:.4} us oscillation period",
                1.0 / peak.frequency
            )));
        }
    }
    let half = 0.5 * window;
    let tol = 1e-9 * window;
    let (first, last) = (times[0], times[times.len() - 1]);
    let mut out = Envelope { times: Vec::new(), contrast: Vec::new() };
    for &tc in times {
        if tc - half < first - tol || tc + half > last + tol {
            continue;
        }
        let lo = times.partition_point(|&t| t < tc - half - tol);
        let hi = times.partition_point(|&t| t <= tc + half + tol);
        let slice = &values[lo..hi];
        let mx = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mn = slice.iter().copied().fold(f64::INFINITY, f64::min);
        out.times.push(tc);
        out.contrast.push(mx - mn);
    }
    if out.times.is_empty() {
        return Err(Error::Config(format!("envelope window {window} us is longer than the series")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn two_atom_oracle() {
        let t = grid(201, 0.05);
        let y: Vec<f64> = t.iter().map(|t| (2.0 * PI * 0.295 * t).sin().powi(2)).collect();
        let fit = fit_sinusoid(&t, &y).unwrap();
        assert!((fit.frequency - 0.59).abs() < 1e-9, "{fit:?}");
        assert!((fit.contrast - 1.0).abs() < 1e-9);
        assert!((fit.offset - 0.5).abs() < 1e-9);
        assert!(fit.residual_rms < 1e-10);
    }

    #[test]
    fn reduced_amplitude() {
        let t = grid(201, 0.05);
        let y: Vec<f64> = t.iter().map(|t| 0.4 + 0.3 * (2.0 * PI * 0.7 * t + 0.4).cos()).collect();
        let fit = fit_sinusoid(&t, &y).unwrap();
        assert!((fit.contrast - 0.6).abs() < 1e-3);
        assert!((fit.phase - 0.4).abs() < 1e-6);
    }

    #[test]
    fn constant_series_fails() {
        let t = grid(50, 0.1);
        assert!(matches!(fit_sinusoid(&t, &[0.3; 50]), Err(Error::FitFailure(_))));
        assert!(fit_sinusoid(&t[..5], &[0.0, 1.0, 0.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn slow_oscillation_resolved() {
        let t = grid(201, 0.05);
        let f = 2.0 * 7965.0 / 50f64.powi(3);
        let y: Vec<f64> = t.iter().map(|t| (PI * f * t).sin().powi(2)).collect();
        let fit = fit_sinusoid(&t, &y).unwrap();
        assert!((fit.frequency - f).abs() < 1e-7);
    }

    #[test]
    fn power_law_noiseless() {
        let pts: Vec<(f64, f64)> = [20.0, 25.0, 30.0, 40.0, 47.0, 50.0].iter().map(|r: &f64| (*r, 7965.0 / r.powi(3))).collect();
        let fit = fit_power_law(&pts).unwrap();
        assert!((fit.exponent + 3.0).abs() < 1e-10);
        assert!((fit.prefactor / 7965.0 - 1.0).abs() < 1e-10);
        assert!(fit.exponent_error < 1e-3);
        let fixed = fit_power_law_fixed(&pts, -3.0).unwrap();
        assert!((fixed.prefactor / 7965.0 - 1.0).abs() < 1e-12);
        assert!(fit_power_law(&pts[..2]).is_err());
        assert!(matches!(fit_power_law(&[(1.0, 1.0), (2.0, -1.0), (3.0, 1.0)]), Err(Error::Data(_))));
    }

    #[test]
    fn beats() {
        let s2 = 2f64.sqrt();
        let b = beat_spectrum(&[0.0, -s2, s2]).unwrap();
        assert!((b[0] - s2).abs() < 1e-15 && (b[1] - s2).abs() < 1e-15 && (b[2] - 2.0 * s2).abs() < 1e-15);
        let b = beat_spectrum(&[-1.3530939566132656, -0.125, 1.4780939566132656]).unwrap();
        for (got, want) in b.iter().zip([1.2280939566132656, 1.6030939566132656, 2.831187913226531]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(beat_spectrum(&[0.7, 0.7]).unwrap(), vec![0.0]);
        assert!(beat_spectrum(&[1.0]).is_err());
    }

    #[test]
    fn envelope_shapes() {
        let t = grid(201, 0.05);
        let flat: Vec<f64> = t.iter().map(|t| 0.5 + 0.5 * (2.0 * PI * 1.0 * t).cos()).collect();
        let env = envelope_contrast(&t, &flat, 1.0).unwrap();
        assert!(env.contrast.iter().all(|c| (c - 1.0).abs() < 0.02));
        let damped: Vec<f64> = t.iter().map(|t| 0.5 + 0.5 * (-t / 3.0).exp() * (2.0 * PI * 1.0 * t).cos()).collect();
        let env = envelope_contrast(&t, &damped, 1.0).unwrap();
        assert!(env.contrast.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(matches!(envelope_contrast(&t, &flat, 0.5), Err(Error::Config(_))));
        assert!(matches!(envelope_contrast(&t, &flat, 0.06), Err(Error::Config(_))));
    }
}
