//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xychain::analysis::{envelope_contrast, fit_sinusoid};
use xychain::detection::{fit_epsilon, forward_detection, three_atom_partitions};
use xychain::model::RangeMode;
use xychain::obe::{run_sequence, Level, ObeOptions, ProductBasis, PulseSequence};
use xychain::scenarios::{self, ScenarioConfig, ScenarioKind, TauGrid};
use xychain::xy::{build_coupling_matrix, propagate, SpinState};
use xychain::{ChainGeometry, PhysicalParams, Trajectories};

type Check = xychain::Result<(bool, String)>;

const C3: f64 = 7965.0;

fn all(checks: &[(bool, String)]) -> (bool, String) {
    let pass = checks.iter().all(|c| c.0);
    let detail = checks.iter().map(|c| format!("{}{}", if c.0 { "" } else { "!" }, c.1)).collect::<Vec<_>>();
    (pass, detail.join("; "))
}

fn cfg(kind: ScenarioKind) -> ScenarioConfig {
    ScenarioConfig::for_scenario(kind)
}

fn two_atom_frequency() -> Check {
    let mut c = cfg(ScenarioKind::TwoAtomExchange);
    c.two_atom_exchange.ideal = true;
    let start = Instant::now();
    let r = scenarios::two_atom_exchange(&c)?;
    let secs = start.elapsed().as_secs_f64();
    let want = 2.0 * C3 / 30f64.powi(3);
    let rel = (r.fit.frequency / want - 1.0).abs();
    Ok(all(&[
        ((want - 0.590).abs() < 1e-12, format!("2 C3/R^3 = {want:.6} MHz")),
        (rel < 0.005, format!("fitted {:.6} MHz, rel. error {rel:.2e} (< 5e-3)", r.fit.frequency)),
        (secs < 5.0, format!("{secs:.2} s (< 5 s)")),
    ]))
}

fn power_law() -> Check {
    let c = cfg(ScenarioKind::DistanceScan);
    let clean = scenarios::distance_scan(&c)?;
    let mut noisy_cfg = c.clone();
    noisy_cfg.distance_scan.distance_noise = 0.05;
    noisy_cfg.distance_scan.noise_trials = 20;
    let noisy = scenarios::distance_scan(&noisy_cfg)?;
    let noise = noisy.noise.expect("noise study requested");
    let exp = clean.power_law.exponent;
    let pre = clean.fixed_exponent.prefactor;
    Ok(all(&[
        ((exp + 3.0).abs() <= 0.005, format!("exponent {exp:.5} (-3 +- 0.005)")),
        ((pre / C3 - 1.0).abs() <= 0.005, format!("fixed-exponent prefactor {pre:.2} (7965 +- 0.5%)")),
        (
            (0.1..=0.3).contains(&noise.exponent_scatter),
            format!("5% noise: scatter {:.3} over {} scans (0.10..0.30)", noise.exponent_scatter, noise.exponents.len()),
        ),
        (
            (0.1..=0.3).contains(&noise.mean_exponent_error),
            format!("mean fit error {:.3} (0.10..0.30)", noise.mean_exponent_error),
        ),
    ]))
}

fn three_atom_nearest_neighbour() -> Check {
    let mut c = cfg(ScenarioKind::ThreeChain);
    c.three_chain.ideal = true;
    c.three_chain.range = RangeMode::NearestNeighbor;
    // fine grid so that the samples resolve the extrema
    c.three_chain.taus = TauGrid::new(7.0, 0.001);
    let r = scenarios::three_chain(&c)?;
    let [first, middle, _] = r.site_populations.clone().expect("ideal mode");
    let a = C3 / 8000.0;
    let want = 2f64.sqrt() * a;
    let fit = fit_sinusoid(&r.taus, &first)?;
    let env = envelope_contrast(&r.taus, &first, 0.8)?;
    let min_contrast = env.contrast.iter().copied().fold(f64::INFINITY, f64::min);
    let mid_max = middle.iter().copied().fold(0.0, f64::max);
    Ok(all(&[
        ((a - 0.9956).abs() < 5e-5, format!("a = {a:.5} MHz")),
        (min_contrast > 0.999, format!("extreme-site contrast >= {min_contrast:.6} (> 0.999)")),
        (
            (fit.frequency / want - 1.0).abs() < 1e-3 && (want - 1.408).abs() < 5e-4,
            format!("frequency {:.5} MHz vs sqrt2 a = {want:.5} (0.1%)", fit.frequency),
        ),
        ((mid_max - 0.5).abs() <= 1e-3, format!("middle max {mid_max:.6} (0.5 +- 1e-3)")),
    ]))
}

fn long_range_beating() -> Check {
    let mut c = cfg(ScenarioKind::ThreeChain);
    c.three_chain.ideal = true;
    c.three_chain.range = RangeMode::Full;
    let r = scenarios::three_chain(&c)?;
    let a = C3 / 8000.0;
    let b = a / 8.0;
    let root = (b * b + 8.0 * a * a).sqrt();
    let mut closed = [-b, 0.5 * (b + root), 0.5 * (b - root)];
    closed.sort_by(f64::total_cmp);
    let eig_err = r.eigenvalues.iter().zip(&closed).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);

    let env = &r.envelope;
    let collapse = env.contrast.iter().position(|&x| x < 0.5);
    let revival = collapse.and_then(|k| env.contrast[k..].iter().position(|&x| x > 0.8).map(|j| k + j));
    let at = |k: Option<usize>| k.map_or("none".to_owned(), |k| format!("{:.2} us", env.times[k]));
    Ok(all(&[
        (eig_err < 1e-9, format!("eigenvalue error {eig_err:.1e} (< 1e-9)")),
        (collapse.is_some(), format!("collapse below 0.5 at {}", at(collapse))),
        (
            revival.is_some_and(|k| env.times[k] <= 7.0),
            format!("revival above 0.8 at {} (window {} us)", at(revival), c.three_chain.envelope_window),
        ),
    ]))
}

/// Single-excitation populations from OBE free evolution and from the XY
/// propagator.
fn obe_xy_gap(n: usize) -> xychain::Result<(f64, f64)> {
    let geometry = ChainGeometry::linear(n, 20.0)?;
    let mut params = PhysicalParams::default().without_damping();
    params.temperature = 0.0;
    let taus: Vec<f64> = (0..=140).map(|k| k as f64 * 0.05).collect();
    let mut initial = vec![Level::Down; n];
    initial[0] = Level::Up;
    let obe = run_sequence(
        &PulseSequence::ideal(initial),
        &geometry,
        &params,
        &Trajectories::at_rest(n),
        &taus,
        &ObeOptions::default(),
    )?;
    let xy = propagate(
        &build_coupling_matrix(&geometry, &params, RangeMode::Full)?,
        &SpinState::excited_at(n, 0),
        &taus,
    )?;
    let basis = ProductBasis::new(n)?;
    let mut gap = 0.0f64;
    let mut trace = 0.0f64;
    for (k, row) in obe.values.iter().enumerate() {
        trace = trace.max((row.iter().sum::<f64>() - 1.0).abs());
        for i in 0..n {
            let mut levels = vec![Level::Down; n];
            levels[i] = Level::Up;
            gap = gap.max((row[basis.index(&levels)] - xy.values[(i, k)]).abs());
        }
    }
    Ok((gap, trace))
}

fn obe_equivalence() -> Check {
    let (gap2, tr2) = obe_xy_gap(2)?;
    let (gap3, tr3) = obe_xy_gap(3)?;
    let c = cfg(ScenarioKind::ThreeChain);
    let start = Instant::now();
    let full = scenarios::three_chain(&c)?;
    let secs = start.elapsed().as_secs_f64();
    let patterns = full.patterns.as_ref().expect("full mode");
    let sum_dev = patterns.max_sum_deviation();
    Ok(all(&[
        (gap2 < 1e-6, format!("N=2 gap {gap2:.1e}")),
        (gap3 < 1e-6, format!("N=3 gap {gap3:.1e} (< 1e-6)")),
        (tr2.max(tr3) < 1e-8, format!("free-evolution trace {:.1e}", tr2.max(tr3))),
        (sum_dev < 1e-8, format!("full-run pattern sum {sum_dev:.1e} (< 1e-8)")),
        (
            secs < 300.0 && full.n_realizations == 100,
            format!("full N=3, {} realizations, 7 us: {secs:.1} s (< 300 s)", full.n_realizations),
        ),
    ]))
}

fn contrast_with_imperfections() -> Check {
    let c = cfg(ScenarioKind::TwoAtomExchange);
    let r = scenarios::two_atom_exchange(&c)?;
    Ok(all(&[
        (
            (0.50..=0.70).contains(&r.fit.contrast),
            format!("P_10 contrast {:.4} at {:.4} MHz (0.50..0.70)", r.fit.contrast, r.fit.frequency),
        ),
        (r.patterns.max_sum_deviation() < 1e-8, format!("pattern sum {:.1e}", r.patterns.max_sum_deviation())),
    ]))
}

/// Enumerates every true level configuration and every loss outcome.
fn brute_force_detection(levels: &[f64], n: usize, eps: f64) -> Vec<f64> {
    let mut out = vec![0.0; 1 << n];
    for (state, &p) in levels.iter().enumerate() {
        let digits: Vec<usize> = (0..n).map(|i| (state / 3usize.pow((n - 1 - i) as u32)) % 3).collect();
        for losses in 0..(1usize << n) {
            let mut prob = p;
            let mut pattern = 0usize;
            for (i, &d) in digits.iter().enumerate() {
                let lost = losses >> (n - 1 - i) & 1 == 1;
                let seen = if d == 0 {
                    prob *= if lost { eps } else { 1.0 - eps };
                    !lost
                } else {
                    prob *= if lost { 1.0 } else { 0.0 };
                    false
                };
                pattern = (pattern << 1) | seen as usize;
            }
            out[pattern] += prob;
        }
    }
    out
}

fn detection_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = [0.0, 0.01, 0.1, 0.2, 0.37, 0.5, 0.9, 1.0];
    let mut enum_err = 0.0f64;
    for n in 1..=4 {
        for _ in 0..5 {
            let mut levels: Vec<f64> = (0..3usize.pow(n as u32)).map(|_| rng.random::<f64>()).collect();
            let total: f64 = levels.iter().sum();
            levels.iter_mut().for_each(|x| *x /= total);
            for &eps in &grid {
                let got = forward_detection(&levels, n, eps)?;
                let want = brute_force_detection(&levels, n, eps);
                enum_err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(enum_err, f64::max);
            }
        }
    }
    let mut closed_err = 0.0f64;
    let mut ground = vec![0.0; 27];
    ground[0] = 1.0;
    for &eps in &grid {
        let obs = forward_detection(&ground, 3, eps)?;
        let q = 1.0 - eps;
        let parts = [
            obs[0b111],
            obs[0b110] + obs[0b101] + obs[0b011],
            obs[0b100] + obs[0b010] + obs[0b001],
            obs[0],
        ];
        let closed = [q.powi(3), 3.0 * eps * q * q, 3.0 * eps * eps * q, eps.powi(3)];
        for k in 0..4 {
            closed_err = closed_err.max((parts[k] - closed[k]).abs()).max((three_atom_partitions(eps)[k] - closed[k]).abs());
        }
    }
    let times: Vec<f64> = (0..=28).map(|k| k as f64 * 0.25).collect();
    let mut fit_err = 0.0f64;
    for (coeffs, degree) in [(vec![0.01, 0.027], 1), (vec![0.01, 0.015, 0.0015], 2)] {
        let eps = |t: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c);
        let data: Vec<(f64, f64)> = times.iter().map(|&t| (t, (1.0 - eps(t)).powi(3))).collect();
        let fit = fit_epsilon(&data, degree)?;
        for (got, want) in fit.coefficients.iter().zip(&coeffs) {
            fit_err = fit_err.max((got - want).abs());
        }
    }
    Ok(all(&[
        (enum_err <= 1e-12, format!("enumeration N<=4 max error {enum_err:.1e}")),
        (closed_err <= 1e-12, format!("closed forms {closed_err:.1e} (<= 1e-12)")),
        (fit_err <= 1e-6, format!("fit round trip {fit_err:.1e} (<= 1e-6)")),
    ]))
}

fn temperature_ablation() -> Check {
    let r = scenarios::temperature_ablation(&cfg(ScenarioKind::TemperatureAblation))?;
    let m = &r.metrics;
    Ok(all(&[
        (
            m.motion_only_deviation > m.loss_only_deviation,
            format!(
                "at {} us motion-only deviation {:.3} > loss-only {:.3}",
                m.compare_at_us, m.motion_only_deviation, m.loss_only_deviation
            ),
        ),
        (
            m.low_temperature_envelope > m.nominal_envelope,
            format!(
                "at {} us envelope {:.3} at {} uK > {:.3} at 50 uK",
                m.low_temperature_compare_at_us, m.low_temperature_envelope, m.low_temperature_uk, m.nominal_envelope
            ),
        ),
    ]))
}

fn long_chain() -> Check {
    let n = 20;
    let mut ideal = cfg(ScenarioKind::LongChain);
    ideal.long_chain.ideal = true;
    let r0 = scenarios::long_chain(&ideal)?;

    // matrix exponential of the hopping matrix assembled here
    let zs: Vec<f64> = (0..n).map(|i| 20.0 * i as f64).collect();
    let h = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { C3 / (zs[i] - zs[j]).abs().powi(3) });
    let mut oracle_err = 0.0f64;
    for (k, &t) in r0.taus.iter().enumerate() {
        let u = (h.map(|x| Complex64::new(0.0, -std::f64::consts::TAU * x * t))).exp();
        for i in 0..n {
            oracle_err = oracle_err.max((u[(i, 0)].norm_sqr() - r0.mean[i][k]).abs());
        }
    }
    let far_peak = r0.mean[n - 1].iter().copied().fold(0.0, f64::max);

    let c = cfg(ScenarioKind::LongChain);
    let start = Instant::now();
    let r = scenarios::long_chain(&c)?;
    let secs = start.elapsed().as_secs_f64();
    let ratio = r.far_site.ratio.unwrap_or(f64::INFINITY);
    Ok(all(&[
        (r0.norm_deviation < 1e-8, format!("T=0 norm {:.1e}", r0.norm_deviation)),
        (oracle_err < 1e-8, format!("matrix-exponential oracle {oracle_err:.1e} (< 1e-8)")),
        (far_peak > 0.05, format!("site 20 reaches {far_peak:.3}")),
        (
            ratio > 3.0,
            format!(
                "50 uK far site peak {:.2e} at {} us vs baseline {:.2e}",
                r.far_site.peak, r.far_site.peak_at_us, r.far_site.baseline
            ),
        ),
        (
            secs < 120.0 && r.n_realizations == 100,
            format!("{} realizations in {secs:.1} s (< 120 s)", r.n_realizations),
        ),
    ]))
}

/// Cheap settings that still exercise every random stream.
fn quick_config(kind: ScenarioKind) -> ScenarioConfig {
    let mut c = cfg(kind);
    c.seed = 42;
    c.two_atom_exchange.taus = TauGrid::new(4.0, 0.1);
    c.two_atom_exchange.n_realizations = 4;
    c.distance_scan.distances = vec![20.0, 30.0, 40.0];
    c.distance_scan.taus = TauGrid::new(8.0, 0.1);
    c.distance_scan.distance_noise = 0.05;
    c.distance_scan.noise_trials = 3;
    c.three_chain.taus = TauGrid::new(2.0, 0.1);
    c.three_chain.n_realizations = 4;
    c.temperature_ablation.taus = TauGrid::new(2.5, 0.1);
    c.temperature_ablation.n_realizations = 3;
    c.temperature_ablation.compare_at = 1.0;
    c.temperature_ablation.low_temperature_compare_at = 1.5;
    c.temperature_ablation.envelope_window = 0.8;
    c.epsilon.n_mc = 2000;
    c.long_chain.n_atoms = 8;
    c.long_chain.taus = TauGrid::new(3.0, 0.1);
    c.long_chain.n_realizations = 6;
    c
}

fn render(kind: ScenarioKind) -> xychain::Result<String> {
    let out = scenarios::run(&quick_config(kind))?;
    let mut s = serde_json::to_string(&out.summary).expect("summary serializes");
    for (name, t) in &out.tables {
        s.push_str(name);
        s.push_str(&t.to_csv_string());
    }
    Ok(s)
}

fn determinism() -> Check {
    let mut checks = Vec::new();
    for kind in ScenarioKind::ALL {
        let mut outputs = Vec::new();
        for workers in [1, 2, 4, 1] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
            outputs.push(pool.install(|| render(kind))?);
        }
        let same = outputs.windows(2).all(|w| w[0] == w[1]);
        checks.push((same, format!("{kind} {} bytes", outputs[0].len())));
    }
    let (pass, detail) = all(&checks);
    Ok((pass, format!("byte-identical over 1/2/4/1 workers: {detail}")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("two-atom frequency law", two_atom_frequency),
        ("power law", power_law),
        ("three-atom nearest-neighbour truncation", three_atom_nearest_neighbour),
        ("long-range beating", long_range_beating),
        ("OBE / closed-system equivalence", obe_equivalence),
        ("contrast with imperfections", contrast_with_imperfections),
        ("detection algebra", detection_algebra),
        ("temperature ablation", temperature_ablation),
        ("N = 20 chain", long_chain),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {} [{name}]: {detail} ({:.1} s)",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
