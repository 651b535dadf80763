use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{pair_couplings_at, ChainGeometry, PhysicalParams, RangeMode, Trajectories};
use crate::units::to_angular;

use super::basis::ProductBasis;
use super::density::ProductDensityMatrix;
use super::hamiltonian::Generator;
use super::sequence::{PulseSegment, PulseSequence};

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObeOptions {
    /// Upper bound on `2 pi dt f`, with `f` the generator's frequency scale.
    pub max_step_phase: f64,
    /// Absolute cap on the step, us.
    pub dt_max: f64,
    /// Eigenvalue check of rho at every sample.
    pub check_positivity: bool,
    /// Set by the scenario, not by configuration.
    #[serde(skip)]
    pub range: RangeMode,
}

impl Default for ObeOptions {
    fn default() -> Self {
        Self {
            max_step_phase: 0.025,
            dt_max: 0.01,
            check_positivity: true,
            range: RangeMode::Full,
        }
    }
}

/// Product-basis populations at each sampled evolution time `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelPopulations {
    pub n_atoms: usize,
    pub taus: Vec<f64>,
    /// `values[k][state]` at `taus[k]`, after the readout pulses.
    pub values: Vec<Vec<f64>>,
}

/// RK4 state for one segment.
struct Stepper {
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
    x: Vec<Complex64>,
}

impl Stepper {
    fn new(len: usize) -> Self {
        let z = || vec![Complex64::new(0.0, 0.0); len];
        Self { k: [z(), z(), z(), z()], tmp: z(), x: z() }
    }
}

struct Evolver<'a> {
    geometry: &'a ChainGeometry,
    params: &'a PhysicalParams,
    trajectories: &'a Trajectories,
    options: &'a ObeOptions,
    basis: ProductBasis,
    stepper: Stepper,
}

impl Evolver<'_> {
    fn couplings(&self, t: f64) -> Result<Vec<f64>> {
        Ok(pair_couplings_at(self.geometry, self.params, self.trajectories, self.options.range, t)?
            .into_iter()
            .map(|(_, _, v)| v)
            .collect())
    }

    /// Advances `rho` through `segment` from absolute time `t0` for `duration`.
    fn evolve(&mut self, rho: &mut ProductDensityMatrix, segment: &PulseSegment, t0: f64, duration: f64) -> Result<()> {
        if duration <= 0.0 {
            return Ok(());
        }
        let generator = Generator::new(&self.basis, segment, self.params, self.options.range);
        let moving = !self.trajectories.is_static() && generator.n_pairs() > 0;
        let c0 = self.couplings(t0)?;
        let c1 = self.couplings(t0 + duration)?;
        let margin = if moving { 1.05 } else { 1.0 };
        let rate = margin * generator.frequency_scale(&c0).max(generator.frequency_scale(&c1));
        let mut dt = self.options.dt_max;
        if rate > 0.0 {
            dt = dt.min(self.options.max_step_phase / to_angular(rate));
        }
        let steps = (duration / dt).ceil().max(1.0) as usize;
        let h = duration / steps as f64;
        let phase = to_angular(rate) * h;
        if phase >= crate::xy::MAX_STEP_PHASE {
            return Err(Error::StepSize { phase, limit: crate::xy::MAX_STEP_PHASE, rate, dt: h });
        }

        let n = rho.data().len();
        let st = &mut self.stepper;
        let mut t = t0;
        let (mut ca, mut cm, mut cb) = (c0.clone(), c0.clone(), c0);
        for _ in 0..steps {
            if moving {
                ca = pair_couplings_at(self.geometry, self.params, self.trajectories, self.options.range, t)?
                    .into_iter()
                    .map(|c| c.2)
                    .collect();
                cm = pair_couplings_at(self.geometry, self.params, self.trajectories, self.options.range, t + 0.5 * h)?
                    .into_iter()
                    .map(|c| c.2)
                    .collect();
                cb = pair_couplings_at(self.geometry, self.params, self.trajectories, self.options.range, t + h)?
                    .into_iter()
                    .map(|c| c.2)
                    .collect();
            }
            let y = rho.data_mut();
            generator.apply(&ca, y, &mut st.k[0], &mut st.x);
            for i in 0..n {
                st.tmp[i] = y[i] + st.k[0][i] * (0.5 * h);
            }
            generator.apply(&cm, &st.tmp, &mut st.k[1], &mut st.x);
            for i in 0..n {
                st.tmp[i] = y[i] + st.k[1][i] * (0.5 * h);
            }
            generator.apply(&cm, &st.tmp, &mut st.k[2], &mut st.x);
            for i in 0..n {
                st.tmp[i] = y[i] + st.k[2][i] * h;
            }
            generator.apply(&cb, &st.tmp, &mut st.k[3], &mut st.x);
            let w = h / 6.0;
            for i in 0..n {
                y[i] += (st.k[0][i] + (st.k[1][i] + st.k[2][i]) * 2.0 + st.k[3][i]) * w;
            }
            t += h;
        }
        Ok(())
    }
}

/// Integrates the master equation through `sequence` for every evolution
/// time in `taus` (ascending). Each sample continues the evolution window
/// and runs the readout pulses on a copy of the state; absolute time, which
/// drives the atomic motion, starts at zero with the first preparation pulse.
pub fn run_sequence(
    sequence: &PulseSequence,
    geometry: &ChainGeometry,
    params: &PhysicalParams,
    trajectories: &Trajectories,
    taus: &[f64],
    options: &ObeOptions,
) -> Result<LevelPopulations> {
    sequence.validate()?;
    let n = geometry.n_atoms();
    if sequence.n_atoms() != n || trajectories.len() != n {
        return Err(Error::Contract(format!(
            "sequence ({}), trajectories ({}) and geometry ({n}) disagree on N",
            sequence.n_atoms(),
            trajectories.len()
        )));
    }
    if taus.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || taus.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Contract("evolution times must be non-negative and ascending".into()));
    }
    let basis = ProductBasis::new(n)?;
    let mut evolver = Evolver {
        geometry,
        params,
        trajectories,
        options,
        stepper: Stepper::new(basis.dim() * basis.dim()),
        basis,
    };

    let mut rho = ProductDensityMatrix::pure_product(&sequence.initial)?;
    let mut t = 0.0;
    for seg in &sequence.preparation {
        evolver.evolve(&mut rho, seg, t, seg.duration)?;
        t += seg.duration;
    }
    rho.check(t, options.check_positivity)?;

    let start = t;
    let mut tau_now = 0.0;
    let window = PulseSegment::new(sequence.evolution, 1.0);
    let mut values = Vec::with_capacity(taus.len());
    for &tau in taus {
        evolver.evolve(&mut rho, &window, start + tau_now, tau - tau_now)?;
        tau_now = tau;
        let mut out = rho.clone();
        let mut tr = start + tau;
        for seg in &sequence.readout {
            evolver.evolve(&mut out, seg, tr, seg.duration)?;
            tr += seg.duration;
        }
        out.check(tr, options.check_positivity)?;
        values.push(out.populations());
    }
    Ok(LevelPopulations { n_atoms: n, taus: taus.to_vec(), values })
}

/// Largest population change when the step bound is halved.
pub fn convergence_gap(
    sequence: &PulseSequence,
    geometry: &ChainGeometry,
    params: &PhysicalParams,
    trajectories: &Trajectories,
    taus: &[f64],
    options: &ObeOptions,
) -> Result<f64> {
    let coarse = run_sequence(sequence, geometry, params, trajectories, taus, options)?;
    let fine_opts = ObeOptions {
        max_step_phase: 0.5 * options.max_step_phase,
        dt_max: 0.5 * options.dt_max,
        ..*options
    };
    let fine = run_sequence(sequence, geometry, params, trajectories, taus, &fine_opts)?;
    Ok(coarse
        .values
        .iter()
        .flatten()
        .zip(fine.values.iter().flatten())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}
