//! Single-excitation dynamics under the XY Hamiltonian
//! `H = 1/2 sum_{i != j} nu_ij (s+_i s-_j + s-_i s+_j)`.
//!
//! Total magnetization is conserved, so a single flipped spin lives in the
//! N-dimensional subspace spanned by `|i>` (up at site `i`, down elsewhere),
//! where `H` reduces to the symmetric hopping matrix `nu_ij`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{pair_coupling, ChainGeometry, PhysicalParams, RangeMode, Trajectories};
use crate::units::to_angular;

/// Largest allowed `2 pi nu_max dt` for piecewise-constant propagation.
pub const MAX_STEP_PHASE: f64 = 0.05;

const NORM_TOLERANCE: f64 = 1e-8;

/// Symmetric hopping matrix, MHz, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    entries: DMatrix<f64>,
    range: RangeMode,
}

impl CouplingMatrix {
    /// Builds from an explicit matrix; it must be square, symmetric with a
    /// zero diagonal, and respect the range mode.
    pub fn from_matrix(entries: DMatrix<f64>, range: RangeMode) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(Error::Contract("coupling matrix must be square".into()));
        }
        for i in 0..n {
            if entries[(i, i)] != 0.0 {
                return Err(Error::Contract(format!("diagonal entry {i} is not zero")));
            }
            for j in 0..n {
                if entries[(i, j)] != entries[(j, i)] {
                    return Err(Error::Contract(format!("matrix not symmetric at ({i}, {j})")));
                }
                if i != j && !range.includes(i, j) && entries[(i, j)] != 0.0 {
                    return Err(Error::Contract(format!(
                        "entry ({i}, {j}) must vanish in {range} mode"
                    )));
                }
            }
        }
        Ok(Self { entries, range })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn range(&self) -> RangeMode {
        self.range
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Largest absolute hopping frequency.
    pub fn max_coupling(&self) -> f64 {
        self.entries.amax()
    }
}

/// Amplitudes over the single-excitation basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    amplitudes: DVector<Complex64>,
}

impl SpinState {
    pub fn new(amplitudes: DVector<Complex64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Contract(format!("spin state norm {norm} is not 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Excitation localised on `site`.
    pub fn excited_at(n: usize, site: usize) -> Self {
        let mut amplitudes = DVector::zeros(n);
        amplitudes[site] = Complex64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn n(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Site populations `P_i(t)`, stored as an `N x T` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Populations {
    pub times: Vec<f64>,
    pub values: DMatrix<f64>,
}

impl Populations {
    pub fn site(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    pub fn at(&self, k: usize) -> Vec<f64> {
        self.values.column(k).iter().copied().collect()
    }

    /// Largest deviation of `sum_i P_i(t)` from one.
    pub fn max_norm_deviation(&self) -> f64 {
        self.values
            .column_iter()
            .map(|c| (c.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Eigen-decomposition of a coupling matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigenmodes {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

fn coupling_from_displacements(
    geometry: &ChainGeometry,
    params: &PhysicalParams,
    range: RangeMode,
    displacements: &[nalgebra::Vector3<f64>],
) -> Result<CouplingMatrix> {
    let n = geometry.n_atoms();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if range.includes(i, j) {
                let v = pair_coupling(geometry, params, i, j, &displacements[i], &displacements[j])?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
    }
    Ok(CouplingMatrix { entries: m, range })
}

/// Hopping matrix `C3 / R_ij^3` at rest, filtered by `range`.
pub fn build_coupling_matrix(
    geometry: &ChainGeometry,
    params: &PhysicalParams,
    range: RangeMode,
) -> Result<CouplingMatrix> {
    let zeros = vec![nalgebra::Vector3::zeros(); geometry.n_atoms()];
    coupling_from_displacements(geometry, params, range, &zeros)
}

/// Hopping matrix for atoms displaced along `trajectories` at time `t`.
pub fn coupling_matrix_at(
    geometry: &ChainGeometry,
    params: &PhysicalParams,
    trajectories: &Trajectories,
    range: RangeMode,
    t: f64,
) -> Result<CouplingMatrix> {
    coupling_from_displacements(geometry, params, range, &trajectories.displacements_at(t))
}

pub fn eigenmodes(matrix: &CouplingMatrix) -> Eigenmodes {
    let eig = SymmetricEigen::new(matrix.entries.clone());
    let n = matrix.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Eigenmodes { values, vectors }
}

/// `exp(-2 pi i M h)` applied to `psi` through the eigenmodes of `M`.
fn evolve_in_modes(modes: &Eigenmodes, psi: &DVector<Complex64>, h: f64) -> DVector<Complex64> {
    let v = &modes.vectors;
    let n = psi.len();
    let mut coeffs = DVector::<Complex64>::zeros(n);
    for k in 0..n {
        let overlap: Complex64 = (0..n).map(|i| psi[i] * v[(i, k)]).sum();
        let phase = -to_angular(modes.values[k]) * h;
        coeffs[k] = overlap * Complex64::from_polar(1.0, phase);
    }
    DVector::from_fn(n, |i, _| (0..n).map(|k| coeffs[k] * v[(i, k)]).sum())
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Contract("sample times must be finite and non-negative".into()));
    }
    Ok(())
}

/// Exact propagation of `initial` under a static coupling matrix.
pub fn propagate(matrix: &CouplingMatrix, initial: &SpinState, times: &[f64]) -> Result<Populations> {
    check_times(times)?;
    if initial.n() != matrix.n() {
        return Err(Error::Contract(format!(
            "state has {} sites, matrix {}",
            initial.n(),
            matrix.n()
        )));
    }
    let modes = eigenmodes(matrix);
    let mut values = DMatrix::zeros(matrix.n(), times.len());
    for (k, &t) in times.iter().enumerate() {
        let psi = if t == 0.0 {
            initial.amplitudes.clone()
        } else {
            evolve_in_modes(&modes, &initial.amplitudes, t)
        };
        for i in 0..matrix.n() {
            values[(i, k)] = psi[i].norm_sqr();
        }
    }
    Ok(Populations { times: times.to_vec(), values })
}

/// Propagation with couplings rebuilt from the displaced positions at the
/// midpoint of every step of length at most `dt`. Each step applies the
/// exact exponential of the frozen matrix. `times` must be ascending.
pub fn propagate_time_dependent(
    geometry: &ChainGeometry,
    params: &PhysicalParams,
    trajectories: &Trajectories,
    range: RangeMode,
    initial: &SpinState,
    times: &[f64],
    dt: f64,
) -> Result<Populations> {
    check_times(times)?;
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Contract("sample times must be ascending".into()));
    }
    let n = geometry.n_atoms();
    if initial.n() != n || trajectories.len() != n {
        return Err(Error::Contract("state, trajectories and geometry disagree on N".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let check_step = |m: &CouplingMatrix, h: f64| -> Result<()> {
        let rate = m.max_coupling();
        let phase = to_angular(rate) * h;
        if phase >= MAX_STEP_PHASE {
            return Err(Error::StepSize { phase, limit: MAX_STEP_PHASE, rate, dt: h });
        }
        Ok(())
    };
    check_step(&coupling_matrix_at(geometry, params, trajectories, range, 0.0)?, dt)?;

    let frozen = if trajectories.is_static() {
        Some(eigenmodes(&coupling_matrix_at(geometry, params, trajectories, range, 0.0)?))
    } else {
        None
    };

    let mut psi = initial.amplitudes.clone();
    let mut t = 0.0;
    let mut values = DMatrix::zeros(n, times.len());
    for (k, &ts) in times.iter().enumerate() {
        let span = ts - t;
        if span > 0.0 {
            let steps = (span / dt).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for s in 0..steps {
                let mid = t + (s as f64 + 0.5) * h;
                psi = match &frozen {
                    Some(modes) => evolve_in_modes(modes, &psi, h),
                    None => {
                        let m = coupling_matrix_at(geometry, params, trajectories, range, mid)?;
                        check_step(&m, h)?;
                        evolve_in_modes(&eigenmodes(&m), &psi, h)
                    }
                };
            }
            t = ts;
        }
        let norm = psi.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Integrator {
                time: ts,
                detail: format!("norm drifted to {norm}"),
            });
        }
        for i in 0..n {
            values[(i, k)] = psi[i].norm_sqr();
        }
    }
    Ok(Populations { times: times.to_vec(), values })
}
