use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;
use crate::model::{pair_couplings_at, ChainGeometry, PhysicalParams, RangeMode, Trajectories};
use crate::units::to_angular;

use super::basis::{Level, ProductBasis};
use super::density::ProductDensityMatrix;
use super::sequence::{PulseSegment, SegmentKind};

/// Real symmetric Hamiltonian in the product basis, MHz.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHamiltonian {
    pub dim: usize,
    pub diagonal: Vec<f64>,
    /// Off-diagonal entries `(row, col, value)`, both triangles listed.
    pub off_diagonal: Vec<(usize, usize, f64)>,
}

impl SparseHamiltonian {
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, Complex64::new(0.0, 0.0));
        for (k, d) in self.diagonal.iter().enumerate() {
            m[(k, k)] += *d;
        }
        for &(a, b, v) in &self.off_diagonal {
            m[(a, b)] += v;
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.diagonal.iter().all(|d| *d == 0.0) && self.off_diagonal.iter().all(|e| e.2 == 0.0)
    }
}

/// Per-atom decay channel into `g`.
#[derive(Debug, Clone)]
struct Feed {
    atom: usize,
    level: Level,
    rate: f64,
}

/// Everything needed to evaluate the right-hand side within one segment.
/// Pair couplings are supplied per evaluation so moving atoms only cost a
/// coupling recomputation.
#[derive(Debug, Clone)]
pub(crate) struct Generator {
    basis: ProductBasis,
    diagonal: Vec<f64>,
    drive: Vec<(u32, u32, f64)>,
    exchange: Vec<(u32, u32, u32)>,
    n_pairs: usize,
    decay: Vec<f64>,
    feeds: Vec<Feed>,
    ground_states: Vec<Vec<usize>>,
    drive_rate: f64,
}

impl Generator {
    pub(crate) fn new(basis: &ProductBasis, segment: &PulseSegment, params: &PhysicalParams, range: RangeMode) -> Self {
        let n = basis.n_atoms();
        let dim = basis.dim();
        let optical = segment.kind == SegmentKind::Optical;
        let microwave = segment.kind == SegmentKind::Microwave;

        let mut diagonal = vec![0.0; dim];
        let mut drive = Vec::new();
        let mut drive_rate = 0.0f64;
        for i in 0..n {
            let s = basis.stride(i);
            let detuning = params.delta_opt.get(i) + if segment.is_addressed(i) { params.light_shift } else { 0.0 };
            if optical {
                let half = 0.5 * params.omega_opt.get(i);
                drive_rate = drive_rate.max(params.omega_opt.get(i).abs()).max(detuning.abs());
                for a in 0..dim {
                    match basis.level(a, i) {
                        Level::Ground => {
                            drive.push((a as u32, (a + s) as u32, half));
                            drive.push(((a + s) as u32, a as u32, half));
                        }
                        Level::Up | Level::Down => diagonal[a] -= detuning,
                    }
                }
            }
            if microwave {
                let half = 0.5 * params.omega_mw;
                drive_rate = drive_rate.max(params.omega_mw.abs());
                for a in 0..dim {
                    if basis.level(a, i) == Level::Up {
                        drive.push((a as u32, (a + s) as u32, half));
                        drive.push(((a + s) as u32, a as u32, half));
                    }
                }
            }
        }

        let mut exchange = Vec::new();
        let mut n_pairs = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if !range.includes(i, j) {
                    continue;
                }
                let (si, sj) = (basis.stride(i), basis.stride(j));
                for a in 0..dim {
                    if basis.level(a, i) == Level::Up && basis.level(a, j) == Level::Down {
                        // i: up -> down, j: down -> up
                        let b = a + si - sj;
                        exchange.push((a as u32, b as u32, n_pairs as u32));
                        exchange.push((b as u32, a as u32, n_pairs as u32));
                    }
                }
                n_pairs += 1;
            }
        }

        let up_rate = |i: usize| params.gamma_up + if optical { params.gamma_eff.get(i) } else { 0.0 };
        let mut decay = vec![0.0; dim];
        for (a, d) in decay.iter_mut().enumerate() {
            for i in 0..n {
                *d += match basis.level(a, i) {
                    Level::Up => up_rate(i),
                    Level::Down => params.gamma_down,
                    Level::Ground => 0.0,
                };
            }
        }
        let mut feeds = Vec::new();
        for i in 0..n {
            for (level, rate) in [(Level::Up, up_rate(i)), (Level::Down, params.gamma_down)] {
                if rate != 0.0 {
                    feeds.push(Feed { atom: i, level, rate });
                }
            }
        }
        let ground_states = (0..n)
            .map(|i| (0..dim).filter(|&a| basis.level(a, i) == Level::Ground).collect())
            .collect();

        Self {
            basis: basis.clone(),
            diagonal,
            drive,
            exchange,
            n_pairs,
            decay,
            feeds,
            ground_states,
            drive_rate,
        }
    }

    pub(crate) fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    /// Largest frequency of the generator, MHz: the eigenvalue spread of `H`
    /// (exact up to 81 states, a Gershgorin bound above), never below the
    /// individual drive, detuning and coupling rates. Decay rates in 1/us
    /// are converted to ordinary frequency.
    pub(crate) fn frequency_scale(&self, couplings: &[f64]) -> f64 {
        let dim = self.basis.dim();
        let spread = if dim <= 81 {
            let h = self.hamiltonian(couplings);
            let mut m = DMatrix::<f64>::zeros(dim, dim);
            for (k, d) in h.diagonal.iter().enumerate() {
                m[(k, k)] = *d;
            }
            for (a, b, v) in h.off_diagonal {
                m[(a, b)] += v;
            }
            let ev = nalgebra::SymmetricEigen::new(m).eigenvalues;
            ev.max() - ev.min()
        } else {
            let mut rows = self.diagonal.iter().map(|d| d.abs()).collect::<Vec<_>>();
            for &(a, _, v) in &self.drive {
                rows[a as usize] += v.abs();
            }
            for &(a, _, p) in &self.exchange {
                rows[a as usize] += couplings[p as usize].abs();
            }
            2.0 * rows.iter().fold(0.0f64, |m, r| m.max(*r))
        };
        let nu_max = couplings.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_decay = self.decay.iter().fold(0.0f64, |m, d| m.max(*d));
        spread
            .max(self.drive_rate)
            .max(nu_max)
            .max(max_decay / std::f64::consts::TAU)
    }

    pub(crate) fn hamiltonian(&self, couplings: &[f64]) -> SparseHamiltonian {
        let mut off_diagonal: Vec<(usize, usize, f64)> =
            self.drive.iter().map(|&(a, b, v)| (a as usize, b as usize, v)).collect();
        off_diagonal.extend(
            self.exchange
                .iter()
                .map(|&(a, b, p)| (a as usize, b as usize, couplings[p as usize])),
        );
        SparseHamiltonian { dim: self.basis.dim(), diagonal: self.diagonal.clone(), off_diagonal }
    }

    /// `out = -2 pi i [H, rho] + L[rho]`; `x` is scratch of the same size.
    pub(crate) fn apply(&self, couplings: &[f64], rho: &[Complex64], out: &mut [Complex64], x: &mut [Complex64]) {
        let dim = self.basis.dim();
        // x = H rho
        for a in 0..dim {
            let d = self.diagonal[a];
            let (row_x, row_r) = (&mut x[a * dim..(a + 1) * dim], &rho[a * dim..(a + 1) * dim]);
            for (xv, rv) in row_x.iter_mut().zip(row_r) {
                *xv = rv * d;
            }
        }
        let mut add_row = |a: usize, c: usize, h: f64| {
            let src = &rho[c * dim..(c + 1) * dim];
            let dst = &mut x[a * dim..(a + 1) * dim];
            for (xv, rv) in dst.iter_mut().zip(src) {
                *xv += rv * h;
            }
        };
        for &(a, c, h) in &self.drive {
            add_row(a as usize, c as usize, h);
        }
        for &(a, c, p) in &self.exchange {
            add_row(a as usize, c as usize, couplings[p as usize]);
        }
        // [H, rho] = H rho - (H rho)^dagger for Hermitian rho and real symmetric H
        let scale = Complex64::new(0.0, -to_angular(1.0));
        for a in 0..dim {
            for b in 0..dim {
                let comm = x[a * dim + b] - x[b * dim + a].conj();
                out[a * dim + b] = scale * comm - rho[a * dim + b] * (0.5 * (self.decay[a] + self.decay[b]));
            }
        }
        self.add_feeds(rho, out);
    }

    fn add_feeds(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let dim = self.basis.dim();
        for feed in &self.feeds {
            let shift = feed.level as usize * self.basis.stride(feed.atom);
            let ground = &self.ground_states[feed.atom];
            for &a in ground {
                let src = (a + shift) * dim + shift;
                for &b in ground {
                    out[a * dim + b] += rho[src + b] * feed.rate;
                }
            }
        }
    }

    pub(crate) fn dissipator(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let dim = self.basis.dim();
        for a in 0..dim {
            for b in 0..dim {
                out[a * dim + b] = -rho[a * dim + b] * (0.5 * (self.decay[a] + self.decay[b]));
            }
        }
        self.add_feeds(rho, out);
    }
}

/// Hamiltonian of `segment` at absolute time `t`, with pair couplings from
/// the displaced positions at `t`.
pub fn hamiltonian_at(
    t: f64,
    segment: &PulseSegment,
    params: &PhysicalParams,
    geometry: &ChainGeometry,
    trajectories: &Trajectories,
    range: RangeMode,
) -> Result<SparseHamiltonian> {
    let basis = ProductBasis::new(geometry.n_atoms())?;
    let generator = Generator::new(&basis, segment, params, range);
    let couplings: Vec<f64> = pair_couplings_at(geometry, params, trajectories, range, t)?
        .into_iter()
        .map(|(_, _, v)| v)
        .collect();
    Ok(generator.hamiltonian(&couplings))
}

/// Dissipator contribution `L[rho]` for a segment of the given kind.
pub fn lindblad_dissipator(rho: &ProductDensityMatrix, params: &PhysicalParams, kind: SegmentKind) -> ProductDensityMatrix {
    let segment = PulseSegment::new(kind, 1.0);
    let generator = Generator::new(rho.basis(), &segment, params, RangeMode::Full);
    let mut out = ProductDensityMatrix::zeros(rho.basis().clone());
    generator.dissipator(rho.data(), out.data_mut());
    out
}
