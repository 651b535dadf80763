use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use xychain::analysis::beat_spectrum;
use xychain::model::RangeMode;
use xychain::xy::{build_coupling_matrix, eigenmodes, propagate, SpinState};
use xychain::{ChainGeometry, PhysicalParams};

/// Full `2^N` XY Hamiltonian, bit `N-1-i` set when atom `i` is up.
fn spin_hamiltonian(j: &DMatrix<f64>) -> DMatrix<Complex64> {
    let n = j.nrows();
    let dim = 1 << n;
    let bit = |i: usize| 1usize << (n - 1 - i);
    let mut h = DMatrix::zeros(dim, dim);
    for s in 0..dim {
        for a in 0..n {
            for b in 0..n {
                // sigma+_a sigma-_b
                if a != b && s & bit(b) != 0 && s & bit(a) == 0 {
                    let t = s ^ bit(a) ^ bit(b);
                    h[(t, s)] += Complex64::new(j[(a, b)], 0.0);
                }
            }
        }
    }
    h
}

fn evolve(h: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    (h * Complex64::new(0.0, -std::f64::consts::TAU * t)).exp()
}

fn chain(zs: &[f64], range: RangeMode) -> DMatrix<f64> {
    let g = ChainGeometry::from_z(zs).unwrap();
    build_coupling_matrix(&g, &PhysicalParams::default(), range).unwrap().entries().clone()
}

#[test]
fn single_excitation_matches_full_hilbert_space() {
    for (zs, range) in [
        (vec![0.0, 30.0], RangeMode::Full),
        (vec![0.0, 20.0, 40.0], RangeMode::Full),
        (vec![0.0, 20.0, 40.0], RangeMode::NearestNeighbor),
        (vec![0.0, 17.0, 41.0, 60.0], RangeMode::Full),
    ] {
        let n = zs.len();
        let j = chain(&zs, range);
        let h = spin_hamiltonian(&j);
        let cm = build_coupling_matrix(&ChainGeometry::from_z(&zs).unwrap(), &PhysicalParams::default(), range).unwrap();
        let times: Vec<f64> = (0..=40).map(|k| 0.175 * k as f64).collect();
        for start in 0..n {
            let pops = propagate(&cm, &SpinState::excited_at(n, start), &times).unwrap();
            for (k, &t) in times.iter().enumerate() {
                let u = evolve(&h, t);
                let col = 1usize << (n - 1 - start);
                for i in 0..n {
                    let want = u[(1usize << (n - 1 - i), col)].norm_sqr();
                    assert!((pops.values[(i, k)] - want).abs() < 1e-8, "n={n} start={start} t={t} site {i}");
                }
            }
        }
    }
}

#[test]
fn full_space_conserves_magnetization() {
    let j = chain(&[0.0, 20.0, 40.0, 60.0], RangeMode::Full);
    let h = spin_hamiltonian(&j);
    let n = 4;
    // start in |up down up down>
    let s0 = 0b1010;
    let mz = |s: usize| (0..n).map(|i| if s >> i & 1 == 1 { 1.0 } else { -1.0 }).sum::<f64>();
    for t in [0.3, 1.7, 4.0] {
        let u = evolve(&h, t);
        let m: f64 = (0..16).map(|s| u[(s, s0)].norm_sqr() * mz(s)).sum();
        assert!((m - mz(s0)).abs() < 1e-8, "t={t}: {m}");
    }
}

#[test]
fn beats_are_pairwise_eigenvalue_gaps() {
    let cm = build_coupling_matrix(&ChainGeometry::linear(3, 20.0).unwrap(), &PhysicalParams::default(), RangeMode::Full)
        .unwrap();
    let values = eigenmodes(&cm).values;
    let beats = beat_spectrum(&values).unwrap();
    let mut want: Vec<f64> = Vec::new();
    for i in 0..3 {
        for k in (i + 1)..3 {
            want.push((values[k] - values[i]).abs());
        }
    }
    want.sort_by(f64::total_cmp);
    let mut got = beats.clone();
    got.sort_by(f64::total_cmp);
    assert_eq!(got.len(), 3);
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn norm_is_conserved(gaps in prop::collection::vec(8.0f64..60.0, 1..7), t in 0.0f64..20.0, site in 0usize..7) {
        let mut zs = vec![0.0];
        for g in &gaps {
            zs.push(zs.last().unwrap() + g);
        }
        let n = zs.len();
        let cm = build_coupling_matrix(&ChainGeometry::from_z(&zs).unwrap(), &PhysicalParams::default(), RangeMode::Full).unwrap();
        let pops = propagate(&cm, &SpinState::excited_at(n, site % n), &[t]).unwrap();
        prop_assert!(pops.max_norm_deviation() < 1e-10);
    }

    /// Scaling every distance by `s` scales the couplings by `s^-3`.
    #[test]
    fn dilation_rescales_time(s in 0.6f64..2.0, t in 0.0f64..8.0) {
        let g = ChainGeometry::linear(4, 20.0).unwrap();
        let p = PhysicalParams::default();
        let base = build_coupling_matrix(&g, &p, RangeMode::Full).unwrap();
        let wide = build_coupling_matrix(&g.scaled(s), &p, RangeMode::Full).unwrap();
        let init = SpinState::excited_at(4, 0);
        let a = propagate(&wide, &init, &[t]).unwrap();
        let b = propagate(&base, &init, &[t / s.powi(3)]).unwrap();
        for i in 0..4 {
            prop_assert!((a.values[(i, 0)] - b.values[(i, 0)]).abs() < 1e-9);
        }
    }

    /// Reversing the chain mirrors the populations.
    #[test]
    fn mirror_symmetry(gaps in prop::collection::vec(10.0f64..40.0, 2..5), t in 0.0f64..6.0) {
        let mut zs = vec![0.0];
        for g in &gaps {
            zs.push(zs.last().unwrap() + g);
        }
        let n = zs.len();
        let rev: Vec<f64> = zs.iter().rev().map(|z| -z).collect();
        let p = PhysicalParams::default();
        let fwd = build_coupling_matrix(&ChainGeometry::from_z(&zs).unwrap(), &p, RangeMode::Full).unwrap();
        let bwd = build_coupling_matrix(&ChainGeometry::from_z(&rev).unwrap(), &p, RangeMode::Full).unwrap();
        let a = propagate(&fwd, &SpinState::excited_at(n, 0), &[t]).unwrap();
        let b = propagate(&bwd, &SpinState::excited_at(n, n - 1), &[t]).unwrap();
        for i in 0..n {
            prop_assert!((a.values[(i, 0)] - b.values[(n - 1 - i, 0)]).abs() < 1e-9);
        }
    }
}
