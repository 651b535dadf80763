use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

use super::basis::{Level, ProductBasis};

/// Row-major `3^N x 3^N` density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDensityMatrix {
    basis: ProductBasis,
    data: Vec<Complex64>,
}

impl ProductDensityMatrix {
    pub fn zeros(basis: ProductBasis) -> Self {
        let dim = basis.dim();
        Self { basis, data: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    /// `|levels><levels|`.
    pub fn pure_product(levels: &[Level]) -> Result<Self> {
        let basis = ProductBasis::new(levels.len())?;
        let k = basis.index(levels);
        let mut rho = Self::zeros(basis);
        rho.set(k, k, Complex64::new(1.0, 0.0));
        Ok(rho)
    }

    pub fn from_dense(basis: ProductBasis, m: &DMatrix<Complex64>) -> Result<Self> {
        let dim = basis.dim();
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::Contract(format!("expected a {dim}x{dim} matrix")));
        }
        let data = (0..dim * dim).map(|k| m[(k / dim, k % dim)]).collect();
        Ok(Self { basis, data })
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = self.dim();
        DMatrix::from_row_slice(dim, dim, &self.data)
    }

    pub fn basis(&self) -> &ProductBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> Complex64 {
        self.data[a * self.dim() + b]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, v: Complex64) {
        let dim = self.dim();
        self.data[a * dim + b] = v;
    }

    pub(crate) fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|k| self.get(k, k)).sum()
    }

    /// Diagonal of rho in the product basis.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.get(k, k).re).collect()
    }

    /// `max |rho_ab - conj(rho_ba)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for a in 0..dim {
            for b in a..dim {
                worst = worst.max((self.get(a, b) - self.get(b, a).conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_dense();
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.min()
    }

    /// `<sum_i (|up><up|_i - |down><down|_i)>`.
    pub fn magnetization(&self) -> f64 {
        let b = &self.basis;
        (0..self.dim())
            .map(|k| {
                let m: i32 = (0..b.n_atoms())
                    .map(|i| match b.level(k, i) {
                        Level::Up => 1,
                        Level::Down => -1,
                        Level::Ground => 0,
                    })
                    .sum();
                m as f64 * self.get(k, k).re
            })
            .sum()
    }

    /// Trace, Hermiticity and (optionally) positivity checks.
    pub fn check(&self, time: f64, positivity: bool) -> Result<()> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(Error::Integrator { time, detail: format!("trace drifted to {tr}") });
        }
        let herm = self.hermiticity_error();
        if herm > 1e-9 {
            return Err(Error::Integrator { time, detail: format!("hermiticity error {herm:e}") });
        }
        if positivity {
            let lo = self.min_eigenvalue();
            if lo < -1e-7 {
                return Err(Error::Integrator { time, detail: format!("negative eigenvalue {lo:e}") });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_state_properties() {
        let rho = ProductDensityMatrix::pure_product(&[Level::Up, Level::Down, Level::Down]).unwrap();
        assert_eq!(rho.trace(), Complex64::new(1.0, 0.0));
        assert_eq!(rho.magnetization(), -1.0);
        assert!(rho.min_eigenvalue().abs() < 1e-12);
        assert!(rho.check(0.0, true).is_ok());
        let pops = rho.populations();
        assert_eq!(pops[rho.basis().index(&[Level::Up, Level::Down, Level::Down])], 1.0);
    }

    #[test]
    fn checks_catch_violations() {
        let mut rho = ProductDensityMatrix::pure_product(&[Level::Ground]).unwrap();
        rho.set(1, 1, Complex64::new(-0.01, 0.0));
        rho.set(0, 0, Complex64::new(1.01, 0.0));
        let err = rho.check(2.5, true).unwrap_err();
        assert!(matches!(err, Error::Integrator { time, .. } if time == 2.5));
    }
}
