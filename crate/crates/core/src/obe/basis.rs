use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense OBE path limit: `3^6 = 729` basis states.
pub const MAX_OBE_ATOMS: usize = 6;

/// Internal level of one atom. The discriminant is its basis digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    #[serde(alias = "g")]
    Ground = 0,
    #[serde(alias = "u")]
    Up = 1,
    #[serde(alias = "d")]
    Down = 2,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Ground, Level::Up, Level::Down];

    pub fn from_digit(d: usize) -> Level {
        Level::ALL[d]
    }

    pub fn symbol(self) -> char {
        match self {
            Level::Ground => 'g',
            Level::Up => 'u',
            Level::Down => 'd',
        }
    }

    pub fn is_rydberg(self) -> bool {
        self != Level::Ground
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Base-3 indexing of `{g, up, down}^N`; atom 0 is the most significant digit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductBasis {
    n: usize,
    dim: usize,
    strides: Vec<usize>,
}

impl ProductBasis {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_OBE_ATOMS {
            return Err(Error::Config(format!(
                "the density-matrix path supports 1..={MAX_OBE_ATOMS} atoms, got {n}"
            )));
        }
        let dim = 3usize.pow(n as u32);
        let strides = (0..n).map(|i| 3usize.pow((n - 1 - i) as u32)).collect();
        Ok(Self { n, dim, strides })
    }

    pub fn n_atoms(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn stride(&self, atom: usize) -> usize {
        self.strides[atom]
    }

    #[inline]
    pub fn level(&self, index: usize, atom: usize) -> Level {
        Level::from_digit((index / self.strides[atom]) % 3)
    }

    pub fn index(&self, levels: &[Level]) -> usize {
        levels
            .iter()
            .zip(&self.strides)
            .map(|(l, s)| *l as usize * s)
            .sum()
    }

    pub fn levels(&self, index: usize) -> Vec<Level> {
        (0..self.n).map(|i| self.level(index, i)).collect()
    }

    /// Label such as `"gud"`.
    pub fn label(&self, index: usize) -> String {
        self.levels(index).into_iter().map(Level::symbol).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let b = ProductBasis::new(3).unwrap();
        assert_eq!(b.dim(), 27);
        for k in 0..27 {
            assert_eq!(b.index(&b.levels(k)), k);
        }
        assert_eq!(b.index(&[Level::Up, Level::Down, Level::Down]), 9 + 2 * 3 + 2);
        assert_eq!(b.label(17), "udd");
    }

    #[test]
    fn size_limits() {
        assert!(ProductBasis::new(0).is_err());
        assert!(ProductBasis::new(MAX_OBE_ATOMS).is_ok());
        assert!(ProductBasis::new(MAX_OBE_ATOMS + 1).is_err());
    }
}
