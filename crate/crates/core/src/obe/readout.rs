use crate::error::{Error, Result};

use super::basis::{Level, ProductBasis};
use super::sequence::ReadoutConvention;

/// Maps product-basis populations over `{g, up, down}^N` to the true
/// recapture patterns over `{1, 0}^N` (1 = atom would be recaptured).
///
/// Pattern index: atom 0 is the most significant bit, so pattern `0b100`
/// of three atoms is `P_100`.
pub fn project_to_readout(levels: &[f64], n_atoms: usize, convention: ReadoutConvention) -> Result<Vec<f64>> {
    let basis = ProductBasis::new(n_atoms)?;
    if levels.len() != basis.dim() {
        return Err(Error::Contract(format!(
            "expected {} level populations, got {}",
            basis.dim(),
            levels.len()
        )));
    }
    let total: f64 = levels.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::Contract(format!("level populations sum to {total}")));
    }
    let recaptured = |l: Level| match convention {
        ReadoutConvention::AfterDeexcitation => l == Level::Ground,
        ReadoutConvention::IdealDeexcitation => l != Level::Down,
    };
    let mut out = vec![0.0; 1 << n_atoms];
    for (k, p) in levels.iter().enumerate() {
        let pattern = (0..n_atoms).fold(0usize, |acc, i| (acc << 1) | recaptured(basis.level(k, i)) as usize);
        out[pattern] += p;
    }
    Ok(out)
}
