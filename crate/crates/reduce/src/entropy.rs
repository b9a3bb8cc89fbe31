use roomscan_core::{Error, Result};

const NORM_TOLERANCE: f64 = 1e-9;

/// Rényi entropy of order `alpha` in bits: `log2(Σ pᵢ^α) / (1 − α)`.
pub fn renyi_entropy(p: &[f64], alpha: f64) -> Result<f64> {
    if alpha == 1.0 || !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidArgument(format!("renyi order must be positive, finite and not 1, got {alpha}")));
    }
    if p.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidArgument("probabilities must be nonnegative".into()));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::InvalidArgument(format!("probabilities sum to {total}, not 1")));
    }
    Ok(renyi_unchecked(p, alpha))
}

pub(crate) fn renyi_unchecked(p: &[f64], alpha: f64) -> f64 {
    let s: f64 = if alpha == 3.0 { p.iter().map(|&x| x * x * x).sum() } else { p.iter().map(|&x| x.powf(alpha)).sum() };
    let h = s.log2() / (1.0 - alpha);
    // a delta distribution gives -0.0
    h + 0.0
}
