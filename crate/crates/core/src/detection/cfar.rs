//! Empirical-quantile CFAR threshold.
//!
//! `gamma = q(1 - p_fa) * kappa`, where `q` is the nearest-rank quantile of the
//! coarse-grid pseudospectrum and `kappa >= 1` is a scale calibrated on
//! noise-only scenes (see [`calibrate_scale`]).

use crate::error::{Error, Result};
use crate::music::SpectrumGrid;

/// Nearest-rank quantile of `values` at probability `p`.
pub fn empirical_quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (p * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

fn check_probability(p_fa: f64) -> Result<()> {
    if !(p_fa > 0.0 && p_fa < 1.0) {
        return Err(Error::Config(format!("p_FA must lie in (0, 1), got {p_fa}")));
    }
    Ok(())
}

/// Detection threshold for a coarse grid.
pub fn cfar_threshold(grid: &SpectrumGrid, p_fa: f64, scale: f64) -> Result<f64> {
    check_probability(p_fa)?;
    if !(scale >= 1.0) {
        return Err(Error::Config(format!("CFAR scale must be at least 1, got {scale}")));
    }
    Ok(empirical_quantile(&grid.flat_values(), 1.0 - p_fa)? * scale)
}

/// Calibrates the CFAR scale from noise-only statistics.
///
/// `ratios[j]` is the strongest refined peak of noise-only trial `j` divided by
/// that trial's grid quantile, or 0 when the trial produced no peak at all.
/// The returned scale is the smallest value for which at most
/// `max(1, round(p_fa * J))` trials reach the gate, floored at 1.
pub fn calibrate_scale(ratios: &[f64], p_fa: f64) -> Result<f64> {
    check_probability(p_fa)?;
    if ratios.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let mut sorted = ratios.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let allowed = ((p_fa * sorted.len() as f64).round() as usize).max(1);
    let scale = if allowed >= sorted.len() {
        1.0
    } else {
        // strictly above the first ratio that must be rejected
        let reject = sorted[allowed];
        let keep = sorted[allowed - 1];
        if keep > reject {
            0.5 * (keep + reject)
        } else {
            reject * (1.0 + 1e-12)
        }
    };
    Ok(scale.max(1.0))
}
