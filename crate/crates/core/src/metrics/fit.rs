//! Power-law fits of time increments over dyadic ladders.

use serde::{Deserialize, Serialize};

use super::ParabolicCylinder;
use crate::error::{LabError, Result};
use crate::field::SpaceTimeField;
use crate::quad::fit_line;

/// Ladder levels dropped at the fine end, where discretization noise rules.
pub const DROPPED_LEVELS: usize = 2;
pub const MIN_LEVELS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeFit {
    /// Fitted slope; `+∞` when every increment vanishes.
    pub exponent: f64,
    /// Maximum absolute deviation in log space.
    pub residual: f64,
    pub slope_se: f64,
    /// `(τ, sup_t |δ_τu|)` for the levels used in the fit.
    pub levels: Vec<(f64, f64)>,
}

/// Steps `m` of the ladder `τ_j = ℓ·2^{−j}`, `j ≥ 1`, snapped to `Δt` and
/// deduplicated, coarsest first, with the finest [`DROPPED_LEVELS`] removed.
pub(crate) fn ladder_steps(ell: f64, dt: f64, max_step: usize) -> Vec<usize> {
    let mut steps: Vec<usize> = Vec::new();
    let mut tau = ell / 2.0;
    while tau >= dt * (1.0 - 1e-9) {
        let m = ((tau / dt).round() as usize).max(1);
        if m <= max_step && steps.last() != Some(&m) {
            steps.push(m);
        }
        tau /= 2.0;
    }
    let keep = steps.len().saturating_sub(DROPPED_LEVELS);
    steps.truncate(keep);
    steps
}

/// Fits `sup_t |δ_τu(t)| ∝ τ^exponent` for a uniform series of length
/// `ℓ/Δt + 1`, taking both `t` and `t − τ` inside the series.
pub fn fit_series_exponent(series: &[f64], dt: f64, ell: f64) -> Result<TimeFit> {
    let steps = ladder_steps(ell, dt, series.len().saturating_sub(1));
    if steps.len() < MIN_LEVELS {
        return Err(LabError::Degenerate(format!(
            "only {} usable τ levels, need {MIN_LEVELS}",
            steps.len()
        )));
    }
    let levels: Vec<(f64, f64)> = steps
        .iter()
        .map(|&m| {
            let sup = (m..series.len())
                .map(|n| (series[n] - series[n - m]).abs())
                .fold(0.0f64, f64::max);
            (m as f64 * dt, sup)
        })
        .collect();
    if levels.iter().all(|&(_, s)| s == 0.0) {
        return Ok(TimeFit {
            exponent: f64::INFINITY,
            residual: 0.0,
            slope_se: 0.0,
            levels,
        });
    }
    let used: Vec<(f64, f64)> = levels.iter().copied().filter(|&(_, s)| s > 0.0).collect();
    if used.len() < MIN_LEVELS {
        return Err(LabError::Degenerate(
            "too many vanishing increments for a fit".into(),
        ));
    }
    let xs: Vec<f64> = used.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|(_, s)| s.ln()).collect();
    let fit = fit_line(&xs, &ys)
        .ok_or_else(|| LabError::Degenerate("ladder has a single τ".into()))?;
    Ok(TimeFit {
        exponent: fit.slope,
        residual: fit.max_residual,
        slope_se: fit.slope_se,
        levels: used,
    })
}

/// Time exponent of `u(x,·)` over the time span of `q`.
pub fn fit_time_exponent(
    field: &SpaceTimeField,
    x: f64,
    q: &ParabolicCylinder,
) -> Result<TimeFit> {
    let (lo, hi) = q.time_levels(field)?;
    let series: Vec<f64> = (lo..=hi).map(|n| field.value(x, n)).collect();
    fit_series_exponent(&series, field.dt, q.length())
}
