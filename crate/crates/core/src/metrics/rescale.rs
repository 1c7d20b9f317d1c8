//! Cut-off and parabolic rescaling `v ↦ η(x)·v(x/s, t/s^σ)`.

use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::field::{ExteriorData, SpaceTimeField};

/// Quintic cut-off: `1` on `B₂`, `0` outside `B₄`, `C²` in between.
pub fn cutoff_eta(y: f64) -> f64 {
    let s = ((y.abs() - 2.0) / 2.0).clamp(0.0, 1.0);
    1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// Exterior closure `η(y)·v(y/s, t/s^σ)` of a rescaled field.
#[derive(Debug, Clone)]
pub struct RescaledExterior {
    source: Arc<SpaceTimeField>,
    scale: f64,
    sigma: f64,
    sup: f64,
}

impl RescaledExterior {
    fn source_value(&self, y: f64, t: f64) -> f64 {
        let src = &self.source;
        let last = src.n_times() - 1;
        // time interpolation, clamped to the stored window
        let s = if last == 0 {
            0.0
        } else {
            ((t / self.scale.powf(self.sigma) - src.t0) / src.dt).clamp(0.0, last as f64)
        };
        let n = (s.floor() as usize).min(last);
        let w = s - n as f64;
        let x = y / self.scale;
        if w == 0.0 || n == last {
            src.value(x, n)
        } else {
            (1.0 - w) * src.value(x, n) + w * src.value(x, n + 1)
        }
    }
}

impl ExteriorData for RescaledExterior {
    fn value(&self, y: f64, t: f64) -> f64 {
        let eta = cutoff_eta(y);
        if eta == 0.0 {
            0.0
        } else {
            eta * self.source_value(y, t)
        }
    }

    fn far_field(&self, _t: f64) -> Option<(f64, f64)> {
        Some((4.0, 0.0))
    }

    fn sup_norm(&self, _t: f64) -> f64 {
        self.sup
    }
}

/// Truncated rescaling on the same lattice; output times are the input
/// times multiplied by `s^σ`.
pub fn truncate_rescale(field: &SpaceTimeField, scale: f64, sigma: f64) -> Result<SpaceTimeField> {
    if !(scale > 4.0) {
        return Err(LabError::InvalidParameter(format!(
            "scale must exceed 4 so supp η/s stays inside B₁, got {scale}"
        )));
    }
    if (1.0 / scale) / field.grid.h < 2.0 {
        return Err(LabError::Underflow(format!(
            "B_{{1/{scale}}} holds fewer than two cells at h = {}",
            field.grid.h
        )));
    }
    let source = Arc::new(field.clone());
    let sup = field.slices.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let ext = RescaledExterior {
        source,
        scale,
        sigma,
        sup,
    };
    let stretch = scale.powf(sigma);
    let xs = field.grid.interior_xs();
    let slices = (0..field.n_times())
        .map(|n| xs.iter().map(|&x| cutoff_eta(x) * field.value(x / scale, n)).collect())
        .collect();
    SpaceTimeField::new(
        field.grid,
        field.t0 * stretch,
        field.dt * stretch,
        slices,
        Arc::new(ext),
    )
}
