//! Weighted `L¹` quantities of exterior data.

use crate::error::{LabError, Result};
use crate::field::{ExteriorData, SpaceTimeField};
use crate::quad::{integrate_panel, CompensatedSum};

const REL_TOL: f64 = 1e-10;
const MAX_DOUBLINGS: usize = 200;

/// `∫_{|y|>r} |F(y)| min(1, |y|^{−1−σ}) dy`.
///
/// `far = Some((R, c))` promises `|F| = c` on `|y| ≥ R`, which closes the
/// tail exactly; `bound` is an a priori bound on `|F|` used to stop the
/// dyadic panel march otherwise.
pub fn weighted_tail_integral(
    f: &dyn Fn(f64) -> f64,
    far: Option<(f64, f64)>,
    bound: f64,
    r: f64,
    sigma: f64,
) -> Result<f64> {
    let weight = |y: f64| if y < 1.0 { 1.0 } else { y.powf(-1.0 - sigma) };
    let far_r = far.map(|(big_r, _)| big_r.max(r).max(1.0));
    let mut total = CompensatedSum::new();
    for side in [1.0, -1.0] {
        let g = |y: f64| f(side * y).abs() * weight(y);
        let mut breaks = vec![r];
        if r < 1.0 {
            breaks.push(1.0);
        }
        let start = breaks[breaks.len() - 1].max(r);
        if let Some(rr) = far_r {
            let mut b = start;
            while b < rr {
                b = (2.0 * b).min(rr);
                breaks.push(b);
            }
        }
        breaks.dedup();
        for w in breaks.windows(2) {
            total.add(integrate_panel(&g, w[0], w[1], REL_TOL, 0.0));
        }
        let end = breaks[breaks.len() - 1];
        match far {
            Some((_, c)) => total.add(c.abs() * end.powf(-sigma) / sigma),
            None => {
                let mut a = end;
                let mut prev = f64::INFINITY;
                let mut converged = false;
                for _ in 0..MAX_DOUBLINGS {
                    let part = integrate_panel(&g, a, 2.0 * a, REL_TOL, 0.0);
                    if !part.is_finite() {
                        return Err(LabError::NonFinite("tail panel".into()));
                    }
                    total.add(part);
                    a *= 2.0;
                    let rest = if bound.is_finite() {
                        bound * a.powf(-sigma) / sigma
                    } else if prev.is_finite() && part < prev {
                        // geometric decay of successive dyadic panels
                        let q = part / prev;
                        part * q / (1.0 - q)
                    } else {
                        f64::INFINITY
                    };
                    prev = part;
                    if rest <= 1e-13 * total.value().abs().max(1e-300) || rest <= 1e-300 {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(LabError::NonFinite(
                        "weighted tail integral does not converge".into(),
                    ));
                }
            }
        }
    }
    let v = total.value();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(LabError::NonFinite("weighted tail integral".into()))
    }
}

/// `∫|u(y,t_n)| min(1,|y|^{−1−σ}) dy`: interior nodal values are extended
/// as constants over their cells, the complement is integrated from the
/// exterior closure.
pub fn l1_sigma_norm(field: &SpaceTimeField, n: usize, sigma: f64) -> Result<f64> {
    let g = &field.grid;
    let row = &field.slices[n];
    let mut inner = CompensatedSum::new();
    for v in row {
        inner.add(v.abs() * g.h);
    }
    inner.add(0.5 * g.h * (row[0].abs() + row[row.len() - 1].abs()));
    let t = field.t(n);
    let ext = field.exterior.as_ref();
    let outer = weighted_tail_integral(
        &|y| ext.value(y, t),
        ext.far_field(t),
        ext.sup_norm(t),
        1.0,
        sigma,
    )?;
    Ok(inner.value() + outer)
}

/// `sup_{τ,t} ∫_{|y|>r} |δ_τg(y,t)|/τ^{γ/σ} min(1,|y|^{−1−σ}) dy` over the
/// ladder `τ = 2^{−j}`, `j = 1..J` with `2^{−J} ≈ dt`, and times sampled at
/// spacing `max(τ/8, 2^{−J})` ending at `window.1`.
pub fn tail_seminorm(
    g: &dyn ExteriorData,
    r: f64,
    gamma: f64,
    window: (f64, f64),
    sigma: f64,
    dt: f64,
) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(LabError::InvalidParameter(format!("γ must lie in (0,1), got {gamma}")));
    }
    if !(dt > 0.0 && r > 0.0 && window.1 > window.0) {
        return Err(LabError::InvalidParameter("tail seminorm needs dt, r > 0 and a window".into()));
    }
    let big_j = ((1.0 / dt).log2().round() as i32).max(1);
    let floor = 0.5f64.powi(big_j);
    let mut sup = 0.0f64;
    for j in 1..=big_j {
        let tau = 0.5f64.powi(j);
        if window.1 - tau < window.0 {
            continue;
        }
        let step = (tau / 8.0).max(floor);
        let count = ((window.1 - window.0 - tau) / step).floor() as usize;
        for i in 0..=count {
            let t = window.1 - i as f64 * step;
            let far = match (g.far_field(t), g.far_field(t - tau)) {
                (Some((r1, c1)), Some((r2, c2))) => Some((r1.max(r2), c1 - c2)),
                _ => None,
            };
            let bound = g.sup_norm(t) + g.sup_norm(t - tau);
            let v = weighted_tail_integral(&|y| g.increment(y, t, tau), far, bound, r, sigma)?;
            sup = sup.max(v / tau.powf(gamma / sigma));
        }
    }
    Ok(sup)
}
