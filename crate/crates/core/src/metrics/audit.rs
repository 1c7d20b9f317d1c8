//! Decay of normalized difference quotients across nested cylinders.

use serde::{Deserialize, Serialize};

use super::fit::ladder_steps;
use super::{holder_seminorm, PairSet, ParabolicCylinder, SampledField, PAIR_SEED};
use crate::error::{LabError, Result};
use crate::field::SpaceTimeField;
use crate::quad::fit_line;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub i: usize,
    pub r: f64,
    /// `sup_τ [δ_τu/τ^β]_{C^{0,ε}(Q_{μ^i})}`
    pub a: f64,
    /// `sup_τ (r^{−ε} sup|δ_τu/τ^β| + [δ_τu/τ^β]_{C^{0,ε}})`, the scaled
    /// norm whose decay is fitted.
    pub n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    /// Slope of `ln N_i` against `ln r_i`; `+∞` when every row vanishes.
    pub alpha_hat: f64,
    pub residual: f64,
}

/// `δ_τu/τ^β` on the points of `q` whose time `t − τ` is stored.
pub fn difference_quotient(
    field: &SpaceTimeField,
    q: &ParabolicCylinder,
    m: usize,
    beta: f64,
) -> Result<SampledField> {
    let (lo, hi) = q.time_levels(field)?;
    let lo = lo.max(m);
    if lo > hi {
        return Err(LabError::Empty("no time level has t − τ stored".into()));
    }
    let ks = q.nodes(field);
    if ks.is_empty() {
        return Err(LabError::Empty("cylinder holds no interior node".into()));
    }
    let scale = (m as f64 * field.dt).powf(-beta);
    let values = (lo..=hi)
        .map(|n| {
            ks.iter()
                .map(|&k| (field.at(k, n) - field.at(k, n - m)) * scale)
                .collect()
        })
        .collect();
    SampledField::new(
        ks.iter().map(|&k| field.grid.x(k)).collect(),
        field.t(lo),
        field.dt,
        values,
    )
}

const MIN_NODES: usize = 4;
const MIN_SCALES: usize = 3;

/// Measures `A_i` and `N_i` on `Q_{μ^i}(x₀,t₀)` for every scale the stored
/// field resolves, and fits the decay rate of `N_i`.
pub fn oscillation_decay_audit(
    field: &SpaceTimeField,
    sigma: f64,
    beta: f64,
    eps_h: f64,
    mu: f64,
    base: (f64, f64),
) -> Result<DecayTable> {
    if !(beta > 0.0 && beta < 1.0 && eps_h > 0.0 && eps_h < 1.0 && mu > 0.0 && mu < 1.0) {
        return Err(LabError::InvalidParameter(format!(
            "audit needs β, ε, μ in (0,1), got {beta}, {eps_h}, {mu}"
        )));
    }
    let mut rows = Vec::new();
    for i in 0.. {
        let r = mu.powi(i as i32);
        let q = ParabolicCylinder::new(base.0, base.1, r, sigma)?;
        if q.nodes(field).len() < MIN_NODES {
            break;
        }
        let Ok((lo, hi)) = q.time_levels(field) else {
            if i == 0 {
                continue;
            }
            break;
        };
        // τ ≤ r^σ/2; the ladder helper halves ℓ before the first level.
        let steps = ladder_steps(q.length(), field.dt, hi);
        if steps.is_empty() || hi - lo < 2 {
            break;
        }
        let (mut a, mut n) = (0.0f64, 0.0f64);
        for &m in &steps {
            let w = difference_quotient(field, &q, m, beta)?;
            let pairs = PairSet::build(&w, sigma, PAIR_SEED);
            let semi = holder_seminorm(&w, &pairs, eps_h, sigma);
            a = a.max(semi);
            n = n.max(r.powf(-eps_h) * w.sup_abs() + semi);
        }
        rows.push(DecayRow { i, r, a, n });
    }
    if rows.len() < MIN_SCALES {
        return Err(LabError::Degenerate(format!(
            "only {} usable scales, need {MIN_SCALES}",
            rows.len()
        )));
    }
    if rows.iter().all(|row| row.n == 0.0) {
        return Ok(DecayTable {
            rows,
            alpha_hat: f64::INFINITY,
            residual: 0.0,
        });
    }
    let used: Vec<&DecayRow> = rows.iter().filter(|row| row.n > 0.0).collect();
    let xs: Vec<f64> = used.iter().map(|row| row.r.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|row| row.n.ln()).collect();
    let fit = fit_line(&xs, &ys)
        .ok_or_else(|| LabError::Degenerate("decay fit needs two nonzero scales".into()))?;
    Ok(DecayTable {
        rows,
        alpha_hat: fit.slope,
        residual: fit.max_residual,
    })
}
