//! Seminorms, difference quotients and empirical exponents of stored fields.

mod audit;
mod fit;
pub mod lemmas;
mod report;
mod rescale;
mod tail;

pub use audit::{difference_quotient, oscillation_decay_audit, DecayRow, DecayTable};
pub use fit::{fit_series_exponent, fit_time_exponent, TimeFit};
pub use report::{MetricRow, RegularityReport};
pub use rescale::{cutoff_eta, truncate_rescale, RescaledExterior};
pub use tail::{l1_sigma_norm, tail_seminorm, weighted_tail_integral};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::SpaceTimeField;

/// Pair count below which seminorms enumerate every pair.
pub const FULL_PAIR_LIMIT: usize = 50_000;
/// Seed of the stratified pair sampler.
pub const PAIR_SEED: u64 = 0x5eed_1ab0;

/// `Q_r(x,t) = B_r(x) × (t − r^σ, t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParabolicCylinder {
    pub x: f64,
    pub t: f64,
    pub r: f64,
    pub sigma: f64,
}

impl ParabolicCylinder {
    pub fn new(x: f64, t: f64, r: f64, sigma: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(LabError::InvalidParameter(format!(
                "cylinder radius must be positive, got {r}"
            )));
        }
        if !(sigma > 1.0 && sigma < 2.0) {
            return Err(LabError::InvalidParameter(format!(
                "σ must lie in (1,2), got {sigma}"
            )));
        }
        Ok(Self { x, t, r, sigma })
    }

    /// Time length `r^σ`.
    pub fn length(&self) -> f64 {
        self.r.powf(self.sigma)
    }

    pub fn t_lo(&self) -> f64 {
        self.t - self.length()
    }

    /// Stored time levels `n` with `t_n ∈ (t − r^σ, t]`.
    pub fn time_levels(&self, field: &SpaceTimeField) -> Result<(usize, usize)> {
        let tol = 1e-9 * field.dt.max(1e-300);
        if self.t > field.t_end() + tol || self.t_lo() < field.t0 - tol {
            return Err(LabError::OutOfWindow(format!(
                "cylinder ({}, {}] not inside stored window [{}, {}]",
                self.t_lo(),
                self.t,
                field.t0,
                field.t_end()
            )));
        }
        let hi = field.time_index(self.t)?;
        if field.n_times() == 1 {
            return Ok((0, 0));
        }
        let lo_f = (self.t_lo() - field.t0) / field.dt;
        let mut lo = lo_f.floor() as usize;
        while lo <= hi && field.t(lo) <= self.t_lo() + tol {
            lo += 1;
        }
        if lo > hi {
            return Err(LabError::Empty("cylinder holds no stored time".into()));
        }
        Ok((lo, hi))
    }

    /// Interior lattice indices inside `B_r(x)`.
    pub fn nodes(&self, field: &SpaceTimeField) -> Vec<i64> {
        let g = &field.grid;
        (-(g.n1 - 1)..g.n1)
            .filter(|&k| (g.x(k) - self.x).abs() <= self.r + 1e-12)
            .collect()
    }
}

/// Values on a tensor set of points, uniform in time.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub xs: Vec<f64>,
    pub t0: f64,
    pub dt: f64,
    /// `values[n][i]` at `(xs[i], t0 + n·dt)`.
    pub values: Vec<Vec<f64>>,
}

impl SampledField {
    pub fn new(xs: Vec<f64>, t0: f64, dt: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        if xs.is_empty() || values.is_empty() {
            return Err(LabError::Empty("sampled field has no points".into()));
        }
        if values.iter().any(|row| row.len() != xs.len()) {
            return Err(LabError::InvalidParameter("ragged sampled field".into()));
        }
        Ok(Self { xs, t0, dt, values })
    }

    /// Restriction of `field` to the stored points of `q`.
    pub fn from_cylinder(field: &SpaceTimeField, q: &ParabolicCylinder) -> Result<Self> {
        let (lo, hi) = q.time_levels(field)?;
        let ks = q.nodes(field);
        if ks.is_empty() {
            return Err(LabError::Empty("cylinder holds no interior node".into()));
        }
        let xs = ks.iter().map(|&k| field.grid.x(k)).collect();
        let values = (lo..=hi)
            .map(|n| ks.iter().map(|&k| field.at(k, n)).collect())
            .collect();
        Self::new(xs, field.t(lo), field.dt, values)
    }

    pub fn n_times(&self) -> usize {
        self.values.len()
    }

    pub fn n_points(&self) -> usize {
        self.xs.len() * self.values.len()
    }

    pub fn t(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    /// Backward difference quotient in time, placed at the later time.
    pub fn time_derivative(&self) -> Result<Self> {
        if self.n_times() < 2 {
            return Err(LabError::Empty("need two time levels to differentiate".into()));
        }
        let values = self
            .values
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| (a - b) / self.dt).collect())
            .collect();
        Self::new(self.xs.clone(), self.t0 + self.dt, self.dt, values)
    }

    /// Time series at column `i`.
    pub fn series(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[i]).collect()
    }

    pub fn sup_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn coords(&self, p: u32) -> (f64, f64, f64) {
        let nx = self.xs.len();
        let (n, i) = (p as usize / nx, p as usize % nx);
        (self.xs[i], self.t(n), self.values[n][i])
    }
}

/// Point pairs over which seminorm suprema are taken.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub pairs: Vec<(u32, u32)>,
    pub exhaustive: bool,
}

impl PairSet {
    /// Every pair when there are at most [`FULL_PAIR_LIMIT`]; otherwise a
    /// seeded sample stratified by dyadic parabolic distance. The set depends
    /// only on the shape of `sf`, never on its values.
    pub fn build(sf: &SampledField, sigma: f64, seed: u64) -> Self {
        let np = sf.n_points();
        if np * np.saturating_sub(1) / 2 <= FULL_PAIR_LIMIT {
            let mut pairs = Vec::with_capacity(np * np.saturating_sub(1) / 2);
            for a in 0..np as u32 {
                for b in a + 1..np as u32 {
                    pairs.push((a, b));
                }
            }
            return Self {
                pairs,
                exhaustive: true,
            };
        }
        let nx = sf.xs.len();
        let nt = sf.n_times();
        let hx = if nx > 1 {
            (sf.xs[nx - 1] - sf.xs[0]) / (nx - 1) as f64
        } else {
            0.0
        };
        let x_span = hx * (nx - 1) as f64;
        let t_span = sf.dt * (nt - 1) as f64;
        let diam = x_span + t_span.powf(1.0 / sigma);
        let floor = [hx, sf.dt.powf(1.0 / sigma)]
            .into_iter()
            .filter(|v| *v > 0.0)
            .fold(f64::INFINITY, f64::min);
        let levels = ((diam / floor).log2().ceil().max(0.0) as usize) + 1;
        let per_level = FULL_PAIR_LIMIT / levels;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs = Vec::with_capacity(per_level * levels);
        for l in 0..levels {
            let s = diam * 0.5f64.powi(l as i32);
            let mut drawn = 0;
            let mut attempts = 0;
            while drawn < per_level && attempts < 20 * per_level {
                attempts += 1;
                let a_i = rng.gen_range(0..nx) as i64;
                let a_n = rng.gen_range(0..nt) as i64;
                // pure space, pure time, or mixed
                let theta = match rng.gen_range(0..3) {
                    0 => 1.0,
                    1 => 0.0,
                    _ => rng.gen::<f64>(),
                };
                let dx = theta * s * rng.gen_range(0.5..=1.0);
                let dtp = ((1.0 - theta) * s * rng.gen_range(0.5..=1.0)).powf(sigma);
                let di = if hx > 0.0 { (dx / hx).round() as i64 } else { 0 };
                let dn = (dtp / sf.dt).round() as i64;
                let sx = if rng.gen::<bool>() { 1 } else { -1 };
                let st = if rng.gen::<bool>() { 1 } else { -1 };
                let (b_i, b_n) = (a_i + sx * di, a_n + st * dn);
                if (di == 0 && dn == 0)
                    || b_i < 0
                    || b_n < 0
                    || b_i >= nx as i64
                    || b_n >= nt as i64
                {
                    continue;
                }
                let a = (a_n as usize * nx + a_i as usize) as u32;
                let b = (b_n as usize * nx + b_i as usize) as u32;
                pairs.push((a.min(b), a.max(b)));
                drawn += 1;
            }
        }
        Self {
            pairs,
            exhaustive: false,
        }
    }
}

/// `sup |u(p) − u(q)| / (|x−x′| + |t−t′|^{1/σ})^α` over `pairs`.
pub fn holder_seminorm(sf: &SampledField, pairs: &PairSet, alpha: f64, sigma: f64) -> f64 {
    pairs
        .pairs
        .par_iter()
        .map(|&(a, b)| {
            let (xa, ta, ua) = sf.coords(a);
            let (xb, tb, ub) = sf.coords(b);
            let d = (xa - xb).abs() + (ta - tb).abs().powf(1.0 / sigma);
            if d > 0.0 {
                (ua - ub).abs() / d.powf(alpha)
            } else {
                0.0
            }
        })
        .reduce(|| 0.0, f64::max)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!(
            "Hölder exponent must lie in (0,1], got {alpha}"
        )))
    }
}

/// `[u]_{C^{0,α}(Q)}` over the stored points of `q`.
pub fn parabolic_holder_seminorm(
    field: &SpaceTimeField,
    q: &ParabolicCylinder,
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    let sf = SampledField::from_cylinder(field, q)?;
    let pairs = PairSet::build(&sf, q.sigma, PAIR_SEED);
    Ok(holder_seminorm(&sf, &pairs, alpha, q.sigma))
}

fn snap_tau(field: &SpaceTimeField, tau: f64) -> Result<usize> {
    if !(tau >= 0.0) {
        return Err(LabError::InvalidParameter(format!("τ must be ≥ 0, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(0);
    }
    Ok(((tau / field.dt).round() as usize).max(1))
}

/// `δ_τu(x,t) = u(x,t) − u(x,t−τ)` with `τ` snapped to a multiple of `Δt`.
pub fn delta_tau(field: &SpaceTimeField, x: f64, t: f64, tau: f64) -> Result<f64> {
    let n = field.time_index(t)?;
    let m = snap_tau(field, tau)?;
    if m > n {
        return Err(LabError::OutOfWindow(format!("t − τ = {} precedes the window", t - tau)));
    }
    Ok(field.value(x, n) - field.value(x, n - m))
}

/// `δ²_τu(x,t) = u(x,t) − 2u(x,t−τ) + u(x,t−2τ)`.
pub fn delta2_tau(field: &SpaceTimeField, x: f64, t: f64, tau: f64) -> Result<f64> {
    let n = field.time_index(t)?;
    let m = snap_tau(field, tau)?;
    if 2 * m > n {
        return Err(LabError::OutOfWindow(format!(
            "t − 2τ = {} precedes the window",
            t - 2.0 * tau
        )));
    }
    Ok(field.value(x, n) - 2.0 * field.value(x, n - m) + field.value(x, n - 2 * m))
}
