//! Grids, exterior data and discrete space-time fields.
//!
//! The lattice is `x_k = k·h`. Nodes with `|k| < 1/h` are interior; every
//! other value is read from the exterior closure, so the complement
//! condition holds by construction.

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Uniform lattice of spacing `h` over `[−R_max, R_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub h: f64,
    /// `1/h`; nodes with `|k| < n1` are interior.
    pub n1: i64,
    /// `R_max/h`.
    pub m: i64,
}

fn as_integer(v: f64, what: &str) -> Result<i64> {
    let r = v.round();
    if (v - r).abs() > 1e-9 * v.abs().max(1.0) || r < 1.0 {
        return Err(LabError::InvalidParameter(format!(
            "{what} must be a positive integer, got {v}"
        )));
    }
    Ok(r as i64)
}

impl Grid {
    pub fn new(h: f64, r_max: f64) -> Result<Self> {
        if !(h > 0.0 && h <= 0.25) {
            return Err(LabError::InvalidParameter(format!(
                "grid spacing must lie in (0, 1/4], got {h}"
            )));
        }
        if !(r_max >= 2.0) {
            return Err(LabError::InvalidParameter(format!(
                "R_max must be at least 2, got {r_max}"
            )));
        }
        let n1 = as_integer(1.0 / h, "1/h")?;
        let m = as_integer(r_max / h, "R_max/h")?;
        Ok(Self {
            h: 1.0 / n1 as f64,
            n1,
            m,
        })
    }

    pub fn r_max(&self) -> f64 {
        self.m as f64 * self.h
    }

    pub fn x(&self, k: i64) -> f64 {
        k as f64 * self.h
    }

    pub fn n_interior(&self) -> usize {
        (2 * self.n1 - 1) as usize
    }

    pub fn is_interior(&self, k: i64) -> bool {
        k.abs() < self.n1
    }

    /// Lattice index of interior slot `i`.
    pub fn k_of(&self, i: usize) -> i64 {
        i as i64 - (self.n1 - 1)
    }

    /// Interior slot of lattice index `k`.
    pub fn i_of(&self, k: i64) -> usize {
        debug_assert!(self.is_interior(k));
        (k + self.n1 - 1) as usize
    }

    pub fn interior_xs(&self) -> Vec<f64> {
        (0..self.n_interior()).map(|i| self.x(self.k_of(i))).collect()
    }

    /// Lattice index of `x` if it is a node.
    pub fn node_index(&self, x: f64) -> Option<i64> {
        let k = (x / self.h).round();
        if (x - k * self.h).abs() <= 1e-9 * self.h {
            Some(k as i64)
        } else {
            None
        }
    }

    /// Half-width of the lattice needed to evaluate operators at interior
    /// nodes: `n1 + m`.
    pub fn span(&self) -> i64 {
        self.n1 + self.m
    }
}

/// Data prescribed on the complement of `(−1,1)` and on the initial slice.
pub trait ExteriorData: Debug + Send + Sync {
    fn value(&self, y: f64, t: f64) -> f64;

    /// `(R, c)` with `g(y,t) = c` for all `|y| ≥ R`, when such a pair exists.
    fn far_field(&self, t: f64) -> Option<(f64, f64)>;

    /// An upper bound for `sup_y |g(y,t)|`.
    fn sup_norm(&self, t: f64) -> f64;

    /// `(2−σ) ∫_r^∞ g(x + side·y, t) y^{−1−σ} dy` in closed form, when known.
    /// The default covers data that is constant far out.
    fn tail_integral(&self, x: f64, t: f64, side: f64, r: f64, sigma: f64) -> Option<f64> {
        let _ = side;
        match self.far_field(t) {
            Some((big_r, c)) if big_r <= r - x.abs() => Some(c * unit_tail(r, sigma)),
            _ => None,
        }
    }

    /// `g(y,t) − g(y,t−τ)`.
    fn increment(&self, y: f64, t: f64, tau: f64) -> f64 {
        self.value(y, t) - self.value(y, t - tau)
    }
}

/// `(2−σ) ∫_r^∞ y^{−1−σ} dy`.
pub fn unit_tail(r: f64, sigma: f64) -> f64 {
    (2.0 - sigma) * r.powf(-sigma) / sigma
}

/// Time factor of separable exterior data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeProfile {
    One,
    /// `|t|^exponent`
    Power { exponent: f64 },
    /// `1` for `t > at`, else `0`
    Step { at: f64 },
    /// `e^{rate·t}`
    Exp { rate: f64 },
    /// `sin(freq·t + phase)`
    Sin { freq: f64, phase: f64 },
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::One => 1.0,
            TimeProfile::Power { exponent } => t.abs().powf(*exponent),
            TimeProfile::Step { at } => {
                if t > *at {
                    1.0
                } else {
                    0.0
                }
            }
            TimeProfile::Exp { rate } => (rate * t).exp(),
            TimeProfile::Sin { freq, phase } => (freq * t + phase).sin(),
        }
    }
}

/// Space factor of separable exterior data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpaceProfile {
    One,
    /// `χ_{|y| ≥ 1}`
    Outside,
    /// `cos(freq·y)`
    Cos { freq: f64 },
    /// `(1 − ((y−center)/radius)²)³` inside the support, `0` outside.
    Bump { center: f64, radius: f64 },
    /// `slope·y`
    Linear { slope: f64 },
}

impl SpaceProfile {
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            SpaceProfile::One => 1.0,
            SpaceProfile::Outside => {
                if y.abs() >= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            SpaceProfile::Cos { freq } => (freq * y).cos(),
            SpaceProfile::Bump { center, radius } => {
                let s = (y - center) / radius;
                if s.abs() < 1.0 {
                    (1.0 - s * s).powi(3)
                } else {
                    0.0
                }
            }
            SpaceProfile::Linear { slope } => slope * y,
        }
    }

    fn tail_integral(&self, x: f64, side: f64, r: f64, sigma: f64) -> Option<f64> {
        match self {
            SpaceProfile::Linear { slope } => Some(
                slope * x * unit_tail(r, sigma)
                    + side * slope * (2.0 - sigma) * r.powf(1.0 - sigma) / (sigma - 1.0),
            ),
            _ => match self.far_field() {
                Some((big_r, c)) if big_r <= r - x.abs() => Some(c * unit_tail(r, sigma)),
                _ => None,
            },
        }
    }

    fn sup(&self) -> f64 {
        match self {
            SpaceProfile::Linear { .. } => f64::INFINITY,
            _ => 1.0,
        }
    }

    fn far_field(&self) -> Option<(f64, f64)> {
        match self {
            SpaceProfile::One => Some((0.0, 1.0)),
            SpaceProfile::Outside => Some((1.0, 1.0)),
            SpaceProfile::Cos { .. } => None,
            SpaceProfile::Bump { center, radius } => Some((center.abs() + radius, 0.0)),
            SpaceProfile::Linear { .. } => None,
        }
    }
}

/// Analytic exterior data addressable from configs and checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Exterior {
    Zero,
    Constant {
        value: f64,
    },
    /// `offset + slope·t` everywhere.
    Affine {
        offset: f64,
        slope: f64,
    },
    /// `amplitude·T(t)·S(y)`.
    Separable {
        time: TimeProfile,
        space: SpaceProfile,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Sum {
        terms: Vec<Exterior>,
    },
}

fn one() -> f64 {
    1.0
}

impl Exterior {
    pub fn separable(time: TimeProfile, space: SpaceProfile) -> Self {
        Exterior::Separable {
            time,
            space,
            amplitude: 1.0,
        }
    }
}

impl ExteriorData for Exterior {
    fn value(&self, y: f64, t: f64) -> f64 {
        match self {
            Exterior::Zero => 0.0,
            Exterior::Constant { value } => *value,
            Exterior::Affine { offset, slope } => offset + slope * t,
            Exterior::Separable {
                time,
                space,
                amplitude,
            } => amplitude * time.eval(t) * space.eval(y),
            Exterior::Sum { terms } => terms.iter().map(|g| g.value(y, t)).sum(),
        }
    }

    fn far_field(&self, t: f64) -> Option<(f64, f64)> {
        match self {
            Exterior::Zero => Some((0.0, 0.0)),
            Exterior::Constant { value } => Some((0.0, *value)),
            Exterior::Affine { offset, slope } => Some((0.0, offset + slope * t)),
            Exterior::Separable {
                time,
                space,
                amplitude,
            } => space
                .far_field()
                .map(|(r, c)| (r, amplitude * time.eval(t) * c)),
            Exterior::Sum { terms } => {
                let mut acc = (0.0f64, 0.0);
                for g in terms {
                    let (r, c) = g.far_field(t)?;
                    acc = (acc.0.max(r), acc.1 + c);
                }
                Some(acc)
            }
        }
    }

    fn sup_norm(&self, t: f64) -> f64 {
        match self {
            Exterior::Zero => 0.0,
            Exterior::Constant { value } => value.abs(),
            Exterior::Affine { offset, slope } => (offset + slope * t).abs(),
            Exterior::Separable {
                time,
                space,
                amplitude,
            } => {
                let a = (amplitude * time.eval(t)).abs();
                if a == 0.0 {
                    0.0
                } else {
                    a * space.sup()
                }
            }
            Exterior::Sum { terms } => terms.iter().map(|g| g.sup_norm(t)).sum(),
        }
    }

    fn tail_integral(&self, x: f64, t: f64, side: f64, r: f64, sigma: f64) -> Option<f64> {
        match self {
            Exterior::Separable {
                time,
                space,
                amplitude,
            } => space
                .tail_integral(x, side, r, sigma)
                .map(|v| amplitude * time.eval(t) * v),
            Exterior::Sum { terms } => {
                let mut acc = 0.0;
                for g in terms {
                    acc += g.tail_integral(x, t, side, r, sigma)?;
                }
                Some(acc)
            }
            _ => self
                .far_field(t)
                .map(|(_, c)| c * unit_tail(r, sigma)),
        }
    }
}

/// `g(κy, t)`: data seen through a spatial dilation.
#[derive(Debug, Clone)]
pub struct Dilated {
    pub base: Arc<dyn ExteriorData>,
    pub kappa: f64,
}

impl ExteriorData for Dilated {
    fn value(&self, y: f64, t: f64) -> f64 {
        self.base.value(self.kappa * y, t)
    }

    fn far_field(&self, t: f64) -> Option<(f64, f64)> {
        self.base.far_field(t).map(|(r, c)| (r / self.kappa, c))
    }

    fn sup_norm(&self, t: f64) -> f64 {
        self.base.sup_norm(t)
    }

    fn tail_integral(&self, x: f64, t: f64, side: f64, r: f64, sigma: f64) -> Option<f64> {
        let k = self.kappa;
        self.base
            .tail_integral(k * x, t, side, k * r, sigma)
            .map(|v| k.powf(sigma) * v)
    }

    fn increment(&self, y: f64, t: f64, tau: f64) -> f64 {
        self.base.increment(self.kappa * y, t, tau)
    }
}

/// Values of one time slice on the extended lattice `|k| ≤ n1 + m`.
#[derive(Debug, Clone)]
pub struct Slice {
    pub t: f64,
    span: i64,
    vals: Vec<f64>,
}

impl Slice {
    pub fn assemble(grid: &Grid, interior: &[f64], ext: &dyn ExteriorData, t: f64) -> Self {
        let span = grid.span();
        let mut vals = Vec::with_capacity((2 * span + 1) as usize);
        for k in -span..=span {
            vals.push(if grid.is_interior(k) {
                interior[grid.i_of(k)]
            } else {
                ext.value(grid.x(k), t)
            });
        }
        Self { t, span, vals }
    }

    #[inline]
    pub fn at(&self, k: i64) -> f64 {
        self.vals[(k + self.span) as usize]
    }

    pub fn span(&self) -> i64 {
        self.span
    }

    /// Overwrites the interior values, keeping the exterior part.
    pub fn set_interior(&mut self, grid: &Grid, interior: &[f64]) {
        let off = (self.span - (grid.n1 - 1)) as usize;
        self.vals[off..off + interior.len()].copy_from_slice(interior);
    }
}

/// Interior values of `u` on a uniform time ladder, closed by exterior data.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    pub grid: Grid,
    pub t0: f64,
    pub dt: f64,
    /// `slices[n][i]` is `u(x_{k(i)}, t0 + n·dt)`.
    pub slices: Vec<Vec<f64>>,
    pub exterior: Arc<dyn ExteriorData>,
}

impl SpaceTimeField {
    pub fn new(
        grid: Grid,
        t0: f64,
        dt: f64,
        slices: Vec<Vec<f64>>,
        exterior: Arc<dyn ExteriorData>,
    ) -> Result<Self> {
        if slices.is_empty() {
            return Err(LabError::Empty("field has no time slices".into()));
        }
        if slices.iter().any(|s| s.len() != grid.n_interior()) {
            return Err(LabError::InvalidParameter(
                "slice length does not match the grid".into(),
            ));
        }
        if slices.len() > 1 && !(dt > 0.0) {
            return Err(LabError::InvalidParameter("time step must be positive".into()));
        }
        if let Some((n, i)) = slices
            .iter()
            .enumerate()
            .find_map(|(n, s)| s.iter().position(|v| !v.is_finite()).map(|i| (n, i)))
        {
            return Err(LabError::NonFinite(format!(
                "u at slot {i} of time level {n}"
            )));
        }
        Ok(Self {
            grid,
            t0,
            dt,
            slices,
            exterior,
        })
    }

    /// Samples an analytic function on the interior for the given times.
    pub fn from_fn(
        grid: Grid,
        t0: f64,
        dt: f64,
        n_times: usize,
        exterior: Arc<dyn ExteriorData>,
        u: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let xs = grid.interior_xs();
        let slices = (0..n_times)
            .map(|n| {
                let t = t0 + n as f64 * dt;
                xs.iter().map(|&x| u(x, t)).collect()
            })
            .collect();
        Self::new(grid, t0, dt, slices, exterior)
    }

    pub fn n_times(&self) -> usize {
        self.slices.len()
    }

    pub fn t(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.n_times() - 1)
    }

    /// Index of the stored time `t`.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        if self.n_times() == 1 {
            if (t - self.t0).abs() <= 1e-12 {
                return Ok(0);
            }
        } else {
            let n = ((t - self.t0) / self.dt).round();
            if n >= 0.0
                && (n as usize) < self.n_times()
                && (t - self.t(n as usize)).abs() <= 1e-7 * self.dt
            {
                return Ok(n as usize);
            }
        }
        Err(LabError::OutOfWindow(format!(
            "t = {t} is not a stored time in [{}, {}]",
            self.t0,
            self.t_end()
        )))
    }

    /// `u` at lattice index `k` and time level `n`.
    pub fn at(&self, k: i64, n: usize) -> f64 {
        if self.grid.is_interior(k) {
            self.slices[n][self.grid.i_of(k)]
        } else {
            self.exterior.value(self.grid.x(k), self.t(n))
        }
    }

    /// `u(y, t_n)` for any real `y`; linear interpolation between interior
    /// nodes, exterior data on the complement.
    pub fn value(&self, y: f64, n: usize) -> f64 {
        if y.abs() >= 1.0 {
            return self.exterior.value(y, self.t(n));
        }
        let s = y / self.grid.h;
        let k = s.floor() as i64;
        let w = s - k as f64;
        if w == 0.0 {
            return self.at(k, n);
        }
        (1.0 - w) * self.at(k, n) + w * self.at(k + 1, n)
    }

    pub fn slice(&self, n: usize) -> Slice {
        Slice::assemble(&self.grid, &self.slices[n], self.exterior.as_ref(), self.t(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_requires_integer_ratios() {
        assert!(Grid::new(0.01, 4.0).is_ok());
        assert!(Grid::new(0.03, 4.0).is_err());
        assert!(Grid::new(0.01, 1.0).is_err());
        let g = Grid::new(0.1, 2.0).unwrap();
        assert_eq!(g.n_interior(), 19);
        assert_eq!(g.k_of(0), -9);
        assert_eq!(g.i_of(9), 18);
        assert_eq!(g.span(), 30);
    }

    #[test]
    fn complement_condition_is_structural() {
        let g = Grid::new(0.1, 2.0).unwrap();
        let ext: Arc<dyn ExteriorData> = Arc::new(Exterior::separable(
            TimeProfile::Exp { rate: -1.0 },
            SpaceProfile::Outside,
        ));
        let f = SpaceTimeField::from_fn(g, -1.0, 0.5, 3, ext.clone(), |_, _| 7.0).unwrap();
        for n in 0..3 {
            let s = f.slice(n);
            for k in -30i64..=30 {
                let expect = if k.abs() < 10 {
                    7.0
                } else {
                    ext.value(g.x(k), f.t(n))
                };
                assert_eq!(s.at(k), expect);
                assert_eq!(f.at(k, n), expect);
            }
        }
    }

    #[test]
    fn time_index_snaps_and_rejects() {
        let g = Grid::new(0.25, 2.0).unwrap();
        let f = SpaceTimeField::from_fn(g, -1.0, 0.25, 5, Arc::new(Exterior::Zero), |_, t| t)
            .unwrap();
        assert_eq!(f.time_index(-0.5).unwrap(), 2);
        assert!(f.time_index(-0.4).is_err());
        assert!(f.time_index(0.25).is_err());
    }

    #[test]
    fn far_field_of_sum() {
        let g = Exterior::Sum {
            terms: vec![
                Exterior::Constant { value: 2.0 },
                Exterior::separable(TimeProfile::One, SpaceProfile::Outside),
            ],
        };
        assert_eq!(g.far_field(0.0), Some((1.0, 3.0)));
        let c = Exterior::separable(TimeProfile::One, SpaceProfile::Cos { freq: 1.0 });
        assert_eq!(c.far_field(0.0), None);
    }

    #[test]
    fn rejects_non_finite_values() {
        let g = Grid::new(0.25, 2.0).unwrap();
        let r = SpaceTimeField::from_fn(g, 0.0, 1.0, 1, Arc::new(Exterior::Zero), |_, _| f64::NAN);
        assert!(matches!(r, Err(LabError::NonFinite(_))));
    }
}
