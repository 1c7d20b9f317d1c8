//! Quadrature of the singular integral on the lattice.
//!
//! The half line `y > 0` is cut into cells that do not depend on `x`:
//!
//! * `[0, h/2]`: `δu` is replaced by `½u″y²` with the discrete second
//!   difference, integrated exactly against the weight.
//! * lattice cells `[(j−½)h, (j+½)h]` inside `B₁`: the even and odd parts of
//!   `δu` are taken as `y²` and `y³` profiles through the lattice values at
//!   `±jh`, again integrated exactly.
//! * lattice cells reaching past `1`, up to `R_max`: product midpoint rule on
//!   the lattice values, gradient term over the part inside `B₁`.
//! * geometric panels (ratio 1.15) from `R_max + h/2` to `R_tail = 100`,
//!   midpoint rule on the exterior data.
//! * `[R_tail, ∞)`: exact when the data has a closed-form tail, otherwise dropped
//!   and reported as an error bound.
//!
//! A kernel enters only through its weighted average on each cell, so every
//! operator the scheme represents is a member of the class with a kernel
//! that is constant on cells. That makes the extremal envelope exact.

use crate::error::{LabError, Result};
use crate::field::{ExteriorData, Grid, Slice};
use crate::kernel::{EllipticityParams, Kernel};

pub const PANEL_RATIO: f64 = 1.15;
pub const R_TAIL: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Inner,
    Compensated,
    Lattice,
    Panel,
    Tail,
}

#[derive(Debug, Clone, Copy)]
pub struct Cell {
    pub kind: CellKind,
    pub lo: f64,
    pub hi: f64,
    /// Lattice offset `j` for lattice cells.
    pub j: i64,
    /// Evaluation point: `jh` on the lattice, the midpoint on panels.
    pub node: f64,
    /// Weights; meaning depends on the kind (see `QuadratureScheme::new`).
    pub w0: f64,
    pub w1: f64,
}

impl Cell {
    /// Moment order used for the kernel average on this cell.
    pub fn avg_power(&self) -> f64 {
        match self.kind {
            CellKind::Inner | CellKind::Compensated => 2.0,
            _ => 0.0,
        }
    }
}

/// Unit-kernel moment `(2−σ) ∫_a^b y^{p−1−σ} dy`.
fn unit_moment(a: f64, b: f64, p: f64, sigma: f64) -> f64 {
    Kernel::constant(1.0).side_moment(1.0, a, b, p, sigma)
}

#[derive(Debug, Clone)]
pub struct QuadratureScheme {
    pub grid: Grid,
    pub sigma: f64,
    pub inner_cut: f64,
    pub outer_cut: f64,
    pub r_tail: f64,
    pub cells: Vec<Cell>,
}

impl QuadratureScheme {
    pub fn new(grid: &Grid, sigma: f64) -> Result<Self> {
        if !(sigma > 1.0 && sigma < 2.0) {
            return Err(LabError::InvalidParameter(format!(
                "sigma must lie in (1,2), got {sigma}"
            )));
        }
        if grid.n1 < 3 {
            return Err(LabError::InvalidParameter(
                "need at least 5 interior nodes".into(),
            ));
        }
        let h = grid.h;
        let mut cells = Vec::new();
        let inner_cut = h / 2.0;
        cells.push(Cell {
            kind: CellKind::Inner,
            lo: 0.0,
            hi: inner_cut,
            j: 0,
            node: 0.0,
            w0: unit_moment(0.0, inner_cut, 2.0, sigma),
            w1: 0.0,
        });
        for j in 1..=grid.m {
            let (lo, hi) = ((j as f64 - 0.5) * h, (j as f64 + 0.5) * h);
            let yj = j as f64 * h;
            let cell = if hi <= 1.0 + 1e-12 {
                Cell {
                    kind: CellKind::Compensated,
                    lo,
                    hi,
                    j,
                    node: yj,
                    w0: unit_moment(lo, hi, 2.0, sigma) / (yj * yj),
                    w1: unit_moment(lo, hi, 3.0, sigma) / (yj * yj * yj),
                }
            } else {
                Cell {
                    kind: CellKind::Lattice,
                    lo,
                    hi,
                    j,
                    node: yj,
                    w0: unit_moment(lo, hi, 0.0, sigma),
                    w1: unit_moment(lo, hi.min(1.0), 1.0, sigma),
                }
            };
            cells.push(cell);
        }
        let outer_cut = (grid.m as f64 + 0.5) * h;
        let r_tail = R_TAIL.max(outer_cut);
        let mut lo = outer_cut;
        while lo < r_tail * (1.0 - 1e-12) {
            let mut hi = lo * PANEL_RATIO;
            if hi > r_tail / PANEL_RATIO.sqrt() {
                hi = r_tail;
            }
            cells.push(Cell {
                kind: CellKind::Panel,
                lo,
                hi,
                j: 0,
                node: 0.5 * (lo + hi),
                w0: unit_moment(lo, hi, 0.0, sigma),
                w1: 0.0,
            });
            lo = hi;
        }
        cells.push(Cell {
            kind: CellKind::Tail,
            lo: r_tail,
            hi: f64::INFINITY,
            j: 0,
            node: r_tail,
            w0: unit_moment(r_tail, f64::INFINITY, 0.0, sigma),
            w1: 0.0,
        });
        Ok(Self {
            grid: *grid,
            sigma,
            inner_cut,
            outer_cut,
            r_tail,
            cells,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Cell averages of `K` on both sides.
    pub fn cell_kernel(&self, k: &Kernel) -> CellKernel {
        let mut plus = Vec::with_capacity(self.cells.len());
        let mut minus = Vec::with_capacity(self.cells.len());
        for c in &self.cells {
            let p = c.avg_power();
            let norm = unit_moment(c.lo, c.hi, p, self.sigma);
            plus.push(k.side_moment(1.0, c.lo, c.hi, p, self.sigma) / norm);
            minus.push(k.side_moment(-1.0, c.lo, c.hi, p, self.sigma) / norm);
        }
        CellKernel { plus, minus }
    }

    /// Fraction of each cell's averaging mass inside `|y| ≤ eps`.
    pub fn inner_fraction(&self, eps: f64) -> Vec<f64> {
        self.cells
            .iter()
            .map(|c| {
                if eps <= c.lo {
                    0.0
                } else if eps >= c.hi {
                    1.0
                } else {
                    let p = c.avg_power();
                    unit_moment(c.lo, eps, p, self.sigma) / unit_moment(c.lo, c.hi, p, self.sigma)
                }
            })
            .collect()
    }

    /// Discrete gradient at lattice node `k`.
    #[inline]
    pub fn du(&self, s: &Slice, k: i64) -> f64 {
        let n1 = self.grid.n1;
        let h2 = 2.0 * self.grid.h;
        if k == n1 - 1 {
            (3.0 * s.at(k) - 4.0 * s.at(k - 1) + s.at(k - 2)) / h2
        } else if k == -(n1 - 1) {
            (-3.0 * s.at(k) + 4.0 * s.at(k + 1) - s.at(k + 2)) / h2
        } else {
            (s.at(k + 1) - s.at(k - 1)) / h2
        }
    }

    /// Integrated increments `V±` of every cell at node `k`.
    pub fn cell_values(&self, s: &Slice, ext: &dyn ExteriorData, k: i64, out: &mut CellValues) {
        let h = self.grid.h;
        let x = self.grid.x(k);
        let u0 = s.at(k);
        let du = self.du(s, k);
        let upp = (s.at(k + 1) + s.at(k - 1) - 2.0 * u0) / (h * h);
        let far = ext.far_field(s.t);
        out.vp.clear();
        out.vm.clear();
        out.du = du;
        out.tail_gap = 0.0;
        for c in &self.cells {
            let (vp, vm) = match c.kind {
                CellKind::Inner => {
                    let v = 0.5 * upp * c.w0;
                    (v, v)
                }
                CellKind::Compensated => {
                    let (up, um) = (s.at(k + c.j), s.at(k - c.j));
                    let even = up + um - 2.0 * u0;
                    let odd = up - um - 2.0 * du * c.node;
                    (
                        0.5 * (c.w0 * even + c.w1 * odd),
                        0.5 * (c.w0 * even - c.w1 * odd),
                    )
                }
                CellKind::Lattice => (
                    c.w0 * (s.at(k + c.j) - u0) - c.w1 * du,
                    c.w0 * (s.at(k - c.j) - u0) + c.w1 * du,
                ),
                CellKind::Panel => match far {
                    Some((r, g)) if r <= c.lo - 1.0 => (c.w0 * (g - u0), c.w0 * (g - u0)),
                    _ => (
                        c.w0 * (ext.value(x + c.node, s.t) - u0),
                        c.w0 * (ext.value(x - c.node, s.t) - u0),
                    ),
                },
                CellKind::Tail => {
                    let mut side = |sd: f64| match ext.tail_integral(x, s.t, sd, c.lo, self.sigma) {
                        Some(v) => v,
                        None => {
                            out.tail_gap = ext.sup_norm(s.t) * c.w0;
                            0.0
                        }
                    };
                    let (tp, tm) = (side(1.0), side(-1.0));
                    (tp - c.w0 * u0, tm - c.w0 * u0)
                }
            };
            out.vp.push(vp);
            out.vm.push(vm);
        }
    }

    /// Linear stencil of `L_{K,b}`.
    pub fn linear_stencil(&self, ck: &CellKernel, drift: f64) -> LinearStencil {
        let m = self.grid.m as usize;
        let h = self.grid.h;
        let mut st = LinearStencil {
            cp: vec![0.0; m + 1],
            cm: vec![0.0; m + 1],
            diag: 0.0,
            d: drift,
            far: Vec::new(),
            tail: (0.0, 0.0, 0.0),
            sigma: self.sigma,
        };
        for (i, c) in self.cells.iter().enumerate() {
            let (kp, km) = (ck.plus[i], ck.minus[i]);
            match c.kind {
                CellKind::Inner => {
                    let a = 0.5 * (kp + km) * c.w0 / (h * h);
                    st.cp[1] += a;
                    st.cm[1] += a;
                    st.diag += 2.0 * a;
                }
                CellKind::Compensated => {
                    let j = c.j as usize;
                    let e = 0.5 * (kp + km) * c.w0;
                    let o = 0.5 * (kp - km) * c.w1;
                    st.cp[j] += e + o;
                    st.cm[j] += e - o;
                    st.diag += 2.0 * e;
                    st.d -= 2.0 * o * c.node;
                }
                CellKind::Lattice => {
                    let j = c.j as usize;
                    st.cp[j] += kp * c.w0;
                    st.cm[j] += km * c.w0;
                    st.diag += (kp + km) * c.w0;
                    st.d -= (kp - km) * c.w1;
                }
                CellKind::Panel => {
                    st.far.push((c.node, kp * c.w0, km * c.w0, c.lo));
                    st.diag += (kp + km) * c.w0;
                }
                CellKind::Tail => {
                    st.tail = (kp, km, c.lo);
                    st.diag += (kp + km) * c.w0;
                }
            }
        }
        st
    }

    /// Diagonal weight sum of the unit kernel.
    pub fn unit_weight_sum(&self) -> f64 {
        self.linear_stencil(&self.cell_kernel(&Kernel::constant(1.0)), 0.0)
            .diag
    }

    /// Largest stable step, `cfl·h^σ/((2−σ)·2Λ·W_h)` with
    /// `W_h = h^σ·D₁/(2(2−σ))` and `D₁` the unit-kernel weight sum.
    pub fn max_time_step(&self, params: &EllipticityParams, cfl: f64) -> f64 {
        let s = self.sigma;
        let hs = self.grid.h.powf(s);
        let w_h = hs * self.unit_weight_sum() / (2.0 * (2.0 - s));
        cfl * hs / ((2.0 - s) * 2.0 * params.lambda_hi * w_h)
    }

    /// Worst monotonicity margin over every cell-constant member of the
    /// class; non-negative when the explicit extremal step is monotone.
    pub fn worst_case_margin(&self, params: &EllipticityParams, dt: f64) -> f64 {
        let lo = self.linear_stencil(&self.cell_kernel(&Kernel::constant(params.lambda)), 0.0);
        let hi = self.linear_stencil(&self.cell_kernel(&Kernel::constant(params.lambda_hi)), 0.0);
        let skew = self.linear_stencil(
            &self.cell_kernel(&Kernel::TwoSided {
                pos: params.lambda_hi,
                neg: params.lambda,
            }),
            0.0,
        );
        let dmax = params.drift_bound() + skew.d.abs();
        let h = self.grid.h;
        let off = (lo.cp[1].min(lo.cm[1]) - 2.0 * dmax / h).min(lo.cp[2] - dmax / (2.0 * h));
        let diag = 1.0 - dt * (hi.diag + 3.0 * dmax / (2.0 * h));
        off.min(diag)
    }
}

/// Per-cell kernel averages.
#[derive(Debug, Clone, PartialEq)]
pub struct CellKernel {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct CellValues {
    pub vp: Vec<f64>,
    pub vm: Vec<f64>,
    pub du: f64,
    /// Per-side bound on the dropped far tail, before the kernel factor.
    pub tail_gap: f64,
}

/// `Lu(x_k) = Σ_j cp_j u_{k+j} + cm_j u_{k−j} − diag·u_k + d·Du_k + exterior`.
#[derive(Debug, Clone)]
pub struct LinearStencil {
    pub cp: Vec<f64>,
    pub cm: Vec<f64>,
    pub diag: f64,
    pub d: f64,
    /// `(midpoint, weight+, weight−, panel start)` of each far panel.
    pub far: Vec<(f64, f64, f64, f64)>,
    /// `(K̄+, K̄−, start)` of the tail cell.
    pub tail: (f64, f64, f64),
    pub sigma: f64,
}

impl LinearStencil {
    /// Contribution of the exterior data beyond the lattice at `x`, time `t`.
    pub fn exterior_part(&self, ext: &dyn ExteriorData, x: f64, t: f64) -> f64 {
        let far = ext.far_field(t);
        let mut acc = 0.0;
        for &(mid, wp, wm, lo) in &self.far {
            acc += match far {
                Some((r, g)) if r <= lo - 1.0 => (wp + wm) * g,
                _ => wp * ext.value(x + mid, t) + wm * ext.value(x - mid, t),
            };
        }
        let (kp, km, lo) = self.tail;
        if let Some(v) = ext.tail_integral(x, t, 1.0, lo, self.sigma) {
            acc += kp * v;
        }
        if let Some(v) = ext.tail_integral(x, t, -1.0, lo, self.sigma) {
            acc += km * v;
        }
        acc
    }

    /// `Lu` at interior node `k`; `ext_part` from `exterior_part`.
    #[inline]
    pub fn apply(&self, scheme: &QuadratureScheme, s: &Slice, k: i64, ext_part: f64) -> f64 {
        let mut acc = 0.0;
        for j in 1..self.cp.len() {
            let ji = j as i64;
            acc += self.cp[j] * s.at(k + ji) + self.cm[j] * s.at(k - ji);
        }
        acc - self.diag * s.at(k) + self.d * scheme.du(s, k) + ext_part
    }

    /// Smallest coefficient of the explicit map `u ↦ u + dt·Lu` over all
    /// interior nodes, including the one-sided gradient stencils.
    pub fn monotone_margin(&self, h: f64, dt: f64) -> f64 {
        let d = self.d / (2.0 * h);
        let mut m = f64::INFINITY;
        for j in 2..self.cp.len() {
            m = m.min(self.cp[j]).min(self.cm[j]);
        }
        for (_, wp, wm, _) in &self.far {
            m = m.min(*wp).min(*wm);
        }
        // Central stencil.
        m = m.min(self.cp[1] + d).min(self.cm[1] - d);
        m = m.min(1.0 - dt * self.diag);
        // One-sided at the right end.
        m = m.min(self.cm[1] - 4.0 * d).min(self.cm[2] + d);
        m = m.min(1.0 - dt * (self.diag - 3.0 * d));
        // One-sided at the left end.
        m = m.min(self.cp[1] + 4.0 * d).min(self.cp[2] - d);
        m.min(1.0 - dt * (self.diag + 3.0 * d))
    }
}
