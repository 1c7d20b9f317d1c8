//! Explicit time marching of `u_t − Iu = f` on `(−1,1)` with exterior data,
//! and the regularized fixed-point path.
//!
//! The fixed-point map is `G(v) = w` with `w_t − 𝓛w = f + I_ε v − 𝓛v`,
//! `𝓛 = L_{λ,0}`, each linear solve marched with the same explicit step. A
//! fixed point of the discrete `G` is exactly the explicit solution for
//! `I_ε`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{Exterior, ExteriorData, Grid, Slice, SpaceTimeField};
use crate::kernel::KernelSpec;
use crate::ops::{Operator, OperatorSpec};
use crate::scheme::{CellValues, LinearStencil, QuadratureScheme};

type Slices = Vec<Vec<f64>>;

/// Safety cap on the number of time steps.
pub const MAX_STEPS: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SchemeKind {
    Explicit,
    RegularizedFixedpoint { eps: f64, max_iter: usize, tol: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub h: f64,
    pub cfl: f64,
    pub r_max: f64,
    pub scheme: SchemeKind,
}

impl SolverConfig {
    pub fn explicit(h: f64, cfl: f64, r_max: f64) -> Self {
        Self {
            h,
            cfl,
            r_max,
            scheme: SchemeKind::Explicit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(LabError::InvalidParameter(format!(
                "cfl must lie in (0,1), got {}",
                self.cfl
            )));
        }
        if let SchemeKind::RegularizedFixedpoint { eps, max_iter, tol } = self.scheme {
            if !(eps >= 0.0 && tol > 0.0 && max_iter >= 1) {
                return Err(LabError::InvalidParameter(
                    "fixed-point scheme needs eps >= 0, tol > 0, max_iter >= 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// `u_t − Iu = f` in `(−1,1) × (t_start, t_end]`, `u = g` on the parabolic
/// boundary.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub op: OperatorSpec,
    pub rhs: Exterior,
    pub exterior: Arc<dyn ExteriorData>,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub dt: f64,
    pub n_steps: usize,
    /// Largest mid-step defect `|δ_t u − ½(Iuⁿ + Iuⁿ⁺¹) − f(t_{n+½})|`.
    pub max_residual: f64,
    /// Largest ratio of the defect to its per-step tolerance.
    pub max_residual_ratio: f64,
    pub residual_ok: bool,
    /// Bound on the dropped far tail of the exterior data.
    pub tail_bound: f64,
    /// Monotonicity margin of the explicit step.
    pub monotone_margin: f64,
    pub iterations: usize,
    pub gaps: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub field: SpaceTimeField,
    pub report: SolveReport,
}

/// How the spatial operator is applied at a node.
#[derive(Debug, Clone)]
pub enum NodeOp {
    Stencil(LinearStencil),
    Generic(Operator),
    Mollified(Operator, f64),
}

impl NodeOp {
    pub fn from_operator(op: Operator, q: &QuadratureScheme) -> Self {
        match op.linear_stencil(q) {
            Some(st) => NodeOp::Stencil(st),
            None => NodeOp::Generic(op),
        }
    }

    fn apply(
        &self,
        q: &QuadratureScheme,
        s: &Slice,
        ext: &dyn ExteriorData,
        k: i64,
        buf: &mut CellValues,
    ) -> f64 {
        match self {
            NodeOp::Stencil(st) => {
                let x = q.grid.x(k);
                st.apply(q, s, k, st.exterior_part(ext, x, s.t))
            }
            NodeOp::Generic(op) => op.apply(q, s, ext, k, buf),
            NodeOp::Mollified(op, eps) => {
                q.cell_values(s, ext, k, buf);
                op.apply_values_mollified(buf, q.grid.x(k), *eps)
            }
        }
    }

    fn monotone_margin(&self, q: &QuadratureScheme, dt: f64) -> f64 {
        let h = q.grid.h;
        match self {
            NodeOp::Stencil(st) => st.monotone_margin(h, dt),
            NodeOp::Generic(op) | NodeOp::Mollified(op, _) => {
                if op.is_extremal() {
                    q.worst_case_margin(&op.spec.params(), dt)
                } else {
                    op.member_stencils(q)
                        .iter()
                        .map(|st| st.monotone_margin(h, dt))
                        .fold(f64::INFINITY, f64::min)
                }
            }
        }
    }
}

/// Grid, quadrature and time ladder of a problem.
#[derive(Debug, Clone)]
pub struct Solver {
    pub problem: ProblemSpec,
    pub config: SolverConfig,
    pub grid: Grid,
    pub q: QuadratureScheme,
    pub dt: f64,
    pub n_steps: usize,
}

impl Solver {
    pub fn new(problem: ProblemSpec, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        problem.op.validate()?;
        let params = problem.op.params();
        if !(problem.t_end > problem.t_start) {
            return Err(LabError::InvalidParameter(format!(
                "empty time window ({}, {}]",
                problem.t_start, problem.t_end
            )));
        }
        let grid = Grid::new(config.h, config.r_max)?;
        let q = QuadratureScheme::new(&grid, params.sigma)?;
        let dt_max = q.max_time_step(&params, config.cfl);
        let span = problem.t_end - problem.t_start;
        let n_steps = (span / dt_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        if n_steps > MAX_STEPS {
            return Err(LabError::InvalidParameter(format!(
                "{n_steps} time steps exceed the cap of {MAX_STEPS}"
            )));
        }
        Ok(Self {
            problem,
            config,
            grid,
            q,
            dt: span / n_steps as f64,
            n_steps,
        })
    }

    pub fn t(&self, n: usize) -> f64 {
        self.problem.t_start + n as f64 * self.dt
    }

    fn ext(&self) -> &dyn ExteriorData {
        self.problem.exterior.as_ref()
    }

    /// Node operator for `I` (or `I_ε` when `eps` is given).
    pub fn node_op(&self, eps: Option<f64>) -> Result<NodeOp> {
        Ok(match eps {
            None => NodeOp::from_operator(Operator::new(&self.problem.op, &self.q)?, &self.q),
            Some(e) => {
                let op = Operator::regularized(&self.problem.op, &self.q, e)?;
                if self.problem.op.is_modulated() {
                    NodeOp::Mollified(op, e)
                } else {
                    NodeOp::from_operator(op, &self.q)
                }
            }
        })
    }

    fn check_monotone(&self, op: &NodeOp) -> Result<f64> {
        let m = op.monotone_margin(&self.q, self.dt);
        if m < -1e-12 {
            return Err(LabError::Cfl(format!(
                "explicit step is not monotone (margin {m:.3e}) at h = {}, dt = {:.3e}",
                self.grid.h, self.dt
            )));
        }
        Ok(m)
    }

    /// The initial slice `g(·, t_start)` on the interior.
    pub fn initial_slice(&self) -> Vec<f64> {
        let t = self.problem.t_start;
        self.grid
            .interior_xs()
            .iter()
            .map(|&x| self.ext().value(x, t))
            .collect()
    }

    /// `Iu` at every interior node of slice `s`.
    pub fn apply_all(&self, op: &NodeOp, s: &Slice) -> Vec<f64> {
        let ext = self.ext();
        (0..self.grid.n_interior())
            .into_par_iter()
            .map_init(CellValues::default, |buf, i| {
                op.apply(&self.q, s, ext, self.grid.k_of(i), buf)
            })
            .collect()
    }

    fn rhs_slice(&self, t: f64) -> Vec<f64> {
        self.grid
            .interior_xs()
            .iter()
            .map(|&x| self.problem.rhs.value(x, t))
            .collect()
    }

    /// One explicit step from `u` at `t`: returns `(u at t+dt, Iu at t)`.
    pub fn step(
        &self,
        op: &NodeOp,
        u: &[f64],
        t: f64,
        extra: Option<&[f64]>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let s = Slice::assemble(&self.grid, u, self.ext(), t);
        let iu = self.apply_all(op, &s);
        let f = self.rhs_slice(t);
        let mut next = Vec::with_capacity(u.len());
        for i in 0..u.len() {
            let src = f[i] + extra.map_or(0.0, |e| e[i]);
            let v = u[i] + self.dt * (iu[i] + src);
            if !v.is_finite() {
                return Err(LabError::NonFinite(format!(
                    "u at x = {} after t = {t}",
                    self.grid.x(self.grid.k_of(i))
                )));
            }
            next.push(v);
        }
        Ok((next, iu))
    }

    /// Marches from `u0`, returning all slices and `Iu` at every level.
    fn march(
        &self,
        op: &NodeOp,
        u0: Vec<f64>,
        extra: Option<&[Vec<f64>]>,
    ) -> Result<(Slices, Slices)> {
        let mut slices = Vec::with_capacity(self.n_steps + 1);
        let mut ius = Vec::with_capacity(self.n_steps + 1);
        slices.push(u0);
        for n in 0..self.n_steps {
            let (next, iu) = self.step(
                op,
                &slices[n],
                self.t(n),
                extra.map(|e| e[n].as_slice()),
            )?;
            slices.push(next);
            ius.push(iu);
        }
        let last = Slice::assemble(&self.grid, &slices[self.n_steps], self.ext(), self.t(self.n_steps));
        ius.push(self.apply_all(op, &last));
        Ok((slices, ius))
    }

    /// Lipschitz bound of the operator in the sup norm, for the residual
    /// tolerance.
    fn lipschitz(&self) -> f64 {
        let p = self.problem.op.params();
        2.0 * p.lambda_hi * self.q.unit_weight_sum() + 2.0 * p.drift_bound() / self.grid.h
    }

    fn tail_bound(&self) -> f64 {
        let p = self.problem.op.params();
        let s = p.sigma;
        let w = crate::field::unit_tail(self.q.r_tail, s);
        (0..=self.n_steps)
            .map(|n| {
                let t = self.t(n);
                let ext = self.ext();
                if ext.tail_integral(0.0, t, 1.0, self.q.r_tail, s).is_some()
                    && ext.tail_integral(0.0, t, -1.0, self.q.r_tail, s).is_some()
                {
                    0.0
                } else {
                    2.0 * p.lambda_hi * ext.sup_norm(t) * w
                }
            })
            .fold(0.0, f64::max)
    }

    /// Mid-step defect of a stored trajectory against its per-step
    /// tolerance `10·(½D·max|Δu| + ½D·max|Δg| + max|f(tₙ) − f(t_{n+½})|)`.
    fn residuals(
        &self,
        slices: &[Vec<f64>],
        ius: &[Vec<f64>],
        extra: Option<&[Vec<f64>]>,
        report: &mut SolveReport,
    ) {
        let d = self.lipschitz();
        let xs = self.grid.interior_xs();
        let ext = self.ext();
        let ext_nodes: Vec<f64> = (-self.grid.span()..=self.grid.span())
            .filter(|k| !self.grid.is_interior(*k))
            .map(|k| self.grid.x(k))
            .collect();
        let mut max_res: f64 = 0.0;
        let mut max_ratio: f64 = 0.0;
        for n in 0..self.n_steps {
            let (t, tm) = (self.t(n), self.t(n) + 0.5 * self.dt);
            let mut res: f64 = 0.0;
            let mut du: f64 = 0.0;
            let mut df: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for (i, &x) in xs.iter().enumerate() {
                let fm = self.problem.rhs.value(x, tm) + extra.map_or(0.0, |e| 0.5 * (e[n][i] + e.get(n + 1).map_or(e[n][i], |v| v[i])));
                let fe = self.problem.rhs.value(x, t) + extra.map_or(0.0, |e| e[n][i]);
                let dtu = (slices[n + 1][i] - slices[n][i]) / self.dt;
                res = res.max((dtu - 0.5 * (ius[n][i] + ius[n + 1][i]) - fm).abs());
                du = du.max((slices[n + 1][i] - slices[n][i]).abs());
                df = df.max((fe - fm).abs());
                scale = scale.max(ius[n][i].abs()).max(dtu.abs());
            }
            let dg = ext_nodes
                .iter()
                .map(|&y| (ext.value(y, t + self.dt) - ext.value(y, t)).abs())
                .fold(0.0, f64::max);
            let tol = 10.0 * (0.5 * d * du + 0.5 * d * dg + df) + 1e-9 * (1.0 + scale);
            max_res = max_res.max(res);
            max_ratio = max_ratio.max(res / tol);
        }
        report.max_residual = max_res;
        report.max_residual_ratio = max_ratio;
        report.residual_ok = max_ratio <= 1.0;
    }

    fn finish(
        &self,
        slices: Vec<Vec<f64>>,
        ius: &[Vec<f64>],
        extra: Option<&[Vec<f64>]>,
        mut report: SolveReport,
    ) -> Result<Solution> {
        report.dt = self.dt;
        report.n_steps = self.n_steps;
        report.tail_bound = self.tail_bound();
        self.residuals(&slices, ius, extra, &mut report);
        let field = SpaceTimeField::new(
            self.grid,
            self.problem.t_start,
            self.dt,
            slices,
            self.problem.exterior.clone(),
        )?;
        Ok(Solution { field, report })
    }

    /// Explicit solve of `u_t = Iu + f`, or of `u_t = I_ε u + f` when `eps`
    /// is given.
    pub fn solve_explicit(&self, eps: Option<f64>) -> Result<Solution> {
        let op = self.node_op(eps)?;
        let margin = self.check_monotone(&op)?;
        let (slices, ius) = self.march(&op, self.initial_slice(), None)?;
        let report = SolveReport {
            monotone_margin: margin,
            iterations: 1,
            ..Default::default()
        };
        self.finish(slices, &ius, None, report)
    }

    /// Picard iteration `v ← G(v)` from the linear interpolation of the
    /// boundary data.
    pub fn solve_fixed_point(&self, eps: f64, max_iter: usize, tol: f64) -> Result<Solution> {
        let params = self.problem.op.params();
        let base_spec = OperatorSpec::Linear {
            kernel: KernelSpec::lambda_kernel(params),
        };
        let base = NodeOp::from_operator(Operator::new(&base_spec, &self.q)?, &self.q);
        let full = self.node_op(Some(eps))?;
        let margin = self.check_monotone(&base)?.min(self.check_monotone(&full)?);
        let structurally_linear = self.f_vanishes(eps)?;

        let ext = self.ext();
        let xs = self.grid.interior_xs();
        let mut v: Vec<Vec<f64>> = (0..=self.n_steps)
            .map(|n| {
                let t = self.t(n);
                let (gl, gr) = (ext.value(-1.0, t), ext.value(1.0, t));
                if n == 0 {
                    xs.iter().map(|&x| ext.value(x, t)).collect()
                } else {
                    xs.iter().map(|&x| gl + (gr - gl) * (x + 1.0) / 2.0).collect()
                }
            })
            .collect();
        let mut gaps = Vec::new();
        for it in 1..=max_iter {
            let source: Vec<Vec<f64>> = if structurally_linear {
                vec![vec![0.0; xs.len()]; self.n_steps + 1]
            } else {
                (0..=self.n_steps)
                    .map(|n| {
                        let s = Slice::assemble(&self.grid, &v[n], ext, self.t(n));
                        let a = self.apply_all(&full, &s);
                        let b = self.apply_all(&base, &s);
                        a.iter().zip(&b).map(|(x, y)| x - y).collect()
                    })
                    .collect()
            };
            let (next, ius) = self.march(&base, self.initial_slice(), Some(&source))?;
            let gap = next
                .iter()
                .zip(&v)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max);
            gaps.push(gap);
            v = next;
            if gap <= tol || structurally_linear {
                let report = SolveReport {
                    monotone_margin: margin,
                    iterations: it,
                    gaps,
                    ..Default::default()
                };
                return self.finish(v, &ius, Some(&source), report);
            }
        }
        let last_gap = *gaps.last().unwrap_or(&f64::INFINITY);
        Err(LabError::FixedPointDiverged {
            iterations: max_iter,
            last_gap,
            gaps,
        })
    }

    /// Whether `I_ε − 𝓛` vanishes identically (every member is `L_{λ,0}`).
    fn f_vanishes(&self, eps: f64) -> Result<bool> {
        let params = self.problem.op.params();
        let lam = KernelSpec::lambda_kernel(params);
        let is_lam = |k: &KernelSpec| -> Result<bool> {
            let r = crate::ops::regularized_spec(k, eps)?;
            Ok(self.q.cell_kernel(&r.kernel) == self.q.cell_kernel(&lam.kernel) && r.drift == 0.0)
        };
        Ok(match &self.problem.op {
            OperatorSpec::Linear { kernel } => is_lam(kernel)?,
            OperatorSpec::InfSup { rows, .. } => {
                let mut all = true;
                for k in rows.iter().flatten() {
                    all &= is_lam(k)?;
                }
                all
            }
            _ => false,
        })
    }
}

/// Solves the problem with the configured scheme.
pub fn solve(problem: &ProblemSpec, config: &SolverConfig) -> Result<Solution> {
    let s = Solver::new(problem.clone(), config.clone())?;
    match config.scheme {
        SchemeKind::Explicit => s.solve_explicit(None),
        SchemeKind::RegularizedFixedpoint { eps, max_iter, tol } => {
            s.solve_fixed_point(eps, max_iter, tol)
        }
    }
}

/// Regularized fixed-point solve; `config.scheme` must carry the
/// fixed-point parameters.
pub fn solve_regularized_fixedpoint(problem: &ProblemSpec, config: &SolverConfig) -> Result<Solution> {
    match config.scheme {
        SchemeKind::RegularizedFixedpoint { .. } => solve(problem, config),
        SchemeKind::Explicit => Err(LabError::InvalidParameter(
            "fixed-point solve needs a regularized_fixedpoint scheme".into(),
        )),
    }
}

/// One explicit step from the last stored slice of `field`.
pub fn step_explicit(
    field: &SpaceTimeField,
    problem: &ProblemSpec,
    config: &SolverConfig,
) -> Result<SpaceTimeField> {
    let s = Solver::new(problem.clone(), config.clone())?;
    if field.grid != s.grid {
        return Err(LabError::InvalidParameter("field grid does not match config".into()));
    }
    let op = s.node_op(None)?;
    s.check_monotone(&op)?;
    let n = field.n_times() - 1;
    let t = field.t(n);
    let (next, _) = s.step(&op, &field.slices[n], t, None)?;
    SpaceTimeField::new(s.grid, t + s.dt, s.dt, vec![next], field.exterior.clone())
}
