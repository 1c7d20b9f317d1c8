//! Linear, extremal and inf-sup operators on discrete fields, and their
//! ε-regularized and mollified versions.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{ExteriorData, SpaceTimeField};
use crate::kernel::{drift_to_nonlocal, solve_r0, truncate_kernel, EllipticityParams, Kernel, KernelSpec};
use crate::quad::CompensatedSum;
use crate::scheme::{CellKernel, CellValues, LinearStencil, QuadratureScheme};
use crate::field::Slice;

/// Smooth weight `ρ(x) = (1 + sin(freq·x + phase))/2 ∈ [0,1]`. A modulated
/// member acts as `ρ(x)L_K + (1−ρ(x))L_{λ,0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulation {
    pub freq: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Modulation {
    pub fn rho(&self, x: f64) -> f64 {
        0.5 * (1.0 + (self.freq * x + self.phase).sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OperatorSpec {
    Linear {
        kernel: KernelSpec,
    },
    ExtremalPlus {
        params: EllipticityParams,
    },
    ExtremalMinus {
        params: EllipticityParams,
    },
    /// `inf over rows of sup over the row's members`.
    InfSup {
        rows: Vec<Vec<KernelSpec>>,
        #[serde(default)]
        modulation: Option<Modulation>,
    },
}

impl OperatorSpec {
    pub fn params(&self) -> EllipticityParams {
        match self {
            OperatorSpec::Linear { kernel } => kernel.params,
            OperatorSpec::ExtremalPlus { params } | OperatorSpec::ExtremalMinus { params } => {
                *params
            }
            OperatorSpec::InfSup { rows, .. } => rows[0][0].params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OperatorSpec::Linear { kernel } => kernel.validate(),
            OperatorSpec::ExtremalPlus { params } | OperatorSpec::ExtremalMinus { params } => {
                params.validate()
            }
            OperatorSpec::InfSup { rows, .. } => {
                if rows.is_empty() || rows.iter().any(|r| r.is_empty()) {
                    return Err(LabError::InvalidParameter(
                        "inf-sup family must be non-empty".into(),
                    ));
                }
                let p = rows[0][0].params;
                for k in rows.iter().flatten() {
                    if k.params != p {
                        return Err(LabError::InvalidParameter(
                            "inf-sup members must share ellipticity params".into(),
                        ));
                    }
                    k.validate()?;
                }
                Ok(())
            }
        }
    }

    pub fn is_modulated(&self) -> bool {
        matches!(
            self,
            OperatorSpec::InfSup {
                modulation: Some(_),
                ..
            }
        )
    }
}

#[derive(Debug, Clone)]
struct Member {
    ck: CellKernel,
    drift: f64,
}

#[derive(Debug, Clone)]
enum Prepared {
    Linear(Member),
    Extremal {
        sign: Sign,
        upper: Vec<f64>,
        lower: f64,
        drift_bound: f64,
    },
    InfSup {
        rows: Vec<Vec<Member>>,
        modulation: Option<Modulation>,
        base: Member,
    },
}

/// An operator with its kernels averaged onto a quadrature scheme.
#[derive(Debug, Clone)]
pub struct Operator {
    pub spec: OperatorSpec,
    pub eps: f64,
    prepared: Prepared,
}

/// Effective (kernel, drift) of the ε-regularized operator built from `k`.
pub fn regularized_spec(k: &KernelSpec, eps: f64) -> Result<KernelSpec> {
    let c = truncate_kernel(&drift_to_nonlocal(k), eps)?;
    Ok(c.effective_spec())
}

impl Operator {
    pub fn new(spec: &OperatorSpec, q: &QuadratureScheme) -> Result<Self> {
        Self::build(spec, q, 0.0)
    }

    /// The operator with every linear member replaced by its
    /// ε-regularization `L^ε`.
    pub fn regularized(spec: &OperatorSpec, q: &QuadratureScheme, eps: f64) -> Result<Self> {
        Self::build(spec, q, eps)
    }

    fn build(spec: &OperatorSpec, q: &QuadratureScheme, eps: f64) -> Result<Self> {
        spec.params().validate()?;
        if !(eps >= 0.0) {
            return Err(LabError::InvalidParameter(format!("eps must be >= 0, got {eps}")));
        }
        let member = |k: &KernelSpec| -> Result<Member> {
            let k = if eps > 0.0 {
                regularized_spec(k, eps)?
            } else {
                k.clone()
            };
            Ok(Member {
                ck: q.cell_kernel(&k.kernel),
                drift: k.drift,
            })
        };
        let prepared = match spec {
            OperatorSpec::Linear { kernel } => Prepared::Linear(member(kernel)?),
            OperatorSpec::ExtremalPlus { params } | OperatorSpec::ExtremalMinus { params } => {
                let sign = if matches!(spec, OperatorSpec::ExtremalPlus { .. }) {
                    Sign::Plus
                } else {
                    Sign::Minus
                };
                let frac = q.inner_fraction(eps);
                let upper = frac
                    .iter()
                    .map(|f| params.lambda * f + params.lambda_hi * (1.0 - f))
                    .collect();
                let r0 = solve_r0(params);
                let shrink = if eps >= r0 {
                    0.0
                } else {
                    1.0 - (eps / r0).powf(2.0 - params.sigma)
                };
                Prepared::Extremal {
                    sign,
                    upper,
                    lower: params.lambda,
                    drift_bound: params.drift_bound() * shrink,
                }
            }
            OperatorSpec::InfSup { rows, modulation } => {
                if rows.is_empty() || rows.iter().any(|r| r.is_empty()) {
                    return Err(LabError::InvalidParameter(
                        "inf-sup family must be non-empty".into(),
                    ));
                }
                let rows = rows
                    .iter()
                    .map(|r| r.iter().map(&member).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                Prepared::InfSup {
                    rows,
                    modulation: *modulation,
                    base: member(&KernelSpec::lambda_kernel(spec.params()))?,
                }
            }
        };
        Ok(Self {
            spec: spec.clone(),
            eps,
            prepared,
        })
    }

    /// Stencil of a linear operator.
    pub fn linear_stencil(&self, q: &QuadratureScheme) -> Option<LinearStencil> {
        match &self.prepared {
            Prepared::Linear(m) => Some(q.linear_stencil(&m.ck, m.drift)),
            _ => None,
        }
    }

    /// Stencils of all linear pieces (members, and the `λ` base when
    /// modulated); used for the monotonicity check.
    pub fn member_stencils(&self, q: &QuadratureScheme) -> Vec<LinearStencil> {
        match &self.prepared {
            Prepared::Linear(m) => vec![q.linear_stencil(&m.ck, m.drift)],
            Prepared::Extremal { .. } => Vec::new(),
            Prepared::InfSup {
                rows,
                modulation,
                base,
            } => {
                let mut v: Vec<_> = rows
                    .iter()
                    .flatten()
                    .map(|m| q.linear_stencil(&m.ck, m.drift))
                    .collect();
                if modulation.is_some() {
                    v.push(q.linear_stencil(&base.ck, base.drift));
                }
                v
            }
        }
    }

    pub fn is_extremal(&self) -> bool {
        matches!(self.prepared, Prepared::Extremal { .. })
    }

    /// Value at node `x` from precomputed cell values.
    pub fn apply_values(&self, cv: &CellValues, x: f64) -> f64 {
        match &self.prepared {
            Prepared::Linear(m) => linear_value(m, cv),
            Prepared::Extremal {
                sign,
                upper,
                lower,
                drift_bound,
            } => extremal_value(*sign, upper, *lower, *drift_bound, cv),
            Prepared::InfSup {
                rows,
                modulation,
                base,
            } => {
                let vals: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|r| r.iter().map(|m| linear_value(m, cv)).collect())
                    .collect();
                let b = modulation.map(|_| linear_value(base, cv)).unwrap_or(0.0);
                combine(&vals, *modulation, b, x)
            }
        }
    }

    /// Mollified value `Σ_k φ_k I(x + ε s_k, {L u(x)})`: the member values
    /// are frozen at `x`, only the modulation is sampled at the shifted
    /// points.
    pub fn apply_values_mollified(&self, cv: &CellValues, x: f64, eps: f64) -> f64 {
        match &self.prepared {
            Prepared::InfSup {
                rows,
                modulation: Some(md),
                base,
            } => {
                let vals: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|r| r.iter().map(|m| linear_value(m, cv)).collect())
                    .collect();
                let b = linear_value(base, cv);
                let mut acc = CompensatedSum::new();
                for (s, w) in mollifier_stencil() {
                    acc.add(w * combine(&vals, Some(*md), b, x + eps * s));
                }
                acc.value()
            }
            _ => self.apply_values(cv, x),
        }
    }

    /// `I u(x_k)` on slice `s`.
    pub fn apply(
        &self,
        q: &QuadratureScheme,
        s: &Slice,
        ext: &dyn ExteriorData,
        k: i64,
        buf: &mut CellValues,
    ) -> f64 {
        q.cell_values(s, ext, k, buf);
        self.apply_values(buf, q.grid.x(k))
    }
}

fn linear_value(m: &Member, cv: &CellValues) -> f64 {
    let mut acc = CompensatedSum::new();
    for i in 0..cv.vp.len() {
        acc.add(m.ck.plus[i] * cv.vp[i]);
        acc.add(m.ck.minus[i] * cv.vm[i]);
    }
    acc.add(m.drift * cv.du);
    acc.value()
}

fn extremal_value(sign: Sign, upper: &[f64], lower: f64, bound: f64, cv: &CellValues) -> f64 {
    let mut acc = CompensatedSum::new();
    let pick = |v: f64, up: f64| match (sign, v > 0.0) {
        (Sign::Plus, true) | (Sign::Minus, false) => up * v,
        _ => lower * v,
    };
    for ((&vp, &vm), &up) in cv.vp.iter().zip(&cv.vm).zip(upper) {
        acc.add(pick(vp, up));
        acc.add(pick(vm, up));
    }
    match sign {
        Sign::Plus => acc.add(bound * cv.du.abs()),
        Sign::Minus => acc.add(-bound * cv.du.abs()),
    }
    acc.value()
}

fn combine(vals: &[Vec<f64>], modulation: Option<Modulation>, base: f64, z: f64) -> f64 {
    let rho = modulation.map(|m| m.rho(z));
    vals.iter()
        .map(|row| {
            row.iter()
                .map(|&v| match rho {
                    Some(r) => r * v + (1.0 - r) * base,
                    None => v,
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Nine-point bump mollifier on `(−1,1)`: nodes `s_k = k/5`, weights
/// proportional to `exp(−1/(1−s²))`, summing to one.
pub fn mollifier_stencil() -> [(f64, f64); 9] {
    let mut out = [(0.0, 0.0); 9];
    let mut total = 0.0;
    for (i, o) in out.iter_mut().enumerate() {
        let s = (i as f64 - 4.0) / 5.0;
        let w = (-1.0 / (1.0 - s * s)).exp();
        *o = (s, w);
        total += w;
    }
    for o in out.iter_mut() {
        o.1 /= total;
    }
    out
}

fn locate(field: &SpaceTimeField, x: f64, t: f64) -> Result<(i64, usize)> {
    let n = field.time_index(t)?;
    match field.grid.node_index(x) {
        Some(k) if field.grid.is_interior(k) => Ok((k, n)),
        _ => Err(LabError::OutOfWindow(format!(
            "x = {x} is not an interior grid node"
        ))),
    }
}

fn check_scheme(field: &SpaceTimeField, q: &QuadratureScheme) -> Result<()> {
    if field.grid != q.grid {
        return Err(LabError::InvalidParameter(
            "quadrature scheme built for a different grid".into(),
        ));
    }
    Ok(())
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(LabError::NonFinite(format!("{what} evaluated to {v}")))
    }
}

/// `δu(x;y) = u(x+y) − u(x) − Du(x)·y·χ_{|y|<1}`.
pub fn delta_u(field: &SpaceTimeField, q: &QuadratureScheme, x: f64, y: f64, t: f64) -> Result<f64> {
    check_scheme(field, q)?;
    let (k, n) = locate(field, x, t)?;
    let s = field.slice(n);
    let grad = if y.abs() < 1.0 { q.du(&s, k) * y } else { 0.0 };
    finite(field.value(x + y, n) - s.at(k) - grad, "delta u")
}

fn eval_spec(
    field: &SpaceTimeField,
    op: &Operator,
    q: &QuadratureScheme,
    x: f64,
    t: f64,
    mollify: Option<f64>,
) -> Result<f64> {
    check_scheme(field, q)?;
    let (k, n) = locate(field, x, t)?;
    let s = field.slice(n);
    let mut cv = CellValues::default();
    q.cell_values(&s, field.exterior.as_ref(), k, &mut cv);
    let v = match mollify {
        Some(eps) => op.apply_values_mollified(&cv, x, eps),
        None => op.apply_values(&cv, x),
    };
    finite(v, "operator")
}

pub fn evaluate_linear(
    field: &SpaceTimeField,
    k: &KernelSpec,
    x: f64,
    t: f64,
    q: &QuadratureScheme,
) -> Result<f64> {
    let op = Operator::new(&OperatorSpec::Linear { kernel: k.clone() }, q)?;
    eval_spec(field, &op, q, x, t, None)
}

pub fn evaluate_extremal(
    field: &SpaceTimeField,
    sign: Sign,
    params: &EllipticityParams,
    x: f64,
    t: f64,
    q: &QuadratureScheme,
) -> Result<f64> {
    let spec = match sign {
        Sign::Plus => OperatorSpec::ExtremalPlus { params: *params },
        Sign::Minus => OperatorSpec::ExtremalMinus { params: *params },
    };
    eval_spec(field, &Operator::new(&spec, q)?, q, x, t, None)
}

pub fn evaluate_operator(
    field: &SpaceTimeField,
    op: &OperatorSpec,
    x: f64,
    t: f64,
    q: &QuadratureScheme,
) -> Result<f64> {
    eval_spec(field, &Operator::new(op, q)?, q, x, t, None)
}

/// `(2−σ) ∫_{|y|>hcut} (v(x+y) + v(x−y) − 2v(x)) |y|^{−1−σ} dy`.
pub fn truncated_fraclap(
    field: &SpaceTimeField,
    x: f64,
    t: f64,
    hcut: f64,
    q: &QuadratureScheme,
) -> Result<f64> {
    if !(hcut >= 0.0) {
        return Err(LabError::InvalidParameter(format!("hcut must be >= 0, got {hcut}")));
    }
    let kernel = fraclap_kernel(hcut);
    let p = EllipticityParams {
        sigma: q.sigma,
        lambda: 1.0,
        lambda_hi: 1.0,
    };
    let k = KernelSpec::new_unchecked(kernel, 0.0, p);
    let op = Operator::new(&OperatorSpec::Linear { kernel: k }, q)?;
    Ok(2.0 * eval_spec(field, &op, q, x, t, None)?)
}

/// Kernel `χ_{|y|>hcut}`.
pub fn fraclap_kernel(hcut: f64) -> Kernel {
    if hcut == 0.0 {
        Kernel::constant(1.0)
    } else {
        Kernel::Truncated {
            eps: hcut,
            inner: 0.0,
            outer: Box::new(Kernel::constant(1.0)),
        }
    }
}

/// `L^ε_{K,b} u(x)`.
pub fn evaluate_regularized(
    field: &SpaceTimeField,
    k: &KernelSpec,
    eps: f64,
    x: f64,
    t: f64,
    q: &QuadratureScheme,
) -> Result<f64> {
    let op = Operator::regularized(&OperatorSpec::Linear { kernel: k.clone() }, q, eps)?;
    eval_spec(field, &op, q, x, t, None)
}

/// `I_ε u(x)`.
pub fn evaluate_mollified(
    field: &SpaceTimeField,
    op: &OperatorSpec,
    eps: f64,
    x: f64,
    t: f64,
    q: &QuadratureScheme,
) -> Result<f64> {
    let o = Operator::regularized(op, q, eps)?;
    eval_spec(field, &o, q, x, t, Some(eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Exterior, Grid, SpaceProfile, TimeProfile};
    use std::sync::Arc;

    fn params() -> EllipticityParams {
        EllipticityParams::new(1.5, 1.0, 2.0).unwrap()
    }

    fn field_of(grid: Grid, g: Exterior, u: impl Fn(f64) -> f64) -> SpaceTimeField {
        SpaceTimeField::from_fn(grid, 0.0, 1.0, 1, Arc::new(g), |x, _| u(x)).unwrap()
    }

    #[test]
    fn delta_u_examples() {
        let grid = Grid::new(0.05, 2.0).unwrap();
        let q = QuadratureScheme::new(&grid, 1.5).unwrap();
        let c = field_of(grid, Exterior::Constant { value: 3.0 }, |_| 3.0);
        let lin = field_of(
            grid,
            Exterior::separable(TimeProfile::One, SpaceProfile::Linear { slope: 2.0 }),
            |x| 2.0 * x,
        );
        for y in [-1.7, -0.3, 0.05, 0.5, 2.5] {
            assert_eq!(delta_u(&c, &q, 0.2, y, 0.0).unwrap(), 0.0);
            if y.abs() < 1.0 {
                assert!(delta_u(&lin, &q, 0.2, y, 0.0).unwrap().abs() < 1e-12);
            }
        }
        let sq = SpaceTimeField::from_fn(grid, 0.0, 1.0, 1, Arc::new(Exterior::Zero), |x, _| x * x)
            .unwrap();
        for y in [-0.5, 0.25, 0.9] {
            assert!((delta_u(&sq, &q, 0.0, y, 0.0).unwrap() - y * y).abs() < 1e-12);
        }
        assert!(delta_u(&sq, &q, 0.013, 0.1, 0.0).is_err());
    }

    #[test]
    fn linear_on_constants_and_lines() {
        let grid = Grid::new(0.05, 2.0).unwrap();
        let q = QuadratureScheme::new(&grid, 1.5).unwrap();
        let c = field_of(grid, Exterior::Constant { value: 3.0 }, |_| 3.0);
        let k = KernelSpec::new(Kernel::TwoSided { pos: 2.0, neg: 1.0 }, 1.2, params()).unwrap();
        for x in [-0.95, 0.0, 0.5] {
            assert!(evaluate_linear(&c, &k, x, 0.0, &q).unwrap().abs() < 1e-10);
        }
        let lin = field_of(
            grid,
            Exterior::separable(TimeProfile::One, SpaceProfile::Linear { slope: 2.0 }),
            |x| 2.0 * x,
        );
        let k1 = KernelSpec::new(Kernel::constant(1.0), 0.3, params()).unwrap();
        for x in [-0.95, -0.4, 0.0, 0.55, 0.95] {
            let v = evaluate_linear(&lin, &k1, x, 0.0, &q).unwrap();
            assert!((v - 0.6).abs() < 1e-9, "{x}: {v}");
        }
    }

    fn cos_field(grid: Grid, xi: f64) -> SpaceTimeField {
        field_of(
            grid,
            Exterior::separable(TimeProfile::One, SpaceProfile::Cos { freq: xi }),
            |x| (xi * x).cos(),
        )
    }

    #[test]
    fn multiplier_ratio() {
        for s in [1.2, 1.5, 1.8] {
            let grid = Grid::new(0.01, 64.0).unwrap();
            let q = QuadratureScheme::new(&grid, s).unwrap();
            let p = EllipticityParams::new(s, 1.0, 1.0).unwrap();
            let k = KernelSpec::new(Kernel::constant(1.0), 0.0, p).unwrap();
            let v1 = evaluate_linear(&cos_field(grid, 1.0), &k, 0.0, 0.0, &q).unwrap();
            for xi in [2.0f64, 4.0] {
                let v = evaluate_linear(&cos_field(grid, xi), &k, 0.0, 0.0, &q).unwrap();
                let ratio = v / v1;
                let target = xi.powf(s);
                assert!((ratio / target - 1.0).abs() < 0.02, "σ={s} ξ={xi}: {ratio} vs {target}");
            }
        }
    }

    #[test]
    fn extremal_symmetry_and_constants() {
        let grid = Grid::new(0.05, 2.0).unwrap();
        let q = QuadratureScheme::new(&grid, 1.5).unwrap();
        let g = Exterior::separable(
            TimeProfile::One,
            SpaceProfile::Bump {
                center: 0.3,
                radius: 1.5,
            },
        );
        let ng = Exterior::Separable {
            time: TimeProfile::One,
            space: SpaceProfile::Bump {
                center: 0.3,
                radius: 1.5,
            },
            amplitude: -1.0,
        };
        let u = field_of(grid, g, |x| SpaceProfile::Bump { center: 0.3, radius: 1.5 }.eval(x) + 0.1 * x.sin());
        let nu = field_of(grid, ng, |x| -(SpaceProfile::Bump { center: 0.3, radius: 1.5 }.eval(x) + 0.1 * x.sin()));
        for x in [-0.5, 0.0, 0.7] {
            let a = evaluate_extremal(&u, Sign::Plus, &params(), x, 0.0, &q).unwrap();
            let b = evaluate_extremal(&nu, Sign::Minus, &params(), x, 0.0, &q).unwrap();
            assert_eq!(a, -b);
        }
        let c = field_of(grid, Exterior::Constant { value: 1.0 }, |_| 1.0);
        assert_eq!(evaluate_extremal(&c, Sign::Plus, &params(), 0.0, 0.0, &q).unwrap(), 0.0);
        assert_eq!(evaluate_extremal(&c, Sign::Minus, &params(), 0.0, 0.0, &q).unwrap(), 0.0);
    }

    #[test]
    fn singleton_and_min_families() {
        let grid = Grid::new(0.02, 4.0).unwrap();
        let q = QuadratureScheme::new(&grid, 1.5).unwrap();
        let f = cos_field(grid, 1.0);
        let k1 = KernelSpec::new(Kernel::constant(1.0), 0.0, params()).unwrap();
        let k2 = KernelSpec::new(Kernel::constant(2.0), 0.0, params()).unwrap();
        let single = OperatorSpec::InfSup {
            rows: vec![vec![k1.clone()]],
            modulation: None,
        };
        let a = evaluate_operator(&f, &single, 0.0, 0.0, &q).unwrap();
        let b = evaluate_linear(&f, &k1, 0.0, 0.0, &q).unwrap();
        assert_eq!(a, b);
        let min = OperatorSpec::InfSup {
            rows: vec![vec![k1.clone()], vec![k2.clone()]],
            modulation: None,
        };
        let m = evaluate_operator(&f, &min, 0.0, 0.0, &q).unwrap();
        let b2 = evaluate_linear(&f, &k2, 0.0, 0.0, &q).unwrap();
        assert_eq!(m, b.min(b2));
        let zero = field_of(grid, Exterior::Zero, |_| 0.0);
        assert_eq!(evaluate_operator(&zero, &min, 0.3, 0.0, &q).unwrap(), 0.0);
    }

    #[test]
    fn truncated_fraclap_examples() {
        let grid = Grid::new(0.01, 8.0).unwrap();
        let q = QuadratureScheme::new(&grid, 1.5).unwrap();
        let c = field_of(grid, Exterior::Constant { value: 2.0 }, |_| 2.0);
        assert!(truncated_fraclap(&c, 0.0, 0.0, 0.1, &q).unwrap().abs() < 1e-10);
        let lin = field_of(
            grid,
            Exterior::separable(TimeProfile::One, SpaceProfile::Linear { slope: 1.0 }),
            |x| x,
        );
        for hc in [0.0, 0.05, 0.3] {
            assert!(truncated_fraclap(&lin, 0.2, 0.0, hc, &q).unwrap().abs() < 1e-10);
        }
        let f = cos_field(grid, 1.0);
        let v0 = truncated_fraclap(&f, 0.0, 0.0, 0.0, &q).unwrap();
        let hs = [0.2, 0.1, 0.05];
        let xs: Vec<f64> = hs.iter().map(|h: &f64| h.ln()).collect();
        let ys: Vec<f64> = hs
            .iter()
            .map(|&h| (truncated_fraclap(&f, 0.0, 0.0, h, &q).unwrap() - v0).abs().ln())
            .collect();
        let fit = crate::quad::fit_line(&xs, &ys).unwrap();
        assert!(fit.slope >= 1.8 - 1.5 && fit.slope <= 2.2 - 1.5, "{}", fit.slope);
    }

    #[test]
    fn regularized_reduces_to_linear() {
        let grid = Grid::new(0.02, 4.0).unwrap();
        let q = QuadratureScheme::new(&grid, 1.5).unwrap();
        let f = cos_field(grid, 2.0);
        let k = KernelSpec::new(Kernel::TwoSided { pos: 2.0, neg: 1.0 }, 1.5, params()).unwrap();
        for x in [-0.5, 0.0, 0.3] {
            let a = evaluate_regularized(&f, &k, 0.0, x, 0.0, &q).unwrap();
            let b = evaluate_linear(&f, &k, x, 0.0, &q).unwrap();
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
        let flat = KernelSpec::new(Kernel::constant(1.0), 0.0, params()).unwrap();
        for eps in [0.05, 0.2] {
            let a = evaluate_regularized(&f, &flat, eps, 0.0, 0.0, &q).unwrap();
            let b = evaluate_linear(&f, &flat, 0.0, 0.0, &q).unwrap();
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
        let osc = KernelSpec::new(
            Kernel::Oscillating {
                lo: 1.0,
                hi: 2.0,
                phase: 0.0,
            },
            0.0,
            params(),
        )
        .unwrap();
        let gap = |eps: f64| {
            [-0.4, 0.0, 0.4]
                .iter()
                .map(|&x| {
                    (evaluate_regularized(&f, &osc, eps, x, 0.0, &q).unwrap()
                        - evaluate_linear(&f, &osc, x, 0.0, &q).unwrap())
                    .abs()
                })
                .fold(0.0, f64::max)
        };
        assert!(gap(0.05) < gap(0.1) && gap(0.1) < gap(0.2));
    }

    #[test]
    fn mollifier_weights() {
        let st = mollifier_stencil();
        let total: f64 = st.iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!(st.iter().all(|p| p.0.abs() < 1.0 && p.1 > 0.0));
    }

    #[test]
    fn unmodulated_mollification_is_identity() {
        let grid = Grid::new(0.02, 4.0).unwrap();
        let q = QuadratureScheme::new(&grid, 1.5).unwrap();
        let f = cos_field(grid, 1.0);
        let k1 = KernelSpec::new(Kernel::constant(1.0), 0.0, params()).unwrap();
        let k2 = KernelSpec::new(Kernel::constant(2.0), 0.0, params()).unwrap();
        let op = OperatorSpec::InfSup {
            rows: vec![vec![k1], vec![k2]],
            modulation: None,
        };
        let a = evaluate_mollified(&f, &op, 0.1, 0.2, 0.0, &q).unwrap();
        let b = eval_spec(&f, &Operator::regularized(&op, &q, 0.1).unwrap(), &q, 0.2, 0.0, None).unwrap();
        assert_eq!(a, b);
        let zero = field_of(grid, Exterior::Zero, |_| 0.0);
        assert_eq!(evaluate_mollified(&zero, &op, 0.1, 0.2, 0.0, &q).unwrap(), 0.0);
    }
}
