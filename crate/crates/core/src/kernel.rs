//! Lévy kernels, the ellipticity class, rescaling and the drift-to-nonlocal
//! conversion used by the regularized operators.
//!
//! Everything here is one-dimensional. Kernels are closed under the
//! transforms the lab needs (rescaling, ε-truncation), and every variant has
//! closed-form moments
//!
//! ```text
//! M±(a, b, p) = (2−σ) ∫_a^b K(±y) y^p y^{−1−σ} dy,   0 ≤ a < b ≤ ∞,
//! ```
//!
//! which is what the discretization consumes.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quad;

/// Order and ellipticity bounds `(σ, λ, Λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticityParams {
    pub sigma: f64,
    pub lambda: f64,
    pub lambda_hi: f64,
}

impl EllipticityParams {
    pub fn new(sigma: f64, lambda: f64, lambda_hi: f64) -> Result<Self> {
        let p = Self {
            sigma,
            lambda,
            lambda_hi,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 1.0 && self.sigma < 2.0) {
            return Err(LabError::InvalidParameter(format!(
                "sigma must lie in (1,2), got {}",
                self.sigma
            )));
        }
        if !(self.lambda > 0.0 && self.lambda <= self.lambda_hi && self.lambda_hi.is_finite()) {
            return Err(LabError::InvalidParameter(format!(
                "need 0 < lambda <= lambda_hi < inf, got ({}, {})",
                self.lambda, self.lambda_hi
            )));
        }
        Ok(())
    }

    /// Largest admissible drift, `Λ/(σ−1)`.
    pub fn drift_bound(&self) -> f64 {
        self.lambda_hi / (self.sigma - 1.0)
    }
}

/// A kernel weight `y ↦ K(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", content = "params", rename_all = "kebab-case")]
pub enum Kernel {
    /// `K ≡ value`.
    Constant { value: f64 },
    /// `pos` on `y > 0`, `neg` on `y < 0`.
    TwoSided { pos: f64, neg: f64 },
    /// `lo + (hi − lo)(1 + sin(log|y| + phase))/2`.
    Oscillating {
        lo: f64,
        hi: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Piecewise constant: `values[0]` below `breaks[0]`, `values[k]` on
    /// `[breaks[k-1], breaks[k])`, `values[n]` above the last break.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
    /// `inner` on `|y| ≤ eps`, `outer` elsewhere.
    Truncated {
        eps: f64,
        inner: f64,
        outer: Box<Kernel>,
    },
}

/// `(2−σ) ∫_a^b y^{p−1−σ} dy` with `0 ≤ a < b ≤ ∞`.
fn power_moment(a: f64, b: f64, p: f64, sigma: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let q = p - sigma;
    let c = 2.0 - sigma;
    if q.abs() < 1e-14 {
        return c * (b.ln() - a.ln());
    }
    let hi = if b.is_infinite() {
        debug_assert!(q < 0.0, "moment diverges at infinity");
        0.0
    } else {
        b.powf(q)
    };
    let lo = if a == 0.0 {
        debug_assert!(q > 0.0, "moment diverges at zero");
        0.0
    } else {
        a.powf(q)
    };
    c * (hi - lo) / q
}

/// Antiderivative of `(A + B sin(s + φ)) e^{qs}` at `s`, with the limits
/// `s → ±∞` taken as zero (valid when the moment converges).
fn oscillating_antiderivative(s: f64, a: f64, b: f64, phase: f64, q: f64) -> f64 {
    if s.is_infinite() {
        return 0.0;
    }
    let e = (q * s).exp();
    a * e / q + b * e * (q * (s + phase).sin() - (s + phase).cos()) / (q * q + 1.0)
}

impl Kernel {
    pub fn constant(value: f64) -> Self {
        Kernel::Constant { value }
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Kernel::Constant { value } => *value,
            Kernel::TwoSided { pos, neg } => {
                if y > 0.0 {
                    *pos
                } else {
                    *neg
                }
            }
            Kernel::Oscillating { lo, hi, phase } => {
                lo + (hi - lo) * (1.0 + (y.abs().ln() + phase).sin()) / 2.0
            }
            Kernel::Piecewise { breaks, values } => {
                let k = breaks.partition_point(|&b| b <= y);
                values[k]
            }
            Kernel::Truncated { eps, inner, outer } => {
                if y.abs() <= *eps {
                    *inner
                } else {
                    outer.eval(y)
                }
            }
        }
    }

    /// `(2−σ) ∫_a^b K(side·y) y^p y^{−1−σ} dy` for `0 ≤ a < b ≤ ∞` and
    /// `side = ±1`.
    pub fn side_moment(&self, side: f64, a: f64, b: f64, p: f64, sigma: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self {
            Kernel::Constant { value } => value * power_moment(a, b, p, sigma),
            Kernel::TwoSided { pos, neg } => {
                let v = if side > 0.0 { *pos } else { *neg };
                v * power_moment(a, b, p, sigma)
            }
            Kernel::Oscillating { lo, hi, phase } => {
                let big_a = (lo + hi) / 2.0;
                let big_b = (hi - lo) / 2.0;
                let q = p - sigma;
                let sa = if a == 0.0 { f64::NEG_INFINITY } else { a.ln() };
                let sb = b.ln();
                (2.0 - sigma)
                    * (oscillating_antiderivative(sb, big_a, big_b, *phase, q)
                        - oscillating_antiderivative(sa, big_a, big_b, *phase, q))
            }
            Kernel::Piecewise { breaks, values } => {
                let mut total = quad::CompensatedSum::new();
                for k in 0..values.len() {
                    let lo = if k == 0 { f64::NEG_INFINITY } else { breaks[k - 1] };
                    let hi = if k == breaks.len() { f64::INFINITY } else { breaks[k] };
                    // Map the real segment [lo, hi) onto |y| for this side.
                    let (ylo, yhi) = if side > 0.0 { (lo, hi) } else { (-hi, -lo) };
                    let from = ylo.max(a);
                    let to = yhi.min(b);
                    if to > from {
                        total.add(values[k] * power_moment(from, to, p, sigma));
                    }
                }
                total.value()
            }
            Kernel::Truncated { eps, inner, outer } => {
                let mut v = 0.0;
                if a < *eps {
                    v += inner * power_moment(a, b.min(*eps), p, sigma);
                }
                if b > *eps {
                    v += outer.side_moment(side, a.max(*eps), b, p, sigma);
                }
                v
            }
        }
    }

    /// The kernel `y ↦ K(κy)`.
    pub fn scaled(&self, kappa: f64) -> Kernel {
        match self {
            Kernel::Constant { .. } | Kernel::TwoSided { .. } => self.clone(),
            Kernel::Oscillating { lo, hi, phase } => Kernel::Oscillating {
                lo: *lo,
                hi: *hi,
                phase: phase + kappa.ln(),
            },
            Kernel::Piecewise { breaks, values } => Kernel::Piecewise {
                breaks: breaks.iter().map(|b| b / kappa).collect(),
                values: values.clone(),
            },
            Kernel::Truncated { eps, inner, outer } => Kernel::Truncated {
                eps: eps / kappa,
                inner: *inner,
                outer: Box::new(outer.scaled(kappa)),
            },
        }
    }

    /// Whether `K(y) = K(−y)` for all `y`.
    pub fn is_symmetric(&self) -> bool {
        match self {
            Kernel::Constant { .. } | Kernel::Oscillating { .. } => true,
            Kernel::TwoSided { pos, neg } => pos == neg,
            Kernel::Piecewise { breaks, values } => {
                let n = breaks.len();
                (0..n).all(|k| breaks[k] == -breaks[n - 1 - k])
                    && (0..values.len()).all(|k| values[k] == values[values.len() - 1 - k])
            }
            Kernel::Truncated { outer, .. } => outer.is_symmetric(),
        }
    }

    fn validate_shape(&self) -> Result<()> {
        match self {
            Kernel::Piecewise { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return Err(LabError::InvalidParameter(
                        "piecewise kernel needs one more value than breaks".into(),
                    ));
                }
                if breaks.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(LabError::InvalidParameter(
                        "piecewise kernel breaks must increase".into(),
                    ));
                }
                Ok(())
            }
            Kernel::Truncated { eps, outer, .. } => {
                if !(*eps >= 0.0) {
                    return Err(LabError::InvalidParameter("truncation radius < 0".into()));
                }
                outer.validate_shape()
            }
            _ => Ok(()),
        }
    }
}

/// The audit mesh on which pointwise kernel bounds are checked: 512
/// logarithmically spaced `|y|` in `[1e-6, 1e3]`, both signs.
pub fn audit_mesh() -> Vec<f64> {
    const N: usize = 512;
    let (lo, hi) = (1e-6f64.ln(), 1e3f64.ln());
    let mut mesh = Vec::with_capacity(2 * N);
    for k in 0..N {
        let y = (lo + (hi - lo) * k as f64 / (N - 1) as f64).exp();
        mesh.push(-y);
        mesh.push(y);
    }
    mesh
}

const BAND_SLACK: f64 = 1e-12;

fn check_band(name: &str, f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<()> {
    for y in audit_mesh() {
        let v = f(y);
        if !(v >= lo - BAND_SLACK && v <= hi + BAND_SLACK) {
            return Err(LabError::KernelBand(format!(
                "{name}({y:.3e}) = {v} not in [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

/// A linear operator `L_{K,b}` of the class: kernel, drift and the bounds it
/// was validated against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kernel: Kernel,
    pub drift: f64,
    pub params: EllipticityParams,
}

impl KernelSpec {
    pub fn new(kernel: Kernel, drift: f64, params: EllipticityParams) -> Result<Self> {
        let k = Self::new_unchecked(kernel, drift, params);
        k.validate()?;
        Ok(k)
    }

    /// Builds a spec without checking class membership.
    pub fn new_unchecked(kernel: Kernel, drift: f64, params: EllipticityParams) -> Self {
        Self {
            kernel,
            drift,
            params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.kernel.validate_shape()?;
        check_band(
            "K",
            |y| self.kernel.eval(y),
            self.params.lambda,
            self.params.lambda_hi,
        )?;
        let bound = self.params.drift_bound();
        if !(self.drift.abs() <= bound * (1.0 + 1e-12)) {
            return Err(LabError::KernelBand(format!(
                "|b| = {} exceeds {}",
                self.drift.abs(),
                bound
            )));
        }
        Ok(())
    }

    /// The operator with constant kernel `λ` and no drift.
    pub fn lambda_kernel(params: EllipticityParams) -> Self {
        Self::new_unchecked(Kernel::constant(params.lambda), 0.0, params)
    }

    pub fn side_moment(&self, side: f64, a: f64, b: f64, p: f64) -> f64 {
        self.kernel.side_moment(side, a, b, p, self.params.sigma)
    }
}

/// Solves `(2−σ) R⁻¹ ∫_{B_R} |y·e|²/|y|^{1+σ} dy = 4Λ/(λ(σ−1))` for `R`
/// in closed form: the left side equals `2R^{1−σ}`.
pub fn solve_r0(params: &EllipticityParams) -> f64 {
    let s = params.sigma;
    (params.lambda * (s - 1.0) / (2.0 * params.lambda_hi)).powf(1.0 / (s - 1.0))
}

/// Solves the same equation by bisection in `log R`, evaluating the left
/// side with the reference quadrature.
pub fn solve_r0_bisect(params: &EllipticityParams, rel_tol: f64) -> f64 {
    let s = params.sigma;
    let target = 4.0 * params.lambda_hi / (params.lambda * (s - 1.0));
    let lhs = |r: f64| {
        let inner = quad::integrate_graded(&|y: f64| y * y * y.powf(-1.0 - s), 0.0, r, 1e-12);
        (2.0 - s) / r * 2.0 * inner
    };
    // lhs is decreasing in r.
    let (mut lo, mut hi) = (-60.0f64, 10.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lhs(mid.exp()) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < rel_tol {
            break;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// A kernel whose drift has been traded for an odd nonlocal part `J`
/// supported in `B_{R₀}`, together with its ε-truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvertedKernel {
    pub spec: KernelSpec,
    pub r0: f64,
    /// `J(y) = j_slope · y` on `|y| < R₀`.
    pub j_slope: f64,
    pub eps: f64,
}

impl ConvertedKernel {
    pub fn j(&self, y: f64) -> f64 {
        if y.abs() < self.r0 {
            self.j_slope * y
        } else {
            0.0
        }
    }

    pub fn k_prime(&self, y: f64) -> f64 {
        self.spec.kernel.eval(y) - self.j(y)
    }

    pub fn k_prime_eps(&self, y: f64) -> f64 {
        if y.abs() <= self.eps {
            self.spec.params.lambda
        } else {
            self.k_prime(y)
        }
    }

    pub fn j_eps(&self, y: f64) -> f64 {
        if y.abs() > self.eps {
            self.j(y)
        } else {
            0.0
        }
    }

    pub fn sup_j(&self) -> f64 {
        self.j_slope.abs() * self.r0
    }

    /// Kernel of the regularized operator: `K′_ε + J_ε`, i.e. `λ` on
    /// `|y| ≤ ε` and `K` outside.
    pub fn effective_kernel(&self) -> Kernel {
        if self.eps == 0.0 {
            self.spec.kernel.clone()
        } else {
            Kernel::Truncated {
                eps: self.eps,
                inner: self.spec.params.lambda,
                outer: Box::new(self.spec.kernel.clone()),
            }
        }
    }

    /// Drift of the regularized operator, `(2−σ) ∫_{|y|>ε} y J(y)/|y|^{1+σ}`,
    /// in closed form.
    pub fn effective_drift(&self) -> f64 {
        if self.eps >= self.r0 {
            return 0.0;
        }
        let s = self.spec.params.sigma;
        2.0 * self.j_slope * (self.r0.powf(2.0 - s) - self.eps.powf(2.0 - s))
    }

    /// The regularized operator as a member of the class.
    pub fn effective_spec(&self) -> KernelSpec {
        KernelSpec::new_unchecked(self.effective_kernel(), self.effective_drift(), self.spec.params)
    }

    /// `(2−σ) ∫ y J_ε(y)/|y|^{1+σ} dy` by reference quadrature of the
    /// pointwise `J_ε`.
    pub fn reconstructed_drift(&self, rel_tol: f64) -> f64 {
        let s = self.spec.params.sigma;
        if self.eps >= self.r0 {
            return 0.0;
        }
        let f = |y: f64| y * self.j_eps(y) * y.powf(-1.0 - s);
        // The integrand is odd in J and odd in y, so both sides agree.
        let half = if self.eps == 0.0 {
            quad::integrate_graded(&f, 0.0, self.r0, rel_tol)
        } else {
            quad::integrate_panel(&f, self.eps, self.r0, rel_tol, 0.0)
        };
        2.0 * (2.0 - s) * half
    }

    /// Checks the bands `sup|J| ≤ λ/4`, `K′ ∈ [3λ/4, Λ+λ/4]` and
    /// `K′_ε − J_ε ∈ [λ/2, Λ+λ/2]` on the audit mesh.
    pub fn check_bands(&self) -> Result<()> {
        let (l, big_l) = (self.spec.params.lambda, self.spec.params.lambda_hi);
        if self.sup_j() > l / 4.0 * (1.0 + 1e-12) {
            return Err(LabError::KernelBand(format!(
                "sup|J| = {} exceeds lambda/4 = {}",
                self.sup_j(),
                l / 4.0
            )));
        }
        check_band("K'", |y| self.k_prime(y), 0.75 * l, big_l + 0.25 * l)?;
        check_band(
            "K'_eps - J_eps",
            |y| self.k_prime_eps(y) - self.j_eps(y),
            0.5 * l,
            big_l + 0.5 * l,
        )
    }
}

/// Converts the local drift of `k` into the odd kernel part
/// `J(y) = y·b·χ_{B_{R₀}} λ(σ−1)/(4ΛR₀)`.
pub fn drift_to_nonlocal(k: &KernelSpec) -> ConvertedKernel {
    let p = &k.params;
    let r0 = solve_r0(p);
    let j_slope = k.drift * p.lambda * (p.sigma - 1.0) / (4.0 * p.lambda_hi * r0);
    ConvertedKernel {
        spec: k.clone(),
        r0,
        j_slope,
        eps: 0.0,
    }
}

/// Applies the ε-truncation `K′_ε = λ` on `|y| ≤ ε`, `J_ε = 0` there.
pub fn truncate_kernel(c: &ConvertedKernel, eps: f64) -> Result<ConvertedKernel> {
    if !(eps >= 0.0) {
        return Err(LabError::InvalidParameter(format!(
            "truncation radius must be >= 0, got {eps}"
        )));
    }
    Ok(ConvertedKernel {
        eps,
        ..c.clone()
    })
}

/// Rescales `(K, b)` so that `L̃ũ(x) = κ^σ (Lu)(κx)` for `ũ(x) = u(κx)`.
pub fn rescale(k: &KernelSpec, kappa: f64) -> Result<KernelSpec> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(LabError::InvalidParameter(format!(
            "kappa must lie in (0,1], got {kappa}"
        )));
    }
    if kappa == 1.0 {
        return Ok(k.clone());
    }
    let s = k.params.sigma;
    let annulus = k.side_moment(1.0, kappa, 1.0, 1.0) - k.side_moment(-1.0, kappa, 1.0, 1.0);
    let drift = kappa.powf(s - 1.0) * (k.drift - annulus);
    KernelSpec::new(k.kernel.scaled(kappa), drift, k.params)
}

/// Named kernel presets: `constant`, `two-sided`, `oscillating`.
pub fn preset_kernel(name: &str, params: &EllipticityParams, value: Option<f64>) -> Result<Kernel> {
    match name {
        "constant" => Ok(Kernel::constant(value.unwrap_or(params.lambda))),
        "two-sided" => Ok(Kernel::TwoSided {
            pos: params.lambda_hi,
            neg: params.lambda,
        }),
        "oscillating" => Ok(Kernel::Oscillating {
            lo: params.lambda,
            hi: params.lambda_hi,
            phase: 0.0,
        }),
        other => Err(LabError::Config(format!("unknown kernel preset '{other}'"))),
    }
}
