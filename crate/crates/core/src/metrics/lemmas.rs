//! Discrete checks of the one-dimensional interpolation lemmas.
//!
//! All inputs are uniform samples `u_i = u(−1 + i/N)`, `i = 0..=N`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

const TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub hypothesis: bool,
    pub conclusion: bool,
    /// `hypothesis ⇒ conclusion`
    pub holds: bool,
    pub sup_d2: f64,
    pub sup_abs: f64,
    pub diagnostics: Vec<String>,
}

/// `sup_{τ,t} |δ²_τu(t)|` over every grid step with `t − 2τ ≥ −1`.
fn sup_second_difference(u: &[f64]) -> f64 {
    let n = u.len() - 1;
    let mut sup = 0.0f64;
    for m in 1..=n / 2 {
        for i in 2 * m..=n {
            sup = sup.max((u[i] - 2.0 * u[i - m] + u[i - 2 * m]).abs());
        }
    }
    sup
}

/// Vanishing endpoints and `sup_τ ‖δ²_τu‖_∞ ≤ 1` imply `‖u‖_∞ ≤ 1`.
pub fn verify_max_principle_lemma(u: &[f64]) -> LemmaCheck {
    let mut diagnostics = Vec::new();
    if u.len() < 2 {
        diagnostics.push("fewer than two samples".into());
    }
    let ends = u.len() >= 2 && u[0].abs() <= TOL && u[u.len() - 1].abs() <= TOL;
    if !ends && u.len() >= 2 {
        diagnostics.push(format!(
            "endpoint values {:.3e}, {:.3e} are not zero",
            u[0],
            u[u.len() - 1]
        ));
    }
    let sup_d2 = if u.len() >= 3 { sup_second_difference(u) } else { 0.0 };
    if sup_d2 > 1.0 + TOL {
        diagnostics.push(format!("sup |δ²_τu| = {sup_d2:.6} exceeds 1"));
    }
    let hypothesis = ends && sup_d2 <= 1.0 + TOL;
    let sup_abs = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let conclusion = sup_abs <= 1.0 + TOL;
    if hypothesis && !conclusion {
        diagnostics.push(format!("counterexample: ‖u‖_∞ = {sup_abs:.6}"));
    }
    LemmaCheck {
        hypothesis,
        conclusion,
        holds: !hypothesis || conclusion,
        sup_d2,
        sup_abs,
        diagnostics,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpRegime {
    /// `α + β < 1`: increments at `t = 0` are controlled by the oscillation
    /// and the Hölder seminorm of the difference quotients.
    SmallTau,
    /// `α + β > 1`: the second-difference bound makes `u_t` Hölder.
    Derivative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpReport {
    pub regime: InterpRegime,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`
    pub c_hat: f64,
}

/// Grid steps of the ladder `τ = 2^{−j}`, `j ≥ 1`.
fn ladder(n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut tau = 0.5;
    loop {
        let m = (tau * n as f64).round() as usize;
        if m == 0 {
            break;
        }
        if out.last() != Some(&m) {
            out.push(m);
        }
        tau /= 2.0;
    }
    out
}

/// `sup |w_a − w_b| / |t_a − t_b|^α` over all sample pairs.
fn time_seminorm(w: &[f64], spacing: f64, alpha: f64) -> f64 {
    let mut sup = 0.0f64;
    for a in 0..w.len() {
        for b in a + 1..w.len() {
            let d = (b - a) as f64 * spacing;
            sup = sup.max((w[a] - w[b]).abs() / d.powf(alpha));
        }
    }
    sup
}

/// Second-order finite-difference derivative.
fn derivative(u: &[f64], spacing: f64) -> Vec<f64> {
    let n = u.len() - 1;
    (0..=n)
        .map(|i| {
            if i == 0 {
                (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * spacing)
            } else if i == n {
                (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * spacing)
            } else {
                (u[i + 1] - u[i - 1]) / (2.0 * spacing)
            }
        })
        .collect()
}

/// Evaluates both sides of the interpolation inequality for the regime of
/// `α + β` and reports their ratio as the empirical constant.
pub fn verify_interpolation_bounds(u: &[f64], alpha: f64, beta: f64) -> Result<InterpReport> {
    if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
        return Err(LabError::InvalidParameter(format!(
            "α, β must lie in (0,1), got {alpha}, {beta}"
        )));
    }
    if u.len() < 5 {
        return Err(LabError::Empty("need at least five samples".into()));
    }
    let s = alpha + beta;
    if (s - 1.0).abs() <= 1e-12 {
        return Err(LabError::Regime("α + β = 1 belongs to neither regime".into()));
    }
    let n = u.len() - 1;
    let spacing = 1.0 / n as f64;
    let (lo, hi) = u
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let osc = hi - lo;
    let steps = ladder(n);

    let (regime, lhs, rhs) = if s < 1.0 {
        let mut lhs = 0.0f64;
        let mut semi = 0.0f64;
        for &m in &steps {
            let tau = m as f64 * spacing;
            lhs = lhs.max((u[n] - u[n - m]).abs() / tau.powf(s));
            let w: Vec<f64> = (m..=n).map(|i| (u[i] - u[i - m]) / tau.powf(beta)).collect();
            semi = semi.max(time_seminorm(&w, spacing, alpha));
        }
        (InterpRegime::SmallTau, lhs, osc + semi)
    } else {
        let mut d2 = 0.0f64;
        for &m in &steps {
            let tau = m as f64 * spacing;
            for i in 2 * m..=n {
                d2 = d2.max((u[i] - 2.0 * u[i - m] + u[i - 2 * m]).abs() / tau.powf(s));
            }
        }
        let ut = derivative(u, spacing);
        (InterpRegime::Derivative, time_seminorm(&ut, spacing, s - 1.0), osc + d2)
    };
    let c_hat = if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(InterpReport {
        regime,
        lhs,
        rhs,
        c_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..=n).map(|i| f(-1.0 + i as f64 / n as f64)).collect()
    }

    #[test]
    fn max_principle_examples() {
        let zero = verify_max_principle_lemma(&sample(64, |_| 0.0));
        assert!(zero.hypothesis && zero.conclusion && zero.holds);

        let q = verify_max_principle_lemma(&sample(64, |t| t * (t + 1.0) / 2.0));
        assert!(q.hypothesis && q.holds);
        assert!((q.sup_d2 - 0.25).abs() < 1e-12);
        assert!((q.sup_abs - 0.125).abs() < 1e-12);

        let big = verify_max_principle_lemma(&sample(64, |t| 5.0 * t * (t + 1.0)));
        assert!(!big.hypothesis && big.holds);
        assert!(big.diagnostics.iter().any(|d| d.contains("exceeds 1")));
    }

    #[test]
    fn interpolation_examples() {
        let (a, b) = (0.3, 0.4);
        let r = verify_interpolation_bounds(&sample(256, |t| t.abs().powf(a + b)), a, b).unwrap();
        assert_eq!(r.regime, InterpRegime::SmallTau);
        assert!((r.lhs - 1.0).abs() < 1e-12);
        assert!(r.c_hat.is_finite() && r.c_hat > 0.0);

        let lin = verify_interpolation_bounds(&sample(128, |t| 2.0 * t + 1.0), 0.6, 0.6).unwrap();
        assert_eq!(lin.regime, InterpRegime::Derivative);
        assert!(lin.lhs < 1e-9);

        // u_t = 2|t| on [−1,0]; [2|t|]_{C^{0,0.2}} = sup 2|Δt|^{0.8} = 2
        let tt = verify_interpolation_bounds(&sample(256, |t| t * t.abs()), 0.6, 0.6).unwrap();
        assert!((tt.lhs - 2.0).abs() < 1e-9, "{}", tt.lhs);
    }

    #[test]
    fn boundary_regime_is_rejected() {
        assert!(matches!(
            verify_interpolation_bounds(&sample(32, |t| t), 0.5, 0.5),
            Err(LabError::Regime(_))
        ));
    }
}
