//! Scenario execution: solve, measure, write artifacts, judge thresholds.

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use fraclab_core::metrics::{
    fit_series_exponent, holder_seminorm, l1_sigma_norm, oscillation_decay_audit, tail_seminorm,
    PairSet, ParabolicCylinder, RegularityReport, SampledField,
};
use fraclab_core::ops::{evaluate_operator, fraclap_kernel};
use fraclab_core::scheme::LinearStencil;
use fraclab_core::{
    solve, Checkpoint, ExteriorData, LabError, ProblemSpec, QuadratureScheme, Result, Solution, SpaceTimeField,
};
use serde::{Deserialize, Serialize};

use crate::config::{MetricRequest, Quantity, ScenarioConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_ACCEPTANCE: i32 = 4;

pub fn exit_code(e: &LabError) -> i32 {
    match e {
        LabError::Config(_) => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub metric: String,
    pub value: f64,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub dt: f64,
    pub n_steps: usize,
    pub max_residual_ratio: f64,
    pub residual_ok: bool,
    pub monotone_margin: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub pass: bool,
    pub exit_code: i32,
    pub verdicts: Vec<Verdict>,
    pub solve: SolveSummary,
    pub runtime_secs: f64,
    pub budget_secs: f64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub solution: Solution,
    pub report: RegularityReport,
    pub summary: Summary,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.summary.exit_code
    }
}

pub fn build_problem(cfg: &ScenarioConfig) -> Result<ProblemSpec> {
    Ok(ProblemSpec {
        op: cfg.operator_spec()?,
        rhs: cfg.rhs.clone(),
        exterior: Arc::new(cfg.exterior.clone()),
        t_start: cfg.window.t_start,
        t_end: cfg.window.t_end,
    })
}

fn cylinder(cfg: &ScenarioConfig, c: [f64; 3]) -> Result<ParabolicCylinder> {
    ParabolicCylinder::new(c[0], c[1], c[2], cfg.params.sigma)
}

/// `u(x,·)` over the stored times of `q`.
fn series(field: &SpaceTimeField, x: f64, q: &ParabolicCylinder) -> Result<Vec<f64>> {
    let (lo, hi) = q.time_levels(field)?;
    Ok((lo..=hi).map(|n| field.value(x, n)).collect())
}

fn forward_difference(s: &[f64], dt: f64) -> Vec<f64> {
    s.windows(2).map(|w| (w[1] - w[0]) / dt).collect()
}

/// `u_t(x,·)` over the time levels of `q`. An explicit step advances with
/// the rate at its start, so each difference is placed at the earlier level
/// and the last level gets the equation's right-hand side `I u + f`.
fn ut_series(
    field: &SpaceTimeField,
    problem: &ProblemSpec,
    x: f64,
    q: &ParabolicCylinder,
) -> Result<Vec<f64>> {
    let (lo, hi) = q.time_levels(field)?;
    let u: Vec<f64> = (lo..=hi).map(|n| field.value(x, n)).collect();
    let mut ut = forward_difference(&u, field.dt);
    let scheme = QuadratureScheme::new(&field.grid, q.sigma)?;
    let t = field.t(hi);
    ut.push(evaluate_operator(field, &problem.op, x, t, &scheme)? + problem.rhs.value(x, t));
    Ok(ut)
}

/// `(−Δ)^{σ/2}u` on lattice points of spacing `dx` inside `B_r(x)` and at
/// `n_times` equispaced times ending at `t`, each snapped to the nearest
/// stored level.
pub fn fraclap_samples(
    field: &SpaceTimeField,
    q: &ParabolicCylinder,
    dx: f64,
    n_times: usize,
) -> Result<SampledField> {
    let grid = &field.grid;
    let scheme = QuadratureScheme::new(grid, q.sigma)?;
    let stencil: LinearStencil = scheme.linear_stencil(&scheme.cell_kernel(&fraclap_kernel(0.0)), 0.0);
    let stride = grid.node_index(dx).filter(|s| *s > 0).ok_or_else(|| {
        LabError::InvalidParameter(format!("dx = {dx} is not a multiple of h = {}", grid.h))
    })?;
    let ks: Vec<i64> = (-(grid.n1 - 1)..grid.n1)
        .filter(|k| k.rem_euclid(stride) == 0 && (grid.x(*k) - q.x).abs() <= q.r + 1e-12)
        .collect();
    if ks.is_empty() {
        return Err(LabError::Empty("no sample node inside the cylinder".into()));
    }
    q.time_levels(field)?;
    let step = q.length() / n_times as f64;
    let t0 = q.t - (n_times - 1) as f64 * step;
    let values = (0..n_times)
        .map(|j| {
            let t = t0 + j as f64 * step;
            let n = (((t - field.t0) / field.dt).round() as usize).min(field.n_times() - 1);
            let s = field.slice(n);
            let ext = field.exterior.as_ref();
            ks.iter()
                .map(|&k| {
                    let x = grid.x(k);
                    2.0 * stencil.apply(&scheme, &s, k, stencil.exterior_part(ext, x, field.t(n)))
                })
                .collect()
        })
        .collect();
    SampledField::new(ks.iter().map(|&k| grid.x(k)).collect(), t0, step, values)
}

/// `sup_{τ ≥ m·Δt} sup_t |δ_τw(t)|/τ^e` over the ladder `τ = 2^i·Δt`.
fn quotient_sup(w: &[f64], dt: f64, min_step: usize, e: f64) -> f64 {
    let mut sup = 0.0f64;
    let mut m = 1;
    while m < w.len() {
        if m >= min_step {
            let tau = m as f64 * dt;
            for n in m..w.len() {
                sup = sup.max((w[n] - w[n - m]).abs() / tau.powf(e));
            }
        }
        m *= 2;
    }
    sup
}

pub fn measure(
    cfg: &ScenarioConfig,
    solution: &Solution,
    report: &mut RegularityReport,
) -> Result<()> {
    let field = &solution.field;
    let sigma = cfg.params.sigma;
    let problem = build_problem(cfg)?;
    for m in &cfg.metrics {
        let label = m.label();
        let tagged = |e: LabError| match e {
            LabError::Config(s) => LabError::Config(s),
            other => LabError::InvalidParameter(format!("metric '{label}': {other}")),
        };
        let mut run = || -> Result<()> {
            match m {
                MetricRequest::Holder {
                    of,
                    alpha,
                    cyl,
                    dx,
                    n_times,
                    ..
                } => {
                    let q = cylinder(cfg, *cyl)?;
                    let sf = match of {
                        Quantity::U => SampledField::from_cylinder(field, &q)?,
                        Quantity::Ut => SampledField::from_cylinder(field, &q)?.time_derivative()?,
                        Quantity::Fraclap => fraclap_samples(field, &q, *dx, *n_times)?,
                    };
                    let pairs = PairSet::build(&sf, sigma, cfg.seed);
                    report.push(label, *alpha, q.r, holder_seminorm(&sf, &pairs, *alpha, sigma), 0.0);
                }
                MetricRequest::TimeExponent {
                    of,
                    x,
                    cyl,
                    parabolic,
                    ..
                } => {
                    let q = cylinder(cfg, *cyl)?;
                    let fit = match of {
                        Quantity::U => fit_series_exponent(&series(field, *x, &q)?, field.dt, q.length())?,
                        Quantity::Ut => fit_series_exponent(
                            &ut_series(field, &problem, *x, &q)?,
                            field.dt,
                            q.length(),
                        )?,
                        Quantity::Fraclap => {
                            return Err(LabError::Config(
                                "time exponents are measured for u and u_t only".into(),
                            ))
                        }
                    };
                    let factor = if *parabolic { sigma } else { 1.0 };
                    report.push(label, 0.0, q.r, factor * fit.exponent, factor * fit.residual);
                }
                MetricRequest::QuotientGrowth {
                    x,
                    cyl,
                    exponent,
                    refine,
                    ..
                } => {
                    let q = cylinder(cfg, *cyl)?;
                    let ut = ut_series(field, &problem, *x, &q)?;
                    let coarse = quotient_sup(&ut, field.dt, *refine, *exponent);
                    let fine = quotient_sup(&ut, field.dt, 1, *exponent);
                    let ratio = if coarse > 0.0 { fine / coarse } else { 1.0 };
                    report.push(&format!("{label}-coarse"), *exponent, *refine as f64 * field.dt, coarse, 0.0);
                    report.push(&format!("{label}-fine"), *exponent, field.dt, fine, 0.0);
                    report.push(label, *exponent, *refine as f64, ratio, 0.0);
                }
                MetricRequest::L1Sigma { .. } => {
                    let n = field.n_times() - 1;
                    report.push(label, sigma, 1.0, l1_sigma_norm(field, n, sigma)?, 0.0);
                }
                MetricRequest::Tail { r, gamma, .. } => {
                    let v = tail_seminorm(
                        &cfg.exterior,
                        *r,
                        *gamma,
                        (cfg.window.t_start, cfg.window.t_end),
                        sigma,
                        field.dt,
                    )?;
                    report.push(label, *gamma, *r, v, 0.0);
                }
                MetricRequest::Audit {
                    beta,
                    eps_h,
                    mu,
                    base,
                    ..
                } => {
                    let table =
                        oscillation_decay_audit(field, sigma, *beta, *eps_h, *mu, (base[0], base[1]))?;
                    for row in &table.rows {
                        report.push(&format!("{label}-a"), *eps_h, row.r, row.a, 0.0);
                        report.push(&format!("{label}-n"), *eps_h, row.r, row.n, 0.0);
                    }
                    report.push(label, *beta, *mu, table.alpha_hat, table.residual);
                    report.decay.push(table);
                }
                MetricRequest::Residual { .. } => {
                    let r = &solution.report;
                    report.push(label, 0.0, r.dt, r.max_residual_ratio, r.max_residual);
                }
            }
            Ok(())
        };
        run().map_err(tagged)?;
    }
    report.validate()
}

/// Solves, measures and writes `checkpoint.bin`, `metrics.csv` and
/// `summary.json` under `cfg.output`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let problem = build_problem(cfg)?;
    let solution = solve(&problem, &cfg.solver)?;
    let mut report = RegularityReport::default();
    measure(cfg, &solution, &mut report)?;
    let runtime_secs = start.elapsed().as_secs_f64();

    let verdicts: Vec<Verdict> = cfg
        .thresholds
        .iter()
        .map(|t| {
            let value = report.get(&t.metric).map_or(f64::NAN, |r| r.value);
            Verdict {
                metric: t.metric.clone(),
                value,
                min: t.min,
                max: t.max,
                pass: t.accepts(value),
            }
        })
        .collect();
    let pass = verdicts.iter().all(|v| v.pass) && runtime_secs <= cfg.budget_secs;
    let r = &solution.report;
    let summary = Summary {
        scenario: cfg.scenario.clone(),
        pass,
        exit_code: if pass { EXIT_OK } else { EXIT_ACCEPTANCE },
        verdicts,
        solve: SolveSummary {
            dt: r.dt,
            n_steps: r.n_steps,
            max_residual_ratio: r.max_residual_ratio,
            residual_ok: r.residual_ok,
            monotone_margin: r.monotone_margin,
            iterations: r.iterations,
        },
        runtime_secs,
        budget_secs: cfg.budget_secs,
    };
    write_artifacts(cfg, &solution, &report, &summary)?;
    Ok(RunOutcome {
        solution,
        report,
        summary,
    })
}

fn write_artifacts(
    cfg: &ScenarioConfig,
    solution: &Solution,
    report: &RegularityReport,
    summary: &Summary,
) -> Result<()> {
    let dir: &Path = &cfg.output;
    fs::create_dir_all(dir)?;
    Checkpoint::from_field(&solution.field, cfg.params.sigma, Some(&cfg.exterior))?
        .save(&dir.join("checkpoint.bin"))?;
    report.write_csv(&cfg.scenario, fs::File::create(dir.join("metrics.csv"))?)?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(summary)?)?;
    Ok(())
}
