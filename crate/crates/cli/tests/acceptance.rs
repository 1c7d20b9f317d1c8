//! Acceptance criteria 1 to 12. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails. Pass criterion numbers as
//! arguments to run a subset.

use std::fs;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use fraclab_cli::config::ScenarioConfig;
use fraclab_cli::run::{run_scenario, RunOutcome};
use fraclab_core::metrics::lemmas::{verify_interpolation_bounds, verify_max_principle_lemma};
use fraclab_core::ops::{evaluate_linear, evaluate_mollified, evaluate_operator, Modulation};
use fraclab_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Result<Outcome> + 'a>);

fn params() -> EllipticityParams {
    EllipticityParams::new(1.5, 1.0, 2.0).unwrap()
}

fn analytic(grid: Grid, ext: Arc<dyn ExteriorData>) -> Result<SpaceTimeField> {
    let g = ext.clone();
    SpaceTimeField::from_fn(grid, 0.0, 1.0, 1, ext, move |x, t| g.value(x, t))
}

fn bump(center: f64, radius: f64) -> Exterior {
    Exterior::separable(TimeProfile::One, SpaceProfile::Bump { center, radius })
}

fn scenario(name: &str, h: f64, dir: &tempfile::TempDir) -> Result<RunOutcome> {
    let mut cfg = ScenarioConfig::builtin(name)?;
    cfg.solver.h = h;
    cfg.output = dir.path().join(format!("{name}-{h}"));
    run_scenario(&cfg)
}

fn metric(out: &RunOutcome, label: &str) -> f64 {
    out.report.get(label).map_or(f64::NAN, |r| r.value)
}

fn multiplier_ratio() -> Result<Outcome> {
    let xi = 2.0;
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for sigma in [1.2, 1.5, 1.8] {
        let p = EllipticityParams::new(sigma, 1.0, 1.0)?;
        let spec = KernelSpec::new(Kernel::constant(1.0), 0.0, p)?;
        let grid = Grid::new(0.01, 4.0)?;
        let q = QuadratureScheme::new(&grid, sigma)?;
        let value = |freq: f64| -> Result<f64> {
            let ext = Exterior::separable(TimeProfile::One, SpaceProfile::Cos { freq });
            evaluate_linear(&analytic(grid, Arc::new(ext))?, &spec, 0.0, 0.0, &q)
        };
        let ratio = value(2.0 * xi)? / value(xi)?;
        let err = (ratio / 2f64.powf(sigma) - 1.0).abs();
        worst = worst.max(err);
        detail.push(format!("σ={sigma}: {ratio:.4} vs {:.4}", 2f64.powf(sigma)));
    }
    Ok((worst <= 0.02, format!("{}; worst rel err {worst:.2e}", detail.join(", "))))
}

fn scaling_identity() -> Result<Outcome> {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // The dilated grid reaches 2/κ so both lattices cover the same region
    // and the bump data never leaves them.
    let gu = Grid::new(0.005, 2.0)?;
    let qu = QuadratureScheme::new(&gu, p.sigma)?;
    let mut schemes = Vec::new();
    for kappa in [0.5, 0.25] {
        let g = Grid::new(0.005 / kappa, 2.0 / kappa)?;
        schemes.push((kappa, g, QuadratureScheme::new(&g, p.sigma)?));
    }
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let spec = sample::kernel_spec(&mut rng, &p);
        let (kappa, gv, qv) = &schemes[rng.gen_range(0..2)];
        let base: Arc<dyn ExteriorData> =
            Arc::new(bump(rng.gen_range(-0.3..0.3), rng.gen_range(0.3..0.7)));
        let u = analytic(gu, base.clone())?;
        let v = analytic(*gv, Arc::new(Dilated { base, kappa: *kappa }))?;
        let k = rng.gen_range(-(gv.n1 - 1)..gv.n1);
        let x = gv.x(k);
        let lv = evaluate_linear(&v, &rescale(&spec, *kappa)?, x, 0.0, qv)?;
        let lu = evaluate_linear(&u, &spec, kappa * x, 0.0, &qu)?;
        worst = worst.max((lv - kappa.powf(p.sigma) * lu).abs() / (1.0 + lu.abs()));
    }
    Ok((worst <= 1e-4, format!("worst normalized error {worst:.2e} over 100 draws")))
}

fn ellipticity_sandwich() -> Result<Outcome> {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = Grid::new(0.02, 2.0)?;
    let q = QuadratureScheme::new(&grid, p.sigma)?;
    let plus = OperatorSpec::ExtremalPlus { params: p };
    let minus = OperatorSpec::ExtremalMinus { params: p };
    let ops: Vec<OperatorSpec> = (0..10).map(|_| sample::infsup(&mut rng, &p)).collect();
    let mut worst = f64::NEG_INFINITY;
    let mut nodes = 0usize;
    for _ in 0..100 {
        let (cu, cv) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (ru, rv) = (rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0));
        let (au, av) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let (fu, fv) = (sample::profile(&mut rng), sample::profile(&mut rng));
        let ext = |c, r, a| Exterior::Separable {
            time: TimeProfile::One,
            space: SpaceProfile::Bump { center: c, radius: r },
            amplitude: a,
        };
        let w_ext = Exterior::Sum {
            terms: vec![ext(cu, ru, au), ext(cv, rv, -av)],
        };
        let u = SpaceTimeField::from_fn(grid, 0.0, 1.0, 1, Arc::new(ext(cu, ru, au)), {
            let fu = fu.clone();
            move |x, _| fu(x)
        })?;
        let v = SpaceTimeField::from_fn(grid, 0.0, 1.0, 1, Arc::new(ext(cv, rv, av)), {
            let fv = fv.clone();
            move |x, _| fv(x)
        })?;
        let w = SpaceTimeField::from_fn(grid, 0.0, 1.0, 1, Arc::new(w_ext), move |x, _| {
            fu(x) - fv(x)
        })?;
        for x in grid.interior_xs() {
            let hi = evaluate_operator(&w, &plus, x, 0.0, &q)?;
            let lo = evaluate_operator(&w, &minus, x, 0.0, &q)?;
            for op in &ops {
                let d = evaluate_operator(&u, op, x, 0.0, &q)? - evaluate_operator(&v, op, x, 0.0, &q)?;
                worst = worst.max(lo - d).max(d - hi);
                nodes += 1;
            }
        }
    }
    Ok((
        worst <= 1e-9,
        format!("largest violation {worst:.2e} over {nodes} node evaluations"),
    ))
}

fn appendix_construction() -> Result<Outcome> {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut drift_err, mut sup_j, mut bands) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..100 {
        let spec = sample::kernel_spec(&mut rng, &p);
        spec.validate()?;
        let c = drift_to_nonlocal(&spec);
        let b = spec.drift;
        drift_err = drift_err.max((c.reconstructed_drift(1e-10) - b).abs() / b.abs().max(1e-300));
        sup_j = sup_j.max(c.sup_j());
        if c.check_bands().is_err() {
            bands += 1;
        }
    }
    Ok((
        drift_err <= 1e-6 && sup_j <= p.lambda / 4.0 && bands == 0,
        format!("drift rel err {drift_err:.2e}, sup|J| {sup_j:.4} (λ/4 = {}), band violations {bands}", p.lambda / 4.0),
    ))
}

fn mollified_convergence() -> Result<Outcome> {
    let p = params();
    let spec = OperatorSpec::InfSup {
        rows: vec![
            vec![KernelSpec::new(Kernel::constant(1.0), 0.0, p)?],
            vec![KernelSpec::new(preset_kernel_oscillating(&p)?, 0.0, p)?],
        ],
        modulation: Some(Modulation { freq: 3.0, phase: 0.4 }),
    };
    let grid = Grid::new(0.01, 4.0)?;
    let q = QuadratureScheme::new(&grid, p.sigma)?;
    let ext = Exterior::Separable {
        time: TimeProfile::Exp { rate: 0.5 },
        space: SpaceProfile::Bump { center: 0.2, radius: 1.5 },
        amplitude: 1.0,
    };
    let g = ext.clone();
    let field = SpaceTimeField::from_fn(grid, -0.35, 0.05, 8, Arc::new(ext), move |x, t| g.value(x, t))?;
    let mut sup = [0.0f64; 3];
    for n in 0..field.n_times() {
        let t = field.t(n);
        for x in grid.interior_xs().into_iter().filter(|x| x.abs() <= 0.5) {
            let exact = evaluate_operator(&field, &spec, x, t, &q)?;
            for (i, eps) in [0.2, 0.1, 0.05].into_iter().enumerate() {
                let m = evaluate_mollified(&field, &spec, eps, x, t, &q)?;
                sup[i] = sup[i].max((m - exact).abs());
            }
        }
    }
    Ok((
        sup[2] < sup[1] && sup[1] < sup[0] && sup[2] < sup[0],
        format!("sup error at ε = 0.2, 0.1, 0.05: {:.3e}, {:.3e}, {:.3e}", sup[0], sup[1], sup[2]),
    ))
}

fn preset_kernel_oscillating(p: &EllipticityParams) -> Result<Kernel> {
    kernel::preset_kernel("oscillating", p, None)
}

fn fixed_point_agreement() -> Result<Outcome> {
    let p = params();
    let op = OperatorSpec::InfSup {
        rows: vec![
            vec![KernelSpec::new(Kernel::constant(1.0), 0.0, p)?],
            vec![KernelSpec::new(preset_kernel_oscillating(&p)?, 0.0, p)?],
        ],
        modulation: None,
    };
    let problem = ProblemSpec {
        op,
        rhs: Exterior::Zero,
        exterior: Arc::new(Exterior::Separable {
            time: TimeProfile::Exp { rate: 1.0 },
            space: SpaceProfile::Bump { center: 0.0, radius: 2.0 },
            amplitude: 1.0,
        }),
        t_start: -0.5,
        t_end: 0.0,
    };
    let coarse = solve(&problem, &SolverConfig::explicit(0.02, 0.5, 4.0))?;
    let fine = solve(&problem, &SolverConfig::explicit(0.01, 0.5, 4.0))?;
    let reg = solve(
        &problem,
        &SolverConfig {
            scheme: SchemeKind::RegularizedFixedpoint {
                eps: 0.05,
                max_iter: 50,
                tol: 1e-10,
            },
            ..SolverConfig::explicit(0.02, 0.5, 4.0)
        },
    )?;
    let last = |f: &SpaceTimeField| f.n_times() - 1;
    let (c, fi, r) = (&coarse.field, &fine.field, &reg.field);
    let (mut gap, mut agree) = (0.0f64, 0.0f64);
    for k in -(c.grid.n1 - 1)..c.grid.n1 {
        let x = c.grid.x(k);
        let kf = fi.grid.node_index(x).expect("coarse nodes are fine nodes");
        gap = gap.max((c.at(k, last(c)) - fi.at(kf, last(fi))).abs());
        agree = agree.max((c.at(k, last(c)) - r.at(k, last(r))).abs());
    }
    Ok((
        agree <= 10.0 * gap,
        format!(
            "regularized vs explicit {agree:.3e}, self-convergence gap {gap:.3e}, {} iterations",
            reg.report.iterations
        ),
    ))
}

fn holder_data(dir: &tempfile::TempDir) -> Result<Outcome> {
    let a = metric(&scenario("holder-data", 0.02, dir)?, "ut-time-exponent");
    let b = metric(&scenario("holder-data", 0.01, dir)?, "ut-time-exponent");
    Ok((
        a >= 0.25 && b >= 0.25 && (a - b).abs() <= 0.05,
        format!("u_t time exponent {a:.4} at h=0.02, {b:.4} at h=0.01"),
    ))
}

fn lipschitz_counterexample(dir: &tempfile::TempDir) -> Result<Outcome> {
    let out = scenario("jump-data", 0.01, dir)?;
    let e = metric(&out, "u-time-exponent");
    let growth = metric(&out, "ut-quotient-growth");
    Ok((
        (0.9..=1.05).contains(&e) && growth >= 2.0,
        format!("u time exponent {e:.4}, quotient growth {growth:.4} under 4x floor refinement"),
    ))
}

fn bounded_data(dir: &tempfile::TempDir) -> Result<Outcome> {
    let a = metric(&scenario("bounded-data", 0.02, dir)?, "u-time-exponent");
    let b = metric(&scenario("bounded-data", 0.01, dir)?, "u-time-exponent");
    Ok((
        a >= 0.9 && b >= 0.9 && (a - b).abs() <= 0.05,
        format!("u time exponent {a:.4} at h=0.02, {b:.4} at h=0.01"),
    ))
}

fn evans_krylov(dir: &tempfile::TempDir) -> Result<Outcome> {
    let a = metric(&scenario("evans-krylov", 0.02, dir)?, "fraclap-holder");
    let b = metric(&scenario("evans-krylov", 0.01, dir)?, "fraclap-holder");
    let change = (b - a).abs() / a.abs();
    Ok((
        change <= 0.25,
        format!("seminorm {a:.4} at h=0.02, {b:.4} at h=0.01, change {:.1}%", 100.0 * change),
    ))
}

fn lemma_suite() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut counterexamples = 0usize;
    for _ in 0..10_000 {
        let n = rng.gen_range(3..96);
        let mut u: Vec<f64> = match rng.gen_range(0..3) {
            0 => (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            1 => {
                let f = sample::profile(&mut rng);
                (0..=n).map(|i| f(i as f64 / n as f64)).collect()
            }
            _ => {
                let mut acc = 0.0;
                (0..=n)
                    .map(|_| {
                        acc += rng.gen_range(-1.0..1.0);
                        acc
                    })
                    .collect()
            }
        };
        // zero ends, then scale so that sup|δ²| is exactly 1
        let (a, b) = (u[0], u[n]);
        for (i, v) in u.iter_mut().enumerate() {
            *v -= a + (b - a) * i as f64 / n as f64;
        }
        let d2 = verify_max_principle_lemma(&u).sup_d2;
        if d2 == 0.0 {
            continue;
        }
        u.iter_mut().for_each(|v| *v /= d2);
        let check = verify_max_principle_lemma(&u);
        if !(check.hypothesis && check.holds) {
            counterexamples += 1;
        }
    }
    let mut worst = 1.0f64;
    for i in 0..20 {
        let (alpha, beta, pw) = if i < 10 {
            (0.3, 0.4, 0.7 + 0.1 * i as f64)
        } else {
            (0.6, 0.6, 1.2 + 0.1 * (i - 10) as f64)
        };
        let field = |n: usize| -> Vec<f64> {
            (0..=n).map(|j| (1.0 - j as f64 / n as f64).powf(pw)).collect()
        };
        let c1 = verify_interpolation_bounds(&field(256), alpha, beta)?.c_hat;
        let c4 = verify_interpolation_bounds(&field(1024), alpha, beta)?.c_hat;
        let r = c4 / c1;
        worst = worst.max(r).max(1.0 / r);
    }
    Ok((
        counterexamples == 0 && worst <= 2.0,
        format!("{counterexamples} counterexamples in 10^4 samples; worst Ĉ ratio {worst:.3} under 4x refinement"),
    ))
}

fn determinism(dir: &tempfile::TempDir) -> Result<Outcome> {
    let mut failures = Vec::new();
    for name in ["holder-data", "evans-krylov"] {
        let mut csvs = Vec::new();
        for (run, threads) in [1usize, 4, 4].into_iter().enumerate() {
            let mut cfg = ScenarioConfig::builtin(name)?;
            cfg.solver.h = 0.02;
            cfg.output = dir.path().join(format!("det-{name}-{run}"));
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| LabError::Config(e.to_string()))?;
            pool.install(|| run_scenario(&cfg))?;
            csvs.push(fs::read(cfg.output.join("metrics.csv"))?);
        }
        if csvs.iter().any(|c| c != &csvs[0]) {
            failures.push(name);
        }
    }
    Ok((
        failures.is_empty(),
        if failures.is_empty() {
            "metrics.csv identical at 1 and 4 threads and on repeat".into()
        } else {
            format!("metrics.csv differs for {}", failures.join(", "))
        },
    ))
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temporary directory");
    let criteria: [Criterion; 12] = [
        ("operator multiplier ratio", Box::new(multiplier_ratio)),
        ("scaling identity", Box::new(scaling_identity)),
        ("ellipticity sandwich", Box::new(ellipticity_sandwich)),
        ("drift conversion and kernel bands", Box::new(appendix_construction)),
        ("mollified operator convergence", Box::new(mollified_convergence)),
        ("fixed-point solver agreement", Box::new(fixed_point_agreement)),
        ("holder-data regularity", Box::new(|| holder_data(&dir))),
        ("lipschitz counterexample", Box::new(|| lipschitz_counterexample(&dir))),
        ("bounded-data branch", Box::new(|| bounded_data(&dir))),
        ("concave operator fraclap seminorm", Box::new(|| evans_krylov(&dir))),
        ("lemma suite", Box::new(lemma_suite)),
        ("determinism", Box::new(|| determinism(&dir))),
    ];
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        // every criterion has a five minute budget
        let pass = pass && secs <= 300.0;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {name}: {} ({detail}; {secs:.1}s)",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
