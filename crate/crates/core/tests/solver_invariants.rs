use std::sync::Arc;

use fraclab_core::ops::{evaluate_extremal, Modulation};
use fraclab_core::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn params() -> EllipticityParams {
    EllipticityParams::new(1.5, 1.0, 2.0).unwrap()
}

fn heat() -> OperatorSpec {
    OperatorSpec::Linear {
        kernel: KernelSpec::new(Kernel::constant(1.0), 0.0, params()).unwrap(),
    }
}

fn problem(op: OperatorSpec, rhs: Exterior, g: Exterior, t_start: f64) -> ProblemSpec {
    ProblemSpec {
        op,
        rhs,
        exterior: Arc::new(g),
        t_start,
        t_end: 0.0,
    }
}

fn sup_final_gap(a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
    let (na, nb) = (a.n_times() - 1, b.n_times() - 1);
    (-(a.grid.n1 - 1)..a.grid.n1)
        .map(|k| {
            let kb = b.grid.node_index(a.grid.x(k)).unwrap();
            (a.at(k, na) - b.at(kb, nb)).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn constants_survive_ten_thousand_steps() {
    let config = SolverConfig::explicit(0.05, 0.5, 2.0);
    let run = |t_start: f64| {
        solve(&problem(heat(), Exterior::Zero, Exterior::Constant { value: 0.7 }, t_start), &config).unwrap()
    };
    let mut t_start = -1.0;
    let mut sol = run(t_start);
    while sol.report.n_steps < 10_000 {
        t_start *= 2.0;
        sol = run(t_start);
    }
    for v in sol.field.slices.last().unwrap() {
        assert!((v - 0.7).abs() <= 1e-12, "{v}");
    }
}

/// `2(2−σ)Γ(−σ)(−cos(πσ/2))` at σ = 1.5: `L cos(ξ·) = −C|ξ|^σ cos(ξ·)` for K ≡ 1.
const MULTIPLIER_1_5: f64 = 1.6710855164206666;

#[test]
fn smooth_heat_runs_self_converge_at_first_order() {
    // A global solution, so no boundary layer forms at ±1.
    let xi: f64 = 2.0;
    let g = Exterior::separable(
        TimeProfile::Exp { rate: -MULTIPLIER_1_5 * xi.powf(1.5) },
        SpaceProfile::Cos { freq: xi },
    );
    let p = problem(heat(), Exterior::Zero, g.clone(), -0.25);
    let run = |h: f64| solve(&p, &SolverConfig::explicit(h, 0.5, 4.0)).unwrap().field;
    let (a, b, c) = (run(0.04), run(0.02), run(0.01));
    let (e1, e2) = (sup_final_gap(&a, &b), sup_final_gap(&b, &c));
    let rate = (e1 / e2).log2();
    assert!(rate >= 1.0, "gaps {e1:.3e}, {e2:.3e}, rate {rate:.3}");
    let exact_err = |f: &SpaceTimeField| {
        let n = f.n_times() - 1;
        (-(f.grid.n1 - 1)..f.grid.n1)
            .map(|k| (f.at(k, n) - g.value(f.grid.x(k), 0.0)).abs())
            .fold(0.0, f64::max)
    };
    let errs = [exact_err(&a), exact_err(&b), exact_err(&c)];
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "errors against the exact solution {errs:?}");
}

#[test]
fn regularized_fixed_point_improves_with_smaller_eps() {
    let p = params();
    let op = OperatorSpec::InfSup {
        rows: vec![
            vec![KernelSpec::new(Kernel::constant(1.0), 0.0, p).unwrap()],
            vec![KernelSpec::new(kernel::preset_kernel("oscillating", &p, None).unwrap(), 0.0, p).unwrap()],
        ],
        modulation: Some(Modulation { freq: 3.0, phase: 0.2 }),
    };
    let g = Exterior::separable(TimeProfile::Power { exponent: 0.2 }, SpaceProfile::Outside);
    let pr = problem(op, Exterior::Zero, g, -0.25);
    let explicit = SolverConfig::explicit(0.05, 0.5, 2.0);
    let direct = solve(&pr, &explicit).unwrap();
    let gap = |eps: f64| {
        let cfg = SolverConfig {
            scheme: SchemeKind::RegularizedFixedpoint { eps, max_iter: 50, tol: 1e-10 },
            ..explicit.clone()
        };
        let fp = solve(&pr, &cfg).unwrap();
        fp.field
            .slices
            .iter()
            .flatten()
            .zip(direct.field.slices.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (gap(0.1), gap(0.05));
    assert!(fine <= coarse, "ε=0.05 gap {fine:.3e} vs ε=0.1 gap {coarse:.3e}");
}

#[test]
fn extremal_operators_scale_one_sidedly_under_dilation() {
    // Rescaling maps the class into itself but not onto it (the rescaled
    // drift κ^{σ−1}(b − annulus) cannot reach every |b̃| ≤ Λ/(σ−1)), so only
    // M⁺ũ(x) ≥ κ^σ M⁺u(κx) and M⁻ũ(x) ≤ κ^σ M⁻u(κx) survive. Where Du = 0
    // neither the drift nor the compensator cut matters and equality holds.
    let p = params();
    let gu = Grid::new(0.005, 2.0).unwrap();
    let qu = QuadratureScheme::new(&gu, p.sigma).unwrap();
    let center = 0.1;
    for kappa in [0.5, 0.25] {
        let gv = Grid::new(0.005 / kappa, 2.0 / kappa).unwrap();
        let qv = QuadratureScheme::new(&gv, p.sigma).unwrap();
        let base: Arc<dyn ExteriorData> = Arc::new(Exterior::separable(
            TimeProfile::One,
            SpaceProfile::Bump { center, radius: 0.6 },
        ));
        let g = base.clone();
        let u = SpaceTimeField::from_fn(gu, 0.0, 1.0, 1, base.clone(), move |x, t| g.value(x, t)).unwrap();
        let d = Dilated { base, kappa };
        let dv = d.clone();
        let v = SpaceTimeField::from_fn(gv, 0.0, 1.0, 1, Arc::new(d), move |x, t| dv.value(x, t)).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            let gap = |x: f64| {
                let mv = evaluate_extremal(&v, sign, &p, x, 0.0, &qv).unwrap();
                let mu = evaluate_extremal(&u, sign, &p, kappa * x, 0.0, &qu).unwrap();
                let d = mv - kappa.powf(p.sigma) * mu;
                let d = if sign == Sign::Plus { d } else { -d };
                (d, 1e-4 * (1.0 + mu.abs()))
            };
            // the outermost nodes use one-sided Du stencils, their images do not
            for k in -(gv.n1 - 2)..gv.n1 - 1 {
                let x = gv.x(k);
                let (d, tol) = gap(x);
                assert!(d >= -tol, "κ={kappa} {sign:?} x={x}: gap {d}");
            }
            let (d, tol) = gap(center / kappa);
            assert!(d.abs() <= tol, "κ={kappa} {sign:?} at the critical point: gap {d}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solutions_obey_the_maximum_principle_bound(seed in any::<u64>(), f in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = sample::exterior(&mut rng);
        let pr = problem(heat(), Exterior::Constant { value: f }, g.clone(), -0.3);
        let sol = solve(&pr, &SolverConfig::explicit(0.1, 0.5, 2.0)).unwrap();
        let field = &sol.field;
        let sup_g = (0..field.n_times()).map(|n| g.sup_norm(field.t(n))).fold(0.0, f64::max);
        let bound = sup_g + 0.3 * f.abs();
        for v in field.slices.iter().flatten() {
            prop_assert!(v.abs() <= bound * (1.0 + 1e-12) + 1e-12, "{} > {}", v.abs(), bound);
        }
    }
}
