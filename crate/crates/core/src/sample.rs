//! Seeded generators of admissible kernels, operators and fields.

use rand::Rng;

use crate::field::{Exterior, SpaceProfile, TimeProfile};
use crate::kernel::{EllipticityParams, Kernel, KernelSpec};
use crate::ops::{Modulation, OperatorSpec};

/// A kernel with values in `[λ, Λ]`.
pub fn kernel<R: Rng>(rng: &mut R, p: &EllipticityParams) -> Kernel {
    let range = p.lambda..=p.lambda_hi;
    let v = |rng: &mut R| rng.gen_range(range.clone());
    match rng.gen_range(0..4) {
        0 => Kernel::constant(v(rng)),
        1 => Kernel::TwoSided {
            pos: v(rng),
            neg: v(rng),
        },
        2 => {
            let (a, b) = (v(rng), v(rng));
            Kernel::Oscillating {
                lo: a.min(b),
                hi: a.max(b),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            }
        }
        _ => {
            let n = rng.gen_range(1..5);
            let mut breaks: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let values = (0..=breaks.len())
                .map(|_| v(rng))
                .collect();
            Kernel::Piecewise { breaks, values }
        }
    }
}

/// An element of the class: admissible kernel and drift within the bound.
pub fn kernel_spec<R: Rng>(rng: &mut R, p: &EllipticityParams) -> KernelSpec {
    let k = kernel(rng, p);
    let b = p.drift_bound() * rng.gen_range(-1.0..=1.0);
    KernelSpec::new_unchecked(k, b, *p)
}

/// Inf-sup operator with 1 to 3 rows of 1 to 3 members, sometimes
/// x-modulated.
pub fn infsup<R: Rng>(rng: &mut R, p: &EllipticityParams) -> OperatorSpec {
    let rows = (0..rng.gen_range(1..=3))
        .map(|_| (0..rng.gen_range(1..=3)).map(|_| kernel_spec(rng, p)).collect())
        .collect();
    let modulation = rng.gen_bool(0.3).then(|| Modulation {
        freq: rng.gen_range(0.5..4.0),
        phase: rng.gen_range(0.0..std::f64::consts::TAU),
    });
    OperatorSpec::InfSup { rows, modulation }
}

/// Smooth separable exterior data with a compact or constant far field.
pub fn exterior<R: Rng>(rng: &mut R) -> Exterior {
    let space = match rng.gen_range(0..3) {
        0 => SpaceProfile::Bump {
            center: rng.gen_range(-1.5..1.5),
            radius: rng.gen_range(0.5..3.0),
        },
        1 => SpaceProfile::Outside,
        _ => SpaceProfile::One,
    };
    let time = match rng.gen_range(0..3) {
        0 => TimeProfile::One,
        1 => TimeProfile::Exp {
            rate: rng.gen_range(-1.0..1.0),
        },
        _ => TimeProfile::Sin {
            freq: rng.gen_range(0.5..4.0),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        },
    };
    Exterior::Separable {
        time,
        space,
        amplitude: rng.gen_range(-2.0..2.0),
    }
}

/// Random trigonometric profile `Σ a_i cos(f_i x + φ_i)`.
pub fn profile<R: Rng>(rng: &mut R) -> impl Fn(f64) -> f64 + Clone {
    let terms: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..6.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    move |x| terms.iter().map(|(a, f, ph)| a * (f * x + ph).cos()).sum()
}
