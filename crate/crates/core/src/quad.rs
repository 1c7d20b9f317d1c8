//! Summation and one-dimensional reference quadrature.
//!
//! The reference integrator is composite midpoint on dyadically refined
//! panels with Richardson extrapolation. Integrable endpoint singularities at
//! the left end are handled by grading the panels geometrically towards it.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Compensated sum of an iterator, in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = CompensatedSum::new();
    for x in it {
        s.add(x);
    }
    s.value()
}

fn midpoint(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let w = (b - a) / n as f64;
    let mut s = CompensatedSum::new();
    for k in 0..n {
        s.add(f(a + (k as f64 + 0.5) * w));
    }
    s.value() * w
}

/// Integrates a smooth function over a finite panel by midpoint refinement
/// with Richardson extrapolation until two successive estimates agree to
/// `rel_tol` (relative) or `abs_floor` (absolute).
pub fn integrate_panel(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut n = 8;
    let mut prev_mid = midpoint(f, a, b, n);
    let mut prev_rich = prev_mid;
    for _ in 0..18 {
        n *= 2;
        let mid = midpoint(f, a, b, n);
        let rich = (4.0 * mid - prev_mid) / 3.0;
        if (rich - prev_rich).abs() <= rel_tol * rich.abs() + abs_floor {
            return rich;
        }
        prev_mid = mid;
        prev_rich = rich;
    }
    prev_rich
}

/// Integrates over `[a, b]` where `f` may have an integrable singularity at
/// `a`. Panels are `[a + (b-a)2^{-k-1}, a + (b-a)2^{-k}]`; refinement stops
/// once a panel contributes less than `rel_tol` of the running total for
/// several consecutive levels.
pub fn integrate_graded(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let len = b - a;
    let mut total = CompensatedSum::new();
    let mut quiet = 0;
    for k in 0..200 {
        let hi = a + len * 0.5f64.powi(k);
        let lo = a + len * 0.5f64.powi(k + 1);
        let part = integrate_panel(f, lo, hi, rel_tol * 0.1, 0.0);
        total.add(part);
        if part.abs() <= rel_tol * 1e-2 * total.value().abs() {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    total.value()
}

/// Least-squares line fit `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub slope_se: f64,
    /// Maximum absolute deviation of the data from the line.
    pub max_residual: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut sse = 0.0;
    let mut max_residual: f64 = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - (intercept + slope * x);
        sse += r * r;
        max_residual = max_residual.max(r.abs());
    }
    let slope_se = if n > 2 {
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit {
        slope,
        intercept,
        slope_se,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1.0);
        for _ in 0..1000 {
            s.add(1e-16);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-13).abs() < 1e-20);
    }

    #[test]
    fn panel_integrates_polynomial() {
        let v = integrate_panel(&|x| x * x, 0.0, 3.0, 1e-12, 0.0);
        assert!((v - 9.0).abs() < 1e-10);
    }

    #[test]
    fn graded_handles_endpoint_singularity() {
        // ∫_0^1 y^{-1/2} dy = 2
        let v = integrate_graded(&|y| y.powf(-0.5), 0.0, 1.0, 1e-10);
        assert!((v - 2.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn line_fit_exact() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!(f.max_residual < 1e-12);
    }
}
