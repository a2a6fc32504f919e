//! One-dimensional quadrature rules shared by the oracles and the solvers.
//!
//! Three tools:
//! - Gauss–Legendre rules of arbitrary order, plain and composite;
//! - tanh-sinh (double exponential) quadrature, which hands the integrand the
//!   exact distances to both endpoints so that algebraic endpoint
//!   singularities such as `(b - x)^(beta - 1)` can be evaluated without
//!   cancellation;
//! - adaptive Gauss–Kronrod (7/15) for smooth integrands on long ranges.

use std::f64::consts::FRAC_PI_2;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A Gauss–Legendre rule that can be mapped onto arbitrary intervals.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let m = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + m * x);
        }
        s * m
    }

    /// Composite rule over `panels` equal sub-intervals.
    pub fn composite<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * h;
                self.integrate(lo, lo + h, &mut f)
            })
            .sum()
    }

    /// Mapped nodes and weights for `[a, b]`.
    pub fn points(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let m = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (c + m * x, w * m))
    }
}

/// Tanh-sinh rule on `[a, b]`.
///
/// The integrand receives `(x, x - a, b - x)` with both distances computed
/// without cancellation. Refinement halves the step until two successive
/// estimates agree to `rel_tol` (relative).
pub fn tanh_sinh<F>(a: f64, b: f64, rel_tol: f64, mut f: F) -> f64
where
    F: FnMut(f64, f64, f64) -> f64,
{
    if b <= a {
        return 0.0;
    }
    const T_MAX: f64 = 6.0;
    const MAX_LEVEL: u32 = 12;
    let half = 0.5 * (b - a);

    let mut eval = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let au = u.abs();
        let e = (-2.0 * au).exp();
        // distance from the nearer endpoint, scaled to [0, 1]
        let delta = 2.0 * e / (1.0 + e);
        let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
        let w = half * FRAC_PI_2 * t.cosh() * sech2;
        if w == 0.0 || delta == 0.0 {
            return 0.0;
        }
        let near = half * delta;
        let far = 2.0 * half - near;
        let v = if u >= 0.0 {
            f(b - near, far, near)
        } else {
            f(a + near, near, far)
        };
        w * v
    };

    let mut h = 1.0;
    let mut sum = eval(0.0);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        if t > T_MAX {
            break;
        }
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = sum * h;
    for _ in 1..MAX_LEVEL {
        h *= 0.5;
        let mut add = 0.0;
        let mut k = 1;
        loop {
            let t = k as f64 * h;
            if t > T_MAX {
                break;
            }
            add += eval(t) + eval(-t);
            k += 2;
        }
        sum += add;
        let next = sum * h;
        let diff = (next - estimate).abs();
        estimate = next;
        if diff <= rel_tol * next.abs() || diff <= 1e-300 {
            break;
        }
    }
    estimate
}

/// Fixed tanh-sinh nodes `(x, weight)` on `[a, b]` with step `h`, for
/// integrating many integrands on one node set.
pub fn tanh_sinh_rule(a: f64, b: f64, h: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    if b <= a {
        return out;
    }
    let half = 0.5 * (b - a);
    let n = (6.0 / h).floor() as i64;
    for k in -n..=n {
        let t = k as f64 * h;
        let u = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * u.abs()).exp();
        let near = half * 2.0 * e / (1.0 + e);
        let w = h * half * FRAC_PI_2 * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        if w == 0.0 || near == 0.0 {
            continue;
        }
        let x = if u >= 0.0 { b - near } else { a + near };
        out.push((x, w));
    }
    out
}

/// Tanh-sinh over consecutive sub-intervals `[p_0, p_1], [p_1, p_2], ...`.
///
/// Breakpoints must be sorted; duplicate points are skipped.
pub fn tanh_sinh_split<F>(points: &[f64], rel_tol: f64, mut f: F) -> f64
where
    F: FnMut(f64, f64, f64) -> f64,
{
    points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| tanh_sinh(w[0], w[1], rel_tol, &mut f))
        .sum()
}

/// Sorted, deduplicated breakpoints clipped to `[lo, hi]`, always containing both ends.
pub fn breakpoints(lo: f64, hi: f64, interior: &[f64]) -> Vec<f64> {
    let mut pts: Vec<f64> = interior
        .iter()
        .copied()
        .filter(|p| *p > lo && *p < hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

/// Geometric breakpoints `-1, -4, -16, ...` down to `lo` (exclusive),
/// used on long past-truncated ranges where integrands decay algebraically.
pub fn geometric_past_points(lo: f64) -> Vec<f64> {
    let mut pts = Vec::new();
    let mut p = -1.0;
    while p > lo {
        pts.push(p);
        p *= 4.0;
    }
    pts
}

const GK15_XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK15_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const GK15_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(a: f64, b: f64, f: &mut F) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * GK15_WK[7];
    let mut gauss = fc * GK15_WG[3];
    for j in 0..7 {
        let x = h * GK15_XK[j];
        let s = f(c - x) + f(c + x);
        kronrod += GK15_WK[j] * s;
        if j % 2 == 1 {
            gauss += GK15_WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod quadrature with a global error budget.
///
/// Returns `(estimate, error_estimate)`. Intervals are bisected until the
/// summed error estimate is below `max(abs_tol, rel_tol * |estimate|)`.
pub fn adaptive_gk<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    mut f: F,
) -> (f64, f64) {
    const MAX_INTERVALS: usize = 4000;
    let (v, e) = gk15(a, b, &mut f);
    let mut intervals = vec![(a, b, v, e)];
    loop {
        let total: f64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) || intervals.len() >= MAX_INTERVALS {
            return (total, err);
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(lo, mid, &mut f);
        let (v2, e2) = gk15(mid, hi, &mut f);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(6);
        let v = rule.integrate(-1.0, 2.0, |x| x.powi(11) - 3.0 * x.powi(4) + 1.0);
        let exact = (2f64.powi(12) - 1.0) / 12.0 - 3.0 * (32.0 + 1.0) / 5.0 + 3.0;
        assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
        let (_, w) = gauss_legendre(20);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularities() {
        // int_0^1 x^(-0.95) dx = 20
        let v = tanh_sinh(0.0, 1.0, 1e-13, |_, dl, _| dl.powf(-0.95));
        assert!((v - 20.0).abs() < 1e-8, "{v}");
        // int_0^2 (2 - x)^(-0.5) dx = 2 sqrt(2)
        let v = tanh_sinh(0.0, 2.0, 1e-13, |_, _, dr| dr.powf(-0.5));
        assert!((v - 2.0 * 2f64.sqrt()).abs() < 1e-11, "{v}");
    }

    #[test]
    fn adaptive_gk_on_smooth_tail() {
        let (v, _) = adaptive_gk(0.0, 60.0, 1e-14, 1e-13, |x| (-x).exp() * x * x);
        assert!((v - 2.0).abs() < 1e-11, "{v}");
    }
}
