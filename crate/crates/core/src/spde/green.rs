//! Green functions of `-Delta` and of `d/dt - Delta/2` on a box with Dirichlet data.

use std::f64::consts::PI;

use super::{DomainSpec, SineBasis};
use crate::error::{invalid, Error, Result};

pub const DEFAULT_CUTOFF: usize = 256;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GreenKind {
    DirichletLaplacian,
    /// Kernel of the heat semigroup `exp(t Delta/2)` at time `t`.
    HeatSemigroup { t: f64 },
}

/// Spectral Green function of a rectangular Dirichlet problem together with
/// the matching discrete operator on the domain's node grid.
#[derive(Debug, Clone)]
pub struct GreenOperator {
    kind: GreenKind,
    domain: DomainSpec,
    cutoff: usize,
    tolerance: f64,
    basis: SineBasis,
}

pub fn green_dirichlet(domain: &DomainSpec) -> Result<GreenOperator> {
    GreenOperator::new(GreenKind::DirichletLaplacian, domain, DEFAULT_CUTOFF, DEFAULT_TOLERANCE)
}

pub fn green_heat(domain: &DomainSpec, t: f64) -> Result<GreenOperator> {
    GreenOperator::new(GreenKind::HeatSemigroup { t }, domain, DEFAULT_CUTOFF, DEFAULT_TOLERANCE)
}

impl GreenOperator {
    pub fn new(kind: GreenKind, domain: &DomainSpec, cutoff: usize, tolerance: f64) -> Result<Self> {
        if cutoff == 0 {
            return Err(invalid("series cutoff must be >= 1"));
        }
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(invalid("series tolerance must be positive"));
        }
        if let GreenKind::HeatSemigroup { t } = kind {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid(format!("heat kernel time must be > 0, got {t}")));
            }
        }
        Ok(Self {
            kind,
            domain: domain.clone(),
            cutoff,
            tolerance,
            basis: SineBasis::new(domain),
        })
    }

    pub fn kind(&self) -> GreenKind {
        self.kind
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Series value `G(x, y)`; errors when the tail bound at this pair exceeds the tolerance.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let d = self.domain.dim();
        if x.len() != d || y.len() != d {
            return Err(Error::Shape(format!("green function points must have dimension {d}")));
        }
        let bound = self.tail_bound(x, y);
        if bound > self.tolerance {
            return Err(Error::CutoffTooSmall {
                cutoff: self.cutoff,
                tolerance: self.tolerance,
                suggested: self.suggest_cutoff(x, y)?,
            });
        }
        Ok(self.series(x, y, self.cutoff))
    }

    /// Upper bound on the omitted part of the series at `(x, y)`.
    pub fn tail_bound(&self, x: &[f64], y: &[f64]) -> f64 {
        self.tail_bound_at(x, y, self.cutoff)
    }

    /// Smallest cutoff whose tail bound at `(x, y)` meets the tolerance.
    pub fn suggest_cutoff(&self, x: &[f64], y: &[f64]) -> Result<usize> {
        let mut hi = self.cutoff.max(1);
        while self.tail_bound_at(x, y, hi) > self.tolerance {
            hi *= 2;
            if hi > 1 << 24 {
                return Err(invalid(
                    "no finite cutoff meets the tolerance at this pair (coincident points?)",
                ));
            }
        }
        let mut lo = 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.tail_bound_at(x, y, mid) <= self.tolerance {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Ok(lo)
    }

    fn local(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.domain.lower).map(|(a, l)| a - l).collect()
    }

    fn lengths(&self) -> Vec<f64> {
        (0..self.domain.dim())
            .map(|k| self.domain.upper[k] - self.domain.lower[k])
            .collect()
    }

    fn series(&self, x: &[f64], y: &[f64], cutoff: usize) -> f64 {
        let xl = self.local(x);
        let yl = self.local(y);
        let len = self.lengths();
        match self.kind {
            GreenKind::DirichletLaplacian => laplace_series(&xl, &yl, &len, cutoff),
            GreenKind::HeatSemigroup { t } => (0..xl.len())
                .map(|k| heat_series_1d(xl[k], yl[k], len[k], t, cutoff))
                .product(),
        }
    }

    fn tail_bound_at(&self, x: &[f64], y: &[f64], cutoff: usize) -> f64 {
        let xl = self.local(x);
        let yl = self.local(y);
        let len = self.lengths();
        let d = xl.len();
        match self.kind {
            GreenKind::DirichletLaplacian => {
                if d == 1 {
                    return 0.0;
                }
                let axis = separation_axis(&xl, &yl);
                let delta = (xl[axis] - yl[axis]).abs();
                if delta == 0.0 {
                    return f64::INFINITY;
                }
                let lmax = len
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != axis)
                    .map(|(_, l)| *l)
                    .fold(0.0, f64::max);
                let norm: f64 = len
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != axis)
                    .map(|(_, l)| 2.0 / l)
                    .product();
                let p = (d - 1) as i32;
                let mut sum = 0.0;
                let mut m = cutoff + 1;
                loop {
                    let count = (m as f64).powi(p - 1) * p as f64;
                    let root = PI * m as f64 / lmax;
                    let term = count * (-root * delta).exp() / (2.0 * root);
                    sum += term;
                    if term <= 1e-17 * sum || m > cutoff + 1_000_000 {
                        break;
                    }
                    m += 1;
                }
                norm * sum
            }
            GreenKind::HeatSemigroup { t } => {
                // |prod(a+e) - prod(a)| <= prod(|a| + e) - prod(|a|)
                let mut with_tail = 1.0;
                let mut without = 1.0;
                for k in 0..d {
                    let a = heat_series_1d(xl[k], yl[k], len[k], t, cutoff).abs();
                    let c = 0.5 * (PI / len[k]).powi(2) * t;
                    let mut e = 0.0;
                    let mut j = cutoff + 1;
                    loop {
                        let term = (-c * (j * j) as f64).exp();
                        e += term;
                        if term <= 1e-18 * e {
                            break;
                        }
                        j += 1;
                    }
                    e *= 2.0 / len[k];
                    with_tail *= a + e;
                    without *= a;
                }
                with_tail - without
            }
        }
    }

    /// Discrete Green function between nodes `i` and `j` (full-grid multi-indices):
    /// the response of the node-grid operator to a unit mass at node `j`.
    pub fn discrete(&self, i: &[usize], j: &[usize]) -> Result<f64> {
        let d = self.domain.dim();
        if i.len() != d || j.len() != d {
            return Err(Error::Shape("node indices must match the domain dimension".into()));
        }
        let on_boundary = |idx: &[usize]| {
            idx.iter()
                .zip(&self.domain.cells)
                .any(|(&a, &n)| a == 0 || a >= n)
        };
        if on_boundary(i) || on_boundary(j) {
            return Ok(0.0);
        }
        let shape = self.domain.interior_shape();
        let vol: f64 = (0..d).map(|k| self.domain.h(k)).product();
        let eig = self.basis.mode_eigenvalues();
        let t = match self.kind {
            GreenKind::HeatSemigroup { t } => Some(t),
            GreenKind::DirichletLaplacian => None,
        };
        let mut acc = 0.0;
        let mut k = vec![0usize; d];
        for (c, mu) in eig.iter().enumerate() {
            let mut rem = c;
            for a in (0..d).rev() {
                k[a] = rem % shape[a] + 1;
                rem /= shape[a];
            }
            let phi: f64 = (0..d)
                .map(|a| self.basis.entry(a, k[a], i[a]) * self.basis.entry(a, k[a], j[a]))
                .product();
            let weight = match t {
                None => 1.0 / mu,
                Some(t) => (-0.5 * mu * t).exp(),
            };
            acc += phi * weight;
        }
        Ok(acc / vol)
    }
}

fn separation_axis(x: &[f64], y: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..x.len() {
        if (x[k] - y[k]).abs() > (x[best] - y[best]).abs() {
            best = k;
        }
    }
    best
}

/// Green function of `-u'' + lambda u` on `[0, len]` with zero end values.
fn green_1d(x: f64, y: f64, len: f64, lambda: f64) -> f64 {
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    if lambda == 0.0 {
        return lo * (len - hi) / len;
    }
    let r = lambda.sqrt();
    let num = (-r * (hi - lo)).exp() * -(-2.0 * r * lo).exp_m1() * -(-2.0 * r * (len - hi)).exp_m1();
    num / (2.0 * r * -(-2.0 * r * len).exp_m1())
}

/// Sine series in every axis but the most separated one, where the
/// one-dimensional hyperbolic Green function is summed in closed form.
fn laplace_series(x: &[f64], y: &[f64], len: &[f64], cutoff: usize) -> f64 {
    let d = x.len();
    if d == 1 {
        return green_1d(x[0], y[0], len[0], 0.0);
    }
    let axis = separation_axis(x, y);
    let others: Vec<usize> = (0..d).filter(|k| *k != axis).collect();
    let m = others.len();
    let mut k = vec![1usize; m];
    let mut acc = 0.0;
    loop {
        let mut phi = 1.0;
        let mut lambda = 0.0;
        for (slot, &a) in others.iter().enumerate() {
            let w = PI * k[slot] as f64 / len[a];
            phi *= (2.0 / len[a]) * (w * x[a]).sin() * (w * y[a]).sin();
            lambda += w * w;
        }
        acc += phi * green_1d(x[axis], y[axis], len[axis], lambda);
        let mut slot = 0;
        loop {
            if slot == m {
                return acc;
            }
            k[slot] += 1;
            if k[slot] <= cutoff {
                break;
            }
            k[slot] = 1;
            slot += 1;
        }
    }
}

fn heat_series_1d(x: f64, y: f64, len: f64, t: f64, cutoff: usize) -> f64 {
    (1..=cutoff)
        .map(|k| {
            let w = PI * k as f64 / len;
            (2.0 / len) * (w * x).sin() * (w * y).sin() * (-0.5 * w * w * t).exp()
        })
        .sum()
}
