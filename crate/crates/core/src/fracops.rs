//! Multi-parameter Liouville fractional integrals on cell-averaged grids.
//!
//! `I^beta_-` integrates to the right, `(1/Gamma(beta)) int_0^inf f(x + y) y^(beta-1) dy`,
//! and `I^beta_+` to the left. The anisotropic operator applies the
//! one-dimensional operator along every axis with its own exponent.
//!
//! Inputs are piecewise constant on cells. Two discretizations are provided:
//! exact point values of the operator at arbitrary points, and exact cell
//! averages (a Galerkin projection) on the input grid. Both integrate the
//! power kernel analytically, so no singular quadrature error appears.

use libm::tgamma;

use crate::error::{invalid, Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::quad::GaussLegendre;

#[derive(Debug, Clone, PartialEq)]
pub struct BetaVector {
    beta: Vec<f64>,
    gamma: Vec<f64>,
}

impl BetaVector {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(invalid("beta must have at least one component"));
        }
        for (k, &b) in beta.iter().enumerate() {
            if !(b > 0.0 && b < 0.5) {
                return Err(invalid(format!("beta[{k}] out of (0, 0.5): {b}")));
            }
        }
        let gamma = beta.iter().map(|&b| tgamma(b)).collect();
        Ok(Self { beta, gamma })
    }

    /// Accepts any `beta_k` in `(0, 1)`, where the Liouville integral itself
    /// is still defined. Field and SPDE constructions require [`BetaVector::new`].
    pub fn for_operator(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(invalid("beta must have at least one component"));
        }
        for (k, &b) in beta.iter().enumerate() {
            if !(b > 0.0 && b < 1.0) {
                return Err(invalid(format!("beta[{k}] out of (0, 1): {b}")));
            }
        }
        let gamma = beta.iter().map(|&b| tgamma(b)).collect();
        Ok(Self { beta, gamma })
    }

    pub fn uniform(d: usize, b: f64) -> Result<Self> {
        Self::new(vec![b; d])
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.beta[k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.beta
    }

    /// `Gamma(beta_k)` per axis.
    pub fn gamma_factors(&self) -> &[f64] {
        &self.gamma
    }

    pub fn sum(&self) -> f64 {
        self.beta.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.beta.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedExponent {
    p: Vec<f64>,
}

impl MixedExponent {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(invalid("mixed exponent needs at least one component"));
        }
        for (k, &v) in p.iter().enumerate() {
            if !(v.is_finite() && v > 1.0) {
                return Err(invalid(format!("p[{k}] must be > 1, got {v}")));
            }
        }
        Ok(Self { p })
    }

    /// `p_k = 1 / (1/2 + beta_k)`, the exponents for which `I^beta_-` maps into `L^2`.
    pub fn l2_partner(beta: &BetaVector) -> Self {
        Self {
            p: beta.as_slice().iter().map(|b| 1.0 / (0.5 + b)).collect(),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }
}

/// Direction of a Liouville integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `I_+`: integrates over the past, kernel `(x - s)_+^(beta-1)`.
    Plus,
    /// `I_-`: integrates over the future, kernel `(s - x)_+^(beta-1)`.
    Minus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FracOutput {
    pub values: GridFunction,
    /// The input does not vanish on the boundary cells the operator integrates towards.
    pub truncated_tail: bool,
}

/// `(1/Gamma(beta+1)) int_a^b (s - x)_+^(beta-1) ... ds` style weights: the
/// exact integral of the kernel over one source cell `[a, b]`.
pub fn cell_weight(dir: Direction, beta: f64, x: f64, a: f64, b: f64) -> f64 {
    let g = tgamma(beta + 1.0);
    match dir {
        Direction::Minus => ((b - x).max(0.0).powf(beta) - (a - x).max(0.0).powf(beta)) / g,
        Direction::Plus => ((x - a).max(0.0).powf(beta) - (x - b).max(0.0).powf(beta)) / g,
    }
}

/// Cell-averaged Galerkin weight between source cell `j` and target cell `i`
/// on a uniform axis of width `h`, as a function of the offset `m = j - i`
/// (minus direction; the plus direction uses `m = i - j`).
pub fn galerkin_weight(beta: f64, h: f64, m: i64) -> f64 {
    if m < 0 {
        return 0.0;
    }
    let f = |z: f64| if z > 0.0 { z.powf(beta + 1.0) } else { 0.0 };
    let m = m as f64;
    h.powf(beta) * (f(m + 1.0) - 2.0 * f(m) + f(m - 1.0)) / tgamma(beta + 2.0)
}

fn check_dims(grid: &GridSpec, beta: &BetaVector) -> Result<()> {
    if grid.dim() != beta.dim() {
        return Err(Error::Shape(format!(
            "grid dimension {} does not match beta length {}",
            grid.dim(),
            beta.dim()
        )));
    }
    Ok(())
}

/// Applies a banded Toeplitz operator along one axis of a row-major array.
fn apply_axis(values: &mut [f64], shape: &[usize], axis: usize, weights: &[f64], dir: Direction) {
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];
    for o in 0..outer {
        for s in 0..stride {
            let base = o * n * stride + s;
            for i in 0..n {
                line[i] = values[base + i * stride];
            }
            for i in 0..n {
                let mut acc = 0.0;
                match dir {
                    Direction::Minus => {
                        for j in i..n {
                            acc += weights[j - i] * line[j];
                        }
                    }
                    Direction::Plus => {
                        for j in 0..=i {
                            acc += weights[i - j] * line[j];
                        }
                    }
                }
                out[i] = acc;
            }
            for i in 0..n {
                values[base + i * stride] = out[i];
            }
        }
    }
}

fn boundary_nonzero(f: &GridFunction, dir: Direction) -> bool {
    let g = f.grid();
    let cells = g.cells_per_axis();
    f.values().iter().enumerate().any(|(c, v)| {
        *v != 0.0
            && g.multi_index(c).iter().enumerate().any(|(k, &i)| match dir {
                Direction::Minus => i + 1 == cells[k],
                Direction::Plus => i == 0,
            })
    })
}

/// Cell averages of `I^beta_dir f` on the grid of `f`.
pub fn frac_integral(f: &GridFunction, beta: &BetaVector, dir: Direction) -> Result<FracOutput> {
    let grid = f.grid();
    check_dims(grid, beta)?;
    let shape = grid.cells_per_axis().to_vec();
    let mut values = f.values().to_vec();
    for axis in 0..grid.dim() {
        let h = grid.width(axis);
        let w: Vec<f64> = (0..shape[axis] as i64)
            .map(|m| galerkin_weight(beta.get(axis), h, m))
            .collect();
        apply_axis(&mut values, &shape, axis, &w, dir);
    }
    Ok(FracOutput {
        values: GridFunction::new(grid.clone(), values)?,
        truncated_tail: boundary_nonzero(f, dir),
    })
}

pub fn frac_integral_minus(f: &GridFunction, beta: &BetaVector) -> Result<FracOutput> {
    frac_integral(f, beta, Direction::Minus)
}

pub fn frac_integral_plus(f: &GridFunction, beta: &BetaVector) -> Result<FracOutput> {
    frac_integral(f, beta, Direction::Plus)
}

/// Exact value of `I^beta_dir f` at the point `x` for piecewise-constant `f`.
pub fn frac_integral_at(
    f: &GridFunction,
    beta: &BetaVector,
    dir: Direction,
    x: &[f64],
) -> Result<f64> {
    let grid = f.grid();
    check_dims(grid, beta)?;
    if x.len() != grid.dim() {
        return Err(Error::Shape("evaluation point dimension".into()));
    }
    let per_axis: Vec<Vec<f64>> = (0..grid.dim())
        .map(|k| {
            (0..grid.cells_per_axis()[k])
                .map(|i| cell_weight(dir, beta.get(k), x[k], grid.edge(k, i), grid.edge(k, i + 1)))
                .collect()
        })
        .collect();
    Ok(contract_separable(grid, f.values(), &per_axis))
}

/// `sum_c values[c] * prod_k w_k[i_k]` by successive axis contraction.
pub(crate) fn contract_separable(grid: &GridSpec, values: &[f64], per_axis: &[Vec<f64>]) -> f64 {
    let mut cur = values.to_vec();
    for k in (0..grid.dim()).rev() {
        let n = grid.cells_per_axis()[k];
        let outer = cur.len() / n;
        let w = &per_axis[k];
        cur = (0..outer)
            .map(|o| (0..n).map(|i| w[i] * cur[o * n + i]).sum())
            .collect();
    }
    cur[0]
}

/// Iterated mixed norm, axis 0 innermost:
/// `( int ( ... ( int |f|^p_0 dx_0 )^(p_1/p_0) dx_1 ... ) dx_{d-1} )^(1/p_{d-1})`.
pub fn mixed_norm(f: &GridFunction, p: &MixedExponent) -> Result<f64> {
    let grid = f.grid();
    if p.as_slice().len() != grid.dim() {
        return Err(Error::Shape("mixed exponent length differs from grid dimension".into()));
    }
    let d = grid.dim();
    let mut shape = grid.cells_per_axis().to_vec();
    let mut cur: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    for k in 0..d {
        let pk = p.as_slice()[k];
        let h = grid.width(k);
        // axis k is now the slowest-varying remaining axis
        let n = shape[0];
        let inner: usize = shape[1..].iter().product();
        let mut next = vec![0.0; inner];
        for i in 0..n {
            for (s, acc) in next.iter_mut().enumerate() {
                *acc += h * cur[i * inner + s].powf(pk);
            }
        }
        cur = next.into_iter().map(|v| v.powf(1.0 / pk)).collect();
        shape.remove(0);
    }
    Ok(cur[0])
}

/// `(int f I_+ g, int g I_- f)` with the cell quadrature on both sides.
pub fn ibp_pairings(f: &GridFunction, g: &GridFunction, beta: &BetaVector) -> Result<(f64, f64)> {
    if f.grid() != g.grid() {
        return Err(Error::Shape("integration by parts needs a shared grid".into()));
    }
    let plus_g = frac_integral_plus(g, beta)?.values;
    let minus_f = frac_integral_minus(f, beta)?.values;
    Ok((f.inner(&plus_g)?, g.inner(&minus_f)?))
}

/// `|int f I_+ g - int g I_- f|`.
pub fn check_integration_by_parts(f: &GridFunction, g: &GridFunction, beta: &BetaVector) -> Result<f64> {
    let (lhs, rhs) = ibp_pairings(f, g, beta)?;
    Ok((lhs - rhs).abs())
}

/// `||I^beta_- f||_{L^2} / ||f||_{p}` with `p_k = 1/(1/2 + beta_k)`.
pub fn boundedness_ratio(f: &GridFunction, beta: &BetaVector) -> Result<f64> {
    let out = frac_integral_minus(f, beta)?.values;
    let l2 = out.inner(&out)?.sqrt();
    let denom = mixed_norm(f, &MixedExponent::l2_partner(beta))?;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(l2 / denom)
}

/// Values `xi_0(u), ..., xi_n(u)` of the normalized Hermite functions.
pub fn hermite_functions(n: usize, u: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let x0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * u * u).exp();
    out.push(x0);
    if n == 0 {
        return out;
    }
    out.push(std::f64::consts::SQRT_2 * u * x0);
    for k in 1..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * u * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

pub fn hermite_function(n: usize, u: f64) -> f64 {
    hermite_functions(n, u)[n]
}

/// Half-width beyond which `xi_n` is below double precision relevance.
pub fn hermite_support(n: usize) -> f64 {
    (2.0 * n as f64 + 1.0).sqrt() + 10.0
}

/// `int_{-inf}^t (t - u)^(beta-1) xi_n(u) du` and its ratio to `n^(2/3 - beta/2)`.
///
/// `xi_n` is interpolated linearly on a fine mesh and each panel is
/// integrated exactly against the power kernel.
pub fn hermite_kernel_bound(n: usize, beta: f64, t: f64) -> Result<(f64, f64)> {
    if n < 1 {
        return Err(invalid("hermite_kernel_bound needs n >= 1"));
    }
    if !(beta > 0.0 && beta < 0.5) {
        return Err(invalid(format!("beta out of (0, 0.5): {beta}")));
    }
    let lo = -hermite_support(n);
    if t <= lo {
        return Ok((0.0, 0.0));
    }
    let panels = (((t - lo) / 0.002).ceil() as usize).max(64);
    let h = (t - lo) / panels as f64;
    let mut value = 0.0;
    let mut xa = hermite_function(n, lo);
    for p in 0..panels {
        let a = lo + p as f64 * h;
        let b = if p + 1 == panels { t } else { a + h };
        let xb = hermite_function(n, b);
        let ra = t - a;
        let rb = t - b;
        let m0 = (ra.powf(beta) - rb.powf(beta)) / beta;
        // int r^(beta-1) (ra - r) dr over [rb, ra], i.e. the weight of (u - a)
        let m1 = ra * m0 - (ra.powf(beta + 1.0) - rb.powf(beta + 1.0)) / (beta + 1.0);
        value += xa * m0 + (xb - xa) * m1 / (b - a);
        xa = xb;
    }
    let ratio = value.abs() / (n as f64).powf(2.0 / 3.0 - beta / 2.0);
    Ok((value, ratio))
}

/// `int xi_n^2` by composite Gauss–Legendre over the effective support.
pub fn hermite_norm_sq(n: usize) -> f64 {
    let l = hermite_support(n) + 2.0;
    GaussLegendre::new(20).composite(-l, l, 400, |u| hermite_function(n, u).powi(2))
}
