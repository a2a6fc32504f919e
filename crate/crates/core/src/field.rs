//! Anisotropic fractional Lévy random fields.
//!
//! `X_t = int prod_k K_k(t_k, s_k) dX(s)` with the moving-average kernel
//!
//! ```text
//! K(t, s) = ((t - s)_+^beta - (-s)_+^beta) / Gamma(beta + 1)  =  I^beta_- 1_[0,t] (s)
//! ```
//!
//! applied per axis. The infinite past is cut at `-past`; samplers and
//! oracles share that cut so they describe the same random variable.

use libm::tgamma;

use crate::chaos::{ChaosVector, DiscreteU};
use crate::error::{invalid, Error, Result};
use crate::fracops::{frac_integral_at, frac_integral_plus, BetaVector, Direction};
use crate::grid::{GridFunction, GridSpec};
use crate::levy::{LevyModel, NoiseRealization};
use crate::quad::{geometric_past_points, tanh_sinh, tanh_sinh_split};

/// Default bound on the neglected fraction of the kernel's squared `L^2` norm.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-4;
const QUAD_TOL: f64 = 1e-12;

/// `(t - s)_+^b - (-s)_+^b` without cancellation for `s << 0`.
fn kernel_numerator(b: f64, t: f64, s: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if s >= t {
        0.0
    } else if s >= 0.0 {
        (t - s).powf(b)
    } else {
        let u = -s;
        u.powf(b) * (b * (t / u).ln_1p()).exp_m1()
    }
}

/// One-dimensional kernel `I^beta_- 1_[0,t] (s)`.
pub fn kernel_1d(beta: f64, t: f64, s: f64) -> f64 {
    kernel_numerator(beta, t, s) / tgamma(beta + 1.0)
}

/// `prod_k kernel_1d(beta_k, t_k, s_k)`.
pub fn kernel_value(beta: &BetaVector, t: &[f64], s: &[f64]) -> f64 {
    (0..beta.dim())
        .map(|k| kernel_1d(beta.get(k), t[k], s[k]))
        .product()
}

/// `int_a^b kernel_1d(beta, t, s) ds` in closed form.
pub fn kernel_1d_integral(beta: f64, t: f64, a: f64, b: f64) -> f64 {
    if t <= 0.0 || b <= a {
        return 0.0;
    }
    let p = |x: f64| x.max(0.0).powf(beta + 1.0);
    ((p(t - a) - p(t - b)) - (p(-a) - p(-b))) / tgamma(beta + 2.0)
}

/// Squared `L^2(R)` norm of `kernel_1d(beta, t, .)`: `t^(2 beta + 1) / (Gamma(2 beta + 2) cos(pi beta))`.
pub fn kernel_1d_norm_sq(beta: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    t.powf(2.0 * beta + 1.0) / (tgamma(2.0 * beta + 2.0) * (std::f64::consts::PI * beta).cos())
}

/// `int_{-inf}^{-past} kernel_1d(beta, t, s) kernel_1d(beta, r, s) ds`.
fn past_tail_product(beta: f64, t: f64, r: f64, past: f64) -> f64 {
    if t <= 0.0 || r <= 0.0 {
        return 0.0;
    }
    // s = -past / v maps (-inf, -past] onto (0, 1]
    tanh_sinh(0.0, 1.0, QUAD_TOL, |v, dl, _| {
        let v = v.max(dl);
        if v <= 0.0 {
            return 0.0;
        }
        let s = -past / v;
        let val = kernel_1d(beta, t, s) * kernel_1d(beta, r, s) * past / (v * v);
        if val.is_finite() {
            val
        } else {
            0.0
        }
    })
}

/// `int_{-past}^{inf} kernel_1d(beta, t, s) kernel_1d(beta, r, s) ds`, or the
/// full line when `past` is `None`.
pub fn kernel_1d_inner(beta: f64, t: f64, r: f64, past: Option<f64>) -> f64 {
    if t <= 0.0 || r <= 0.0 {
        return 0.0;
    }
    let (lo, tail) = match past {
        Some(p) => (-p, 0.0),
        None => (-1.0, past_tail_product(beta, t, r, 1.0)),
    };
    let hi = t.min(r);
    let mut pts = vec![lo];
    pts.extend(geometric_past_points(lo).into_iter().rev());
    pts.push(0.0);
    pts.push(hi);
    pts.retain(|p| *p >= lo && *p <= hi);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let body = tanh_sinh_split(&pts, QUAD_TOL, |s, dl, dr| {
        // evaluate next to the breakpoints through the exact distances
        let s = if dl < dr { s.max(lo) } else { s.min(hi) };
        kernel_1d(beta, t, s) * kernel_1d(beta, r, s)
    });
    body + tail
}

/// Fraction of the squared kernel norm lost by cutting the past at `-past`.
pub fn tail_fraction(beta: &BetaVector, t: &[f64], past: f64) -> f64 {
    let mut kept = 1.0;
    for k in 0..beta.dim() {
        let total = kernel_1d_norm_sq(beta.get(k), t[k]);
        if total == 0.0 {
            return 0.0;
        }
        let tail = past_tail_product(beta.get(k), t[k], t[k], past);
        kept *= 1.0 - tail / total;
    }
    1.0 - kept
}

/// Past needed for a tail fraction of `tol`, from the large-past asymptotics
/// `tail ~ beta^2 t^2 T^(2 beta - 1) / ((1 - 2 beta) Gamma(beta + 1)^2)`.
pub fn required_past(beta: &BetaVector, t: &[f64], tol: f64) -> f64 {
    let d = beta.dim() as f64;
    (0..beta.dim())
        .map(|k| {
            let b = beta.get(k);
            if t[k] <= 0.0 {
                return 0.0;
            }
            let total = kernel_1d_norm_sq(b, t[k]);
            let c = b * b * t[k] * t[k] / ((1.0 - 2.0 * b) * tgamma(b + 1.0).powi(2));
            (tol / d * total / c).powf(1.0 / (2.0 * b - 1.0))
        })
        .fold(0.0, f64::max)
}

fn check_point(beta: &BetaVector, t: &[f64]) -> Result<()> {
    if t.len() != beta.dim() {
        return Err(Error::Shape(format!(
            "point has {} coordinates, beta has {}",
            t.len(),
            beta.dim()
        )));
    }
    if t.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(invalid(format!("field index must be componentwise >= 0, got {t:?}")));
    }
    Ok(())
}

fn check_past(beta: &BetaVector, t: &[f64], past: f64, tol: f64) -> Result<f64> {
    if !(past.is_finite() && past >= 0.0) {
        return Err(invalid(format!("past truncation must be >= 0, got {past}")));
    }
    let fraction = tail_fraction(beta, t, past);
    if fraction > tol {
        return Err(Error::PastTooShort {
            past,
            fraction,
            tolerance: tol,
            required: required_past(beta, t, tol),
        });
    }
    Ok(fraction)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldKernel {
    pub beta: BetaVector,
    pub t: Vec<f64>,
    pub past: f64,
    /// Cell averages of the kernel on the source grid (zero below `-past`).
    pub kernel: GridFunction,
    /// Neglected fraction of the squared `L^2` norm.
    pub tail_fraction: f64,
}

/// Kernel of `X_t` on `source_grid`, checking the past cut against `tail_tol`.
pub fn field_kernel(
    beta: &BetaVector,
    t: &[f64],
    source_grid: &GridSpec,
    past: f64,
    tail_tol: f64,
) -> Result<FieldKernel> {
    check_point(beta, t)?;
    if source_grid.dim() != beta.dim() {
        return Err(Error::Shape("source grid dimension differs from beta".into()));
    }
    let tail_fraction = check_past(beta, t, past, tail_tol)?;
    let per_axis: Vec<Vec<f64>> = (0..beta.dim())
        .map(|k| {
            (0..source_grid.cells_per_axis()[k])
                .map(|i| {
                    let a = source_grid.edge(k, i);
                    let b = source_grid.edge(k, i + 1);
                    let lo = a.max(-past);
                    kernel_1d_integral(beta.get(k), t[k], lo, b) / (b - a)
                })
                .collect()
        })
        .collect();
    let values = (0..source_grid.len())
        .map(|c| {
            source_grid
                .multi_index(c)
                .iter()
                .enumerate()
                .map(|(k, &i)| per_axis[k][i])
                .product()
        })
        .collect();
    Ok(FieldKernel {
        beta: beta.clone(),
        t: t.to_vec(),
        past,
        kernel: GridFunction::new(source_grid.clone(), values)?,
        tail_fraction,
    })
}

/// Noise kernel `lambda_t(u, y) = y prod_k (t_k - u_k)_+^(beta_k - 1) / Gamma(beta_k)`,
/// integrated exactly over each space cell.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseKernel {
    pub beta: BetaVector,
    pub t: Vec<f64>,
    /// Cell integrals, one per cell of the discretized `U`.
    pub values: Vec<f64>,
}

impl NoiseKernel {
    /// `<C_1, lambda_t>` with coefficients equal to the cell averages.
    pub fn chaos_vector(&self, space: std::sync::Arc<DiscreteU>) -> Result<ChaosVector> {
        let vol = space.base().cell_volume();
        let f: Vec<f64> = self.values.iter().map(|v| v / vol).collect();
        ChaosVector::first_order(space, &f)
    }
}

pub fn noise_kernel(beta: &BetaVector, t: &[f64], space: &DiscreteU) -> Result<NoiseKernel> {
    check_point(beta, t)?;
    let grid = space.base();
    if grid.dim() != beta.dim() {
        return Err(Error::Shape("discretized space dimension differs from beta".into()));
    }
    let per_axis: Vec<Vec<f64>> = (0..beta.dim())
        .map(|k| {
            (0..grid.cells_per_axis()[k])
                .map(|i| {
                    crate::fracops::cell_weight(
                        Direction::Plus,
                        beta.get(k),
                        t[k],
                        grid.edge(k, i),
                        grid.edge(k, i + 1),
                    )
                })
                .collect()
        })
        .collect();
    let nm = space.marks().len();
    let values = (0..space.len())
        .map(|c| {
            let (s, j) = (c / nm, c % nm);
            let spatial: f64 = grid
                .multi_index(s)
                .iter()
                .enumerate()
                .map(|(k, &i)| per_axis[k][i])
                .product();
            space.marks()[j].mark * spatial
        })
        .collect();
    Ok(NoiseKernel {
        beta: beta.clone(),
        t: t.to_vec(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub seed: u64,
}

/// Field values at `points` from one noise path:
/// `X_t = sum_j K(t, s_j) y_j - m1 * int_box K(t, s) ds`.
pub fn field_from_noise(noise: &NoiseRealization, beta: &BetaVector, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let grid = noise.grid();
    if grid.dim() != beta.dim() {
        return Err(Error::Shape("noise grid dimension differs from beta".into()));
    }
    let gammas: Vec<f64> = (0..beta.dim()).map(|k| tgamma(beta.get(k) + 1.0)).collect();
    points
        .iter()
        .map(|t| {
            check_point(beta, t)?;
            if t.contains(&0.0) {
                return Ok(0.0);
            }
            let mut sum = 0.0;
            for (s, y) in noise.jumps() {
                let mut k = y;
                for a in 0..beta.dim() {
                    if s[a] >= t[a] {
                        k = 0.0;
                        break;
                    }
                    k *= kernel_numerator(beta.get(a), t[a], s[a]) / gammas[a];
                }
                sum += k;
            }
            let comp: f64 = (0..beta.dim())
                .map(|a| kernel_1d_integral(beta.get(a), t[a], grid.lower()[a], grid.upper()[a]))
                .product();
            Ok(sum - noise.compensator_density() * comp)
        })
        .collect()
}

/// Samples `X_t` at all `points` from a single noise path on `source_grid`.
pub fn sample_field(
    model: &LevyModel,
    beta: &BetaVector,
    points: &[Vec<f64>],
    source_grid: &GridSpec,
    seed: u64,
) -> Result<FieldRealization> {
    for t in points {
        check_point(beta, t)?;
        for k in 0..beta.dim() {
            if t[k] > source_grid.upper()[k] {
                return Err(invalid(format!(
                    "evaluation point {t:?} lies beyond the source grid"
                )));
            }
        }
    }
    let noise = model.sample_noise_grid(source_grid, seed)?;
    Ok(FieldRealization {
        points: points.to_vec(),
        values: field_from_noise(&noise, beta, points)?,
        seed,
    })
}

/// `Cov(X_t, X_s) = m2 prod_k <K(t_k, .), K(s_k, .)>` over `[-past, inf)` per axis
/// (the whole line for `past = None`).
pub fn covariance_oracle(
    model: &LevyModel,
    beta: &BetaVector,
    t: &[f64],
    s: &[f64],
    past: Option<f64>,
) -> Result<f64> {
    check_point(beta, t)?;
    check_point(beta, s)?;
    let prod: f64 = (0..beta.dim())
        .map(|k| kernel_1d_inner(beta.get(k), t[k], s[k], past))
        .product();
    Ok(model.second_moment() * prod)
}

/// `Var(X_a - X_b)` under the same truncation.
pub fn increment_variance_oracle(
    model: &LevyModel,
    beta: &BetaVector,
    a: &[f64],
    b: &[f64],
    past: Option<f64>,
) -> Result<f64> {
    let aa = covariance_oracle(model, beta, a, a, past)?;
    let bb = covariance_oracle(model, beta, b, b, past)?;
    let ab = covariance_oracle(model, beta, a, b, past)?;
    Ok(aa + bb - 2.0 * ab)
}

fn check_xi(space: &DiscreteU, xi: &[f64]) -> Result<()> {
    if xi.len() != space.len() {
        return Err(Error::Shape(format!(
            "test function has {} entries, space has {} cells",
            xi.len(),
            space.len()
        )));
    }
    Ok(())
}

/// `S(X_t)(xi) = int int y xi(s, y) K(t, s) nu(dy) ds` with exact cell integrals of `K`.
pub fn s_transform_field(beta: &BetaVector, t: &[f64], xi: &[f64], space: &DiscreteU) -> Result<f64> {
    check_point(beta, t)?;
    check_xi(space, xi)?;
    let grid = space.base();
    let per_axis: Vec<Vec<f64>> = (0..beta.dim())
        .map(|k| {
            (0..grid.cells_per_axis()[k])
                .map(|i| kernel_1d_integral(beta.get(k), t[k], grid.edge(k, i), grid.edge(k, i + 1)))
                .collect()
        })
        .collect();
    let nm = space.marks().len();
    let mut total = 0.0;
    for (j, p) in space.marks().iter().enumerate() {
        let slice: Vec<f64> = (0..grid.len()).map(|c| xi[c * nm + j]).collect();
        total += p.weight * p.mark * crate::fracops::contract_separable(grid, &slice, &per_axis);
    }
    Ok(total)
}

/// The same S-transform through `int_[0,t] int y (I_+ xi(., y))(s) nu(dy) ds`,
/// with `I_+` from the cell-averaged fractional operator. `t` must lie on grid edges.
pub fn s_transform_field_by_parts(beta: &BetaVector, t: &[f64], xi: &[f64], space: &DiscreteU) -> Result<f64> {
    check_point(beta, t)?;
    check_xi(space, xi)?;
    let grid = space.base();
    let window = GridFunction::indicator(grid.clone(), &vec![0.0; beta.dim()], t)?;
    let nm = space.marks().len();
    let mut total = 0.0;
    for (j, p) in space.marks().iter().enumerate() {
        let slice: Vec<f64> = (0..grid.len()).map(|c| xi[c * nm + j]).collect();
        let plus = frac_integral_plus(&GridFunction::new(grid.clone(), slice)?, beta)?.values;
        total += p.weight * p.mark * window.inner(&plus)?;
    }
    Ok(total)
}

/// S-transform of the fractional noise at `t`: `int y (I_+ xi(., y))(t) nu(dy)`.
pub fn s_transform_noise(beta: &BetaVector, t: &[f64], xi: &[f64], space: &DiscreteU) -> Result<f64> {
    check_point(beta, t)?;
    check_xi(space, xi)?;
    let grid = space.base();
    let nm = space.marks().len();
    let mut total = 0.0;
    for (j, p) in space.marks().iter().enumerate() {
        let slice: Vec<f64> = (0..grid.len()).map(|c| xi[c * nm + j]).collect();
        let f = GridFunction::new(grid.clone(), slice)?;
        total += p.weight * p.mark * frac_integral_at(&f, beta, Direction::Plus, t)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::GaussLegendre;
    use std::sync::Arc;

    #[test]
    fn kernel_examples() {
        let v = kernel_1d(0.25, 1.0, 0.5);
        assert!((v - 0.5f64.powf(0.25) / tgamma(1.25)).abs() < 1e-15);
        assert!((v - 0.927_730).abs() < 1e-6);
        assert_eq!(kernel_1d(0.3, 0.0, -2.0), 0.0);
        assert_eq!(kernel_1d(0.3, 1.0, 1.0), 0.0);
        let b = BetaVector::new(vec![0.2, 0.4]).unwrap();
        let t = [1.3, 0.7];
        for s in [[-0.4, 0.2], [0.5, -3.0], [1.0, 0.1]] {
            let joint = kernel_value(&b, &t, &s);
            let split = kernel_1d(0.2, 1.3, s[0]) * kernel_1d(0.4, 0.7, s[1]);
            assert!((joint - split).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_corner_kernel_vanishes() {
        let b = BetaVector::new(vec![0.3, 0.2]).unwrap();
        let g = GridSpec::cube(2, -4.0, 2.0, 12).unwrap();
        let k = field_kernel(&b, &[0.0, 1.0], &g, 4.0, 1.0).unwrap();
        assert!(k.kernel.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn closed_form_norm_matches_quadrature() {
        for beta in [0.1, 0.3, 0.45] {
            for t in [0.5, 1.0, 2.0] {
                let q = kernel_1d_inner(beta, t, t, None);
                let c = kernel_1d_norm_sq(beta, t);
                assert!((q - c).abs() < 1e-8 * c, "beta {beta} t {t}: {q} vs {c}");
            }
        }
    }

    #[test]
    fn cross_products_follow_stationary_increments() {
        // <K_t, K_s> = (|t|^2H + |s|^2H - |t - s|^2H) c / 2 with H = beta + 1/2
        let beta = 0.3;
        let c = kernel_1d_norm_sq(beta, 1.0);
        let h2 = 2.0 * beta + 1.0;
        let (t, s): (f64, f64) = (1.7, 0.6);
        let want = 0.5 * c * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2));
        let got = kernel_1d_inner(beta, t, s, None);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn truncated_inner_product_against_gauss_legendre() {
        let (beta, t, s, past) = (0.35, 1.2, 0.8, 30.0);
        // oracle removes the endpoint singularities with s = 0 - w^(1/beta) style maps
        let rule = GaussLegendre::new(40);
        let f = |u: f64| kernel_1d(beta, t, u) * kernel_1d(beta, s, u);
        let mut total = 0.0;
        // [-past, -1] smooth
        total += rule.composite(-past, -1.0, 200, f);
        // [-1, 0]: singular at 0, substitute u = -(w^(1/beta))
        total += rule.composite(0.0, 1.0, 200, |w| {
            let u = -w.powf(1.0 / beta);
            f(u) * w.powf(1.0 / beta - 1.0) / beta
        });
        // [0, s]: singular at s; u = s - w^(1/beta)
        let top = s.powf(beta);
        total += rule.composite(0.0, top, 200, |w| {
            let u = s - w.powf(1.0 / beta);
            f(u) * w.powf(1.0 / beta - 1.0) / beta
        });
        let got = kernel_1d_inner(beta, t, s, Some(past));
        assert!((got - total).abs() < 1e-8, "{got} vs {total}");
    }

    #[test]
    fn default_tail_tolerance_demands_long_past() {
        let b = BetaVector::new(vec![0.3]).unwrap();
        let g = GridSpec::interval(-10.0, 1.0, 11).unwrap();
        let err = field_kernel(&b, &[1.0], &g, 10.0, DEFAULT_TAIL_TOLERANCE).unwrap_err();
        match err {
            Error::PastTooShort { required, fraction, .. } => {
                assert!(fraction > DEFAULT_TAIL_TOLERANCE);
                assert!(required > 1e7);
                let f = tail_fraction(&b, &[1.0], required);
                assert!(f < 1.2 * DEFAULT_TAIL_TOLERANCE && f > 0.8 * DEFAULT_TAIL_TOLERANCE, "{f}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn kernel_cell_averages() {
        let b = BetaVector::new(vec![0.25]).unwrap();
        let g = GridSpec::interval(-2.0, 2.0, 400).unwrap();
        let k = field_kernel(&b, &[1.0], &g, 2.0, 1.0).unwrap();
        let i = g.locate(&[0.5]).unwrap();
        let mid = k.kernel.values()[i];
        let exact = GaussLegendre::new(20).integrate(g.edge(0, i), g.edge(0, i + 1), |s| kernel_1d(0.25, 1.0, s)) / g.width(0);
        assert!((mid - exact).abs() < 1e-12);
        assert!(k.kernel.values()[g.locate(&[1.5]).unwrap()] == 0.0);
    }

    #[test]
    fn noise_kernel_cell_integral() {
        let b = BetaVector::new(vec![0.45]).unwrap();
        let g = GridSpec::interval(0.0, 2.0, 4).unwrap();
        let sp = DiscreteU::from_parts(g, vec![(2.0, 1.0)]).unwrap();
        let nk = noise_kernel(&b, &[1.0], &sp).unwrap();
        let want = 2.0 * 0.5f64.powf(0.45) / tgamma(1.45);
        assert!((nk.values[1] - want).abs() < 1e-14);
        let want = 2.0 * (1.0 - 0.5f64.powf(0.45)) / tgamma(1.45);
        assert!((nk.values[0] - want).abs() < 1e-14);
        assert_eq!(nk.values[2], 0.0);
        assert_eq!(nk.values[3], 0.0);
        let op = BetaVector::for_operator(vec![0.5]).unwrap();
        let sp = DiscreteU::from_parts(GridSpec::interval(0.0, 1.0, 2).unwrap(), vec![(2.0, 1.0)]).unwrap();
        let nk = noise_kernel(&op, &[1.0], &sp).unwrap();
        let want = 2.0 * (1.0 - 0.5f64.sqrt()) / tgamma(1.5);
        assert!((nk.values[0] - want).abs() < 1e-14);
        assert!((nk.values[0] - 0.660_989).abs() < 1e-6);
    }

    #[test]
    fn s_transform_routes_agree() {
        let m = LevyModel::finite_activity(1.5, vec![(1.0, 0.6), (-0.5, 0.4)], 0.0).unwrap();
        let g = GridSpec::interval(-1.0, 3.0, 512).unwrap();
        let sp = Arc::new(DiscreteU::new(g.clone(), &m).unwrap());
        let b = BetaVector::new(vec![0.3]).unwrap();
        let xi: Vec<f64> = (0..sp.len())
            .map(|c| {
                let (s, j) = sp.split(c);
                let x = g.center(0, s);
                (-(x - 0.8).powi(2)).exp() * if j == 0 { 1.0 } else { -0.7 }
            })
            .collect();
        let t = [1.5];
        let direct = s_transform_field(&b, &t, &xi, &sp).unwrap();
        let by_parts = s_transform_field_by_parts(&b, &t, &xi, &sp).unwrap();
        assert!((direct - by_parts).abs() < 1e-6, "{direct} vs {by_parts}");

        let nk = noise_kernel(&b, &t, &sp).unwrap();
        let via_chaos = nk.chaos_vector(sp.clone()).unwrap().s_transform(&xi).unwrap();
        let via_fracops = s_transform_noise(&b, &t, &xi, &sp).unwrap();
        assert!((via_chaos - via_fracops).abs() < 1e-12);
    }

    #[test]
    fn symmetric_marks_cancel() {
        let m = LevyModel::finite_activity(2.0, vec![(1.0, 0.5), (-1.0, 0.5)], 0.0).unwrap();
        let g = GridSpec::interval(-1.0, 2.0, 30).unwrap();
        let sp = DiscreteU::new(g.clone(), &m).unwrap();
        let b = BetaVector::new(vec![0.2]).unwrap();
        let xi: Vec<f64> = (0..sp.len()).map(|c| (g.center(0, sp.split(c).0)).sin()).collect();
        assert!(s_transform_field(&b, &[1.0], &xi, &sp).unwrap().abs() < 1e-15);
        assert_eq!(s_transform_field(&b, &[1.0], &vec![0.0; sp.len()], &sp).unwrap(), 0.0);
    }

    #[test]
    fn finite_difference_recovers_noise_transform() {
        let m = LevyModel::single_jump(1.0, 1.0).unwrap();
        let g = GridSpec::interval(-2.0, 2.0, 64).unwrap();
        let sp = DiscreteU::new(g.clone(), &m).unwrap();
        let b = BetaVector::new(vec![0.3]).unwrap();
        let xi: Vec<f64> = (0..sp.len()).map(|c| 1.0 + 0.5 * g.center(0, c).cos()).collect();
        // off the grid edges the operator output is smooth near t
        let t = 1.03;
        let exact = s_transform_noise(&b, &[t], &xi, &sp).unwrap();
        let errs: Vec<f64> = [4e-3, 2e-3, 1e-3]
            .iter()
            .map(|h| {
                let fd = (s_transform_field(&b, &[t + h], &xi, &sp).unwrap()
                    - s_transform_field(&b, &[t], &xi, &sp).unwrap())
                    / h;
                (fd - exact).abs()
            })
            .collect();
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order >= 0.3 - 1e-9, "observed order {order}, errors {errs:?}");
    }

    #[test]
    fn sampled_field_edge_cases() {
        let b = BetaVector::new(vec![0.3, 0.2]).unwrap();
        let g = GridSpec::cube(2, -3.0, 1.0, 4).unwrap();
        let m = LevyModel::single_jump(2.0, 1.0).unwrap();
        let r = sample_field(&m, &b, &[vec![0.0, 0.5], vec![0.5, 0.7]], &g, 3).unwrap();
        assert_eq!(r.values[0], 0.0);
        assert!(r.values[1] != 0.0);
        let zero = LevyModel::single_jump(0.0, 1.0).unwrap();
        let r = sample_field(&zero, &b, &[vec![0.3, 0.5], vec![1.0, 1.0]], &g, 3).unwrap();
        assert!(r.values.iter().all(|v| *v == 0.0));
        assert!(sample_field(&m, &b, &[vec![2.0, 0.5]], &g, 3).is_err());
    }

    #[test]
    fn oracle_symmetry_and_scaling() {
        let m = LevyModel::single_jump(2.0, 1.0).unwrap();
        let b = BetaVector::new(vec![0.3]).unwrap();
        let a = covariance_oracle(&m, &b, &[1.3], &[0.4], Some(50.0)).unwrap();
        let c = covariance_oracle(&m, &b, &[0.4], &[1.3], Some(50.0)).unwrap();
        assert_eq!(a, c);
        assert_eq!(covariance_oracle(&m, &b, &[0.0], &[0.4], None).unwrap(), 0.0);
        let v1 = covariance_oracle(&m, &b, &[1.0], &[1.0], None).unwrap();
        let v2 = covariance_oracle(&m, &b, &[2.0], &[2.0], None).unwrap();
        assert!((v2 / v1 - 2f64.powf(1.6)).abs() < 1e-6);
    }
}
