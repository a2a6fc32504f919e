//! Stochastic Poisson and heat equations driven by fractional Lévy noise.
//!
//! Spatial discretization is the standard `(2d+1)`-point Laplacian on a
//! uniform box with homogeneous Dirichlet data, diagonalized by the discrete
//! sine transform. The noise enters through exact control-cell averages of
//! the fractional noise kernel, computed from the jump list of a
//! [`NoiseRealization`](crate::levy::NoiseRealization).

pub mod conditions;
pub mod green;
pub mod heat;
pub mod picard;
pub mod poisson;

use libm::tgamma;

use crate::error::{invalid, Error, Result};
use crate::levy::NoiseRealization;

pub use conditions::{heat_l2_condition, picard_condition};
pub use green::{green_dirichlet, green_heat, GreenKind, GreenOperator};
pub use heat::{
    explicit_step_limit, solve_heat, solve_heat_deterministic, solve_heat_with, HeatPointFunctional, HeatScheme,
};
pub use picard::{
    lipschitz_check, quasilinear_noise_grid, solve_quasilinear, solve_quasilinear_with_noise, truncated_domain,
    truncation_half_width, IterationReport, LipschitzReport, Nonlinearity, PicardOptions, PICARD_WARNING,
};
pub use poisson::{solve_poisson, solve_poisson_rhs};

pub const MIN_CELLS: usize = 8;

/// Rectangular domain with `cells[k]` intervals per axis and an optional time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cells: Vec<usize>,
    pub horizon: f64,
    pub steps: usize,
}

impl DomainSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        let d = lower.len();
        if d == 0 || upper.len() != d || cells.len() != d {
            return Err(Error::Shape("domain bounds and cells must share one dimension >= 1".into()));
        }
        for k in 0..d {
            if !(lower[k].is_finite() && upper[k].is_finite() && lower[k] < upper[k]) {
                return Err(invalid(format!("domain axis {k}: need lower < upper")));
            }
            if cells[k] < MIN_CELLS {
                return Err(invalid(format!(
                    "domain axis {k}: resolution {} below the minimum of {MIN_CELLS} cells",
                    cells[k]
                )));
            }
        }
        Ok(Self {
            lower,
            upper,
            cells,
            horizon: 0.0,
            steps: 0,
        })
    }

    pub fn unit_cube(d: usize, n: usize) -> Result<Self> {
        Self::new(vec![0.0; d], vec![1.0; d], vec![n; d])
    }

    pub fn with_time(mut self, horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(invalid(format!("time horizon must be >= 0, got {horizon}")));
        }
        if steps == 0 && horizon > 0.0 {
            return Err(invalid("time steps must be >= 1"));
        }
        self.horizon = horizon;
        self.steps = steps;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn h(&self, k: usize) -> f64 {
        (self.upper[k] - self.lower[k]) / self.cells[k] as f64
    }

    pub fn dt(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.horizon / self.steps as f64
        }
    }

    /// Node `i` (0..=n) along axis `k`.
    pub fn node(&self, k: usize, i: usize) -> f64 {
        if i == self.cells[k] {
            self.upper[k]
        } else {
            self.lower[k] + i as f64 * self.h(k)
        }
    }

    pub fn nodes(&self, k: usize) -> Vec<f64> {
        (0..=self.cells[k]).map(|i| self.node(k, i)).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps)
            .map(|m| {
                if m == self.steps {
                    self.horizon
                } else {
                    m as f64 * self.dt()
                }
            })
            .collect()
    }

    /// Interior node counts `n_k - 1`.
    pub fn interior_shape(&self) -> Vec<usize> {
        self.cells.iter().map(|n| n - 1).collect()
    }

    pub fn interior_len(&self) -> usize {
        self.interior_shape().iter().product()
    }

    pub fn full_shape(&self) -> Vec<usize> {
        self.cells.iter().map(|n| n + 1).collect()
    }

    pub fn full_len(&self) -> usize {
        self.full_shape().iter().product()
    }

    /// Control cells `[x_i - h/2, x_i + h/2]` of the interior nodes along axis `k`.
    pub fn control_cells(&self, k: usize) -> Vec<(f64, f64)> {
        let h = self.h(k);
        (1..self.cells[k])
            .map(|i| {
                let x = self.node(k, i);
                (x - 0.5 * h, x + 0.5 * h)
            })
            .collect()
    }

    pub fn time_cells(&self) -> Vec<(f64, f64)> {
        let t = self.times();
        t.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Embeds interior values into the full node array with zero boundary.
    pub fn embed(&self, interior: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let ishape = self.interior_shape();
        let fshape = self.full_shape();
        let mut out = vec![0.0; self.full_len()];
        let mut idx = vec![0usize; d];
        for (c, v) in interior.iter().enumerate() {
            let mut rem = c;
            for k in (0..d).rev() {
                idx[k] = rem % ishape[k] + 1;
                rem /= ishape[k];
            }
            let f = idx.iter().zip(&fshape).fold(0, |acc, (&i, &n)| acc * n + i);
            out[f] = *v;
        }
        out
    }

    /// Flat index of the full-grid node closest to `x`.
    pub fn nearest_node(&self, x: &[f64]) -> Vec<usize> {
        (0..self.dim())
            .map(|k| {
                let i = ((x[k] - self.lower[k]) / self.h(k)).round();
                i.clamp(0.0, self.cells[k] as f64) as usize
            })
            .collect()
    }

    pub fn full_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(self.full_shape())
            .fold(0, |acc, (&i, n)| acc * n + i)
    }
}

/// Orthonormal discrete sine transforms for each axis of a box.
#[derive(Debug, Clone)]
pub(crate) struct SineBasis {
    /// Per axis: `(n-1) x (n-1)` matrix `sqrt(2/n) sin(pi k i / n)`, row `k-1`, column `i-1`.
    mats: Vec<Vec<f64>>,
    shape: Vec<usize>,
    /// Per axis eigenvalues of the negative 3-point Laplacian.
    pub eig: Vec<Vec<f64>>,
}

impl SineBasis {
    pub fn new(domain: &DomainSpec) -> Self {
        let mut mats = Vec::new();
        let mut eig = Vec::new();
        for k in 0..domain.dim() {
            let n = domain.cells[k];
            let h = domain.h(k);
            let m = n - 1;
            let norm = (2.0 / n as f64).sqrt();
            let mut mat = vec![0.0; m * m];
            for a in 0..m {
                for b in 0..m {
                    // reduce the argument to keep sin accurate
                    let p = ((a + 1) * (b + 1)) % (2 * n);
                    mat[a * m + b] = norm * (std::f64::consts::PI * p as f64 / n as f64).sin();
                }
            }
            mats.push(mat);
            eig.push(
                (1..n)
                    .map(|j| {
                        let s = (std::f64::consts::PI * j as f64 / (2.0 * n as f64)).sin();
                        4.0 * s * s / (h * h)
                    })
                    .collect(),
            );
        }
        Self {
            mats,
            shape: domain.interior_shape(),
            eig,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    /// The transform is symmetric and orthogonal, so it is its own inverse.
    pub fn transform(&self, values: &mut [f64]) {
        let mut line = Vec::new();
        for (axis, mat) in self.mats.iter().enumerate() {
            let n = self.shape[axis];
            let stride: usize = self.shape[axis + 1..].iter().product();
            let outer: usize = self.shape[..axis].iter().product();
            line.resize(n, 0.0);
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * n * stride + s;
                    for i in 0..n {
                        line[i] = values[base + i * stride];
                    }
                    for a in 0..n {
                        let row = &mat[a * n..(a + 1) * n];
                        values[base + a * stride] = row.iter().zip(&line).map(|(x, y)| x * y).sum();
                    }
                }
            }
        }
    }

    /// Eigenvalue `sum_k mu_k` of the negative Laplacian for every mode, row-major.
    pub fn mode_eigenvalues(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        let d = self.shape.len();
        for (c, v) in out.iter_mut().enumerate() {
            let mut rem = c;
            for k in (0..d).rev() {
                *v += self.eig[k][rem % self.shape[k]];
                rem /= self.shape[k];
            }
        }
        out
    }

    /// Basis vector `k` (1-based mode index) along `axis`, evaluated at interior node `i` (1-based).
    pub fn entry(&self, axis: usize, k: usize, i: usize) -> f64 {
        let n = self.shape[axis];
        self.mats[axis][(k - 1) * n + (i - 1)]
    }
}

/// Discrete `-Delta_h u` at interior nodes for interior values `u`.
pub(crate) fn neg_laplacian(domain: &DomainSpec, u: &[f64]) -> Vec<f64> {
    let shape = domain.interior_shape();
    let d = shape.len();
    let mut out = vec![0.0; u.len()];
    let strides: Vec<usize> = (0..d).map(|k| shape[k + 1..].iter().product()).collect();
    for (c, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        let mut rem = c;
        let mut idx = vec![0usize; d];
        for k in (0..d).rev() {
            idx[k] = rem % shape[k];
            rem /= shape[k];
        }
        for k in 0..d {
            let h2 = domain.h(k).powi(2);
            let left = if idx[k] > 0 { u[c - strides[k]] } else { 0.0 };
            let right = if idx[k] + 1 < shape[k] { u[c + strides[k]] } else { 0.0 };
            acc += (2.0 * u[c] - left - right) / h2;
        }
        *o = acc;
    }
    out
}

/// Average over target cell `[a, b]` of `(x - s)_+^(beta-1) / Gamma(beta)`.
#[inline]
pub(crate) fn cell_kernel_average(beta: f64, gamma1: f64, s: f64, a: f64, b: f64) -> f64 {
    if s >= b {
        return 0.0;
    }
    let hi = (b - s).powf(beta);
    let lo = if s < a { (a - s).powf(beta) } else { 0.0 };
    (hi - lo) / (gamma1 * (b - a))
}

/// Per-axis target cells and exponents for assembling fractional forcing.
pub(crate) struct ForcingAxes<'a> {
    pub betas: &'a [f64],
    pub cells: Vec<Vec<(f64, f64)>>,
}

/// Target-cell averages of the fractional noise
/// `sum_j y_j prod_k v_k(s_jk) - m1 prod_k comp_k` on the tensor product of target cells.
pub(crate) fn fractional_forcing(noise: &NoiseRealization, axes: &ForcingAxes) -> Result<Vec<f64>> {
    let grid = noise.grid();
    let d = axes.betas.len();
    if grid.dim() != d || axes.cells.len() != d {
        return Err(Error::Shape(format!(
            "noise grid has dimension {}, forcing expects {d}",
            grid.dim()
        )));
    }
    for k in 0..d {
        let top = axes.cells[k].last().map(|c| c.1).unwrap_or(0.0);
        let bottom = axes.cells[k].first().map(|c| c.0).unwrap_or(0.0);
        if grid.upper()[k] < top - 1e-12 || grid.lower()[k] > bottom + 1e-12 {
            return Err(invalid(format!(
                "noise grid axis {k} [{}, {}] does not cover the target cells [{bottom}, {top}]",
                grid.lower()[k],
                grid.upper()[k]
            )));
        }
    }
    let shape: Vec<usize> = axes.cells.iter().map(|c| c.len()).collect();
    let total: usize = shape.iter().product();
    let gammas: Vec<f64> = axes.betas.iter().map(|b| tgamma(b + 1.0)).collect();
    let gammas2: Vec<f64> = axes.betas.iter().map(|b| tgamma(b + 2.0)).collect();
    let mut out = vec![0.0; total];
    let mut factors: Vec<Vec<f64>> = shape.iter().map(|&n| vec![0.0; n]).collect();

    let add_outer = |factors: &[Vec<f64>], scale: f64, out: &mut [f64]| {
        // first nonzero index per axis, so cells left of the jump are skipped
        let starts: Vec<usize> = factors
            .iter()
            .map(|f| f.iter().position(|v| *v != 0.0).unwrap_or(f.len()))
            .collect();
        if starts.iter().zip(&shape).any(|(s, n)| s >= n) {
            return;
        }
        accumulate(out, &shape, factors, &starts, scale);
    };

    for (s, y) in noise.jumps() {
        for k in 0..d {
            for (i, &(a, b)) in axes.cells[k].iter().enumerate() {
                factors[k][i] = cell_kernel_average(axes.betas[k], gammas[k], s[k], a, b);
            }
        }
        add_outer(&factors, y, &mut out);
    }
    let m1 = noise.compensator_density();
    if m1 != 0.0 {
        for k in 0..d {
            let l = grid.lower()[k];
            let bk = axes.betas[k];
            for (i, &(a, b)) in axes.cells[k].iter().enumerate() {
                factors[k][i] = ((b - l).max(0.0).powf(bk + 1.0) - (a - l).max(0.0).powf(bk + 1.0))
                    / (gammas2[k] * (b - a));
            }
        }
        add_outer(&factors, -m1, &mut out);
    }
    Ok(out)
}

fn accumulate(out: &mut [f64], shape: &[usize], factors: &[Vec<f64>], starts: &[usize], scale: f64) {
    let d = shape.len();
    if d == 1 {
        for i in starts[0]..shape[0] {
            out[i] += scale * factors[0][i];
        }
        return;
    }
    let inner: usize = shape[1..].iter().product();
    for i in starts[0]..shape[0] {
        let f = factors[0][i];
        if f == 0.0 {
            continue;
        }
        accumulate(
            &mut out[i * inner..(i + 1) * inner],
            &shape[1..],
            &factors[1..],
            &starts[1..],
            scale * f,
        );
    }
}

/// Solution values on the full node grid (boundary included).
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub domain: DomainSpec,
    /// Time levels; empty for stationary problems.
    pub times: Vec<f64>,
    /// Row-major node values, time-major when `times` is non-empty.
    pub values: Vec<f64>,
    /// Sup-norm of the discrete equation residual, when computed.
    pub residual: Option<f64>,
    pub seed: Option<u64>,
    pub ensemble: Option<Ensemble>,
}

/// Pointwise sample statistics over replicas sharing one layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub replicas: usize,
    pub variance: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl SolutionField {
    pub(crate) fn new(domain: DomainSpec, times: Vec<f64>, values: Vec<f64>) -> Self {
        Self {
            domain,
            times,
            values,
            residual: None,
            seed: None,
            ensemble: None,
        }
    }

    /// Mean field with pointwise variance and standard error of the mean.
    pub fn ensemble_of(fields: &[SolutionField]) -> Result<SolutionField> {
        let first = fields
            .first()
            .ok_or_else(|| Error::InsufficientData("empty ensemble".into()))?;
        let n = fields.len();
        let len = first.values.len();
        if fields.iter().any(|f| f.values.len() != len) {
            return Err(Error::Shape("ensemble members differ in layout".into()));
        }
        let mut mean = vec![0.0; len];
        for f in fields {
            for (m, v) in mean.iter_mut().zip(&f.values) {
                *m += v / n as f64;
            }
        }
        let mut variance = vec![0.0; len];
        if n > 1 {
            for f in fields {
                for ((s, v), m) in variance.iter_mut().zip(&f.values).zip(&mean) {
                    *s += (v - m).powi(2) / (n - 1) as f64;
                }
            }
        }
        let stderr = variance.iter().map(|v| (v / n as f64).sqrt()).collect();
        let mut out = SolutionField::new(first.domain.clone(), first.times.clone(), mean);
        out.ensemble = Some(Ensemble {
            replicas: n,
            variance,
            stderr,
        });
        Ok(out)
    }

    pub fn slice(&self, m: usize) -> &[f64] {
        let n = self.domain.full_len();
        &self.values[m * n..(m + 1) * n]
    }

    pub fn last_slice(&self) -> &[f64] {
        let levels = self.times.len().max(1);
        self.slice(levels - 1)
    }

    /// Value at the node nearest to `x` in slice `m`.
    pub fn value_near(&self, m: usize, x: &[f64]) -> f64 {
        let idx = self.domain.nearest_node(x);
        self.slice(m)[self.domain.full_index(&idx)]
    }

    pub fn max_abs_diff(&self, other: &SolutionField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::levy::LevyModel;

    #[test]
    fn domain_validation() {
        assert!(DomainSpec::unit_cube(1, 7).is_err());
        assert!(DomainSpec::unit_cube(2, 8).is_ok());
        assert!(DomainSpec::new(vec![1.0], vec![0.0], vec![8]).is_err());
    }

    #[test]
    fn sine_transform_is_orthogonal_and_diagonalizes() {
        let dom = DomainSpec::new(vec![0.0, 0.0], vec![1.0, 2.0], vec![9, 12]).unwrap();
        let basis = SineBasis::new(&dom);
        let u: Vec<f64> = (0..basis.len()).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.1).collect();
        let mut w = u.clone();
        basis.transform(&mut w);
        basis.transform(&mut w);
        for (a, b) in u.iter().zip(&w) {
            assert!((a - b).abs() < 1e-13);
        }
        let lap = neg_laplacian(&dom, &u);
        let mut uh = u.clone();
        basis.transform(&mut uh);
        let eig = basis.mode_eigenvalues();
        let mut lh: Vec<f64> = uh.iter().zip(&eig).map(|(a, e)| a * e).collect();
        basis.transform(&mut lh);
        for (a, b) in lap.iter().zip(&lh) {
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn forcing_rejects_uncovered_targets() {
        let g = GridSpec::interval(-2.0, 1.0, 3).unwrap();
        let m = LevyModel::single_jump(0.0, 1.0).unwrap();
        let zero = m.sample_noise_grid(&g, 1).unwrap();
        let dom = DomainSpec::unit_cube(1, 8).unwrap();
        let axes = ForcingAxes {
            betas: &[0.3],
            cells: vec![dom.control_cells(0)],
        };
        assert!(fractional_forcing(&zero, &axes).unwrap().iter().all(|v| *v == 0.0));
        assert!(fractional_forcing(
            &LevyModel::single_jump(1.0, 1.0).unwrap().sample_noise_grid(&GridSpec::interval(0.2, 1.0, 2).unwrap(), 1).unwrap(),
            &axes
        )
        .is_err());
    }

    #[test]
    fn forcing_is_mean_zero_over_replicas() {
        // compensation: E[forcing] = 0 cell by cell
        let m = LevyModel::single_jump(3.0, 1.0).unwrap();
        let g = GridSpec::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![1, 1]).unwrap();
        let dom = DomainSpec::unit_cube(2, 8).unwrap();
        let axes = ForcingAxes {
            betas: &[0.2, 0.4],
            cells: vec![dom.control_cells(0), dom.control_cells(1)],
        };
        let n = 4000;
        let mut sum = vec![0.0; 49];
        let mut sq = vec![0.0; 49];
        for i in 0..n {
            let f = fractional_forcing(&m.sample_noise_grid(&g, crate::seed::derive_seed(5, i)).unwrap(), &axes).unwrap();
            for c in 0..49 {
                sum[c] += f[c];
                sq[c] += f[c] * f[c];
            }
        }
        for c in [0, 24, 48] {
            let mean = sum[c] / n as f64;
            let sd = (sq[c] / n as f64 - mean * mean).sqrt();
            assert!(mean.abs() < 4.0 * sd / (n as f64).sqrt(), "cell {c}: {mean} sd {sd}");
        }
    }
}
