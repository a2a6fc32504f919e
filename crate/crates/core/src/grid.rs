//! Rectangular cell lattices and piecewise-constant functions on them.
//!
//! Cells are half-open boxes `[low, high)` laid out in row-major order: the
//! last axis varies fastest in the flat index.

use crate::error::{invalid, Error, Result};

/// Largest number of cells a single grid may hold.
pub const MAX_CELLS: usize = 1 << 28;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        let d = lower.len();
        if d == 0 {
            return Err(invalid("grid dimension must be at least 1"));
        }
        if upper.len() != d || cells.len() != d {
            return Err(Error::Shape(format!(
                "grid bounds/cells lengths differ: {} / {} / {}",
                d,
                upper.len(),
                cells.len()
            )));
        }
        for k in 0..d {
            if !(lower[k].is_finite() && upper[k].is_finite() && lower[k] < upper[k]) {
                return Err(invalid(format!(
                    "grid axis {k}: need finite lower < upper, got [{}, {}]",
                    lower[k], upper[k]
                )));
            }
            if cells[k] == 0 {
                return Err(invalid(format!("grid axis {k}: cells_per_axis must be >= 1")));
            }
        }
        let total = cells
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .filter(|&t| t <= MAX_CELLS)
            .ok_or_else(|| invalid("grid cell count exceeds addressable limit"))?;
        debug_assert!(total > 0);
        Ok(Self { lower, upper, cells })
    }

    /// One-dimensional grid on `[lo, hi)` with `n` cells.
    pub fn interval(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![lo], vec![hi], vec![n])
    }

    /// Cube `[lo, hi)^d` with `n` cells per axis.
    pub fn cube(d: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d], vec![n; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn width(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.cells[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.width(k)).product()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim())
            .map(|k| self.upper[k] - self.lower[k])
            .product()
    }

    /// Edge `i` (0..=n) along `axis`.
    pub fn edge(&self, axis: usize, i: usize) -> f64 {
        if i == self.cells[axis] {
            self.upper[axis]
        } else {
            self.lower[axis] + i as f64 * self.width(axis)
        }
    }

    pub fn edges(&self, axis: usize) -> Vec<f64> {
        (0..=self.cells[axis]).map(|i| self.edge(axis, i)).collect()
    }

    pub fn center(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + (i as f64 + 0.5) * self.width(axis)
    }

    pub fn strides(&self) -> Vec<usize> {
        let d = self.dim();
        let mut s = vec![1; d];
        for k in (0..d.saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.cells[k + 1];
        }
        s
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.cells)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let d = self.dim();
        let mut idx = vec![0; d];
        for k in (0..d).rev() {
            idx[k] = flat % self.cells[k];
            flat /= self.cells[k];
        }
        idx
    }

    /// Cell containing `x` under half-open `[low, high)` assignment, if inside the box.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0;
        for k in 0..self.dim() {
            if !(x[k] >= self.lower[k] && x[k] < self.upper[k]) {
                return None;
            }
            let mut i = ((x[k] - self.lower[k]) / self.width(k)).floor() as usize;
            if i >= self.cells[k] {
                i = self.cells[k] - 1;
            }
            flat = flat * self.cells[k] + i;
        }
        Some(flat)
    }

    pub fn cell_centers(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.center(k, i))
            .collect()
    }

    pub fn contains_box(&self, lower: &[f64], upper: &[f64]) -> bool {
        (0..self.dim()).all(|k| self.lower[k] <= lower[k] && upper[k] <= self.upper[k])
    }
}

/// Cell-averaged real function on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: GridSpec,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "grid has {} cells but {} values were given",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("grid function value {i} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Samples `f` at cell centers.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: GridSpec, f: F) -> Result<Self> {
        let values = (0..grid.len()).map(|c| f(&grid.cell_centers(c))).collect();
        Self::new(grid, values)
    }

    /// Exact cell averages of `1_box`.
    pub fn indicator(grid: GridSpec, lower: &[f64], upper: &[f64]) -> Result<Self> {
        let d = grid.dim();
        if lower.len() != d || upper.len() != d {
            return Err(Error::Shape("indicator box dimension".into()));
        }
        let per_axis: Vec<Vec<f64>> = (0..d)
            .map(|k| {
                let h = grid.width(k);
                (0..grid.cells_per_axis()[k])
                    .map(|i| {
                        let a = grid.edge(k, i).max(lower[k]);
                        let b = grid.edge(k, i + 1).min(upper[k]);
                        ((b - a) / h).max(0.0)
                    })
                    .collect()
            })
            .collect();
        let values = (0..grid.len())
            .map(|c| {
                grid.multi_index(c)
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| per_axis[k][i])
                    .product()
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    /// `a * self + b * other` on a shared grid.
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Shape("grid functions live on different grids".into()));
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    /// Cell-quadrature integral `sum_c vol * f_c`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    /// `int f g` with the same cell quadrature.
    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Shape("grid functions live on different grids".into()));
        }
        Ok(self.grid.cell_volume()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x * y)
                .sum::<f64>())
    }

    /// Reflection `x -> -x`, mapping the grid `[l, u)` onto `[-u, -l)`.
    pub fn reflected(&self) -> Self {
        let d = self.grid.dim();
        let lower: Vec<f64> = self.grid.upper().iter().map(|u| -u).collect();
        let upper: Vec<f64> = self.grid.lower().iter().map(|l| -l).collect();
        let grid = GridSpec::new(lower, upper, self.grid.cells_per_axis().to_vec())
            .expect("reflection of a valid grid is valid");
        let values = (0..grid.len())
            .map(|c| {
                let idx: Vec<usize> = self
                    .grid
                    .multi_index(c)
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| self.grid.cells_per_axis()[k] - 1 - i)
                    .collect();
                debug_assert_eq!(idx.len(), d);
                self.values[self.grid.flat_index(&idx)]
            })
            .collect();
        Self { grid, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(GridSpec::new(vec![1.0], vec![1.0], vec![4]).is_err());
        assert!(GridSpec::new(vec![0.0], vec![1.0], vec![0]).is_err());
        assert!(GridSpec::new(vec![0.0, 0.0], vec![1.0], vec![4, 4]).is_err());
        assert!(GridSpec::new(vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn half_open_cell_assignment() {
        let g = GridSpec::interval(0.0, 1.0, 4).unwrap();
        assert_eq!(g.locate(&[0.0]), Some(0));
        assert_eq!(g.locate(&[0.25]), Some(1));
        assert_eq!(g.locate(&[0.999_999]), Some(3));
        assert_eq!(g.locate(&[1.0]), None);
        assert_eq!(g.locate(&[-1e-12]), None);
    }

    #[test]
    fn flat_and_multi_index_agree() {
        let g = GridSpec::new(vec![0.0; 3], vec![1.0; 3], vec![2, 3, 5]).unwrap();
        for c in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(c)), c);
        }
        assert_eq!(g.strides(), vec![15, 5, 1]);
    }

    #[test]
    fn indicator_is_exact_on_partial_cells() {
        let g = GridSpec::interval(0.0, 1.0, 4).unwrap();
        let f = GridFunction::indicator(g, &[0.1], &[0.6]).unwrap();
        let expect = [0.6, 1.0, 0.4, 0.0];
        for (v, e) in f.values().iter().zip(expect) {
            assert!((v - e).abs() < 1e-12);
        }
        assert!((f.integral() - 0.5).abs() < 1e-12);
    }
}
