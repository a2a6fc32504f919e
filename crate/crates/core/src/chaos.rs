//! Truncated Charlier chaos algebra on a discretized `U = R^d x R_0`.
//!
//! A [`ChaosVector`] stores coefficients `F_0, ..., F_N`, each a symmetric
//! tensor over the cells of a [`DiscreteU`]. The discrete control measure `pi`
//! puts mass `cellVolume * w_j` on the cell `(space cell, mark j)`. With that
//! measure:
//!
//! - pairing: `<<F, f>> = sum_n n! <F_n, f_n>_pi`
//! - S-transform: `S(F)(xi) = sum_n <F_n, xi^{(x)n}>_pi`
//! - Wick product: `(F <> G)_n = sum_{k+l=n} sym(F_k (x) G_l)`
//! - Skorohod integral: `(delta F)_{n+1} = sym` over the new index of `F_n(., cell)`
//!
//! All of these are exact in the discrete algebra, so S-transform identities
//! hold to rounding error.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::grid::GridSpec;
use crate::levy::{LevyKind, LevyModel, NoiseRealization, Side};

pub const DEFAULT_ORDER: usize = 3;
pub const MAX_ORDER: usize = 8;
pub const DEFAULT_MARKS_PER_SIGN: usize = 16;
/// Largest number of stored entries in one symmetric tensor.
pub const MAX_TENSOR_ENTRIES: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkPoint {
    pub mark: f64,
    pub weight: f64,
    /// `|y|` range represented by this point; a degenerate range for atoms.
    pub lo: f64,
    pub hi: f64,
}

/// Space cells times mark points, with the product measure `pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteU {
    base: GridSpec,
    marks: Vec<MarkPoint>,
    pi: Vec<f64>,
    m2: f64,
}

impl DiscreteU {
    /// Mark discretization of `model`: exact atoms for finite activity,
    /// `DEFAULT_MARKS_PER_SIGN` equal-mass intervals per sign otherwise.
    pub fn new(base: GridSpec, model: &LevyModel) -> Result<Self> {
        Self::with_marks_per_sign(base, model, DEFAULT_MARKS_PER_SIGN)
    }

    pub fn with_marks_per_sign(base: GridSpec, model: &LevyModel, per_sign: usize) -> Result<Self> {
        let marks = match model.kind() {
            LevyKind::FiniteActivity { .. } => model
                .atoms()
                .iter()
                .map(|&(y, w)| MarkPoint {
                    mark: y,
                    weight: w,
                    lo: y.abs(),
                    hi: y.abs(),
                })
                .collect(),
            LevyKind::TruncatedTemperedStable { .. } => {
                if per_sign == 0 {
                    return Err(invalid("need at least one mark point per sign"));
                }
                let mut pts = Vec::with_capacity(2 * per_sign);
                for (side, sign) in [(Side::Negative, -1.0), (Side::Positive, 1.0)] {
                    let mut side_pts = quantile_marks(model, side, per_sign)?;
                    if sign < 0.0 {
                        side_pts.reverse();
                    }
                    for p in side_pts.iter_mut() {
                        p.mark *= sign;
                    }
                    pts.extend(side_pts);
                }
                // match the second moment exactly
                let got: f64 = pts.iter().map(|p| p.weight * p.mark * p.mark).sum();
                let scale = model.second_moment() / got;
                for p in pts.iter_mut() {
                    p.weight *= scale;
                }
                pts
            }
        };
        Self::from_mark_points(base, marks)
    }

    /// Explicit mark points `(y_j, w_j)`.
    pub fn from_parts(base: GridSpec, marks: Vec<(f64, f64)>) -> Result<Self> {
        let pts = marks
            .into_iter()
            .map(|(y, w)| MarkPoint {
                mark: y,
                weight: w,
                lo: y.abs(),
                hi: y.abs(),
            })
            .collect();
        Self::from_mark_points(base, pts)
    }

    fn from_mark_points(base: GridSpec, marks: Vec<MarkPoint>) -> Result<Self> {
        if marks.is_empty() {
            return Err(invalid("discretized mark space is empty (zero Lévy measure)"));
        }
        for p in &marks {
            if !(p.mark.is_finite() && p.mark != 0.0 && p.weight.is_finite() && p.weight >= 0.0) {
                return Err(invalid(format!("invalid mark point ({}, {})", p.mark, p.weight)));
            }
        }
        let vol = base.cell_volume();
        let pi = (0..base.len())
            .flat_map(|_| marks.iter().map(move |p| vol * p.weight))
            .collect();
        let m2 = marks.iter().map(|p| p.weight * p.mark * p.mark).sum();
        Ok(Self { base, marks, pi, m2 })
    }

    pub fn base(&self) -> &GridSpec {
        &self.base
    }

    pub fn marks(&self) -> &[MarkPoint] {
        &self.marks
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// `sum_j w_j y_j^2`.
    pub fn second_moment(&self) -> f64 {
        self.m2
    }

    /// `pi` mass of every cell.
    pub fn weights(&self) -> &[f64] {
        &self.pi
    }

    pub fn cell(&self, space_cell: usize, mark: usize) -> usize {
        space_cell * self.marks.len() + mark
    }

    pub fn split(&self, cell: usize) -> (usize, usize) {
        (cell / self.marks.len(), cell % self.marks.len())
    }

    pub fn mark_of(&self, cell: usize) -> f64 {
        self.marks[cell % self.marks.len()].mark
    }

    /// Mark point representing a sampled jump of size `y`.
    pub fn mark_index(&self, y: f64) -> Option<usize> {
        let a = y.abs();
        self.marks.iter().position(|p| {
            p.mark.signum() == y.signum()
                && if p.lo == p.hi {
                    (p.mark - y).abs() <= 1e-12 * a.max(1.0)
                } else {
                    a >= p.lo && a <= p.hi
                }
        })
    }

    pub fn locate(&self, x: &[f64], y: f64) -> Option<usize> {
        let s = self.base.locate(x)?;
        Some(self.cell(s, self.mark_index(y)?))
    }
}

fn quantile_marks(model: &LevyModel, side: Side, n: usize) -> Result<Vec<MarkPoint>> {
    let eps = model.epsilon();
    let cut = model.tail_cutoff(side);
    let total = model.side_mass(side);
    let mut edges = vec![eps];
    for k in 1..n {
        let target = total * k as f64 / n as f64;
        let (mut lo, mut hi) = (edges[k - 1].ln(), cut.ln());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if model.side_moment_between(side, eps, mid.exp(), 0)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        edges.push((0.5 * (lo + hi)).exp());
    }
    edges.push(cut);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let (a, b) = (edges[k], edges[k + 1]);
        let m0 = model.side_moment_between(side, a, b, 0)?;
        let m2 = model.side_moment_between(side, a, b, 2)?;
        if m0 <= 0.0 {
            continue;
        }
        out.push(MarkPoint {
            mark: (m2 / m0).sqrt(),
            weight: m0,
            lo: a,
            hi: b,
        });
    }
    Ok(out)
}

/// Pascal table with `C(n, k)` for `n <= rows`.
#[derive(Debug, Clone)]
struct Binomial {
    table: Vec<Vec<usize>>,
}

impl Binomial {
    fn new(rows: usize) -> Self {
        let mut table = vec![vec![1usize]];
        for n in 1..=rows {
            let prev = &table[n - 1];
            let mut row = vec![1usize; n + 1];
            for k in 1..n {
                row[k] = prev[k - 1].saturating_add(prev[k]);
            }
            table.push(row);
        }
        Self { table }
    }

    fn c(&self, n: usize, k: usize) -> usize {
        if k > n {
            0
        } else {
            self.table[n][k]
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Number of sorted index tuples of length `order` over `cells` values.
pub fn tensor_len(cells: usize, order: usize) -> Option<usize> {
    if order == 0 {
        return Some(1);
    }
    // C(cells + order - 1, order) without overflow
    let mut acc: u128 = 1;
    for k in 0..order {
        acc = acc * (cells + k) as u128 / (k as u128 + 1);
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

/// Symmetric tensor stored on sorted multi-indices in colex rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor {
    order: usize,
    cells: usize,
    data: Vec<f64>,
}

impl SymTensor {
    pub fn zeros(cells: usize, order: usize) -> Result<Self> {
        let len = tensor_len(cells, order)
            .filter(|&l| l <= MAX_TENSOR_ENTRIES)
            .ok_or_else(|| {
                invalid(format!(
                    "order-{order} tensor over {cells} cells exceeds {MAX_TENSOR_ENTRIES} entries"
                ))
            })?;
        Ok(Self {
            order,
            cells,
            data: vec![0.0; len],
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Stored entries in colex rank order.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Rank of a sorted tuple `i_1 <= ... <= i_n`: `sum_k C(i_k + k - 1, k)`.
    fn rank(bin: &Binomial, sorted: &[usize]) -> usize {
        sorted
            .iter()
            .enumerate()
            .map(|(k, &i)| bin.c(i + k, k + 1))
            .sum()
    }

    fn binomial(&self) -> Binomial {
        Binomial::new(self.cells + self.order + 1)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        let mut s = idx.to_vec();
        s.sort_unstable();
        self.data[Self::rank(&self.binomial(), &s)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let mut s = idx.to_vec();
        s.sort_unstable();
        let r = Self::rank(&self.binomial(), &s);
        self.data[r] = v;
    }

    /// Calls `f(sorted_index, rank)` for every stored entry.
    fn for_each_index(&self, mut f: impl FnMut(&[usize], usize)) {
        let bin = self.binomial();
        let n = self.order;
        if n == 0 {
            f(&[], 0);
            return;
        }
        if self.cells == 0 {
            return;
        }
        let mut idx = vec![0usize; n];
        loop {
            f(&idx, Self::rank(&bin, &idx));
            // next non-decreasing tuple in lexicographic order
            let mut k = n;
            while k > 0 && idx[k - 1] == self.cells - 1 {
                k -= 1;
            }
            if k == 0 {
                return;
            }
            idx[k - 1] += 1;
            let v = idx[k - 1];
            for slot in idx.iter_mut().skip(k) {
                *slot = v;
            }
        }
    }
}

/// `n! / prod(counts!)` for a sorted tuple: how many ordered tuples it stands for.
fn multiplicity(sorted: &[usize]) -> f64 {
    let mut m = factorial(sorted.len());
    let mut run = 1usize;
    for k in 1..=sorted.len() {
        if k < sorted.len() && sorted[k] == sorted[k - 1] {
            run += 1;
        } else {
            m /= factorial(run);
            run = 1;
        }
    }
    m
}

/// Truncated chaos expansion `sum_n <C_n, F_n>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosVector {
    space: Arc<DiscreteU>,
    coeffs: Vec<SymTensor>,
    max_order: usize,
}

impl ChaosVector {
    /// Zero vector with coefficients up to `order`.
    pub fn zero(space: Arc<DiscreteU>, order: usize) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::TruncationOverflow {
                order,
                max: MAX_ORDER,
            });
        }
        let cells = space.len();
        let coeffs = (0..=order)
            .map(|n| SymTensor::zeros(cells, n))
            .collect::<Result<_>>()?;
        Ok(Self {
            space,
            coeffs,
            max_order: MAX_ORDER,
        })
    }

    pub fn scalar(space: Arc<DiscreteU>, c: f64) -> Self {
        Self {
            space,
            coeffs: vec![SymTensor {
                order: 0,
                cells: 0,
                data: vec![c],
            }],
            max_order: MAX_ORDER,
        }
        .fix_cells()
    }

    fn fix_cells(mut self) -> Self {
        let cells = self.space.len();
        for c in self.coeffs.iter_mut() {
            c.cells = cells;
        }
        self
    }

    /// `<C_1, f>` for a deterministic `f` given per cell.
    pub fn first_order(space: Arc<DiscreteU>, f: &[f64]) -> Result<Self> {
        if f.len() != space.len() {
            return Err(Error::Shape(format!(
                "first-order coefficient has {} entries, space has {} cells",
                f.len(),
                space.len()
            )));
        }
        let mut v = Self::zero(space, 1)?;
        v.coeffs[1].data.copy_from_slice(f);
        Ok(v)
    }

    /// Single nonzero entry `value` at the (unordered) multi-index `idx`.
    pub fn one_hot(space: Arc<DiscreteU>, idx: &[usize], value: f64) -> Result<Self> {
        if idx.iter().any(|&i| i >= space.len()) {
            return Err(Error::Shape("one-hot index outside the discretized space".into()));
        }
        let mut v = Self::zero(space, idx.len())?;
        v.coeffs[idx.len()].set(idx, value);
        Ok(v)
    }

    /// Caps the order of results produced from this vector.
    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = max_order;
        self
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn space(&self) -> &Arc<DiscreteU> {
        &self.space
    }

    pub fn truncation_order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, n: usize) -> Option<&SymTensor> {
        self.coeffs.get(n)
    }

    pub fn coeff_mut(&mut self, n: usize) -> Option<&mut SymTensor> {
        self.coeffs.get_mut(n)
    }

    /// Entry of `F_n` at an index tuple in any order; zero beyond the truncation.
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.coeffs.get(idx.len()).map_or(0.0, |t| t.get(idx))
    }

    pub fn set(&mut self, idx: &[usize], v: f64) -> Result<()> {
        let n = idx.len();
        if n > self.truncation_order() {
            self.extend_to(n)?;
        }
        self.coeffs[n].set(idx, v);
        Ok(())
    }

    fn extend_to(&mut self, order: usize) -> Result<()> {
        if order > self.max_order {
            return Err(Error::TruncationOverflow {
                order,
                max: self.max_order,
            });
        }
        let cells = self.space.len();
        while self.coeffs.len() <= order {
            let n = self.coeffs.len();
            self.coeffs.push(SymTensor::zeros(cells, n)?);
        }
        Ok(())
    }

    fn same_space(&self, other: &ChaosVector) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) || self.space == other.space {
            Ok(())
        } else {
            Err(Error::Shape("chaos vectors live on different discretizations".into()))
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &ChaosVector, b: f64) -> Result<Self> {
        self.same_space(other)?;
        let order = self.truncation_order().max(other.truncation_order());
        let mut out = Self::zero(self.space.clone(), order)?.with_max_order(self.max_order.min(other.max_order));
        for (n, t) in out.coeffs.iter_mut().enumerate() {
            for (r, v) in t.data.iter_mut().enumerate() {
                let x = self.coeffs.get(n).map_or(0.0, |c| c.data[r]);
                let y = other.coeffs.get(n).map_or(0.0, |c| c.data[r]);
                *v = a * x + b * y;
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        for t in out.coeffs.iter_mut() {
            for v in t.data.iter_mut() {
                *v *= a;
            }
        }
        out
    }

    /// `<F_n, g_n>_pi` summed over ordered index tuples.
    fn contract(&self, n: usize, g: impl Fn(&[usize], usize) -> f64) -> f64 {
        let Some(t) = self.coeffs.get(n) else {
            return 0.0;
        };
        let pi = self.space.weights();
        let mut acc = 0.0;
        t.for_each_index(|idx, r| {
            let v = t.data[r];
            if v != 0.0 {
                let w: f64 = idx.iter().map(|&i| pi[i]).product();
                acc += multiplicity(idx) * v * w * g(idx, r);
            }
        });
        acc
    }

    /// `sum_n n! <F_n, f_n>_pi`.
    pub fn pairing(&self, other: &ChaosVector) -> Result<f64> {
        self.same_space(other)?;
        let top = self.truncation_order().min(other.truncation_order());
        Ok((0..=top)
            .map(|n| factorial(n) * self.contract(n, |_, r| other.coeffs[n].data[r]))
            .sum())
    }

    /// `S(F)(xi) = sum_n <F_n, xi^{(x)n}>_pi`.
    pub fn s_transform(&self, xi: &[f64]) -> Result<f64> {
        self.check_test_function(xi)?;
        Ok((0..=self.truncation_order())
            .map(|n| self.contract(n, |idx, _| idx.iter().map(|&i| xi[i]).product()))
            .sum())
    }

    fn check_test_function(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.space.len() {
            return Err(Error::Shape(format!(
                "test function has {} entries, space has {} cells",
                xi.len(),
                self.space.len()
            )));
        }
        Ok(())
    }

    /// Coefficients `xi^{(x)n} / n!` of the Wick exponential of `<C_1, xi>` up to `order`.
    pub fn wick_exponential_coefficients(space: Arc<DiscreteU>, xi: &[f64], order: usize) -> Result<Self> {
        let mut out = Self::zero(space, order)?;
        out.check_test_function(xi)?;
        for n in 0..=order {
            let t = &mut out.coeffs[n];
            let scale = 1.0 / factorial(n);
            let mut vals = vec![0.0; t.data.len()];
            t.for_each_index(|idx, r| {
                vals[r] = scale * idx.iter().map(|&i| xi[i]).product::<f64>();
            });
            t.data = vals;
        }
        Ok(out)
    }

    /// `F <> G`, truncated at the sum of the two orders.
    pub fn wick_product(&self, other: &ChaosVector) -> Result<Self> {
        self.same_space(other)?;
        let order = self.truncation_order() + other.truncation_order();
        let cap = self.max_order.min(other.max_order);
        if order > cap {
            return Err(Error::TruncationOverflow { order, max: cap });
        }
        let mut out = Self::zero(self.space.clone(), order)?.with_max_order(cap);
        let cells = self.space.len();
        let bin = Binomial::new(cells + order + 1);
        for n in 0..=order {
            let t = &out.coeffs[n];
            let mut vals = vec![0.0; t.data.len()];
            let mut left = Vec::with_capacity(n);
            let mut right = Vec::with_capacity(n);
            t.for_each_index(|idx, r| {
                let mut acc = 0.0;
                let kmin = n.saturating_sub(other.truncation_order());
                let kmax = n.min(self.truncation_order());
                for k in kmin..=kmax {
                    let fk = &self.coeffs[k];
                    let gl = &other.coeffs[n - k];
                    let mut sub = 0.0;
                    // positions chosen for the F factor
                    for mask in 0u32..(1u32 << n) {
                        if mask.count_ones() as usize != k {
                            continue;
                        }
                        left.clear();
                        right.clear();
                        for (p, &i) in idx.iter().enumerate() {
                            if mask & (1 << p) != 0 {
                                left.push(i);
                            } else {
                                right.push(i);
                            }
                        }
                        sub += fk.data[SymTensor::rank(&bin, &left)]
                            * gl.data[SymTensor::rank(&bin, &right)];
                    }
                    acc += sub / bin.c(n, k) as f64;
                }
                vals[r] = acc;
            });
            out.coeffs[n].data = vals;
        }
        Ok(out)
    }

    /// `sum_{n <= max_order} F^{<>n} / n!`.
    pub fn wick_exp(&self, max_order: usize) -> Result<Self> {
        let top = self.effective_order();
        let order = top * max_order;
        if order > self.max_order {
            return Err(Error::TruncationOverflow {
                order,
                max: self.max_order,
            });
        }
        let f = self.truncated(top)?;
        let mut term = Self::scalar(self.space.clone(), 1.0).with_max_order(self.max_order);
        let mut sum = term.clone();
        for n in 1..=max_order {
            term = term.wick_product(&f)?.scaled(1.0 / n as f64);
            sum = sum.combine(1.0, &term, 1.0)?;
        }
        Ok(sum)
    }

    /// Highest order carrying a nonzero coefficient.
    pub fn effective_order(&self) -> usize {
        (0..self.coeffs.len())
            .rev()
            .find(|&n| self.coeffs[n].data.iter().any(|v| *v != 0.0))
            .unwrap_or(0)
    }

    /// Copy keeping only orders `<= order`.
    pub fn truncated(&self, order: usize) -> Result<Self> {
        let mut out = self.clone();
        if order + 1 < out.coeffs.len() {
            out.coeffs.truncate(order + 1);
        } else {
            out.extend_to(order)?;
        }
        Ok(out)
    }

    /// Pathwise value on a noise realization. Only orders 0 and 1 are supported:
    /// `F_0 + sum_jumps F_1(cell(s, y)) - sum_c F_1(c) pi_c`.
    pub fn evaluate(&self, noise: &NoiseRealization) -> Result<f64> {
        if self.effective_order() > 1 {
            return Err(invalid(
                "pathwise evaluation is only available for chaos orders 0 and 1",
            ));
        }
        let mut v = self.coeffs[0].data[0];
        if self.coeffs.len() > 1 {
            let f1 = &self.coeffs[1].data;
            for (x, y) in noise.jumps() {
                if let Some(c) = self.space.locate(x, y) {
                    v += f1[c];
                }
            }
            v -= f1.iter().zip(self.space.weights()).map(|(f, p)| f * p).sum::<f64>();
        }
        Ok(v)
    }
}

/// Skorohod integral of a family `F(cell)` of chaos vectors, one per cell of the space.
pub fn skorohod_delta(family: &[ChaosVector]) -> Result<ChaosVector> {
    let first = family
        .first()
        .ok_or_else(|| Error::Shape("Skorohod integrand family is empty".into()))?;
    let space = first.space.clone();
    let cells = space.len();
    if family.len() != cells {
        return Err(Error::Shape(format!(
            "Skorohod integrand has {} members, space has {cells} cells",
            family.len()
        )));
    }
    let mut inner_order = 0;
    let mut cap = first.max_order;
    for f in family {
        first.same_space(f)?;
        inner_order = inner_order.max(f.truncation_order());
        cap = cap.min(f.max_order);
    }
    let order = inner_order + 1;
    if order > cap {
        return Err(Error::TruncationOverflow { order, max: cap });
    }
    let mut out = ChaosVector::zero(space, order)?.with_max_order(cap);
    let bin = Binomial::new(cells + order + 1);
    let mut rest = Vec::with_capacity(order);
    for n in 0..=inner_order {
        let t = &out.coeffs[n + 1];
        let mut vals = vec![0.0; t.data.len()];
        t.for_each_index(|idx, r| {
            let mut acc = 0.0;
            for p in 0..idx.len() {
                rest.clear();
                rest.extend(idx.iter().enumerate().filter(|(q, _)| *q != p).map(|(_, &i)| i));
                if let Some(c) = family[idx[p]].coeffs.get(n) {
                    acc += c.data[SymTensor::rank(&bin, &rest)];
                }
            }
            vals[r] = acc / idx.len() as f64;
        });
        out.coeffs[n + 1].data = vals;
    }
    Ok(out)
}

/// `Y <> F(cell)` for every cell of a family.
pub fn wick_family(y: &ChaosVector, family: &[ChaosVector]) -> Result<Vec<ChaosVector>> {
    family.iter().map(|f| y.wick_product(f)).collect()
}

/// Recovers all coefficients up to order 2 from S-transform probes at
/// `0`, `+-e_i` and `e_i + e_j`.
pub fn recover_order2(space: Arc<DiscreteU>, s: impl Fn(&[f64]) -> f64) -> Result<ChaosVector> {
    let n = space.len();
    let pi = space.weights().to_vec();
    let mut out = ChaosVector::zero(space, 2)?;
    let mut xi = vec![0.0; n];
    let f0 = s(&xi);
    out.coeffs[0].data[0] = f0;
    let mut diag = vec![0.0; n];
    let mut lin = vec![0.0; n];
    for i in 0..n {
        xi[i] = 1.0;
        let plus = s(&xi);
        xi[i] = -1.0;
        let minus = s(&xi);
        xi[i] = 0.0;
        lin[i] = 0.5 * (plus - minus);
        diag[i] = 0.5 * (plus + minus) - f0;
        out.coeffs[1].data[i] = lin[i] / pi[i];
        out.set(&[i, i], diag[i] / (pi[i] * pi[i]))?;
    }
    for i in 0..n {
        for j in i + 1..n {
            xi[i] = 1.0;
            xi[j] = 1.0;
            let both = s(&xi);
            xi[i] = 0.0;
            xi[j] = 0.0;
            let cross = both - f0 - lin[i] - lin[j] - diag[i] - diag[j];
            out.set(&[i, j], cross / (2.0 * pi[i] * pi[j]))?;
        }
    }
    Ok(out)
}
