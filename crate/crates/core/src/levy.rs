//! Square-integrable pure-jump Lévy measures and compensated Poisson noise.
//!
//! A [`LevyModel`] is always the truncated measure `nu_eps`: jumps with
//! `|y| < epsilon` are removed and every moment, exponent and sampler works
//! with what remains. This keeps simulation and analytic oracles on the same
//! measure.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Error, Result};
use crate::grid::GridSpec;
use crate::quad::adaptive_gk;
use crate::seed::rng_from_seed;

/// Expected jump counts above this are refused by the sampler.
pub const MAX_EXPECTED_JUMPS: f64 = 1e8;

const PROB_SUM_TOL: f64 = 1e-12;
/// Tempered tails are integrated out to `epsilon + TAIL_DECAYS / lambda`.
const TAIL_DECAYS: f64 = 80.0;

#[derive(Debug, Clone, PartialEq)]
pub enum LevyKind {
    /// `rate * sum_j p_j delta_{y_j}`.
    FiniteActivity { rate: f64, jumps: Vec<(f64, f64)> },
    /// Density `scale * exp(-lambda_pm |y|) / |y|^(1 + alpha)` on `|y| >= epsilon`.
    TruncatedTemperedStable {
        alpha: f64,
        lambda_plus: f64,
        lambda_minus: f64,
        scale: f64,
    },
}

/// Which half-line of marks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    kind: LevyKind,
    epsilon: f64,
    /// Atoms `(mark, mass)` that survive the truncation (finite activity only).
    atoms: Vec<(f64, f64)>,
    mass_plus: f64,
    mass_minus: f64,
    m1: f64,
    m2: f64,
}

impl LevyModel {
    pub fn finite_activity(rate: f64, jumps: Vec<(f64, f64)>, epsilon: f64) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(invalid(format!("rate must be finite and >= 0, got {rate}")));
        }
        check_epsilon(epsilon)?;
        if jumps.is_empty() {
            return Err(invalid("jump law must contain at least one atom"));
        }
        let mut total = 0.0;
        for &(y, p) in &jumps {
            if !(y.is_finite() && y != 0.0) {
                return Err(invalid(format!("jump mark must be finite and nonzero, got {y}")));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(invalid(format!("jump probability must be >= 0, got {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(invalid(format!(
                "jump probabilities sum to {total}, expected 1"
            )));
        }
        let atoms: Vec<(f64, f64)> = jumps
            .iter()
            .filter(|(y, p)| y.abs() >= epsilon && *p > 0.0 && rate > 0.0)
            .map(|&(y, p)| (y, rate * p))
            .collect();
        let mass_plus = atoms.iter().filter(|a| a.0 > 0.0).map(|a| a.1).sum();
        let mass_minus = atoms.iter().filter(|a| a.0 < 0.0).map(|a| a.1).sum();
        let m1 = atoms.iter().map(|(y, w)| y * w).sum();
        let m2: f64 = atoms.iter().map(|(y, w)| y * y * w).sum();
        if !m2.is_finite() {
            return Err(Error::DivergentSecondMoment);
        }
        Ok(Self {
            kind: LevyKind::FiniteActivity { rate, jumps },
            epsilon,
            atoms,
            mass_plus,
            mass_minus,
            m1,
            m2,
        })
    }

    /// Rate-`rate` jumps of size `mark` only.
    pub fn single_jump(rate: f64, mark: f64) -> Result<Self> {
        Self::finite_activity(rate, vec![(mark, 1.0)], 0.0)
    }

    pub fn tempered_stable(
        alpha: f64,
        lambda_plus: f64,
        lambda_minus: f64,
        scale: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(invalid(format!("alpha must lie in (0, 2), got {alpha}")));
        }
        for (name, v) in [
            ("lambda_plus", lambda_plus),
            ("lambda_minus", lambda_minus),
            ("scale", scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        check_epsilon(epsilon)?;
        if epsilon == 0.0 {
            return Err(invalid("tempered stable model needs epsilon > 0"));
        }
        let mut model = Self {
            kind: LevyKind::TruncatedTemperedStable {
                alpha,
                lambda_plus,
                lambda_minus,
                scale,
            },
            epsilon,
            atoms: Vec::new(),
            mass_plus: 0.0,
            mass_minus: 0.0,
            m1: 0.0,
            m2: 0.0,
        };
        let (p0, p1, p2) = (
            model.side_moment(Side::Positive, 0)?,
            model.side_moment(Side::Positive, 1)?,
            model.side_moment(Side::Positive, 2)?,
        );
        let (n0, n1, n2) = (
            model.side_moment(Side::Negative, 0)?,
            model.side_moment(Side::Negative, 1)?,
            model.side_moment(Side::Negative, 2)?,
        );
        model.mass_plus = p0;
        model.mass_minus = n0;
        model.m1 = p1 - n1;
        model.m2 = p2 + n2;
        Ok(model)
    }

    pub fn kind(&self) -> &LevyKind {
        &self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `nu_eps(R \ {0})`, the jump intensity per unit volume.
    pub fn total_mass(&self) -> f64 {
        self.mass_plus + self.mass_minus
    }

    pub fn side_mass(&self, side: Side) -> f64 {
        match side {
            Side::Positive => self.mass_plus,
            Side::Negative => self.mass_minus,
        }
    }

    /// `int y nu_eps(dy)`, the compensator density per unit volume.
    pub fn first_moment(&self) -> f64 {
        self.m1
    }

    /// `m2 = int y^2 nu_eps(dy)`.
    pub fn second_moment(&self) -> f64 {
        self.m2
    }

    /// Surviving atoms `(mark, mass)` of a finite-activity model; empty otherwise.
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Density of a tempered-stable model at `y` (zero inside the truncation).
    pub fn density(&self, y: f64) -> f64 {
        match self.kind {
            LevyKind::TruncatedTemperedStable {
                alpha,
                lambda_plus,
                lambda_minus,
                scale,
            } => {
                let a = y.abs();
                if a < self.epsilon {
                    return 0.0;
                }
                let lambda = if y > 0.0 { lambda_plus } else { lambda_minus };
                scale * (-lambda * a).exp() / a.powf(1.0 + alpha)
            }
            LevyKind::FiniteActivity { .. } => 0.0,
        }
    }

    /// Largest `|y|` retained on one side of a tempered-stable model.
    pub fn tail_cutoff(&self, side: Side) -> f64 {
        match self.kind {
            LevyKind::TruncatedTemperedStable {
                lambda_plus,
                lambda_minus,
                ..
            } => {
                let lambda = match side {
                    Side::Positive => lambda_plus,
                    Side::Negative => lambda_minus,
                };
                self.epsilon + TAIL_DECAYS / lambda
            }
            LevyKind::FiniteActivity { .. } => self
                .atoms
                .iter()
                .map(|a| a.0.abs())
                .fold(0.0, f64::max),
        }
    }

    /// `int_{a <= |y| <= b, sign(y) = side} |y|^k nu(dy)` for a tempered-stable model.
    pub fn side_moment_between(&self, side: Side, a: f64, b: f64, k: i32) -> Result<f64> {
        let (alpha, lambda, scale) = match self.kind {
            LevyKind::TruncatedTemperedStable {
                alpha,
                lambda_plus,
                lambda_minus,
                scale,
            } => (
                alpha,
                match side {
                    Side::Positive => lambda_plus,
                    Side::Negative => lambda_minus,
                },
                scale,
            ),
            LevyKind::FiniteActivity { .. } => {
                let s = self
                    .atoms
                    .iter()
                    .filter(|(y, _)| match side {
                        Side::Positive => *y > 0.0,
                        Side::Negative => *y < 0.0,
                    })
                    .filter(|(y, _)| y.abs() >= a && y.abs() <= b)
                    .map(|(y, w)| y.abs().powi(k) * w)
                    .sum();
                return Ok(s);
            }
        };
        let a = a.max(self.epsilon);
        if b <= a {
            return Ok(0.0);
        }
        // u = ln y turns the algebraic singularity into an exponential decay
        let power = k as f64 - alpha;
        let (v, err) = adaptive_gk(a.ln(), b.ln(), 0.0, 1e-14, |u| {
            scale * (power * u - lambda * u.exp()).exp()
        });
        if !v.is_finite() || err > 1e-9 * v.abs().max(1e-300) {
            return Err(Error::DivergentSecondMoment);
        }
        Ok(v)
    }

    fn side_moment(&self, side: Side, k: i32) -> Result<f64> {
        self.side_moment_between(side, self.epsilon, self.tail_cutoff(side), k)
    }

    /// `psi(theta) = int (e^{i theta y} - 1 - i theta y) nu_eps(dy)`.
    pub fn levy_exponent(&self, theta: f64) -> Complex64 {
        if theta == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        match self.kind {
            LevyKind::FiniteActivity { .. } => self
                .atoms
                .iter()
                .map(|&(y, w)| {
                    let ty = theta * y;
                    Complex64::new(ty.cos() - 1.0, ty.sin() - ty) * w
                })
                .sum(),
            LevyKind::TruncatedTemperedStable { .. } => {
                let mut total = Complex64::new(0.0, 0.0);
                for (side, sign) in [(Side::Positive, 1.0), (Side::Negative, -1.0)] {
                    let lo = self.epsilon.ln();
                    let hi = self.tail_cutoff(side).ln();
                    let re = adaptive_gk(lo, hi, 1e-15, 1e-13, |u| {
                        let y = u.exp();
                        ((sign * theta * y).cos() - 1.0) * self.density(sign * y) * y
                    })
                    .0;
                    let im = adaptive_gk(lo, hi, 1e-15, 1e-13, |u| {
                        let y = u.exp();
                        let ty = sign * theta * y;
                        (ty.sin() - ty) * self.density(sign * y) * y
                    })
                    .0;
                    total += Complex64::new(re, im);
                }
                total
            }
        }
    }

    /// Draws one mark from the normalized measure `nu_eps / nu_eps(R)`.
    pub fn sample_mark<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mass = self.total_mass();
        match self.kind {
            LevyKind::FiniteActivity { .. } => {
                let mut u = rng.random::<f64>() * mass;
                for &(y, w) in &self.atoms {
                    if u < w {
                        return y;
                    }
                    u -= w;
                }
                self.atoms.last().map(|a| a.0).unwrap_or(0.0)
            }
            LevyKind::TruncatedTemperedStable {
                alpha,
                lambda_plus,
                lambda_minus,
                ..
            } => {
                let positive = rng.random::<f64>() * mass < self.mass_plus;
                let (lambda, side) = if positive {
                    (lambda_plus, Side::Positive)
                } else {
                    (lambda_minus, Side::Negative)
                };
                let cutoff = self.tail_cutoff(side);
                // Pareto(alpha) proposal on [eps, inf), thinned by the tempering factor
                loop {
                    let u: f64 = 1.0 - rng.random::<f64>();
                    let y = self.epsilon * u.powf(-1.0 / alpha);
                    if y > cutoff {
                        continue;
                    }
                    if rng.random::<f64>() < (-lambda * (y - self.epsilon)).exp() {
                        return if positive { y } else { -y };
                    }
                }
            }
        }
    }

    /// Samples the Poisson random measure on `grid` x marks and aggregates
    /// compensated increments per cell. Deterministic in `seed`.
    pub fn sample_noise_grid(&self, grid: &GridSpec, seed: u64) -> Result<NoiseRealization> {
        let mut rng = rng_from_seed(seed);
        let expected = self.total_mass() * grid.volume();
        if !(expected <= MAX_EXPECTED_JUMPS) {
            return Err(Error::IntensityTooLarge {
                expected,
                limit: MAX_EXPECTED_JUMPS,
            });
        }
        let count = if expected > 0.0 {
            Poisson::new(expected)
                .map_err(|e| Error::Internal(format!("poisson sampler: {e}")))?
                .sample(&mut rng) as usize
        } else {
            0
        };
        let d = grid.dim();
        let mut locations = Vec::with_capacity(count * d);
        let mut marks = Vec::with_capacity(count);
        let cell_vol = grid.cell_volume();
        let mut increments = vec![-cell_vol * self.m1; grid.len()];
        let mut x = vec![0.0; d];
        for _ in 0..count {
            for k in 0..d {
                let lo = grid.lower()[k];
                let hi = grid.upper()[k];
                x[k] = (lo + rng.random::<f64>() * (hi - lo)).min(hi.next_down());
            }
            let y = self.sample_mark(&mut rng);
            let cell = grid
                .locate(&x)
                .ok_or_else(|| Error::Internal("sampled jump outside its grid".into()))?;
            increments[cell] += y;
            locations.extend_from_slice(&x);
            marks.push(y);
        }
        Ok(NoiseRealization {
            grid: grid.clone(),
            increments,
            locations,
            marks,
            seed,
            compensator_density: self.m1,
        })
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(invalid(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    Ok(())
}

/// One sampled path of the compensated Poisson random measure on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    grid: GridSpec,
    increments: Vec<f64>,
    locations: Vec<f64>,
    marks: Vec<f64>,
    seed: u64,
    compensator_density: f64,
}

impl NoiseRealization {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Per-cell `sum y - cellVolume * int y nu(dy)`.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `int y nu_eps(dy)` of the model that produced this path.
    pub fn compensator_density(&self) -> f64 {
        self.compensator_density
    }

    pub fn jump_count(&self) -> usize {
        self.marks.len()
    }

    pub fn marks(&self) -> &[f64] {
        &self.marks
    }

    pub fn location(&self, j: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.locations[j * d..(j + 1) * d]
    }

    pub fn jumps(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        let d = self.grid.dim();
        self.locations.chunks_exact(d).zip(self.marks.iter().copied())
    }

    /// `sum_j g(s_j) y_j - m1 * int g`, the compensated pairing with a
    /// deterministic `g` whose integral over the grid box is `g_integral`.
    pub fn pair(&self, g: impl Fn(&[f64]) -> f64, g_integral: f64) -> f64 {
        let s: f64 = self.jumps().map(|(x, y)| g(x) * y).sum();
        s - self.compensator_density * g_integral
    }

    /// `X(S)` for a box `S` inside the grid, from the jump list.
    pub fn box_measure(&self, lower: &[f64], upper: &[f64]) -> f64 {
        let vol: f64 = lower.iter().zip(upper).map(|(a, b)| (b - a).max(0.0)).product();
        self.pair(
            |x| {
                let inside = x
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .all(|(v, (a, b))| *v >= *a && *v < *b);
                if inside {
                    1.0
                } else {
                    0.0
                }
            },
            vol,
        )
    }

    /// Pointwise combination `a * self + b * other` of the cell increments.
    /// Jump lists are concatenated with scaled marks so that jump-based
    /// consumers see the same linear combination.
    pub fn combine(&self, a: f64, other: &NoiseRealization, b: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Shape("noise realizations on different grids".into()));
        }
        let mut locations = self.locations.clone();
        locations.extend_from_slice(&other.locations);
        let mut marks: Vec<f64> = self.marks.iter().map(|y| a * y).collect();
        marks.extend(other.marks.iter().map(|y| b * y));
        Ok(Self {
            grid: self.grid.clone(),
            increments: self
                .increments
                .iter()
                .zip(&other.increments)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            locations,
            marks,
            seed: self.seed,
            compensator_density: a * self.compensator_density + b * other.compensator_density,
        })
    }

    /// A realization from an explicit jump list (`locations` row-major, one
    /// point per mark) with compensator density `m1`.
    pub fn from_jumps(grid: &GridSpec, locations: Vec<f64>, marks: Vec<f64>, m1: f64) -> Result<Self> {
        let d = grid.dim();
        if locations.len() != d * marks.len() {
            return Err(Error::Shape(format!(
                "{} coordinates for {} jumps in dimension {d}",
                locations.len(),
                marks.len()
            )));
        }
        if locations.iter().chain(&marks).any(|v| !v.is_finite()) || !m1.is_finite() {
            return Err(Error::InvalidParameter("jump data must be finite".into()));
        }
        let mut increments = vec![-m1 * grid.cell_volume(); grid.len()];
        for (x, y) in locations.chunks_exact(d).zip(&marks) {
            let c = grid
                .locate(x)
                .ok_or_else(|| Error::InvalidParameter(format!("jump at {x:?} lies outside the grid")))?;
            increments[c] += y;
        }
        Ok(Self {
            grid: grid.clone(),
            increments,
            locations,
            marks,
            seed: 0,
            compensator_density: m1,
        })
    }

    /// A realization with no jumps and no compensator: the zero noise.
    pub fn zero(grid: &GridSpec) -> Self {
        Self {
            grid: grid.clone(),
            increments: vec![0.0; grid.len()],
            locations: Vec::new(),
            marks: Vec::new(),
            seed: 0,
            compensator_density: 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Adaptive Simpson directly in `y`, independent of the log-substituted
    /// Gauss–Kronrod used by the model.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            let diff = left + right - whole;
            if depth == 0 || diff.abs() <= 15.0 * tol {
                return left + right + diff / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
        let fa = f(a);
        let fb = f(b);
        let fm = f(0.5 * (a + b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    fn tts_oracle(k: i32, eps: f64) -> f64 {
        // alpha = 0.5, lambda = 1, scale = 1; both sides identical
        let dens = move |y: f64| (-y).exp() * y.powf(-1.5) * y.powi(k);
        let mut total = 0.0;
        let mut a = eps;
        for b in [0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.1] {
            total += simpson(&dens, a, b, 1e-14);
            a = b;
        }
        2.0 * total
    }

    #[test]
    fn finite_activity_moments() {
        let m = LevyModel::single_jump(2.0, 1.0).unwrap();
        assert_eq!(m.second_moment(), 2.0);
        assert_eq!(m.first_moment(), 2.0);
        let zero = LevyModel::finite_activity(0.0, vec![(1.5, 0.5), (-2.0, 0.5)], 0.0).unwrap();
        assert_eq!(zero.second_moment(), 0.0);
    }

    #[test]
    fn finite_activity_validation() {
        assert!(LevyModel::finite_activity(1.0, vec![(1.0, 0.5)], 0.0).is_err());
        assert!(LevyModel::finite_activity(1.0, vec![(0.0, 1.0)], 0.0).is_err());
        assert!(LevyModel::finite_activity(-1.0, vec![(1.0, 1.0)], 0.0).is_err());
        assert!(LevyModel::tempered_stable(2.0, 1.0, 1.0, 1.0, 0.1).is_err());
        assert!(LevyModel::tempered_stable(0.5, 1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn small_atoms_are_truncated() {
        let m = LevyModel::finite_activity(4.0, vec![(0.05, 0.5), (1.0, 0.5)], 0.1).unwrap();
        assert_eq!(m.total_mass(), 2.0);
        assert_eq!(m.second_moment(), 2.0);
    }

    #[test]
    fn tempered_stable_moments_match_independent_quadrature() {
        let m = LevyModel::tempered_stable(0.5, 1.0, 1.0, 1.0, 0.1).unwrap();
        let m2 = tts_oracle(2, 0.1);
        assert!((m.second_moment() - m2).abs() < 1e-8, "{} vs {m2}", m.second_moment());
        let m0 = tts_oracle(0, 0.1);
        assert!((m.total_mass() - m0).abs() < 1e-8 * m0);
        assert!(m.first_moment().abs() < 1e-12);
    }

    #[test]
    fn exponent_closed_forms() {
        let m = LevyModel::single_jump(2.0, 1.0).unwrap();
        assert_eq!(m.levy_exponent(0.0), Complex64::new(0.0, 0.0));
        let psi = m.levy_exponent(PI);
        assert!((psi.re + 4.0).abs() < 1e-14);
        assert!((psi.im + 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn tempered_stable_exponent_matches_quadrature() {
        let m = LevyModel::tempered_stable(0.5, 1.0, 1.5, 1.0, 0.1).unwrap();
        let theta = 1.3;
        let mut re = 0.0;
        let mut im = 0.0;
        for (sign, lambda) in [(1.0, 1.0), (-1.0, 1.5)] {
            let fr = move |y: f64| ((sign * theta * y).cos() - 1.0) * (-lambda * y).exp() * y.powf(-1.5);
            let fi = move |y: f64| {
                let ty = sign * theta * y;
                (ty.sin() - ty) * (-lambda * y).exp() * y.powf(-1.5)
            };
            let hi = 0.1 + 80.0 / lambda;
            let mut a = 0.1;
            for b in [0.5, 2.0, 8.0, 20.0, hi] {
                let b: f64 = b.min(hi);
                if b > a {
                    re += simpson(&fr, a, b, 1e-14);
                    im += simpson(&fi, a, b, 1e-14);
                }
                a = b;
            }
        }
        let psi = m.levy_exponent(theta);
        assert!((psi.re - re).abs() < 1e-8, "{} vs {re}", psi.re);
        assert!((psi.im - im).abs() < 1e-8, "{} vs {im}", psi.im);
    }

    #[test]
    fn zero_rate_noise_is_zero() {
        let m = LevyModel::finite_activity(0.0, vec![(1.0, 1.0)], 0.0).unwrap();
        let g = GridSpec::cube(2, 0.0, 1.0, 4).unwrap();
        let n = m.sample_noise_grid(&g, 7).unwrap();
        assert!(n.increments().iter().all(|&v| v == 0.0));
        assert_eq!(n.jump_count(), 0);
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let m = LevyModel::tempered_stable(0.8, 2.0, 1.0, 1.0, 0.05).unwrap();
        let g = GridSpec::cube(2, -1.0, 1.0, 8).unwrap();
        let a = m.sample_noise_grid(&g, 11).unwrap();
        let b = m.sample_noise_grid(&g, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.marks().iter().all(|y| y.abs() >= 0.05 && *y != 0.0));
        let sum: f64 = a.increments().iter().sum();
        let direct = a.box_measure(&[-1.0, -1.0], &[1.0, 1.0]);
        assert!((sum - direct).abs() < 1e-9);
    }

    #[test]
    fn intensity_overflow_is_reported() {
        let m = LevyModel::single_jump(1e9, 1.0).unwrap();
        let g = GridSpec::cube(1, 0.0, 10.0, 4).unwrap();
        assert!(matches!(
            m.sample_noise_grid(&g, 1),
            Err(Error::IntensityTooLarge { .. })
        ));
    }

    #[test]
    fn cell_increment_compensation_and_isometry() {
        let m = LevyModel::single_jump(2.0, 1.0).unwrap();
        let g = GridSpec::interval(0.0, 1.0, 1).unwrap();
        let n = 10_000;
        let vals: Vec<f64> = (0..n)
            .map(|i| m.sample_noise_grid(&g, crate::seed::derive_seed(3, i)).unwrap().increments()[0])
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() <= 3.0 * (2.0 / n as f64).sqrt(), "{mean}");
        let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
        let var = sq.iter().sum::<f64>() / n as f64;
        let sd = (sq.iter().map(|s| (s - var).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        assert!((var - 2.0).abs() <= 3.0 * sd / (n as f64).sqrt(), "{var}");
    }

    #[test]
    fn tempered_marks_follow_the_density() {
        let m = LevyModel::tempered_stable(0.5, 1.0, 3.0, 1.0, 0.1).unwrap();
        let mut rng = rng_from_seed(5);
        let n = 40_000;
        let draws: Vec<f64> = (0..n).map(|_| m.sample_mark(&mut rng)).collect();
        let p_pos = m.side_mass(Side::Positive) / m.total_mass();
        let frac = draws.iter().filter(|y| **y > 0.0).count() as f64 / n as f64;
        assert!((frac - p_pos).abs() < 4.0 * (p_pos * (1.0 - p_pos) / n as f64).sqrt());
        let mean_sq = draws.iter().map(|y| y * y).sum::<f64>() / n as f64;
        let want = m.second_moment() / m.total_mass();
        let sd = (draws.iter().map(|y| (y * y - want).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((mean_sq - want).abs() < 4.0 * sd / (n as f64).sqrt(), "{mean_sq} vs {want}");
    }
}
