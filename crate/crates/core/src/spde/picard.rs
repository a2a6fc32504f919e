//! Quasilinear heat equation `dU/dt = Delta U / 2 + f(U) + X` on the whole space.
//!
//! The whole space is replaced by a box wide enough that Brownian paths
//! started in the region of interest leave it before time `T` with
//! probability below `mass_tolerance`; the box carries absorbing boundaries.
//! The mild form is solved by Picard iteration with the stochastic
//! convolution computed once.

use std::fmt;
use std::sync::Arc;

use libm::erfc;

use super::conditions::picard_condition;
use super::heat::{interior_nodes, noise_forcing, HeatPropagator, HeatScheme};
use super::{DomainSpec, SolutionField};
use crate::error::{invalid, Error, Result};
use crate::fracops::BetaVector;
use crate::grid::{GridFunction, GridSpec};
use crate::levy::{LevyModel, NoiseRealization};

pub const PICARD_WARNING: &str = "picard_condition violated: beta_i > 1/2 - 1/d fails";

/// Scalar nonlinearity with declared Lipschitz and linear-growth constants.
#[derive(Clone)]
pub struct Nonlinearity {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lipschitz: f64,
    growth: f64,
    label: String,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("label", &self.label)
            .field("lipschitz", &self.lipschitz)
            .field("growth", &self.growth)
            .finish()
    }
}

impl Nonlinearity {
    pub fn new<F>(label: impl Into<String>, f: F, lipschitz: f64, growth: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        for (name, v) in [("lipschitz constant", lipschitz), ("growth constant", growth)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self {
            f: Arc::new(f),
            lipschitz,
            growth,
            label: label.into(),
        })
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0, 0.0, 0.0).expect("valid constants")
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(format!("constant({c})"), move |_| c, 0.0, c.abs())
    }

    pub fn sine() -> Self {
        Self::new("sin", f64::sin, 1.0, 1.0).expect("valid constants")
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzReport {
    pub lipschitz_observed: f64,
    pub growth_observed: f64,
    pub pass: bool,
}

/// Largest difference quotient over all probe pairs and largest `|f(x)| / (1 + |x|)`.
pub fn lipschitz_check(f: &Nonlinearity, range: (f64, f64), n_probes: usize) -> Result<LipschitzReport> {
    let (a, b) = range;
    if n_probes < 2 {
        return Err(invalid("lipschitz check needs at least 2 probes"));
    }
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(invalid(format!("invalid probe range [{a}, {b}]")));
    }
    let xs: Vec<f64> = (0..n_probes)
        .map(|i| a + (b - a) * i as f64 / (n_probes - 1) as f64)
        .collect();
    let fs: Vec<f64> = xs.iter().map(|x| f.eval(*x)).collect();
    if fs.iter().any(|v| !v.is_finite()) {
        return Err(invalid(format!("nonlinearity {} is not finite on the probe range", f.label)));
    }
    let mut lip = 0.0f64;
    for i in 0..n_probes {
        for j in i + 1..n_probes {
            lip = lip.max((fs[i] - fs[j]).abs() / (xs[j] - xs[i]));
        }
    }
    let growth = xs
        .iter()
        .zip(&fs)
        .map(|(x, v)| v.abs() / (1.0 + x.abs()))
        .fold(0.0f64, f64::max);
    let slack = 1.0 + 1e-9;
    Ok(LipschitzReport {
        lipschitz_observed: lip,
        growth_observed: growth,
        pass: lip <= f.lipschitz * slack + 1e-300 && growth <= f.growth * slack + 1e-300,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Escape probability allowed for the box truncation of the whole space.
    pub mass_tolerance: f64,
    /// Proceed with a warning when the existence condition fails.
    pub allow_condition_violation: bool,
    pub probe_range: (f64, f64),
    pub probes: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50,
            mass_tolerance: 1e-6,
            allow_condition_violation: false,
            probe_range: (-10.0, 10.0),
            probes: 401,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    /// `sup |U_{j+1} - U_j|` for `j = 0, 1, ...`.
    pub differences: Vec<f64>,
    pub converged: bool,
    pub horizon: f64,
    pub half_width: f64,
    pub box_lower: Vec<f64>,
    pub box_upper: Vec<f64>,
    pub condition_holds: bool,
    pub lipschitz: LipschitzReport,
    pub warnings: Vec<String>,
}

impl IterationReport {
    pub fn iterations(&self) -> usize {
        self.differences.len()
    }
}

/// Smallest `R` with `4 d Phibar(R / sqrt(T)) <= mass_tolerance`.
pub fn truncation_half_width(horizon: f64, d: usize, mass_tolerance: f64) -> f64 {
    if horizon <= 0.0 {
        return 0.0;
    }
    let escape = |r: f64| 2.0 * d as f64 * erfc(r / (2.0 * horizon).sqrt());
    let (mut lo, mut hi) = (0.0, horizon.sqrt());
    while escape(hi) > mass_tolerance {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if escape(mid) > mass_tolerance {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// The region enlarged by the truncation half-width on every side, keeping its mesh width.
pub fn truncated_domain(region: &DomainSpec, mass_tolerance: f64) -> Result<DomainSpec> {
    if !(mass_tolerance > 0.0 && mass_tolerance < 1.0) {
        return Err(invalid("mass tolerance must lie in (0, 1)"));
    }
    let r = truncation_half_width(region.horizon, region.dim(), mass_tolerance);
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut cells = Vec::new();
    for k in 0..region.dim() {
        let h = region.h(k);
        let extra = (r / h).ceil() as usize;
        lower.push(region.lower[k] - extra as f64 * h);
        upper.push(region.upper[k] + extra as f64 * h);
        cells.push(region.cells[k] + 2 * extra);
    }
    DomainSpec::new(lower, upper, cells)?.with_time(region.horizon, region.steps)
}

/// Noise grid covering the truncated box and its fractional past.
pub fn quasilinear_noise_grid(boxed: &DomainSpec, past: f64) -> Result<GridSpec> {
    if !(past.is_finite() && past >= 0.0) {
        return Err(invalid("past truncation must be finite and >= 0"));
    }
    let mut lo = vec![-past];
    let mut hi = vec![boxed.horizon.max(f64::MIN_POSITIVE)];
    for k in 0..boxed.dim() {
        lo.push(boxed.lower[k] - past);
        hi.push(boxed.upper[k]);
    }
    let d = lo.len();
    GridSpec::new(lo, hi, vec![1; d])
}

/// Samples the noise on [`quasilinear_noise_grid`] and runs [`solve_quasilinear_with_noise`].
#[allow(clippy::too_many_arguments)]
pub fn solve_quasilinear(
    f: &Nonlinearity,
    u0: &GridFunction,
    model: &LevyModel,
    beta0: f64,
    beta: &BetaVector,
    region: &DomainSpec,
    past: f64,
    seed: u64,
    opts: &PicardOptions,
) -> Result<(SolutionField, IterationReport)> {
    let boxed = truncated_domain(region, opts.mass_tolerance)?;
    let noise = model.sample_noise_grid(&quasilinear_noise_grid(&boxed, past)?, seed)?;
    solve_quasilinear_with_noise(f, u0, &noise, beta0, beta, region, opts)
}

/// Picard iteration `U_{j+1} = S U0 + H f(U_j) + V` on the truncated box of `region`,
/// starting from `U_0 = S U0 + V`.
pub fn solve_quasilinear_with_noise(
    f: &Nonlinearity,
    u0: &GridFunction,
    noise: &NoiseRealization,
    beta0: f64,
    beta: &BetaVector,
    region: &DomainSpec,
    opts: &PicardOptions,
) -> Result<(SolutionField, IterationReport)> {
    let d = region.dim();
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(invalid("picard tolerance must be > 0 and max_iter >= 1"));
    }
    if u0.grid().dim() != d {
        return Err(Error::Shape(format!("U0 has dimension {}, domain has {d}", u0.grid().dim())));
    }
    let mut warnings = Vec::new();
    let condition_holds = picard_condition(beta, d);
    if !condition_holds {
        if opts.allow_condition_violation {
            warnings.push(PICARD_WARNING.to_string());
        } else {
            return Err(invalid(PICARD_WARNING));
        }
    }
    let lipschitz = lipschitz_check(f, opts.probe_range, opts.probes)?;
    if !lipschitz.pass {
        return Err(Error::LipschitzViolation {
            observed_lipschitz: lipschitz.lipschitz_observed,
            observed_growth: lipschitz.growth_observed,
            declared_lipschitz: f.lipschitz(),
            declared_growth: f.growth(),
        });
    }
    let boxed = truncated_domain(region, opts.mass_tolerance)?;
    let half_width = truncation_half_width(region.horizon, d, opts.mass_tolerance);
    let prop = HeatPropagator::new(&boxed, HeatScheme::Exponential)?;
    let nodes = interior_nodes(&boxed);
    let initial: Vec<f64> = nodes
        .iter()
        .map(|x| u0.grid().locate(x).map_or(0.0, |c| u0.values()[c]))
        .collect();
    let n = nodes.len();
    let steps = boxed.steps;
    let v = prop.evolve(&noise_forcing(noise, beta0, beta, &boxed)?, None)?;
    let s = prop.evolve(&vec![0.0; steps * n], Some(&initial))?;
    let base: Vec<f64> = v.iter().zip(&s).map(|(a, b)| a + b).collect();

    let mut u = base.clone();
    let mut differences = Vec::new();
    let mut forcing = vec![0.0; steps * n];
    let mut converged = false;
    while differences.len() < opts.max_iter {
        for m in 0..steps {
            for k in 0..n {
                forcing[m * n + k] = f.eval(u[m * n + k]);
            }
        }
        let h = prop.evolve(&forcing, None)?;
        let mut diff = 0.0f64;
        for (i, ui) in u.iter_mut().enumerate() {
            let next = base[i] + h[i];
            diff = diff.max((next - *ui).abs());
            *ui = next;
        }
        if !diff.is_finite() {
            return Err(Error::Internal("picard iterate became non-finite".into()));
        }
        differences.push(diff);
        if diff <= opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged { differences });
    }
    let mut values = Vec::with_capacity((steps + 1) * boxed.full_len());
    for slice in u.chunks(n) {
        values.extend(boxed.embed(slice));
    }
    let mut field = SolutionField::new(boxed.clone(), boxed.times(), values);
    field.seed = Some(noise.seed());
    let report = IterationReport {
        differences,
        converged,
        horizon: region.horizon,
        half_width,
        box_lower: boxed.lower.clone(),
        box_upper: boxed.upper.clone(),
        condition_holds,
        lipschitz,
        warnings,
    };
    Ok((field, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spde::heat::{solve_heat, solve_heat_deterministic};

    fn region(t: f64) -> DomainSpec {
        DomainSpec::unit_cube(1, 16).unwrap().with_time(t, 25).unwrap()
    }

    fn bump() -> GridFunction {
        GridFunction::from_fn(GridSpec::interval(0.0, 1.0, 32).unwrap(), |x| (std::f64::consts::PI * x[0]).sin()).unwrap()
    }

    fn noise_for(region: &DomainSpec, seed: u64) -> NoiseRealization {
        let boxed = truncated_domain(region, 1e-6).unwrap();
        let m = LevyModel::finite_activity(2.0, vec![(0.5, 0.5), (-0.5, 0.5)], 0.0).unwrap();
        m.sample_noise_grid(&quasilinear_noise_grid(&boxed, 2.0).unwrap(), seed).unwrap()
    }

    #[test]
    fn lipschitz_examples() {
        let z = lipschitz_check(&Nonlinearity::zero(), (-10.0, 10.0), 101).unwrap();
        assert_eq!((z.lipschitz_observed, z.growth_observed, z.pass), (0.0, 0.0, true));
        assert!(lipschitz_check(&Nonlinearity::sine(), (-10.0, 10.0), 1001).unwrap().pass);
        let sq = Nonlinearity::new("square", |x| x * x, 1.0, 1.0).unwrap();
        let r = lipschitz_check(&sq, (-10.0, 10.0), 1001).unwrap();
        assert!(!r.pass);
        // max |x + y| over distinct probes is 20 - 0.02
        assert!((r.lipschitz_observed - 19.98).abs() < 1e-9, "{}", r.lipschitz_observed);
    }

    #[test]
    fn truncation_width_meets_mass_bound() {
        let r = truncation_half_width(0.5, 1, 1e-6);
        assert!((2.0 * erfc(r / 1.0f64.sqrt()) - 1e-6).abs() < 1e-12);
        assert!(truncation_half_width(0.5, 3, 1e-6) > r);
    }

    #[test]
    fn zero_nonlinearity_is_linear_solution_plus_semigroup() {
        let reg = region(0.5);
        let noise = noise_for(&reg, 4);
        let beta = BetaVector::uniform(1, 0.3).unwrap();
        let (u, rep) = solve_quasilinear_with_noise(&Nonlinearity::zero(), &bump(), &noise, 0.2, &beta, &reg, &PicardOptions::default()).unwrap();
        assert_eq!(rep.differences, vec![0.0]);
        let boxed = truncated_domain(&reg, 1e-6).unwrap();
        let lin = solve_heat(&noise, 0.2, &beta, &boxed).unwrap();
        let init = bump();
        let prop = HeatPropagator::new(&boxed, HeatScheme::Exponential).unwrap();
        let u0: Vec<f64> = interior_nodes(&boxed)
            .iter()
            .map(|x| init.grid().locate(x).map_or(0.0, |c| init.values()[c]))
            .collect();
        let semi = prop.solve(&vec![0.0; boxed.steps * boxed.interior_len()], Some(&u0)).unwrap();
        for i in 0..u.values.len() {
            assert!((u.values[i] - lin.values[i] - semi.values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_nonlinearity_superposition() {
        let reg = region(0.5);
        let noise = noise_for(&reg, 5);
        let beta = BetaVector::uniform(1, 0.3).unwrap();
        let opts = PicardOptions::default();
        let zero = GridFunction::zeros(GridSpec::interval(0.0, 1.0, 4).unwrap());
        let (u, _) = solve_quasilinear_with_noise(&Nonlinearity::constant(0.7).unwrap(), &zero, &noise, 0.2, &beta, &reg, &opts).unwrap();
        let (lin, _) = solve_quasilinear_with_noise(&Nonlinearity::zero(), &zero, &noise, 0.2, &beta, &reg, &opts).unwrap();
        let extra = solve_heat_deterministic(&u.domain, |_, _| 0.7, HeatScheme::Exponential).unwrap();
        for i in 0..u.values.len() {
            assert!((u.values[i] - lin.values[i] - extra.values[i]).abs() <= 2.0 * opts.tol);
        }
        // away from the absorbing walls the deterministic part is c t
        let m = u.times.len() - 1;
        let centre = u.domain.full_index(&u.domain.nearest_node(&[0.5]));
        let gap = u.slice(m)[centre] - lin.slice(m)[centre];
        assert!((gap - 0.7 * 0.5).abs() < 1e-6, "{gap}");
    }

    #[test]
    fn sine_converges_with_shrinking_differences() {
        let reg = region(0.5);
        let noise = noise_for(&reg, 6);
        let beta = BetaVector::uniform(1, 0.3).unwrap();
        let (_, rep) = solve_quasilinear_with_noise(&Nonlinearity::sine(), &bump(), &noise, 0.2, &beta, &reg, &PicardOptions::default()).unwrap();
        assert!(rep.converged && rep.iterations() <= 15, "{:?}", rep.differences);
        for w in rep.differences[1..].windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn condition_and_lipschitz_failures() {
        let reg = DomainSpec::unit_cube(4, 8).unwrap().with_time(0.1, 2).unwrap();
        let beta = BetaVector::uniform(4, 0.2).unwrap();
        let noise = NoiseRealization::zero(&GridSpec::cube(5, -1.0, 1.0, 1).unwrap());
        let u0 = GridFunction::zeros(GridSpec::cube(4, 0.0, 1.0, 1).unwrap());
        let err = solve_quasilinear_with_noise(&Nonlinearity::sine(), &u0, &noise, 0.2, &beta, &reg, &PicardOptions::default()).unwrap_err();
        assert!(err.to_string().contains(PICARD_WARNING));

        let reg1 = region(0.5);
        let sq = Nonlinearity::new("square", |x| x * x, 1.0, 1.0).unwrap();
        let err = solve_quasilinear_with_noise(&sq, &bump(), &noise_for(&reg1, 1), 0.2, &BetaVector::uniform(1, 0.3).unwrap(), &reg1, &PicardOptions::default()).unwrap_err();
        assert!(matches!(err, Error::LipschitzViolation { .. }));
    }

    #[test]
    fn max_iter_reports_differences() {
        let reg = region(0.5);
        let opts = PicardOptions {
            max_iter: 2,
            ..PicardOptions::default()
        };
        let beta = BetaVector::uniform(1, 0.3).unwrap();
        match solve_quasilinear_with_noise(&Nonlinearity::sine(), &bump(), &noise_for(&reg, 2), 0.2, &beta, &reg, &opts) {
            Err(Error::NotConverged { differences }) => assert_eq!(differences.len(), 2),
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }
}
