//! Linear stochastic heat equation `dU/dt = Delta U / 2 + X`, `U(0) = 0`, zero Dirichlet data.
//!
//! Time axis 0 of the noise grid is time; the remaining axes are space. The
//! forcing on time cell `[t_m, t_{m+1})` is the exact space-time cell average
//! of the fractional noise, and each sine mode is advanced exactly for that
//! piecewise-constant forcing.

use libm::tgamma;

use super::{
    cell_kernel_average, fractional_forcing, neg_laplacian, DomainSpec, ForcingAxes, SineBasis,
    SolutionField,
};
use crate::error::{invalid, Error, Result};
use crate::fracops::BetaVector;
use crate::levy::NoiseRealization;
use crate::quad::{geometric_past_points, tanh_sinh_rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeatScheme {
    /// Exact per-mode propagation; unconditionally stable.
    #[default]
    Exponential,
    ExplicitEuler,
}

/// Largest stable step of explicit Euler for `Delta_h / 2`.
pub fn explicit_step_limit(domain: &DomainSpec) -> f64 {
    1.0 / (0..domain.dim()).map(|k| domain.h(k).powi(-2)).sum::<f64>()
}

pub fn solve_heat(noise: &NoiseRealization, beta0: f64, beta: &BetaVector, domain: &DomainSpec) -> Result<SolutionField> {
    solve_heat_with(noise, beta0, beta, domain, HeatScheme::Exponential)
}

pub fn solve_heat_with(
    noise: &NoiseRealization,
    beta0: f64,
    beta: &BetaVector,
    domain: &DomainSpec,
    scheme: HeatScheme,
) -> Result<SolutionField> {
    let forcing = noise_forcing(noise, beta0, beta, domain)?;
    let prop = HeatPropagator::new(domain, scheme)?;
    let mut out = prop.solve(&forcing, None)?;
    out.seed = Some(noise.seed());
    Ok(out)
}

/// Heat solve with deterministic forcing `g(t, x)` sampled at time-cell midpoints and interior nodes.
pub fn solve_heat_deterministic<G: Fn(f64, &[f64]) -> f64>(
    domain: &DomainSpec,
    g: G,
    scheme: HeatScheme,
) -> Result<SolutionField> {
    let prop = HeatPropagator::new(domain, scheme)?;
    let nodes = interior_nodes(domain);
    let mut forcing = Vec::with_capacity(domain.steps * nodes.len());
    for (a, b) in domain.time_cells() {
        let t = 0.5 * (a + b);
        forcing.extend(nodes.iter().map(|x| g(t, x)));
    }
    prop.solve(&forcing, None)
}

pub(crate) fn interior_nodes(domain: &DomainSpec) -> Vec<Vec<f64>> {
    let d = domain.dim();
    let shape = domain.interior_shape();
    (0..domain.interior_len())
        .map(|c| {
            let mut rem = c;
            let mut x = vec![0.0; d];
            for k in (0..d).rev() {
                x[k] = domain.node(k, rem % shape[k] + 1);
                rem /= shape[k];
            }
            x
        })
        .collect()
}

fn check_betas(beta0: f64, beta: &BetaVector, domain: &DomainSpec) -> Result<()> {
    BetaVector::new(vec![beta0]).map_err(|_| invalid(format!("beta0 = {beta0} out of (0, 0.5)")))?;
    if beta.dim() != domain.dim() {
        return Err(Error::Shape(format!(
            "beta has dimension {}, domain has {}",
            beta.dim(),
            domain.dim()
        )));
    }
    Ok(())
}

/// Space-time control-cell averages of the fractional noise, time-major over interior nodes.
pub(crate) fn noise_forcing(
    noise: &NoiseRealization,
    beta0: f64,
    beta: &BetaVector,
    domain: &DomainSpec,
) -> Result<Vec<f64>> {
    check_betas(beta0, beta, domain)?;
    if domain.steps == 0 {
        return Ok(Vec::new());
    }
    let mut betas = vec![beta0];
    betas.extend_from_slice(beta.as_slice());
    let mut cells = vec![domain.time_cells()];
    cells.extend((0..domain.dim()).map(|k| domain.control_cells(k)));
    fractional_forcing(noise, &ForcingAxes { betas: &betas, cells })
}

/// Time stepper on a fixed domain; reused across Picard iterations.
#[derive(Debug, Clone)]
pub(crate) struct HeatPropagator {
    domain: DomainSpec,
    scheme: HeatScheme,
    basis: SineBasis,
    decay: Vec<f64>,
    gain: Vec<f64>,
}

impl HeatPropagator {
    pub fn new(domain: &DomainSpec, scheme: HeatScheme) -> Result<Self> {
        let dt = domain.dt();
        if scheme == HeatScheme::ExplicitEuler && domain.steps > 0 {
            let limit = explicit_step_limit(domain);
            if dt > limit {
                return Err(Error::Stability { dt, limit });
            }
        }
        let basis = SineBasis::new(domain);
        let eig = basis.mode_eigenvalues();
        let decay = eig.iter().map(|mu| (-0.5 * mu * dt).exp()).collect();
        let gain = eig
            .iter()
            .map(|mu| -(-0.5 * mu * dt).exp_m1() / (0.5 * mu))
            .collect();
        Ok(Self {
            domain: domain.clone(),
            scheme,
            basis,
            decay,
            gain,
        })
    }

    /// Interior values at every time level (time-major) for forcing given per time cell.
    pub fn evolve(&self, forcing: &[f64], initial: Option<&[f64]>) -> Result<Vec<f64>> {
        let n = self.domain.interior_len();
        let steps = self.domain.steps;
        if forcing.len() != steps * n {
            return Err(Error::Shape(format!(
                "forcing has {} values, expected {steps} time cells x {n} nodes",
                forcing.len()
            )));
        }
        let mut out = Vec::with_capacity((steps + 1) * n);
        let mut u = match initial {
            Some(u0) if u0.len() == n => u0.to_vec(),
            Some(u0) => {
                return Err(Error::Shape(format!(
                    "initial condition has {} values, expected {n}",
                    u0.len()
                )))
            }
            None => vec![0.0; n],
        };
        out.extend_from_slice(&u);
        match self.scheme {
            HeatScheme::Exponential => {
                let mut uh = u;
                self.basis.transform(&mut uh);
                let mut fh = vec![0.0; n];
                for m in 0..steps {
                    fh.copy_from_slice(&forcing[m * n..(m + 1) * n]);
                    self.basis.transform(&mut fh);
                    for k in 0..n {
                        uh[k] = self.decay[k] * uh[k] + self.gain[k] * fh[k];
                    }
                    let mut back = uh.clone();
                    self.basis.transform(&mut back);
                    out.extend_from_slice(&back);
                }
            }
            HeatScheme::ExplicitEuler => {
                let dt = self.domain.dt();
                for m in 0..steps {
                    let lap = neg_laplacian(&self.domain, &u);
                    for k in 0..n {
                        u[k] += dt * (forcing[m * n + k] - 0.5 * lap[k]);
                    }
                    out.extend_from_slice(&u);
                }
            }
        }
        Ok(out)
    }

    pub fn solve(&self, forcing: &[f64], initial: Option<&[f64]>) -> Result<SolutionField> {
        let n = self.domain.interior_len();
        let interior = self.evolve(forcing, initial)?;
        let mut values = Vec::with_capacity((self.domain.steps + 1) * self.domain.full_len());
        for slice in interior.chunks(n) {
            values.extend(self.domain.embed(slice));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Internal("heat solve produced non-finite values".into()));
        }
        Ok(SolutionField::new(self.domain.clone(), self.domain.times(), values))
    }
}

/// `U(T, x_p)` at one node, evaluated straight from the jump list without
/// forming the full space-time forcing. Matches [`solve_heat`] at that node.
#[derive(Debug, Clone)]
pub struct HeatPointFunctional {
    domain: DomainSpec,
    beta0: f64,
    beta: Vec<f64>,
    /// Per axis: basis matrix restricted to the modes in use, `modes x interior nodes`.
    axis_modes: Vec<Vec<usize>>,
    axis_basis: Vec<Vec<f64>>,
    /// Per active mode: per-axis slot, `phi(x_p)`, decay and gain.
    modes: Vec<(Vec<usize>, f64, f64, f64)>,
}

impl HeatPointFunctional {
    pub fn new(domain: &DomainSpec, beta0: f64, beta: &BetaVector, point: &[f64]) -> Result<Self> {
        check_betas(beta0, beta, domain)?;
        if domain.steps == 0 {
            return Err(invalid("point functional needs at least one time step"));
        }
        let d = domain.dim();
        let node = domain.nearest_node(point);
        if node.iter().zip(&domain.cells).any(|(&i, &n)| i == 0 || i >= n) {
            return Err(invalid("point functional node lies on the boundary"));
        }
        let basis = SineBasis::new(domain);
        let shape = domain.interior_shape();
        let mut axis_modes = Vec::new();
        let mut axis_basis = Vec::new();
        let mut axis_phi = Vec::new();
        for k in 0..d {
            let mut modes = Vec::new();
            let mut phis = Vec::new();
            let mut mat = Vec::new();
            for m in 1..=shape[k] {
                let phi = basis.entry(k, m, node[k]);
                if phi.abs() > 1e-13 {
                    modes.push(m);
                    phis.push(phi);
                    mat.extend((1..=shape[k]).map(|i| basis.entry(k, m, i)));
                }
            }
            axis_modes.push(modes);
            axis_basis.push(mat);
            axis_phi.push(phis);
        }
        let dt = domain.dt();
        let mut modes = Vec::new();
        let counts: Vec<usize> = axis_modes.iter().map(|m| m.len()).collect();
        let total: usize = counts.iter().product();
        for c in 0..total {
            let mut rem = c;
            let mut slots = vec![0usize; d];
            for k in (0..d).rev() {
                slots[k] = rem % counts[k];
                rem /= counts[k];
            }
            let mut phi = 1.0;
            let mut mu = 0.0;
            for k in 0..d {
                phi *= axis_phi[k][slots[k]];
                mu += basis.eig[k][axis_modes[k][slots[k]] - 1];
            }
            let decay = (-0.5 * mu * dt).exp();
            let gain = -(-0.5 * mu * dt).exp_m1() / (0.5 * mu);
            modes.push((slots, phi, decay, gain));
        }
        Ok(Self {
            domain: domain.clone(),
            beta0,
            beta: beta.as_slice().to_vec(),
            axis_modes,
            axis_basis,
            modes,
        })
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    fn contract(&self, time: &[f64], space: &[Vec<f64>]) -> f64 {
        let d = self.domain.dim();
        let projected: Vec<Vec<f64>> = (0..d)
            .map(|k| {
                let n = space[k].len();
                self.axis_basis[k]
                    .chunks(n)
                    .map(|row| row.iter().zip(&space[k]).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        let first = time.iter().position(|v| *v != 0.0).unwrap_or(time.len());
        let mut acc = 0.0;
        for (slots, phi, decay, gain) in &self.modes {
            let mut s = *phi * gain;
            for k in 0..d {
                s *= projected[k][slots[k]];
            }
            if s == 0.0 {
                continue;
            }
            let mut horner = 0.0;
            for v in &time[first..] {
                horner = horner * decay + v;
            }
            acc += s * horner;
        }
        acc
    }

    pub fn value(&self, noise: &NoiseRealization) -> Result<f64> {
        let d = self.domain.dim();
        let grid = noise.grid();
        if grid.dim() != d + 1 {
            return Err(Error::Shape(format!(
                "noise grid has dimension {}, expected {}",
                grid.dim(),
                d + 1
            )));
        }
        let tcells = self.domain.time_cells();
        let scells: Vec<Vec<(f64, f64)>> = (0..d).map(|k| self.domain.control_cells(k)).collect();
        let mut betas = vec![self.beta0];
        betas.extend_from_slice(&self.beta);
        let g1: Vec<f64> = betas.iter().map(|b| tgamma(b + 1.0)).collect();
        let g2: Vec<f64> = betas.iter().map(|b| tgamma(b + 2.0)).collect();
        let mut space = vec![Vec::new(); d];
        let mut time = vec![0.0; tcells.len()];
        let mut total = 0.0;
        for (s, y) in noise.jumps() {
            for (m, &(a, b)) in tcells.iter().enumerate() {
                time[m] = cell_kernel_average(betas[0], g1[0], s[0], a, b);
            }
            for k in 0..d {
                space[k] = scells[k]
                    .iter()
                    .map(|&(a, b)| cell_kernel_average(betas[k + 1], g1[k + 1], s[k + 1], a, b))
                    .collect();
            }
            total += y * self.contract(&time, &space);
        }
        let m1 = noise.compensator_density();
        if m1 != 0.0 {
            let comp = |axis: usize, a: f64, b: f64| {
                let l = grid.lower()[axis];
                let p = betas[axis] + 1.0;
                ((b - l).max(0.0).powf(p) - (a - l).max(0.0).powf(p)) / (g2[axis] * (b - a))
            };
            for (m, &(a, b)) in tcells.iter().enumerate() {
                time[m] = comp(0, a, b);
            }
            for k in 0..d {
                space[k] = scells[k].iter().map(|&(a, b)| comp(k + 1, a, b)).collect();
            }
            total -= m1 * self.contract(&time, &space);
        }
        Ok(total)
    }

    /// Exact `E U(T, x)^2 = m2 int k(s)^2 ds` for noise with second moment
    /// `m2` supported on `[lower, (T, upper)]`, where `k` is the response of
    /// the node value to a unit jump at `s`. Uses per-axis Gram matrices of
    /// the separable mode factors.
    pub fn second_moment(&self, m2: f64, lower: &[f64]) -> Result<f64> {
        let d = self.domain.dim();
        if lower.len() != d + 1 {
            return Err(Error::Shape(format!("lower corner has {} entries, expected {}", lower.len(), d + 1)));
        }
        let tcells = self.domain.time_cells();
        if lower[0] > tcells[0].0 || (0..d).any(|k| lower[k + 1] > self.domain.control_cells(k)[0].0) {
            return Err(invalid("noise support does not cover the solution cells"));
        }
        let mut betas = vec![self.beta0];
        betas.extend_from_slice(&self.beta);
        let gram = |axis: usize, cells: &[(f64, f64)], rows: &dyn Fn(&[f64]) -> Vec<f64>| {
            let beta = betas[axis];
            let g1 = tgamma(beta + 1.0);
            let mut pts = vec![lower[axis]];
            let first = cells[0].0;
            pts.extend(geometric_past_points(lower[axis] - first).into_iter().rev().map(|p| first + p));
            pts.extend(cells.iter().flat_map(|c| [c.0, c.1]));
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            let mut out: Option<(usize, Vec<f64>)> = None;
            for w in pts.windows(2) {
                for (s, wt) in tanh_sinh_rule(w[0], w[1], 1.0 / 16.0) {
                    let raw: Vec<f64> = cells.iter().map(|&(a, b)| cell_kernel_average(beta, g1, s, a, b)).collect();
                    let f = rows(&raw);
                    let r = f.len();
                    let (_, g) = out.get_or_insert_with(|| (r, vec![0.0; r * r]));
                    for i in 0..r {
                        for j in 0..r {
                            g[i * r + j] += wt * f[i] * f[j];
                        }
                    }
                }
            }
            out.unwrap_or((0, Vec::new()))
        };
        let (steps, gt) = gram(0, &tcells, &|v: &[f64]| v.to_vec());
        let space: Vec<(usize, Vec<f64>)> = (0..d)
            .map(|k| {
                let basis = &self.axis_basis[k];
                let n = self.domain.cells[k] - 1;
                gram(k + 1, &self.domain.control_cells(k), &|v: &[f64]| {
                    basis.chunks(n).map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
                })
            })
            .collect();
        // time weights per mode: D_m = decay^(M-1-m) and W = G_T D
        let profiles: Vec<(Vec<f64>, Vec<f64>)> = self
            .modes
            .iter()
            .map(|(_, phi, decay, gain)| {
                let mut dv = vec![0.0; steps];
                let mut p = phi * gain;
                for m in (0..steps).rev() {
                    dv[m] = p;
                    p *= decay;
                }
                let wv = (0..steps)
                    .map(|i| (0..steps).map(|j| gt[i * steps + j] * dv[j]).sum())
                    .collect();
                (dv, wv)
            })
            .collect();
        let mut total = 0.0;
        for (a, (sa, ..)) in self.modes.iter().enumerate() {
            for (b, (sb, ..)) in self.modes.iter().enumerate() {
                let mut sp = 1.0;
                for k in 0..d {
                    let (r, g) = &space[k];
                    sp *= g[sa[k] * r + sb[k]];
                }
                let t: f64 = profiles[a].0.iter().zip(&profiles[b].1).map(|(x, y)| x * y).sum();
                total += sp * t;
            }
        }
        Ok(m2 * total)
    }

    pub fn modes_per_axis(&self) -> Vec<usize> {
        self.axis_modes.iter().map(|m| m.len()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::levy::LevyModel;
    use std::f64::consts::PI;

    fn space_time_noise(d: usize, t: f64, past: f64, seed: u64) -> NoiseRealization {
        let m = LevyModel::finite_activity(3.0, vec![(1.0, 0.5), (-0.7, 0.5)], 0.0).unwrap();
        let mut lo = vec![-past; d + 1];
        let mut hi = vec![1.0; d + 1];
        lo[0] = -past;
        hi[0] = t;
        m.sample_noise_grid(&GridSpec::new(lo, hi, vec![2; d + 1]).unwrap(), seed)
            .unwrap()
    }

    #[test]
    fn zero_noise_zero_solution() {
        let dom = DomainSpec::unit_cube(1, 16).unwrap().with_time(1.0, 10).unwrap();
        let z = NoiseRealization::zero(&GridSpec::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![1, 1]).unwrap());
        let u = solve_heat(&z, 0.2, &BetaVector::uniform(1, 0.2).unwrap(), &dom).unwrap();
        assert!(u.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn boundary_and_initial_slice_are_zero() {
        let dom = DomainSpec::unit_cube(2, 8).unwrap().with_time(0.5, 5).unwrap();
        let noise = space_time_noise(2, 0.5, 1.0, 3);
        let u = solve_heat(&noise, 0.3, &BetaVector::uniform(2, 0.3).unwrap(), &dom).unwrap();
        assert!(u.slice(0).iter().all(|v| *v == 0.0));
        for m in 0..=5 {
            let s = u.slice(m);
            for i in 0..=8 {
                for idx in [[0, i], [8, i], [i, 0], [i, 8]] {
                    assert_eq!(s[dom.full_index(&idx)], 0.0);
                }
            }
        }
        assert!(u.last_slice().iter().any(|v| *v != 0.0));
    }

    #[test]
    fn zero_horizon_returns_initial_slice() {
        let dom = DomainSpec::unit_cube(1, 8).unwrap();
        let noise = space_time_noise(1, 1.0, 1.0, 3);
        let u = solve_heat(&noise, 0.3, &BetaVector::uniform(1, 0.3).unwrap(), &dom).unwrap();
        assert_eq!(u.times, vec![0.0]);
        assert!(u.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_in_the_noise() {
        let dom = DomainSpec::unit_cube(1, 16).unwrap().with_time(1.0, 8).unwrap();
        let beta = BetaVector::uniform(1, 0.25).unwrap();
        let n1 = space_time_noise(1, 1.0, 2.0, 1);
        let n2 = space_time_noise(1, 1.0, 2.0, 2);
        let u = solve_heat(&n1.combine(1.5, &n2, 3.0).unwrap(), 0.1, &beta, &dom).unwrap();
        let u1 = solve_heat(&n1, 0.1, &beta, &dom).unwrap();
        let u2 = solve_heat(&n2, 0.1, &beta, &dom).unwrap();
        for k in 0..u.values.len() {
            assert!((u.values[k] - 1.5 * u1.values[k] - 3.0 * u2.values[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_forcing_reaches_steady_state() {
        let dom = DomainSpec::unit_cube(1, 32).unwrap().with_time(5.0, 50).unwrap();
        let u = solve_heat_deterministic(&dom, |_, _| 1.0, HeatScheme::Exponential).unwrap();
        let last = u.last_slice();
        assert!((last[16] - 0.25).abs() < 1e-4);
        for (i, x) in dom.nodes(0).iter().enumerate() {
            assert!((last[i] - x * (1.0 - x)).abs() < 1e-4);
        }
    }

    #[test]
    fn single_mode_forcing_matches_closed_form() {
        // g = sin(pi x): u = sin(pi x) (1 - exp(-mu t / 2)) / (mu / 2) with the discrete mu
        let n = 16;
        let dom = DomainSpec::unit_cube(1, n).unwrap().with_time(0.7, 7).unwrap();
        let u = solve_heat_deterministic(&dom, |_, x| (PI * x[0]).sin(), HeatScheme::Exponential).unwrap();
        let h = 1.0 / n as f64;
        let mu = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        let want = (1.0 - (-0.5 * mu * 0.7).exp()) / (0.5 * mu);
        assert!((u.last_slice()[n / 2] - want).abs() < 1e-13);
    }

    #[test]
    fn consistency_order_in_time() {
        // residual of (U_{m+1} - U_m)/dt - Delta_h (U_m + U_{m+1})/4 against g at the cell midpoint
        let n = 16;
        let g = |t: f64, x: &[f64]| (PI * x[0]).sin() * (3.0 * t).cos() + x[0] * (1.0 - x[0]);
        let mut errs = Vec::new();
        for steps in [20usize, 40, 80] {
            let dom = DomainSpec::unit_cube(1, n).unwrap().with_time(1.0, steps).unwrap();
            let u = solve_heat_deterministic(&dom, g, HeatScheme::Exponential).unwrap();
            let dt = dom.dt();
            let nodes = dom.nodes(0);
            let mut worst = 0.0f64;
            for m in 0..steps {
                let a = u.slice(m);
                let b = u.slice(m + 1);
                for i in 1..n {
                    let lap = |s: &[f64]| (s[i - 1] - 2.0 * s[i] + s[i + 1]) / (nodes[1] - nodes[0]).powi(2);
                    let r = (b[i] - a[i]) / dt - 0.25 * (lap(a) + lap(b)) - g((m as f64 + 0.5) * dt, &[nodes[i]]);
                    worst = worst.max(r.abs());
                }
            }
            errs.push(worst);
        }
        let order = (errs[1] / errs[2]).log2();
        assert!(order >= 1.0, "{errs:?}");
    }

    #[test]
    fn explicit_scheme_checks_stability() {
        let dom = DomainSpec::unit_cube(1, 32).unwrap().with_time(1.0, 100).unwrap();
        match solve_heat_deterministic(&dom, |_, _| 1.0, HeatScheme::ExplicitEuler) {
            Err(Error::Stability { dt, limit }) => {
                assert!((dt - 0.01).abs() < 1e-15);
                assert!((limit - 1.0 / 1024.0).abs() < 1e-15);
            }
            other => panic!("expected stability error, got {other:?}"),
        }
        let fine = DomainSpec::unit_cube(1, 16).unwrap().with_time(1.0, 4000).unwrap();
        let e = solve_heat_deterministic(&fine, |_, _| 1.0, HeatScheme::ExplicitEuler).unwrap();
        let x = solve_heat_deterministic(&fine, |_, _| 1.0, HeatScheme::Exponential).unwrap();
        assert!((e.last_slice()[8] - x.last_slice()[8]).abs() < 1e-3);
    }

    #[test]
    fn point_functional_matches_full_solve() {
        for d in [1usize, 2] {
            let dom = DomainSpec::unit_cube(d, 8).unwrap().with_time(1.0, 6).unwrap();
            let beta = BetaVector::uniform(d, 0.3).unwrap();
            let noise = space_time_noise(d, 1.0, 1.5, 9);
            let full = solve_heat(&noise, 0.2, &beta, &dom).unwrap();
            let p = vec![0.5; d];
            let f = HeatPointFunctional::new(&dom, 0.2, &beta, &p).unwrap();
            let direct = f.value(&noise).unwrap();
            let want = full.value_near(6, &p);
            assert!((direct - want).abs() < 1e-10 * (1.0 + want.abs()), "d={d}: {direct} vs {want}");
        }
    }

    #[test]
    fn second_moment_matches_brute_force_quadrature() {
        // product rule over (s0, s1) applied to single-jump responses
        let dom = DomainSpec::unit_cube(1, 8).unwrap().with_time(0.5, 4).unwrap();
        let beta = BetaVector::uniform(1, 0.3).unwrap();
        let f = HeatPointFunctional::new(&dom, 0.2, &beta, &[0.5]).unwrap();
        let grid = GridSpec::new(vec![-1.0, -1.0], vec![0.6, 1.1], vec![1, 1]).unwrap();
        let axis = |lo: f64, edges: Vec<f64>| {
            let mut pts = vec![lo];
            pts.extend(edges);
            pts.windows(2).flat_map(|w| tanh_sinh_rule(w[0], w[1], 1.0 / 16.0)).collect::<Vec<_>>()
        };
        let t_nodes = axis(-1.0, (0..=4).map(|m| m as f64 * 0.125).collect());
        let x_nodes = axis(-1.0, (0..=7).map(|i| (i as f64 + 0.5) / 8.0).collect());
        let mut brute = 0.0;
        for &(t, wt) in &t_nodes {
            for &(x, wx) in &x_nodes {
                let noise = NoiseRealization::from_jumps(&grid, vec![t, x], vec![1.0], 0.0).unwrap();
                brute += wt * wx * f.value(&noise).unwrap().powi(2);
            }
        }
        let exact = f.second_moment(2.0, &[-1.0, -1.0]).unwrap();
        assert!((exact - 2.0 * brute).abs() < 1e-9 * exact, "{exact} {brute}");
    }

    #[test]
    fn second_moment_against_monte_carlo() {
        let dom = DomainSpec::unit_cube(2, 8).unwrap().with_time(0.5, 8).unwrap();
        let beta = BetaVector::uniform(2, 0.35).unwrap();
        let f = HeatPointFunctional::new(&dom, 0.3, &beta, &[0.5, 0.5]).unwrap();
        let m = LevyModel::single_jump(20.0, 0.5).unwrap();
        let grid = GridSpec::new(vec![-1.0; 3], vec![0.5, 1.0, 1.0], vec![1, 1, 1]).unwrap();
        let exact = f.second_moment(m.second_moment(), &[-1.0; 3]).unwrap();
        let n = 4000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for seed in 0..n {
            let v = f.value(&m.sample_noise_grid(&grid, seed).unwrap()).unwrap().powi(2);
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - exact).abs() <= 3.0 * se, "{mean} +- {se} vs {exact}");
    }
}
