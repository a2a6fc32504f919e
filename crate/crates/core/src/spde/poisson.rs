//! Stochastic Poisson equation `Delta U = -X` with zero Dirichlet data.

use super::{fractional_forcing, neg_laplacian, DomainSpec, ForcingAxes, SineBasis, SolutionField};
use crate::error::{Error, Result};
use crate::fracops::BetaVector;
use crate::levy::NoiseRealization;

/// Solves `-Delta_h U = X` where `X` is the control-cell average of the
/// fractional noise built from the jumps of `noise`.
pub fn solve_poisson(noise: &NoiseRealization, beta: &BetaVector, domain: &DomainSpec) -> Result<SolutionField> {
    if beta.dim() != domain.dim() {
        return Err(Error::Shape(format!(
            "beta has dimension {}, domain has {}",
            beta.dim(),
            domain.dim()
        )));
    }
    let axes = ForcingAxes {
        betas: beta.as_slice(),
        cells: (0..domain.dim()).map(|k| domain.control_cells(k)).collect(),
    };
    let rhs = fractional_forcing(noise, &axes)?;
    let mut sol = solve_poisson_rhs(&rhs, domain)?;
    sol.seed = Some(noise.seed());
    Ok(sol)
}

/// Solves `-Delta_h U = g` for interior right-hand side values `g` (row-major).
pub fn solve_poisson_rhs(rhs: &[f64], domain: &DomainSpec) -> Result<SolutionField> {
    if rhs.len() != domain.interior_len() {
        return Err(Error::Shape(format!(
            "right-hand side has {} values, the domain has {} interior nodes",
            rhs.len(),
            domain.interior_len()
        )));
    }
    let basis = SineBasis::new(domain);
    let eig = basis.mode_eigenvalues();
    let solve = |g: &[f64]| {
        let mut w = g.to_vec();
        basis.transform(&mut w);
        for (v, mu) in w.iter_mut().zip(&eig) {
            *v /= mu;
        }
        basis.transform(&mut w);
        w
    };
    let mut u = solve(rhs);
    let residual_of = |u: &[f64]| -> Vec<f64> {
        neg_laplacian(domain, u)
            .iter()
            .zip(rhs)
            .map(|(a, g)| g - a)
            .collect()
    };
    // one step of iterative refinement removes most transform round-off
    let r = residual_of(&u);
    let du = solve(&r);
    for (a, b) in u.iter_mut().zip(&du) {
        *a += b;
    }
    let residual = residual_of(&u).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Internal("Dirichlet solve produced non-finite values".into()));
    }
    let mut out = SolutionField::new(domain.clone(), Vec::new(), domain.embed(&u));
    out.residual = Some(residual);
    Ok(out)
}
