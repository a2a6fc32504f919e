//! Solvability conditions for the heat problems.

use crate::fracops::BetaVector;

/// Square integrability of the linear heat solution: `2 beta0 + sum(beta) + 1 > d/2`.
pub fn heat_l2_condition(beta0: f64, beta: &BetaVector, d: usize) -> bool {
    2.0 * beta0 + beta.sum() + 1.0 > d as f64 / 2.0
}

/// Existence and uniqueness for the quasilinear equation: `beta_i > 1/2 - 1/d` for every axis.
pub fn picard_condition(beta: &BetaVector, d: usize) -> bool {
    let bound = 0.5 - 1.0 / d as f64;
    beta.as_slice().iter().all(|b| *b > bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_condition_cases() {
        assert!(heat_l2_condition(0.1, &BetaVector::uniform(1, 0.1).unwrap(), 1));
        assert!(!heat_l2_condition(0.01, &BetaVector::uniform(4, 0.01).unwrap(), 4));
        assert!(heat_l2_condition(0.45, &BetaVector::uniform(3, 0.45).unwrap(), 3));
        assert!(!heat_l2_condition(0.05, &BetaVector::uniform(3, 0.05).unwrap(), 3));
    }

    #[test]
    fn picard_condition_cases() {
        assert!(picard_condition(&BetaVector::uniform(2, 0.1).unwrap(), 2));
        assert!(!picard_condition(&BetaVector::uniform(4, 0.2).unwrap(), 4));
        for b in [1e-6, 0.1, 0.25, 0.4999] {
            assert!(picard_condition(&BetaVector::uniform(1, b).unwrap(), 1));
        }
    }
}
