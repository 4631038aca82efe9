//! Solve reports and seeded initial guesses shared by the iterative solvers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// Residual norms, starting with the initial residual.
    pub residuals: Vec<f64>,
    /// `(r_k / r_0)^(1/k)`.
    pub conv_factor: f64,
    pub wall_ms: f64,
}

impl SolveReport {
    pub(crate) fn from_history(residuals: Vec<f64>, converged: bool, wall_ms: f64) -> Self {
        let iterations = residuals.len().saturating_sub(1);
        let conv_factor = match (residuals.first(), residuals.last()) {
            (Some(&r0), Some(&rk)) if iterations > 0 && r0 > 0.0 => (rk / r0).powf(1.0 / iterations as f64),
            _ => 0.0,
        };
        SolveReport {
            iterations,
            converged,
            residuals,
            conv_factor,
            wall_ms,
        }
    }

    /// Last residual relative to the first.
    pub fn relative_residual(&self) -> f64 {
        match (self.residuals.first(), self.residuals.last()) {
            (Some(&r0), Some(&rk)) if r0 > 0.0 => rk / r0,
            _ => 0.0,
        }
    }
}

/// Entries uniform in `[0, 1)` from a ChaCha8 stream.
pub fn random_initial_guess(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_from_history() {
        let r = SolveReport::from_history(vec![1.0, 0.1, 0.01], true, 0.0);
        assert_eq!(r.iterations, 2);
        assert!((r.conv_factor - 0.1).abs() < 1e-15);
        assert!((r.relative_residual() - 0.01).abs() < 1e-15);
        let z = SolveReport::from_history(vec![0.0], true, 0.0);
        assert_eq!(z.iterations, 0);
        assert_eq!(z.conv_factor, 0.0);
    }

    #[test]
    fn guess_is_seeded_and_in_range() {
        let a = random_initial_guess(100, 3);
        assert_eq!(a, random_initial_guess(100, 3));
        assert_ne!(a, random_initial_guess(100, 4));
        assert!(a.iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn json_fields() {
        let r = SolveReport::from_history(vec![2.0, 1.0], false, 1.5);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for k in ["iterations", "converged", "residuals", "conv_factor", "wall_ms"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }
}
