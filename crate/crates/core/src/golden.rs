//! Golden-section search for scalar minimization of unimodal functions.
//!
//! Derivative-free: each iteration shrinks the bracket by the golden ratio
//! and reuses one interior evaluation, so convergence is guaranteed for a
//! unimodal objective without ever touching its gradient.

use thiserror::Error;

const INV_PHI: f64 = 0.618_033_988_749_894_9; // (sqrt(5) - 1) / 2

#[derive(Debug, Clone, Copy)]
pub struct GoldenSection {
    /// Bracket width at which the search stops.
    pub tolerance: f64,
    /// Hard cap on objective evaluations before giving up.
    pub max_evals: usize,
}

impl Default for GoldenSection {
    fn default() -> Self {
        Self { tolerance: 1e-6, max_evals: 10_000 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MinResult {
    pub x: f64,
    pub value: f64,
    pub evals: usize,
}

#[derive(Debug, Error, PartialEq)]
#[error("golden-section search did not converge within {evals} evaluations (bracket {bracket})")]
pub struct NonConvergence {
    pub evals: usize,
    pub bracket: f64,
}

impl GoldenSection {
    /// Minimize `f` over `[lo, hi]`.
    pub fn minimize<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> Result<MinResult, NonConvergence> {
        assert!(lo <= hi, "invalid bracket [{lo}, {hi}]");
        let mut a = lo;
        let mut b = hi;
        let mut evals = 0usize;

        let mut x1 = b - INV_PHI * (b - a);
        let mut x2 = a + INV_PHI * (b - a);
        let mut f1 = f(x1);
        let mut f2 = f(x2);
        evals += 2;

        while b - a > self.tolerance {
            if evals >= self.max_evals {
                return Err(NonConvergence { evals, bracket: b - a });
            }
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - INV_PHI * (b - a);
                f1 = f(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + INV_PHI * (b - a);
                f2 = f(x2);
            }
            evals += 1;
        }

        let x = (a + b) / 2.0;
        let value = f(x);
        evals += 1;
        Ok(MinResult { x, value, evals })
    }
}
