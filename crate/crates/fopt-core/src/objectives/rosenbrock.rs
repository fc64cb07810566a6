use crate::error::{Error, Result};

use super::{Eval, Objective};

/// Sum of independent 2-d Rosenbrock valleys over consecutive coordinate
/// pairs:
///
/// `L = sum_p 100 (theta_{2p+1} - theta_{2p}^2)^2 + (1 - theta_{2p})^2`
///
/// Nonconvex, with the global minimum at the all-ones vector. The paired
/// (uncoupled) form keeps the Hessian block-diagonal, so each valley is an
/// independent copy of the classic banana.
#[derive(Clone, Debug)]
pub struct Rosenbrock {
    dim: usize,
}

impl Rosenbrock {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 || !dim.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "rosenbrock needs an even dimension >= 2, got {dim}"
            )));
        }
        Ok(Self { dim })
    }
}

impl Objective for Rosenbrock {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &str {
        "rosenbrock"
    }

    fn eval(&self, theta: &[f64]) -> Eval {
        assert_eq!(theta.len(), self.dim, "rosenbrock: theta length");
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.dim];
        for p in 0..self.dim / 2 {
            let x = theta[2 * p];
            let y = theta[2 * p + 1];
            let valley = y - x * x;
            loss += 100.0 * valley * valley + (1.0 - x) * (1.0 - x);
            grad[2 * p] = -400.0 * x * valley - 2.0 * (1.0 - x);
            grad[2 * p + 1] = 200.0 * valley;
        }
        Eval { loss, grad }
    }
}
