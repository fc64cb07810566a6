//! Toy objectives with analytic gradients: an ill-conditioned quadratic,
//! Rosenbrock, softmax cross-entropy logistic regression on synthetic data,
//! and a paired CE-vs-L2 scalar toy. Plus the central-difference oracle
//! every analytic gradient is checked against.
//!
//! Objectives are deterministic functions of `theta`; the data-bearing ones
//! synthesize their dataset once at construction from an explicit seed, so
//! a given `(constructor args, seed)` pair is bitwise reproducible.

mod dataset;
mod logreg;
mod quadratic;
mod rosenbrock;
mod toy;

pub use dataset::{read_columns, write_columns};
pub use logreg::SoftmaxRegression;
pub use quadratic::Quadratic;
pub use rosenbrock::Rosenbrock;
pub use toy::{ce_vs_l2_toy, CeHistogram, L2Mean};

use crate::error::{Error, Result};

/// A loss value with its gradient.
#[derive(Clone, Debug)]
pub struct Eval {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// A differentiable objective over a flat parameter vector.
///
/// `eval` must be called with `theta.len() == self.dim()`; that is a caller
/// contract, not a recoverable condition.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Short stable identifier ("quadratic", "logreg", ...).
    fn name(&self) -> &str;

    /// Full-batch loss and gradient at `theta`.
    fn eval(&self, theta: &[f64]) -> Eval;

    /// Row-major matrix shape of the parameters, when the objective has a
    /// natural one (enables the factored optimizer variants).
    fn matrix_shape(&self) -> Option<(usize, usize)> {
        None
    }

    /// Per-example gradient access, for minibatching and the Fisher
    /// estimators. `None` for objectives without a dataset.
    fn per_example(&self) -> Option<&dyn PerExample> {
        None
    }
}

/// Example-level access for dataset-backed objectives. The full-batch
/// `eval` must equal the mean over all examples (linearity of the mean).
pub trait PerExample {
    fn num_examples(&self) -> usize;

    /// Loss and gradient of example `index` alone.
    fn example_eval(&self, theta: &[f64], index: usize) -> Result<Eval>;

    /// Mean loss and gradient over `indices` (repeats allowed).
    fn batch_eval(&self, theta: &[f64], indices: &[usize]) -> Result<Eval> {
        if indices.is_empty() {
            return Err(Error::EmptyInput { what: "batch_eval" });
        }
        let mut loss = 0.0;
        let mut grad = vec![0.0; theta.len()];
        for &i in indices {
            let e = self.example_eval(theta, i)?;
            loss += e.loss;
            for (g, eg) in grad.iter_mut().zip(&e.grad) {
                *g += eg;
            }
        }
        let scale = 1.0 / indices.len() as f64;
        loss *= scale;
        for g in &mut grad {
            *g *= scale;
        }
        Ok(Eval { loss, grad })
    }
}

/// Central-difference gradient `(L(theta + h e_i) - L(theta - h e_i)) / 2h`.
///
/// The independent oracle for every analytic gradient in this module: it
/// touches only `Objective::eval` losses. Errors with the offending
/// coordinate if a probe loss comes back non-finite.
pub fn finite_diff_grad(objective: &dyn Objective, theta: &[f64], h: f64) -> Result<Vec<f64>> {
    if theta.len() != objective.dim() {
        return Err(Error::LengthMismatch {
            what: "finite_diff_grad",
            expected: objective.dim(),
            got: theta.len(),
        });
    }
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "finite difference step must be positive and finite, got {h}"
        )));
    }
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let up = objective.eval(&probe).loss;
        probe[i] = theta[i] - h;
        let down = objective.eval(&probe).loss;
        probe[i] = theta[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFiniteProbe { index: i });
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}
