use crate::error::{Error, Result};

use super::{Eval, Objective};

/// Axis-aligned convex quadratic `L(theta) = 1/2 * sum_i lambda_i theta_i^2`
/// with eigenvalues spaced geometrically from 1 to `kappa`, so `kappa` is
/// exactly the condition number of the Hessian.
#[derive(Clone, Debug)]
pub struct Quadratic {
    eigenvalues: Vec<f64>,
}

impl Quadratic {
    /// `lambda_i = kappa^(i / (dim - 1))`; a 1-d instance degenerates to the
    /// single eigenvalue 1.
    pub fn new(dim: usize, kappa: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyInput { what: "quadratic" });
        }
        if kappa < 1.0 || !kappa.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "condition number must be finite and >= 1, got {kappa}"
            )));
        }
        let eigenvalues = if dim == 1 {
            vec![1.0]
        } else {
            (0..dim)
                .map(|i| kappa.powf(i as f64 / (dim - 1) as f64))
                .collect()
        };
        Ok(Self { eigenvalues })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn name(&self) -> &str {
        "quadratic"
    }

    fn eval(&self, theta: &[f64]) -> Eval {
        assert_eq!(theta.len(), self.dim(), "quadratic: theta length");
        let mut loss = 0.0;
        let mut grad = Vec::with_capacity(theta.len());
        for (&l, &x) in self.eigenvalues.iter().zip(theta) {
            loss += 0.5 * l * x * x;
            grad.push(l * x);
        }
        Eval { loss, grad }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_spans_one_to_kappa() {
        let q = Quadratic::new(5, 100.0).unwrap();
        let l = q.eigenvalues();
        assert_eq!(l[0], 1.0);
        assert!((l[4] - 100.0).abs() < 1e-12);
        assert!(l.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn one_dimensional_case_is_the_unit_parabola() {
        let q = Quadratic::new(1, 100.0).unwrap();
        assert_eq!(q.eigenvalues(), &[1.0]);
        let e = q.eval(&[3.0]);
        assert_eq!(e.loss, 4.5);
        assert_eq!(e.grad, vec![3.0]);
    }

    #[test]
    fn gradient_is_lambda_times_theta() {
        let q = Quadratic::new(3, 4.0).unwrap();
        let e = q.eval(&[1.0, 1.0, 1.0]);
        assert_eq!(e.grad, vec![1.0, 2.0, 4.0]);
        assert!((e.loss - 0.5 * 7.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_construction() {
        assert!(Quadratic::new(0, 10.0).is_err());
        assert!(Quadratic::new(3, 0.5).is_err());
        assert!(Quadratic::new(3, f64::INFINITY).is_err());
    }
}
