use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

use super::{Eval, Objective, PerExample};

/// Builds the paired scalar toy: one shared sample `x_j ~ N(0.5, 1)` viewed
/// through two different losses.
///
/// * [`CeHistogram`] discretizes the sample into `n_bins` equal-width bins
///   over `[min, max]` and fits bin logits by cross-entropy against the
///   empirical histogram.
/// * [`L2Mean`] fits a single scalar mean by least squares.
///
/// Both expose per-example gradients, so the Fisher estimators can be run
/// on a discrete-output and a continuous-output model of the same data.
pub fn ce_vs_l2_toy(n_bins: usize, n_samples: usize, seed: u64) -> Result<(CeHistogram, L2Mean)> {
    if n_bins < 2 {
        return Err(Error::InvalidConfig(format!(
            "toy histogram needs at least 2 bins, got {n_bins}"
        )));
    }
    if n_samples == 0 {
        return Err(Error::EmptyInput { what: "ce_vs_l2_toy" });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n_samples)
        .map(|_| 0.5 + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let ce = CeHistogram::from_sample(n_bins, &xs)?;
    let l2 = L2Mean { xs };
    Ok((ce, l2))
}

/// Cross-entropy of softmax bin probabilities against the empirical
/// histogram of a scalar sample.
///
/// Parameters are the `n_bins` logits; `loss = lse(theta) - sum_b h_b
/// theta_b` where `h` is the empirical bin frequency, and `grad =
/// softmax(theta) - h`. Per-example, sample `j` contributes the usual
/// one-hot cross-entropy of its bin.
#[derive(Clone, Debug)]
pub struct CeHistogram {
    hist: Vec<f64>,
    bin_of: Vec<usize>,
    xs: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl CeHistogram {
    fn from_sample(n_bins: usize, xs: &[f64]) -> Result<Self> {
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let width = hi - lo;
        let bin_of: Vec<usize> = xs
            .iter()
            .map(|&x| {
                if width == 0.0 {
                    0
                } else {
                    (((x - lo) / width) * n_bins as f64).floor() as usize
                }
                .min(n_bins - 1)
            })
            .collect();
        let mut hist = vec![0.0; n_bins];
        for &b in &bin_of {
            hist[b] += 1.0;
        }
        for h in &mut hist {
            *h /= xs.len() as f64;
        }
        Ok(Self {
            hist,
            bin_of,
            xs: xs.to_vec(),
            lo,
            hi,
        })
    }

    /// Empirical bin frequencies (sums to 1).
    pub fn histogram(&self) -> &[f64] {
        &self.hist
    }

    /// Bin index of each sample.
    pub fn bins(&self) -> &[usize] {
        &self.bin_of
    }

    /// Bin range `[lo, hi]` the sample was discretized over.
    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Dataset as named columns (`x`, `bin`) for text dumps.
    pub fn columns(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        (
            vec!["x".to_string(), "bin".to_string()],
            vec![
                self.xs.clone(),
                self.bin_of.iter().map(|&b| b as f64).collect(),
            ],
        )
    }

    fn log_softmax(&self, theta: &[f64]) -> (Vec<f64>, f64) {
        let zmax = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = theta.iter().map(|z| (z - zmax).exp()).sum();
        let lse = zmax + sum_exp.ln();
        (theta.iter().map(|z| z - lse).collect(), lse)
    }
}

impl Objective for CeHistogram {
    fn dim(&self) -> usize {
        self.hist.len()
    }

    fn name(&self) -> &str {
        "ce-toy"
    }

    fn eval(&self, theta: &[f64]) -> Eval {
        assert_eq!(theta.len(), self.dim(), "ce-toy: theta length");
        let (log_p, lse) = self.log_softmax(theta);
        let loss = lse - self.hist.iter().zip(theta).map(|(h, t)| h * t).sum::<f64>();
        let grad = log_p
            .iter()
            .zip(&self.hist)
            .map(|(lp, h)| lp.exp() - h)
            .collect();
        Eval { loss, grad }
    }

    fn per_example(&self) -> Option<&dyn PerExample> {
        Some(self)
    }
}

impl PerExample for CeHistogram {
    fn num_examples(&self) -> usize {
        self.xs.len()
    }

    fn example_eval(&self, theta: &[f64], index: usize) -> Result<Eval> {
        assert_eq!(theta.len(), self.dim(), "ce-toy: theta length");
        if index >= self.xs.len() {
            return Err(Error::InvalidConfig(format!(
                "example index {index} out of range (dataset has {})",
                self.xs.len()
            )));
        }
        let (log_p, _) = self.log_softmax(theta);
        let b = self.bin_of[index];
        let grad = log_p
            .iter()
            .enumerate()
            .map(|(k, lp)| lp.exp() - if k == b { 1.0 } else { 0.0 })
            .collect();
        Ok(Eval {
            loss: -log_p[b],
            grad,
        })
    }
}

/// Least-squares fit of a single scalar mean: `loss = 1/(2n) sum_j (mu -
/// x_j)^2`, the continuous-output counterpart of [`CeHistogram`].
#[derive(Clone, Debug)]
pub struct L2Mean {
    xs: Vec<f64>,
}

impl L2Mean {
    /// Sample mean, i.e. the unique minimizer.
    pub fn sample_mean(&self) -> f64 {
        self.xs.iter().sum::<f64>() / self.xs.len() as f64
    }

    /// Dataset as a single named column (`x`) for text dumps.
    pub fn columns(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        (vec!["x".to_string()], vec![self.xs.clone()])
    }
}

impl Objective for L2Mean {
    fn dim(&self) -> usize {
        1
    }

    fn name(&self) -> &str {
        "l2-toy"
    }

    fn eval(&self, theta: &[f64]) -> Eval {
        assert_eq!(theta.len(), 1, "l2-toy: theta length");
        let mu = theta[0];
        let n = self.xs.len() as f64;
        let loss = self.xs.iter().map(|x| (mu - x) * (mu - x)).sum::<f64>() / (2.0 * n);
        let grad = vec![self.xs.iter().map(|x| mu - x).sum::<f64>() / n];
        Eval { loss, grad }
    }

    fn per_example(&self) -> Option<&dyn PerExample> {
        Some(self)
    }
}

impl PerExample for L2Mean {
    fn num_examples(&self) -> usize {
        self.xs.len()
    }

    fn example_eval(&self, theta: &[f64], index: usize) -> Result<Eval> {
        assert_eq!(theta.len(), 1, "l2-toy: theta length");
        if index >= self.xs.len() {
            return Err(Error::InvalidConfig(format!(
                "example index {index} out of range (dataset has {})",
                self.xs.len()
            )));
        }
        let d = theta[0] - self.xs[index];
        Ok(Eval {
            loss: 0.5 * d * d,
            grad: vec![d],
        })
    }
}
