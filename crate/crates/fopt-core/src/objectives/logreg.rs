use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

use super::{Eval, Objective, PerExample};

/// Multinomial logistic regression with softmax cross-entropy on a synthetic
/// dataset.
///
/// Construction draws, in a fixed order from a ChaCha8 stream seeded by
/// `seed`: a ground-truth weight matrix `W*` (entries N(0,1)), then for each
/// sample a feature vector `x ~ N(0,1)^F` and a label
/// `argmax_k (W* x + nu)_k` with logit noise `nu ~ N(0,1)^K`. The noise makes
/// the classes overlap, so the dataset is not linearly separable and the
/// loss has a finite minimizer with a vanishing gradient.
///
/// Parameters are the flattened row-major `K x F` weight matrix
/// (`theta[k * F + f]`), which is also the shape reported to the factored
/// optimizer variants.
#[derive(Clone, Debug)]
pub struct SoftmaxRegression {
    n_features: usize,
    n_classes: usize,
    features: Vec<f64>, // n_samples x n_features, row-major
    labels: Vec<usize>,
}

impl SoftmaxRegression {
    pub fn new(n_features: usize, n_classes: usize, n_samples: usize, seed: u64) -> Result<Self> {
        if n_features == 0 || n_samples == 0 {
            return Err(Error::EmptyInput { what: "logreg" });
        }
        if n_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "logreg needs at least 2 classes, got {n_classes}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w_star: Vec<f64> = (0..n_classes * n_features)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let mut features = Vec::with_capacity(n_samples * n_features);
        let mut labels = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let start = features.len();
            for _ in 0..n_features {
                features.push(rng.sample(StandardNormal));
            }
            let x = &features[start..];
            let mut best = 0usize;
            let mut best_score = f64::NEG_INFINITY;
            for k in 0..n_classes {
                let noise: f64 = rng.sample(StandardNormal);
                let z: f64 = w_star[k * n_features..(k + 1) * n_features]
                    .iter()
                    .zip(x)
                    .map(|(w, xi)| w * xi)
                    .sum();
                if z + noise > best_score {
                    best_score = z + noise;
                    best = k;
                }
            }
            labels.push(best);
        }
        Ok(Self {
            n_features,
            n_classes,
            features,
            labels,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Dataset as named columns (`x0..x{F-1}`, `label`) for text dumps.
    pub fn columns(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let n = self.labels.len();
        let mut names: Vec<String> = (0..self.n_features).map(|f| format!("x{f}")).collect();
        names.push("label".to_string());
        let mut cols: Vec<Vec<f64>> = (0..self.n_features)
            .map(|f| (0..n).map(|j| self.features[j * self.n_features + f]).collect())
            .collect();
        cols.push(self.labels.iter().map(|&y| y as f64).collect());
        (names, cols)
    }

    /// Mean loss/gradient over the given sample indices.
    fn accumulate(&self, theta: &[f64], indices: &[usize]) -> Result<Eval> {
        assert_eq!(theta.len(), self.dim(), "logreg: theta length");
        if indices.is_empty() {
            return Err(Error::EmptyInput { what: "batch_eval" });
        }
        let (kk, ff) = (self.n_classes, self.n_features);
        let mut loss = 0.0;
        let mut grad = vec![0.0; kk * ff];
        let mut logits = vec![0.0; kk];
        for &j in indices {
            if j >= self.labels.len() {
                return Err(Error::InvalidConfig(format!(
                    "example index {j} out of range (dataset has {})",
                    self.labels.len()
                )));
            }
            let x = &self.features[j * ff..(j + 1) * ff];
            for k in 0..kk {
                logits[k] = theta[k * ff..(k + 1) * ff]
                    .iter()
                    .zip(x)
                    .map(|(w, xi)| w * xi)
                    .sum();
            }
            // max-shifted log-sum-exp keeps the softmax finite for any theta
            let zmax = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = logits.iter().map(|z| (z - zmax).exp()).sum();
            let lse = zmax + sum_exp.ln();
            let y = self.labels[j];
            loss += lse - logits[y];
            for k in 0..kk {
                let p = (logits[k] - lse).exp();
                let coeff = if k == y { p - 1.0 } else { p };
                for (g, xi) in grad[k * ff..(k + 1) * ff].iter_mut().zip(x) {
                    *g += coeff * xi;
                }
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

impl Objective for SoftmaxRegression {
    fn dim(&self) -> usize {
        self.n_classes * self.n_features
    }

    fn name(&self) -> &str {
        "logreg"
    }

    fn eval(&self, theta: &[f64]) -> Eval {
        let all: Vec<usize> = (0..self.labels.len()).collect();
        self.accumulate(theta, &all)
            .expect("full-batch eval over a non-empty dataset")
    }

    fn matrix_shape(&self) -> Option<(usize, usize)> {
        Some((self.n_classes, self.n_features))
    }

    fn per_example(&self) -> Option<&dyn PerExample> {
        Some(self)
    }
}

impl PerExample for SoftmaxRegression {
    fn num_examples(&self) -> usize {
        self.labels.len()
    }

    fn example_eval(&self, theta: &[f64], index: usize) -> Result<Eval> {
        self.accumulate(theta, &[index])
    }

    fn batch_eval(&self, theta: &[f64], indices: &[usize]) -> Result<Eval> {
        self.accumulate(theta, indices)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_log_k_loss() {
        let obj = SoftmaxRegression::new(4, 3, 64, 7).unwrap();
        let e = obj.eval(&vec![0.0; obj.dim()]);
        assert!((e.loss - 3.0f64.ln()).abs() < 1e-12, "loss {}", e.loss);
    }

    #[test]
    fn same_seed_is_bitwise_reproducible() {
        let a = SoftmaxRegression::new(3, 4, 32, 42).unwrap();
        let b = SoftmaxRegression::new(3, 4, 32, 42).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.labels, b.labels);
        let c = SoftmaxRegression::new(3, 4, 32, 43).unwrap();
        assert_ne!(a.features, c.features);
    }

    #[test]
    fn full_batch_equals_mean_over_all_examples_bitwise() {
        let obj = SoftmaxRegression::new(3, 3, 17, 5).unwrap();
        let theta: Vec<f64> = (0..obj.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let full = obj.eval(&theta);
        let all: Vec<usize> = (0..17).collect();
        let batched = obj.batch_eval(&theta, &all).unwrap();
        assert_eq!(full.loss.to_bits(), batched.loss.to_bits());
        for (a, b) in full.grad.iter().zip(&batched.grad) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let obj = SoftmaxRegression::new(3, 3, 24, 11).unwrap();
        let theta: Vec<f64> = (0..obj.dim()).map(|i| 0.3 * ((i * i) as f64).cos()).collect();
        let analytic = obj.eval(&theta).grad;
        let fd = super::super::finite_diff_grad(&obj, &theta, 1e-5).unwrap();
        for (a, f) in analytic.iter().zip(&fd) {
            assert!((a - f).abs() <= 1e-7 * a.abs().max(1.0), "{a} vs {f}");
        }
    }

    #[test]
    fn labels_use_more_than_one_class() {
        let obj = SoftmaxRegression::new(5, 3, 128, 1).unwrap();
        let mut seen = [false; 3];
        for &y in obj.labels() {
            seen[y] = true;
        }
        assert!(seen.iter().all(|&s| s), "all classes should appear");
    }

    #[test]
    fn bad_example_index_is_rejected() {
        let obj = SoftmaxRegression::new(2, 2, 4, 0).unwrap();
        let theta = vec![0.0; obj.dim()];
        assert!(obj.example_eval(&theta, 4).is_err());
        assert!(obj.batch_eval(&theta, &[]).is_err());
    }

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(SoftmaxRegression::new(0, 3, 8, 0).is_err());
        assert!(SoftmaxRegression::new(3, 1, 8, 0).is_err());
        assert!(SoftmaxRegression::new(3, 2, 0, 0).is_err());
    }
}
