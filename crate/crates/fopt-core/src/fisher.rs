//! Empirical Fisher information estimators and diagnostics.
//!
//! Two diagonal estimators are compared throughout: the mean of squared
//! per-example gradients (`E[g_j^2]`, what a per-example-aware optimizer
//! would see) and the squared batch-mean gradient (`(E[g_j])^2`, what a
//! minibatch second-moment accumulator actually observes). Jensen's
//! inequality orders them elementwise, with equality exactly at batch
//! size 1; the gap is the variance the batch mean averages away.
//!
//! For small problems the module also builds the dense empirical Fisher
//! `E[g_j g_j^T]` and solves damped natural-gradient systems against it,
//! with hand-rolled Cholesky and Jacobi eigenvalue routines (dimensions
//! are capped at [`MAX_DENSE_DIM`], so dependency-free O(n^3) is fine).

use serde::Serialize;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics;
use crate::objectives::PerExample;

/// Largest parameter dimension the dense-Fisher routines accept.
pub const MAX_DENSE_DIM: usize = 64;

/// Diagonal estimate `(1/b) sum_j g_j^2` over the given examples: the mean
/// of squared per-example gradients.
pub fn per_example_square(pe: &dyn PerExample, theta: &[f64], indices: &[usize]) -> Result<Vec<f64>> {
    if indices.is_empty() {
        return Err(Error::EmptyInput {
            what: "per_example_square",
        });
    }
    let mut acc = vec![0.0; theta.len()];
    for &j in indices {
        let e = pe.example_eval(theta, j)?;
        for (a, g) in acc.iter_mut().zip(&e.grad) {
            *a += g * g;
        }
    }
    let scale = 1.0 / indices.len() as f64;
    for a in &mut acc {
        *a *= scale;
    }
    Ok(acc)
}

/// Diagonal estimate `((1/b) sum_j g_j)^2` over the given examples: the
/// squared batch-mean gradient, i.e. what an optimizer accumulating
/// minibatch gradients squares.
pub fn squared_batch_mean(
    pe: &dyn PerExample,
    theta: &[f64],
    indices: &[usize],
) -> Result<Vec<f64>> {
    let mean = pe.batch_eval(theta, indices)?.grad;
    Ok(mean.iter().map(|g| g * g).collect())
}

/// Streaming EMA of squared batch gradients with the bias-corrected decay
/// `beta2_hat(t)`, i.e. the second-moment accumulator of the Fisher-based
/// optimizers run standalone as a diagnostic.
#[derive(Clone, Debug)]
pub struct EmaFisher {
    beta2: f64,
    t: u64,
    f: Vec<f64>,
}

impl EmaFisher {
    /// `beta2` is the raw decay (default 0.999 in the optimizers). The
    /// initial estimate is 1 per coordinate, but `beta2_hat(1) = 0` wipes
    /// it on the first observation.
    pub fn new(dim: usize, beta2: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyInput { what: "ema_fisher" });
        }
        if !(beta2 > 0.0 && beta2 < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "EMA decay must lie in (0, 1), got {beta2}"
            )));
        }
        Ok(Self {
            beta2,
            t: 0,
            f: vec![1.0; dim],
        })
    }

    /// Folds one batch gradient into the estimate and returns the update.
    pub fn observe(&mut self, batch_grad: &[f64]) -> Result<&[f64]> {
        if batch_grad.len() != self.f.len() {
            return Err(Error::LengthMismatch {
                what: "ema_fisher observe",
                expected: self.f.len(),
                got: batch_grad.len(),
            });
        }
        self.t += 1;
        let beta2_hat = numerics::bias_correction(self.beta2, self.t)?;
        let squared: Vec<f64> = batch_grad.iter().map(|g| g * g).collect();
        self.f = numerics::ema_update(&self.f, &squared, beta2_hat)?;
        Ok(&self.f)
    }

    pub fn estimate(&self) -> &[f64] {
        &self.f
    }

    pub fn observations(&self) -> u64 {
        self.t
    }
}

/// Elementwise comparison of the two diagonal estimators. `gap = per-example
/// square - squared batch mean` should be nonnegative in every coordinate.
#[derive(Clone, Debug, Serialize)]
pub struct JensenGap {
    pub dim: usize,
    pub min_gap: f64,
    pub max_gap: f64,
    pub mean_gap: f64,
    /// Coordinates where the inequality fails (`gap < 0`); always 0 unless
    /// something upstream is broken.
    pub violations: usize,
}

pub fn jensen_gap(per_example_sq: &[f64], squared_mean: &[f64]) -> Result<JensenGap> {
    if per_example_sq.is_empty() {
        return Err(Error::EmptyInput { what: "jensen_gap" });
    }
    if per_example_sq.len() != squared_mean.len() {
        return Err(Error::LengthMismatch {
            what: "jensen_gap",
            expected: per_example_sq.len(),
            got: squared_mean.len(),
        });
    }
    let mut min_gap = f64::INFINITY;
    let mut max_gap = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut violations = 0;
    for (p, s) in per_example_sq.iter().zip(squared_mean) {
        let gap = p - s;
        min_gap = min_gap.min(gap);
        max_gap = max_gap.max(gap);
        sum += gap;
        if gap < 0.0 {
            violations += 1;
        }
    }
    Ok(JensenGap {
        dim: per_example_sq.len(),
        min_gap,
        max_gap,
        mean_gap: sum / per_example_sq.len() as f64,
        violations,
    })
}

/// Mean relative gap between the two estimators at one batch size,
/// averaged over seeded redraws.
#[derive(Clone, Debug, Serialize)]
pub struct BatchSensitivityPoint {
    pub batch_size: usize,
    /// Mean over coordinates and repeats of
    /// `(per_example_sq - squared_mean) / max(per_example_sq, 1e-30)`,
    /// so 0 means the estimators agree and values near 1 mean the batch
    /// mean has averaged the signal away.
    pub mean_relative_gap: f64,
}

/// Sweeps batch sizes, drawing `repeats` independent batches (with
/// replacement) per size from a ChaCha8 stream seeded by `seed`.
pub fn batch_size_sensitivity(
    pe: &dyn PerExample,
    theta: &[f64],
    batch_sizes: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<BatchSensitivityPoint>> {
    if batch_sizes.is_empty() {
        return Err(Error::EmptyInput {
            what: "batch_size_sensitivity",
        });
    }
    if repeats == 0 {
        return Err(Error::InvalidConfig(
            "batch sensitivity needs at least 1 repeat".to_string(),
        ));
    }
    let n = pe.num_examples();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(batch_sizes.len());
    for &b in batch_sizes {
        if b == 0 {
            return Err(Error::InvalidConfig("batch size 0 in sweep".to_string()));
        }
        let mut total = 0.0;
        for _ in 0..repeats {
            let indices: Vec<usize> = (0..b).map(|_| rng.random_range(0..n)).collect();
            let pes = per_example_square(pe, theta, &indices)?;
            let sbm = squared_batch_mean(pe, theta, &indices)?;
            let gap: f64 = pes
                .iter()
                .zip(&sbm)
                .map(|(p, s)| (p - s) / p.max(1e-30))
                .sum::<f64>()
                / theta.len() as f64;
            total += gap;
        }
        points.push(BatchSensitivityPoint {
            batch_size: b,
            mean_relative_gap: total / repeats as f64,
        });
    }
    Ok(points)
}

/// Dense empirical Fisher `(1/b) sum_j g_j g_j^T` (row-major `dim x dim`).
/// Refuses dimensions above [`MAX_DENSE_DIM`].
pub fn dense_fisher(pe: &dyn PerExample, theta: &[f64], indices: &[usize]) -> Result<Vec<f64>> {
    let dim = theta.len();
    if dim > MAX_DENSE_DIM {
        return Err(Error::DimTooLarge {
            dim,
            max: MAX_DENSE_DIM,
        });
    }
    if indices.is_empty() {
        return Err(Error::EmptyInput { what: "dense_fisher" });
    }
    let mut fim = vec![0.0; dim * dim];
    for &j in indices {
        let g = pe.example_eval(theta, j)?.grad;
        for r in 0..dim {
            for c in 0..dim {
                fim[r * dim + c] += g[r] * g[c];
            }
        }
    }
    let scale = 1.0 / indices.len() as f64;
    for v in &mut fim {
        *v *= scale;
    }
    Ok(fim)
}

/// Solves `(F + damping I) x = grad` by Cholesky factorization and returns
/// the natural-gradient direction `x`.
pub fn natural_gradient_dense(fim: &[f64], grad: &[f64], damping: f64) -> Result<Vec<f64>> {
    let dim = grad.len();
    if dim == 0 {
        return Err(Error::EmptyInput {
            what: "natural_gradient_dense",
        });
    }
    if dim > MAX_DENSE_DIM {
        return Err(Error::DimTooLarge {
            dim,
            max: MAX_DENSE_DIM,
        });
    }
    if fim.len() != dim * dim {
        return Err(Error::LengthMismatch {
            what: "natural_gradient_dense fim",
            expected: dim * dim,
            got: fim.len(),
        });
    }
    if damping < 0.0 || !damping.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "damping must be finite and >= 0, got {damping}"
        )));
    }
    let mut damped = fim.to_vec();
    for i in 0..dim {
        damped[i * dim + i] += damping;
    }
    let l = cholesky(&damped, dim)?;
    // forward substitution L y = grad
    let mut y = vec![0.0; dim];
    for i in 0..dim {
        let mut sum = grad[i];
        for k in 0..i {
            sum -= l[i * dim + k] * y[k];
        }
        y[i] = sum / l[i * dim + i];
    }
    // back substitution L^T x = y
    let mut x = vec![0.0; dim];
    for i in (0..dim).rev() {
        let mut sum = y[i];
        for k in i + 1..dim {
            sum -= l[k * dim + i] * x[k];
        }
        x[i] = sum / l[i * dim + i];
    }
    Ok(x)
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite
/// matrix; a nonpositive (or non-finite) pivot reports its index.
fn cholesky(a: &[f64], dim: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut sum = a[i * dim + j];
            for k in 0..j {
                sum -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::SingularMatrix { pivot: i });
                }
                l[i * dim + i] = sum.sqrt();
            } else {
                l[i * dim + j] = sum / l[j * dim + j];
            }
        }
    }
    Ok(l)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// ascending. The input is symmetrized as `(A + A^T)/2` first, so tiny
/// accumulation asymmetries are tolerated.
pub fn sym_eigenvalues(a: &[f64], dim: usize) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::EmptyInput {
            what: "sym_eigenvalues",
        });
    }
    if dim > MAX_DENSE_DIM {
        return Err(Error::DimTooLarge {
            dim,
            max: MAX_DENSE_DIM,
        });
    }
    if a.len() != dim * dim {
        return Err(Error::LengthMismatch {
            what: "sym_eigenvalues",
            expected: dim * dim,
            got: a.len(),
        });
    }
    let mut m = vec![0.0; dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            m[r * dim + c] = 0.5 * (a[r * dim + c] + a[c * dim + r]);
        }
    }
    let frobenius: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = 1e-14 * frobenius.max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..dim)
            .flat_map(|r| (0..dim).map(move |c| (r, c)))
            .filter(|&(r, c)| r != c)
            .map(|(r, c)| m[r * dim + c] * m[r * dim + c])
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..dim {
            for q in p + 1..dim {
                let apq = m[p * dim + q];
                if apq.abs() <= tol / (dim * dim) as f64 {
                    continue;
                }
                let theta = 0.5 * (m[q * dim + q] - m[p * dim + p]) / apq;
                // smaller root of t^2 + 2t*theta - 1 = 0; theta == +0.0
                // gives t = 1 (a 45-degree rotation), as it should
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..dim {
                    let mkp = m[k * dim + p];
                    let mkq = m[k * dim + q];
                    m[k * dim + p] = c * mkp - s * mkq;
                    m[k * dim + q] = s * mkp + c * mkq;
                }
                for k in 0..dim {
                    let mpk = m[p * dim + k];
                    let mqk = m[q * dim + k];
                    m[p * dim + k] = c * mpk - s * mqk;
                    m[q * dim + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..dim).map(|i| m[i * dim + i]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// `sum_i |A_ii| / sum_ij |A_ij|`: 1 for a perfectly diagonal matrix,
/// smaller as off-diagonal mass grows. A zero matrix reports 1 (vacuously
/// diagonal).
pub fn diag_dominance_ratio(a: &[f64], dim: usize) -> Result<f64> {
    if dim == 0 {
        return Err(Error::EmptyInput {
            what: "diag_dominance_ratio",
        });
    }
    if a.len() != dim * dim {
        return Err(Error::LengthMismatch {
            what: "diag_dominance_ratio",
            expected: dim * dim,
            got: a.len(),
        });
    }
    let total: f64 = a.iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return Ok(1.0);
    }
    let diag: f64 = (0..dim).map(|i| a[i * dim + i].abs()).sum();
    Ok(diag / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{ce_vs_l2_toy, Objective, SoftmaxRegression};

    #[test]
    fn jensen_gap_on_the_scalar_mean_is_the_sample_variance() {
        // per-example grads at mu are (mu - x_j); the gap between the mean
        // of squares and the squared mean is exactly the variance of x
        let (_, l2) = ce_vs_l2_toy(4, 64, 21).unwrap();
        let pe = l2.per_example().unwrap();
        let all: Vec<usize> = (0..64).collect();
        let mu = [0.25];
        let pes = per_example_square(pe, &mu, &all).unwrap();
        let sbm = squared_batch_mean(pe, &mu, &all).unwrap();
        let xs = &l2.columns().1[0];
        let mean: f64 = xs.iter().sum::<f64>() / 64.0;
        let var: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 64.0;
        assert!((pes[0] - sbm[0] - var).abs() < 1e-12);
        let gap = jensen_gap(&pes, &sbm).unwrap();
        assert_eq!(gap.violations, 0);
        assert!(gap.min_gap >= 0.0);
    }

    #[test]
    fn estimators_coincide_bitwise_at_batch_size_one() {
        let obj = SoftmaxRegression::new(3, 3, 16, 13).unwrap();
        let pe = obj.per_example().unwrap();
        let theta: Vec<f64> = (0..obj.dim()).map(|i| (i as f64).sin() * 0.2).collect();
        for j in 0..4 {
            let pes = per_example_square(pe, &theta, &[j]).unwrap();
            let sbm = squared_batch_mean(pe, &theta, &[j]).unwrap();
            for (p, s) in pes.iter().zip(&sbm) {
                assert_eq!(p.to_bits(), s.to_bits());
            }
        }
    }

    #[test]
    fn ema_fisher_first_observation_wipes_the_init() {
        let mut ema = EmaFisher::new(2, 0.999).unwrap();
        ema.observe(&[3.0, -2.0]).unwrap();
        // beta2_hat(1) = 0, so the estimate is exactly the squared gradient
        assert_eq!(ema.estimate(), &[9.0, 4.0]);
        assert_eq!(ema.observations(), 1);
    }

    #[test]
    fn batch_sensitivity_gap_grows_with_batch_size() {
        let obj = SoftmaxRegression::new(4, 3, 256, 3).unwrap();
        let pe = obj.per_example().unwrap();
        let theta = vec![0.0; obj.dim()];
        let points = batch_size_sensitivity(pe, &theta, &[1, 4, 64], 8, 7).unwrap();
        assert!(points[0].mean_relative_gap.abs() < 1e-12, "batch 1 gap");
        assert!(points[1].mean_relative_gap > 0.0);
        assert!(
            points[2].mean_relative_gap > points[1].mean_relative_gap,
            "{} vs {}",
            points[2].mean_relative_gap,
            points[1].mean_relative_gap
        );
    }

    #[test]
    fn dense_fisher_diagonal_matches_per_example_square() {
        let obj = SoftmaxRegression::new(2, 2, 32, 19).unwrap();
        let pe = obj.per_example().unwrap();
        let theta: Vec<f64> = vec![0.1, -0.3, 0.2, 0.05];
        let all: Vec<usize> = (0..32).collect();
        let fim = dense_fisher(pe, &theta, &all).unwrap();
        let pes = per_example_square(pe, &theta, &all).unwrap();
        let dim = theta.len();
        for i in 0..dim {
            assert!((fim[i * dim + i] - pes[i]).abs() < 1e-14);
        }
        // symmetric by construction
        for r in 0..dim {
            for c in 0..dim {
                assert_eq!(fim[r * dim + c].to_bits(), fim[c * dim + r].to_bits());
            }
        }
    }

    #[test]
    fn natural_gradient_solves_the_damped_system() {
        // SPD 3x3 built as B B^T + I
        let fim = [
            5.0, 2.0, 1.0, //
            2.0, 6.0, 2.5, //
            1.0, 2.5, 4.0,
        ];
        let grad = [1.0, -2.0, 0.5];
        let damping = 1e-8;
        let x = natural_gradient_dense(&fim, &grad, damping).unwrap();
        for r in 0..3 {
            let mut lhs = damping * x[r];
            for c in 0..3 {
                lhs += fim[r * 3 + c] * x[c];
            }
            assert!((lhs - grad[r]).abs() < 1e-10, "row {r}: {lhs}");
        }
    }

    #[test]
    fn singular_system_reports_the_failing_pivot() {
        let fim = [1.0, 0.0, 0.0, 0.0]; // rank 1, second pivot is zero
        let err = natural_gradient_dense(&fim, &[1.0, 1.0], 0.0).unwrap_err();
        match err {
            Error::SingularMatrix { pivot } => assert_eq!(pivot, 1),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn oversized_problems_are_refused() {
        let dim = MAX_DENSE_DIM + 1;
        let err = natural_gradient_dense(&vec![0.0; dim * dim], &vec![1.0; dim], 1.0).unwrap_err();
        assert!(matches!(err, Error::DimTooLarge { .. }));
    }

    #[test]
    fn jacobi_finds_known_eigenvalues() {
        let a = [2.0, 1.0, 1.0, 2.0];
        let eig = sym_eigenvalues(&a, 2).unwrap();
        assert!((eig[0] - 1.0).abs() < 1e-12);
        assert!((eig[1] - 3.0).abs() < 1e-12);

        // diagonal matrix: eigenvalues are the entries, sorted
        let d = [3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0];
        let eig = sym_eigenvalues(&d, 3).unwrap();
        assert_eq!(eig, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn jacobi_matches_the_trace_and_psd_structure() {
        let obj = SoftmaxRegression::new(3, 2, 64, 29).unwrap();
        let pe = obj.per_example().unwrap();
        let theta = vec![0.05; obj.dim()];
        let all: Vec<usize> = (0..64).collect();
        let fim = dense_fisher(pe, &theta, &all).unwrap();
        let dim = theta.len();
        let eig = sym_eigenvalues(&fim, dim).unwrap();
        let trace: f64 = (0..dim).map(|i| fim[i * dim + i]).sum();
        let eig_sum: f64 = eig.iter().sum();
        assert!((trace - eig_sum).abs() < 1e-10 * trace.abs().max(1.0));
        // empirical Fisher is an average of outer products, hence PSD
        assert!(eig[0] >= -1e-10, "min eigenvalue {}", eig[0]);
    }

    #[test]
    fn dominance_ratio_is_one_for_diagonal_matrices() {
        let d = [2.0, 0.0, 0.0, 5.0];
        assert_eq!(diag_dominance_ratio(&d, 2).unwrap(), 1.0);
        let full = [1.0, 1.0, 1.0, 1.0];
        assert_eq!(diag_dominance_ratio(&full, 2).unwrap(), 0.5);
        assert_eq!(diag_dominance_ratio(&[0.0; 4], 2).unwrap(), 1.0);
    }

    #[test]
    fn ema_fisher_validates_inputs() {
        assert!(EmaFisher::new(0, 0.999).is_err());
        assert!(EmaFisher::new(3, 1.0).is_err());
        let mut ema = EmaFisher::new(2, 0.9).unwrap();
        assert!(ema.observe(&[1.0]).is_err());
    }
}
