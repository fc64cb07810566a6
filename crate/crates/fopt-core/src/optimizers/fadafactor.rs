//! FAdafactor: FAdam with the full Fisher diagonal replaced by the
//! Adafactor-style rank-1 reconstruction `f = R C^T / sum(R)`, where `R`
//! and `C` are EMAs of the row and column sums of `g^2` (so memory is
//! `n + m` instead of `n * m` for the second moment; momentum stays full).
//!
//! ```text
//! t    <- t + 1
//! bhat2<- beta2 (1 - beta2^(t-1)) / (1 - beta2^t)
//! R    <- bhat2 R + (1 - bhat2) rowsum(g^2)       [R0 = 1_n]
//! C    <- bhat2 C + (1 - bhat2) colsum(g^2)       [C0 = 1_m]
//! f    <- outer(R, C) / sum(R)
//! ... remaining lines identical to FAdam ...
//! ```
//!
//! When `g^2` is exactly a rank-1 outer product (and stays on one row/col
//! pattern so the EMA remains rank-1), the reconstruction is exact and the
//! trajectory coincides with FAdam's. Vector-shaped parameter groups skip
//! the factorization entirely and run the FAdam update (the optimizer
//! initializes a full second moment for them).

use crate::error::Result;
use crate::numerics;

use super::fadam::fisher_update;
use super::{factored_fim, row_col_sums, OptimizerConfig, OptimizerState, SecondMoment, StepResult};

pub(super) fn step(
    cfg: &OptimizerConfig,
    state: &OptimizerState,
    theta: &[f64],
    g: &[f64],
    eta: f64,
) -> Result<StepResult> {
    let (row_prev, col_prev) = match &state.second {
        SecondMoment::Factored { row, col } => (row, col),
        // vector group: identical to FAdam, full f
        SecondMoment::Full(_) => return super::fadam::step(cfg, state, theta, g, eta),
    };
    let (n, m) = (row_prev.len(), col_prev.len());
    let t = state.t + 1;
    let bhat2 = numerics::bias_correction(cfg.beta2, t)?;
    let (row_sums, col_sums) = row_col_sums(g, n, m, 0.0);
    let row = numerics::ema_update(row_prev, &row_sums, bhat2)?;
    let col = numerics::ema_update(col_prev, &col_sums, bhat2)?;
    let sum_r: f64 = row.iter().sum();
    // sum(R) = 0 only when every gradient seen so far was exactly zero
    // (the t=1 correction wipes the ones init); then f = 0 and the
    // eps_hat^(2 rho) term below carries the division.
    let f = if sum_r == 0.0 {
        vec![0.0; n * m]
    } else {
        factored_fim(&row, &col, sum_r)
    };
    // eps_hat sees the RMS of the full gradient matrix, same as the
    // unfactored path
    let eps_hat = numerics::adaptive_epsilon(g, cfg.eps, cfg.eps2)?;
    let out = fisher_update(cfg, &f, &state.m, theta, g, eps_hat, eta)?;
    Ok(StepResult {
        t,
        m: out.m,
        second: SecondMoment::Factored { row, col },
        theta: out.theta,
        eps_hat,
        update_rms: out.update_rms,
        grad_clipped: out.grad_clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{Optimizer, ParamGroup, Variant};
    use super::*;

    #[test]
    fn first_step_reconstruction_matches_hand_values() {
        // g = [[1,2],[3,4]]: R=[5,25], C=[10,20], sum(R)=30,
        // f = [[5/3, 10/3], [25/3, 50/3]]
        let group = ParamGroup::matrix("w", vec![0.0; 4], 2, 2).unwrap();
        let mut opt = Optimizer::new(OptimizerConfig::fadafactor(), &group).unwrap();
        let mut theta = group.theta.clone();
        opt.step(&mut theta, &[1.0, 2.0, 3.0, 4.0], None).unwrap();
        match &opt.state().second {
            SecondMoment::Factored { row, col } => {
                assert_eq!(row, &vec![5.0, 25.0]);
                assert_eq!(col, &vec![10.0, 20.0]);
            }
            _ => panic!("fadafactor on a matrix group must stay factored"),
        }
    }

    #[test]
    fn rank_one_first_step_matches_fadam_exactly() {
        // at t=1 the EMA holds a single term, so any rank-1 g^2 is
        // reconstructed exactly and the two variants take the same step
        let theta0 = vec![0.5, -0.25, 1.5, 2.0, -1.0, 0.125];
        let u = [1.5f64, 0.5];
        let v = [2.0, 1.0, 0.25];
        let mut g = Vec::new();
        for (i, ui) in u.iter().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                g.push(sign * (ui * vj).sqrt());
            }
        }

        let mat = ParamGroup::matrix("w", theta0.clone(), 2, 3).unwrap();
        let mut ff = Optimizer::new(OptimizerConfig::fadafactor().with_lr(0.05), &mat).unwrap();
        let mut theta_ff = theta0.clone();
        ff.step(&mut theta_ff, &g, None).unwrap();

        let vecg = ParamGroup::vector("w", theta0.clone()).unwrap();
        let mut fa = Optimizer::new(OptimizerConfig::fadam().with_lr(0.05), &vecg).unwrap();
        let mut theta_fa = theta0;
        fa.step(&mut theta_fa, &g, None).unwrap();

        for (a, b) in theta_ff.iter().zip(&theta_fa) {
            assert!(
                (a - b).abs() <= 1e-14 * a.abs().max(1.0),
                "rank-1 t=1 step diverged between factored and full: {a} vs {b}"
            );
        }
    }

    #[test]
    fn zero_gradient_history_takes_the_f_zero_path() {
        let group = ParamGroup::matrix("w", vec![1.0, -1.0, 0.5, 2.0], 2, 2).unwrap();
        let mut opt = Optimizer::new(OptimizerConfig::fadafactor().with_lr(0.1), &group).unwrap();
        let mut theta = group.theta.clone();
        let report = opt.step(&mut theta, &[0.0; 4], None).unwrap();
        // pure decay step, same contract as FAdam's zero-gradient case
        assert_eq!(report.eps_hat, numerics::EPSILON_FLOOR);
        assert!(theta.iter().all(|x| x.is_finite()));
        assert!(opt.state().m.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn vector_group_falls_back_to_the_full_update() {
        let group = ParamGroup::vector("b", vec![1.0, 2.0]).unwrap();
        let mut opt = Optimizer::new(OptimizerConfig::fadafactor().with_lr(0.1), &group).unwrap();
        assert_eq!(opt.cfg().variant, Variant::FAdafactor);
        let mut theta = group.theta.clone();
        opt.step(&mut theta, &[0.3, -0.4], None).unwrap();
        match &opt.state().second {
            SecondMoment::Full(f) => assert_eq!(f.len(), 2),
            _ => panic!("vector group must use the full second moment"),
        }
    }
}
