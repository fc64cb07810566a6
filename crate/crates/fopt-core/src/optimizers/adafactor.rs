//! Adafactor baseline, transcribed with its published quirks intact:
//!
//! - eps (default 1e-30) is added to `g^2` INSIDE the second-moment EMA;
//!   there is no epsilon in the update denominator at all;
//! - the row/col EMAs start at zero and use the same step-dependent
//!   corrected rate as the FAdam family;
//! - the learning rate multiplies the clipped direction INSIDE the momentum
//!   EMA, and the final parameter update applies `m + lambda theta` with no
//!   further eta — so weight decay is effectively unscaled by the learning
//!   rate. Peculiar, but that is the published update; it is kept verbatim
//!   because this variant exists to be compared against, not improved.
//!
//! ```text
//! t    <- t + 1
//! bhat2<- beta2 (1 - beta2^(t-1)) / (1 - beta2^t)
//! R    <- bhat2 R + (1 - bhat2) rowsum(g^2 + eps)     [R0 = 0_n]
//! C    <- bhat2 C + (1 - bhat2) colsum(g^2 + eps)     [C0 = 0_m]
//! f    <- outer(R, C) / sum(R)
//! gbar <- g / sqrt(f)
//! gbar <- gbar / max(1, rms(gbar)/c)
//! m    <- beta1 m + (1 - beta1) eta gbar
//! theta<- theta - (m + lambda theta)
//! ```
//!
//! Vector-shaped groups keep a full second moment with the same EMA
//! (`f <- bhat2 f + (1 - bhat2)(g^2 + eps)`) and are otherwise identical.

use crate::error::{Error, Result};
use crate::numerics;

use super::{ensure_finite, factored_fim, row_col_sums, OptimizerConfig, OptimizerState, SecondMoment, StepResult};

pub(super) fn step(
    cfg: &OptimizerConfig,
    state: &OptimizerState,
    theta: &[f64],
    g: &[f64],
    eta: f64,
) -> Result<StepResult> {
    let t = state.t + 1;
    let bhat2 = numerics::bias_correction(cfg.beta2, t)?;

    let (f, second) = match &state.second {
        SecondMoment::Factored { row, col } => {
            let (n, m) = (row.len(), col.len());
            let (row_sums, col_sums) = row_col_sums(g, n, m, cfg.eps);
            let row = numerics::ema_update(row, &row_sums, bhat2)?;
            let col = numerics::ema_update(col, &col_sums, bhat2)?;
            let sum_r: f64 = row.iter().sum();
            if sum_r <= 0.0 {
                // unreachable with eps > 0 (every row sum picks up m*eps);
                // kept as a hard stop for a hand-built zero state
                return Err(Error::DegenerateFim);
            }
            (factored_fim(&row, &col, sum_r), SecondMoment::Factored { row, col })
        }
        SecondMoment::Full(f_prev) => {
            let sample: Vec<f64> = g.iter().map(|x| x * x + cfg.eps).collect();
            let f = numerics::ema_update(f_prev, &sample, bhat2)?;
            (f.clone(), SecondMoment::Full(f))
        }
    };

    let gbar: Vec<f64> = g.iter().zip(&f).map(|(gi, fi)| gi / fi.sqrt()).collect();
    ensure_finite(&gbar, "adafactor update direction")?;
    let grad_clipped = numerics::rms(&gbar)? > cfg.clip_c;
    let gbar = numerics::clip_by_rms(&gbar, cfg.clip_c)?;

    // eta rides inside the momentum EMA
    let eta_gbar: Vec<f64> = gbar.iter().map(|x| eta * x).collect();
    let m = numerics::lerp(&state.m, &eta_gbar, cfg.beta1)?;

    let lambda = cfg.weight_decay_lambda;
    let update: Vec<f64> = m
        .iter()
        .zip(theta)
        .map(|(mi, th)| mi + lambda * th)
        .collect();
    let update_rms = numerics::rms(&update)?;
    let new_theta: Vec<f64> = theta.iter().zip(&update).map(|(th, u)| th - u).collect();
    ensure_finite(&new_theta, "adafactor updated parameters")?;

    Ok(StepResult {
        t,
        m,
        second,
        theta: new_theta,
        eps_hat: cfg.eps,
        update_rms,
        grad_clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{Optimizer, ParamGroup};
    use super::*;

    #[test]
    fn first_step_matches_the_worked_example() {
        // 1x1 group, g=1, eta=0.1: R=C=1+eps, f~1, gbar~1 (no clip),
        // m = 0.1 * eta = 0.01, theta' = 1 - (0.01 + 0.001)
        let group = ParamGroup::matrix("w", vec![1.0], 1, 1).unwrap();
        let mut opt = Optimizer::new(OptimizerConfig::adafactor().with_lr(0.1), &group).unwrap();
        let mut theta = group.theta.clone();
        opt.step(&mut theta, &[1.0], None).unwrap();
        assert!((opt.state().m[0] - 0.01).abs() < 1e-15);
        assert!((theta[0] - 0.989).abs() < 1e-15, "theta = {}", theta[0]);
    }

    #[test]
    fn eps_keeps_the_denominator_alive_on_zero_gradients() {
        let group = ParamGroup::matrix("w", vec![1.0, -2.0], 1, 2).unwrap();
        let mut opt = Optimizer::new(OptimizerConfig::adafactor().with_lr(0.1), &group).unwrap();
        let mut theta = group.theta.clone();
        // rowsum(0 + eps) keeps sum(R) > 0, f > 0, gbar = 0/sqrt(f) = 0
        let report = opt.step(&mut theta, &[0.0, 0.0], None).unwrap();
        assert!(theta.iter().all(|x| x.is_finite()));
        assert_eq!(opt.state().m, vec![0.0, 0.0]);
        // update reduces to the bare lambda decay (note: no eta on it)
        assert!((theta[0] - (1.0 - 0.001 * 1.0)).abs() < 1e-15);
        assert!((theta[1] - (-2.0 + 0.001 * 2.0)).abs() < 1e-15);
        assert_eq!(report.eps_hat, 1e-30);
    }

    #[test]
    fn weight_decay_ignores_the_learning_rate() {
        // two optimizers, same stream, lr differing by 10x: the decay
        // portion of the very first update must be identical
        let mk = |lr: f64| {
            let group = ParamGroup::matrix("w", vec![5.0], 1, 1).unwrap();
            let opt = Optimizer::new(OptimizerConfig::adafactor().with_lr(lr), &group).unwrap();
            (opt, group.theta.clone())
        };
        let (mut a, mut ta) = mk(0.1);
        let (mut b, mut tb) = mk(0.01);
        a.step(&mut ta, &[0.0], None).unwrap();
        b.step(&mut tb, &[0.0], None).unwrap();
        assert_eq!(ta, tb, "decay-only steps must not depend on eta");
    }

    #[test]
    fn vector_group_uses_the_unfactored_ema() {
        let group = ParamGroup::vector("b", vec![0.5, 0.5, 0.5]).unwrap();
        let mut opt = Optimizer::new(OptimizerConfig::adafactor().with_lr(0.1), &group).unwrap();
        let mut theta = group.theta.clone();
        opt.step(&mut theta, &[3.0, 0.0, -4.0], None).unwrap();
        match &opt.state().second {
            SecondMoment::Full(f) => {
                assert!((f[0] - 9.0).abs() < 1e-12);
                assert!((f[2] - 16.0).abs() < 1e-12);
            }
            _ => panic!("vector group must fall back to the full second moment"),
        }
    }
}
