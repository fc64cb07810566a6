//! Adam baseline (decoupled weight decay, RMS clipping), kept verbatim for
//! comparison runs: raw-gradient momentum, zero-initialized second moment,
//! and explicit bias corrections applied at use time.
//!
//! ```text
//! t    <- t + 1
//! v    <- beta2 v + (1 - beta2) g^2            [v0 = 0]
//! m    <- beta1 m + (1 - beta1) g              [m0 = 0]
//! vhat <- v / (1 - beta2^t)
//! mhat <- m / (1 - beta1^t)
//! gbar <- mhat / (sqrt(vhat) + eps)
//! gbar <- gbar / max(1, rms(gbar)/c)
//! theta<- theta - eta (gbar + lambda theta)
//! ```
//!
//! The stored state is the raw EMA pair `(m, v)`; corrections are applied
//! when the update is formed. Storing already-corrected values and
//! re-correcting each step compounds a factor `beta/(1 - beta^t)` per step
//! and overflows within a few hundred steps, so that reading is rejected.
//! Weight decay is decoupled and unscaled: `lambda theta` rides along
//! inside the learning rate but outside the preconditioner.

use crate::error::Result;
use crate::numerics;

use super::{ensure_finite, OptimizerConfig, OptimizerState, SecondMoment, StepResult};

pub(super) fn step(
    cfg: &OptimizerConfig,
    state: &OptimizerState,
    theta: &[f64],
    g: &[f64],
    eta: f64,
) -> Result<StepResult> {
    let t = state.t + 1;
    let g_sq: Vec<f64> = g.iter().map(|x| x * x).collect();
    let v = numerics::ema_update(state.second.expect_full("adam")?, &g_sq, cfg.beta2)?;
    let m = numerics::lerp(&state.m, g, cfg.beta1)?;

    let bc2 = 1.0 - cfg.beta2.powf(t as f64);
    let bc1 = 1.0 - cfg.beta1.powf(t as f64);
    let gbar: Vec<f64> = m
        .iter()
        .zip(&v)
        .map(|(mi, vi)| (mi / bc1) / ((vi / bc2).sqrt() + cfg.eps))
        .collect();
    ensure_finite(&gbar, "adam update direction")?;
    let grad_clipped = numerics::rms(&gbar)? > cfg.clip_c;
    let gbar = numerics::clip_by_rms(&gbar, cfg.clip_c)?;

    let lambda = cfg.weight_decay_lambda;
    let update: Vec<f64> = gbar
        .iter()
        .zip(theta)
        .map(|(gi, th)| eta * (gi + lambda * th))
        .collect();
    let update_rms = numerics::rms(&update)?;
    let new_theta: Vec<f64> = theta.iter().zip(&update).map(|(th, u)| th - u).collect();
    ensure_finite(&new_theta, "adam updated parameters")?;

    Ok(StepResult {
        t,
        m,
        second: SecondMoment::Full(v),
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
        // theta=1, g=1: v=0.001, m=0.1; corrections make vhat=mhat=1;
        // gbar = 1/(1+1e-8); theta' = 1 - eta (gbar + 0.001)
        let group = ParamGroup::vector("w", vec![1.0]).unwrap();
        let mut opt = Optimizer::new(OptimizerConfig::adam().with_lr(0.1), &group).unwrap();
        let mut theta = group.theta.clone();
        let report = opt.step(&mut theta, &[1.0], None).unwrap();
        assert!((opt.state().m[0] - 0.1).abs() < 1e-15);
        match &opt.state().second {
            SecondMoment::Full(v) => assert!((v[0] - 0.001).abs() < 1e-18),
            _ => panic!("adam keeps a full second moment"),
        }
        let gbar = 1.0 / (1.0 + 1e-8);
        let want = 1.0 - 0.1 * (gbar + 0.001);
        assert!((theta[0] - want).abs() < 1e-15, "{} vs {want}", theta[0]);
        assert_eq!(report.eps_hat, 1e-8);
    }

    #[test]
    fn constant_gradient_fixed_point() {
        // with g held fixed, the raw EMAs converge to g and g^2 and the
        // corrected update direction converges to sign(g)-with-eps
        let group = ParamGroup::vector("w", vec![0.0]).unwrap();
        let cfg = OptimizerConfig::adam().with_lr(1e-6);
        let mut opt = Optimizer::new(cfg, &group).unwrap();
        let mut theta = group.theta.clone();
        let g = 0.75;
        for _ in 0..30_000 {
            opt.step(&mut theta, &[g], None).unwrap();
        }
        assert!(
            (opt.state().m[0] - g).abs() < 1e-8,
            "m must converge to g: {}",
            opt.state().m[0]
        );
        match &opt.state().second {
            SecondMoment::Full(v) => assert!(
                (v[0] - g * g).abs() < 1e-8,
                "v must converge to g^2: {}",
                v[0]
            ),
            _ => unreachable!(),
        }
    }

    #[test]
    fn state_stays_finite_over_long_runs() {
        // guards against the compounding re-correction reading, which
        // overflows before t = 400 on a constant unit gradient
        let group = ParamGroup::vector("w", vec![0.0]).unwrap();
        let mut opt = Optimizer::new(OptimizerConfig::adam().with_lr(1e-4), &group).unwrap();
        let mut theta = group.theta.clone();
        for _ in 0..1000 {
            opt.step(&mut theta, &[1.0], None).unwrap();
        }
        match &opt.state().second {
            SecondMoment::Full(v) => assert!(v[0].is_finite() && v[0] <= 1.0 + 1e-12),
            _ => unreachable!(),
        }
    }

    #[test]
    fn momentum_zero_beta1_passes_raw_gradient_through() {
        let group = ParamGroup::vector("w", vec![0.0, 0.0]).unwrap();
        let mut cfg = OptimizerConfig::adam().with_lr(0.01);
        cfg.beta1 = 0.0;
        let mut opt = Optimizer::new(cfg, &group).unwrap();
        let mut theta = group.theta.clone();
        opt.step(&mut theta, &[0.3, -0.7], None).unwrap();
        assert_eq!(opt.state().m, vec![0.3, -0.7]);
    }
}
