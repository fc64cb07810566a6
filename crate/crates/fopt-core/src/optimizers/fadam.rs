//! FAdam: Adam reinterpreted as natural gradient descent under the diagonal
//! empirical Fisher, with four consequences baked into the update:
//!
//! 1. the second moment `f` is the FIM estimate itself — initialized to
//!    ones and corrected through the step-dependent EMA rate, so the init
//!    is wiped at `t = 1` rather than divided away afterwards;
//! 2. the denominator epsilon adapts to the gradient scale
//!    (`min(eps, eps2 * rms(g))`) and enters as `eps_hat^(2 rho)` so it
//!    lives on the same scale as `f^rho`;
//! 3. momentum averages the CLIPPED natural gradient (so no momentum bias
//!    correction: the EMA ramp itself is the warmup);
//! 4. weight decay descends the regularizer under the same metric:
//!    `theta / (f^rho + eps_hat^(2 rho))`, clipped like the gradient path.
//!
//! One step (state carries `t`, `m`, full `f`; eta is the scheduled rate):
//!
//! ```text
//! t       <- t + 1
//! bhat2   <- beta2 (1 - beta2^(t-1)) / (1 - beta2^t)
//! f       <- bhat2 f + (1 - bhat2) g^2
//! eps_hat <- min(eps, eps2 rms(g))            [floor 1e-30 when rms(g) = 0]
//! gbar    <- g / (f^rho + eps_hat^(2 rho))
//! gbar    <- gbar / max(1, rms(gbar)/c)
//! m       <- beta1 m + (1 - beta1) gbar       [or xlerp(m, gbar, beta1)]
//! gw      <- theta / (f^rho + eps_hat^(2 rho))
//! gw      <- gw / max(1, rms(gw)/c)
//! theta   <- theta - eta (m + lambda gw)
//! ```

use crate::error::Result;
use crate::numerics;

use super::{ensure_finite, EmaMode, OptimizerConfig, OptimizerState, SecondMoment, StepResult};

pub(super) fn step(
    cfg: &OptimizerConfig,
    state: &OptimizerState,
    theta: &[f64],
    g: &[f64],
    eta: f64,
) -> Result<StepResult> {
    let t = state.t + 1;
    let bhat2 = numerics::bias_correction(cfg.beta2, t)?;
    let g_sq: Vec<f64> = g.iter().map(|x| x * x).collect();
    let f = numerics::ema_update(state.second.expect_full("fadam")?, &g_sq, bhat2)?;
    let eps_hat = numerics::adaptive_epsilon(g, cfg.eps, cfg.eps2)?;
    let out = fisher_update(cfg, &f, &state.m, theta, g, eps_hat, eta)?;
    Ok(StepResult {
        t,
        m: out.m,
        second: SecondMoment::Full(f),
        theta: out.theta,
        eps_hat,
        update_rms: out.update_rms,
        grad_clipped: out.grad_clipped,
    })
}

pub(super) struct FisherUpdate {
    pub m: Vec<f64>,
    pub theta: Vec<f64>,
    pub update_rms: f64,
    pub grad_clipped: bool,
}

/// The lines downstream of the second-moment update, shared verbatim with
/// FAdafactor (which only differs in how `f` is produced).
pub(super) fn fisher_update(
    cfg: &OptimizerConfig,
    f: &[f64],
    m_prev: &[f64],
    theta: &[f64],
    g: &[f64],
    eps_hat: f64,
    eta: f64,
) -> Result<FisherUpdate> {
    let rho = cfg.fim_exponent_rho;
    let eps_term = eps_hat.powf(2.0 * rho);
    let denom: Vec<f64> = f.iter().map(|fi| fi.powf(rho) + eps_term).collect();

    let gbar: Vec<f64> = g.iter().zip(&denom).map(|(gi, d)| gi / d).collect();
    ensure_finite(&gbar, "fadam natural gradient")?;
    let grad_clipped = numerics::rms(&gbar)? > cfg.clip_c;
    let gbar = numerics::clip_by_rms(&gbar, cfg.clip_c)?;

    let m = match cfg.ema_mode {
        EmaMode::Linear => numerics::lerp(m_prev, &gbar, cfg.beta1)?,
        EmaMode::Xlerp => numerics::xlerp(m_prev, &gbar, cfg.beta1)?,
    };

    let gw: Vec<f64> = theta.iter().zip(&denom).map(|(th, d)| th / d).collect();
    ensure_finite(&gw, "fadam decay direction")?;
    let gw = numerics::clip_by_rms(&gw, cfg.clip_c)?;

    let lambda = cfg.weight_decay_lambda;
    let update: Vec<f64> = m
        .iter()
        .zip(&gw)
        .map(|(mi, wi)| eta * (mi + lambda * wi))
        .collect();
    let update_rms = numerics::rms(&update)?;
    let theta: Vec<f64> = theta.iter().zip(&update).map(|(th, u)| th - u).collect();
    ensure_finite(&theta, "fadam updated parameters")?;

    Ok(FisherUpdate {
        m,
        theta,
        update_rms,
        grad_clipped,
    })
}
