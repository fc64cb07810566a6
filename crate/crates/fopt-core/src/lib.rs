//! Fisher-preconditioned optimizers and the lab equipment to probe them.
//!
//! The crate has four layers:
//!
//! * [`numerics`] — the scalar and vector kernels everything else is built
//!   from: RMS, bias-corrected EMA decay, adaptive epsilon, RMS clipping,
//!   and the interpolation family (`lerp`/`plerp`/`slerp`/`nlerp`/`xlerp`).
//! * [`objectives`] — toy objectives with analytic gradients and a
//!   finite-difference oracle to check them.
//! * [`optimizers`] — four first-order update rules behind one stepper:
//!   two natural-gradient variants that treat the squared-gradient EMA as
//!   an empirical Fisher diagonal (full and rank-1 factored), plus plain
//!   Adam and Adafactor baselines, and a run loop with minibatching,
//!   divergence handling, and bitwise-exact state snapshots.
//! * [`fisher`] — empirical Fisher estimators and diagnostics: diagonal
//!   estimator comparisons, Jensen-gap reports, batch-size sensitivity,
//!   and dense natural-gradient solves for small problems.
//!
//! Everything is deterministic given explicit seeds; no global RNG state.

pub mod error;
pub mod fisher;
pub mod numerics;
pub mod objectives;
pub mod optimizers;

pub use error::{Error, Result};
pub use objectives::{Eval, Objective, PerExample};
pub use optimizers::{
    run, EmaMode, Optimizer, OptimizerConfig, OptimizerState, ParamGroup, RunConfig, RunOutcome,
    SecondMoment, StepReport, Variant,
};
