//! The optimizer family: FAdam and FAdafactor (Fisher-preconditioned,
//! clipped, with FIM-scaled weight decay) plus the Adam and Adafactor
//! baselines they are measured against.
//!
//! All four share one state layout ([`OptimizerState`]) and one step entry
//! point ([`Optimizer::step`]); they differ in how the second moment is
//! initialized, corrected, and applied:
//!
//! | variant     | second moment            | init          | correction            |
//! |-------------|--------------------------|---------------|-----------------------|
//! | FAdam       | full `f`                 | ones          | folded into the EMA rate |
//! | FAdafactor  | row/col factors `R`, `C` | ones          | folded into the EMA rate |
//! | Adam        | full `v`                 | zeros         | applied at use time   |
//! | Adafactor   | row/col factors          | zeros         | folded into the EMA rate |
//!
//! Step functions are pure in `(config, state, theta, gradient)`: new state
//! and parameters are built in fresh buffers and committed only after every
//! output was validated finite, so a failed step leaves everything bitwise
//! untouched.

mod adafactor;
mod adam;
mod fadafactor;
mod fadam;
mod runner;
pub mod schedule;
pub mod snapshot;

pub use runner::{run, RunConfig, RunOutcome};
pub use schedule::LrSchedule;

use crate::error::{Error, Result};
use crate::numerics;

/// Which update rule [`Optimizer::step`] applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    FAdam,
    FAdafactor,
    Adam,
    Adafactor,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::FAdam,
        Variant::FAdafactor,
        Variant::Adam,
        Variant::Adafactor,
    ];

    /// True for the variants that keep a factored (row/col) second moment
    /// when given a matrix-shaped parameter group.
    pub fn is_factored(self) -> bool {
        matches!(self, Variant::FAdafactor | Variant::Adafactor)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::FAdam => "fadam",
            Variant::FAdafactor => "fadafactor",
            Variant::Adam => "adam",
            Variant::Adafactor => "adafactor",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fadam" => Ok(Variant::FAdam),
            "fadafactor" => Ok(Variant::FAdafactor),
            "adam" => Ok(Variant::Adam),
            "adafactor" => Ok(Variant::Adafactor),
            other => Err(Error::InvalidConfig(format!(
                "unknown variant '{other}' (expected fadam, fadafactor, adam, adafactor)"
            ))),
        }
    }
}

/// How the momentum line averages the clipped natural gradient.
///
/// `Xlerp` (norm-interpolating) applies only to FAdam/FAdafactor momentum;
/// the Adam/Adafactor baselines are faithful transcriptions and ignore it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EmaMode {
    #[default]
    Linear,
    Xlerp,
}

impl std::str::FromStr for EmaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(EmaMode::Linear),
            "xlerp" => Ok(EmaMode::Xlerp),
            other => Err(Error::InvalidConfig(format!(
                "unknown ema mode '{other}' (expected linear or xlerp)"
            ))),
        }
    }
}

/// Hyperparameters shared by the whole family. Construct via the
/// per-variant constructors (which pin that variant's published defaults)
/// and adjust fields or chain the builder helpers.
#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    pub variant: Variant,
    /// Momentum decay; `0` disables momentum entirely.
    pub beta1: f64,
    /// Second-moment decay.
    pub beta2: f64,
    /// Epsilon ceiling (FAdam/FAdafactor: cap on the adaptive epsilon;
    /// Adam: the usual denominator epsilon; Adafactor: added to `g^2`
    /// inside the EMA).
    pub eps: f64,
    /// Gradient-RMS multiplier for the adaptive epsilon (FAdam family only).
    pub eps2: f64,
    /// RMS threshold shared by the gradient clip and the weight-decay clip.
    pub clip_c: f64,
    pub weight_decay_lambda: f64,
    /// Exponent on the Fisher diagonal in the preconditioner, in `(0, 1]`;
    /// `0.5` is the natural-gradient-under-square-root setting.
    pub fim_exponent_rho: f64,
    pub lr_schedule: LrSchedule,
    pub ema_mode: EmaMode,
}

impl OptimizerConfig {
    fn base(variant: Variant, eps: f64) -> Self {
        OptimizerConfig {
            variant,
            beta1: 0.9,
            beta2: 0.999,
            eps,
            eps2: 0.01,
            clip_c: 1.0,
            weight_decay_lambda: 0.001,
            fim_exponent_rho: 0.5,
            lr_schedule: LrSchedule::constant(1e-3),
            ema_mode: EmaMode::Linear,
        }
    }

    /// FAdam defaults: beta1 0.9, beta2 0.999, eps 1e-8, eps2 0.01, clip 1,
    /// lambda 0.001, rho 0.5.
    pub fn fadam() -> Self {
        Self::base(Variant::FAdam, 1e-8)
    }

    /// FAdafactor: FAdam defaults with the factored second moment.
    pub fn fadafactor() -> Self {
        Self::base(Variant::FAdafactor, 1e-8)
    }

    /// Adam baseline defaults (eps 1e-8).
    pub fn adam() -> Self {
        Self::base(Variant::Adam, 1e-8)
    }

    /// Adafactor baseline defaults. Its eps (1e-30) lives inside the
    /// second-moment EMA, not in the update denominator.
    pub fn adafactor() -> Self {
        Self::base(Variant::Adafactor, 1e-30)
    }

    pub fn for_variant(variant: Variant) -> Self {
        match variant {
            Variant::FAdam => Self::fadam(),
            Variant::FAdafactor => Self::fadafactor(),
            Variant::Adam => Self::adam(),
            Variant::Adafactor => Self::adafactor(),
        }
    }

    /// Replace the schedule with a constant learning rate.
    pub fn with_lr(mut self, lr: f64) -> Self {
        self.lr_schedule = LrSchedule::constant(lr);
        self
    }

    pub fn with_schedule(mut self, schedule: LrSchedule) -> Self {
        self.lr_schedule = schedule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig(msg.to_string()))
            }
        };
        check(
            self.beta1.is_finite() && (0.0..1.0).contains(&self.beta1),
            &format!("beta1 must lie in [0, 1), got {}", self.beta1),
        )?;
        check(
            self.beta2.is_finite() && self.beta2 > 0.0 && self.beta2 < 1.0,
            &format!("beta2 must lie in (0, 1), got {}", self.beta2),
        )?;
        check(
            self.eps.is_finite() && self.eps > 0.0,
            &format!("eps must be positive, got {}", self.eps),
        )?;
        check(
            self.eps2.is_finite() && self.eps2 > 0.0,
            &format!("eps2 must be positive, got {}", self.eps2),
        )?;
        check(
            self.clip_c.is_finite() && self.clip_c > 0.0,
            &format!("clip_c must be positive, got {}", self.clip_c),
        )?;
        check(
            self.weight_decay_lambda.is_finite() && self.weight_decay_lambda >= 0.0,
            &format!(
                "weight_decay_lambda must be nonnegative, got {}",
                self.weight_decay_lambda
            ),
        )?;
        check(
            self.fim_exponent_rho.is_finite()
                && self.fim_exponent_rho > 0.0
                && self.fim_exponent_rho <= 1.0,
            &format!(
                "fim_exponent_rho must lie in (0, 1], got {}",
                self.fim_exponent_rho
            ),
        )?;
        self.lr_schedule.validate()
    }
}

/// A named flat parameter vector, optionally carrying a row-major matrix
/// shape (`rows * cols == theta.len()`) that the factored variants use to
/// keep row/column second-moment statistics.
#[derive(Clone, Debug)]
pub struct ParamGroup {
    pub name: String,
    pub theta: Vec<f64>,
    pub matrix_shape: Option<(usize, usize)>,
}

impl ParamGroup {
    pub fn vector(name: impl Into<String>, theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::EmptyInput { what: "ParamGroup" });
        }
        Ok(ParamGroup {
            name: name.into(),
            theta,
            matrix_shape: None,
        })
    }

    pub fn matrix(
        name: impl Into<String>,
        theta: Vec<f64>,
        rows: usize,
        cols: usize,
    ) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::EmptyInput { what: "ParamGroup" });
        }
        if rows == 0 || cols == 0 || rows * cols != theta.len() {
            return Err(Error::InvalidConfig(format!(
                "matrix shape {rows}x{cols} does not cover {} parameters",
                theta.len()
            )));
        }
        Ok(ParamGroup {
            name: name.into(),
            theta,
            matrix_shape: Some((rows, cols)),
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

/// Second-moment storage: a full per-parameter diagonal, or the factored
/// row/column sums whose normalized outer product reconstructs it.
#[derive(Clone, Debug, PartialEq)]
pub enum SecondMoment {
    Full(Vec<f64>),
    Factored { row: Vec<f64>, col: Vec<f64> },
}

impl SecondMoment {
    fn expect_full(&self, what: &'static str) -> Result<&[f64]> {
        match self {
            SecondMoment::Full(f) => Ok(f),
            SecondMoment::Factored { .. } => Err(Error::InvalidConfig(format!(
                "{what}: expected a full second moment, found a factored one"
            ))),
        }
    }
}

/// Mutable optimizer state: step counter, momentum, second moment.
/// `t` starts at 0 and is incremented at the top of each step, so the
/// first applied step computes with `t = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub t: u64,
    pub m: Vec<f64>,
    pub second: SecondMoment,
}

/// Per-step observability record; every field is finite.
#[derive(Clone, Debug)]
pub struct StepReport {
    /// Step index after application (first step reports 1).
    pub step: u64,
    /// Loss as supplied by the caller, if any.
    pub loss: Option<f64>,
    /// RMS of the raw incoming gradient.
    pub grad_rms: f64,
    /// RMS of the applied parameter change.
    pub update_rms: f64,
    /// Epsilon actually used in the denominator this step (the adaptive
    /// value for the FAdam family, the configured constant otherwise).
    pub eps_hat: f64,
    /// 1.0 when the gradient-path RMS clip rescaled, 0.0 when it was a
    /// no-op.
    pub clipped_grad_fraction: f64,
}

/// Everything a variant step computes, staged before commit.
pub(crate) struct StepResult {
    pub t: u64,
    pub m: Vec<f64>,
    pub second: SecondMoment,
    pub theta: Vec<f64>,
    pub eps_hat: f64,
    pub update_rms: f64,
    pub grad_clipped: bool,
}

/// One parameter group's optimizer: configuration plus live state.
#[derive(Clone, Debug)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    state: OptimizerState,
}

impl Optimizer {
    /// Initialize state for `group` (the group fixes dimension and, for the
    /// factored variants, the row/col layout; vector groups under factored
    /// variants fall back to the full second moment).
    pub fn new(cfg: OptimizerConfig, group: &ParamGroup) -> Result<Self> {
        cfg.validate()?;
        let d = group.dim();
        let init = match cfg.variant {
            Variant::FAdam | Variant::FAdafactor => 1.0,
            Variant::Adam | Variant::Adafactor => 0.0,
        };
        let second = match (cfg.variant.is_factored(), group.matrix_shape) {
            (true, Some((n, m))) => SecondMoment::Factored {
                row: vec![init; n],
                col: vec![init; m],
            },
            _ => SecondMoment::Full(vec![init; d]),
        };
        Ok(Optimizer {
            cfg,
            state: OptimizerState {
                t: 0,
                m: vec![0.0; d],
                second,
            },
        })
    }

    /// Rebuild an optimizer from a snapshot taken with
    /// [`snapshot::write_state`]; shapes must match `group`.
    pub fn restore(cfg: OptimizerConfig, state: OptimizerState, group: &ParamGroup) -> Result<Self> {
        cfg.validate()?;
        let d = group.dim();
        if state.m.len() != d {
            return Err(Error::LengthMismatch {
                what: "restore: momentum",
                expected: d,
                got: state.m.len(),
            });
        }
        match &state.second {
            SecondMoment::Full(f) if f.len() != d => {
                return Err(Error::LengthMismatch {
                    what: "restore: second moment",
                    expected: d,
                    got: f.len(),
                });
            }
            SecondMoment::Factored { row, col } => match group.matrix_shape {
                Some((n, m)) if row.len() == n && col.len() == m => {}
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "restore: factored state {}x{} does not match the group shape {:?}",
                        row.len(),
                        col.len(),
                        group.matrix_shape
                    )));
                }
            },
            _ => {}
        }
        Ok(Optimizer { cfg, state })
    }

    pub fn cfg(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    /// Apply one step of the configured variant to `theta` in place.
    ///
    /// A gradient with any non-finite component rejects the step: the error
    /// carries the offending index and neither `theta` nor the state is
    /// modified. `loss` is carried through to the report untouched.
    pub fn step(
        &mut self,
        theta: &mut [f64],
        grad: &[f64],
        loss: Option<f64>,
    ) -> Result<StepReport> {
        let d = self.state.m.len();
        if theta.len() != d {
            return Err(Error::LengthMismatch {
                what: "step: theta",
                expected: d,
                got: theta.len(),
            });
        }
        if grad.len() != d {
            return Err(Error::LengthMismatch {
                what: "step: gradient",
                expected: d,
                got: grad.len(),
            });
        }
        if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
        let grad_rms = numerics::rms(grad)?;
        let eta = self.cfg.lr_schedule.lr_at(self.state.t + 1);
        let res = match self.cfg.variant {
            Variant::FAdam => fadam::step(&self.cfg, &self.state, theta, grad, eta)?,
            Variant::FAdafactor => fadafactor::step(&self.cfg, &self.state, theta, grad, eta)?,
            Variant::Adam => adam::step(&self.cfg, &self.state, theta, grad, eta)?,
            Variant::Adafactor => adafactor::step(&self.cfg, &self.state, theta, grad, eta)?,
        };
        let report = StepReport {
            step: res.t,
            loss,
            grad_rms,
            update_rms: res.update_rms,
            eps_hat: res.eps_hat,
            clipped_grad_fraction: if res.grad_clipped { 1.0 } else { 0.0 },
        };
        self.state.t = res.t;
        self.state.m = res.m;
        self.state.second = res.second;
        theta.copy_from_slice(&res.theta);
        Ok(report)
    }
}

/// Row and column sums of `(g^2 + add)` for a row-major `n x m` gradient.
pub(crate) fn row_col_sums(g: &[f64], n: usize, m: usize, add: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rows = vec![0.0; n];
    let mut cols = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            let v = g[i * m + j] * g[i * m + j] + add;
            rows[i] += v;
            cols[j] += v;
        }
    }
    (rows, cols)
}

/// Reconstruct the dense second-moment diagonal `R_i C_j / sum(R)` from the
/// factored statistics.
pub(crate) fn factored_fim(row: &[f64], col: &[f64], sum_r: f64) -> Vec<f64> {
    let mut f = Vec::with_capacity(row.len() * col.len());
    for r in row {
        for c in col {
            f.push(r * c / sum_r);
        }
    }
    f
}

pub(crate) fn ensure_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteValue { what })
    }
}
