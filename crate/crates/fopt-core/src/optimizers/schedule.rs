//! Learning-rate schedules: pure `step -> eta` functions, queried with the
//! post-increment step index (the first applied step asks for `t = 1`).

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum LrSchedule {
    /// The same rate every step.
    Constant { lr: f64 },
    /// Ramp linearly from `lr / warmup_steps` at `t = 1` up to `lr` at
    /// `t = warmup_steps`, constant afterwards.
    LinearWarmup { lr: f64, warmup_steps: u64 },
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        LrSchedule::Constant { lr }
    }

    pub fn linear_warmup(lr: f64, warmup_steps: u64) -> Self {
        LrSchedule::LinearWarmup { lr, warmup_steps }
    }

    /// Peak rate (the plateau value).
    pub fn peak_lr(&self) -> f64 {
        match self {
            LrSchedule::Constant { lr } => *lr,
            LrSchedule::LinearWarmup { lr, .. } => *lr,
        }
    }

    /// Rate for step `t >= 1`.
    pub fn lr_at(&self, t: u64) -> f64 {
        match self {
            LrSchedule::Constant { lr } => *lr,
            LrSchedule::LinearWarmup { lr, warmup_steps } => {
                if t >= *warmup_steps {
                    *lr
                } else {
                    lr * t as f64 / *warmup_steps as f64
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.peak_lr();
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive and finite, got {lr}"
            )));
        }
        if let LrSchedule::LinearWarmup { warmup_steps, .. } = self {
            if *warmup_steps == 0 {
                return Err(Error::InvalidConfig(
                    "warmup_steps must be at least 1".to_string(),
                ));
            }
        }
        Ok(())
    }
}
