//! Deterministic training loop: seeded minibatch selection, per-step
//! reports streamed to a caller-supplied sink, rejected-step accounting,
//! and a hard abort on non-finite losses.

use std::ops::ControlFlow;

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::objectives::Objective;

use super::{Optimizer, OptimizerConfig, ParamGroup, StepReport};

/// Loop controls, separate from the optimizer hyperparameters.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub steps: u64,
    /// Seeds the minibatch index stream (the objective's own data seed is
    /// fixed at construction, so one run is reproducible end to end).
    pub seed: u64,
    /// `Some(b)`: each step samples `b` example indices (with replacement)
    /// and uses the batch-mean loss/gradient; requires per-example access.
    /// `None`: full-batch evaluation.
    pub batch_size: Option<usize>,
}

impl RunConfig {
    pub fn full_batch(steps: u64, seed: u64) -> Self {
        RunConfig {
            steps,
            seed,
            batch_size: None,
        }
    }
}

/// What a finished (or sink-stopped) run reports.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// Steps actually applied (equals `steps` minus rejections when the
    /// sink never broke).
    pub steps_applied: u64,
    /// Steps rejected for non-finite gradients; state and parameters were
    /// left untouched by each of these.
    pub rejected_steps: u64,
    /// Loss at the last applied step (initial loss when nothing applied).
    pub final_loss: f64,
    /// Smallest raw-gradient RMS seen over applied steps.
    pub min_grad_rms: f64,
    pub final_theta: Vec<f64>,
    /// False when the sink stopped the run early via `ControlFlow::Break`.
    pub completed: bool,
}

/// Drive `objective` for `run_cfg.steps` steps of `cfg`'s variant, starting
/// from `group.theta` (updated in place).
///
/// `on_step` sees every applied step's report in order and may stop the run
/// with `ControlFlow::Break(())` (e.g. a harness divergence guard); the
/// outcome then has `completed = false`. A non-finite loss aborts the whole
/// run with [`Error::NonFiniteLoss`]. A non-finite gradient under a finite
/// loss rejects only that step and is tallied in `rejected_steps`.
pub fn run<F>(
    cfg: &OptimizerConfig,
    objective: &dyn Objective,
    group: &mut ParamGroup,
    run_cfg: &RunConfig,
    mut on_step: F,
) -> Result<RunOutcome>
where
    F: FnMut(&StepReport) -> ControlFlow<()>,
{
    if objective.dim() != group.dim() {
        return Err(Error::LengthMismatch {
            what: "run: objective vs parameter group",
            expected: objective.dim(),
            got: group.dim(),
        });
    }
    let mut opt = Optimizer::new(cfg.clone(), group)?;
    let mut rng = ChaCha8Rng::seed_from_u64(run_cfg.seed);

    let per_example = match run_cfg.batch_size {
        Some(b) => {
            let pe = objective
                .per_example()
                .ok_or_else(|| Error::PerExampleUnsupported {
                    objective: objective.name().to_string(),
                })?;
            if b == 0 {
                return Err(Error::InvalidConfig(
                    "batch_size must be at least 1".to_string(),
                ));
            }
            Some((pe, b))
        }
        None => None,
    };

    let mut outcome = RunOutcome {
        steps_applied: 0,
        rejected_steps: 0,
        final_loss: f64::NAN,
        min_grad_rms: f64::INFINITY,
        final_theta: Vec::new(),
        completed: true,
    };
    let mut indices = Vec::new();

    for attempt in 1..=run_cfg.steps {
        let eval = match per_example {
            Some((pe, b)) => {
                indices.clear();
                let n = pe.num_examples();
                indices.extend((0..b).map(|_| rng.random_range(0..n)));
                pe.batch_eval(&group.theta, &indices)?
            }
            None => objective.eval(&group.theta),
        };
        if !eval.loss.is_finite() {
            return Err(Error::NonFiniteLoss { step: attempt });
        }
        match opt.step(&mut group.theta, &eval.grad, Some(eval.loss)) {
            Ok(report) => {
                outcome.steps_applied += 1;
                outcome.final_loss = eval.loss;
                outcome.min_grad_rms = outcome.min_grad_rms.min(report.grad_rms);
                if let ControlFlow::Break(()) = on_step(&report) {
                    outcome.completed = false;
                    break;
                }
            }
            Err(Error::NonFiniteGradient { .. }) => {
                outcome.rejected_steps += 1;
            }
            Err(e) => return Err(e),
        }
    }

    if outcome.steps_applied == 0 {
        // nothing moved; report the starting point honestly
        let init = objective.eval(&group.theta);
        outcome.final_loss = init.loss;
    }
    outcome.final_theta = group.theta.clone();
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::Quadratic;

    #[test]
    fn full_batch_run_descends_the_quadratic() {
        let obj = Quadratic::new(4, 10.0).unwrap();
        let mut group = ParamGroup::vector("theta", vec![1.0, -0.5, 0.25, 0.75]).unwrap();
        let cfg = OptimizerConfig::fadam().with_lr(0.01);
        let initial_loss = obj.eval(&group.theta).loss;
        let mut reports = 0u64;
        let outcome = run(
            &cfg,
            &obj,
            &mut group,
            &RunConfig::full_batch(500, 7),
            |_| {
                reports += 1;
                ControlFlow::Continue(())
            },
        )
        .unwrap();
        assert!(outcome.completed);
        assert_eq!(outcome.steps_applied, 500);
        assert_eq!(reports, 500);
        assert_eq!(outcome.rejected_steps, 0);
        assert!(
            outcome.final_loss < initial_loss / 10.0,
            "500 steps must make real progress: {} -> {}",
            initial_loss,
            outcome.final_loss
        );
        assert!(outcome.min_grad_rms < outcome.final_loss.sqrt() * 10.0 + 1.0);
    }

    #[test]
    fn sink_break_stops_early() {
        let obj = Quadratic::new(2, 1.0).unwrap();
        let mut group = ParamGroup::vector("theta", vec![1.0, 1.0]).unwrap();
        let cfg = OptimizerConfig::fadam().with_lr(0.01);
        let outcome = run(
            &cfg,
            &obj,
            &mut group,
            &RunConfig::full_batch(100, 0),
            |r| {
                if r.step >= 10 {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            },
        )
        .unwrap();
        assert!(!outcome.completed);
        assert_eq!(outcome.steps_applied, 10);
    }

    #[test]
    fn minibatch_needs_per_example_access() {
        let obj = Quadratic::new(2, 1.0).unwrap();
        let mut group = ParamGroup::vector("theta", vec![1.0, 1.0]).unwrap();
        let cfg = OptimizerConfig::fadam().with_lr(0.01);
        let err = run(
            &cfg,
            &obj,
            &mut group,
            &RunConfig {
                steps: 10,
                seed: 0,
                batch_size: Some(4),
            },
            |_| ControlFlow::Continue(()),
        )
        .unwrap_err();
        assert!(matches!(err, Error::PerExampleUnsupported { .. }));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let obj = Quadratic::new(3, 5.0).unwrap();
        let cfg = OptimizerConfig::fadam().with_lr(0.02);
        let run_once = || {
            let mut group = ParamGroup::vector("theta", vec![0.4, -0.2, 0.9]).unwrap();
            let mut rms_trace = Vec::new();
            run(&cfg, &obj, &mut group, &RunConfig::full_batch(50, 42), |r| {
                rms_trace.push(r.update_rms.to_bits());
                ControlFlow::Continue(())
            })
            .unwrap();
            (group.theta, rms_trace)
        };
        let (theta_a, trace_a) = run_once();
        let (theta_b, trace_b) = run_once();
        assert_eq!(trace_a, trace_b, "same seed must replay bitwise");
        assert_eq!(
            theta_a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            theta_b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }
}
