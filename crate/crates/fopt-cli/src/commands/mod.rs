//! The four subcommands. They share one driver, [`drive`], which executes a
//! configured run while streaming the CSV trace and watching for divergence.

pub mod converge;
pub mod fimlab;
pub mod run;
pub mod sweep;

use std::collections::VecDeque;
use std::ops::ControlFlow;
use std::path::Path;
use std::time::Instant;

use fopt_core::{run as run_loop, Error, RunConfig, RunOutcome};

use crate::settings::Settings;
use crate::trace::TraceWriter;
use crate::workload::{self, Workload};
use crate::Failure;

/// A run whose raw-gradient RMS crosses this is declared divergent and
/// aborted (exit code 3).
pub const DIVERGENCE_GRAD_RMS: f64 = 1e12;

/// Fraction of the requested steps whose trailing losses feed the sweep
/// metric.
pub const METRIC_TAIL_FRACTION: f64 = 0.05;

#[derive(Debug)]
pub struct Drive {
    pub outcome: RunOutcome,
    pub dim: usize,
    /// Mean loss over the trailing window of applied steps (the initial
    /// loss when nothing was applied).
    pub tail_mean_loss: f64,
    /// `(checkpoint step, smallest grad RMS seen so far)` for every
    /// requested checkpoint the run reached.
    pub checkpoint_mins: Vec<(u64, f64)>,
}

#[derive(Debug)]
pub enum DriveError {
    /// The run blew up: non-finite loss, or gradient RMS past the ceiling.
    Diverged { step: u64, detail: String },
    /// Anything that is not a divergence (bad config, I/O, ...).
    Fatal(Failure),
}

impl DriveError {
    fn fatal(e: Error) -> Self {
        DriveError::Fatal(failure_from(e))
    }
}

/// Classifies a core error for the exit code: problems with the requested
/// setup are config errors (2), problems that appear mid-run are runtime
/// aborts (3).
pub fn failure_from(e: Error) -> Failure {
    match e {
        Error::NonFiniteLoss { .. }
        | Error::NonFiniteGradient { .. }
        | Error::NonFiniteValue { .. }
        | Error::NonFiniteProbe { .. }
        | Error::DegenerateFim
        | Error::DegenerateInterpolation
        | Error::ZeroNormInput { .. }
        | Error::SingularMatrix { .. }
        | Error::Io(_) => Failure::Runtime(e.to_string()),
        _ => Failure::Config(e.to_string()),
    }
}

/// Runs `settings` on a freshly built workload, writing the trace as it
/// goes. `checkpoints` must be strictly ascending (the callers validate).
pub fn drive(
    settings: &Settings,
    workload: &Workload,
    trace_path: &Path,
    checkpoints: &[u64],
) -> Result<Drive, DriveError> {
    let objective = workload.objective.as_ref();
    let dim = objective.dim();
    let cfg = settings
        .optimizer_config()
        .map_err(DriveError::fatal)?;
    let theta0 = workload::initial_theta(settings, dim);
    let mut group = workload::param_group(objective, theta0).map_err(DriveError::fatal)?;
    let run_cfg = RunConfig {
        steps: settings.steps,
        seed: settings.seed,
        batch_size: settings.batch(),
    };

    let mut tracer = TraceWriter::create(trace_path)
        .map_err(|e| DriveError::Fatal(Failure::Runtime(format!("cannot write trace: {e}"))))?;
    let started = Instant::now();

    let window = ((settings.steps as f64 * METRIC_TAIL_FRACTION).ceil() as usize).max(1);
    let mut tail: VecDeque<f64> = VecDeque::with_capacity(window);
    let mut min_grad_rms = f64::INFINITY;
    let mut checkpoint_mins = Vec::with_capacity(checkpoints.len());
    let mut next_checkpoint = 0usize;
    let mut diverged: Option<(u64, f64)> = None;
    let mut trace_err: Option<std::io::Error> = None;

    let outcome = run_loop(&cfg, objective, &mut group, &run_cfg, |report| {
        let loss = report.loss.unwrap_or(f64::NAN);
        if let Err(e) = tracer.row(
            report.step,
            loss,
            report.grad_rms,
            report.update_rms,
            report.eps_hat,
            started.elapsed().as_nanos(),
        ) {
            trace_err = Some(e);
            return ControlFlow::Break(());
        }
        if tail.len() == window {
            tail.pop_front();
        }
        tail.push_back(loss);
        min_grad_rms = min_grad_rms.min(report.grad_rms);
        if next_checkpoint < checkpoints.len() && report.step == checkpoints[next_checkpoint] {
            checkpoint_mins.push((report.step, min_grad_rms));
            next_checkpoint += 1;
        }
        if report.grad_rms > DIVERGENCE_GRAD_RMS {
            diverged = Some((report.step, report.grad_rms));
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    });

    let outcome = match outcome {
        Ok(o) => o,
        Err(Error::NonFiniteLoss { step }) => {
            // flush what we have; the trace up to the blow-up is the most
            // useful artifact of a diverged run
            let _ = tracer.finish();
            return Err(DriveError::Diverged {
                step,
                detail: "non-finite loss".to_string(),
            });
        }
        Err(e) => {
            let _ = tracer.finish();
            return Err(DriveError::fatal(e));
        }
    };

    tracer
        .finish()
        .map_err(|e| DriveError::Fatal(Failure::Runtime(format!("cannot write trace: {e}"))))?;
    if let Some(e) = trace_err {
        return Err(DriveError::Fatal(Failure::Runtime(format!(
            "cannot write trace: {e}"
        ))));
    }
    if let Some((step, rms)) = diverged {
        return Err(DriveError::Diverged {
            step,
            detail: format!("gradient rms {rms:e} exceeded {DIVERGENCE_GRAD_RMS:e}"),
        });
    }

    let tail_mean_loss = if tail.is_empty() {
        outcome.final_loss
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    };
    Ok(Drive {
        outcome,
        dim,
        tail_mean_loss,
        checkpoint_mins,
    })
}

impl From<DriveError> for Failure {
    fn from(e: DriveError) -> Failure {
        match e {
            DriveError::Diverged { step, detail } => {
                Failure::Runtime(format!("run diverged at step {step}: {detail}"))
            }
            DriveError::Fatal(f) => f,
        }
    }
}
