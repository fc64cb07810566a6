//! `fopt converge`: runs to the last checkpoint, records the running
//! minimum gradient RMS at each one, and fits the decay-rate constant.
//!
//! The fit models `min_rms^2 ~ c * dim * ln(N) / sqrt(N)` and recovers `c`
//! by least squares through the origin. An optional `--target` turns the
//! command into a pass/fail check: exit 1 when the best gradient RMS never
//! reaches the target.

use clap::Args;
use serde_json::json;

use crate::commands::drive;
use crate::settings::{CommonArgs, Settings};
use crate::workload;
use crate::Failure;

#[derive(Args, Debug)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Strictly ascending step counts to record at; the run length is the
    /// last one (--steps is ignored)
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
    pub checkpoints: Vec<u64>,

    /// Gradient RMS the run must reach; missing it exits with code 1
    #[arg(long)]
    pub target: Option<f64>,
}

pub fn exec(args: &ConvergeArgs) -> Result<(), Failure> {
    if args.checkpoints.is_empty() {
        return Err(Failure::Config("needs at least one checkpoint".to_string()));
    }
    if args.checkpoints[0] == 0 {
        return Err(Failure::Config("checkpoints start at step 1".to_string()));
    }
    if !args.checkpoints.windows(2).all(|w| w[0] < w[1]) {
        return Err(Failure::Config(format!(
            "checkpoints must be strictly ascending, got {:?}",
            args.checkpoints
        )));
    }

    let mut settings = Settings::load(&args.common).map_err(Failure::Config)?;
    settings.steps = *args.checkpoints.last().expect("nonempty");
    let out_dir = settings.resolve_out_dir();
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;

    let w = workload::build(&settings).map_err(|e| Failure::Config(e.to_string()))?;
    let d = drive(&settings, &w, &out_dir.join("trace.csv"), &args.checkpoints)?;

    let monotone = d
        .checkpoint_mins
        .windows(2)
        .all(|w| w[1].1 <= w[0].1);
    let fit_c = fit_decay_constant(&d.checkpoint_mins, d.dim);
    let target_met = args.target.map(|t| d.outcome.min_grad_rms <= t);

    let report = json!({
        "checkpoints": d.checkpoint_mins.iter().map(|&(step, min_rms)| json!({
            "step": step,
            "min_grad_rms": min_rms,
        })).collect::<Vec<_>>(),
        "dim": d.dim,
        "fit_c": fit_c,
        "monotone": monotone,
        "final_loss": d.outcome.final_loss,
        "target": args.target,
        "target_met": target_met,
    });
    let line = report.to_string();
    std::fs::write(out_dir.join("converge.json"), format!("{line}\n"))
        .map_err(|e| Failure::Runtime(format!("cannot write converge.json: {e}")))?;
    println!("{line}");

    if target_met == Some(false) {
        return Err(Failure::CheckFailed(format!(
            "convergence target missed: best gradient rms {:e} > target {:e}",
            d.outcome.min_grad_rms,
            args.target.expect("target present"),
        )));
    }
    Ok(())
}

/// Least squares through the origin for `y = c * x` with
/// `x = dim * ln(N) / sqrt(N)` and `y = min_rms^2`. Returns `None` when the
/// system is degenerate (no checkpoints reached, or only `N = 1` where
/// `ln(N) = 0`).
fn fit_decay_constant(checkpoint_mins: &[(u64, f64)], dim: usize) -> Option<f64> {
    let mut xy = 0.0;
    let mut xx = 0.0;
    for &(step, min_rms) in checkpoint_mins {
        let n = step as f64;
        let x = dim as f64 * n.ln() / n.sqrt();
        let y = min_rms * min_rms;
        xy += x * y;
        xx += x * x;
    }
    if xx > 0.0 {
        Some(xy / xx)
    } else {
        None
    }
}
