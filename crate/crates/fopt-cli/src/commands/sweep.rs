//! `fopt sweep`: one hyperparameter axis, many values, one comparison
//! table. Points execute in parallel; every point writes its own trace
//! under `point_NNN/`.

use clap::Args;
use rayon::prelude::*;
use serde_json::json;

use crate::commands::{drive, DriveError, METRIC_TAIL_FRACTION};
use crate::settings::{CommonArgs, Settings};
use crate::workload;
use crate::Failure;

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Hyperparameter to sweep: fim_exponent_rho, eps, eps2,
    /// weight_decay_lambda, beta1, or beta2
    #[arg(long)]
    pub axis: String,

    /// Comma-separated axis values
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<f64>,
}

struct Point {
    value: f64,
    /// Mean loss over the trailing window; `None` when the point diverged.
    metric: Option<f64>,
    diverged_at: Option<u64>,
    steps_applied: u64,
}

pub fn exec(args: &SweepArgs) -> Result<(), Failure> {
    let base = Settings::load(&args.common).map_err(Failure::Config)?;
    if args.values.is_empty() {
        return Err(Failure::Config(
            "sweep needs at least one --values entry".to_string(),
        ));
    }

    // validate every point before running any: a bad axis value is a
    // config error for the whole sweep, not a mid-flight surprise
    let mut points = Vec::with_capacity(args.values.len());
    for &value in &args.values {
        let mut s = base.clone();
        s.set_axis(&args.axis, value).map_err(Failure::Config)?;
        s.optimizer_config().map_err(|e| {
            Failure::Config(format!("{}={value} is invalid: {e}", args.axis))
        })?;
        points.push(s);
    }

    let out_dir = base.resolve_out_dir();
    let mut traces = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        let dir = out_dir.join(format!("point_{i:03}"));
        std::fs::create_dir_all(&dir)
            .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        traces.push(dir.join("trace.csv"));
    }

    let results: Vec<Result<Point, Failure>> = points
        .par_iter()
        .zip(&traces)
        .map(|(s, trace_path)| {
            let w = workload::build(s).map_err(|e| Failure::Config(e.to_string()))?;
            match drive(s, &w, trace_path, &[]) {
                Ok(d) => Ok(Point {
                    value: axis_value(s, &args.axis),
                    metric: Some(d.tail_mean_loss),
                    diverged_at: None,
                    steps_applied: d.outcome.steps_applied,
                }),
                Err(DriveError::Diverged { step, .. }) => Ok(Point {
                    value: axis_value(s, &args.axis),
                    metric: None,
                    diverged_at: Some(step),
                    steps_applied: step,
                }),
                Err(DriveError::Fatal(f)) => Err(f),
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push(r?);
    }

    let best = rows
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.metric.map(|m| (i, m)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);

    let tail_pct = METRIC_TAIL_FRACTION * 100.0;
    println!(
        "sweep axis={} objective={} variant={} steps={} (metric: mean loss over last {tail_pct}% of steps)",
        args.axis, base.objective, base.variant, base.steps
    );
    println!("{:>16}  {:>16}  status", "value", "metric");
    for (i, p) in rows.iter().enumerate() {
        let status = if Some(i) == best {
            "best".to_string()
        } else if let Some(step) = p.diverged_at {
            format!("diverged at step {step}")
        } else {
            String::new()
        };
        let line = match p.metric {
            Some(m) => format!("{:>16}  {:>16.8e}  {status}", p.value, m),
            None => format!("{:>16}  {:>16}  {status}", p.value, "-"),
        };
        println!("{}", line.trim_end());
    }

    let report = json!({
        "axis": args.axis,
        "objective": base.objective,
        "variant": base.variant.as_str(),
        "steps": base.steps,
        "best_index": best,
        "points": rows.iter().enumerate().map(|(i, p)| json!({
            "value": p.value,
            "metric": p.metric,
            "diverged_at_step": p.diverged_at,
            "steps_applied": p.steps_applied,
            "trace": format!("point_{i:03}/trace.csv"),
        })).collect::<Vec<_>>(),
    });
    std::fs::write(out_dir.join("sweep.json"), format!("{report}\n"))
        .map_err(|e| Failure::Runtime(format!("cannot write sweep.json: {e}")))?;

    if best.is_none() {
        return Err(Failure::Runtime(
            "every sweep point diverged; nothing to rank".to_string(),
        ));
    }
    Ok(())
}

/// Reads the swept value back out of the point's settings. Keeping the
/// table keyed on what was actually run (rather than the raw flag string)
/// makes the two impossible to desynchronize.
fn axis_value(s: &Settings, axis: &str) -> f64 {
    match axis {
        "fim_exponent_rho" => s.fim_exponent_rho,
        "eps" => s.eps,
        "eps2" => s.eps2,
        "weight_decay_lambda" => s.weight_decay_lambda,
        "beta1" => s.beta1,
        "beta2" => s.beta2,
        _ => None,
    }
    .expect("axis validated before points were built")
}
