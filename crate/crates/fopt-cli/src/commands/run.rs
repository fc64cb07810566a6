//! `fopt run`: one optimizer, one objective, one trace.

use clap::Args;
use serde_json::json;

use fopt_core::objectives::write_columns;

use crate::commands::drive;
use crate::settings::{CommonArgs, Settings};
use crate::workload;
use crate::Failure;

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Also write the objective's synthetic dataset to dataset.txt
    #[arg(long)]
    pub dump_dataset: bool,
}

pub fn exec(args: &RunArgs) -> Result<(), Failure> {
    let settings = Settings::load(&args.common).map_err(Failure::Config)?;
    let out_dir = settings.resolve_out_dir();
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;

    let w = workload::build(&settings).map_err(|e| Failure::Config(e.to_string()))?;
    if args.dump_dataset {
        let (names, cols) = w.dataset.as_ref().ok_or_else(|| {
            Failure::Config(format!(
                "objective '{}' has no dataset to dump",
                settings.objective
            ))
        })?;
        let path = out_dir.join("dataset.txt");
        let mut file = std::fs::File::create(&path)
            .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", path.display())))?;
        let views: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let labels: Vec<&str> = names.iter().map(String::as_str).collect();
        write_columns(&mut file, &labels, &views)
            .map_err(|e| Failure::Runtime(format!("cannot write dataset: {e}")))?;
    }

    let d = drive(&settings, &w, &out_dir.join("trace.csv"), &[])?;

    let summary = json!({
        "final_loss": d.outcome.final_loss,
        "min_grad_rms": d.outcome.min_grad_rms,
        "steps": d.outcome.steps_applied,
        "rejected_steps": d.outcome.rejected_steps,
    });
    let line = summary.to_string();
    std::fs::write(out_dir.join("summary.json"), format!("{line}\n"))
        .map_err(|e| Failure::Runtime(format!("cannot write summary: {e}")))?;
    println!("{line}");
    Ok(())
}
