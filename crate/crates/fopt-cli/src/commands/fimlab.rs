//! `fopt fimlab`: empirical Fisher diagnostics for a per-example objective
//! at the seeded initial point.
//!
//! Reports the Jensen gap between the per-example-square and
//! squared-batch-mean estimators, how that gap grows with batch size, the
//! EMA estimator fed by minibatch gradients, and (for small problems) dense
//! FIM diagnostics including a damped natural-gradient solve.

use clap::Args;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use fopt_core::fisher::{
    batch_size_sensitivity, dense_fisher, diag_dominance_ratio, jensen_gap,
    natural_gradient_dense, per_example_square, squared_batch_mean, sym_eigenvalues, EmaFisher,
    MAX_DENSE_DIM,
};
use fopt_core::numerics::rms;

use crate::commands::failure_from;
use crate::settings::{CommonArgs, Settings};
use crate::workload;
use crate::Failure;

#[derive(Args, Debug)]
pub struct FimlabArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Batch sizes for the estimator-gap comparison
    #[arg(long, value_delimiter = ',', default_value = "1,4,16,64")]
    pub batch_sizes: Vec<usize>,

    /// Resamples per batch size
    #[arg(long, default_value_t = 8)]
    pub repeats: usize,

    /// Minibatch observations fed to the EMA estimator
    #[arg(long, default_value_t = 20)]
    pub ema_steps: u64,

    /// Tikhonov damping for the dense natural-gradient solve
    #[arg(long, default_value_t = 1e-8)]
    pub damping: f64,
}

pub fn exec(args: &FimlabArgs) -> Result<(), Failure> {
    let settings = Settings::load(&args.common).map_err(Failure::Config)?;
    if args.batch_sizes.is_empty() || args.batch_sizes.contains(&0) {
        return Err(Failure::Config(
            "batch sizes must be nonempty and at least 1".to_string(),
        ));
    }
    if args.repeats == 0 {
        return Err(Failure::Config("repeats must be at least 1".to_string()));
    }

    let w = workload::build(&settings).map_err(|e| Failure::Config(e.to_string()))?;
    let objective = w.objective.as_ref();
    let pe = objective.per_example().ok_or_else(|| {
        Failure::Config(format!(
            "objective '{}' has no per-example gradients; use logreg, ce-toy, or l2-toy",
            settings.objective
        ))
    })?;
    let dim = objective.dim();
    let n = pe.num_examples();
    let theta = workload::initial_theta(&settings, dim);
    let everything: Vec<usize> = (0..n).collect();

    let pes = per_example_square(pe, &theta, &everything).map_err(failure_from)?;
    let sbm = squared_batch_mean(pe, &theta, &everything).map_err(failure_from)?;
    let jensen = jensen_gap(&pes, &sbm).map_err(failure_from)?;

    let sensitivity =
        batch_size_sensitivity(pe, &theta, &args.batch_sizes, args.repeats, settings.seed)
            .map_err(failure_from)?;

    // EMA estimator fed with noisy minibatch gradients at the fixed point.
    // Stream 2 keeps these draws independent of the init (stream 1) and of
    // any run-loop batch stream (stream 0) under the same seed.
    let ema_beta2 = settings.beta2.unwrap_or(0.999);
    let ema_batch = settings.batch().unwrap_or_else(|| n.min(8));
    let mut ema = EmaFisher::new(dim, ema_beta2).map_err(failure_from)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    rng.set_stream(2);
    for _ in 0..args.ema_steps {
        let batch: Vec<usize> = (0..ema_batch).map(|_| rng.random_range(0..n)).collect();
        let grad = pe.batch_eval(&theta, &batch).map_err(failure_from)?.grad;
        ema.observe(&grad).map_err(failure_from)?;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ema_report = json!({
        "beta2": ema_beta2,
        "batch_size": ema_batch,
        "observations": ema.observations(),
        "mean_estimate": mean(ema.estimate()),
        "mean_per_example_square": mean(&pes),
    });

    let dense = if dim <= MAX_DENSE_DIM {
        let fim = dense_fisher(pe, &theta, &everything).map_err(failure_from)?;
        let eigs = sym_eigenvalues(&fim, dim).map_err(failure_from)?;
        let dominance = diag_dominance_ratio(&fim, dim).map_err(failure_from)?;
        let grad = objective.eval(&theta).grad;
        let ng = natural_gradient_dense(&fim, &grad, args.damping).map_err(failure_from)?;
        let residual: Vec<f64> = (0..dim)
            .map(|i| {
                let mut acc = args.damping * ng[i] - grad[i];
                for j in 0..dim {
                    acc += fim[i * dim + j] * ng[j];
                }
                acc
            })
            .collect();
        json!({
            "trace": eigs.iter().sum::<f64>(),
            "min_eigenvalue": eigs.first(),
            "max_eigenvalue": eigs.last(),
            "diag_dominance": dominance,
            "damping": args.damping,
            "grad_rms": rms(&grad).map_err(failure_from)?,
            "natural_grad_rms": rms(&ng).map_err(failure_from)?,
            "solve_residual_rms": rms(&residual).map_err(failure_from)?,
        })
    } else {
        serde_json::Value::Null
    };

    let report = json!({
        "objective": settings.objective,
        "dim": dim,
        "examples": n,
        "jensen": jensen,
        "batch_sensitivity": sensitivity,
        "ema": ema_report,
        "dense": dense,
    });
    let line = report.to_string();
    let out_dir = settings.resolve_out_dir();
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    std::fs::write(out_dir.join("fimlab.json"), format!("{line}\n"))
        .map_err(|e| Failure::Runtime(format!("cannot write fimlab.json: {e}")))?;
    println!("{line}");
    Ok(())
}
