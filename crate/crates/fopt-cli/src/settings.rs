//! Layered run settings: built-in defaults, overridden by a flat
//! `key = value` settings file, overridden again by command-line flags.
//!
//! The file format is strict on purpose — unknown or duplicate keys are
//! errors, not warnings — so a typo in an experiment config fails loudly
//! instead of silently running the defaults.

use std::path::PathBuf;

use clap::Args;

use fopt_core::optimizers::LrSchedule;
use fopt_core::{EmaMode, Error, OptimizerConfig, Variant};

/// Flags shared by every subcommand. Each one is optional; unset flags
/// fall through to the settings file and then to the defaults.
#[derive(Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// Settings file of `key = value` lines (flags override file values)
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Update rule: fadam, fadafactor, adam, adafactor
    #[arg(long)]
    pub variant: Option<String>,

    /// Objective: quadratic, rosenbrock, logreg, ce-toy, l2-toy
    #[arg(long)]
    pub objective: Option<String>,

    /// Number of optimization steps
    #[arg(long)]
    pub steps: Option<u64>,

    /// Peak learning rate
    #[arg(long)]
    pub lr: Option<f64>,

    /// Linear warmup steps (0 = constant learning rate)
    #[arg(long)]
    pub warmup_steps: Option<u64>,

    /// Seed for parameter init and minibatch sampling
    #[arg(long)]
    pub seed: Option<u64>,

    /// Minibatch size (0 = full batch)
    #[arg(long)]
    pub batch_size: Option<usize>,

    /// Momentum decay
    #[arg(long)]
    pub beta1: Option<f64>,

    /// Second-moment decay
    #[arg(long)]
    pub beta2: Option<f64>,

    /// Denominator epsilon
    #[arg(long)]
    pub eps: Option<f64>,

    /// Adaptive-epsilon gradient-scale factor (FAdam family)
    #[arg(long)]
    pub eps2: Option<f64>,

    /// RMS clip ceiling
    #[arg(long)]
    pub clip_c: Option<f64>,

    /// Decoupled weight-decay strength
    #[arg(long)]
    pub weight_decay_lambda: Option<f64>,

    /// Fisher exponent rho in (0, 1]
    #[arg(long)]
    pub fim_exponent_rho: Option<f64>,

    /// Momentum averaging: linear or xlerp
    #[arg(long)]
    pub ema_mode: Option<String>,

    /// Parameter dimension (quadratic, rosenbrock)
    #[arg(long)]
    pub dim: Option<usize>,

    /// Quadratic condition number
    #[arg(long)]
    pub kappa: Option<f64>,

    /// Feature count (logreg)
    #[arg(long)]
    pub features: Option<usize>,

    /// Class count (logreg)
    #[arg(long)]
    pub classes: Option<usize>,

    /// Dataset size (logreg, ce-toy, l2-toy)
    #[arg(long)]
    pub samples: Option<usize>,

    /// Histogram bins (ce-toy)
    #[arg(long)]
    pub bins: Option<usize>,

    /// Seed for dataset synthesis (separate from the run seed)
    #[arg(long)]
    pub data_seed: Option<u64>,

    /// Std-dev of the Gaussian parameter init
    #[arg(long)]
    pub init_scale: Option<f64>,

    /// Output directory (default: $FOPT_OUT_DIR, else the working dir)
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

/// Fully resolved settings for one run.
#[derive(Clone, Debug)]
pub struct Settings {
    pub variant: Variant,
    pub objective: String,
    pub steps: u64,
    pub lr: f64,
    pub warmup_steps: u64,
    pub seed: u64,
    /// 0 means full batch.
    pub batch_size: usize,
    // optimizer hyperparameter overrides; None keeps the variant default
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
    pub eps2: Option<f64>,
    pub clip_c: Option<f64>,
    pub weight_decay_lambda: Option<f64>,
    pub fim_exponent_rho: Option<f64>,
    pub ema_mode: Option<EmaMode>,
    // objective shape
    pub dim: usize,
    pub kappa: f64,
    pub features: usize,
    pub classes: usize,
    pub samples: usize,
    pub bins: usize,
    pub data_seed: u64,
    pub init_scale: f64,
    pub out_dir: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            variant: Variant::FAdam,
            objective: "quadratic".to_string(),
            steps: 1000,
            lr: 1e-3,
            warmup_steps: 0,
            seed: 0,
            batch_size: 0,
            beta1: None,
            beta2: None,
            eps: None,
            eps2: None,
            clip_c: None,
            weight_decay_lambda: None,
            fim_exponent_rho: None,
            ema_mode: None,
            dim: 10,
            kappa: 100.0,
            features: 4,
            classes: 3,
            samples: 256,
            bins: 8,
            data_seed: 1,
            init_scale: 0.1,
            out_dir: None,
        }
    }
}

impl Settings {
    /// Defaults, then the settings file (if any), then the flags.
    pub fn load(args: &CommonArgs) -> Result<Settings, String> {
        let mut s = Settings::default();
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            s.apply_file(&text)?;
        }
        s.apply_flags(args)?;
        Ok(s)
    }

    fn apply_file(&mut self, text: &str) -> Result<(), String> {
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key = value", i + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(format!("config line {}: duplicate key '{key}'", i + 1));
            }
            seen.push(key.to_string());
            self.apply_kv(key, value)
                .map_err(|e| format!("config line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("bad value '{value}' for key '{key}'"))
        }
        match key {
            "variant" => {
                self.variant = value
                    .parse::<Variant>()
                    .map_err(|e| e.to_string())?;
            }
            "objective" => self.objective = value.to_string(),
            "steps" => self.steps = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "warmup_steps" => self.warmup_steps = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "beta1" => self.beta1 = Some(parse(key, value)?),
            "beta2" => self.beta2 = Some(parse(key, value)?),
            "eps" => self.eps = Some(parse(key, value)?),
            "eps2" => self.eps2 = Some(parse(key, value)?),
            "clip_c" => self.clip_c = Some(parse(key, value)?),
            "weight_decay_lambda" => self.weight_decay_lambda = Some(parse(key, value)?),
            "fim_exponent_rho" => self.fim_exponent_rho = Some(parse(key, value)?),
            "ema_mode" => {
                self.ema_mode = Some(value.parse::<EmaMode>().map_err(|e| e.to_string())?);
            }
            "dim" => self.dim = parse(key, value)?,
            "kappa" => self.kappa = parse(key, value)?,
            "features" => self.features = parse(key, value)?,
            "classes" => self.classes = parse(key, value)?,
            "samples" => self.samples = parse(key, value)?,
            "bins" => self.bins = parse(key, value)?,
            "data_seed" => self.data_seed = parse(key, value)?,
            "init_scale" => self.init_scale = parse(key, value)?,
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    fn apply_flags(&mut self, args: &CommonArgs) -> Result<(), String> {
        if let Some(v) = &args.variant {
            self.variant = v.parse::<Variant>().map_err(|e| e.to_string())?;
        }
        if let Some(o) = &args.objective {
            self.objective = o.clone();
        }
        if let Some(m) = &args.ema_mode {
            self.ema_mode = Some(m.parse::<EmaMode>().map_err(|e| e.to_string())?);
        }
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = args.$field { self.$field = v; })*
            };
        }
        macro_rules! take_opt {
            ($($field:ident),*) => {
                $(if let Some(v) = args.$field { self.$field = Some(v); })*
            };
        }
        take!(steps, lr, warmup_steps, seed, batch_size, dim, kappa, features, classes, samples, bins, data_seed, init_scale);
        take_opt!(beta1, beta2, eps, eps2, clip_c, weight_decay_lambda, fim_exponent_rho);
        if let Some(dir) = &args.out_dir {
            self.out_dir = Some(dir.clone());
        }
        Ok(())
    }

    /// Output directory: explicit setting, else `$FOPT_OUT_DIR`, else `.`.
    pub fn resolve_out_dir(&self) -> PathBuf {
        if let Some(dir) = &self.out_dir {
            return dir.clone();
        }
        if let Some(env_dir) = std::env::var_os("FOPT_OUT_DIR") {
            if !env_dir.is_empty() {
                return PathBuf::from(env_dir);
            }
        }
        PathBuf::from(".")
    }

    /// `None` for full-batch runs.
    pub fn batch(&self) -> Option<usize> {
        if self.batch_size == 0 {
            None
        } else {
            Some(self.batch_size)
        }
    }

    /// Builds and validates the optimizer configuration: variant defaults
    /// first, explicit overrides on top.
    pub fn optimizer_config(&self) -> Result<OptimizerConfig, Error> {
        let mut cfg = OptimizerConfig::for_variant(self.variant);
        if let Some(v) = self.beta1 {
            cfg.beta1 = v;
        }
        if let Some(v) = self.beta2 {
            cfg.beta2 = v;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.eps2 {
            cfg.eps2 = v;
        }
        if let Some(v) = self.clip_c {
            cfg.clip_c = v;
        }
        if let Some(v) = self.weight_decay_lambda {
            cfg.weight_decay_lambda = v;
        }
        if let Some(v) = self.fim_exponent_rho {
            cfg.fim_exponent_rho = v;
        }
        if let Some(mode) = self.ema_mode {
            cfg.ema_mode = mode;
        }
        cfg.lr_schedule = if self.warmup_steps > 0 {
            LrSchedule::linear_warmup(self.lr, self.warmup_steps)
        } else {
            LrSchedule::constant(self.lr)
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one sweep-axis value. The axis names are the hyperparameters
    /// worth sweeping; anything else is a config error.
    pub fn set_axis(&mut self, axis: &str, value: f64) -> Result<(), String> {
        match axis {
            "fim_exponent_rho" => self.fim_exponent_rho = Some(value),
            "eps" => self.eps = Some(value),
            "eps2" => self.eps2 = Some(value),
            "weight_decay_lambda" => self.weight_decay_lambda = Some(value),
            "beta1" => self.beta1 = Some(value),
            "beta2" => self.beta2 = Some(value),
            other => {
                return Err(format!(
                    "unknown sweep axis '{other}' (expected fim_exponent_rho, eps, eps2, \
                     weight_decay_lambda, beta1, or beta2)"
                ))
            }
        }
        Ok(())
    }
}
