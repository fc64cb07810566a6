//! Turns resolved [`Settings`] into a concrete objective and an initial
//! parameter group.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use fopt_core::objectives::{ce_vs_l2_toy, Quadratic, Rosenbrock, SoftmaxRegression};
use fopt_core::{Error, Objective, ParamGroup};

use crate::settings::Settings;

pub struct Workload {
    pub objective: Box<dyn Objective>,
    /// Synthetic dataset as named columns, when the objective has one.
    pub dataset: Option<(Vec<String>, Vec<Vec<f64>>)>,
}

pub fn build(settings: &Settings) -> Result<Workload, Error> {
    match settings.objective.as_str() {
        "quadratic" => Ok(Workload {
            objective: Box::new(Quadratic::new(settings.dim, settings.kappa)?),
            dataset: None,
        }),
        "rosenbrock" => Ok(Workload {
            objective: Box::new(Rosenbrock::new(settings.dim)?),
            dataset: None,
        }),
        "logreg" => {
            let obj = SoftmaxRegression::new(
                settings.features,
                settings.classes,
                settings.samples,
                settings.data_seed,
            )?;
            let dataset = obj.columns();
            Ok(Workload {
                objective: Box::new(obj),
                dataset: Some(dataset),
            })
        }
        "ce-toy" => {
            let (ce, _) = ce_vs_l2_toy(settings.bins, settings.samples, settings.data_seed)?;
            let dataset = ce.columns();
            Ok(Workload {
                objective: Box::new(ce),
                dataset: Some(dataset),
            })
        }
        "l2-toy" => {
            let (_, l2) = ce_vs_l2_toy(settings.bins, settings.samples, settings.data_seed)?;
            let dataset = l2.columns();
            Ok(Workload {
                objective: Box::new(l2),
                dataset: Some(dataset),
            })
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown objective '{other}' (expected quadratic, rosenbrock, logreg, ce-toy, or l2-toy)"
        ))),
    }
}

/// Gaussian init, `init_scale` standard deviation. Drawn from stream 1 of
/// the seeded generator so it never aliases the minibatch index stream
/// (stream 0) used by the run loop.
pub fn initial_theta(settings: &Settings, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    rng.set_stream(1);
    (0..dim)
        .map(|_| settings.init_scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Wraps the init in a parameter group, factored-shaped when the objective
/// is a matrix. Full-FIM variants ignore the shape, so this is safe for all
/// four update rules.
pub fn param_group(objective: &dyn Objective, theta: Vec<f64>) -> Result<ParamGroup, Error> {
    match objective.matrix_shape() {
        Some((rows, cols)) => ParamGroup::matrix("theta", theta, rows, cols),
        None => ParamGroup::vector("theta", theta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dispatches_every_objective_name() {
        let mut s = Settings::default();
        for name in ["quadratic", "rosenbrock", "logreg", "ce-toy", "l2-toy"] {
            s.objective = name.to_string();
            let w = build(&s).unwrap();
            assert_eq!(w.objective.name(), name);
            assert!(w.objective.dim() > 0);
        }
        s.objective = "mystery".to_string();
        let err = match build(&s) {
            Ok(_) => panic!("unknown objective must be rejected"),
            Err(e) => e,
        };
        assert!(err.to_string().contains("unknown objective 'mystery'"));
    }

    #[test]
    fn synthetic_objectives_expose_their_dataset() {
        let mut s = Settings {
            objective: "logreg".to_string(),
            ..Settings::default()
        };
        let w = build(&s).unwrap();
        let (names, cols) = w.dataset.expect("logreg carries a dataset");
        assert_eq!(names.len(), s.features + 1);
        assert_eq!(cols[0].len(), s.samples);

        s.objective = "quadratic".to_string();
        assert!(build(&s).unwrap().dataset.is_none());
    }

    #[test]
    fn init_is_seed_deterministic_and_scaled() {
        let s = Settings::default();
        let a = initial_theta(&s, 6);
        let b = initial_theta(&s, 6);
        assert_eq!(a, b);

        let mut scaled = s.clone();
        scaled.init_scale = 2.0;
        let c = initial_theta(&scaled, 6);
        for (ai, ci) in a.iter().zip(&c) {
            assert!((ci / ai - 20.0).abs() < 1e-12, "same draws, rescaled");
        }

        let mut reseeded = s.clone();
        reseeded.seed = 99;
        assert_ne!(a, initial_theta(&reseeded, 6));
    }

    #[test]
    fn logreg_parameters_form_a_matrix_group() {
        let s = Settings {
            objective: "logreg".to_string(),
            ..Settings::default()
        };
        let w = build(&s).unwrap();
        let theta = initial_theta(&s, w.objective.dim());
        let group = param_group(&*w.objective, theta).unwrap();
        assert_eq!(group.dim(), s.classes * s.features);
    }
}
