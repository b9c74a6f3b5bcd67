use std::path::Path;
use std::sync::Arc;

use crate::problem::{Problem, TimeGrid, Vector};
use crate::problems::{
    filter_min_counts, load_ratings, make_linreg, make_mf, make_robust, make_toy, synth_ratings, LinRegVariant,
    MfParams, RatingsDataset, RobustLoss,
};
use crate::rng::SeededRng;

use super::config::{ExperimentConfig, InitialPoint, MfSettings, ProblemKind};
use super::ExperimentError;

/// One grid entry made concrete: the problem, its time grid and `x0`.
#[derive(Clone)]
pub struct Instance {
    pub problem: Arc<dyn Problem>,
    pub grid: TimeGrid,
    pub x0: Vector,
}

/// A validated config with its data loaded, ready to build instances.
pub struct Setup {
    pub config: ExperimentConfig,
    dataset: Option<RatingsDataset>,
}

impl Setup {
    /// Loads the ratings for matrix-factorization configs. `mf_file` reads
    /// `ratings`; every other kind must not be given one.
    pub fn new(config: ExperimentConfig, ratings: Option<&Path>) -> Result<Self, ExperimentError> {
        let kind = config.problem.kind;
        if ratings.is_some() && kind != ProblemKind::MfFile {
            return Err(ExperimentError::Config(format!(
                "--ratings only applies to problem kind `mf_file`, not `{}`",
                kind.label()
            )));
        }
        let dataset = match &config.problem.mf {
            None => None,
            Some(mf) => {
                let raw = match (&mf.synth, ratings) {
                    (Some(spec), _) => synth_ratings(spec, mf.data_seed.unwrap_or(config.seed))?,
                    (None, Some(path)) => load_ratings(path)?,
                    (None, None) => {
                        return Err(ExperimentError::Config(
                            "problem kind `mf_file` needs --ratings <path>".into(),
                        ))
                    }
                };
                Some(if mf.min_user_ratings > 0 || mf.min_item_ratings > 0 {
                    filter_min_counts(&raw, mf.min_user_ratings, mf.min_item_ratings)?
                } else {
                    raw
                })
            }
        };
        Ok(Self { config, dataset })
    }

    pub fn dataset(&self) -> Option<&RatingsDataset> {
        self.dataset.as_ref()
    }

    /// Builds every grid entry in order.
    pub fn instances(&self) -> Result<Vec<Instance>, ExperimentError> {
        self.config.grid.iter().map(|&(h, steps)| self.instance(h, steps)).collect()
    }

    pub fn instance(&self, h: f64, steps: usize) -> Result<Instance, ExperimentError> {
        let config = &self.config;
        let (problem, steps, x0): (Arc<dyn Problem>, usize, Vector) = match config.problem.kind {
            ProblemKind::MfFile | ProblemKind::MfSynth => self.mf_instance(h, steps)?,
            kind => {
                let problem: Arc<dyn Problem> = match kind {
                    ProblemKind::Toy => Arc::new(make_toy()),
                    ProblemKind::LinregStatic => Arc::new(make_linreg(LinRegVariant::StaticA)),
                    ProblemKind::LinregDrift => Arc::new(make_linreg(LinRegVariant::DriftingA)),
                    ProblemKind::RobustGm => Arc::new(make_robust(RobustLoss::GemanMcClure)),
                    ProblemKind::RobustWelsch => Arc::new(make_robust(RobustLoss::Welsch)),
                    ProblemKind::MfFile | ProblemKind::MfSynth => unreachable!(),
                };
                let x0 = match &config.x0 {
                    InitialPoint::Explicit(v) => Vector::from_vec(v.clone()),
                    InitialPoint::Normal => SeededRng::new(config.seed).normal_vector(problem.dim()),
                    InitialPoint::WarmStart { .. } => {
                        return Err(ExperimentError::Config(
                            "`x0_warm_level` is only valid for matrix factorization".into(),
                        ))
                    }
                };
                (problem, steps, x0)
            }
        };
        if x0.len() != problem.dim() {
            return Err(ExperimentError::Config(format!(
                "`x0` has {} entries, problem `{}` has dimension {}",
                x0.len(),
                problem.name(),
                problem.dim()
            )));
        }
        Ok(Instance {
            problem,
            grid: TimeGrid::new(h, steps)?,
            x0,
        })
    }

    fn mf_instance(&self, h: f64, steps: usize) -> Result<(Arc<dyn Problem>, usize, Vector), ExperimentError> {
        let config = &self.config;
        let settings: &MfSettings = config.problem.mf.as_ref().expect("mf kinds carry settings");
        let dataset = self.dataset.as_ref().expect("mf kinds load a dataset");
        let mf = make_mf(
            dataset,
            MfParams {
                latent_dim: settings.latent_dim,
                lambda: settings.lambda,
                reveal_per_step: settings.reveal_per_step,
                initial_revealed: settings.initial_revealed,
                h,
                regularizer: settings.regularizer,
            },
        )?;
        let steps = if steps == 0 { mf.steps_to_exhaust() } else { steps };
        if steps == 0 {
            return Err(ExperimentError::Config(
                "every rating is revealed at t = 0, so `steps = 0` leaves nothing to run".into(),
            ));
        }
        let x0 = match &config.x0 {
            InitialPoint::Explicit(v) => Vector::from_vec(v.clone()),
            InitialPoint::Normal => SeededRng::new(config.seed).normal_vector(mf.dim()),
            InitialPoint::WarmStart { level } => {
                mf.warm_start(
                    *level,
                    settings.warm_step,
                    settings.warm_scale,
                    config.seed,
                    settings.warm_max_iterations,
                )?
                .x
            }
        };
        Ok((Arc::new(mf), steps, x0))
    }
}
