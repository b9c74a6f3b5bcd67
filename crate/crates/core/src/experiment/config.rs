use std::str::FromStr;

use indexmap::IndexMap;
use serde::Deserialize;

use crate::problems::{Regularizer, SynthSpec};
use crate::solvers::{Algorithm, GradientChoice, SolverConfig};

use super::ExperimentError;

fn config_error(message: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(message.into())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: RawExperiment,
    problem: RawProblem,
    #[serde(default)]
    solver: IndexMap<String, RawSolver>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    name: Option<String>,
    seed: Option<u64>,
    grid: Vec<(f64, usize)>,
    x0: Option<Vec<f64>>,
    x0_normal: Option<bool>,
    x0_warm_level: Option<f64>,
    gaps: Option<bool>,
    timing: Option<bool>,
    guard: Option<f64>,
    checks: Option<Vec<String>>,
    check_solvers: Option<Vec<String>>,
    fd_samples: Option<usize>,
    ratio_trials: Option<usize>,
    g2: Option<f64>,
    inject_power: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    kind: String,
    latent_dim: Option<usize>,
    lambda: Option<f64>,
    reveal_per_step: Option<usize>,
    initial_revealed: Option<usize>,
    regularizer: Option<String>,
    min_user_ratings: Option<usize>,
    min_item_ratings: Option<usize>,
    warm_step: Option<f64>,
    warm_scale: Option<f64>,
    warm_max_iterations: Option<usize>,
    synth_users: Option<usize>,
    synth_items: Option<usize>,
    synth_ratings: Option<usize>,
    synth_latent_dim: Option<usize>,
    synth_noise_sd: Option<f64>,
    data_seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    algorithm: String,
    corrections: Option<usize>,
    beta: Option<f64>,
    prediction_steps: Option<usize>,
    alpha: Option<f64>,
    gamma: Option<f64>,
    zeta: Option<f64>,
    delta: Option<f64>,
    g: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Toy,
    LinregStatic,
    LinregDrift,
    RobustGm,
    RobustWelsch,
    MfFile,
    MfSynth,
}

impl ProblemKind {
    pub fn label(self) -> &'static str {
        match self {
            ProblemKind::Toy => "toy",
            ProblemKind::LinregStatic => "linreg_static",
            ProblemKind::LinregDrift => "linreg_drift",
            ProblemKind::RobustGm => "robust_gm",
            ProblemKind::RobustWelsch => "robust_welsch",
            ProblemKind::MfFile => "mf_file",
            ProblemKind::MfSynth => "mf_synth",
        }
    }

    pub fn is_mf(self) -> bool {
        matches!(self, ProblemKind::MfFile | ProblemKind::MfSynth)
    }
}

impl FromStr for ProblemKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "toy" => ProblemKind::Toy,
            "linreg_static" => ProblemKind::LinregStatic,
            "linreg_drift" => ProblemKind::LinregDrift,
            "robust_gm" => ProblemKind::RobustGm,
            "robust_welsch" => ProblemKind::RobustWelsch,
            "mf_file" => ProblemKind::MfFile,
            "mf_synth" => ProblemKind::MfSynth,
            other => return Err(config_error(format!("unknown problem kind `{other}`"))),
        })
    }
}

/// Matrix-factorization settings shared by `mf_file` and `mf_synth`.
#[derive(Clone, Debug, PartialEq)]
pub struct MfSettings {
    pub latent_dim: usize,
    pub lambda: f64,
    pub reveal_per_step: usize,
    pub initial_revealed: usize,
    pub regularizer: Regularizer,
    pub min_user_ratings: usize,
    pub min_item_ratings: usize,
    pub warm_step: f64,
    pub warm_scale: f64,
    pub warm_max_iterations: usize,
    /// Present for `mf_synth`.
    pub synth: Option<SynthSpec>,
    /// Seed of the synthetic data; defaults to the experiment seed.
    pub data_seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub mf: Option<MfSettings>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialPoint {
    Explicit(Vec<f64>),
    /// `x0 ~ N(0, I)` from the experiment seed.
    Normal,
    /// Gradient descent on the `t = 0` problem down to this gradient norm.
    WarmStart { level: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckKind {
    Gradients,
    LipschitzOptimum,
    PlEnvelope,
    PostConvergence,
    PredictionGap,
    RatioBound,
}

impl CheckKind {
    pub fn label(self) -> &'static str {
        match self {
            CheckKind::Gradients => "gradients",
            CheckKind::LipschitzOptimum => "lipschitz_optimum",
            CheckKind::PlEnvelope => "pl_envelope",
            CheckKind::PostConvergence => "post_convergence",
            CheckKind::PredictionGap => "prediction_gap",
            CheckKind::RatioBound => "ratio_bound",
        }
    }
}

impl FromStr for CheckKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "gradients" => CheckKind::Gradients,
            "lipschitz_optimum" => CheckKind::LipschitzOptimum,
            "pl_envelope" => CheckKind::PlEnvelope,
            "post_convergence" => CheckKind::PostConvergence,
            "prediction_gap" => CheckKind::PredictionGap,
            "ratio_bound" => CheckKind::RatioBound,
            other => return Err(config_error(format!("unknown check `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedSolver {
    pub name: String,
    pub config: SolverConfig,
}

/// A validated experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    /// `(h, steps)` pairs. `steps = 0` means "until every rating is
    /// revealed" and is only valid for matrix factorization.
    pub grid: Vec<(f64, usize)>,
    pub x0: InitialPoint,
    /// `None` computes gaps whenever the problem has an optimum oracle.
    pub gaps: Option<bool>,
    pub timing: bool,
    pub guard: Option<f64>,
    pub checks: Vec<CheckKind>,
    /// Solvers taking part in trace-based checks; `None` means all.
    pub check_solvers: Option<Vec<String>>,
    pub fd_samples: usize,
    pub ratio_trials: usize,
    pub g2: Option<f64>,
    /// Replaces solver runs in `sweep` by synthetic traces with
    /// `grad = gap = h^p`.
    pub inject_power: Option<f64>,
    pub problem: ProblemSpec,
    pub solvers: Vec<NamedSolver>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_error(e.message().to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, ExperimentError> {
        let e = raw.experiment;
        let problem = problem_spec(raw.problem)?;

        if e.grid.is_empty() {
            return Err(config_error("`grid` needs at least one [h, steps] pair"));
        }
        for &(h, steps) in &e.grid {
            if !(h.is_finite() && h > 0.0) {
                return Err(config_error(format!("`grid` has non-positive h = {h}")));
            }
            if steps == 0 && !problem.kind.is_mf() {
                return Err(config_error("`grid` steps = 0 is only allowed for matrix factorization"));
            }
        }

        let x0 = match (e.x0, e.x0_normal.unwrap_or(false), e.x0_warm_level) {
            (Some(v), false, None) => InitialPoint::Explicit(v),
            (None, true, None) => InitialPoint::Normal,
            (None, false, Some(level)) if level > 0.0 => InitialPoint::WarmStart { level },
            (None, false, Some(level)) => {
                return Err(config_error(format!("`x0_warm_level` must be positive, got {level}")))
            }
            (None, false, None) => {
                return Err(config_error("one of `x0`, `x0_normal` or `x0_warm_level` is required"))
            }
            _ => return Err(config_error("`x0`, `x0_normal` and `x0_warm_level` are mutually exclusive")),
        };
        if matches!(x0, InitialPoint::WarmStart { .. }) && !problem.kind.is_mf() {
            return Err(config_error("`x0_warm_level` is only valid for matrix factorization"));
        }

        let checks = e
            .checks
            .unwrap_or_default()
            .iter()
            .map(|c| c.parse())
            .collect::<Result<Vec<CheckKind>, _>>()?;

        let mut solvers = Vec::with_capacity(raw.solver.len());
        for (name, s) in raw.solver {
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(config_error(format!(
                    "solver name `{name}` may only use ASCII letters, digits, `_` and `-`"
                )));
            }
            let config = solver_config(&name, s)?;
            solvers.push(NamedSolver { name, config });
        }
        if let Some(names) = &e.check_solvers {
            if let Some(missing) = names.iter().find(|n| !solvers.iter().any(|s| &s.name == *n)) {
                return Err(config_error(format!("`check_solvers` names unknown solver `{missing}`")));
            }
        }
        if solvers.is_empty() && e.inject_power.is_none() {
            return Err(config_error("at least one [solver.NAME] section is required"));
        }

        Ok(Self {
            name: e.name.unwrap_or_else(|| "experiment".to_string()),
            seed: e.seed.unwrap_or(0),
            grid: e.grid,
            x0,
            gaps: e.gaps,
            timing: e.timing.unwrap_or(false),
            guard: e.guard,
            checks,
            check_solvers: e.check_solvers,
            fd_samples: e.fd_samples.unwrap_or(20),
            ratio_trials: e.ratio_trials.unwrap_or(200),
            g2: e.g2,
            inject_power: e.inject_power,
            problem,
            solvers,
        })
    }
}

fn reject_keys(context: &str, keys: &[(&str, bool)]) -> Result<(), ExperimentError> {
    match keys.iter().find(|(_, set)| *set) {
        Some((key, _)) => Err(config_error(format!("key `{key}` does not apply to {context}"))),
        None => Ok(()),
    }
}

fn problem_spec(p: RawProblem) -> Result<ProblemSpec, ExperimentError> {
    let kind: ProblemKind = p.kind.parse()?;
    let synth_keys = [
        ("synth_users", p.synth_users.is_some()),
        ("synth_items", p.synth_items.is_some()),
        ("synth_ratings", p.synth_ratings.is_some()),
        ("synth_latent_dim", p.synth_latent_dim.is_some()),
        ("synth_noise_sd", p.synth_noise_sd.is_some()),
        ("data_seed", p.data_seed.is_some()),
    ];
    if !kind.is_mf() {
        let mf_keys = [
            ("latent_dim", p.latent_dim.is_some()),
            ("lambda", p.lambda.is_some()),
            ("reveal_per_step", p.reveal_per_step.is_some()),
            ("initial_revealed", p.initial_revealed.is_some()),
            ("regularizer", p.regularizer.is_some()),
            ("min_user_ratings", p.min_user_ratings.is_some()),
            ("min_item_ratings", p.min_item_ratings.is_some()),
            ("warm_step", p.warm_step.is_some()),
            ("warm_scale", p.warm_scale.is_some()),
            ("warm_max_iterations", p.warm_max_iterations.is_some()),
        ];
        let context = format!("problem kind `{}`", kind.label());
        reject_keys(&context, &mf_keys)?;
        reject_keys(&context, &synth_keys)?;
        return Ok(ProblemSpec { kind, mf: None });
    }
    if kind == ProblemKind::MfFile {
        reject_keys("problem kind `mf_file`", &synth_keys)?;
    }
    let regularizer = match p.regularizer.as_deref() {
        None | Some("per_rating") => Regularizer::PerRating,
        Some("global") => Regularizer::Global,
        Some(other) => {
            return Err(config_error(format!(
                "unknown regularizer `{other}`, expected `per_rating` or `global`"
            )))
        }
    };
    let synth = (kind == ProblemKind::MfSynth).then(|| SynthSpec {
        n_users: p.synth_users.unwrap_or(80),
        n_items: p.synth_items.unwrap_or(70),
        n_ratings: p.synth_ratings.unwrap_or(40_000),
        latent_dim: p.synth_latent_dim.unwrap_or(5),
        noise_sd: p.synth_noise_sd.unwrap_or(0.3),
    });
    let mf = MfSettings {
        latent_dim: p.latent_dim.unwrap_or(20),
        lambda: p.lambda.unwrap_or(0.01),
        reveal_per_step: p.reveal_per_step.unwrap_or(5),
        initial_revealed: p.initial_revealed.unwrap_or(100_000),
        regularizer,
        min_user_ratings: p.min_user_ratings.unwrap_or(0),
        min_item_ratings: p.min_item_ratings.unwrap_or(0),
        warm_step: p.warm_step.unwrap_or(10.0),
        warm_scale: p.warm_scale.unwrap_or(1.0),
        warm_max_iterations: p.warm_max_iterations.unwrap_or(1_000_000),
        synth,
        data_seed: p.data_seed,
    };
    if !(mf.warm_step > 0.0 && mf.warm_scale >= 0.0) {
        return Err(config_error("`warm_step` must be positive and `warm_scale` non-negative"));
    }
    Ok(ProblemSpec { kind, mf: Some(mf) })
}

fn solver_config(name: &str, s: RawSolver) -> Result<SolverConfig, ExperimentError> {
    let algorithm: Algorithm = s
        .algorithm
        .parse()
        .map_err(|e| config_error(format!("solver `{name}`: {e}")))?;
    let context = format!("solver `{name}` ({algorithm})");
    let ufopc_keys = [
        ("prediction_steps", s.prediction_steps.is_some()),
        ("alpha", s.alpha.is_some()),
        ("gamma", s.gamma.is_some()),
    ];
    let radius_keys = [
        ("zeta", s.zeta.is_some()),
        ("delta", s.delta.is_some()),
        ("g", s.g.is_some()),
    ];
    match algorithm {
        Algorithm::Tvgd => {
            reject_keys(&context, &ufopc_keys)?;
            reject_keys(&context, &radius_keys)?;
        }
        Algorithm::Ufopc => reject_keys(&context, &radius_keys)?,
        Algorithm::FoaMin | Algorithm::CauchyPoint => reject_keys(&context, &ufopc_keys)?,
    }
    let mut config = SolverConfig::new(algorithm);
    if let Some(v) = s.corrections {
        config.corrections = v;
    }
    if let Some(v) = s.beta {
        config.beta = v;
    }
    if let Some(v) = s.prediction_steps {
        config.prediction_steps = v;
    }
    if let Some(v) = s.alpha {
        config.alpha = v;
    }
    if let Some(v) = s.gamma {
        config.gamma = v;
    }
    if let Some(v) = s.zeta {
        config.zeta = v;
    }
    if let Some(v) = s.delta {
        config.delta = v;
    }
    if let Some(g) = &s.g {
        config.g_choice = g
            .parse::<GradientChoice>()
            .map_err(|e| config_error(format!("solver `{name}`: {e}")))?;
    }
    config
        .validate()
        .map_err(|e| config_error(format!("solver `{name}`: {e}")))?;
    Ok(config)
}
