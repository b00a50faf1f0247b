//! Experiment configuration files.
//!
//! One TOML document per experiment, with an embedded version field so
//! fixtures stay readable under version control. Schema (version 1):
//!
//! ```toml
//! version = 1
//!
//! [model]
//! kind = "builtin"                 # "builtin" | "file"
//! # registry = "datasets.toml"     # file mode: registry document (path
//! #                                #   relative to this config file)
//! # theta_star = [1.0, -2.0, 1.0]  # file mode: reference parameter for
//! #                                #   error reporting
//!
//! [law]
//! ell = "inf"                      # "frozen" | "inf" | a number >= 1
//! upsilon = 8.0
//! mu0 = 1.0                        # or: prescribed_time = 8.0
//!
//! [weights]
//! k_t = 1.0
//! k_r = 1.0
//!
//! [automaton]
//! tau_d = 2.0
//! tau_a = 25.0
//! n0 = 2.0
//! t0 = 1.0
//!
//! [policy]
//! kind = "scripted"                # "scripted" | "random"
//! initial_mode = 1
//! steps = [[2.0, 3], [0.3, 2]]     # scripted: [dilated dwell, next mode]
//! # min_dwell = 0.5                # random
//! # max_dwell = 4.0
//! # weights = [[1, 0.4], [2, 0.3]]
//!
//! [run]
//! mode = "auto"                    # "auto" | "direct" | "dilated"
//! dt = 0.001
//! eps_stop = 0.01
//! # horizon = 8.0                  # required for ell = "frozen" or 1
//! seed = 0
//! theta0 = [0.0, 0.0, 0.0]
//! ```
//!
//! The built-in model is the benchmark experiment; `kind = "file"` runs
//! recorded-data-only learning over a registry document, which requires
//! `k_t = 0` (the real-time channel needs a regressor, and registry files
//! carry none) and an explicit `theta_star`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::dataset::DatasetRegistry;
use crate::estimator::{EstimatorConfig, RunMode, RunOptions};
use crate::example;
use crate::gain::{GainExponent, GainLaw};
use crate::signal::{example_model, RegressorModel, TrueSystem};
use crate::switching::{AutomatonParams, ScriptStep, SwitchingPolicy};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config invalid: {0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    version: u32,
    model: ModelSection,
    law: LawSection,
    weights: WeightsSection,
    automaton: AutomatonSection,
    policy: PolicySection,
    run: RunSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    kind: String,
    registry: Option<PathBuf>,
    theta_star: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum EllSpec {
    Number(f64),
    Name(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LawSection {
    ell: EllSpec,
    upsilon: f64,
    mu0: Option<f64>,
    prescribed_time: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsSection {
    k_t: f64,
    k_r: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AutomatonSection {
    tau_d: f64,
    tau_a: f64,
    n0: f64,
    t0: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicySection {
    kind: String,
    initial_mode: usize,
    steps: Option<Vec<(f64, usize)>>,
    min_dwell: Option<f64>,
    max_dwell: Option<f64>,
    weights: Option<Vec<(usize, f64)>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    #[serde(default = "default_mode")]
    mode: String,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_eps_stop")]
    eps_stop: f64,
    horizon: Option<f64>,
    #[serde(default)]
    seed: u64,
    theta0: Vec<f64>,
}

fn default_mode() -> String {
    "auto".into()
}

fn default_dt() -> f64 {
    1e-3
}

fn default_eps_stop() -> f64 {
    0.01
}

/// A fully assembled experiment, ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: EstimatorConfig,
    pub policy: SwitchingPolicy,
    pub options: RunOptions,
    pub seed: u64,
}

/// Parses and assembles an experiment config file. Paths inside the file are
/// resolved relative to the file's directory.
pub fn load_experiment(path: &Path) -> Result<Experiment, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    assemble(&text, base)
}

/// Assembles an experiment from config text, resolving file references
/// against `base`.
pub fn assemble(text: &str, base: &Path) -> Result<Experiment, ConfigError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    if file.version != FORMAT_VERSION {
        return Err(ConfigError::Invalid(format!(
            "unsupported config version {} (expected {FORMAT_VERSION})",
            file.version
        )));
    }

    let law = parse_law(&file.law)?;
    let mu0 = resolve_mu0(&file.law, &law)?;

    // model
    let (registry, system, regressor) = match file.model.kind.as_str() {
        "builtin" => {
            if file.model.registry.is_some() || file.model.theta_star.is_some() {
                return Err(ConfigError::Invalid(
                    "model.registry and model.theta_star only apply to kind = \"file\"".into(),
                ));
            }
            let (sys, reg) = example_model();
            (example::registry(), sys, reg)
        }
        "file" => {
            let rel = file.model.registry.as_ref().ok_or_else(|| {
                ConfigError::Invalid("model.kind = \"file\" requires model.registry".into())
            })?;
            let registry = DatasetRegistry::load(base.join(rel))
                .map_err(|e| ConfigError::Invalid(format!("registry: {e}")))?;
            let theta_star = file.model.theta_star.clone().ok_or_else(|| {
                ConfigError::Invalid(
                    "model.kind = \"file\" requires model.theta_star for error reporting".into(),
                )
            })?;
            if theta_star.len() != registry.dimension() {
                return Err(ConfigError::Invalid(format!(
                    "theta_star has {} entries, registry dimension is {}",
                    theta_star.len(),
                    registry.dimension()
                )));
            }
            if file.weights.k_t != 0.0 {
                return Err(ConfigError::Invalid(
                    "model.kind = \"file\" requires k_t = 0: the real-time channel needs a \
                     regressor model and registry files carry none"
                        .into(),
                ));
            }
            let n = registry.dimension();
            let system = TrueSystem::new(theta_star, 0.0, Arc::new(|_| 0.0))
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            // inert placeholder; never evaluated since k_t = 0
            let regressor = RegressorModel::new(n, 1.0, Arc::new(move |_| vec![0.0; n]))
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            (registry, system, regressor)
        }
        other => {
            return Err(ConfigError::Invalid(format!(
                "model.kind must be \"builtin\" or \"file\", got \"{other}\""
            )));
        }
    };

    let partition = registry.partition();
    if partition.sufficiently_rich.is_empty() {
        return Err(ConfigError::Invalid(
            "no sufficiently rich dataset: the estimator requires a nonempty SR mode set".into(),
        ));
    }
    let automaton = AutomatonParams::new(
        file.automaton.tau_d,
        file.automaton.tau_a,
        file.automaton.n0,
        file.automaton.t0,
        partition,
    )
    .map_err(|e| ConfigError::Invalid(e.to_string()))?;

    let policy = parse_policy(&file.policy)?;

    if file.run.theta0.len() != registry.dimension() {
        return Err(ConfigError::Invalid(format!(
            "theta0 has {} entries, registry dimension is {}",
            file.run.theta0.len(),
            registry.dimension()
        )));
    }
    let mode = match file.run.mode.as_str() {
        "auto" => None,
        "direct" => Some(RunMode::DirectTime),
        "dilated" => Some(RunMode::DilatedTime),
        other => {
            return Err(ConfigError::Invalid(format!(
                "run.mode must be \"auto\", \"direct\" or \"dilated\", got \"{other}\""
            )));
        }
    };
    if !law.has_finite_blow_up() && file.run.horizon.is_none() {
        return Err(ConfigError::Invalid(
            "run.horizon is required for laws without a blow-up time".into(),
        ));
    }

    let config = EstimatorConfig {
        k_t: file.weights.k_t,
        k_r: file.weights.k_r,
        law,
        mu0,
        automaton,
        registry,
        system,
        regressor,
        theta0: file.run.theta0.clone(),
    };
    config
        .validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;

    Ok(Experiment {
        config,
        policy,
        options: RunOptions {
            dt: file.run.dt,
            eps_stop: file.run.eps_stop,
            horizon: file.run.horizon,
            mode,
            j_max: None,
        },
        seed: file.run.seed,
    })
}

fn parse_law(section: &LawSection) -> Result<GainLaw, ConfigError> {
    let law = match &section.ell {
        EllSpec::Number(l) => GainLaw::new(*l, section.upsilon),
        EllSpec::Name(name) => match name.as_str() {
            "inf" | "infinity" => GainLaw::prescribed_time(section.upsilon),
            "frozen" => Ok(GainLaw::frozen()),
            other => {
                return Err(ConfigError::Invalid(format!(
                    "law.ell must be a number >= 1, \"inf\", or \"frozen\"; got \"{other}\""
                )));
            }
        },
    };
    law.map_err(|e| ConfigError::Invalid(e.to_string()))
}

/// `mu0` directly, or solved from a prescribed time `T` via
/// `T = blow_up_time(mu0)`.
fn resolve_mu0(section: &LawSection, law: &GainLaw) -> Result<f64, ConfigError> {
    match (section.mu0, section.prescribed_time) {
        (Some(_), Some(_)) => Err(ConfigError::Invalid(
            "law.mu0 and law.prescribed_time are mutually exclusive".into(),
        )),
        (Some(mu0), None) => Ok(mu0),
        (None, Some(t)) => {
            if !(t.is_finite() && t > 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "law.prescribed_time must be positive, got {t}"
                )));
            }
            let u = law.upsilon();
            let mu0 = match law.exponent() {
                GainExponent::Infinite => u / t,
                GainExponent::Finite(l) if l > 1.0 => (u / t).powf(l / (l - 1.0)),
                _ => {
                    return Err(ConfigError::Invalid(
                        "law.prescribed_time requires a blow-up law (ell > 1)".into(),
                    ));
                }
            };
            if !(mu0.is_finite() && mu0 >= 1.0) {
                return Err(ConfigError::Invalid(format!(
                    "prescribed time {t} needs mu0 = {mu0:.6}, which is below 1; \
                     shorten the time or raise upsilon"
                )));
            }
            Ok(mu0)
        }
        (None, None) => Ok(1.0),
    }
}

fn parse_policy(section: &PolicySection) -> Result<SwitchingPolicy, ConfigError> {
    match section.kind.as_str() {
        "scripted" => {
            if section.min_dwell.is_some()
                || section.max_dwell.is_some()
                || section.weights.is_some()
            {
                return Err(ConfigError::Invalid(
                    "scripted policies take only policy.steps".into(),
                ));
            }
            let steps = section
                .steps
                .clone()
                .unwrap_or_default()
                .into_iter()
                .map(|(dwell, mode)| ScriptStep::new(dwell, mode))
                .collect();
            Ok(SwitchingPolicy::Scripted {
                initial_mode: section.initial_mode,
                steps,
            })
        }
        "random" => {
            if section.steps.is_some() {
                return Err(ConfigError::Invalid(
                    "random policies take no policy.steps".into(),
                ));
            }
            let min_dwell = section
                .min_dwell
                .ok_or_else(|| ConfigError::Invalid("random policy requires min_dwell".into()))?;
            let max_dwell = section
                .max_dwell
                .ok_or_else(|| ConfigError::Invalid("random policy requires max_dwell".into()))?;
            let weights = section
                .weights
                .clone()
                .ok_or_else(|| ConfigError::Invalid("random policy requires weights".into()))?;
            Ok(SwitchingPolicy::SeededRandom {
                initial_mode: section.initial_mode,
                min_dwell,
                max_dwell,
                weights,
            })
        }
        other => Err(ConfigError::Invalid(format!(
            "policy.kind must be \"scripted\" or \"random\", got \"{other}\""
        ))),
    }
}

/// The built-in benchmark experiment as a config document (what
/// `example --variant pt` runs), usable as a starting point for edits.
pub fn benchmark_config_toml(variant: example::Variant) -> String {
    let (ell, law_extras, horizon) = match variant {
        example::Variant::PrescribedTime => ("\"inf\"", "prescribed_time = 8.0", ""),
        example::Variant::Hyperexponential => ("1", "mu0 = 1.0", "horizon = 8.0\n"),
        example::Variant::Standard => ("\"frozen\"", "mu0 = 1.0", "horizon = 8.0\n"),
    };
    let policy = match variant {
        example::Variant::Standard => "kind = \"scripted\"\ninitial_mode = 2\nsteps = []".into(),
        _ => {
            let steps: Vec<String> = match example::scripted_policy() {
                SwitchingPolicy::Scripted { steps, .. } => steps
                    .iter()
                    .map(|s| format!("[{}, {}]", s.dwell, s.next_mode))
                    .collect(),
                _ => unreachable!("benchmark policy is scripted"),
            };
            format!(
                "kind = \"scripted\"\ninitial_mode = 1\nsteps = [{}]",
                steps.join(", ")
            )
        }
    };
    format!(
        "version = 1\n\n\
         [model]\nkind = \"builtin\"\n\n\
         [law]\nell = {ell}\nupsilon = 8.0\n{law_extras}\n\n\
         [weights]\nk_t = 1.0\nk_r = 1.0\n\n\
         [automaton]\ntau_d = 2.0\ntau_a = 25.0\nn0 = 2.0\nt0 = 1.0\n\n\
         [policy]\n{policy}\n\n\
         [run]\nmode = \"auto\"\ndt = 0.001\neps_stop = 0.01\n{horizon}seed = 0\ntheta0 = [0.0, 0.0, 0.0]\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_documents_assemble() {
        for variant in [
            example::Variant::Standard,
            example::Variant::Hyperexponential,
            example::Variant::PrescribedTime,
        ] {
            let text = benchmark_config_toml(variant);
            let exp = assemble(&text, Path::new(".")).unwrap_or_else(|e| panic!("{variant}: {e}"));
            assert_eq!(exp.config.registry.len(), 4);
            exp.config.validate().unwrap();
        }
    }

    #[test]
    fn prescribed_time_solves_mu0() {
        let text = benchmark_config_toml(example::Variant::PrescribedTime);
        let exp = assemble(&text, Path::new(".")).unwrap();
        // T = 8 with upsilon = 8 needs mu0 = 1
        assert!((exp.config.mu0 - 1.0).abs() < 1e-12);
        assert!((exp.config.law.blow_up_time(exp.config.mu0) - 8.0).abs() < 1e-12);

        let text = text.replace("prescribed_time = 8.0", "prescribed_time = 4.0");
        let exp = assemble(&text, Path::new(".")).unwrap();
        assert!((exp.config.law.blow_up_time(exp.config.mu0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_documents() {
        let good = benchmark_config_toml(example::Variant::PrescribedTime);

        // unparseable
        assert!(matches!(
            assemble("version = ", Path::new(".")),
            Err(ConfigError::Parse(_))
        ));
        // wrong version
        let bad = good.replace("version = 1", "version = 9");
        assert!(matches!(
            assemble(&bad, Path::new(".")),
            Err(ConfigError::Invalid(_))
        ));
        // both mu0 and prescribed_time
        let bad = good.replace("prescribed_time = 8.0", "prescribed_time = 8.0\nmu0 = 1.0");
        assert!(assemble(&bad, Path::new(".")).is_err());
        // horizon required for the exponential law
        let he = benchmark_config_toml(example::Variant::Hyperexponential);
        let bad = he.replace("horizon = 8.0\n", "");
        assert!(assemble(&bad, Path::new(".")).is_err());
        // unknown keys are rejected
        let bad = good.replace("[weights]", "[weights]\nk_x = 3.0");
        assert!(assemble(&bad, Path::new(".")).is_err());
    }

    #[test]
    fn file_mode_requires_recorded_data_only() {
        let dir = std::env::temp_dir().join(format!("spthecl-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        example::registry().save(dir.join("reg.toml")).unwrap();
        let text = benchmark_config_toml(example::Variant::PrescribedTime).replace(
            "kind = \"builtin\"",
            "kind = \"file\"\nregistry = \"reg.toml\"\ntheta_star = [1.0, -2.0, 1.0]",
        );
        // k_t = 1 is refused
        let err = assemble(&text, &dir).unwrap_err();
        assert!(err.to_string().contains("k_t = 0"), "{err}");
        // k_t = 0 assembles
        let text = text.replace("k_t = 1.0", "k_t = 0.0");
        let exp = assemble(&text, &dir).unwrap();
        assert_eq!(exp.config.k_t, 0.0);
        std::fs::remove_dir_all(&dir).ok();
    }
}
