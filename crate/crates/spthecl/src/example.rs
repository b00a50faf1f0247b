//! The built-in benchmark experiment used by the CLI and the test suite.
//!
//! Three unknown parameters, regressor `(1, sin t, sin^2 t)`, disturbance
//! `tanh(t)/4`, and four recorded datasets: two sufficiently rich (richness
//! about 0.44 and 0.15), one uninformative (recorded where the sine
//! vanishes), and one whose data matrix was corrupted in transit. Automaton
//! parameters: `tau_d = 2`, `tau_a = 25`, `N0 = 2`, `T0 = 1`, which satisfy
//! the certificate condition for these datasets.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::dataset::{Dataset, DatasetRegistry};
use crate::estimator::{EstimatorConfig, RunOptions};
use crate::gain::GainLaw;
use crate::linalg::Matrix;
use crate::signal::{example_model, TrueSystem};
use crate::switching::{AutomatonParams, ScriptStep, SwitchingPolicy};

/// Which estimator the benchmark runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Constant gain `mu = 1`, fixed dataset 2, no switching.
    Standard,
    /// Exponentially growing gain (`ell = 1`).
    Hyperexponential,
    /// Blow-up gain (`ell = inf`) with deadline `T = 8`.
    PrescribedTime,
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Variant::Standard),
            "he" | "hyperexponential" => Ok(Variant::Hyperexponential),
            "pt" | "prescribed-time" => Ok(Variant::PrescribedTime),
            other => Err(format!(
                "unknown variant '{other}' (expected standard | he | pt)"
            )),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Standard => "standard",
            Variant::Hyperexponential => "he",
            Variant::PrescribedTime => "pt",
        })
    }
}

/// Recording instants of the four datasets.
pub fn recording_times(q: usize) -> Vec<f64> {
    match q {
        1 => vec![0.0, -PI / 2.0, -3.0 * PI / 2.0],
        2 => vec![0.0, -PI / 4.0, -7.0 * PI / 4.0],
        3 => vec![0.0, -PI, -2.0 * PI],
        4 => vec![0.0, -PI / 7.0, -PI / 5.0],
        _ => panic!("benchmark datasets are numbered 1..=4"),
    }
}

/// The tampered data matrix injected into dataset 4.
pub fn corrupted_matrix() -> Matrix {
    Matrix::from_rows(&[&[0.6, 0.3, 0.4], &[0.3, 1.0, 0.3], &[0.7, 0.5, 0.4]])
        .expect("static matrix is square")
}

/// All four datasets, recorded with the measurement disturbance; dataset 4
/// carries the corrupted matrix (its data vector keeps the recorded values).
pub fn registry() -> DatasetRegistry {
    let (sys, reg) = example_model();
    let datasets = (1..=4)
        .map(|q| {
            let ds = Dataset::from_recordings(q, &recording_times(q), &sys, &reg, None)
                .expect("benchmark recordings are valid");
            if q == 4 {
                ds.with_corruption(corrupted_matrix(), None)
                    .expect("dimensions match")
            } else {
                ds
            }
        })
        .collect();
    DatasetRegistry::new(datasets).expect("benchmark registry is valid")
}

pub fn automaton_params() -> AutomatonParams {
    AutomatonParams::new(2.0, 25.0, 2.0, 1.0, registry().partition())
        .expect("benchmark parameters are valid")
}

/// The scripted benchmark switching policy (dilated dwells): the
/// uninformative and corrupted datasets are visited early, while the budgets
/// allow it, and the tail alternates between the two rich datasets. Visits to
/// draining modes late in dilated time would sit right before the
/// hyperexponential run's horizon and wreck its final error, so the script
/// front-loads them.
pub fn scripted_policy() -> SwitchingPolicy {
    let mut steps = vec![
        ScriptStep::new(2.0, 3),
        ScriptStep::new(0.3, 2),
        ScriptStep::new(4.0, 4),
        ScriptStep::new(0.2, 1),
        ScriptStep::new(4.0, 2),
    ];
    let mut mode = 2;
    for _ in 0..7 {
        mode = if mode == 2 { 1 } else { 2 };
        steps.push(ScriptStep::new(3.5, mode));
    }
    SwitchingPolicy::Scripted {
        initial_mode: 1,
        steps,
    }
}

/// Hold dataset 2 forever: the classical constant-gain baseline.
pub fn standard_policy() -> SwitchingPolicy {
    SwitchingPolicy::Scripted {
        initial_mode: 2,
        steps: vec![],
    }
}

/// A seeded random policy over all four datasets.
pub fn random_policy() -> SwitchingPolicy {
    SwitchingPolicy::SeededRandom {
        initial_mode: 1,
        min_dwell: 0.5,
        max_dwell: 4.0,
        weights: vec![(1, 0.4), (2, 0.3), (3, 0.2), (4, 0.1)],
    }
}

pub fn law(variant: Variant) -> GainLaw {
    match variant {
        Variant::Standard => GainLaw::frozen(),
        Variant::Hyperexponential => GainLaw::exponential(8.0).expect("static law is valid"),
        Variant::PrescribedTime => GainLaw::prescribed_time(8.0).expect("static law is valid"),
    }
}

pub fn policy(variant: Variant) -> SwitchingPolicy {
    match variant {
        Variant::Standard => standard_policy(),
        _ => scripted_policy(),
    }
}

/// Full benchmark configuration: `k_t = k_r = 1`, `mu0 = 1` (so the
/// prescribed time is 8), estimate started at zero.
pub fn config(variant: Variant) -> EstimatorConfig {
    let (sys, reg) = example_model();
    EstimatorConfig {
        k_t: 1.0,
        k_r: 1.0,
        law: law(variant),
        mu0: 1.0,
        automaton: automaton_params(),
        registry: registry(),
        system: sys,
        regressor: reg,
        theta0: vec![0.0; 3],
    }
}

/// Default integration options per variant. The prescribed-time variant runs
/// on the dilated clock; the others run in real time to the common horizon 8.
pub fn run_options(variant: Variant) -> RunOptions {
    match variant {
        Variant::PrescribedTime => RunOptions {
            dt: 1e-3,
            ..RunOptions::default()
        },
        Variant::Hyperexponential | Variant::Standard => RunOptions {
            dt: 1e-3,
            horizon: Some(8.0),
            ..RunOptions::default()
        },
    }
}

/// Disturbance-free variant with a single dataset `q` (recorded without
/// noise) and no switching: the single-dataset special case.
pub fn clean_single_dataset_config(law: GainLaw, mu0: f64, q: usize) -> EstimatorConfig {
    let (sys, reg) = example_model();
    let clean_sys = TrueSystem::clean(sys.theta_star().to_vec()).expect("static model is valid");
    let ds = Dataset::from_recordings(q, &recording_times(q), &clean_sys, &reg, None)
        .expect("benchmark recordings are valid");
    let registry = DatasetRegistry::new(vec![ds]).expect("single dataset");
    let automaton = AutomatonParams::new(2.0, 25.0, 2.0, 1.0, registry.partition())
        .expect("benchmark parameters are valid");
    EstimatorConfig {
        k_t: 1.0,
        k_r: 1.0,
        law,
        mu0,
        automaton,
        registry,
        system: clean_sys,
        regressor: reg,
        theta0: vec![0.0; 3],
    }
}

/// Clean single-dataset setup on the richest dataset.
pub fn clean_single_sr_config(law: GainLaw, mu0: f64) -> EstimatorConfig {
    clean_single_dataset_config(law, mu0, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::switching::generate_switching;

    #[test]
    fn variants_parse() {
        assert_eq!("pt".parse::<Variant>().unwrap(), Variant::PrescribedTime);
        assert_eq!("he".parse::<Variant>().unwrap(), Variant::Hyperexponential);
        assert_eq!("standard".parse::<Variant>().unwrap(), Variant::Standard);
        assert!("fast".parse::<Variant>().is_err());
    }

    #[test]
    fn benchmark_partition() {
        let p = registry().partition();
        assert_eq!(p.sufficiently_rich, vec![1, 2]);
        assert_eq!(p.insufficiently_rich, vec![3]);
        assert_eq!(p.corrupted, vec![4]);
    }

    #[test]
    fn scripted_policy_is_admissible_for_both_dynamic_laws() {
        let params = automaton_params();
        for variant in [Variant::Hyperexponential, Variant::PrescribedTime] {
            let law = law(variant);
            let s_end = match variant {
                // dilations of the respective horizons (7.92 and 8)
                Variant::PrescribedTime => law.dilate(1.0, 7.92).unwrap(),
                _ => law.dilate(1.0, 8.0).unwrap(),
            };
            let sig = generate_switching(&params, &law, 1.0, &scripted_policy(), 0, s_end)
                .unwrap_or_else(|e| panic!("{variant}: {e}"));
            assert!(
                sig.jump_count() >= 4,
                "{variant} makes only {} jumps",
                sig.jump_count()
            );
        }
    }

    #[test]
    fn configs_validate() {
        for variant in [
            Variant::Standard,
            Variant::Hyperexponential,
            Variant::PrescribedTime,
        ] {
            config(variant).validate().unwrap();
        }
        clean_single_sr_config(GainLaw::prescribed_time(8.0).unwrap(), 1.0)
            .validate()
            .unwrap();
    }
}
