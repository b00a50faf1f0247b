//! Recorded datasets and their registry.
//!
//! A dataset `Delta_q = (Phi_q, Psi_q)` aggregates recorded samples into the
//! data matrix `Phi_q = sum_k phi_k phi_k^T` and data vector
//! `Psi_q = sum_k phi_k psi_k`. Datasets are classified as sufficiently rich
//! (SR, `lambda_min(Phi) = alpha > 0`), insufficiently rich (IR, PSD with
//! `lambda_min = 0`), or corrupted (asymmetric, indefinite, or negative
//! definite — the signatures a matrix acquires when tampered with in transit).
//!
//! A registry holds one dataset per switching mode together with the induced
//! partition of mode indices. Datasets and registries are immutable after
//! construction; corruption injection returns a new value.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::linalg::{dot, norm, Matrix};
use crate::signal::{measure, RegressorModel, TrueSystem};

/// `lambda_min` above this is SR, below its negative is corrupted (indefinite
/// or negative definite), in between is IR.
pub const SR_TOLERANCE: f64 = 1e-9;

/// Asymmetry tolerance, max-norm relative to the matrix max-norm.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("dataset needs at least one sample")]
    EmptySamples,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("noise list length {got} does not match sample count {expected}")]
    NoiseLengthMismatch { expected: usize, got: usize },
    #[error("data matrix is asymmetric; use classification instead of richness")]
    AsymmetricMatrix,
    #[error("duplicate dataset id {0}")]
    DuplicateId(usize),
    #[error("registry datasets disagree on dimension")]
    MixedDimensions,
    #[error("registry has no datasets")]
    EmptyRegistry,
}

/// Informativity classification of a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Classification {
    /// `Phi >= alpha I` with `alpha > 0`; `alpha` is the richness level.
    SufficientlyRich { alpha: f64 },
    /// Symmetric PSD but rank deficient.
    InsufficientlyRich,
    /// Asymmetric, indefinite, or negative definite.
    Corrupted,
}

impl Classification {
    pub fn is_sufficiently_rich(&self) -> bool {
        matches!(self, Classification::SufficientlyRich { .. })
    }

    pub fn is_corrupted(&self) -> bool {
        matches!(self, Classification::Corrupted)
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            Classification::SufficientlyRich { alpha } => Some(*alpha),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Classification::SufficientlyRich { .. } => "sufficiently-rich",
            Classification::InsufficientlyRich => "insufficiently-rich",
            Classification::Corrupted => "corrupted",
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Classification::SufficientlyRich { alpha } => write!(f, "SR(alpha={alpha:.6})"),
            Classification::InsufficientlyRich => write!(f, "IR"),
            Classification::Corrupted => write!(f, "Corrupted"),
        }
    }
}

/// Classifies a data matrix by its algebraic signature.
pub fn classify_matrix(m: &Matrix) -> Classification {
    let scale = m.max_abs().max(1.0);
    if m.max_asymmetry() > SYMMETRY_TOLERANCE * scale {
        return Classification::Corrupted;
    }
    let lambda_min = m.min_symmetric_eigenvalue();
    if lambda_min < -SR_TOLERANCE {
        Classification::Corrupted
    } else if lambda_min > SR_TOLERANCE {
        Classification::SufficientlyRich { alpha: lambda_min }
    } else {
        Classification::InsufficientlyRich
    }
}

/// One recorded measurement: the recording instant, the regressor there, and
/// the (possibly noisy) signal value.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub phi: Vec<f64>,
    pub psi: f64,
}

/// A recorded dataset: samples (kept for provenance; may be empty when the
/// matrices were injected directly), the aggregated data matrix and vector,
/// and the classification.
#[derive(Debug, Clone)]
pub struct Dataset {
    id: usize,
    samples: Vec<Sample>,
    data_matrix: Matrix,
    data_vector: Vec<f64>,
    classification: Classification,
}

impl Dataset {
    /// Aggregates samples into `(Phi, Psi)` and classifies the result.
    pub fn from_samples(id: usize, samples: Vec<Sample>) -> Result<Self, DatasetError> {
        let n = samples.first().ok_or(DatasetError::EmptySamples)?.phi.len();
        let mut data_matrix = Matrix::zeros(n);
        let mut data_vector = vec![0.0; n];
        for s in &samples {
            if s.phi.len() != n {
                return Err(DatasetError::DimensionMismatch {
                    expected: n,
                    got: s.phi.len(),
                });
            }
            data_matrix.add_outer(&s.phi, 1.0);
            for (acc, p) in data_vector.iter_mut().zip(&s.phi) {
                *acc += p * s.psi;
            }
        }
        let classification = classify_matrix(&data_matrix);
        Ok(Dataset {
            id,
            samples,
            data_matrix,
            data_vector,
            classification,
        })
    }

    /// Records the model at the given instants. `noise` overrides the
    /// measurement disturbance per sample (the recorded-data noise channel);
    /// when absent the system's own disturbance is sampled.
    pub fn from_recordings(
        id: usize,
        times: &[f64],
        sys: &TrueSystem,
        reg: &RegressorModel,
        noise: Option<&[f64]>,
    ) -> Result<Self, DatasetError> {
        if times.is_empty() {
            return Err(DatasetError::EmptySamples);
        }
        if sys.dimension() != reg.dimension() {
            return Err(DatasetError::DimensionMismatch {
                expected: sys.dimension(),
                got: reg.dimension(),
            });
        }
        if let Some(noise) = noise {
            if noise.len() != times.len() {
                return Err(DatasetError::NoiseLengthMismatch {
                    expected: times.len(),
                    got: noise.len(),
                });
            }
        }
        let samples = times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let phi = reg.phi(t);
                let psi = match noise {
                    Some(noise) => dot(&phi, sys.theta_star()) + noise[k],
                    None => measure(sys, reg, t),
                };
                Sample { t, phi, psi }
            })
            .collect();
        Self::from_samples(id, samples)
    }

    /// Builds from injected matrices, with no sample provenance.
    pub fn from_matrices(
        id: usize,
        data_matrix: Matrix,
        data_vector: Vec<f64>,
    ) -> Result<Self, DatasetError> {
        if data_vector.len() != data_matrix.n() {
            return Err(DatasetError::DimensionMismatch {
                expected: data_matrix.n(),
                got: data_vector.len(),
            });
        }
        let classification = classify_matrix(&data_matrix);
        Ok(Dataset {
            id,
            samples: Vec::new(),
            data_matrix,
            data_vector,
            classification,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn dimension(&self) -> usize {
        self.data_matrix.n()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn data_matrix(&self) -> &Matrix {
        &self.data_matrix
    }

    pub fn data_vector(&self) -> &[f64] {
        &self.data_vector
    }

    pub fn classification(&self) -> Classification {
        self.classification
    }

    /// The richness level: `lambda_min(Phi)`, the largest `alpha` with
    /// `Phi >= alpha I`. Errors on asymmetric matrices — classification is the
    /// right tool for those.
    pub fn richness(&self) -> Result<f64, DatasetError> {
        let scale = self.data_matrix.max_abs().max(1.0);
        if self.data_matrix.max_asymmetry() > SYMMETRY_TOLERANCE * scale {
            return Err(DatasetError::AsymmetricMatrix);
        }
        Ok(self.data_matrix.min_symmetric_eigenvalue())
    }

    /// Returns a dataset whose data matrix (and optionally data vector) has
    /// been overridden, re-classified. Samples are retained for provenance.
    pub fn with_corruption(
        &self,
        phi_override: Matrix,
        psi_override: Option<Vec<f64>>,
    ) -> Result<Dataset, DatasetError> {
        if phi_override.n() != self.dimension() {
            return Err(DatasetError::DimensionMismatch {
                expected: self.dimension(),
                got: phi_override.n(),
            });
        }
        let data_vector = match psi_override {
            Some(v) => {
                if v.len() != self.dimension() {
                    return Err(DatasetError::DimensionMismatch {
                        expected: self.dimension(),
                        got: v.len(),
                    });
                }
                v
            }
            None => self.data_vector.clone(),
        };
        let classification = classify_matrix(&phi_override);
        Ok(Dataset {
            id: self.id,
            samples: self.samples.clone(),
            data_matrix: phi_override,
            data_vector,
            classification,
        })
    }

    /// The batch residual `R(theta) = Phi theta - Psi`.
    pub fn residual(&self, theta: &[f64]) -> Result<Vec<f64>, DatasetError> {
        if theta.len() != self.dimension() {
            return Err(DatasetError::DimensionMismatch {
                expected: self.dimension(),
                got: theta.len(),
            });
        }
        let mut r = self.data_matrix.matvec(theta);
        for (ri, vi) in r.iter_mut().zip(&self.data_vector) {
            *ri -= vi;
        }
        Ok(r)
    }

    /// `|Phi theta* - Psi|`: the magnitude of the forcing a corrupted dataset
    /// injects at the true parameter. Zero for clean uncorrupted data.
    pub fn corruption_offset(&self, theta_star: &[f64]) -> f64 {
        assert_eq!(
            theta_star.len(),
            self.dimension(),
            "corruption_offset dimension mismatch"
        );
        norm(&self.residual(theta_star).expect("dimension checked"))
    }
}

/// The partition of mode indices by dataset classification.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModePartition {
    pub sufficiently_rich: Vec<usize>,
    pub insufficiently_rich: Vec<usize>,
    pub corrupted: Vec<usize>,
}

impl ModePartition {
    pub fn all_modes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .sufficiently_rich
            .iter()
            .chain(&self.insufficiently_rich)
            .chain(&self.corrupted)
            .copied()
            .collect();
        v.sort_unstable();
        v
    }

    pub fn contains(&self, q: usize) -> bool {
        self.sufficiently_rich.contains(&q)
            || self.insufficiently_rich.contains(&q)
            || self.corrupted.contains(&q)
    }

    /// True when mode `q` drains the activation budget (IR or corrupted).
    pub fn drains_activation(&self, q: usize) -> bool {
        self.insufficiently_rich.contains(&q) || self.corrupted.contains(&q)
    }
}

/// All datasets of an experiment, keyed by mode index.
#[derive(Debug, Clone)]
pub struct DatasetRegistry {
    datasets: BTreeMap<usize, Dataset>,
}

impl DatasetRegistry {
    pub fn new(datasets: Vec<Dataset>) -> Result<Self, DatasetError> {
        let mut map = BTreeMap::new();
        let mut dim = None;
        for ds in datasets {
            match dim {
                None => dim = Some(ds.dimension()),
                Some(n) if n != ds.dimension() => return Err(DatasetError::MixedDimensions),
                _ => {}
            }
            if map.insert(ds.id(), ds).is_some() {
                return Err(DatasetError::DuplicateId(
                    map.keys().last().copied().unwrap_or(0),
                ));
            }
        }
        if map.is_empty() {
            return Err(DatasetError::EmptyRegistry);
        }
        Ok(DatasetRegistry { datasets: map })
    }

    pub fn dimension(&self) -> usize {
        self.datasets
            .values()
            .next()
            .map(Dataset::dimension)
            .unwrap_or(0)
    }

    pub fn get(&self, q: usize) -> Option<&Dataset> {
        self.datasets.get(&q)
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Dataset> {
        self.datasets.values()
    }

    /// The mode partition induced by the classifications.
    pub fn partition(&self) -> ModePartition {
        let mut p = ModePartition::default();
        for ds in self.datasets.values() {
            match ds.classification() {
                Classification::SufficientlyRich { .. } => p.sufficiently_rich.push(ds.id()),
                Classification::InsufficientlyRich => p.insufficiently_rich.push(ds.id()),
                Classification::Corrupted => p.corrupted.push(ds.id()),
            }
        }
        p
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), io::RegistryIoError> {
        io::save(self, path.as_ref())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, io::RegistryIoError> {
        io::load(path.as_ref())
    }

    pub fn to_toml(&self) -> Result<String, io::RegistryIoError> {
        io::to_toml(self)
    }

    pub fn from_toml(text: &str) -> Result<Self, io::RegistryIoError> {
        io::from_toml(text)
    }
}

/// Registry persistence: one self-describing TOML document per registry.
///
/// Schema (version 1):
///
/// ```toml
/// version = 1
/// dimension = 3
///
/// [[dataset]]
/// id = 1
/// classification = "sufficiently-rich"   # or "insufficiently-rich" | "corrupted"
/// alpha = 0.438447                        # present only for SR datasets
/// data_matrix = [ ... ]                   # n*n entries, row-major
/// data_vector = [ ... ]                   # n entries
/// [[dataset.sample]]                      # optional provenance
/// t = 0.0
/// phi = [1.0, 0.0, 0.0]
/// psi = 1.0
///
/// [partition]
/// sufficiently_rich = [1, 2]
/// insufficiently_rich = [3]
/// corrupted = [4]
/// ```
///
/// Floats round-trip losslessly (shortest representation that parses back to
/// the same value). On load, classifications are recomputed from the stored
/// matrices and must agree with both the stored labels and the partition.
pub mod io {
    use super::*;
    use serde::{Deserialize, Serialize};
    use std::path::Path;

    pub const FORMAT_VERSION: u32 = 1;

    #[derive(Debug, Error)]
    pub enum RegistryIoError {
        #[error("registry i/o failed: {0}")]
        Io(#[from] std::io::Error),
        #[error("registry parse error: {0}")]
        Parse(String),
        #[error("registry schema violation: {0}")]
        Schema(String),
    }

    #[derive(Serialize, Deserialize)]
    struct RegistryFile {
        version: u32,
        dimension: usize,
        #[serde(default)]
        dataset: Vec<DatasetFile>,
        partition: PartitionFile,
    }

    #[derive(Serialize, Deserialize)]
    struct DatasetFile {
        id: usize,
        classification: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        data_matrix: Vec<f64>,
        data_vector: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        sample: Vec<SampleFile>,
    }

    #[derive(Serialize, Deserialize)]
    struct SampleFile {
        t: f64,
        phi: Vec<f64>,
        psi: f64,
    }

    #[derive(Serialize, Deserialize)]
    struct PartitionFile {
        sufficiently_rich: Vec<usize>,
        insufficiently_rich: Vec<usize>,
        corrupted: Vec<usize>,
    }

    pub fn to_toml(registry: &DatasetRegistry) -> Result<String, RegistryIoError> {
        let partition = registry.partition();
        let file = RegistryFile {
            version: FORMAT_VERSION,
            dimension: registry.dimension(),
            dataset: registry
                .iter()
                .map(|ds| DatasetFile {
                    id: ds.id(),
                    classification: ds.classification().label().to_string(),
                    alpha: ds.classification().alpha(),
                    data_matrix: ds.data_matrix().as_slice().to_vec(),
                    data_vector: ds.data_vector().to_vec(),
                    sample: ds
                        .samples()
                        .iter()
                        .map(|s| SampleFile {
                            t: s.t,
                            phi: s.phi.clone(),
                            psi: s.psi,
                        })
                        .collect(),
                })
                .collect(),
            partition: PartitionFile {
                sufficiently_rich: partition.sufficiently_rich,
                insufficiently_rich: partition.insufficiently_rich,
                corrupted: partition.corrupted,
            },
        };
        toml::to_string_pretty(&file).map_err(|e| RegistryIoError::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<DatasetRegistry, RegistryIoError> {
        let file: RegistryFile =
            toml::from_str(text).map_err(|e| RegistryIoError::Parse(e.to_string()))?;
        if file.version != FORMAT_VERSION {
            return Err(RegistryIoError::Schema(format!(
                "unsupported registry version {} (expected {FORMAT_VERSION})",
                file.version
            )));
        }
        let n = file.dimension;
        let mut datasets = Vec::new();
        for d in file.dataset {
            if d.data_matrix.len() != n * n {
                return Err(RegistryIoError::Schema(format!(
                    "dataset {}: data_matrix has {} entries, expected {}",
                    d.id,
                    d.data_matrix.len(),
                    n * n
                )));
            }
            if d.data_vector.len() != n {
                return Err(RegistryIoError::Schema(format!(
                    "dataset {}: data_vector has {} entries, expected {n}",
                    d.id,
                    d.data_vector.len()
                )));
            }
            let matrix = Matrix::from_row_major(n, d.data_matrix).expect("length checked above");
            let mut ds = Dataset::from_matrices(d.id, matrix, d.data_vector)
                .map_err(|e| RegistryIoError::Schema(format!("dataset {}: {e}", d.id)))?;
            if !d.sample.is_empty() {
                for s in &d.sample {
                    if s.phi.len() != n {
                        return Err(RegistryIoError::Schema(format!(
                            "dataset {}: sample phi has {} entries, expected {n}",
                            d.id,
                            s.phi.len()
                        )));
                    }
                }
                ds.samples = d
                    .sample
                    .into_iter()
                    .map(|s| Sample {
                        t: s.t,
                        phi: s.phi,
                        psi: s.psi,
                    })
                    .collect();
            }
            // stored label must match the recomputed classification
            let recomputed = ds.classification();
            if recomputed.label() != d.classification {
                return Err(RegistryIoError::Schema(format!(
                    "dataset {}: stored classification '{}' disagrees with matrix signature '{}'",
                    d.id,
                    d.classification,
                    recomputed.label()
                )));
            }
            if let (Some(stored), Some(actual)) = (d.alpha, recomputed.alpha()) {
                if (stored - actual).abs() > 1e-9 * actual.abs().max(1.0) {
                    return Err(RegistryIoError::Schema(format!(
                        "dataset {}: stored alpha {stored} disagrees with recomputed {actual}",
                        d.id
                    )));
                }
            }
            datasets.push(ds);
        }
        let registry =
            DatasetRegistry::new(datasets).map_err(|e| RegistryIoError::Schema(e.to_string()))?;
        if registry.dimension() != n {
            return Err(RegistryIoError::Schema(format!(
                "declared dimension {n} disagrees with dataset dimension {}",
                registry.dimension()
            )));
        }
        // partition must match the classifications exactly
        let actual = registry.partition();
        let declared = ModePartition {
            sufficiently_rich: file.partition.sufficiently_rich,
            insufficiently_rich: file.partition.insufficiently_rich,
            corrupted: file.partition.corrupted,
        };
        let normalize = |mut v: Vec<usize>| {
            v.sort_unstable();
            v
        };
        if normalize(declared.sufficiently_rich.clone())
            != normalize(actual.sufficiently_rich.clone())
            || normalize(declared.insufficiently_rich.clone())
                != normalize(actual.insufficiently_rich.clone())
            || normalize(declared.corrupted.clone()) != normalize(actual.corrupted.clone())
        {
            return Err(RegistryIoError::Schema(format!(
                "partition {declared:?} inconsistent with dataset classifications {actual:?}"
            )));
        }
        Ok(registry)
    }

    pub fn save(registry: &DatasetRegistry, path: &Path) -> Result<(), RegistryIoError> {
        std::fs::write(path, to_toml(registry)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<DatasetRegistry, RegistryIoError> {
        from_toml(&std::fs::read_to_string(path)?)
    }
}
