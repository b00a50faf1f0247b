//! The measured signal and its ingredients.
//!
//! The scalar measurement is `psi(theta*, t) = phi(t)^T theta* + d(t)` with a
//! known regressor `phi` and an unknown bounded disturbance `d`. The real-time
//! learning signal is `chi(theta, t) = phi(t) (phi(t)^T theta - psi(theta*, t))`,
//! which the practitioner can evaluate without knowing `theta*`.
//!
//! Regressor and disturbance are supplied as user code (shared closures) plus
//! declared bounds; nothing here estimates the bounds. The closures must be
//! re-entrant: models are shared across threads during parameter sweeps.

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{dot, Matrix};

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model dimension must be at least 1")]
    EmptyModel,
    #[error("bound must be finite and nonnegative, got {0}")]
    InvalidBound(f64),
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type RegressorFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// The known regressor `phi` with its declared uniform bound `sup_t |phi(t)|`.
/// Evaluable at any real `t`, including negative recording times.
#[derive(Clone)]
pub struct RegressorModel {
    dimension: usize,
    phi: RegressorFn,
    phi_bound: f64,
}

impl std::fmt::Debug for RegressorModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RegressorModel")
            .field("dimension", &self.dimension)
            .field("phi_bound", &self.phi_bound)
            .finish_non_exhaustive()
    }
}

impl RegressorModel {
    pub fn new(dimension: usize, phi_bound: f64, phi: RegressorFn) -> Result<Self, SignalError> {
        if dimension == 0 {
            return Err(SignalError::EmptyModel);
        }
        if !phi_bound.is_finite() || phi_bound <= 0.0 {
            return Err(SignalError::InvalidBound(phi_bound));
        }
        Ok(RegressorModel {
            dimension,
            phi,
            phi_bound,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn phi_bound(&self) -> f64 {
        self.phi_bound
    }

    pub fn phi(&self, t: f64) -> Vec<f64> {
        let v = (self.phi)(t);
        assert_eq!(
            v.len(),
            self.dimension,
            "regressor closure returned wrong dimension"
        );
        v
    }
}

/// The ground truth: the parameter to estimate, the disturbance, and its
/// declared bound `sup_t |d(t)| <= disturbance_bound`.
#[derive(Clone)]
pub struct TrueSystem {
    theta_star: Vec<f64>,
    disturbance: ScalarFn,
    disturbance_bound: f64,
}

impl std::fmt::Debug for TrueSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrueSystem")
            .field("theta_star", &self.theta_star)
            .field("disturbance_bound", &self.disturbance_bound)
            .finish_non_exhaustive()
    }
}

impl TrueSystem {
    pub fn new(
        theta_star: Vec<f64>,
        disturbance_bound: f64,
        disturbance: ScalarFn,
    ) -> Result<Self, SignalError> {
        if theta_star.is_empty() {
            return Err(SignalError::EmptyModel);
        }
        if !disturbance_bound.is_finite() || disturbance_bound < 0.0 {
            return Err(SignalError::InvalidBound(disturbance_bound));
        }
        Ok(TrueSystem {
            theta_star,
            disturbance,
            disturbance_bound,
        })
    }

    /// Disturbance-free system.
    pub fn clean(theta_star: Vec<f64>) -> Result<Self, SignalError> {
        Self::new(theta_star, 0.0, Arc::new(|_| 0.0))
    }

    pub fn dimension(&self) -> usize {
        self.theta_star.len()
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn disturbance_bound(&self) -> f64 {
        self.disturbance_bound
    }

    pub fn disturbance(&self, t: f64) -> f64 {
        (self.disturbance)(t)
    }
}

/// The measured signal `psi(theta*, t) = phi(t)^T theta* + d(t)`.
pub fn measure(sys: &TrueSystem, reg: &RegressorModel, t: f64) -> f64 {
    assert_eq!(
        sys.dimension(),
        reg.dimension(),
        "system/regressor dimension mismatch"
    );
    dot(&reg.phi(t), sys.theta_star()) + sys.disturbance(t)
}

/// The real-time learning signal `chi(theta, t) = phi(t) (phi(t)^T theta - psi(theta*, t))`.
pub fn chi(
    sys: &TrueSystem,
    reg: &RegressorModel,
    theta: &[f64],
    t: f64,
) -> Result<Vec<f64>, SignalError> {
    if theta.len() != reg.dimension() {
        return Err(SignalError::DimensionMismatch {
            expected: reg.dimension(),
            got: theta.len(),
        });
    }
    let p = reg.phi(t);
    let residual = dot(&p, theta) - measure(sys, reg, t);
    Ok(p.into_iter().map(|x| x * residual).collect())
}

/// The rank-<=1 symmetric PSD matrix `Xi(t) = phi(t) phi(t)^T`.
pub fn xi(reg: &RegressorModel, t: f64) -> Matrix {
    let p = reg.phi(t);
    let mut m = Matrix::zeros(reg.dimension());
    m.add_outer(&p, 1.0);
    m
}

/// The built-in three-parameter benchmark model:
/// `theta* = (1, -2, 1)`, `phi(t) = (1, sin t, sin^2 t)`, `d(t) = tanh(t)/4`,
/// so the measurement reads `(sin t - 1)^2 + d(t)`.
pub fn example_model() -> (TrueSystem, RegressorModel) {
    let sys = TrueSystem::new(
        vec![1.0, -2.0, 1.0],
        0.25,
        Arc::new(|t: f64| 0.25 * t.tanh()),
    )
    .expect("static model is valid");
    let reg = RegressorModel::new(
        3,
        3.0f64.sqrt(),
        Arc::new(|t: f64| {
            let s = t.sin();
            vec![1.0, s, s * s]
        }),
    )
    .expect("static model is valid");
    (sys, reg)
}
