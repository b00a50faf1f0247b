//! The switched dynamic-gain concurrent-learning estimator.
//!
//! Between switches the estimate flows as `dtheta/dt = mu * Omega_q(theta, tau)`
//! with the learning map
//!
//! ```text
//! Omega_q(theta, tau) = -k_t chi(theta, tau) - k_r (Phi_q theta - Psi_q),
//! ```
//!
//! alongside the data-querying automaton (timer rates scaled by `mu`), the
//! clock `dtau/dt = 1`, and the gain `dmu/dt = F(mu)`. Jumps change only the
//! automaton state. The same loop expressed on the dilated clock `s` is the
//! *target system*: `dtheta/ds = Omega_q`, automaton rates unscaled,
//! `dtau/ds = 1/mu_hat`, `dmu_hat/ds = F(mu_hat)/mu_hat` — bounded right-hand
//! sides, no stiffness near the blow-up time, which is why dilated-time
//! integration is the default for blow-up laws. Solutions of the two loops
//! correspond through the dilation, sample for sample.
//!
//! The convergence certificate mirrors the Lyapunov argument behind the
//! estimator: with `kappa_low = k_r * min_SR alpha_q` and
//! `varpi = 1 + k_r * max_corrupt |Phi_q|`, admissible switching yields
//!
//! ```text
//! |theta(t,j) - theta*| <= kappa1 |theta0 - theta*| e^{-kappa2 (D(t)+j)}
//!                          + kappa3 sup|u|,
//! ```
//!
//! provided `tau_a > 1 + varpi / (k_r alpha_low)` so that
//! `lambda = kappa_low - (kappa_low + varpi)/tau_a > 0`. The input magnitude
//! aggregates the real-time disturbance bound, the noise recorded into the
//! SR/IR datasets, and the worst corrupted-data offset `|Phi_q theta* - Psi_q|`.

use std::io::Write;

use thiserror::Error;

use crate::dataset::{Dataset, DatasetRegistry};
use crate::gain::{GainError, GainLaw};
use crate::hybrid::{
    integrate, BlowUpGuard, HybridArc, HybridSystem, IntegrateError, IntegrateOptions,
    StopConditions, Termination, TimeMapDirection,
};
use crate::linalg::{dot, norm, sub};
use crate::signal::{chi, RegressorModel, SignalError, TrueSystem};
use crate::switching::{
    generate_switching, signal_from_arc, verify_daat, verify_dadt, AutomatonParams, SwitchReport,
    SwitchingError, SwitchingPolicy, SwitchingSignal,
};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("the sufficiently-rich mode set is empty")]
    EmptySufficientSet,
    #[error("convergence certificate requires lambda > 0, got {0}")]
    NegativeLambda(f64),
    #[error("weights must satisfy k_t >= 0 and k_r > 0, got k_t={k_t}, k_r={k_r}")]
    InvalidWeights { k_t: f64, k_r: f64 },
    #[error("initial gain must be finite and >= 1, got {0}")]
    InvalidInitialGain(f64),
    #[error("automaton partition disagrees with the registry partition")]
    PartitionMismatch,
    #[error("mode {0} has no dataset in the registry")]
    UnknownMode(usize),
    #[error("a finite horizon is required for laws without a blow-up time")]
    HorizonRequired,
    #[error("eps_stop must lie in [1e-9, 1), got {0}")]
    InvalidEpsStop(f64),
    #[error("diagnostics i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("diagnostics i/o failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("signal evaluation failed: {0}")]
    Signal(#[from] SignalError),
    #[error("gain evaluation failed: {0}")]
    Gain(#[from] GainError),
    #[error("arc query failed: {0}")]
    Arc(#[from] crate::hybrid::ArcError),
    #[error("switching failed: {0}")]
    Switching(#[from] SwitchingError),
    #[error("integration failed: {0}")]
    Integration(#[from] IntegrateError),
}

/// Everything a run needs: weights, gain law, automaton, datasets, the signal
/// model, and the initial estimate.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub k_t: f64,
    pub k_r: f64,
    pub law: GainLaw,
    pub mu0: f64,
    pub automaton: AutomatonParams,
    pub registry: DatasetRegistry,
    pub system: TrueSystem,
    pub regressor: RegressorModel,
    pub theta0: Vec<f64>,
}

/// Whether the dwell/activation parameters satisfy the certificate condition
/// `tau_a > 1 + varpi / (k_r alpha_low)`. A violated condition does not stop
/// runs — only the certificate is withheld.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateStatus {
    pub lambda: f64,
    pub condition_ok: bool,
    pub required_tau_a: f64,
    pub actual_tau_a: f64,
}

impl std::fmt::Display for CertificateStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.condition_ok {
            write!(
                f,
                "certificate condition satisfied: tau_a = {} > {:.4} (lambda = {:.6})",
                self.actual_tau_a, self.required_tau_a, self.lambda
            )
        } else {
            write!(
                f,
                "certificate condition violated: tau_a = {} <= {:.4} (lambda = {:.6}); \
                 runs remain possible, the convergence certificate does not apply",
                self.actual_tau_a, self.required_tau_a, self.lambda
            )
        }
    }
}

impl EstimatorConfig {
    pub fn dimension(&self) -> usize {
        self.registry.dimension()
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout {
            n: self.dimension(),
        }
    }

    /// Checks dimensions, weights, the nonempty-SR requirement, and partition
    /// consistency; reports (but does not refuse on) the certificate
    /// condition.
    pub fn validate(&self) -> Result<CertificateStatus, EstimatorError> {
        if !(self.k_t >= 0.0 && self.k_r > 0.0 && self.k_t.is_finite() && self.k_r.is_finite()) {
            return Err(EstimatorError::InvalidWeights {
                k_t: self.k_t,
                k_r: self.k_r,
            });
        }
        if !self.mu0.is_finite() || self.mu0 < 1.0 {
            return Err(EstimatorError::InvalidInitialGain(self.mu0));
        }
        let n = self.dimension();
        for got in [
            self.theta0.len(),
            self.system.dimension(),
            self.regressor.dimension(),
        ] {
            if got != n {
                return Err(EstimatorError::DimensionMismatch { expected: n, got });
            }
        }
        let registry_partition = self.registry.partition();
        if registry_partition.sufficiently_rich.is_empty() {
            return Err(EstimatorError::EmptySufficientSet);
        }
        if *self.automaton.partition() != registry_partition {
            return Err(EstimatorError::PartitionMismatch);
        }
        let constants = theorem_constants(self)?;
        Ok(CertificateStatus {
            lambda: constants.lambda,
            condition_ok: constants.certificate_ok,
            required_tau_a: 1.0 + constants.varpi / (self.k_r * constants.alpha_lower),
            actual_tau_a: self.automaton.tau_a(),
        })
    }
}

/// Index map of the closed-loop state vector
/// `[theta_1..theta_n, q, rho_d, rho_a, tau, mu]`.
#[derive(Debug, Clone, Copy)]
pub struct StateLayout {
    pub n: usize,
}

impl StateLayout {
    pub fn dim(&self) -> usize {
        self.n + 5
    }

    pub fn theta<'a>(&self, z: &'a [f64]) -> &'a [f64] {
        &z[..self.n]
    }

    pub fn q_index(&self) -> usize {
        self.n
    }

    pub fn rho_d_index(&self) -> usize {
        self.n + 1
    }

    pub fn rho_a_index(&self) -> usize {
        self.n + 2
    }

    pub fn tau_index(&self) -> usize {
        self.n + 3
    }

    pub fn mu_index(&self) -> usize {
        self.n + 4
    }

    pub fn mode(&self, z: &[f64]) -> usize {
        z[self.q_index()].round() as usize
    }
}

/// The learning map `Omega_q(theta, tau) = -k_t chi(theta, tau) - k_r (Phi_q theta - Psi_q)`.
/// With `k_t = 0` the real-time channel is skipped entirely (recorded-data-only
/// learning).
pub fn omega(
    cfg: &EstimatorConfig,
    theta: &[f64],
    tau: f64,
    ds: &Dataset,
) -> Result<Vec<f64>, EstimatorError> {
    if theta.len() != ds.dimension() {
        return Err(EstimatorError::DimensionMismatch {
            expected: ds.dimension(),
            got: theta.len(),
        });
    }
    let mut out = vec![0.0; theta.len()];
    if cfg.k_t != 0.0 {
        let c = chi(&cfg.system, &cfg.regressor, theta, tau)?;
        for (o, ci) in out.iter_mut().zip(&c) {
            *o -= cfg.k_t * ci;
        }
    }
    let r = ds
        .residual(theta)
        .map_err(|_| EstimatorError::DimensionMismatch {
            expected: ds.dimension(),
            got: theta.len(),
        })?;
    for (o, ri) in out.iter_mut().zip(&r) {
        *o -= cfg.k_r * ri;
    }
    Ok(out)
}

/// The surrogate error-system right-hand side
///
/// ```text
/// E_q(vartheta, tau, u) = -(k_t Xi(tau) + 1{q SR or IR} k_r Phi_q) vartheta + eta_q(tau, u)
/// eta_q = k_t phi(tau) u1 + k_r sum_k phi_{q,k} u2[k]   (q SR or IR)
/// eta_q = k_t phi(tau) u1 + k_r u3                      (q corrupted)
/// ```
///
/// Setting `u1 = d(tau)`, `u2[k] = d(t_{q,k})`, `u3 = Psi_q - Phi_q theta*`
/// recovers `Omega_q(theta* + vartheta, tau)` exactly.
pub fn error_rhs(
    cfg: &EstimatorConfig,
    vartheta: &[f64],
    tau: f64,
    q: usize,
    u1: f64,
    u2: &[f64],
    u3: &[f64],
) -> Result<Vec<f64>, EstimatorError> {
    let n = cfg.dimension();
    if vartheta.len() != n {
        return Err(EstimatorError::DimensionMismatch {
            expected: n,
            got: vartheta.len(),
        });
    }
    let ds = cfg.registry.get(q).ok_or(EstimatorError::UnknownMode(q))?;
    let corrupted = ds.classification().is_corrupted();
    let phi = cfg.regressor.phi(tau);

    // -(k_t Xi + 1 k_r Phi) vartheta, without forming Xi
    let mut out = vec![0.0; n];
    let phi_dot_v = dot(&phi, vartheta);
    for (o, p) in out.iter_mut().zip(&phi) {
        *o -= cfg.k_t * p * phi_dot_v;
    }
    if !corrupted {
        let pv = ds.data_matrix().matvec(vartheta);
        for (o, x) in out.iter_mut().zip(&pv) {
            *o -= cfg.k_r * x;
        }
    }

    // disturbance channels
    for (o, p) in out.iter_mut().zip(&phi) {
        *o += cfg.k_t * p * u1;
    }
    if corrupted {
        if u3.len() != n {
            return Err(EstimatorError::DimensionMismatch {
                expected: n,
                got: u3.len(),
            });
        }
        for (o, x) in out.iter_mut().zip(u3) {
            *o += cfg.k_r * x;
        }
    } else {
        if u2.len() != ds.samples().len() {
            return Err(EstimatorError::DimensionMismatch {
                expected: ds.samples().len(),
                got: u2.len(),
            });
        }
        for (sample, u) in ds.samples().iter().zip(u2) {
            for (o, p) in out.iter_mut().zip(&sample.phi) {
                *o += cfg.k_r * p * u;
            }
        }
    }
    Ok(out)
}

fn automaton_flow_bounds(params: &AutomatonParams, z: &[f64], layout: &StateLayout) -> bool {
    let q = layout.mode(z);
    params.partition().contains(q)
        && (-1e-9..=params.n0() + 1e-9).contains(&z[layout.rho_d_index()])
        && (-1e-9..=params.t0() + 1e-9).contains(&z[layout.rho_a_index()])
        && z[layout.mu_index()] >= 1.0 - 1e-9
}

/// Timer rates of the automaton block, scaled by `scale` (the gain in real
/// time, 1 in dilated time), at maximal admissible selection with upper caps.
fn automaton_rates(
    params: &AutomatonParams,
    z: &[f64],
    layout: &StateLayout,
    scale: f64,
    out: &mut [f64],
) {
    let q = layout.mode(z);
    out[layout.q_index()] = 0.0;
    out[layout.rho_d_index()] = if z[layout.rho_d_index()] < params.n0() {
        scale / params.tau_d()
    } else {
        0.0
    };
    out[layout.rho_a_index()] = if params.partition().drains_activation(q) {
        scale * (1.0 / params.tau_a() - 1.0)
    } else if z[layout.rho_a_index()] < params.t0() {
        scale / params.tau_a()
    } else {
        0.0
    };
}

fn schedule_trigger(
    jumps: Vec<(f64, usize)>,
    layout: StateLayout,
) -> (crate::hybrid::JumpPredicate, crate::hybrid::JumpMap) {
    let jumps2 = jumps.clone();
    (
        Box::new(move |z: &[f64], t: f64, j: usize| {
            j < jumps.len() && t >= jumps[j].0 && z[layout.rho_d_index()] >= 1.0 - 1e-9
        }),
        Box::new(move |z: &[f64], _t: f64, j: usize| {
            let mut next = z.to_vec();
            next[layout.q_index()] = jumps2[j].1 as f64;
            next[layout.rho_d_index()] = z[layout.rho_d_index()] - 1.0;
            next
        }),
    )
}

fn budget_projection(
    params: &AutomatonParams,
    layout: StateLayout,
) -> crate::hybrid::StateProjection {
    let n0 = params.n0();
    let t0 = params.t0();
    Box::new(move |z: &mut [f64]| {
        z[layout.rho_d_index()] = z[layout.rho_d_index()].min(n0);
        z[layout.rho_a_index()] = z[layout.rho_a_index()].min(t0);
    })
}

/// The closed loop in real time, jumping at the schedule's real jump times.
pub fn build_closed_loop(cfg: &EstimatorConfig, schedule: &SwitchingSignal) -> HybridSystem {
    let layout = cfg.layout();
    let params = cfg.automaton.clone();
    let params_flow = params.clone();
    let law = cfg.law;
    let cfg_flow = cfg.clone();
    let flow_rhs = Box::new(move |z: &[f64], _t: f64, out: &mut [f64]| {
        let layout = cfg_flow.layout();
        let mu = z[layout.mu_index()];
        let tau = z[layout.tau_index()];
        let q = layout.mode(z);
        match cfg_flow
            .registry
            .get(q)
            .ok_or(())
            .and_then(|ds| omega(&cfg_flow, layout.theta(z), tau, ds).map_err(|_| ()))
        {
            Ok(w) => {
                for (o, wi) in out.iter_mut().zip(&w) {
                    *o = mu * wi;
                }
            }
            Err(()) => out[..layout.n].fill(f64::NAN),
        }
        automaton_rates(&params_flow, z, &layout, mu, out);
        out[layout.tau_index()] = 1.0;
        out[layout.mu_index()] = law.rate(mu.max(1.0)).unwrap_or(f64::NAN);
    });
    let params_in = params.clone();
    let flow_in = Box::new(move |z: &[f64], _t: f64| automaton_flow_bounds(&params_in, z, &layout));
    let (jump_enabled, jump_map) = schedule_trigger(schedule.jumps().to_vec(), layout);
    HybridSystem {
        dimension: layout.dim(),
        flow_in,
        flow_rhs,
        jump_enabled,
        jump_map,
        post_flow: Some(budget_projection(&params, layout)),
    }
}

/// The target loop on the dilated clock, jumping at the schedule's dilated
/// jump times.
pub fn build_target_loop(
    cfg: &EstimatorConfig,
    schedule: &SwitchingSignal,
) -> Result<HybridSystem, EstimatorError> {
    let layout = cfg.layout();
    let params = cfg.automaton.clone();
    let params_flow = params.clone();
    let law = cfg.law;
    let mu0 = cfg.mu0;
    let cfg_flow = cfg.clone();
    let dilated_jumps = schedule
        .jumps()
        .iter()
        .map(|&(t, q)| Ok((law.dilate(mu0, t)?, q)))
        .collect::<Result<Vec<_>, GainError>>()?;
    let flow_rhs = Box::new(move |z: &[f64], _s: f64, out: &mut [f64]| {
        let layout = cfg_flow.layout();
        let mu_hat = z[layout.mu_index()];
        let tau = z[layout.tau_index()];
        let q = layout.mode(z);
        match cfg_flow
            .registry
            .get(q)
            .ok_or(())
            .and_then(|ds| omega(&cfg_flow, layout.theta(z), tau, ds).map_err(|_| ()))
        {
            Ok(w) => out[..layout.n].copy_from_slice(&w),
            Err(()) => out[..layout.n].fill(f64::NAN),
        }
        automaton_rates(&params_flow, z, &layout, 1.0, out);
        out[layout.tau_index()] = 1.0 / mu_hat;
        out[layout.mu_index()] = law.dilated_rate(mu_hat.max(1.0)).unwrap_or(f64::NAN);
    });
    let params_in = params.clone();
    let flow_in = Box::new(move |z: &[f64], _s: f64| automaton_flow_bounds(&params_in, z, &layout));
    let (jump_enabled, jump_map) = schedule_trigger(dilated_jumps, layout);
    Ok(HybridSystem {
        dimension: layout.dim(),
        flow_in,
        flow_rhs,
        jump_enabled,
        jump_map,
        post_flow: Some(budget_projection(&params, layout)),
    })
}

/// Which clock the integration runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    DirectTime,
    DilatedTime,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Step in the integration variable.
    pub dt: f64,
    /// Stop fraction in front of the blow-up time.
    pub eps_stop: f64,
    /// Real-time horizon; optional for blow-up laws (the guard stops the
    /// run), required otherwise.
    pub horizon: Option<f64>,
    /// Integration clock; defaults to dilated time for blow-up laws and
    /// direct time otherwise.
    pub mode: Option<RunMode>,
    pub j_max: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            dt: 1e-3,
            eps_stop: 0.01,
            horizon: None,
            mode: None,
            j_max: None,
        }
    }
}

/// A finished run: the real-time arc (plus the dilated-time arc when that
/// clock was integrated), the realized switching signal with its constraint
/// reports, and the certificate status.
#[derive(Debug)]
pub struct RunResult {
    pub mode: RunMode,
    pub arc: HybridArc,
    pub dilated_arc: Option<HybridArc>,
    pub signal: SwitchingSignal,
    pub dadt: SwitchReport,
    pub daat: SwitchReport,
    pub certificate: CertificateStatus,
}

impl RunResult {
    /// `(t, j, |theta - theta*|)` at every stored sample of the real-time arc.
    pub fn error_trace(&self, theta_star: &[f64]) -> Vec<(f64, usize, f64)> {
        let n = theta_star.len();
        let mut trace = Vec::new();
        for seg in &self.arc.segments {
            for (t, z) in &seg.samples {
                trace.push((*t, seg.j, norm(&sub(&z[..n], theta_star))));
            }
        }
        trace
    }

    pub fn final_error(&self, theta_star: &[f64]) -> f64 {
        let z = self.arc.end_state();
        norm(&sub(&z[..theta_star.len()], theta_star))
    }
}

/// Generates the switching schedule from the policy, integrates the loop on
/// the chosen clock, and verifies the realized signal against both switching
/// constraints.
pub fn run(
    cfg: &EstimatorConfig,
    policy: &SwitchingPolicy,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunResult, EstimatorError> {
    let certificate = cfg.validate()?;
    if !(opts.eps_stop >= 1e-9 && opts.eps_stop < 1.0) {
        return Err(EstimatorError::InvalidEpsStop(opts.eps_stop));
    }
    let layout = cfg.layout();

    // end of the run in real time
    let blow_up = cfg.law.blow_up_time(cfg.mu0);
    let t_end = if blow_up.is_finite() {
        let guarded = (1.0 - opts.eps_stop) * blow_up;
        opts.horizon.map_or(guarded, |h| h.min(guarded))
    } else {
        opts.horizon.ok_or(EstimatorError::HorizonRequired)?
    };
    let s_end = cfg.law.dilate(cfg.mu0, t_end)?;

    let schedule = generate_switching(&cfg.automaton, &cfg.law, cfg.mu0, policy, seed, s_end)?;
    let mode = opts.mode.unwrap_or(if cfg.law.has_finite_blow_up() {
        RunMode::DilatedTime
    } else {
        RunMode::DirectTime
    });

    let mut z0 = vec![0.0; layout.dim()];
    z0[..layout.n].copy_from_slice(&cfg.theta0);
    z0[layout.q_index()] = schedule.initial_mode() as f64;
    z0[layout.rho_d_index()] = cfg.automaton.n0();
    z0[layout.rho_a_index()] = cfg.automaton.t0();
    z0[layout.tau_index()] = 0.0;
    z0[layout.mu_index()] = cfg.mu0;

    let (arc, dilated_arc) = match mode {
        RunMode::DirectTime => {
            let sys = build_closed_loop(cfg, &schedule);
            let stop = StopConditions {
                horizon: opts
                    .horizon
                    .unwrap_or(if blow_up.is_finite() { blow_up } else { t_end }),
                j_max: opts.j_max,
                blow_up: blow_up.is_finite().then_some(BlowUpGuard {
                    time: blow_up,
                    eps_stop: opts.eps_stop,
                }),
                converge: None,
            };
            let arc = integrate(&sys, &z0, &IntegrateOptions::new(opts.dt, stop))?;
            (arc, None)
        }
        RunMode::DilatedTime => {
            let sys = build_target_loop(cfg, &schedule)?;
            let stop = StopConditions {
                horizon: s_end,
                j_max: opts.j_max,
                blow_up: None,
                converge: None,
            };
            let dilated = integrate(&sys, &z0, &IntegrateOptions::new(opts.dt, stop))?;
            let mut real = dilated.map_time(&cfg.law, cfg.mu0, TimeMapDirection::ToReal)?;
            // reaching the dilated horizon means reaching the blow-up guard
            // in real time
            if real.termination == Termination::HorizonReached
                && cfg.law.has_finite_blow_up()
                && opts.horizon.is_none()
            {
                real.termination = Termination::BlowUpGuard;
            }
            (real, Some(dilated))
        }
    };

    let signal = signal_from_arc(&arc, layout.q_index())?;
    let dadt = verify_dadt(
        &signal,
        &cfg.law,
        cfg.mu0,
        cfg.automaton.tau_d(),
        cfg.automaton.n0(),
    )?;
    let daat = verify_daat(
        &signal,
        &cfg.law,
        cfg.mu0,
        cfg.automaton.tau_a(),
        cfg.automaton.t0(),
        cfg.automaton.partition(),
    )?;
    Ok(RunResult {
        mode,
        arc,
        dilated_arc,
        signal,
        dadt,
        daat,
        certificate,
    })
}

/// The computable constants of the convergence certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremConstants {
    /// `min_{q SR} alpha_q`.
    pub alpha_lower: f64,
    /// `kappa_low = k_r * alpha_lower`.
    pub kappa_lower: f64,
    /// `varpi = 1 + k_r * max_{q corrupted} |Phi_q|` (spectral norm; 1 when
    /// no dataset is corrupted).
    pub varpi: f64,
    /// `zeta = (kappa_low + varpi) / tau_a`.
    pub zeta: f64,
    /// `lambda = kappa_low - zeta`; positive iff the certificate applies.
    pub lambda: f64,
    /// Lower quadratic bound, 1/2.
    pub c_lower: f64,
    /// Upper quadratic bound `e^{(varpi + kappa_low) T0} / 2`.
    pub c_upper: f64,
    /// Input gain of the disturbance channels:
    /// `k_t B_phi + k_r max(1, max_{q SR or IR} sum_k |phi_{q,k}|)`.
    pub eta_bar: f64,
    /// `gamma = c_upper * eta_bar^2 / min(1, kappa_low)`.
    pub gamma: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub certificate_ok: bool,
}

impl std::fmt::Display for TheoremConstants {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "alpha_lower = {:.9}", self.alpha_lower)?;
        writeln!(f, "kappa_lower = {:.9}", self.kappa_lower)?;
        writeln!(f, "varpi       = {:.9}", self.varpi)?;
        writeln!(f, "zeta        = {:.9}", self.zeta)?;
        writeln!(f, "lambda      = {:.9}", self.lambda)?;
        writeln!(f, "c_lower     = {:.9}", self.c_lower)?;
        writeln!(f, "c_upper     = {:.9}", self.c_upper)?;
        writeln!(f, "eta_bar     = {:.9}", self.eta_bar)?;
        writeln!(f, "gamma       = {:.9}", self.gamma)?;
        writeln!(f, "kappa1      = {:.9}", self.kappa1)?;
        writeln!(f, "kappa2      = {:.9}", self.kappa2)?;
        writeln!(f, "kappa3      = {:.9}", self.kappa3)?;
        write!(
            f,
            "certificate {}",
            if self.certificate_ok {
                "VALID (lambda > 0)"
            } else {
                "FAILED (lambda <= 0)"
            }
        )
    }
}

/// Computes the certificate constants from the configuration. Requires a
/// nonempty SR set; a violated rate condition is reported through
/// `certificate_ok` (and a non-finite `kappa3`) rather than an error.
pub fn theorem_constants(cfg: &EstimatorConfig) -> Result<TheoremConstants, EstimatorError> {
    let partition = cfg.registry.partition();
    if partition.sufficiently_rich.is_empty() {
        return Err(EstimatorError::EmptySufficientSet);
    }
    let alpha_lower = partition
        .sufficiently_rich
        .iter()
        .filter_map(|q| {
            cfg.registry
                .get(*q)
                .and_then(|d| d.classification().alpha())
        })
        .fold(f64::INFINITY, f64::min);
    let kappa_lower = cfg.k_r * alpha_lower;
    let worst_corrupt_norm = partition
        .corrupted
        .iter()
        .filter_map(|q| {
            cfg.registry
                .get(*q)
                .map(|d| d.data_matrix().spectral_norm())
        })
        .fold(0.0, f64::max);
    let varpi = 1.0 + cfg.k_r * worst_corrupt_norm;
    let tau_a = cfg.automaton.tau_a();
    let tau_d = cfg.automaton.tau_d();
    let t0 = cfg.automaton.t0();
    let n0 = cfg.automaton.n0();
    let zeta = (kappa_lower + varpi) / tau_a;
    let lambda = kappa_lower - zeta;
    let c_lower = 0.5;
    let c_upper = ((varpi + kappa_lower) * t0).exp() / 2.0;
    let recorded_gain = partition
        .sufficiently_rich
        .iter()
        .chain(&partition.insufficiently_rich)
        .filter_map(|q| cfg.registry.get(*q))
        .map(|d| d.samples().iter().map(|s| norm(&s.phi)).sum::<f64>())
        .fold(0.0, f64::max);
    let eta_bar = cfg.k_t * cfg.regressor.phi_bound() + cfg.k_r * recorded_gain.max(1.0);
    let gamma = c_upper * eta_bar * eta_bar / kappa_lower.min(1.0);
    let kappa2 = lambda / 4.0 * tau_d / (1.0 + tau_d);
    let kappa1 = (kappa2 * (varpi + kappa_lower) * t0 / 2.0 * n0).exp();
    let kappa3 = if lambda > 0.0 {
        2.0 * (gamma / lambda).sqrt()
    } else {
        f64::NAN
    };
    Ok(TheoremConstants {
        alpha_lower,
        kappa_lower,
        varpi,
        zeta,
        lambda,
        c_lower,
        c_upper,
        eta_bar,
        gamma,
        kappa1,
        kappa2,
        kappa3,
        certificate_ok: lambda > 0.0,
    })
}

/// The aggregate input magnitude `sup|u|` for the certificate: the real-time
/// disturbance bound, the noise stored in the SR/IR datasets (recovered from
/// their samples), and the worst corrupted-dataset offset, stacked
/// euclideanly.
pub fn input_sup(cfg: &EstimatorConfig) -> f64 {
    let partition = cfg.registry.partition();
    let theta_star = cfg.system.theta_star();
    let d_bar = cfg.system.disturbance_bound();
    let mut recorded_sq = 0.0;
    for q in partition
        .sufficiently_rich
        .iter()
        .chain(&partition.insufficiently_rich)
    {
        if let Some(ds) = cfg.registry.get(*q) {
            for s in ds.samples() {
                let noise = s.psi - dot(&s.phi, theta_star);
                recorded_sq += noise * noise;
            }
        }
    }
    let corrupt = partition
        .corrupted
        .iter()
        .filter_map(|q| {
            cfg.registry
                .get(*q)
                .map(|d| d.corruption_offset(theta_star))
        })
        .fold(0.0, f64::max);
    (d_bar * d_bar + recorded_sq + corrupt * corrupt).sqrt()
}

/// The certificate envelope
/// `kappa1 |vartheta0| e^{-kappa2 (D(t) + j)} + kappa3 sup|u|`.
#[derive(Debug, Clone, Copy)]
pub struct BoundCurve {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub law: GainLaw,
    pub mu0: f64,
    pub vartheta0_norm: f64,
    pub u_sup: f64,
}

impl BoundCurve {
    pub fn eval(&self, t: f64, j: usize) -> Result<f64, GainError> {
        let s = self.law.dilate(self.mu0, t)?;
        Ok(
            self.kappa1 * self.vartheta0_norm * (-self.kappa2 * (s + j as f64)).exp()
                + self.kappa3 * self.u_sup,
        )
    }
}

/// Builds the bound envelope; fails when the certificate condition is
/// violated (`lambda <= 0`).
pub fn bound_curve(
    constants: &TheoremConstants,
    law: &GainLaw,
    mu0: f64,
    vartheta0_norm: f64,
    u_sup: f64,
) -> Result<BoundCurve, EstimatorError> {
    if !constants.certificate_ok {
        return Err(EstimatorError::NegativeLambda(constants.lambda));
    }
    Ok(BoundCurve {
        kappa1: constants.kappa1,
        kappa2: constants.kappa2,
        kappa3: constants.kappa3,
        law: *law,
        mu0,
        vartheta0_norm,
        u_sup,
    })
}

/// Result of checking an arc against the bound envelope at every stored
/// sample.
#[derive(Debug, Clone, Copy)]
pub struct BoundCheck {
    pub ok: bool,
    /// Minimal `bound - error` over all samples.
    pub worst_margin: f64,
    /// Hybrid time of the tightest sample.
    pub at: (f64, usize),
}

pub fn check_bound(
    arc: &HybridArc,
    theta_star: &[f64],
    bound: &BoundCurve,
) -> Result<BoundCheck, EstimatorError> {
    let n = theta_star.len();
    let mut worst = f64::INFINITY;
    let mut at = (0.0, 0usize);
    for seg in &arc.segments {
        for (t, z) in &seg.samples {
            let err = norm(&sub(&z[..n], theta_star));
            let margin = bound.eval(*t, seg.j)? - err;
            if margin < worst {
                worst = margin;
                at = (*t, seg.j);
            }
        }
    }
    Ok(BoundCheck {
        ok: worst >= 0.0,
        worst_margin: worst,
        at,
    })
}

/// One sample of the Lyapunov pair: `W = |theta - theta*|^2 / 2` and
/// `V = W e^{(kappa_low + varpi) rho_a}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovSample {
    pub t: f64,
    pub j: usize,
    pub w: f64,
    pub v: f64,
}

/// Evaluates the Lyapunov diagnostics along an arc (in whichever clock the
/// arc is indexed). `V` never increases across jumps; along dilated-time
/// flows it decreases whenever the certificate condition holds and the
/// inputs vanish.
pub fn lyapunov_diagnostics(
    cfg: &EstimatorConfig,
    arc: &HybridArc,
) -> Result<Vec<LyapunovSample>, EstimatorError> {
    let constants = theorem_constants(cfg)?;
    let layout = cfg.layout();
    let theta_star = cfg.system.theta_star();
    let mut out = Vec::new();
    for seg in &arc.segments {
        for (t, z) in &seg.samples {
            let err = norm(&sub(&z[..layout.n], theta_star));
            let w = 0.5 * err * err;
            let xi = (constants.kappa_lower + constants.varpi) * z[layout.rho_a_index()];
            out.push(LyapunovSample {
                t: *t,
                j: seg.j,
                w,
                v: w * xi.exp(),
            });
        }
    }
    Ok(out)
}

/// Writes run diagnostics as CSV with columns
/// `t,j,s,theta_1..theta_n,err,mu,q,rho_d,rho_a,W,V,bound`.
pub fn write_diagnostics_csv<W: Write>(
    cfg: &EstimatorConfig,
    result: &RunResult,
    bound: Option<&BoundCurve>,
    out: W,
) -> Result<(), EstimatorError> {
    let constants = theorem_constants(cfg)?;
    let layout = cfg.layout();
    let theta_star = cfg.system.theta_star();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "j".to_string(), "s".to_string()];
    header.extend((1..=layout.n).map(|i| format!("theta_{i}")));
    header.extend(["err", "mu", "q", "rho_d", "rho_a", "W", "V", "bound"].map(String::from));
    w.write_record(&header)?;
    for seg in &result.arc.segments {
        for (t, z) in &seg.samples {
            let s = cfg.law.dilate(cfg.mu0, *t)?;
            let err = norm(&sub(&z[..layout.n], theta_star));
            let quad = 0.5 * err * err;
            let xi = (constants.kappa_lower + constants.varpi) * z[layout.rho_a_index()];
            let mut row = vec![format!("{t}"), format!("{}", seg.j), format!("{s}")];
            row.extend(z[..layout.n].iter().map(|x| format!("{x}")));
            row.push(format!("{err}"));
            row.push(format!("{}", z[layout.mu_index()]));
            row.push(format!("{}", layout.mode(z)));
            row.push(format!("{}", z[layout.rho_d_index()]));
            row.push(format!("{}", z[layout.rho_a_index()]));
            row.push(format!("{quad}"));
            row.push(format!("{}", quad * xi.exp()));
            row.push(match bound {
                Some(b) => format!("{}", b.eval(*t, seg.j)?),
                None => String::new(),
            });
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
