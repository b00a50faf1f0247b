//! The data-querying automaton and its switching-signal constraints.
//!
//! Mode switches are governed by two timers: a dwell budget `rho_d` in
//! `[0, N0]` (a jump costs 1, the budget recharges at rate `mu/tau_d`) and an
//! activation budget `rho_a` in `[0, T0]` (drained at rate `mu (1 - 1/tau_a)`
//! while an insufficiently-rich or corrupted dataset is active, recharged at
//! `mu/tau_a` otherwise). Because all rates carry the dynamic gain `mu`, the
//! budgets run on the dilated clock: in dilated time they reduce to classical
//! average dwell-time and activation-time bookkeeping, which is why signals
//! are generated in dilated time and mapped back through the contraction.
//!
//! Any arc of the automaton satisfies, for all `t2 >= t1` and the dilation
//! `D = D_{mu0,ell}`:
//!
//! ```text
//! D-ADT:  jumps in (t1, t2]                   <= (D(t2) - D(t1)) / tau_d + N0
//! D-AAT:  int_{t1}^{t2} mu(t) 1{q drains} dt  <= (D(t2) - D(t1)) / tau_a + T0
//! ```
//!
//! The verifiers check exactly these pair inequalities. The activation
//! integral is evaluated in closed form as a sum of dilation differences over
//! draining subintervals, valid because `dD/dt = mu(t)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::ModePartition;
use crate::gain::{GainError, GainLaw};
use crate::hybrid::HybridSystem;

/// Constraint slack at least this negative counts as a violation; anything
/// above absorbs round-off in dilation evaluations.
pub const PASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SwitchingError {
    #[error("invalid automaton parameters: {0}")]
    InvalidParams(String),
    #[error("invalid switching signal: {0}")]
    InvalidSignal(String),
    #[error("mode {0} is not in the registry partition")]
    UnknownMode(usize),
    #[error("policy infeasible at dilated time {at}: {reason}")]
    PolicyInfeasible { at: f64, reason: String },
    #[error("the sufficiently-rich mode set is empty")]
    EmptySufficientSet,
    #[error("time mapping failed: {0}")]
    TimeMapping(#[from] GainError),
}

/// Tunable parameters of the data-querying automaton, together with the mode
/// partition they police.
#[derive(Debug, Clone)]
pub struct AutomatonParams {
    tau_d: f64,
    tau_a: f64,
    n0: f64,
    t0: f64,
    partition: ModePartition,
}

impl AutomatonParams {
    pub fn new(
        tau_d: f64,
        tau_a: f64,
        n0: f64,
        t0: f64,
        partition: ModePartition,
    ) -> Result<Self, SwitchingError> {
        if !(tau_d.is_finite() && tau_d > 0.0) {
            return Err(SwitchingError::InvalidParams(format!(
                "tau_d must be > 0, got {tau_d}"
            )));
        }
        if !(tau_a.is_finite() && tau_a > 1.0) {
            return Err(SwitchingError::InvalidParams(format!(
                "tau_a must be > 1, got {tau_a}"
            )));
        }
        if !(n0.is_finite() && n0 >= 1.0) {
            return Err(SwitchingError::InvalidParams(format!(
                "n0 must be >= 1, got {n0}"
            )));
        }
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(SwitchingError::InvalidParams(format!(
                "t0 must be > 0, got {t0}"
            )));
        }
        if partition.all_modes().is_empty() {
            return Err(SwitchingError::InvalidParams(
                "mode partition is empty".into(),
            ));
        }
        Ok(AutomatonParams {
            tau_d,
            tau_a,
            n0,
            t0,
            partition,
        })
    }

    pub fn tau_d(&self) -> f64 {
        self.tau_d
    }

    pub fn tau_a(&self) -> f64 {
        self.tau_a
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn partition(&self) -> &ModePartition {
        &self.partition
    }
}

/// Automaton state `(q, rho_d, rho_a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutomatonState {
    pub q: usize,
    pub rho_d: f64,
    pub rho_a: f64,
}

impl AutomatonState {
    /// Full budgets in the given mode — the most permissive admissible start.
    pub fn fresh(params: &AutomatonParams, q: usize) -> Result<Self, SwitchingError> {
        if !params.partition().contains(q) {
            return Err(SwitchingError::UnknownMode(q));
        }
        Ok(AutomatonState {
            q,
            rho_d: params.n0(),
            rho_a: params.t0(),
        })
    }

    pub fn is_valid(&self, params: &AutomatonParams) -> bool {
        params.partition().contains(self.q)
            && (0.0..=params.n0() + 1e-12).contains(&self.rho_d)
            && (0.0..=params.t0() + 1e-12).contains(&self.rho_a)
    }
}

/// A switching signal as a hybrid arc of modes: the initial mode, the ordered
/// `(time, new mode)` jumps, and the horizon it is defined on. Times are in
/// real time.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingSignal {
    initial_mode: usize,
    jumps: Vec<(f64, usize)>,
    horizon: f64,
}

impl SwitchingSignal {
    pub fn new(
        initial_mode: usize,
        jumps: Vec<(f64, usize)>,
        horizon: f64,
    ) -> Result<Self, SwitchingError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(SwitchingError::InvalidSignal(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        let mut previous_time = -f64::EPSILON;
        let mut previous_mode = initial_mode;
        for &(t, mode) in &jumps {
            if !(t.is_finite() && t >= 0.0 && t > previous_time) {
                return Err(SwitchingError::InvalidSignal(format!(
                    "jump times must be strictly increasing and nonnegative (offending time {t})"
                )));
            }
            if t >= horizon {
                return Err(SwitchingError::InvalidSignal(format!(
                    "jump at {t} is not before the horizon {horizon}"
                )));
            }
            if mode == previous_mode {
                return Err(SwitchingError::InvalidSignal(format!(
                    "jump at {t} does not change the mode ({mode})"
                )));
            }
            previous_time = t;
            previous_mode = mode;
        }
        Ok(SwitchingSignal {
            initial_mode,
            jumps,
            horizon,
        })
    }

    pub fn initial_mode(&self) -> usize {
        self.initial_mode
    }

    pub fn jumps(&self) -> &[(f64, usize)] {
        &self.jumps
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Active mode at time `t` (right-continuous: at a jump instant the new
    /// mode is already active).
    pub fn mode_at(&self, t: f64) -> usize {
        let idx = self.jumps.partition_point(|(tj, _)| *tj <= t);
        if idx == 0 {
            self.initial_mode
        } else {
            self.jumps[idx - 1].1
        }
    }
}

/// How the next dataset and the time until the next switch are chosen.
/// Dwells are expressed in dilated time, where the budget arithmetic is exact.
#[derive(Debug, Clone)]
pub enum SwitchingPolicy {
    /// Follow a fixed script: start in `initial_mode`, dwell for the listed
    /// dilated durations, jumping to the listed next mode after each. After
    /// the last step the signal holds the final mode.
    Scripted {
        initial_mode: usize,
        steps: Vec<ScriptStep>,
    },
    /// Draw dwells uniformly from `[min_dwell, max_dwell]` and next modes
    /// from the weighted list (excluding the current mode), deterministically
    /// from the seed. Draining modes are entered only when the activation and
    /// dwell budgets cover the planned visit; otherwise a sufficiently-rich
    /// mode is used instead.
    SeededRandom {
        initial_mode: usize,
        min_dwell: f64,
        max_dwell: f64,
        weights: Vec<(usize, f64)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptStep {
    /// Dilated time spent in the current mode before this jump.
    pub dwell: f64,
    /// Mode jumped to afterwards.
    pub next_mode: usize,
}

impl ScriptStep {
    pub fn new(dwell: f64, next_mode: usize) -> Self {
        ScriptStep { dwell, next_mode }
    }
}

/// Dilated-time budget bookkeeping shared by the generator paths.
struct BudgetLedger<'a> {
    params: &'a AutomatonParams,
    s: f64,
    mode: usize,
    rho_d: f64,
    rho_a: f64,
}

impl<'a> BudgetLedger<'a> {
    fn new(params: &'a AutomatonParams, mode: usize) -> Result<Self, SwitchingError> {
        if !params.partition().contains(mode) {
            return Err(SwitchingError::UnknownMode(mode));
        }
        Ok(BudgetLedger {
            params,
            s: 0.0,
            mode,
            rho_d: params.n0(),
            rho_a: params.t0(),
        })
    }

    fn drains(&self) -> bool {
        self.params.partition().drains_activation(self.mode)
    }

    /// Longest dilated stay the activation budget allows in the current mode.
    fn max_stay(&self) -> f64 {
        if self.drains() {
            self.rho_a * self.params.tau_a() / (self.params.tau_a() - 1.0)
        } else {
            f64::INFINITY
        }
    }

    fn flow(&mut self, dwell: f64) -> Result<(), SwitchingError> {
        if dwell < 0.0 {
            return Err(SwitchingError::PolicyInfeasible {
                at: self.s,
                reason: format!("negative dwell {dwell}"),
            });
        }
        if self.drains() {
            let drained = dwell * (1.0 - 1.0 / self.params.tau_a());
            if self.rho_a - drained < -1e-12 {
                return Err(SwitchingError::PolicyInfeasible {
                    at: self.s,
                    reason: format!(
                        "activation budget exhausted: dwell {dwell} in draining mode {} needs {} but only {} remains",
                        self.mode, drained, self.rho_a
                    ),
                });
            }
            self.rho_a = (self.rho_a - drained).max(0.0);
        } else {
            self.rho_a = (self.rho_a + dwell / self.params.tau_a()).min(self.params.t0());
        }
        self.rho_d = (self.rho_d + dwell / self.params.tau_d()).min(self.params.n0());
        self.s += dwell;
        Ok(())
    }

    fn jump(&mut self, next_mode: usize) -> Result<(), SwitchingError> {
        if !self.params.partition().contains(next_mode) {
            return Err(SwitchingError::UnknownMode(next_mode));
        }
        if next_mode == self.mode {
            return Err(SwitchingError::PolicyInfeasible {
                at: self.s,
                reason: format!("jump must change the mode (stayed in {next_mode})"),
            });
        }
        if self.rho_d < 1.0 - 1e-12 {
            return Err(SwitchingError::PolicyInfeasible {
                at: self.s,
                reason: format!("dwell budget {} below 1 at a scheduled jump", self.rho_d),
            });
        }
        self.rho_d -= 1.0;
        self.mode = next_mode;
        Ok(())
    }
}

/// Generates an admissible switching signal: jump times are laid out in
/// dilated time against the budget ledger, then mapped to real time through
/// the contraction. The returned signal passes both verifiers by
/// construction; scripted policies that overrun a budget are rejected.
pub fn generate_switching(
    params: &AutomatonParams,
    law: &GainLaw,
    mu0: f64,
    policy: &SwitchingPolicy,
    seed: u64,
    dilated_horizon: f64,
) -> Result<SwitchingSignal, SwitchingError> {
    if params.partition().sufficiently_rich.is_empty() {
        return Err(SwitchingError::EmptySufficientSet);
    }
    if !(dilated_horizon.is_finite() && dilated_horizon > 0.0) {
        return Err(SwitchingError::InvalidSignal(format!(
            "dilated horizon must be positive and finite, got {dilated_horizon}"
        )));
    }

    let mut dilated_jumps: Vec<(f64, usize)> = Vec::new();
    match policy {
        SwitchingPolicy::Scripted {
            initial_mode,
            steps,
        } => {
            let mut ledger = BudgetLedger::new(params, *initial_mode)?;
            for step in steps {
                if !(step.dwell.is_finite() && step.dwell > 0.0) {
                    return Err(SwitchingError::PolicyInfeasible {
                        at: ledger.s,
                        reason: format!("scripted dwell must be positive, got {}", step.dwell),
                    });
                }
                if ledger.s + step.dwell >= dilated_horizon {
                    // the horizon truncates the script inside this dwell
                    let remaining = dilated_horizon - ledger.s;
                    ledger.flow(remaining)?;
                    break;
                }
                ledger.flow(step.dwell)?;
                ledger.jump(step.next_mode)?;
                dilated_jumps.push((ledger.s, step.next_mode));
            }
            if ledger.s < dilated_horizon {
                // hold the final mode to the horizon
                ledger.flow(dilated_horizon - ledger.s)?;
            }
        }
        SwitchingPolicy::SeededRandom {
            initial_mode,
            min_dwell,
            max_dwell,
            weights,
        } => {
            if !(min_dwell.is_finite() && *min_dwell > 0.0 && max_dwell >= min_dwell) {
                return Err(SwitchingError::InvalidSignal(format!(
                    "dwell range [{min_dwell}, {max_dwell}] is invalid"
                )));
            }
            if weights.iter().any(|(_, w)| !w.is_finite() || *w < 0.0) {
                return Err(SwitchingError::InvalidSignal("negative mode weight".into()));
            }
            for (q, _) in weights {
                if !params.partition().contains(*q) {
                    return Err(SwitchingError::UnknownMode(*q));
                }
            }
            let mut ledger = BudgetLedger::new(params, *initial_mode)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            loop {
                let mut dwell = rng.gen_range(*min_dwell..=*max_dwell);
                // never overrun the activation budget of the current mode
                let cap = ledger.max_stay();
                if dwell > cap {
                    dwell = cap;
                }
                if ledger.s + dwell >= dilated_horizon {
                    ledger.flow((dilated_horizon - ledger.s).min(cap))?;
                    break;
                }
                ledger.flow(dwell)?;
                // wait (in a non-draining mode) until a jump is affordable
                if ledger.rho_d < 1.0 && !ledger.drains() {
                    let wait = (1.0 - ledger.rho_d) * params.tau_d() + 1e-12;
                    if ledger.s + wait >= dilated_horizon {
                        ledger.flow(dilated_horizon - ledger.s)?;
                        break;
                    }
                    ledger.flow(wait)?;
                }
                let next = draw_next_mode(&mut rng, params, &ledger, weights, *min_dwell)?;
                ledger.jump(next)?;
                dilated_jumps.push((ledger.s, next));
            }
        }
    }

    let initial_mode = match policy {
        SwitchingPolicy::Scripted { initial_mode, .. } => *initial_mode,
        SwitchingPolicy::SeededRandom { initial_mode, .. } => *initial_mode,
    };
    let jumps = dilated_jumps
        .into_iter()
        .map(|(s, q)| Ok((law.contract(mu0, s)?, q)))
        .collect::<Result<Vec<_>, GainError>>()?;
    let horizon = law.contract(mu0, dilated_horizon)?;
    SwitchingSignal::new(initial_mode, jumps, horizon)
}

/// Weighted draw of the next mode, excluding the current one. Draining modes
/// are only eligible when the budgets cover a minimum-dwell visit and the
/// exit jump after it; when no candidate survives, falls back to a
/// sufficiently-rich mode.
fn draw_next_mode(
    rng: &mut ChaCha8Rng,
    params: &AutomatonParams,
    ledger: &BudgetLedger,
    weights: &[(usize, f64)],
    min_dwell: f64,
) -> Result<usize, SwitchingError> {
    let drain_affordable = |q: usize| {
        if !params.partition().drains_activation(q) {
            return true;
        }
        // entering costs 1 dwell unit now; the visit must leave >= 1 dwell
        // budget at exit without waiting inside the draining mode, and the
        // activation budget must cover the stay
        let rho_d_at_exit = (ledger.rho_d - 1.0 + min_dwell / params.tau_d()).min(params.n0());
        let activation_cost = min_dwell * (1.0 - 1.0 / params.tau_a());
        rho_d_at_exit >= 1.0 + 1e-9 && ledger.rho_a >= activation_cost + 1e-9
    };
    let candidates: Vec<(usize, f64)> = weights
        .iter()
        .copied()
        .filter(|(q, w)| *q != ledger.mode && *w > 0.0 && drain_affordable(*q))
        .collect();
    let pool: Vec<(usize, f64)> = if candidates.is_empty() {
        params
            .partition()
            .sufficiently_rich
            .iter()
            .filter(|q| **q != ledger.mode)
            .map(|q| (*q, 1.0))
            .collect()
    } else {
        candidates
    };
    if pool.is_empty() {
        return Err(SwitchingError::PolicyInfeasible {
            at: ledger.s,
            reason: "no admissible next mode".into(),
        });
    }
    let total: f64 = pool.iter().map(|(_, w)| w).sum();
    let mut pick = rng.gen_range(0.0..total);
    for (q, w) in &pool {
        pick -= w;
        if pick <= 0.0 {
            return Ok(*q);
        }
    }
    Ok(pool.last().expect("pool nonempty").0)
}

/// Outcome of a D-ADT or D-AAT check: the minimal slack over all interval
/// pairs and, on failure, the violating pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchReport {
    pub constraint: &'static str,
    pub ok: bool,
    pub worst_margin: f64,
    pub witness: Option<ConstraintWitness>,
}

/// An interval `[t_start, t_end]` on which the constraint is tightest:
/// `observed` must stay below `allowed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintWitness {
    pub t_start: f64,
    pub t_end: f64,
    pub observed: f64,
    pub allowed: f64,
}

impl std::fmt::Display for SwitchReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.ok {
            write!(
                f,
                "{}: PASS (worst margin {:.6})",
                self.constraint, self.worst_margin
            )
        } else {
            let w = self
                .witness
                .as_ref()
                .expect("failed reports carry a witness");
            write!(
                f,
                "{}: FAIL (margin {:.6} on [{:.6}, {:.6}]: observed {:.6} > allowed {:.6})",
                self.constraint, self.worst_margin, w.t_start, w.t_end, w.observed, w.allowed
            )
        }
    }
}

/// Event grid shared by both verifiers: dilated times of `0`, every jump, and
/// the horizon, plus the mode active on each interval.
struct EventGrid {
    real_times: Vec<f64>,
    dilated_times: Vec<f64>,
    /// cumulative jump count up to and including event i
    jumps_to: Vec<usize>,
    /// mode on the interval starting at event i
    interval_mode: Vec<usize>,
}

fn event_grid(sig: &SwitchingSignal, law: &GainLaw, mu0: f64) -> Result<EventGrid, SwitchingError> {
    let mut real_times = vec![0.0];
    let mut jumps_to = vec![0usize];
    let mut interval_mode = vec![sig.initial_mode()];
    for (k, &(t, q)) in sig.jumps().iter().enumerate() {
        real_times.push(t);
        jumps_to.push(k + 1);
        interval_mode.push(q);
    }
    real_times.push(sig.horizon());
    jumps_to.push(sig.jump_count());
    let dilated_times = real_times
        .iter()
        .map(|&t| law.dilate(mu0, t))
        .collect::<Result<Vec<_>, GainError>>()?;
    Ok(EventGrid {
        real_times,
        dilated_times,
        jumps_to,
        interval_mode,
    })
}

/// Checks the dilated average dwell-time condition over all event pairs.
/// Checking pairs anchored at jump instants and endpoints is sufficient: the
/// jump count is piecewise constant between events, and the dilated span only
/// grows when an interval is widened past an event.
pub fn verify_dadt(
    sig: &SwitchingSignal,
    law: &GainLaw,
    mu0: f64,
    tau_d: f64,
    n0: f64,
) -> Result<SwitchReport, SwitchingError> {
    if tau_d.is_nan() || tau_d <= 0.0 {
        return Err(SwitchingError::InvalidParams(format!(
            "tau_d must be > 0, got {tau_d}"
        )));
    }
    let grid = event_grid(sig, law, mu0)?;
    Ok(scan_pairs("D-ADT", &grid, |grid, i, k| {
        let observed = (grid.jumps_to[k] - grid.jumps_to[i]) as f64;
        let allowed = (grid.dilated_times[k] - grid.dilated_times[i]) / tau_d + n0;
        (observed, allowed)
    }))
}

/// Checks the dilated average activation-time condition over all event pairs.
/// The activation integral over `[t1, t2]` is the sum of `D(end) - D(start)`
/// over draining subintervals, because `dD/dt = mu`.
pub fn verify_daat(
    sig: &SwitchingSignal,
    law: &GainLaw,
    mu0: f64,
    tau_a: f64,
    t0: f64,
    partition: &ModePartition,
) -> Result<SwitchReport, SwitchingError> {
    if tau_a.is_nan() || tau_a <= 1.0 {
        return Err(SwitchingError::InvalidParams(format!(
            "tau_a must be > 1, got {tau_a}"
        )));
    }
    let grid = event_grid(sig, law, mu0)?;
    // cumulative dilated activation up to each event
    let mut activation = vec![0.0f64];
    for i in 0..grid.interval_mode.len() {
        let span = grid.dilated_times[i + 1] - grid.dilated_times[i];
        let active = partition.drains_activation(grid.interval_mode[i]);
        activation.push(activation[i] + if active { span } else { 0.0 });
    }
    Ok(scan_pairs("D-AAT", &grid, |grid, i, k| {
        let observed = activation[k] - activation[i];
        let allowed = (grid.dilated_times[k] - grid.dilated_times[i]) / tau_a + t0;
        (observed, allowed)
    }))
}

fn scan_pairs(
    constraint: &'static str,
    grid: &EventGrid,
    pair_values: impl Fn(&EventGrid, usize, usize) -> (f64, f64),
) -> SwitchReport {
    let m = grid.real_times.len();
    let mut worst_margin = f64::INFINITY;
    let mut worst: Option<ConstraintWitness> = None;
    for i in 0..m {
        for k in i..m {
            let (observed, allowed) = pair_values(grid, i, k);
            let slack = allowed - observed;
            if slack < worst_margin {
                worst_margin = slack;
                worst = Some(ConstraintWitness {
                    t_start: grid.real_times[i],
                    t_end: grid.real_times[k],
                    observed,
                    allowed,
                });
            }
        }
    }
    let ok = worst_margin >= -PASS_TOLERANCE;
    SwitchReport {
        constraint,
        ok,
        worst_margin,
        witness: if ok { None } else { worst },
    }
}

/// How the automaton realization decides jumps.
pub enum JumpTrigger<'a> {
    /// Jump at the scheduled times of a switching signal (and only once the
    /// dwell budget covers it).
    Schedule(&'a SwitchingSignal),
    /// Jump as soon as the jump set is entered, cycling to the next mode
    /// index — the maximal-switching-rate selection of the automaton.
    WheneverEnabled,
}

/// The data-querying automaton as a hybrid system over `(q, rho_d, rho_a, mu)`
/// in real time. Timers run at their maximal admissible rates with hard
/// clipping at the budget caps; the activation timer has no lower clip, so a
/// draining mode with `rho_a = 0` exits the flow set and — absent an enabled
/// jump — the run terminates as a dead solution.
pub fn automaton_system(
    params: &AutomatonParams,
    law: &GainLaw,
    trigger: JumpTrigger<'_>,
) -> HybridSystem {
    let p = params.clone();
    let law = *law;
    let flow_in = {
        let p = p.clone();
        Box::new(move |z: &[f64], _t: f64| {
            let q = z[0].round() as usize;
            p.partition().contains(q)
                && (-1e-9..=p.n0() + 1e-9).contains(&z[1])
                && (-1e-9..=p.t0() + 1e-9).contains(&z[2])
                && z[3] >= 1.0 - 1e-9
        })
    };
    let flow_rhs = {
        let p = p.clone();
        Box::new(move |z: &[f64], _t: f64, out: &mut [f64]| {
            let q = z[0].round() as usize;
            let mu = z[3];
            out[0] = 0.0;
            out[1] = if z[1] < p.n0() { mu / p.tau_d() } else { 0.0 };
            out[2] = if p.partition().drains_activation(q) {
                mu * (1.0 / p.tau_a() - 1.0)
            } else if z[2] < p.t0() {
                mu / p.tau_a()
            } else {
                0.0
            };
            out[3] = law.rate(mu.max(1.0)).unwrap_or(f64::NAN);
        })
    };
    let (jump_enabled, jump_map): (crate::hybrid::JumpPredicate, crate::hybrid::JumpMap) =
        match trigger {
            JumpTrigger::Schedule(signal) => {
                let times: Vec<(f64, usize)> = signal.jumps().to_vec();
                let times2 = times.clone();
                (
                    Box::new(move |z: &[f64], t: f64, j: usize| {
                        j < times.len() && t >= times[j].0 && z[1] >= 1.0 - 1e-9
                    }),
                    Box::new(move |z: &[f64], _t: f64, j: usize| {
                        let mut next = z.to_vec();
                        next[0] = times2[j].1 as f64;
                        next[1] = z[1] - 1.0;
                        next
                    }),
                )
            }
            JumpTrigger::WheneverEnabled => {
                let modes = p.partition().all_modes();
                (
                    Box::new(move |z: &[f64], _t: f64, _j: usize| z[1] >= 1.0 - 1e-9),
                    Box::new(move |z: &[f64], _t: f64, _j: usize| {
                        let q = z[0].round() as usize;
                        let idx = modes.iter().position(|m| *m == q).unwrap_or(0);
                        let next_mode = modes[(idx + 1) % modes.len()];
                        let mut next = z.to_vec();
                        next[0] = next_mode as f64;
                        next[1] = z[1] - 1.0;
                        next
                    }),
                )
            }
        };
    let post_flow = {
        let p = p.clone();
        Box::new(move |z: &mut [f64]| {
            z[1] = z[1].min(p.n0());
            z[2] = z[2].min(p.t0());
        })
    };
    HybridSystem {
        dimension: 4,
        flow_in,
        flow_rhs,
        jump_enabled,
        jump_map,
        post_flow: Some(post_flow),
    }
}

/// Initial automaton state vector `[q, N0, T0, mu0]`.
pub fn automaton_initial_state(
    params: &AutomatonParams,
    initial_mode: usize,
    mu0: f64,
) -> Result<Vec<f64>, SwitchingError> {
    let st = AutomatonState::fresh(params, initial_mode)?;
    Ok(vec![st.q as f64, st.rho_d, st.rho_a, mu0])
}

/// Extracts the realized switching signal from an automaton (or closed-loop)
/// arc, given the index of the mode component in the state vector.
pub fn signal_from_arc(
    arc: &crate::hybrid::HybridArc,
    mode_index: usize,
) -> Result<SwitchingSignal, SwitchingError> {
    let first = arc
        .segments
        .first()
        .and_then(|s| s.samples.first())
        .ok_or_else(|| SwitchingError::InvalidSignal("empty arc".into()))?;
    let initial_mode = first.1[mode_index].round() as usize;
    let mut jumps = Vec::new();
    for seg in arc.segments.iter().skip(1) {
        let (t, z) = seg.samples.first().expect("segments are nonempty");
        jumps.push((*t, z[mode_index].round() as usize));
    }
    // the signal is defined up to the arc end; nudge the horizon past the
    // last sample so jumps stay strictly inside
    let horizon = arc.end_time() * (1.0 + 1e-12) + 1e-12;
    SwitchingSignal::new(initial_mode, jumps, horizon)
}
