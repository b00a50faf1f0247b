//! Generic hybrid-system representation and numerical integration.
//!
//! A hybrid system flows through a differential equation while the state sits
//! in the flow set and jumps through a reset map when the jump condition
//! holds. Solutions are hybrid arcs indexed by hybrid time `(t, j)`: `t`
//! advances during flows, `j` counts jumps. The integrator is a classical
//! fixed-step 4th-order scheme with bisection localization of jump events —
//! deterministic and reproducible, which matters more here than adaptive
//! stepping (stiff blow-up dynamics are handled by integrating in dilated
//! time, not by the stepper).

use std::io::Write;

use thiserror::Error;

use crate::gain::{GainError, GainLaw};

/// Default integration step.
pub const DEFAULT_DT: f64 = 1e-3;

/// Jump events are localized to this absolute window in the integration
/// variable.
pub const EVENT_TOLERANCE: f64 = 1e-10;

/// Consecutive zero-time jumps beyond this count abort the run; continuation
/// through Zeno behavior is out of scope.
const MAX_CONSECUTIVE_JUMPS: usize = 10_000;

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("initial state belongs to neither the flow set nor the jump set")]
    InitialStateOutsideDomain,
    #[error("flow map produced a non-finite derivative at t = {t}, state = {state:?}")]
    NonFiniteDerivative { t: f64, state: Vec<f64> },
    #[error("invalid integration options: {0}")]
    InvalidOptions(String),
    #[error("{count} consecutive jumps without flow at t = {t}; giving up")]
    InstantaneousJumpLoop { t: f64, count: usize },
    #[error("state dimension {got} does not match system dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum ArcError {
    #[error("hybrid time (t={t}, j={j}) outside the arc domain")]
    OutOfDomain { t: f64, j: usize },
    #[error("time mapping failed: {0}")]
    TimeMapping(#[from] GainError),
}

/// A point of a hybrid time domain: continuous index `t`, discrete index `j`.
/// Ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridTime {
    pub t: f64,
    pub j: usize,
}

impl PartialOrd for HybridTime {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        match self.t.partial_cmp(&other.t) {
            Some(std::cmp::Ordering::Equal) => self.j.partial_cmp(&other.j),
            ord => ord,
        }
    }
}

/// Why an integration run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The requested horizon in the integration variable was reached.
    HorizonReached,
    /// The run hit the guard in front of the gain's blow-up time.
    BlowUpGuard,
    /// The jump budget was exhausted.
    JumpBudget,
    /// The state left the flow set with jumps disabled; the solution cannot
    /// be extended.
    DeadSolution,
    /// The convergence measure dropped below its tolerance.
    Converged,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Termination::HorizonReached => "horizon-reached",
            Termination::BlowUpGuard => "blow-up-guard",
            Termination::JumpBudget => "jump-budget",
            Termination::DeadSolution => "dead-solution",
            Termination::Converged => "converged",
        };
        f.write_str(s)
    }
}

/// Samples of one inter-jump interval: `(t, state)` pairs with strictly
/// increasing `t`.
#[derive(Debug, Clone)]
pub struct Segment {
    pub j: usize,
    pub samples: Vec<(f64, Vec<f64>)>,
}

impl Segment {
    pub fn start_time(&self) -> f64 {
        self.samples.first().map(|(t, _)| *t).unwrap_or(0.0)
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().map(|(t, _)| *t).unwrap_or(0.0)
    }
}

/// A hybrid arc: the trajectory over its hybrid time domain, plus why the run
/// stopped. Jumps are instantaneous: segment `j` ends at the same `t` where
/// segment `j+1` begins.
#[derive(Debug, Clone)]
pub struct HybridArc {
    pub segments: Vec<Segment>,
    pub termination: Termination,
}

impl HybridArc {
    pub fn jump_count(&self) -> usize {
        self.segments.len().saturating_sub(1)
    }

    /// Times at which jumps occurred (start times of segments 1..).
    pub fn jump_times(&self) -> Vec<f64> {
        self.segments
            .iter()
            .skip(1)
            .map(Segment::start_time)
            .collect()
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().map(Segment::end_time).unwrap_or(0.0)
    }

    pub fn end_state(&self) -> &[f64] {
        self.segments
            .last()
            .and_then(|s| s.samples.last())
            .map(|(_, z)| z.as_slice())
            .expect("arcs always hold at least one sample")
    }

    pub fn final_hybrid_time(&self) -> HybridTime {
        HybridTime {
            t: self.end_time(),
            j: self.jump_count(),
        }
    }

    /// Checks the hybrid-time-domain invariants: strictly increasing times
    /// within segments, matching boundary times across jumps, consecutive
    /// jump indices starting at zero.
    pub fn domain_is_valid(&self) -> bool {
        if self.segments.is_empty() {
            return false;
        }
        let mut previous_end: Option<f64> = None;
        for (k, seg) in self.segments.iter().enumerate() {
            if seg.j != k || seg.samples.is_empty() {
                return false;
            }
            if let Some(end) = previous_end {
                if seg.start_time() != end {
                    return false;
                }
            }
            for pair in seg.samples.windows(2) {
                if pair[1].0 <= pair[0].0 {
                    return false;
                }
            }
            previous_end = Some(seg.end_time());
        }
        true
    }

    /// State at hybrid time `(t, j)` by linear interpolation inside segment `j`.
    pub fn sample_at(&self, t: f64, j: usize) -> Result<Vec<f64>, ArcError> {
        let seg = self.segments.get(j).ok_or(ArcError::OutOfDomain { t, j })?;
        let samples = &seg.samples;
        let (t0, tn) = (seg.start_time(), seg.end_time());
        if t < t0 - 1e-12 || t > tn + 1e-12 {
            return Err(ArcError::OutOfDomain { t, j });
        }
        let t = t.clamp(t0, tn);
        let idx = samples.partition_point(|(ts, _)| *ts <= t);
        if idx == 0 {
            return Ok(samples[0].1.clone());
        }
        if idx == samples.len() {
            return Ok(samples[samples.len() - 1].1.clone());
        }
        let (ta, za) = &samples[idx - 1];
        let (tb, zb) = &samples[idx];
        if tb == ta {
            return Ok(zb.clone());
        }
        let w = (t - ta) / (tb - ta);
        Ok(za.iter().zip(zb).map(|(a, b)| a + w * (b - a)).collect())
    }

    /// Re-indexes every sample time through the dilation (`to_dilated`) or its
    /// inverse (`to_real`); jump indices and state values are untouched.
    pub fn map_time(
        &self,
        law: &GainLaw,
        mu0: f64,
        direction: TimeMapDirection,
    ) -> Result<HybridArc, ArcError> {
        let mut segments = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            let mut samples = Vec::with_capacity(seg.samples.len());
            for (t, z) in &seg.samples {
                let mapped = match direction {
                    TimeMapDirection::ToDilated => law.dilate(mu0, *t)?,
                    TimeMapDirection::ToReal => law.contract(mu0, *t)?,
                };
                samples.push((mapped, z.clone()));
            }
            segments.push(Segment { j: seg.j, samples });
        }
        Ok(HybridArc {
            segments,
            termination: self.termination,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeMapDirection {
    ToDilated,
    ToReal,
}

/// Flow-set membership test over `(state, time)`.
pub type FlowPredicate = Box<dyn Fn(&[f64], f64) -> bool>;
/// Selected flow map: writes the derivative of `(state, time)` into the
/// output slice.
pub type FlowMap = Box<dyn Fn(&[f64], f64, &mut [f64])>;
/// Jump condition over `(state, time, jump count)`.
pub type JumpPredicate = Box<dyn Fn(&[f64], f64, usize) -> bool>;
/// Selected jump map over `(state, time, jump count)`.
pub type JumpMap = Box<dyn Fn(&[f64], f64, usize) -> Vec<f64>>;
/// In-place projection applied after accepted flow steps.
pub type StateProjection = Box<dyn Fn(&mut [f64])>;

/// Single-valued realization of a hybrid system. Predicates receive the
/// integration time (and the jump map also the jump count) so that
/// schedule-driven jump triggers can be expressed without augmenting the
/// state.
pub struct HybridSystem {
    pub dimension: usize,
    /// Flow-set membership.
    pub flow_in: FlowPredicate,
    /// Selected flow map.
    pub flow_rhs: FlowMap,
    /// Jump-set membership combined with the policy trigger.
    pub jump_enabled: JumpPredicate,
    /// Selected jump map.
    pub jump_map: JumpMap,
    /// Optional projection applied after each accepted flow step (timer caps).
    pub post_flow: Option<StateProjection>,
}

/// Guard keeping flow times away from the gain's blow-up time: integration
/// never crosses `(1 - eps_stop) * time`.
#[derive(Debug, Clone, Copy)]
pub struct BlowUpGuard {
    pub time: f64,
    pub eps_stop: f64,
}

/// Scalar measure of the state used for convergence checks.
pub type StateMeasure = Box<dyn Fn(&[f64]) -> f64>;

/// Optional early-exit criterion on a scalar measure of the state.
pub struct ConvergeWhen {
    pub tol: f64,
    pub measure: StateMeasure,
}

/// Stop conditions; the first one satisfied ends the run.
pub struct StopConditions {
    /// Horizon in the integration variable.
    pub horizon: f64,
    pub j_max: Option<usize>,
    pub blow_up: Option<BlowUpGuard>,
    pub converge: Option<ConvergeWhen>,
}

impl StopConditions {
    pub fn horizon(horizon: f64) -> Self {
        StopConditions {
            horizon,
            j_max: None,
            blow_up: None,
            converge: None,
        }
    }
}

pub struct IntegrateOptions {
    pub dt: f64,
    pub stop: StopConditions,
}

impl IntegrateOptions {
    pub fn new(dt: f64, stop: StopConditions) -> Self {
        IntegrateOptions { dt, stop }
    }
}

fn rk4_step(
    sys: &HybridSystem,
    state: &[f64],
    t: f64,
    h: f64,
    scratch: &mut [Vec<f64>],
) -> Vec<f64> {
    let n = state.len();
    let (k1, k2, k3, k4, tmp) = {
        let (a, rest) = scratch.split_at_mut(1);
        let (b, rest) = rest.split_at_mut(1);
        let (c, rest) = rest.split_at_mut(1);
        let (d, rest) = rest.split_at_mut(1);
        (&mut a[0], &mut b[0], &mut c[0], &mut d[0], &mut rest[0])
    };
    (sys.flow_rhs)(state, t, k1);
    for i in 0..n {
        tmp[i] = state[i] + 0.5 * h * k1[i];
    }
    (sys.flow_rhs)(tmp, t + 0.5 * h, k2);
    for i in 0..n {
        tmp[i] = state[i] + 0.5 * h * k2[i];
    }
    (sys.flow_rhs)(tmp, t + 0.5 * h, k3);
    for i in 0..n {
        tmp[i] = state[i] + h * k3[i];
    }
    (sys.flow_rhs)(tmp, t + h, k4);
    (0..n)
        .map(|i| state[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Integrates the hybrid system from `z0`.
///
/// Flows use fixed-step RK4; when the jump condition turns on inside a step,
/// the event time is localized by bisection to [`EVENT_TOLERANCE`], the jump
/// map is applied and the jump counter increments. When the state exits the
/// flow set with jumps disabled, the run ends as [`Termination::DeadSolution`]
/// (the exit time is localized the same way). Every accepted step is stored.
pub fn integrate(
    sys: &HybridSystem,
    z0: &[f64],
    opts: &IntegrateOptions,
) -> Result<HybridArc, IntegrateError> {
    if z0.len() != sys.dimension {
        return Err(IntegrateError::DimensionMismatch {
            expected: sys.dimension,
            got: z0.len(),
        });
    }
    if !(opts.dt.is_finite() && opts.dt > 0.0) {
        return Err(IntegrateError::InvalidOptions(format!(
            "dt must be positive, got {}",
            opts.dt
        )));
    }
    if !(opts.stop.horizon.is_finite() && opts.stop.horizon > 0.0) {
        return Err(IntegrateError::InvalidOptions(format!(
            "horizon must be positive and finite, got {}",
            opts.stop.horizon
        )));
    }
    let mut end_time = opts.stop.horizon;
    let mut guard_active = false;
    if let Some(guard) = &opts.stop.blow_up {
        if !(guard.eps_stop > 0.0 && guard.eps_stop < 1.0) {
            return Err(IntegrateError::InvalidOptions(format!(
                "eps_stop must lie in (0, 1), got {}",
                guard.eps_stop
            )));
        }
        if guard.time.is_finite() {
            let guarded = (1.0 - guard.eps_stop) * guard.time;
            if guarded < end_time {
                end_time = guarded;
                guard_active = true;
            }
        }
    }

    let mut t = 0.0f64;
    let mut j = 0usize;
    let mut state = z0.to_vec();
    if !(sys.flow_in)(&state, t) && !(sys.jump_enabled)(&state, t, j) {
        return Err(IntegrateError::InitialStateOutsideDomain);
    }
    let mut segments = vec![Segment {
        j,
        samples: vec![(t, state.clone())],
    }];
    let mut scratch = vec![vec![0.0; state.len()]; 5];
    let mut consecutive_jumps = 0usize;

    let record = |segments: &mut Vec<Segment>, t: f64, state: &[f64]| {
        let seg = segments.last_mut().expect("at least one segment");
        // bisected partial steps can be shorter than time resolution near the
        // current sample; skip duplicates
        if let Some((last_t, _)) = seg.samples.last() {
            if t <= *last_t {
                return;
            }
        }
        seg.samples.push((t, state.to_vec()));
    };

    loop {
        if let Some(conv) = &opts.stop.converge {
            if (conv.measure)(&state) <= conv.tol {
                return Ok(HybridArc {
                    segments,
                    termination: Termination::Converged,
                });
            }
        }

        if (sys.jump_enabled)(&state, t, j) {
            if let Some(j_max) = opts.stop.j_max {
                if j >= j_max {
                    return Ok(HybridArc {
                        segments,
                        termination: Termination::JumpBudget,
                    });
                }
            }
            consecutive_jumps += 1;
            if consecutive_jumps > MAX_CONSECUTIVE_JUMPS {
                return Err(IntegrateError::InstantaneousJumpLoop {
                    t,
                    count: consecutive_jumps,
                });
            }
            state = (sys.jump_map)(&state, t, j);
            j += 1;
            segments.push(Segment {
                j,
                samples: vec![(t, state.clone())],
            });
            continue;
        }
        consecutive_jumps = 0;

        if end_time - t <= opts.dt * 1e-9 {
            let termination = if guard_active {
                Termination::BlowUpGuard
            } else {
                Termination::HorizonReached
            };
            return Ok(HybridArc {
                segments,
                termination,
            });
        }

        if !(sys.flow_in)(&state, t) {
            return Ok(HybridArc {
                segments,
                termination: Termination::DeadSolution,
            });
        }

        // flow proposal: one RK4 step followed by the projection (the
        // projection is part of the selected flow, so predicates see the
        // projected state)
        let propose = |tau: f64, scratch: &mut Vec<Vec<f64>>| {
            let mut trial = rk4_step(sys, &state, t, tau, scratch);
            if let Some(project) = &sys.post_flow {
                project(&mut trial);
            }
            trial
        };

        let h = opts.dt.min(end_time - t);
        let next = propose(h, &mut scratch);
        if next.iter().any(|x| !x.is_finite()) {
            return Err(IntegrateError::NonFiniteDerivative {
                t,
                state: state.clone(),
            });
        }

        if (sys.jump_enabled)(&next, t + h, j) {
            // earliest switch-on of the jump condition inside (t, t+h]
            let tau = bisect_predicate(
                |tau| {
                    let trial = propose(tau, &mut scratch);
                    (sys.jump_enabled)(&trial, t + tau, j)
                },
                h,
            );
            let at_event = propose(tau, &mut scratch);
            record(&mut segments, t + tau, &at_event);
            t += tau;
            state = at_event;
            continue;
        }

        if !(sys.flow_in)(&next, t + h) {
            // flow-set exit: advance to the last time still inside
            let tau = bisect_predicate(
                |tau| {
                    let trial = propose(tau, &mut scratch);
                    !(sys.flow_in)(&trial, t + tau)
                },
                h,
            );
            let at_exit = propose(tau, &mut scratch);
            record(&mut segments, t + tau, &at_exit);
            t += tau;
            state = at_exit;
            if (sys.jump_enabled)(&state, t, j) {
                continue;
            }
            return Ok(HybridArc {
                segments,
                termination: Termination::DeadSolution,
            });
        }

        t += h;
        state = next;
        record(&mut segments, t, &state);
    }
}

/// Smallest `tau` in `(0, h]` where `pred` switches from false to true,
/// assuming `pred(h)` holds, to within [`EVENT_TOLERANCE`].
fn bisect_predicate(mut pred: impl FnMut(f64) -> bool, h: f64) -> f64 {
    let mut lo = 0.0f64;
    let mut hi = h;
    while hi - lo > EVENT_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Writes an arc as CSV with header `t,j,s,<state components>`; `s` is the
/// dilated time when a gain law is attached (empty column otherwise). Jumps
/// appear as two consecutive rows with equal `t` and consecutive `j`.
pub fn write_trace_csv<W: Write>(
    arc: &HybridArc,
    law: Option<(&GainLaw, f64)>,
    state_names: &[&str],
    out: W,
) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "j".to_string(), "s".to_string()];
    header.extend(state_names.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for seg in &arc.segments {
        for (t, z) in &seg.samples {
            let mut row = vec![format!("{t}"), format!("{}", seg.j)];
            match law {
                Some((law, mu0)) => row.push(format!("{}", law.dilate(mu0, *t)?)),
                None => row.push(String::new()),
            }
            row.extend(z.iter().map(|x| format!("{x}")));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace i/o failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("trace i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("dilated-time column failed: {0}")]
    Gain(#[from] GainError),
}
