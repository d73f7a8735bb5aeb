//! No-U-Turn path-length adaptation for the kinetic samplers: the pairwise
//! stopping criterion on event states, the split-window trajectory growth,
//! the triangular index-time law, and the doubly adaptive step that corrects
//! the index choice for surrogate error.

use crate::dynamics::{flip_conjugate, flow, jump, refresh_velocity, DynamicsKind, KineticState};
use crate::error::{Error, Result};
use crate::metrics::RunMetrics;
use crate::path::{path_log_density, reverse_path, PathEvent, PathSkeleton};
use crate::rate::{sample_event_time, ApproxScheme, RateSegment};
use crate::target::Target;
use rand::Rng;

/// Configuration of the trajectory-growth samplers.
#[derive(Debug, Clone, Copy)]
pub struct NutsConfig {
    pub kind: DynamicsKind,
    pub scheme: ApproxScheme,
    /// Growth aborts with an error past this many events in the window.
    pub max_events: usize,
    /// Each side of the window may extend at most this far in time.
    pub max_half_width: f64,
}

impl NutsConfig {
    pub fn new(kind: DynamicsKind, scheme: ApproxScheme) -> Self {
        Self {
            kind,
            scheme,
            max_events: 10_000,
            max_half_width: 1e3,
        }
    }
}

/// Which end of the window the criterion broke on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopSide {
    Forward,
    Backward,
}

/// The data the stopping criterion sees for one event: position and the
/// velocities just before and just after the jump, in the global forward
/// time frame.
#[derive(Debug, Clone)]
pub struct CriterionEvent {
    pub time: f64,
    pub x: Vec<f64>,
    pub v_pre: Vec<f64>,
    pub v_post: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Pairwise no-U-turn check over a time-sorted window of events. For every
/// earlier/later pair the later event's velocities must point away from the
/// earlier position and the earlier event's velocities toward the later one,
/// except that the first event's pre-jump velocity and the last event's
/// post-jump velocity are exempt (they act outside the window).
pub fn criterion_valid(events: &[CriterionEvent]) -> bool {
    let n = events.len();
    for j in 1..n {
        for i in 0..j {
            if !pair_ok(&events[i], i == 0, &events[j], j == n - 1) {
                return false;
            }
        }
    }
    true
}

/// The four inequality families for one earlier/later pair, with the stated
/// boundary exemptions.
fn pair_ok(
    early: &CriterionEvent,
    early_is_first: bool,
    late: &CriterionEvent,
    late_is_last: bool,
) -> bool {
    let d = diff(&early.x, &late.x);
    if dot(&d, &late.v_pre) >= 0.0 {
        return false;
    }
    if !late_is_last && dot(&d, &late.v_post) >= 0.0 {
        return false;
    }
    let e = diff(&late.x, &early.x);
    if dot(&e, &early.v_post) <= 0.0 {
        return false;
    }
    if !early_is_first && dot(&e, &early.v_pre) <= 0.0 {
        return false;
    }
    true
}

/// Incremental form of `criterion_valid` when a candidate enters at one end
/// of a sorted window: checks every pair involving the candidate plus the
/// checks of the old boundary event that its interior status now requires.
fn entry_ok(window: &[CriterionEvent], cand: &CriterionEvent, side: StopSide) -> bool {
    let n = window.len();
    match side {
        StopSide::Forward => {
            for (i, o) in window.iter().enumerate() {
                if !pair_ok(o, i == 0, cand, true) {
                    return false;
                }
            }
            // The old last event is now interior: its post-jump velocity must
            // point away from every earlier position.
            if n >= 2 {
                let m = &window[n - 1];
                for o in &window[..n - 1] {
                    if dot(&diff(&o.x, &m.x), &m.v_post) >= 0.0 {
                        return false;
                    }
                }
            }
        }
        StopSide::Backward => {
            for (i, o) in window.iter().enumerate() {
                if !pair_ok(cand, true, o, i == n - 1) {
                    return false;
                }
            }
            // The old first event is now interior: its pre-jump velocity must
            // point toward every later position.
            if n >= 2 {
                let m = &window[0];
                for o in &window[1..] {
                    if dot(&diff(&o.x, &m.x), &m.v_pre) <= 0.0 {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// A trajectory grown until the criterion broke, re-indexed to [0, T]: the
/// chain's start point sits at offset l and the breaking event at the
/// boundary of the stopping side.
#[derive(Debug, Clone)]
pub struct StoppedPath {
    pub path: PathSkeleton,
    pub l: f64,
    pub stop_side: StopSide,
}

impl StoppedPath {
    /// The event view the criterion judged: the path's jump events. The
    /// chain's start point deliberately does NOT participate — the criterion
    /// must be a function of the trajectory alone, so that re-growing the
    /// window from any other index on the path stops at the same window
    /// (which is what validates resampling the index).
    pub fn criterion_events(&self) -> Vec<CriterionEvent> {
        self.path
            .events
            .iter()
            .map(|e| CriterionEvent {
                time: e.time,
                x: e.pre.x.clone(),
                v_pre: e.pre.v.clone(),
                v_post: e.post.v.clone(),
            })
            .collect()
    }
}

/// One simulated jump of a side process, in that side's own local time.
struct SimEvent {
    s: f64,
    channel: usize,
    pre: KineticState,
    post: KineticState,
}

/// Lazy event generator for one side of the window (forward, or backward via
/// the velocity-flipped process).
struct SideSim {
    state: KineticState,
    t: f64,
    sign: f64,
}

impl SideSim {
    fn next_event<R: Rng + ?Sized>(
        &mut self,
        cfg: &NutsConfig,
        target: &Target,
        rng: &mut R,
        metrics: &mut RunMetrics,
    ) -> Result<SimEvent> {
        metrics.trace_sign = self.sign;
        metrics.trace_offset = self.sign * self.t;
        let mut seg = RateSegment::new(self.state.clone(), cfg.kind, cfg.scheme, target, metrics)?;
        let hit = sample_event_time(&mut seg, cfg.max_half_width - self.t, target, rng, metrics)?;
        let out = match hit {
            None => Err(Error::HorizonExceeded {
                cap: cfg.max_half_width,
            }),
            Some((tau, channel)) => {
                let pre = flow(&self.state, tau);
                metrics.record_eval(tau, &pre.x);
                let post = jump(cfg.kind, target, &pre, channel, metrics)?;
                metrics.events += 1;
                self.t += tau;
                self.state = post.clone();
                Ok(SimEvent {
                    s: self.t,
                    channel,
                    pre,
                    post,
                })
            }
        };
        metrics.trace_sign = 1.0;
        metrics.trace_offset = 0.0;
        out
    }
}

/// Grows the window [-alpha t, (1-alpha) t] around z until the first event
/// whose entry breaks the criterion, then returns the trajectory re-indexed
/// to [0, T] with l = alpha T. The backward half is simulated by running the
/// forward process from the velocity-flipped start and flipping back.
pub fn grow_stopped_path<R: Rng + ?Sized>(
    z: &KineticState,
    alpha: f64,
    cfg: &NutsConfig,
    target: &Target,
    rng: &mut R,
    metrics: &mut RunMetrics,
) -> Result<StoppedPath> {
    assert!((0.0..1.0).contains(&alpha));
    let trace_start = metrics.eval_trace.as_ref().map_or(0, Vec::len);
    let zf = KineticState {
        x: z.x.clone(),
        v: z.v.clone(),
        gamma: 1,
    };
    let zb = {
        let mut s = flip_conjugate(&zf);
        s.gamma = 1;
        s
    };
    let mut fwd = SideSim {
        state: zf.clone(),
        t: 0.0,
        sign: 1.0,
    };
    let mut bwd = SideSim {
        state: zb,
        t: 0.0,
        sign: -1.0,
    };
    let mut fwd_events: Vec<SimEvent> = Vec::new();
    let mut bwd_events: Vec<SimEvent> = Vec::new();
    // Only jump events participate in the criterion. Anchoring it on the
    // start point would make the stopping window depend on where the chain
    // sits inside it, invalidating the triangular index law.
    let mut window: Vec<CriterionEvent> = Vec::new();
    let mut pending_f: Option<SimEvent> = None;
    let mut pending_b: Option<SimEvent> = None;

    loop {
        if fwd_events.len() + bwd_events.len() >= cfg.max_events {
            return Err(Error::BudgetExceeded {
                events: fwd_events.len() + bwd_events.len(),
                cap: cfg.max_events,
            });
        }
        if pending_f.is_none() {
            pending_f = Some(fwd.next_event(cfg, target, rng, metrics)?);
        }
        if pending_b.is_none() {
            pending_b = Some(bwd.next_event(cfg, target, rng, metrics)?);
        }
        // An event at local time s enters the window once the window half on
        // its side reaches s.
        let entry_f = pending_f.as_ref().unwrap().s / (1.0 - alpha);
        let entry_b = pending_b.as_ref().unwrap().s / alpha;
        let side = if entry_f <= entry_b {
            StopSide::Forward
        } else {
            StopSide::Backward
        };
        let (e, entry) = match side {
            StopSide::Forward => (pending_f.take().unwrap(), entry_f),
            StopSide::Backward => (pending_b.take().unwrap(), entry_b),
        };
        let cand = match side {
            StopSide::Forward => CriterionEvent {
                time: e.s,
                x: e.pre.x.clone(),
                v_pre: e.pre.v.clone(),
                v_post: e.post.v.clone(),
            },
            StopSide::Backward => CriterionEvent {
                time: -e.s,
                x: e.pre.x.clone(),
                v_pre: e.post.v.iter().map(|v| -v).collect(),
                v_post: e.pre.v.iter().map(|v| -v).collect(),
            },
        };
        let ok = entry_ok(&window, &cand, side);
        match side {
            StopSide::Forward => fwd_events.push(e),
            StopSide::Backward => bwd_events.push(e),
        }
        if !ok {
            let sp = assemble(&zf, alpha, entry, side, &bwd_events, &fwd_events);
            // Shift recorded evaluation times from the z-centered frame into
            // the re-indexed path frame.
            if let Some(trace) = metrics.eval_trace.as_mut() {
                for p in &mut trace[trace_start..] {
                    p.time += sp.l;
                }
            }
            return Ok(sp);
        }
        match side {
            StopSide::Forward => window.push(cand),
            StopSide::Backward => window.insert(0, cand),
        }
    }
}

/// Re-indexes the grown window to [0, T]: backward-side events are flipped
/// into the forward frame, the breaking event lands exactly on the stopping
/// boundary.
fn assemble(
    zf: &KineticState,
    alpha: f64,
    t_total: f64,
    stop_side: StopSide,
    bwd_events: &[SimEvent],
    fwd_events: &[SimEvent],
) -> StoppedPath {
    let l = alpha * t_total;
    let mut events: Vec<PathEvent> = Vec::with_capacity(bwd_events.len() + fwd_events.len());
    for (i, e) in bwd_events.iter().enumerate().rev() {
        let is_breaking = stop_side == StopSide::Backward && i == bwd_events.len() - 1;
        events.push(PathEvent {
            time: if is_breaking { 0.0 } else { l - e.s },
            channel: e.channel,
            pre: flip_conjugate(&e.post),
            post: flip_conjugate(&e.pre),
        });
    }
    for (i, e) in fwd_events.iter().enumerate() {
        let is_breaking = stop_side == StopSide::Forward && i == fwd_events.len() - 1;
        events.push(PathEvent {
            time: if is_breaking { t_total } else { l + e.s },
            channel: e.channel,
            pre: e.pre.clone(),
            post: e.post.clone(),
        });
    }
    // Mid-flight states at the left boundary are reached by flowing backward
    // (forward along the flipped velocity, then flipping back) from the
    // earliest known state on the path.
    let flow_back = |z: &KineticState, t: f64| {
        let mut s = flip_conjugate(&flow(&flip_conjugate(z), t));
        s.gamma = 1;
        s
    };
    let initial = match events.first() {
        Some(first) if first.time == 0.0 => first.post.clone(),
        Some(first) => flow_back(&first.pre, first.time),
        None => flow_back(zf, l),
    };
    StoppedPath {
        path: PathSkeleton {
            initial,
            events,
            horizon: t_total,
        },
        l,
        stop_side,
    }
}

/// Draws the index time from the triangular conditional law: density
/// proportional to T - l after a forward stop and to l after a backward stop,
/// via the exact inverse CDF.
pub fn sample_index_time<R: Rng + ?Sized>(t_total: f64, stop_side: StopSide, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    match stop_side {
        StopSide::Forward => t_total * (1.0 - (1.0 - u).sqrt()),
        StopSide::Backward => t_total * u.sqrt(),
    }
}

/// One step of the path-length-adaptive sampler without index correction.
/// Only unbiased when the rate surrogate is exact for the target (the
/// Gaussian/order-1 pairing); use `doubly_adaptive_step` otherwise.
pub fn nuts_step_exact<R: Rng + ?Sized>(
    z: &KineticState,
    cfg: &NutsConfig,
    target: &Target,
    rng: &mut R,
    metrics: &mut RunMetrics,
) -> Result<KineticState> {
    let v = refresh_velocity(cfg.kind, z.dim(), rng);
    let alpha: f64 = rng.random();
    let z0 = KineticState::new(z.x.clone(), v);
    let sp = grow_stopped_path(&z0, alpha, cfg, target, rng, metrics)?;
    let l_new = sample_index_time(sp.path.horizon, sp.stop_side, rng);
    metrics.steps += 1;
    Ok(sp.path.state_at(l_new))
}

/// log [ pi(X_a) q^r(left of a | X_a) q(right of a | X_a) ]: the target at
/// the anchor times the surrogate densities of both path halves re-anchored
/// there (left half as a forward path of the flipped process).
fn log_anchor_weight(
    sp: &StoppedPath,
    a: f64,
    cfg: &NutsConfig,
    target: &Target,
    metrics: &mut RunMetrics,
) -> Result<f64> {
    let state_a = sp.path.state_at(a);
    let right = PathSkeleton {
        initial: state_a.clone(),
        events: sp
            .path
            .events
            .iter()
            .filter(|e| e.time > a)
            .map(|e| PathEvent {
                time: e.time - a,
                ..e.clone()
            })
            .collect(),
        horizon: sp.path.horizon - a,
    };
    let left = PathSkeleton {
        initial: sp.path.initial.clone(),
        events: sp
            .path
            .events
            .iter()
            .filter(|e| e.time <= a)
            .cloned()
            .collect(),
        horizon: a,
    };
    let q_right = path_log_density(&right, cfg.kind, target, cfg.scheme, metrics)?.log_conditional;
    let q_left_rev =
        path_log_density(&reverse_path(&left)?, cfg.kind, target, cfg.scheme, metrics)?
            .log_conditional;
    Ok(target.log_density(&state_a.x)? + q_right + q_left_rev)
}

/// One step of the doubly adaptive sampler: adaptive surrogate simulation,
/// No-U-Turn window growth, triangular index proposal, and a Metropolis
/// correction of the index against the surrogate path densities (the
/// triangular factors cancel between proposal and target, and there is no
/// volume term for these dynamics).
pub fn doubly_adaptive_step<R: Rng + ?Sized>(
    z: &KineticState,
    cfg: &NutsConfig,
    target: &Target,
    rng: &mut R,
    metrics: &mut RunMetrics,
) -> Result<KineticState> {
    let v = refresh_velocity(cfg.kind, z.dim(), rng);
    let alpha: f64 = rng.random();
    let z0 = KineticState::new(z.x.clone(), v);
    let sp = grow_stopped_path(&z0, alpha, cfg, target, rng, metrics)?;
    let l = sp.l;
    let l_prop = sample_index_time(sp.path.horizon, sp.stop_side, rng);

    let log_w_prop = log_anchor_weight(&sp, l_prop, cfg, target, metrics)?;
    let log_w_cur = log_anchor_weight(&sp, l, cfg, target, metrics)?;
    metrics.steps += 1;
    metrics.mh_proposals += 1;
    let u: f64 = rng.random();
    let chosen = if u.ln() < log_w_prop - log_w_cur {
        metrics.mh_accepts += 1;
        l_prop
    } else {
        l
    };
    Ok(sp.path.state_at(chosen))
}
