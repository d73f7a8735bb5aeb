//! Path skeletons of the simulated process over a fixed window, the path
//! reversal map, and exact log-densities of skeletons under the surrogate
//! dynamics (forward and, via velocity flip-conjugation, backward).

use crate::dynamics::{flip_conjugate, flow, jump, DynamicsKind, KineticState};
use crate::error::{Error, Result};
use crate::metrics::RunMetrics;
use crate::rate::{sample_event_time, ApproxScheme, RateSegment};
use crate::target::Target;
use rand::Rng;
use std::fmt::Write as _;

/// Safety valve for pathological rates; ordinary runs stay far below this.
const MAX_SIMULATED_EVENTS: usize = 1_000_000;

/// One jump of the skeleton: the local time, the firing channel, and the
/// kinetic state just before and just after the jump.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEvent {
    pub time: f64,
    pub channel: usize,
    pub pre: KineticState,
    pub post: KineticState,
}

/// The finite description of a trajectory on [0, horizon]: the state at local
/// time 0 plus the ordered jumps. Paths produced by `simulate` have events
/// strictly inside the window; stopped trajectories (No-U-Turn growth) may
/// carry a boundary event at 0 or at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSkeleton {
    pub initial: KineticState,
    pub events: Vec<PathEvent>,
    pub horizon: f64,
}

impl PathSkeleton {
    /// Structural self-consistency: ordered event times within the window and
    /// each pre-state reachable by flowing from the previous post-state.
    pub fn validate(&self) -> Result<()> {
        let mut prev_t = 0.0;
        let mut state = self.initial.clone();
        for (i, e) in self.events.iter().enumerate() {
            if !(e.time >= 0.0 && e.time <= self.horizon) || (i > 0 && e.time <= prev_t) {
                return Err(Error::InconsistentSkeleton(format!(
                    "event {i} at time {} outside (prev, horizon {}]",
                    e.time, self.horizon
                )));
            }
            let reached = flow(&state, e.time - prev_t);
            let err = reached
                .x
                .iter()
                .zip(&e.pre.x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if err > 1e-8 || e.pre.x != e.post.x {
                return Err(Error::InconsistentSkeleton(format!(
                    "event {i} pre-state does not lie on the flow (gap {err:.3e})"
                )));
            }
            prev_t = e.time;
            state = e.post.clone();
        }
        Ok(())
    }

    /// State at local time `horizon`.
    pub fn endpoint(&self) -> KineticState {
        match self.events.last() {
            Some(e) => flow(&e.post, self.horizon - e.time),
            None => flow(&self.initial, self.horizon),
        }
    }

    /// State at local time t (post-jump convention at event times).
    pub fn state_at(&self, t: f64) -> KineticState {
        let idx = self.events.partition_point(|e| e.time <= t);
        match idx.checked_sub(1) {
            Some(i) => flow(&self.events[i].post, t - self.events[i].time),
            None => flow(&self.initial, t),
        }
    }
}

/// Simulates the surrogate process from z0 for the given window, returning
/// the skeleton together with the log conditional density log p(w | z0) that
/// the simulation itself accrued (event rate factors plus survival terms).
pub fn simulate<R: Rng + ?Sized>(
    z0: KineticState,
    horizon: f64,
    kind: DynamicsKind,
    scheme: ApproxScheme,
    target: &Target,
    rng: &mut R,
    metrics: &mut RunMetrics,
) -> Result<(PathSkeleton, f64)> {
    assert!(horizon > 0.0);
    let base_offset = metrics.trace_offset;
    let mut t = 0.0;
    let mut state = z0.clone();
    let mut events = Vec::new();
    let mut log_cond = 0.0;
    loop {
        metrics.trace_offset = base_offset + metrics.trace_sign * t;
        let mut seg = RateSegment::new(state.clone(), kind, scheme, target, metrics)?;
        match sample_event_time(&mut seg, horizon - t, target, rng, metrics)? {
            None => {
                log_cond -= seg.total_integrated_rate(horizon - t);
                break;
            }
            Some((tau, channel)) => {
                log_cond += seg.approx_rate(channel, tau).ln() - seg.total_integrated_rate(tau);
                let pre = flow(&state, tau);
                metrics.record_eval(tau, &pre.x);
                let post = jump(kind, target, &pre, channel, metrics)?;
                t += tau;
                events.push(PathEvent {
                    time: t,
                    channel,
                    pre,
                    post: post.clone(),
                });
                metrics.events += 1;
                state = post;
                if events.len() > MAX_SIMULATED_EVENTS {
                    return Err(Error::BudgetExceeded {
                        events: events.len(),
                        cap: MAX_SIMULATED_EVENTS,
                    });
                }
            }
        }
    }
    metrics.trace_offset = base_offset;
    Ok((
        PathSkeleton {
            initial: z0,
            events,
            horizon,
        },
        log_cond,
    ))
}

/// Log-density of a skeleton under the surrogate process started at its own
/// initial state.
#[derive(Debug, Clone)]
pub struct LogPathDensity {
    /// log pi at the initial position (the velocity marginal is uniform on a
    /// compact set and cancels everywhere it is compared, so it is omitted).
    pub log_mu0: f64,
    /// log p(w | z0): event rate factors minus survival integrals.
    pub log_conditional: f64,
    /// Per-segment contributions, for diagnostics.
    pub per_segment: Vec<f64>,
}

/// Recomputes the conditional log-density the simulator would have accrued
/// for this skeleton: per inter-event segment, the SAME deterministic rate
/// surrogate is rebuilt from the segment's anchor, giving a bit-reproducible
/// density. An event sitting where the surrogate rate vanishes yields -inf.
pub fn path_log_density(
    w: &PathSkeleton,
    kind: DynamicsKind,
    target: &Target,
    scheme: ApproxScheme,
    metrics: &mut RunMetrics,
) -> Result<LogPathDensity> {
    let log_mu0 = target.log_density(&w.initial.x)?;
    let mut state = w.initial.clone();
    let mut prev_t = 0.0;
    let mut log_conditional = 0.0;
    let mut per_segment = Vec::with_capacity(w.events.len() + 1);
    for e in &w.events {
        let dt = e.time - prev_t;
        let mut seg = RateSegment::new(state.clone(), kind, scheme, target, metrics)?;
        seg.extend_to(dt, target, metrics)?;
        let rate = seg.approx_rate(e.channel, dt);
        let contrib = if rate > 0.0 {
            rate.ln() - seg.total_integrated_rate(dt)
        } else {
            f64::NEG_INFINITY
        };
        per_segment.push(contrib);
        log_conditional += contrib;
        state = e.post.clone();
        prev_t = e.time;
    }
    let dt = w.horizon - prev_t;
    let mut seg = RateSegment::new(state, kind, scheme, target, metrics)?;
    seg.extend_to(dt, target, metrics)?;
    let tail = -seg.total_integrated_rate(dt);
    per_segment.push(tail);
    log_conditional += tail;
    Ok(LogPathDensity {
        log_mu0,
        log_conditional,
        per_segment,
    })
}

/// The reversal map R: the same geometric path traversed backward, realized
/// for these dynamics by flipping every velocity. The result is again a
/// forward skeleton (for the flip-conjugated start), and R is an involution.
pub fn reverse_path(w: &PathSkeleton) -> Result<PathSkeleton> {
    w.validate()?;
    let initial = flip_conjugate(&w.endpoint());
    let events = w
        .events
        .iter()
        .rev()
        .map(|e| PathEvent {
            time: w.horizon - e.time,
            channel: e.channel,
            pre: flip_conjugate(&e.post),
            post: flip_conjugate(&e.pre),
        })
        .collect();
    Ok(PathSkeleton {
        initial,
        events,
        horizon: w.horizon,
    })
}

/// The log-scale gap in the detailed-balance identity between a path and its
/// reversal: [log mu(z0) + log p(w|z0)] - [log mu(z0^r) + log p(R(w)|z0^r)].
/// Near zero exactly when the surrogate reproduces the true rates along this
/// path; its sign and size drive the Metropolis correction.
pub fn skew_reversibility_residual(
    w: &PathSkeleton,
    kind: DynamicsKind,
    target: &Target,
    scheme: ApproxScheme,
) -> Result<f64> {
    let mut m = RunMetrics::new();
    let fwd = path_log_density(w, kind, target, scheme, &mut m)?;
    let rw = reverse_path(w)?;
    let rev = path_log_density(&rw, kind, target, scheme, &mut m)?;
    Ok((fwd.log_mu0 + fwd.log_conditional) - (rev.log_mu0 + rev.log_conditional))
}

fn push_vector(out: &mut String, v: &[f64]) {
    for x in v {
        let _ = write!(out, " {x:?}");
    }
}

/// Line-oriented text form of a skeleton: a horizon line, an initial-state
/// line, then one `E <time> <channel> <post x...> <post v...>` line per event.
pub fn skeleton_to_string(w: &PathSkeleton) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "T {:?}", w.horizon);
    let mut line = String::from("I");
    push_vector(&mut line, &w.initial.x);
    push_vector(&mut line, &w.initial.v);
    out.push_str(&line);
    out.push('\n');
    for e in &w.events {
        let mut line = format!("E {:?} {}", e.time, e.channel);
        push_vector(&mut line, &e.post.x);
        push_vector(&mut line, &e.post.v);
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::refresh_velocity;
    use crate::rate::{ApproxOrder, StepPolicy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scheme(order: ApproxOrder, h: f64) -> ApproxScheme {
        ApproxScheme::new(order, StepPolicy::Fixed { h })
    }

    fn random_gaussian_path(
        d: usize,
        horizon: f64,
        sch: ApproxScheme,
        rng: &mut ChaCha8Rng,
    ) -> (PathSkeleton, f64) {
        let target = Target::Gaussian { d };
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v = refresh_velocity(DynamicsKind::Bps, d, rng);
        let mut m = RunMetrics::new();
        simulate(
            KineticState::new(x, v),
            horizon,
            DynamicsKind::Bps,
            sch,
            &target,
            rng,
            &mut m,
        )
        .unwrap()
    }

    #[test]
    fn simulate_produces_consistent_skeletons() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let (w, _) = random_gaussian_path(2, 6.0, scheme(ApproxOrder::Order1, 0.8), &mut rng);
            w.validate().unwrap();
            for pair in w.events.windows(2) {
                assert!(pair[0].time < pair[1].time);
            }
            assert!(w.events.iter().all(|e| e.time > 0.0 && e.time < w.horizon));
        }
    }

    #[test]
    fn simulated_density_matches_reconstruction() {
        let target = Target::Gaussian { d: 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for order in [ApproxOrder::Order0, ApproxOrder::Order1] {
            let sch = ApproxScheme::new(order, StepPolicy::adaptive(0.01));
            for _ in 0..20 {
                let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                let v = refresh_velocity(DynamicsKind::Bps, 2, &mut rng);
                let mut m = RunMetrics::new();
                let (w, accrued) = simulate(
                    KineticState::new(x, v),
                    4.0,
                    DynamicsKind::Bps,
                    sch,
                    &target,
                    &mut rng,
                    &mut m,
                )
                .unwrap();
                let recon = path_log_density(&w, DynamicsKind::Bps, &target, sch, &mut m).unwrap();
                assert!(
                    (recon.log_conditional - accrued).abs() < 1e-10,
                    "{order:?}: {accrued} vs {}",
                    recon.log_conditional
                );
            }
        }
    }

    #[test]
    fn reverse_of_flow_only_path() {
        let w = PathSkeleton {
            initial: KineticState::new(vec![1.0, -1.0], vec![0.6, 0.8]),
            events: Vec::new(),
            horizon: 2.0,
        };
        let r = reverse_path(&w).unwrap();
        assert_eq!(r.initial.x, vec![1.0 + 1.2, -1.0 + 1.6]);
        assert_eq!(r.initial.v, vec![-0.6, -0.8]);
    }

    #[test]
    fn reverse_path_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..20 {
            let (w, _) = random_gaussian_path(3, 8.0, scheme(ApproxOrder::Order1, 0.6), &mut rng);
            let rr = reverse_path(&reverse_path(&w).unwrap()).unwrap();
            assert_eq!(rr.events.len(), w.events.len());
            for (a, b) in rr.events.iter().zip(&w.events) {
                assert!((a.time - b.time).abs() < 1e-12);
                assert_eq!(a.channel, b.channel);
                for (p, q) in a.post.x.iter().zip(&b.post.x) {
                    assert!((p - q).abs() < 1e-12);
                }
                for (p, q) in a.post.v.iter().zip(&b.post.v) {
                    assert!((p - q).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn reverse_maps_event_times_and_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        loop {
            let (w, _) = random_gaussian_path(2, 6.0, scheme(ApproxOrder::Order1, 0.5), &mut rng);
            if w.events.len() == 1 {
                let r = reverse_path(&w).unwrap();
                assert!((r.events[0].time - (w.horizon - w.events[0].time)).abs() < 1e-12);
                assert_eq!(r.events[0].channel, w.events[0].channel);
                break;
            }
        }
    }

    #[test]
    fn flow_only_density_is_pure_survival() {
        // Order0 from an anchor with rate c: log p = -c T for an event-free
        // window.
        let target = Target::Gaussian { d: 2 };
        let sch = scheme(ApproxOrder::Order0, 10.0);
        let w = PathSkeleton {
            initial: KineticState::new(vec![2.0, 0.0], vec![1.0, 0.0]),
            events: Vec::new(),
            horizon: 1.5,
        };
        let mut m = RunMetrics::new();
        let d = path_log_density(&w, DynamicsKind::Bps, &target, sch, &mut m).unwrap();
        assert!((d.log_conditional - (-2.0 * 1.5)).abs() < 1e-12);
    }

    #[test]
    fn one_event_density_formula() {
        let target = Target::Gaussian { d: 2 };
        let sch = scheme(ApproxOrder::Order1, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let (w, _) = loop {
            let out = random_gaussian_path(2, 3.0, sch, &mut rng);
            if out.0.events.len() == 1 {
                break out;
            }
        };
        let mut m = RunMetrics::new();
        let d = path_log_density(&w, DynamicsKind::Bps, &target, sch, &mut m).unwrap();
        let tau = w.events[0].time;
        let mut seg1 =
            RateSegment::new(w.initial.clone(), DynamicsKind::Bps, sch, &target, &mut m).unwrap();
        seg1.extend_to(tau, &target, &mut m).unwrap();
        let mut seg2 = RateSegment::new(
            w.events[0].post.clone(),
            DynamicsKind::Bps,
            sch,
            &target,
            &mut m,
        )
        .unwrap();
        seg2.extend_to(w.horizon - tau, &target, &mut m).unwrap();
        let expected = seg1.approx_rate(0, tau).ln()
            - seg1.total_integrated_rate(tau)
            - seg2.total_integrated_rate(w.horizon - tau);
        assert!((d.log_conditional - expected).abs() < 1e-12);
    }

    #[test]
    fn survival_probability_matches_monte_carlo() {
        // P(no event in [0, 0.5]) from x=(1,0), v=(1,0) under the Order1
        // surrogate (exact rate 1 + t): exp(-(0.5 + 0.125)).
        let target = Target::Gaussian { d: 2 };
        let sch = scheme(ApproxOrder::Order1, 0.25);
        let z = KineticState::new(vec![1.0, 0.0], vec![1.0, 0.0]);
        let w = PathSkeleton {
            initial: z.clone(),
            events: Vec::new(),
            horizon: 0.5,
        };
        let mut m = RunMetrics::new();
        let p = path_log_density(&w, DynamicsKind::Bps, &target, sch, &mut m)
            .unwrap()
            .log_conditional
            .exp();
        assert!((p - (-0.625f64).exp()).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let n = 100_000;
        let mut survived = 0;
        for _ in 0..n {
            let (path, _) = simulate(
                z.clone(),
                0.5,
                DynamicsKind::Bps,
                sch,
                &target,
                &mut rng,
                &mut m,
            )
            .unwrap();
            if path.events.is_empty() {
                survived += 1;
            }
        }
        let freq = survived as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() < 3.0 * se, "freq {freq} vs p {p}");
    }

    #[test]
    fn residual_vanishes_when_surrogate_is_exact() {
        let target = Target::Gaussian { d: 2 };
        let sch = scheme(ApproxOrder::Order1, 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let mut seen_multi_event = false;
        for _ in 0..50 {
            let (w, _) = random_gaussian_path(2, 8.0, sch, &mut rng);
            seen_multi_event |= w.events.len() >= 5;
            let r = skew_reversibility_residual(&w, DynamicsKind::Bps, &target, sch).unwrap();
            assert!(
                r.abs() < 1e-8,
                "residual {r} with {} events",
                w.events.len()
            );
        }
        assert!(seen_multi_event);
    }

    #[test]
    fn flow_only_residual_algebra() {
        // Event-free Order0 window: residual is the log-target difference
        // minus the difference of the two anchored constant survival rates.
        let target = Target::Funnel { a: 3.0, b: 2.0 };
        let sch = scheme(ApproxOrder::Order0, 10.0);
        let z = KineticState::new(vec![0.3, -0.8], vec![0.6, 0.8]);
        let horizon = 0.7;
        let w = PathSkeleton {
            initial: z.clone(),
            events: Vec::new(),
            horizon,
        };
        let r = skew_reversibility_residual(&w, DynamicsKind::Bps, &target, sch).unwrap();

        let mut m = RunMetrics::new();
        let z_t = w.endpoint();
        let seg_f = RateSegment::new(z.clone(), DynamicsKind::Bps, sch, &target, &mut m).unwrap();
        let seg_b = RateSegment::new(
            flip_conjugate(&z_t),
            DynamicsKind::Bps,
            sch,
            &target,
            &mut m,
        )
        .unwrap();
        let c = seg_f.approx_rate(0, 0.0);
        let c_rev = seg_b.approx_rate(0, 0.0);
        let expected =
            target.log_density(&z.x).unwrap() - target.log_density(&z_t.x).unwrap() - c * horizon
                + c_rev * horizon;
        assert!((r - expected).abs() < 1e-12);
    }

    #[test]
    fn coarse_surrogate_has_nonzero_residual() {
        let target = Target::Funnel { a: 3.0, b: 2.0 };
        let sch = scheme(ApproxOrder::Order0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let mut nonzero = 0;
        for _ in 0..20 {
            let x = vec![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            let v = refresh_velocity(DynamicsKind::Bps, 2, &mut rng);
            let mut m = RunMetrics::new();
            let (w, _) = simulate(
                KineticState::new(x, v),
                2.0,
                DynamicsKind::Bps,
                sch,
                &target,
                &mut rng,
                &mut m,
            )
            .unwrap();
            let r = skew_reversibility_residual(&w, DynamicsKind::Bps, &target, sch).unwrap();
            if r.abs() > 1e-3 {
                nonzero += 1;
            }
        }
        assert!(
            nonzero > 10,
            "only {nonzero}/20 coarse paths had visible residuals"
        );
    }

    #[test]
    fn zigzag_density_reconstruction() {
        let target = Target::Gaussian { d: 3 };
        let sch = ApproxScheme::new(ApproxOrder::Order1, StepPolicy::adaptive(0.01));
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..10 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v = refresh_velocity(DynamicsKind::ZigZag, 3, &mut rng);
            let mut m = RunMetrics::new();
            let (w, accrued) = simulate(
                KineticState::new(x, v),
                3.0,
                DynamicsKind::ZigZag,
                sch,
                &target,
                &mut rng,
                &mut m,
            )
            .unwrap();
            let recon = path_log_density(&w, DynamicsKind::ZigZag, &target, sch, &mut m).unwrap();
            assert!((recon.log_conditional - accrued).abs() < 1e-10);
            let r = skew_reversibility_residual(&w, DynamicsKind::ZigZag, &target, sch).unwrap();
            assert!(r.abs() < 1e-8, "zig-zag residual {r}");
        }
    }

    #[test]
    fn skeleton_text_format() {
        let w = PathSkeleton {
            initial: KineticState::new(vec![1.0, 2.0], vec![0.0, 1.0]),
            events: vec![PathEvent {
                time: 0.5,
                channel: 0,
                pre: KineticState::new(vec![1.0, 2.5], vec![0.0, 1.0]),
                post: KineticState::new(vec![1.0, 2.5], vec![0.0, -1.0]),
            }],
            horizon: 1.0,
        };
        let s = skeleton_to_string(&w);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "T 1.0");
        assert_eq!(lines[1], "I 1.0 2.0 0.0 1.0");
        assert_eq!(lines[2], "E 0.5 0 1.0 2.5 0.0 -1.0");
        assert_eq!(skeleton_to_string(&w), s);
    }
}
