//! Piecewise-constant and piecewise-linear approximations of the event rate
//! along the flow: lazily extended knot grids, the locally adaptive step-size
//! rule, exact integrals of the approximate rate, and exact event-time
//! inversion.

use crate::dynamics::{flow, signed_event_rates, DynamicsKind, KineticState};
use crate::error::Result;
use crate::metrics::RunMetrics;
use crate::target::Target;
use rand::Rng;
use rand_distr::Exp1;

/// Interpolation order of the rate surrogate between knots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproxOrder {
    /// Piecewise constant: the value at the knot at-or-before t.
    Order0,
    /// Piecewise linear interpolation between bracketing knots.
    Order1,
}

/// How knot spacing is chosen along a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    Fixed {
        h: f64,
    },
    Adaptive {
        tol: f64,
        h_guess: f64,
        h_min: f64,
        h_max: f64,
    },
}

impl StepPolicy {
    /// Default adaptive policy used throughout the experiments.
    pub fn adaptive(tol: f64) -> Self {
        StepPolicy::Adaptive {
            tol,
            h_guess: 1.0,
            h_min: 1e-6,
            h_max: 10.0,
        }
    }

    fn initial_h(&self) -> f64 {
        match *self {
            StepPolicy::Fixed { h } => h,
            StepPolicy::Adaptive { h_guess, .. } => h_guess,
        }
    }
}

/// Rate surrogate configuration: interpolation order plus step policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxScheme {
    pub order: ApproxOrder,
    pub step: StepPolicy,
}

impl ApproxScheme {
    pub fn new(order: ApproxOrder, step: StepPolicy) -> Self {
        match step {
            StepPolicy::Fixed { h } => assert!(h > 0.0, "fixed step must be positive"),
            StepPolicy::Adaptive {
                tol,
                h_guess,
                h_min,
                h_max,
            } => {
                assert!(
                    tol > 0.0 && h_guess > 0.0,
                    "tol and h_guess must be positive"
                );
                assert!(0.0 < h_min && h_min <= h_max, "need 0 < h_min <= h_max");
            }
        }
        Self { order, step }
    }
}

/// Parses "order0" / "order1".
pub fn parse_order(s: &str) -> std::result::Result<ApproxOrder, String> {
    match s {
        "order0" => Ok(ApproxOrder::Order0),
        "order1" => Ok(ApproxOrder::Order1),
        other => Err(format!("unknown scheme {other:?} (expected order0|order1)")),
    }
}

/// Parses "fixed:<h>" / "adaptive:<tol>".
pub fn parse_step_policy(s: &str) -> std::result::Result<StepPolicy, String> {
    let (kind, val) = s
        .split_once(':')
        .ok_or_else(|| format!("bad step policy {s:?} (expected fixed:<h>|adaptive:<tol>)"))?;
    let x: f64 = val
        .parse()
        .map_err(|e| format!("bad step value {val:?}: {e}"))?;
    match kind {
        "fixed" if x > 0.0 => Ok(StepPolicy::Fixed { h: x }),
        "adaptive" if x > 0.0 => Ok(StepPolicy::adaptive(x)),
        _ => Err(format!("bad step policy {s:?}")),
    }
}

/// The adaptive step rule: probe the rate at local times 0 and h_guess/2,
/// estimate the local curvature proxy tau = (h/2)(lambda(0) - lambda(h/2)),
/// and return clamp(h_guess * sqrt(tol / (2|tau|)), h_min, h_max).
pub fn adapt_step(
    mut rate_at: impl FnMut(f64) -> f64,
    h_guess: f64,
    tol: f64,
    bounds: (f64, f64),
) -> f64 {
    adapt_step_from(rate_at(0.0), rate_at(0.5 * h_guess), h_guess, tol, bounds)
}

pub(crate) fn adapt_step_from(
    lam0: f64,
    lam_half: f64,
    h_guess: f64,
    tol: f64,
    (h_min, h_max): (f64, f64),
) -> f64 {
    let tau = 0.5 * h_guess * (lam0 - lam_half);
    let h = h_guess * (tol / (2.0 * tau.abs().max(1e-15))).sqrt();
    h.clamp(h_min, h_max)
}

/// One inter-event rate surrogate, anchored at the state right after the
/// previous event. Knot values are the SIGNED channel rates; the surrogate is
/// the positive part of the interpolant, so the surrogate stays exact for
/// targets whose signed rate is itself linear along the flow (the property
/// the exactness tests rely on). Integrals of the clipped interpolant are in
/// closed form, as is their inversion.
///
/// Construction is a deterministic function of (anchor, kind, scheme), which
/// is what lets the Metropolis layer re-derive densities bit-for-bit.
#[derive(Debug, Clone)]
pub struct RateSegment {
    anchor: KineticState,
    kind: DynamicsKind,
    scheme: ApproxScheme,
    channels: usize,
    times: Vec<f64>,
    /// values[k][c]: signed rate of channel c at knot k.
    values: Vec<Vec<f64>>,
    /// cum[k][c]: integral of the clipped surrogate of channel c over [0, s_k].
    cum: Vec<Vec<f64>>,
    /// Next step guess, chained forward within the segment for the adaptive
    /// policy and reset at every event (fresh segment).
    h_next: f64,
}

impl RateSegment {
    pub fn new(
        anchor: KineticState,
        kind: DynamicsKind,
        scheme: ApproxScheme,
        target: &Target,
        metrics: &mut RunMetrics,
    ) -> Result<Self> {
        let channels = kind.channels(anchor.dim());
        let mut seg = Self {
            anchor,
            kind,
            scheme,
            channels,
            times: Vec::new(),
            values: Vec::new(),
            cum: Vec::new(),
            h_next: scheme.step.initial_h(),
        };
        let v0 = seg.eval_signed(0.0, target, metrics)?;
        seg.times.push(0.0);
        seg.values.push(v0);
        seg.cum.push(vec![0.0; channels]);
        Ok(seg)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn anchor(&self) -> &KineticState {
        &self.anchor
    }

    pub fn knot_times(&self) -> &[f64] {
        &self.times
    }

    pub fn last_knot_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn eval_signed(&self, s: f64, target: &Target, metrics: &mut RunMetrics) -> Result<Vec<f64>> {
        let zt = flow(&self.anchor, s);
        let grad = target.grad_log_density(&zt.x, metrics)?;
        metrics.record_eval(s, &zt.x);
        Ok(signed_event_rates(self.kind, &grad, &zt))
    }

    /// Appends one knot, choosing the spacing per the step policy.
    fn push_knot(&mut self, target: &Target, metrics: &mut RunMetrics) -> Result<()> {
        let k = self.times.len() - 1;
        let s0 = self.times[k];
        let h = match self.scheme.step {
            StepPolicy::Fixed { h } => h,
            StepPolicy::Adaptive {
                tol, h_min, h_max, ..
            } => {
                // The curvature probe uses the SIGNED channel rates, matching
                // the signed knot values the interpolant is built from. The
                // clipped rate is blind right after a jump (identically zero
                // around the zero crossing), which would clamp the step to
                // h_max and let the order-0 surrogate hold rate zero far past
                // the crossing.
                let probe = self.eval_signed(s0 + 0.5 * self.h_next, target, metrics)?;
                let diff: f64 = self.values[k]
                    .iter()
                    .zip(&probe)
                    .map(|(a, b)| (a - b).abs())
                    .sum();
                adapt_step_from(diff, 0.0, self.h_next, tol, (h_min, h_max))
            }
        };
        self.h_next = h;
        let s1 = s0 + h;
        let vals = self.eval_signed(s1, target, metrics)?;
        let cum_new: Vec<f64> = (0..self.channels)
            .map(|c| {
                self.cum[k][c]
                    + clipped_piece_integral(self.scheme.order, self.values[k][c], vals[c], h)
            })
            .collect();
        self.times.push(s1);
        self.values.push(vals);
        self.cum.push(cum_new);
        Ok(())
    }

    /// Extends the knot grid until it covers local time t.
    pub fn extend_to(&mut self, t: f64, target: &Target, metrics: &mut RunMetrics) -> Result<()> {
        while self.last_knot_time() < t {
            self.push_knot(target, metrics)?;
        }
        Ok(())
    }

    fn piece(&self, t: f64) -> usize {
        debug_assert!(t >= 0.0 && t <= self.last_knot_time());
        self.times.partition_point(|&s| s <= t) - 1
    }

    /// The surrogate rate of one channel at local time t (requires the grid
    /// to be extended past t).
    pub fn approx_rate(&self, channel: usize, t: f64) -> f64 {
        let k = self.piece(t);
        if k + 1 == self.times.len() {
            return self.values[k][channel].max(0.0);
        }
        let len = self.times[k + 1] - self.times[k];
        clipped_piece_rate(
            self.scheme.order,
            self.values[k][channel],
            self.values[k + 1][channel],
            len,
            t - self.times[k],
        )
    }

    /// Sum of the surrogate rates over channels at local time t.
    pub fn total_rate(&self, t: f64) -> f64 {
        (0..self.channels).map(|c| self.approx_rate(c, t)).sum()
    }

    /// Exact integral of one channel's surrogate over [0, t].
    pub fn integrated_rate(&self, channel: usize, t: f64) -> f64 {
        let k = self.piece(t);
        if k + 1 == self.times.len() {
            return self.cum[k][channel];
        }
        let len = self.times[k + 1] - self.times[k];
        let s = t - self.times[k];
        let a = self.values[k][channel];
        let b_full = self.values[k + 1][channel];
        let b = a + (b_full - a) * s / len;
        self.cum[k][channel] + clipped_piece_integral(self.scheme.order, a, b, s)
    }

    /// Sum of integrated_rate over channels.
    pub fn total_integrated_rate(&self, t: f64) -> f64 {
        (0..self.channels).map(|c| self.integrated_rate(c, t)).sum()
    }

    /// First time any channel's integrated surrogate reaches its threshold,
    /// scanning and lazily extending pieces up to the horizon. Returns
    /// (time, channel) of the earliest passage, or None if every channel
    /// survives to the horizon.
    pub fn first_passage(
        &mut self,
        thresholds: &[f64],
        horizon: f64,
        target: &Target,
        metrics: &mut RunMetrics,
    ) -> Result<Option<(f64, usize)>> {
        assert_eq!(thresholds.len(), self.channels);
        let mut k = 0usize;
        loop {
            if k + 1 >= self.times.len() {
                if self.last_knot_time() >= horizon {
                    return Ok(None);
                }
                self.push_knot(target, metrics)?;
                continue;
            }
            let s0 = self.times[k];
            if s0 >= horizon {
                return Ok(None);
            }
            let s1 = self.times[k + 1];
            let len_full = s1 - s0;
            let len = s1.min(horizon) - s0;
            let mut best: Option<(f64, usize)> = None;
            for (c, &e) in thresholds.iter().enumerate() {
                let need = e - self.cum[k][c];
                let hit = if need <= 0.0 {
                    // The threshold was crossed at a piece boundary up to
                    // roundoff; fire at the start of this piece.
                    Some(0.0)
                } else {
                    let a = self.values[k][c];
                    let b = a + (self.values[k + 1][c] - a) * len / len_full;
                    clipped_piece_invert(self.scheme.order, a, b, len, need)
                };
                if let Some(s) = hit {
                    let t = s0 + s;
                    if best.is_none_or(|(tb, _)| t < tb) {
                        best = Some((t, c));
                    }
                }
            }
            if let Some((t, c)) = best {
                if t < horizon {
                    return Ok(Some((t, c)));
                }
                return Ok(None);
            }
            k += 1;
        }
    }
}

/// Draws one exponential threshold per channel and returns the first passage
/// before the horizon — the next event time of the surrogate process. For
/// multi-channel dynamics this is the competing-clocks construction: each
/// channel has an independent unit-exponential budget and the minimum wins.
pub fn sample_event_time<R: Rng + ?Sized>(
    seg: &mut RateSegment,
    horizon: f64,
    target: &Target,
    rng: &mut R,
    metrics: &mut RunMetrics,
) -> Result<Option<(f64, usize)>> {
    let thresholds: Vec<f64> = (0..seg.channels()).map(|_| rng.sample(Exp1)).collect();
    seg.first_passage(&thresholds, horizon, target, metrics)
}

/// Integral over [0, len] of the clipped interpolant with signed endpoint
/// values a (left) and b (right).
fn clipped_piece_integral(order: ApproxOrder, a: f64, b: f64, len: f64) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    match order {
        ApproxOrder::Order0 => a.max(0.0) * len,
        ApproxOrder::Order1 => {
            if a <= 0.0 && b <= 0.0 {
                0.0
            } else if a >= 0.0 && b >= 0.0 {
                0.5 * (a + b) * len
            } else if a > 0.0 {
                // Positive then negative: triangle up to the zero crossing.
                let t = len * a / (a - b);
                0.5 * a * t
            } else {
                // Negative then positive: triangle after the zero crossing.
                let t = len * (-a) / (b - a);
                0.5 * b * (len - t)
            }
        }
    }
}

/// Value at local offset s of the clipped interpolant on a piece of length len.
fn clipped_piece_rate(order: ApproxOrder, a: f64, b: f64, len: f64, s: f64) -> f64 {
    match order {
        ApproxOrder::Order0 => a.max(0.0),
        ApproxOrder::Order1 => {
            if len <= 0.0 {
                a.max(0.0)
            } else {
                (a + (b - a) * s / len).max(0.0)
            }
        }
    }
}

/// Solves integral_0^s (p + k u) du = m for a nonnegative linear rate on
/// [0, len]; None if the mass is not reached within the piece.
fn invert_linear(p: f64, k: f64, len: f64, m: f64) -> Option<f64> {
    let total = p * len + 0.5 * k * len * len;
    if m > total {
        return None;
    }
    let disc = (p * p + 2.0 * k * m).max(0.0);
    let denom = p + disc.sqrt();
    if denom <= 0.0 {
        return None;
    }
    Some((2.0 * m / denom).min(len))
}

/// Inversion of the clipped-piece integral: first s with mass m accrued.
fn clipped_piece_invert(order: ApproxOrder, a: f64, b: f64, len: f64, m: f64) -> Option<f64> {
    debug_assert!(m > 0.0);
    if len <= 0.0 {
        return None;
    }
    match order {
        ApproxOrder::Order0 => {
            let r = a.max(0.0);
            if r * len >= m {
                Some(m / r)
            } else {
                None
            }
        }
        ApproxOrder::Order1 => {
            let k = (b - a) / len;
            if a >= 0.0 && b >= 0.0 {
                invert_linear(a, k, len, m)
            } else if a <= 0.0 && b <= 0.0 {
                None
            } else if a > 0.0 {
                let t_star = len * a / (a - b);
                invert_linear(a, k, t_star, m)
            } else {
                let t_star = len * (-a) / (b - a);
                invert_linear(0.0, k, len - t_star, m).map(|s| t_star + s)
            }
        }
    }
}
