//! Kinetic states, linear flows, event rates, jump maps and velocity
//! refreshment for the Bouncy Particle Sampler and the Zig-Zag process.

use crate::error::{Error, Result};
use crate::metrics::RunMetrics;
use crate::target::Target;
use rand::Rng;
use rand_distr::StandardNormal;

/// Which PDMP family is being simulated. Selects the rate and jump maps
/// consistently across the whole pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsKind {
    Bps,
    ZigZag,
}

impl DynamicsKind {
    /// Number of jump channels: one bounce channel for BPS, one flip channel
    /// per coordinate for Zig-Zag.
    pub fn channels(&self, d: usize) -> usize {
        match self {
            DynamicsKind::Bps => 1,
            DynamicsKind::ZigZag => d,
        }
    }
}

/// A kinetic particle: position, velocity, and the time direction used by the
/// Metropolis kernel on the doubled space.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub gamma: i8,
}

impl KineticState {
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Self {
        assert_eq!(x.len(), v.len());
        Self { x, v, gamma: 1 }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Moves the state along the straight-line flow for time t: x + gamma*t*v.
pub fn flow(z: &KineticState, t: f64) -> KineticState {
    debug_assert!(t >= 0.0);
    let s = z.gamma as f64 * t;
    KineticState {
        x: z.x.iter().zip(&z.v).map(|(xi, vi)| xi + s * vi).collect(),
        v: z.v.clone(),
        gamma: z.gamma,
    }
}

/// Reverses the velocity while keeping position and gamma. Running the
/// forward process from the flipped state realizes the time-reversed process
/// for both BPS and Zig-Zag.
pub fn flip_conjugate(z: &KineticState) -> KineticState {
    KineticState {
        x: z.x.clone(),
        v: z.v.iter().map(|vi| -vi).collect(),
        gamma: z.gamma,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The signed rate before clipping: the event rate is `signed.max(0)`.
///
/// BPS: -grad log pi(x) . gamma*v (single channel).
/// Zig-Zag channel i: -gamma*v_i * d_i log pi(x).
pub fn signed_event_rates(kind: DynamicsKind, grad: &[f64], z: &KineticState) -> Vec<f64> {
    let g = z.gamma as f64;
    match kind {
        DynamicsKind::Bps => vec![-g * dot(grad, &z.v)],
        DynamicsKind::ZigZag => grad.iter().zip(&z.v).map(|(gi, vi)| -g * vi * gi).collect(),
    }
}

/// The event rate of a single jump channel (0-based).
pub fn event_rate(
    kind: DynamicsKind,
    target: &Target,
    z: &KineticState,
    channel: usize,
    metrics: &mut RunMetrics,
) -> Result<f64> {
    let grad = target.grad_log_density(&z.x, metrics)?;
    Ok(signed_event_rates(kind, &grad, z)[channel].max(0.0))
}

/// Applies the jump map of the given channel at z. BPS reflects v against the
/// normalized gradient; Zig-Zag flips the channel's velocity component.
pub fn jump(
    kind: DynamicsKind,
    target: &Target,
    z: &KineticState,
    channel: usize,
    metrics: &mut RunMetrics,
) -> Result<KineticState> {
    let mut out = z.clone();
    match kind {
        DynamicsKind::Bps => {
            let grad = target.grad_log_density(&z.x, metrics)?;
            let norm = dot(&grad, &grad).sqrt();
            if norm < 1e-13 {
                return Err(Error::DegenerateGradient { norm });
            }
            let n: Vec<f64> = grad.iter().map(|g| g / norm).collect();
            let nv = dot(&n, &z.v);
            for (vi, ni) in out.v.iter_mut().zip(&n) {
                *vi -= 2.0 * nv * ni;
            }
        }
        DynamicsKind::ZigZag => {
            out.v[channel] = -out.v[channel];
        }
    }
    Ok(out)
}

/// Draws a fresh velocity: uniform on the unit sphere for BPS, uniform on
/// {-1,+1}^d for Zig-Zag.
pub fn refresh_velocity<R: Rng + ?Sized>(kind: DynamicsKind, d: usize, rng: &mut R) -> Vec<f64> {
    match kind {
        DynamicsKind::Bps => loop {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = dot(&v, &v).sqrt();
            if norm > 1e-12 {
                return v.into_iter().map(|vi| vi / norm).collect();
            }
        },
        DynamicsKind::ZigZag => (0..d)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect(),
    }
}
