//! The Metropolis-adjusted surrogate-process kernel on the doubled space
//! (state, time direction): simulate a whole window, then accept or reject it
//! against the ratio of target-weighted reverse and forward path densities.

use crate::dynamics::{flip_conjugate, DynamicsKind, KineticState};
use crate::error::Result;
use crate::metrics::RunMetrics;
use crate::path::{path_log_density, reverse_path, simulate};
use crate::rate::ApproxScheme;
use crate::target::Target;
use rand::Rng;

/// Configuration of the fixed-window Metropolis kernel.
#[derive(Debug, Clone, Copy)]
pub struct MHConfig {
    pub horizon: f64,
    pub kind: DynamicsKind,
    pub scheme: ApproxScheme,
}

impl MHConfig {
    pub fn new(horizon: f64, kind: DynamicsKind, scheme: ApproxScheme) -> Self {
        assert!(horizon > 0.0);
        Self {
            horizon,
            kind,
            scheme,
        }
    }
}

/// One kernel step. Simulates the surrogate process for the window in the
/// state's current time direction (backward realized by flipping the velocity
/// and running forward), and accepts the whole path with probability
///
///   min(1, pi(x_T) p(R(w) | z_T') / [pi(x_0) p(w | z_0)])
///
/// computed in log space. Acceptance moves to the window endpoint with the
/// time direction negated; rejection returns the input state bit-for-bit.
pub fn mh_pdmp_step<R: Rng + ?Sized>(
    z: &KineticState,
    cfg: &MHConfig,
    target: &Target,
    rng: &mut R,
    metrics: &mut RunMetrics,
) -> Result<KineticState> {
    // Fold the time direction into the velocity so the simulation always runs
    // forward in local time.
    let sim_start = if z.gamma == 1 {
        KineticState {
            x: z.x.clone(),
            v: z.v.clone(),
            gamma: 1,
        }
    } else {
        let mut s = flip_conjugate(z);
        s.gamma = 1;
        s
    };
    let (w, log_cond_fwd) = simulate(
        sim_start,
        cfg.horizon,
        cfg.kind,
        cfg.scheme,
        target,
        rng,
        metrics,
    )?;
    let rw = reverse_path(&w)?;
    let rev = path_log_density(&rw, cfg.kind, target, cfg.scheme, metrics)?;
    let endpoint = w.endpoint();

    let log_alpha = target.log_density(&endpoint.x)? + rev.log_conditional
        - target.log_density(&w.initial.x)?
        - log_cond_fwd;

    metrics.steps += 1;
    metrics.mh_proposals += 1;
    let u: f64 = rng.random();
    if u.ln() < log_alpha {
        metrics.mh_accepts += 1;
        // Unfold the time direction: the endpoint velocity lives in the
        // simulation frame.
        let v = if z.gamma == 1 {
            endpoint.v.clone()
        } else {
            endpoint.v.iter().map(|vi| -vi).collect()
        };
        Ok(KineticState {
            x: endpoint.x,
            v,
            gamma: -z.gamma,
        })
    } else {
        Ok(z.clone())
    }
}
