//! Hamiltonian Monte Carlo baseline: leapfrog integration with a Metropolis
//! correction, fixed step size and leapfrog count.

use crate::error::Result;
use crate::metrics::RunMetrics;
use crate::target::Target;
use rand::Rng;
use rand_distr::StandardNormal;

/// Fixed-step HMC configuration.
#[derive(Debug, Clone, Copy)]
pub struct HMCConfig {
    pub epsilon: f64,
    pub leapfrog_steps: usize,
}

impl HMCConfig {
    pub fn new(epsilon: f64, leapfrog_steps: usize) -> Self {
        assert!(epsilon > 0.0 && leapfrog_steps >= 1);
        Self {
            epsilon,
            leapfrog_steps,
        }
    }
}

/// Result of one leapfrog integration.
#[derive(Debug, Clone)]
pub struct LeapfrogResult {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// Set when the trajectory produced non-finite energy; such proposals are
    /// always rejected.
    pub diverged: bool,
}

/// Velocity-half-step leapfrog with gradient reuse across steps: exactly
/// L + 1 gradient evaluations for L steps. Time-reversible: negating the
/// output velocity and re-integrating returns the start point.
pub fn leapfrog(
    target: &Target,
    x0: &[f64],
    v0: &[f64],
    epsilon: f64,
    steps: usize,
    metrics: &mut RunMetrics,
) -> Result<LeapfrogResult> {
    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let mut grad = target.grad_log_density(&x, metrics)?;
    for _ in 0..steps {
        for (vi, gi) in v.iter_mut().zip(&grad) {
            *vi += 0.5 * epsilon * gi;
        }
        for (xi, vi) in x.iter_mut().zip(&v) {
            *xi += epsilon * vi;
        }
        if x.iter().any(|xi| !xi.is_finite()) {
            return Ok(LeapfrogResult {
                x,
                v,
                diverged: true,
            });
        }
        grad = target.grad_log_density(&x, metrics)?;
        for (vi, gi) in v.iter_mut().zip(&grad) {
            *vi += 0.5 * epsilon * gi;
        }
    }
    let diverged = v.iter().any(|vi| !vi.is_finite());
    Ok(LeapfrogResult { x, v, diverged })
}

fn hamiltonian(target: &Target, x: &[f64], v: &[f64]) -> Result<f64> {
    let kinetic: f64 = v.iter().map(|vi| 0.5 * vi * vi).sum();
    Ok(-target.log_density(x)? + kinetic)
}

/// One HMC step: Gaussian momentum refresh, leapfrog, Metropolis accept with
/// probability min(1, exp(H - H')). Divergent trajectories are rejected.
pub fn hmc_step<R: Rng + ?Sized>(
    x: &[f64],
    cfg: &HMCConfig,
    target: &Target,
    rng: &mut R,
    metrics: &mut RunMetrics,
) -> Result<Vec<f64>> {
    let v: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
    let h0 = hamiltonian(target, x, &v)?;
    let prop = leapfrog(target, x, &v, cfg.epsilon, cfg.leapfrog_steps, metrics)?;
    metrics.steps += 1;
    metrics.mh_proposals += 1;
    if prop.diverged {
        return Ok(x.to_vec());
    }
    let h1 = hamiltonian(target, &prop.x, &prop.v)?;
    if !h1.is_finite() {
        return Ok(x.to_vec());
    }
    let u: f64 = rng.random();
    if u.ln() < h0 - h1 {
        metrics.mh_accepts += 1;
        Ok(prop.x)
    } else {
        Ok(x.to_vec())
    }
}
