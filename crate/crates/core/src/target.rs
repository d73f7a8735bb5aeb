//! Differentiable log-density targets behind a single enum: the standard
//! Gaussian, a rescaled Gaussian pi_sigma(x) = pi(sigma x), and Neal's funnel.

use crate::error::{Error, Result};
use crate::metrics::RunMetrics;

const LN_2PI: f64 = 1.8378770664093453;

/// A target distribution with analytic log-density and gradient.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Standard Gaussian N(0, I_d).
    Gaussian { d: usize },
    /// pi_sigma(x) = pi(sigma x) for a standard Gaussian pi, including the
    /// sigma^d Jacobian so the density integrates to one.
    ScaledGaussian { d: usize, sigma: f64 },
    /// Neal's funnel: x1 ~ N(0, a^2), x2 | x1 ~ N(0, exp(x1/b)) where
    /// exp(x1/b) is the variance.
    Funnel { a: f64, b: f64 },
}

impl Target {
    pub fn dim(&self) -> usize {
        match self {
            Target::Gaussian { d } | Target::ScaledGaussian { d, .. } => *d,
            Target::Funnel { .. } => 2,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// log pi(x), normalizing constant included.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(match self {
            Target::Gaussian { d } => {
                let sq: f64 = x.iter().map(|xi| xi * xi).sum();
                -0.5 * sq - 0.5 * (*d as f64) * LN_2PI
            }
            Target::ScaledGaussian { d, sigma } => {
                let sq: f64 = x.iter().map(|xi| (sigma * xi).powi(2)).sum();
                -0.5 * sq - 0.5 * (*d as f64) * LN_2PI + (*d as f64) * sigma.ln()
            }
            Target::Funnel { a, b } => {
                let (x1, x2) = (x[0], x[1]);
                -x1 * x1 / (2.0 * a * a)
                    - 0.5 * (LN_2PI + 2.0 * a.ln())
                    - 0.5 * x2 * x2 * (-x1 / b).exp()
                    - 0.5 * LN_2PI
                    - x1 / (2.0 * b)
            }
        })
    }

    /// grad log pi(x). Counts as exactly one gradient evaluation.
    pub fn grad_log_density(&self, x: &[f64], metrics: &mut RunMetrics) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        metrics.gradient_evaluations += 1;
        Ok(match self {
            Target::Gaussian { .. } => x.iter().map(|xi| -xi).collect(),
            Target::ScaledGaussian { sigma, .. } => {
                x.iter().map(|xi| -sigma * sigma * xi).collect()
            }
            Target::Funnel { a, b } => {
                let (x1, x2) = (x[0], x[1]);
                let inv_var = (-x1 / b).exp();
                vec![
                    -x1 / (a * a) + 0.5 * x2 * x2 * inv_var / b - 0.5 / b,
                    -x2 * inv_var,
                ]
            }
        })
    }
}

impl std::fmt::Display for Target {
    /// The CLI spec string; round-trips through `parse_target`.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::Gaussian { d } => write!(f, "gaussian:d={d}"),
            Target::ScaledGaussian { d, sigma } => write!(f, "scaled-gaussian:d={d},sigma={sigma}"),
            Target::Funnel { a, b } => write!(f, "funnel:a={a},b={b}"),
        }
    }
}

/// Parses a CLI target spec: "gaussian:d=<int>",
/// "scaled-gaussian:d=<int>,sigma=<real>", "funnel:a=<real>,b=<real>".
pub fn parse_target(spec: &str) -> std::result::Result<Target, String> {
    let (family, args) = match spec.split_once(':') {
        Some((f, a)) => (f, a),
        None => (spec, ""),
    };
    let mut kv = std::collections::HashMap::new();
    for part in args.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("bad target parameter {part:?}"))?;
        kv.insert(k.trim(), v.trim());
    }
    let get = |kv: &std::collections::HashMap<&str, &str>,
               key: &str|
     -> std::result::Result<f64, String> {
        kv.get(key)
            .ok_or_else(|| format!("target {family:?} needs parameter {key:?}"))?
            .parse::<f64>()
            .map_err(|e| format!("bad value for {key}: {e}"))
    };
    match family {
        "gaussian" => {
            let d = get(&kv, "d")? as usize;
            if d == 0 {
                return Err("gaussian needs d >= 1".into());
            }
            Ok(Target::Gaussian { d })
        }
        "scaled-gaussian" => {
            let d = get(&kv, "d")? as usize;
            let sigma = get(&kv, "sigma")?;
            if d == 0 || sigma <= 0.0 {
                return Err("scaled-gaussian needs d >= 1 and sigma > 0".into());
            }
            Ok(Target::ScaledGaussian { d, sigma })
        }
        "funnel" => {
            let a = get(&kv, "a")?;
            let b = get(&kv, "b")?;
            if a <= 0.0 || b == 0.0 {
                return Err("funnel needs a > 0 and b != 0".into());
            }
            Ok(Target::Funnel { a, b })
        }
        other => Err(format!("unknown target family {other:?}")),
    }
}
