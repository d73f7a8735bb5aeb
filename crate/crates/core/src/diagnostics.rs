//! Chain quality diagnostics: effective sample size via the initial
//! positive sequence estimator (pairing autocorrelations at consecutive even
//! and odd lags and truncating at the first nonpositive pair).

/// ESS of a scalar chain, with a flag for degenerate (constant) input.
#[derive(Debug, Clone, Copy)]
pub struct EssEstimate {
    pub value: f64,
    pub degenerate: bool,
}

/// Effective sample size: n / (1 + 2 * sum of autocorrelations), where the
/// sum is truncated where the paired-lag sums Gamma_m = rho_{2m} + rho_{2m+1}
/// first turn nonpositive. A constant chain has no autocorrelation structure
/// and reports 0 with the degenerate flag set.
pub fn ess(chain: &[f64]) -> EssEstimate {
    let n = chain.len();
    assert!(n >= 10, "ess needs at least 10 samples");
    let mean = chain.iter().sum::<f64>() / n as f64;
    let c0: f64 = chain.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return EssEstimate {
            value: 0.0,
            degenerate: true,
        };
    }
    let autocov = |lag: usize| -> f64 {
        chain[..n - lag]
            .iter()
            .zip(&chain[lag..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / n as f64
    };
    // Gamma_0 pairs rho_0 = 1 with rho_1; the integrated autocorrelation time
    // is tau = -1 + 2 * sum of the positive initial pairs.
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let gamma = (autocov(2 * m) + autocov(2 * m + 1)) / c0;
        if gamma <= 0.0 {
            break;
        }
        tau += 2.0 * gamma;
        m += 1;
    }
    EssEstimate {
        value: n as f64 / tau.max(f64::MIN_POSITIVE),
        degenerate: false,
    }
}
