/// A rate-evaluation sample recorded for trajectory dumps: the global time of
/// the evaluation and the position where the gradient was taken.
#[derive(Debug, Clone)]
pub struct EvalPoint {
    pub time: f64,
    pub position: Vec<f64>,
}

/// Per-chain complexity counters. Gradient evaluations are the unit of cost
/// for the approximate samplers; events for the exact ones.
#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub gradient_evaluations: u64,
    pub events: u64,
    pub steps: u64,
    pub mh_proposals: u64,
    pub mh_accepts: u64,
    pub wall_time: f64,
    /// When set, every rate evaluation is appended here (used by the
    /// trajectory-dump mode). `trace_offset` is the global time of the
    /// current segment anchor.
    pub eval_trace: Option<Vec<EvalPoint>>,
    pub(crate) trace_offset: f64,
    /// +1.0 when local times run with global time, -1.0 while simulating the
    /// backward side of a trajectory window.
    pub(crate) trace_sign: f64,
}

impl Default for RunMetrics {
    fn default() -> Self {
        Self {
            gradient_evaluations: 0,
            events: 0,
            steps: 0,
            mh_proposals: 0,
            mh_accepts: 0,
            wall_time: 0.0,
            eval_trace: None,
            trace_offset: 0.0,
            trace_sign: 1.0,
        }
    }
}

impl RunMetrics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_trace() -> Self {
        Self {
            eval_trace: Some(Vec::new()),
            ..Self::default()
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.mh_proposals == 0 {
            f64::NAN
        } else {
            self.mh_accepts as f64 / self.mh_proposals as f64
        }
    }

    pub(crate) fn record_eval(&mut self, local_time: f64, position: &[f64]) {
        if let Some(trace) = self.eval_trace.as_mut() {
            trace.push(EvalPoint {
                time: self.trace_offset + self.trace_sign * local_time,
                position: position.to_vec(),
            });
        }
    }
}
