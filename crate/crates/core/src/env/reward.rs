use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::sim::SimMetrics;

/// `alpha / (1000 * t_ms) - beta * cost_rate_norm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSpec {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
        }
    }
}

impl RewardSpec {
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            out.push(("alpha", format!("must be > 0, got {}", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            out.push(("beta", format!("must be >= 0, got {}", self.beta)));
        }
        out
    }
}

/// Reward falls as the inverse of processing time, i.e. 1 / (time in microseconds) when alpha = 1.
pub fn compute_reward(processing_time_ms: f64, cost_rate_norm: f64, spec: &RewardSpec) -> Result<f64, EnvError> {
    if !(processing_time_ms.is_finite() && processing_time_ms > 0.0) {
        return Err(EnvError::Domain(format!(
            "processing time must be positive, got {processing_time_ms}"
        )));
    }
    Ok(spec.alpha / (1000.0 * processing_time_ms) - spec.beta * cost_rate_norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SloKind {
    MaxLatencyMs,
    MinThroughputTps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SloSpec {
    pub kind: SloKind,
    pub threshold: f64,
}

impl Default for SloSpec {
    fn default() -> Self {
        Self {
            kind: SloKind::MaxLatencyMs,
            threshold: 1000.0,
        }
    }
}

impl SloSpec {
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        if self.threshold.is_finite() && self.threshold > 0.0 {
            Vec::new()
        } else {
            vec![("threshold", format!("must be > 0, got {}", self.threshold))]
        }
    }

    /// Inclusive on both kinds.
    pub fn satisfied_by(&self, latency_ms: f64, throughput_tps: f64) -> bool {
        match self.kind {
            SloKind::MaxLatencyMs => latency_ms <= self.threshold,
            SloKind::MinThroughputTps => throughput_tps >= self.threshold,
        }
    }
}

pub fn slo_satisfied(metrics: &SimMetrics, slo: &SloSpec) -> bool {
    slo.satisfied_by(metrics.latency_ms, metrics.throughput_tps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn metrics(latency_ms: f64, throughput_tps: f64) -> SimMetrics {
        SimMetrics {
            processing_time_ms: latency_ms,
            throughput_tps,
            latency_ms,
            queue_lengths: vec![],
            backpressure: false,
            cpu_util_pct: 0.0,
            mem_util_pct: 0.0,
            infra_cost_rate: 0.0,
            contention: 1.0,
        }
    }

    #[test]
    fn reward_examples() {
        let spec = RewardSpec::default();
        let r = compute_reward(419.0, 0.0, &spec).unwrap();
        assert!((r - 2.3866e-06).abs() < 1e-10);
        assert_eq!(r, 1.0 / 419_000.0);
        let r = compute_reward(77.0, 0.3, &spec).unwrap();
        assert!((r - 1.2987e-05).abs() < 1e-9);
        let r = compute_reward(1e9, 0.0, &spec).unwrap();
        assert!(r > 0.0 && r < 1e-11);
    }

    #[test]
    fn nonpositive_time_is_domain_error() {
        let spec = RewardSpec::default();
        assert!(compute_reward(0.0, 0.0, &spec).is_err());
        assert!(compute_reward(-5.0, 0.0, &spec).is_err());
        assert!(compute_reward(f64::NAN, 0.0, &spec).is_err());
    }

    #[test]
    fn reported_band_is_reproduced() {
        let spec = RewardSpec::default();
        assert!(compute_reward(476.0, 0.0, &spec).unwrap() >= 2.10e-06);
        assert!(compute_reward(77.0, 0.0, &spec).unwrap() <= 1.30e-05);
    }

    #[test]
    fn slo_is_inclusive() {
        let max = SloSpec {
            kind: SloKind::MaxLatencyMs,
            threshold: 500.0,
        };
        assert!(slo_satisfied(&metrics(400.0, 0.0), &max));
        assert!(slo_satisfied(&metrics(500.0, 0.0), &max));
        assert!(!slo_satisfied(&metrics(600.0, 0.0), &max));
        let min = SloSpec {
            kind: SloKind::MinThroughputTps,
            threshold: 150.0,
        };
        assert!(slo_satisfied(&metrics(1.0, 150.0), &min));
        assert!(!slo_satisfied(&metrics(1.0, 149.9), &min));
    }

    proptest! {
        #[test]
        fn reward_strictly_decreasing(a in 1.0f64..1e6, d in 1e-3f64..1e3, beta in 0.0f64..1e-6, c in 0.0f64..1.0) {
            let spec = RewardSpec { alpha: 1.0, beta };
            prop_assert!(compute_reward(a, c, &spec).unwrap() > compute_reward(a + d, c, &spec).unwrap());
        }

        #[test]
        fn reward_times_time_is_alpha(t in 250.0f64..2760.0, alpha in 0.1f64..10.0) {
            let spec = RewardSpec { alpha, beta: 0.0 };
            let r = compute_reward(t, 0.0, &spec).unwrap();
            prop_assert!((r * t * 1000.0 - alpha).abs() <= 1e-12 * alpha);
        }
    }
}
