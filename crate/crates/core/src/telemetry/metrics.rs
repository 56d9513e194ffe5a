//! In-memory time series store backing the state manager.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TelemetryError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    /// Environment step or simulated ms; nondecreasing per name.
    pub timestamp: u64,
    pub name: String,
    pub value: f64,
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
}

impl MetricSample {
    pub fn new(timestamp: u64, name: impl Into<String>, value: f64) -> Self {
        Self {
            timestamp,
            name: name.into(),
            value,
            tags: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Mean,
    Max,
    Min,
}

#[derive(Debug, Clone, Default)]
pub struct MetricStore {
    series: BTreeMap<String, Vec<MetricSample>>,
}

impl MetricStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, sample: MetricSample) -> Result<(), TelemetryError> {
        if sample.name.is_empty() {
            return Err(TelemetryError::InvalidSample("metric name is empty".into()));
        }
        if !sample.value.is_finite() {
            return Err(TelemetryError::InvalidSample(format!(
                "{} has non-finite value {}",
                sample.name, sample.value
            )));
        }
        let series = self.series.entry(sample.name.clone()).or_default();
        if let Some(last) = series.last() {
            if sample.timestamp < last.timestamp {
                return Err(TelemetryError::Ordering {
                    name: sample.name,
                    last: last.timestamp,
                    got: sample.timestamp,
                });
            }
        }
        series.push(sample);
        Ok(())
    }

    pub fn samples(&self, name: &str) -> &[MetricSample] {
        self.series.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Aggregate over the most recent `min(last_n, count)` samples of `name`.
    pub fn query_window(&self, name: &str, last_n: usize, agg: Aggregation) -> Result<f64, TelemetryError> {
        let series = self
            .series
            .get(name)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| TelemetryError::UnknownMetric(name.to_string()))?;
        if last_n == 0 {
            return Err(TelemetryError::InvalidSample("window length must be >= 1".into()));
        }
        let window = &series[series.len().saturating_sub(last_n)..];
        let values = window.iter().map(|s| s.value);
        Ok(match agg {
            Aggregation::Mean => values.sum::<f64>() / window.len() as f64,
            Aggregation::Max => values.fold(f64::NEG_INFINITY, f64::max),
            Aggregation::Min => values.fold(f64::INFINITY, f64::min),
        })
    }
}
