use serde::{Deserialize, Serialize};

use super::RadioError;
use crate::engine::RngStream;
use crate::model::{Nanos, NS_PER_MS};

/// A radio channel a gateway can use, e.g. a WiFi channel or a 5G carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub id: String,
    /// Mean quality score in [0, 1].
    pub baseline: f64,
    /// Half-width of the uniform noise added to every sample.
    #[serde(default)]
    pub variation: f64,
}

/// From `time_ns` on, `channel` has mean quality `score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityScriptEntry {
    pub time_ns: Nanos,
    pub channel: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QualityConfig {
    pub sample_period_ns: Nanos,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub channels: Vec<ChannelSpec>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub script: Vec<QualityScriptEntry>,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self { sample_period_ns: 100 * NS_PER_MS, channels: Vec::new(), script: Vec::new() }
    }
}

impl QualityConfig {
    pub fn channel(&self, id: &str) -> Option<&ChannelSpec> {
        self.channels.iter().find(|c| c.id == id)
    }

    pub fn sampler(&self, channel: &str, seed: u64) -> Result<QualitySampler, RadioError> {
        let spec = self.channel(channel).ok_or_else(|| RadioError::UnknownChannel(channel.to_string()))?;
        let mut steps: Vec<(Nanos, f64)> =
            self.script.iter().filter(|e| e.channel == channel).map(|e| (e.time_ns, e.score)).collect();
        steps.sort_by_key(|&(t, _)| t);
        Ok(QualitySampler {
            channel: spec.id.clone(),
            level: spec.baseline,
            variation: spec.variation,
            steps,
            next_step: 0,
            period: self.sample_period_ns.max(1),
            next_time: 0,
            rng: RngStream::derive(seed, &format!("quality/{channel}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkQualitySample {
    pub time: Nanos,
    pub channel: String,
    pub score: f64,
}

/// Sequential sampler for one channel; samples at 0, p, 2p, ...
#[derive(Debug, Clone)]
pub struct QualitySampler {
    channel: String,
    level: f64,
    variation: f64,
    steps: Vec<(Nanos, f64)>,
    next_step: usize,
    period: Nanos,
    next_time: Nanos,
    rng: RngStream,
}

impl QualitySampler {
    pub fn channel(&self) -> &str {
        &self.channel
    }

    pub fn next_time(&self) -> Nanos {
        self.next_time
    }

    pub fn next_sample(&mut self) -> LinkQualitySample {
        let t = self.next_time;
        while self.next_step < self.steps.len() && self.steps[self.next_step].0 <= t {
            self.level = self.steps[self.next_step].1;
            self.next_step += 1;
        }
        let noise = if self.variation > 0.0 { self.rng.uniform(-self.variation, self.variation) } else { 0.0 };
        self.next_time += self.period;
        LinkQualitySample { time: t, channel: self.channel.clone(), score: (self.level + noise).clamp(0.0, 1.0) }
    }

    /// Advance to the latest sample at or before `t` and return it.
    pub fn sample_at(&mut self, t: Nanos) -> LinkQualitySample {
        let mut last = self.next_sample();
        while self.next_time <= t {
            last = self.next_sample();
        }
        last
    }
}

/// Full trace of `channel` over `[0, duration]`.
pub fn quality_trace(
    cfg: &QualityConfig,
    channel: &str,
    duration: Nanos,
    seed: u64,
) -> Result<Vec<LinkQualitySample>, RadioError> {
    let mut s = cfg.sampler(channel, seed)?;
    let mut out = Vec::new();
    while s.next_time() <= duration {
        out.push(s.next_sample());
    }
    Ok(out)
}
