use serde::{Deserialize, Serialize};

use super::DeviceError;
use crate::model::{Nanos, NS_PER_SEC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LoopMode {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StallEntry {
    pub time_ns: Nanos,
    pub axis: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actuator {
    pub axes: u32,
    #[serde(rename = "loop")]
    pub loop_mode: LoopMode,
    pub steps_per_unit: f64,
    #[serde(default = "default_speed")]
    pub speed_units_per_s: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stall_script: Vec<StallEntry>,
}

fn default_speed() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MotionResult {
    pub commanded: f64,
    /// Position the controller believes it reached.
    pub reached: f64,
    /// True mechanical position.
    pub actual: f64,
    pub stall_detected: bool,
    pub finished_at: Nanos,
}

impl MotionResult {
    /// Undetected error: belief minus truth.
    pub fn position_error(&self) -> f64 {
        self.reached - self.actual
    }
}

impl Actuator {
    pub fn validate(&self) -> Result<(), String> {
        if self.axes == 0 {
            return Err("axes must be >= 1".into());
        }
        if !(self.steps_per_unit > 0.0) || !(self.speed_units_per_s > 0.0) {
            return Err("steps_per_unit and speed_units_per_s must be > 0".into());
        }
        Ok(())
    }

    /// Moves `axis` by `units` starting at `start`. A stall scheduled for
    /// the axis within the move stops the mechanics at the last full step.
    pub fn actuate(&self, axis: u32, units: f64, start: Nanos) -> Result<MotionResult, DeviceError> {
        if axis >= self.axes {
            return Err(DeviceError::BadAxis { axis, axes: self.axes });
        }
        let duration = (units.abs() / self.speed_units_per_s * NS_PER_SEC as f64).round() as Nanos;
        let end = start + duration;
        let stall = self
            .stall_script
            .iter()
            .filter(|s| s.axis == axis && s.time_ns >= start && s.time_ns < end)
            .map(|s| s.time_ns)
            .min();
        let Some(t) = stall else {
            return Ok(MotionResult { commanded: units, reached: units, actual: units, stall_detected: false, finished_at: end });
        };
        let done = (t - start) as f64 / NS_PER_SEC as f64 * self.speed_units_per_s;
        let steps = (done * self.steps_per_unit).floor();
        let actual = (steps / self.steps_per_unit).min(units.abs()) * units.signum();
        Ok(match self.loop_mode {
            LoopMode::Closed => MotionResult { commanded: units, reached: actual, actual, stall_detected: true, finished_at: t },
            LoopMode::Open => MotionResult { commanded: units, reached: units, actual, stall_detected: false, finished_at: end },
        })
    }
}
