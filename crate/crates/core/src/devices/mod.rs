//! Wireless sensor devices with a battery model, automation sensors and
//! actuators with open or closed loop motion.

mod actuator;
mod energy;
mod sensors;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use actuator::{Actuator, LoopMode, MotionResult, StallEntry};
pub use energy::{lifetime_estimate, simulate_lifetime, Battery, DeviceState, EnergyOp, EnergyParams};
pub use sensors::{fuse_orientation, sample_all, sample_sensor, SensorKind, SensorRecord, SensorValue, FIELDBUS_WORDS};

use crate::model::Nanos;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeviceError {
    #[error("unknown sensor channel {0}")]
    UnknownChannel(String),
    #[error("axis {axis} out of range for actuator with {axes} axes")]
    BadAxis { axis: u32, axes: u32 },
}

/// Configuration of one wireless sensor device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WirelessSensorDevice {
    pub sensors: Vec<SensorKind>,
    #[serde(default)]
    pub energy: EnergyParams,
    pub sample_period_ns: Nanos,
    /// Samples whose magnitude exceeds this are flagged as alarms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alarm_threshold: Option<f64>,
}

impl WirelessSensorDevice {
    pub fn validate(&self) -> Result<(), String> {
        self.energy.validate()?;
        if self.sample_period_ns == 0 {
            return Err("sample_period_ns must be > 0".into());
        }
        if self.sensors.contains(&SensorKind::Orientation) {
            return Err("orientation is derived by fusion and cannot be configured".into());
        }
        Ok(())
    }
}
