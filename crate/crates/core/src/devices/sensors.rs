use serde::{Deserialize, Serialize};

use super::DeviceError;
use crate::engine::RngStream;
use crate::model::{Nanos, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SensorKind {
    #[serde(rename = "accel_3axis")]
    Accel3Axis,
    #[serde(rename = "gyro_3axis")]
    Gyro3Axis,
    #[serde(rename = "magnet_3axis")]
    Magnet3Axis,
    #[serde(rename = "light")]
    Light,
    #[serde(rename = "acoustic")]
    Acoustic,
    #[serde(rename = "humidity")]
    Humidity,
    #[serde(rename = "temperature")]
    Temperature,
    #[serde(rename = "position")]
    Position,
    #[serde(rename = "smoke")]
    Smoke,
    #[serde(rename = "gas")]
    Gas,
    /// 1-bit automation sensor, values in {0, 1}.
    #[serde(rename = "digital")]
    Digital,
    /// 0–24 V analog automation sensor.
    #[serde(rename = "analog")]
    Analog,
    /// Fieldbus device delivering a structured record.
    #[serde(rename = "fieldbus")]
    Fieldbus,
    /// Output of the orientation fusion; never configured directly.
    #[serde(rename = "orientation")]
    Orientation,
}

impl SensorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Accel3Axis => "accel_3axis",
            SensorKind::Gyro3Axis => "gyro_3axis",
            SensorKind::Magnet3Axis => "magnet_3axis",
            SensorKind::Light => "light",
            SensorKind::Acoustic => "acoustic",
            SensorKind::Humidity => "humidity",
            SensorKind::Temperature => "temperature",
            SensorKind::Position => "position",
            SensorKind::Smoke => "smoke",
            SensorKind::Gas => "gas",
            SensorKind::Digital => "digital",
            SensorKind::Analog => "analog",
            SensorKind::Fieldbus => "fieldbus",
            SensorKind::Orientation => "orientation",
        }
    }

    pub fn is_three_axis(self) -> bool {
        matches!(self, SensorKind::Accel3Axis | SensorKind::Gyro3Axis | SensorKind::Magnet3Axis)
    }
}

/// Words per fieldbus record.
pub const FIELDBUS_WORDS: usize = 4;
const RECORD_HEADER_BYTES: u32 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SensorValue {
    Scalar(f64),
    Vector([f64; 3]),
    Structured(Vec<f64>),
}

impl SensorValue {
    pub fn size_bytes(&self) -> u32 {
        match self {
            SensorValue::Scalar(_) => 8,
            SensorValue::Vector(_) => 24,
            SensorValue::Structured(w) => 8 * w.len() as u32,
        }
    }

    /// Scalar magnitude used for alarm thresholds.
    pub fn magnitude(&self) -> f64 {
        match self {
            SensorValue::Scalar(x) => *x,
            SensorValue::Vector(v) => (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt(),
            SensorValue::Structured(w) => w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRecord {
    pub device: NodeId,
    pub time: Nanos,
    pub channel: SensorKind,
    pub value: SensorValue,
    pub alarm: bool,
}

impl SensorRecord {
    pub fn size_bytes(&self) -> u32 {
        RECORD_HEADER_BYTES + self.value.size_bytes()
    }
}

fn draw(kind: SensorKind, rng: &mut RngStream) -> SensorValue {
    let mut vec3 = |lo, hi| SensorValue::Vector([rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)]);
    match kind {
        // m/s², rad/s, µT
        SensorKind::Accel3Axis => vec3(-20.0, 20.0),
        SensorKind::Gyro3Axis => vec3(-5.0, 5.0),
        SensorKind::Magnet3Axis => vec3(-60.0, 60.0),
        SensorKind::Light => SensorValue::Scalar(rng.uniform(0.0, 1000.0)),
        SensorKind::Acoustic => SensorValue::Scalar(rng.uniform(30.0, 90.0)),
        SensorKind::Humidity => SensorValue::Scalar(rng.uniform(30.0, 70.0)),
        SensorKind::Temperature => SensorValue::Scalar(rng.uniform(15.0, 25.0)),
        SensorKind::Position => SensorValue::Scalar(rng.uniform(0.0, 100.0)),
        SensorKind::Smoke => SensorValue::Scalar(rng.uniform(0.0, 1.0)),
        SensorKind::Gas => SensorValue::Scalar(rng.uniform(0.0, 1000.0)),
        SensorKind::Digital => SensorValue::Scalar(rng.below(2) as f64),
        SensorKind::Analog => SensorValue::Scalar(rng.uniform(0.0, 24.0)),
        SensorKind::Fieldbus => SensorValue::Structured((0..FIELDBUS_WORDS).map(|_| rng.below(1 << 16) as f64).collect()),
        SensorKind::Orientation => unreachable!("fusion output is derived"),
    }
}

/// Seeded reading of one sensor channel. The value depends only on
/// (seed, device, channel, time).
pub fn sample_sensor(
    seed: u64,
    device: NodeId,
    sensors: &[SensorKind],
    channel: SensorKind,
    time: Nanos,
    alarm_threshold: Option<f64>,
) -> Result<SensorRecord, DeviceError> {
    if !sensors.contains(&channel) || channel == SensorKind::Orientation {
        return Err(DeviceError::UnknownChannel(channel.as_str().to_string()));
    }
    let mut rng = RngStream::derive(seed, &format!("sensor/{}/{}/{time}", device.0, channel.as_str()));
    let value = draw(channel, &mut rng);
    let alarm = alarm_threshold.is_some_and(|th| value.magnitude() > th);
    Ok(SensorRecord { device, time, channel, value, alarm })
}

/// Unit-norm orientation from the three 3-axis readings:
/// normalize(0.5·accel + 0.3·gyro + 0.2·magnet). A zero combination maps
/// to +x.
pub fn fuse_orientation(accel: [f64; 3], gyro: [f64; 3], magnet: [f64; 3]) -> [f64; 3] {
    let v: [f64; 3] = std::array::from_fn(|i| 0.5 * accel[i] + 0.3 * gyro[i] + 0.2 * magnet[i]);
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return [1.0, 0.0, 0.0];
    }
    v.map(|x| x / norm)
}

/// All channels of a device at `time`, plus an orientation record when
/// accel, gyro and magnet are all present.
pub fn sample_all(
    seed: u64,
    device: NodeId,
    sensors: &[SensorKind],
    time: Nanos,
    alarm_threshold: Option<f64>,
) -> Vec<SensorRecord> {
    let mut out: Vec<SensorRecord> = sensors
        .iter()
        .filter(|&&k| k != SensorKind::Orientation)
        .map(|&k| sample_sensor(seed, device, sensors, k, time, alarm_threshold).expect("channel from sensor set"))
        .collect();
    let vec_of = |k| {
        out.iter().find(|r| r.channel == k).and_then(|r| match r.value {
            SensorValue::Vector(v) => Some(v),
            _ => None,
        })
    };
    if let (Some(a), Some(g), Some(m)) =
        (vec_of(SensorKind::Accel3Axis), vec_of(SensorKind::Gyro3Axis), vec_of(SensorKind::Magnet3Axis))
    {
        let q = fuse_orientation(a, g, m);
        out.push(SensorRecord { device, time, channel: SensorKind::Orientation, value: SensorValue::Vector(q), alarm: false });
    }
    out
}
