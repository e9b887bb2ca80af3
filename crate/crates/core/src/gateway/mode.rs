use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::model::Nanos;

/// Uplink transmission mode of a gateway or sensor device.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GatewayMode {
    /// Forward every record as it arrives.
    #[default]
    Online,
    /// Buffer and flush every period.
    Interval(Nanos),
    /// Transmit alarms only.
    Sleep,
}

impl GatewayMode {
    pub fn validate(&self) -> Result<(), GatewayError> {
        match self {
            GatewayMode::Interval(0) => Err(GatewayError::InvalidMode("INTERVAL period must be > 0")),
            _ => Ok(()),
        }
    }
}

/// First flush instant `phase + k·period` (k ≥ 0) at or after `t`.
pub fn next_flush_at(period: Nanos, phase: Nanos, t: Nanos) -> Nanos {
    let phase = phase % period;
    if t <= phase {
        return phase;
    }
    phase + (t - phase).div_ceil(period) * period
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flush {
    pub at: Nanos,
    /// Indices into the input record list.
    pub records: Vec<usize>,
}

/// Uplink transmissions produced by `mode` for records given as
/// (arrival time, alarm flag). Empty interval flushes are skipped.
pub fn transmission_schedule(mode: GatewayMode, records: &[(Nanos, bool)], phase: Nanos) -> Result<Vec<Flush>, GatewayError> {
    mode.validate()?;
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by_key(|&i| records[i].0);
    Ok(match mode {
        GatewayMode::Online => order.into_iter().map(|i| Flush { at: records[i].0, records: vec![i] }).collect(),
        GatewayMode::Sleep => {
            order.into_iter().filter(|&i| records[i].1).map(|i| Flush { at: records[i].0, records: vec![i] }).collect()
        }
        GatewayMode::Interval(p) => {
            let mut by_time: BTreeMap<Nanos, Vec<usize>> = BTreeMap::new();
            for i in order {
                by_time.entry(next_flush_at(p, phase, records[i].0)).or_default().push(i);
            }
            by_time.into_iter().map(|(at, records)| Flush { at, records }).collect()
        }
    })
}
