use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::devices::{SensorKind, SensorRecord, SensorValue};
use crate::model::{Nanos, NodeId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AggregationPolicy {
    #[default]
    Passthrough,
    MeanReduce { window_ns: Nanos },
    AlarmOnly { threshold: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UplinkRecord {
    pub record: SensorRecord,
    /// Input samples folded into this record.
    pub samples: u32,
}

impl UplinkRecord {
    pub fn size_bytes(&self) -> u32 {
        self.record.size_bytes()
    }
}

/// A mean-reduce window without samples between two non-empty ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Gap {
    pub device: NodeId,
    pub channel: SensorKind,
    pub window_start: Nanos,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AggregateOutput {
    pub records: Vec<UplinkRecord>,
    pub gaps: Vec<Gap>,
}

impl AggregateOutput {
    pub fn size_bytes(&self) -> u64 {
        self.records.iter().map(|r| r.size_bytes() as u64).sum()
    }
}

fn shape(v: &SensorValue) -> usize {
    match v {
        SensorValue::Scalar(_) => 0,
        SensorValue::Vector(_) => 1,
        SensorValue::Structured(w) => 2 + w.len(),
    }
}

fn mean(values: &[&SensorValue]) -> SensorValue {
    let n = values.len() as f64;
    match values[0] {
        SensorValue::Scalar(_) => {
            SensorValue::Scalar(values.iter().map(|v| if let SensorValue::Scalar(x) = v { *x } else { 0.0 }).sum::<f64>() / n)
        }
        SensorValue::Vector(_) => {
            let mut acc = [0.0; 3];
            for v in values {
                if let SensorValue::Vector(x) = v {
                    for i in 0..3 {
                        acc[i] += x[i];
                    }
                }
            }
            SensorValue::Vector(acc.map(|a| a / n))
        }
        SensorValue::Structured(w0) => {
            let mut acc = vec![0.0; w0.len()];
            for v in values {
                if let SensorValue::Structured(w) = v {
                    for (a, x) in acc.iter_mut().zip(w) {
                        *a += x;
                    }
                }
            }
            SensorValue::Structured(acc.into_iter().map(|a| a / n).collect())
        }
    }
}

/// Edge pre-processing of a record buffer.
pub fn aggregate(buffer: &[SensorRecord], policy: AggregationPolicy) -> AggregateOutput {
    match policy {
        AggregationPolicy::Passthrough => AggregateOutput {
            records: buffer.iter().map(|r| UplinkRecord { record: r.clone(), samples: 1 }).collect(),
            gaps: Vec::new(),
        },
        AggregationPolicy::AlarmOnly { threshold } => AggregateOutput {
            records: buffer
                .iter()
                .filter(|r| r.value.magnitude() > threshold)
                .map(|r| UplinkRecord { record: SensorRecord { alarm: true, ..r.clone() }, samples: 1 })
                .collect(),
            gaps: Vec::new(),
        },
        AggregationPolicy::MeanReduce { window_ns } => {
            let w = window_ns.max(1);
            let mut groups: BTreeMap<(NodeId, SensorKind, usize, Nanos), Vec<&SensorRecord>> = BTreeMap::new();
            for r in buffer {
                groups.entry((r.device, r.channel, shape(&r.value), r.time / w)).or_default().push(r);
            }
            let mut out = AggregateOutput::default();
            let mut last: Option<(NodeId, SensorKind, usize, Nanos)> = None;
            for ((dev, ch, sh, win), recs) in groups {
                if let Some((d, c, s, prev)) = last {
                    if (d, c, s) == (dev, ch, sh) {
                        for missing in prev + 1..win {
                            out.gaps.push(Gap { device: dev, channel: ch, window_start: missing * w });
                        }
                    }
                }
                last = Some((dev, ch, sh, win));
                let values: Vec<&SensorValue> = recs.iter().map(|r| &r.value).collect();
                out.records.push(UplinkRecord {
                    record: SensorRecord {
                        device: dev,
                        time: recs.iter().map(|r| r.time).max().expect("non-empty group"),
                        channel: ch,
                        value: mean(&values),
                        alarm: recs.iter().any(|r| r.alarm),
                    },
                    samples: recs.len() as u32,
                });
            }
            out.records.sort_by_key(|r| (r.record.time, r.record.device, r.record.channel));
            out
        }
    }
}
