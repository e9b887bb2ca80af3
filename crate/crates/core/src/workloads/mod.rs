//! Scenario description and generators for the four factory use cases:
//! smart production, AGV convoys, condition monitoring and pipeline
//! retrofit.

mod generators;
mod scenario;

pub use generators::{
    gen_agv, gen_condition_monitoring, gen_condition_monitoring_with, gen_retrofit, gen_smart_production,
    ConditionMonitoringOptions, PROPAGATION_NS_PER_KM,
};
pub use scenario::{
    ActuatorConfig, Flow, MoveCommand, Reattach, Scenario, ScenarioError, ScriptedMigration, SensorDeviceConfig,
    SliceThreshold, Thresholds, Uplink, UplinkOutage,
};
