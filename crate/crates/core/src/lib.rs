//! Deterministic discrete-event simulator for 5G factory networks.
//!
//! Scenarios describe a factory topology (cells, base stations, public and
//! private cores, devices), the network slices it requests, device and
//! gateway configurations and traffic. A run measures latency,
//! reliability, device density and battery lifetime against the 5G
//! service-class targets.

pub mod corenet;
pub mod devices;
pub mod engine;
pub mod gateway;
pub mod harness;
pub mod model;
pub mod plc;
pub mod radio;
pub mod workloads;
