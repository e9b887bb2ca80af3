//! Core network: slice admission, routing with break-out into the
//! production network, and firewall policy at network boundaries.

mod admission;
mod firewall;
mod routing;

use thiserror::Error;

pub use admission::{admit_slice, SliceRequest};
pub use firewall::{
    firewall_check, Boundary, Decision, EndpointKind, FirewallAction, FirewallPolicy, FirewallRule, HeaderMatch,
    PacketHeader,
};
pub use routing::{route, Path, Router};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorenetError {
    #[error("unknown cell {0}")]
    UnknownCell(String),
    #[error("{0}")]
    InvalidRequest(String),
    #[error("no route from {src} to {dst}")]
    Unreachable { src: String, dst: String },
}
