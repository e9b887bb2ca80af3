use serde::{Deserialize, Serialize};

use crate::model::{CoreKind, DeviceKind, NetworkKind, NodeKind, ServiceClass};

/// Network boundaries guarded by a firewall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Boundary {
    PrivateCoreProductionNet,
    PrivateCorePublicCore,
    PublicCoreInternet,
}

impl Boundary {
    /// Boundary crossed by an edge between nodes of these kinds, if any.
    pub fn between(a: NodeKind, b: NodeKind) -> Option<Boundary> {
        use NodeKind::{Core, Network};
        let one_way = |x: NodeKind, y: NodeKind| match (x, y) {
            (Core(CoreKind::Private), Network(NetworkKind::Production | NetworkKind::Company)) => {
                Some(Boundary::PrivateCoreProductionNet)
            }
            (Core(CoreKind::Private), Core(CoreKind::Public)) => Some(Boundary::PrivateCorePublicCore),
            (Core(CoreKind::Public), Network(NetworkKind::Internet)) => Some(Boundary::PublicCoreInternet),
            _ => None,
        };
        one_way(a, b).or_else(|| one_way(b, a))
    }
}

/// Kind of a packet endpoint as seen by header predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EndpointKind {
    Phone,
    Sensor,
    Actuator,
    WirelessSensorDevice,
    EdgeGateway,
    EdgePlc,
    ProductionNet,
    CompanyNet,
    Internet,
    Infrastructure,
}

impl From<NodeKind> for EndpointKind {
    fn from(k: NodeKind) -> Self {
        match k {
            NodeKind::Device(d) => match d {
                DeviceKind::Phone => EndpointKind::Phone,
                DeviceKind::Sensor => EndpointKind::Sensor,
                DeviceKind::Actuator => EndpointKind::Actuator,
                DeviceKind::WirelessSensorDevice => EndpointKind::WirelessSensorDevice,
                DeviceKind::EdgeGateway => EndpointKind::EdgeGateway,
                DeviceKind::EdgePlc => EndpointKind::EdgePlc,
            },
            NodeKind::Network(NetworkKind::Production) => EndpointKind::ProductionNet,
            NodeKind::Network(NetworkKind::Company) => EndpointKind::CompanyNet,
            NodeKind::Network(NetworkKind::Internet) => EndpointKind::Internet,
            _ => EndpointKind::Infrastructure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PacketHeader {
    pub class: ServiceClass,
    pub slice_id: String,
    pub src_kind: EndpointKind,
    pub dst_kind: EndpointKind,
}

/// Exact match on each present field; absent fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct HeaderMatch {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<ServiceClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slice_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub src_kind: Option<EndpointKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dst_kind: Option<EndpointKind>,
}

impl HeaderMatch {
    pub fn matches(&self, h: &PacketHeader) -> bool {
        self.class.is_none_or(|c| c == h.class)
            && self.slice_id.as_ref().is_none_or(|s| *s == h.slice_id)
            && self.src_kind.is_none_or(|k| k == h.src_kind)
            && self.dst_kind.is_none_or(|k| k == h.dst_kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FirewallAction {
    Allow,
    Deny,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FirewallRule {
    pub boundary: Boundary,
    #[serde(rename = "match", default)]
    pub matches: HeaderMatch,
    pub action: FirewallAction,
}

/// Ordered rule list. Anything not matched is denied.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FirewallPolicy {
    pub rules: Vec<FirewallRule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decision {
    Allow { rule: usize },
    /// `rule` is `None` when the default action applied.
    Deny { rule: Option<usize> },
}

impl Decision {
    pub fn is_allow(self) -> bool {
        matches!(self, Decision::Allow { .. })
    }
}

/// First rule for `boundary` whose predicate matches decides.
pub fn firewall_check(header: &PacketHeader, boundary: Boundary, policy: &FirewallPolicy) -> Decision {
    for (i, r) in policy.rules.iter().enumerate() {
        if r.boundary == boundary && r.matches.matches(header) {
            return match r.action {
                FirewallAction::Allow => Decision::Allow { rule: i },
                FirewallAction::Deny => Decision::Deny { rule: Some(i) },
            };
        }
    }
    Decision::Deny { rule: None }
}
