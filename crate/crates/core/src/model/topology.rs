use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{BitsPerSecond, Nanos, M2_PER_KM2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CoreKind {
    Public,
    Private,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NetworkKind {
    /// Shop-floor production network (break-out target of a private core).
    Production,
    /// Company IT network.
    Company,
    Internet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DeviceKind {
    Phone,
    Sensor,
    Actuator,
    WirelessSensorDevice,
    EdgeGateway,
    EdgePlc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: String,
    pub area_m2: f64,
    pub capacity_bps: BitsPerSecond,
    pub base_station: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: String,
    pub core: String,
    #[serde(default)]
    pub edge_cloud_capacity_ops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Core {
    pub id: String,
    pub kind: CoreKind,
    /// Networks this core breaks user-plane traffic out to.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub breakout_targets: Vec<String>,
    /// Labels for core network functions (SMF, AMF, ...). Carried for
    /// documentation only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub functions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub id: String,
    pub kind: NetworkKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRef {
    pub id: String,
    pub kind: DeviceKind,
    /// Cell id, or the id of a parent device.
    pub attachment: String,
}

/// Wired link between two infrastructure nodes (cells, base stations,
/// cores, networks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WiredLink {
    pub a: String,
    pub b: String,
    pub latency_ns: Nanos,
    pub rate_bps: BitsPerSecond,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Topology {
    pub cells: Vec<Cell>,
    pub base_stations: Vec<BaseStation>,
    pub cores: Vec<Core>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub networks: Vec<Network>,
    pub devices: Vec<DeviceRef>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub wired_links: Vec<WiredLink>,
}

/// Dense index of a node in a [`ValidatedTopology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Cell,
    BaseStation,
    Core(CoreKind),
    Network(NetworkKind),
    Device(DeviceKind),
}

impl NodeKind {
    pub fn is_device(self) -> bool {
        matches!(self, NodeKind::Device(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateId(String),
    DanglingReference { from: String, field: &'static str, target: String },
    WrongReferenceKind { from: String, field: &'static str, target: String, expected: &'static str },
    AttachmentCycle(Vec<String>),
    InvalidValue { id: String, field: &'static str, reason: &'static str },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId(id) => write!(f, "duplicate id `{id}`"),
            Violation::DanglingReference { from, field, target } => {
                write!(f, "`{from}`.{field} references unknown id `{target}`")
            }
            Violation::WrongReferenceKind { from, field, target, expected } => {
                write!(f, "`{from}`.{field} references `{target}`, which is not a {expected}")
            }
            Violation::AttachmentCycle(ids) => write!(f, "attachment cycle: {}", ids.join(" -> ")),
            Violation::InvalidValue { id, field, reason } => write!(f, "`{id}`.{field}: {reason}"),
        }
    }
}

/// Every problem found in a topology, not only the first.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} topology violation(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NodeInfo {
    pub id: String,
    pub kind: NodeKind,
    /// Position in the topology list for this node's kind.
    pub pos: usize,
}

/// A topology that passed [`validate_topology`], with a dense node index.
#[derive(Debug, Clone)]
pub struct ValidatedTopology {
    raw: Topology,
    nodes: Vec<NodeInfo>,
    index: BTreeMap<String, NodeId>,
    initial_parent: Vec<Option<NodeId>>,
}

impl PartialEq for ValidatedTopology {
    fn eq(&self, other: &Self) -> bool {
        self.raw == other.raw
    }
}

pub fn validate_topology(raw: Topology) -> Result<ValidatedTopology, ValidationError> {
    let mut violations = Vec::new();
    let mut nodes = Vec::new();
    let mut index = BTreeMap::new();

    let mut add = |id: &str, kind: NodeKind, pos: usize, violations: &mut Vec<Violation>| {
        if index.contains_key(id) {
            violations.push(Violation::DuplicateId(id.to_string()));
            return;
        }
        index.insert(id.to_string(), NodeId(nodes.len() as u32));
        nodes.push(NodeInfo { id: id.to_string(), kind, pos });
    };
    for (i, c) in raw.cells.iter().enumerate() {
        add(&c.id, NodeKind::Cell, i, &mut violations);
    }
    for (i, b) in raw.base_stations.iter().enumerate() {
        add(&b.id, NodeKind::BaseStation, i, &mut violations);
    }
    for (i, c) in raw.cores.iter().enumerate() {
        add(&c.id, NodeKind::Core(c.kind), i, &mut violations);
    }
    for (i, n) in raw.networks.iter().enumerate() {
        add(&n.id, NodeKind::Network(n.kind), i, &mut violations);
    }
    for (i, d) in raw.devices.iter().enumerate() {
        add(&d.id, NodeKind::Device(d.kind), i, &mut violations);
    }

    let kind_of = |id: &str| index.get(id).map(|n: &NodeId| nodes[n.index()].kind);
    let mut check_ref =
        |from: &str, field: &'static str, target: &str, expected: &'static str, ok: &dyn Fn(NodeKind) -> bool| {
            match kind_of(target) {
                None => violations.push(Violation::DanglingReference {
                    from: from.to_string(),
                    field,
                    target: target.to_string(),
                }),
                Some(k) if !ok(k) => violations.push(Violation::WrongReferenceKind {
                    from: from.to_string(),
                    field,
                    target: target.to_string(),
                    expected,
                }),
                Some(_) => {}
            }
        };

    for c in &raw.cells {
        check_ref(&c.id, "base_station", &c.base_station, "base station", &|k| k == NodeKind::BaseStation);
    }
    for b in &raw.base_stations {
        check_ref(&b.id, "core", &b.core, "core", &|k| matches!(k, NodeKind::Core(_)));
    }
    for c in &raw.cores {
        for t in &c.breakout_targets {
            check_ref(&c.id, "breakout_targets", t, "network", &|k| matches!(k, NodeKind::Network(_)));
        }
    }
    for d in &raw.devices {
        check_ref(&d.id, "attachment", &d.attachment, "cell or device", &|k| {
            k == NodeKind::Cell || k.is_device()
        });
    }
    for l in &raw.wired_links {
        let name = format!("{}<->{}", l.a, l.b);
        check_ref(&name, "a", &l.a, "infrastructure node", &|k| !k.is_device());
        check_ref(&name, "b", &l.b, "infrastructure node", &|k| !k.is_device());
    }

    for c in &raw.cells {
        if !(c.area_m2 > 0.0) || !c.area_m2.is_finite() {
            violations.push(Violation::InvalidValue { id: c.id.clone(), field: "area_m2", reason: "must be > 0" });
        }
        if c.capacity_bps == 0 {
            violations.push(Violation::InvalidValue { id: c.id.clone(), field: "capacity_bps", reason: "must be > 0" });
        }
    }
    for l in &raw.wired_links {
        let name = format!("{}<->{}", l.a, l.b);
        if l.rate_bps == 0 {
            violations.push(Violation::InvalidValue { id: name.clone(), field: "rate_bps", reason: "must be > 0" });
        }
        if l.a == l.b {
            violations.push(Violation::InvalidValue { id: name, field: "b", reason: "link endpoints must differ" });
        }
    }

    // Attachment graph: each device has one parent, so cycles are found by
    // walking parent pointers.
    let mut initial_parent = vec![None; nodes.len()];
    for d in &raw.devices {
        if let (Some(&me), Some(&p)) = (index.get(&d.id), index.get(&d.attachment)) {
            if nodes[me.index()].id == d.id {
                initial_parent[me.index()] = Some(p);
            }
        }
    }
    let mut state = vec![0u8; nodes.len()]; // 0 unvisited, 1 on stack, 2 done
    for start in 0..nodes.len() {
        if state[start] != 0 || !nodes[start].kind.is_device() {
            continue;
        }
        let mut stack = Vec::new();
        let mut cur = Some(start);
        while let Some(n) = cur {
            match state[n] {
                0 => {
                    state[n] = 1;
                    stack.push(n);
                    cur = initial_parent[n].map(NodeId::index);
                }
                1 => {
                    let at = stack.iter().position(|&x| x == n).unwrap_or(0);
                    let mut cycle: Vec<String> = stack[at..].iter().map(|&x| nodes[x].id.clone()).collect();
                    cycle.push(nodes[n].id.clone());
                    violations.push(Violation::AttachmentCycle(cycle));
                    break;
                }
                _ => break,
            }
        }
        for n in stack {
            state[n] = 2;
        }
    }

    if violations.is_empty() {
        Ok(ValidatedTopology { raw, nodes, index, initial_parent })
    } else {
        Err(ValidationError { violations })
    }
}

impl ValidatedTopology {
    pub fn topology(&self) -> &Topology {
        &self.raw
    }

    pub fn into_inner(self) -> Topology {
        self.raw
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &NodeInfo)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i as u32), n))
    }

    pub fn lookup(&self, id: &str) -> Option<NodeId> {
        self.index.get(id).copied()
    }

    pub fn info(&self, n: NodeId) -> &NodeInfo {
        &self.nodes[n.index()]
    }

    pub fn id(&self, n: NodeId) -> &str {
        &self.nodes[n.index()].id
    }

    pub fn kind(&self, n: NodeId) -> NodeKind {
        self.nodes[n.index()].kind
    }

    pub fn cell(&self, n: NodeId) -> Option<&Cell> {
        let info = &self.nodes[n.index()];
        (info.kind == NodeKind::Cell).then(|| &self.raw.cells[info.pos])
    }

    pub fn device(&self, n: NodeId) -> Option<&DeviceRef> {
        let info = &self.nodes[n.index()];
        info.kind.is_device().then(|| &self.raw.devices[info.pos])
    }

    pub fn cell_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.raw.cells.iter().map(|c| self.index[&c.id])
    }

    pub fn device_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.raw.devices.iter().map(|d| self.index[&d.id])
    }

    /// Base station serving a cell.
    pub fn base_station_of(&self, cell: NodeId) -> Option<NodeId> {
        self.cell(cell).and_then(|c| self.lookup(&c.base_station))
    }

    /// Core a cell's base station is connected to.
    pub fn core_of_cell(&self, cell: NodeId) -> Option<NodeId> {
        let bs = self.base_station_of(cell)?;
        let info = &self.nodes[bs.index()];
        self.lookup(&self.raw.base_stations[info.pos].core)
    }

    pub fn initial_attachments(&self) -> Attachments {
        Attachments { parent: self.initial_parent.clone() }
    }

    /// Achieved device density per cell (devices/km²) for the given
    /// attachment state. Devices behind gateways count toward their root
    /// cell.
    pub fn densities(&self, attach: &Attachments) -> BTreeMap<NodeId, f64> {
        let mut counts: BTreeMap<NodeId, u64> = self.cell_ids().map(|c| (c, 0)).collect();
        for d in self.device_ids() {
            if let Some(c) = attach.root_cell(self, d) {
                *counts.entry(c).or_default() += 1;
            }
        }
        counts
            .into_iter()
            .map(|(c, n)| {
                let area = self.cell(c).map(|c| c.area_m2).unwrap_or(f64::NAN);
                (c, n as f64 / area * M2_PER_KM2)
            })
            .collect()
    }
}

/// Mutable device attachment state. Starts from the topology's declared
/// attachments and changes on mobility events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attachments {
    parent: Vec<Option<NodeId>>,
}

impl Attachments {
    pub fn parent(&self, n: NodeId) -> Option<NodeId> {
        self.parent.get(n.index()).copied().flatten()
    }

    /// Chain from `n` up to and including its root cell. `None` when the
    /// node is detached. A cell yields a chain of itself.
    pub fn chain(&self, topo: &ValidatedTopology, n: NodeId) -> Option<Vec<NodeId>> {
        let mut out = vec![n];
        let mut cur = n;
        loop {
            match topo.kind(cur) {
                NodeKind::Cell => return Some(out),
                NodeKind::Device(_) => {
                    cur = self.parent(cur)?;
                    if out.len() > topo.node_count() {
                        return None;
                    }
                    out.push(cur);
                }
                _ => return None,
            }
        }
    }

    pub fn root_cell(&self, topo: &ValidatedTopology, n: NodeId) -> Option<NodeId> {
        let mut cur = n;
        for _ in 0..=topo.node_count() {
            match topo.kind(cur) {
                NodeKind::Cell => return Some(cur),
                NodeKind::Device(_) => cur = self.parent(cur)?,
                _ => return None,
            }
        }
        None
    }

    /// Move a device under a new parent (cell or device), or detach it with
    /// `None`. Rejects moves that would create a cycle.
    pub fn reattach(
        &mut self,
        topo: &ValidatedTopology,
        device: NodeId,
        new_parent: Option<NodeId>,
    ) -> Result<(), Violation> {
        let dev_id = topo.id(device).to_string();
        if !topo.kind(device).is_device() {
            return Err(Violation::WrongReferenceKind {
                from: "mobility".into(),
                field: "device",
                target: dev_id,
                expected: "device",
            });
        }
        if let Some(p) = new_parent {
            let k = topo.kind(p);
            if k != NodeKind::Cell && !k.is_device() {
                return Err(Violation::WrongReferenceKind {
                    from: dev_id,
                    field: "attachment",
                    target: topo.id(p).to_string(),
                    expected: "cell or device",
                });
            }
            let mut cur = Some(p);
            while let Some(c) = cur {
                if c == device {
                    return Err(Violation::AttachmentCycle(vec![dev_id.clone(), topo.id(p).to_string(), dev_id]));
                }
                cur = self.parent(c);
            }
        }
        self.parent[device.index()] = new_parent;
        Ok(())
    }

    pub fn children(&self, n: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.parent
            .iter()
            .enumerate()
            .filter(move |(_, p)| **p == Some(n))
            .map(|(i, _)| NodeId(i as u32))
    }
}
