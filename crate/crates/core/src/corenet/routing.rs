use std::collections::{BTreeMap, VecDeque};

use super::{Boundary, CorenetError};
use crate::model::{Attachments, CoreKind, Nanos, NetworkKind, NodeId, NodeKind, ValidatedTopology};

/// Ordered hops from source to destination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub hops: Vec<NodeId>,
    /// Sum of wired and local-link latencies along the path. The radio hop
    /// is accounted separately.
    pub wired_latency_ns: Nanos,
}

impl Path {
    pub fn ids<'a>(&self, topo: &'a ValidatedTopology) -> Vec<&'a str> {
        self.hops.iter().map(|&h| topo.id(h)).collect()
    }

    /// True when the path touches a public core or the internet.
    pub fn touches_public(&self, topo: &ValidatedTopology) -> bool {
        self.hops.iter().any(|&h| is_public(topo.kind(h)))
    }

    /// Firewall boundaries crossed, in path order.
    pub fn boundaries(&self, topo: &ValidatedTopology) -> Vec<Boundary> {
        self.hops
            .windows(2)
            .filter_map(|w| Boundary::between(topo.kind(w[0]), topo.kind(w[1])))
            .collect()
    }
}

fn is_public(k: NodeKind) -> bool {
    matches!(k, NodeKind::Core(CoreKind::Public) | NodeKind::Network(NetworkKind::Internet))
}

/// Routes over the infrastructure graph (cells, base stations, cores,
/// networks and wired links). Devices hang off cells through their
/// attachment chain and never carry transit traffic.
#[derive(Debug, Clone)]
pub struct Router {
    adjacency: Vec<Vec<(NodeId, Nanos)>>,
    local_link_latency: Nanos,
}

impl Router {
    pub fn new(topo: &ValidatedTopology, local_link_latency: Nanos) -> Self {
        let t = topo.topology();
        let mut edges: BTreeMap<(NodeId, NodeId), Nanos> = BTreeMap::new();
        let key = |a: NodeId, b: NodeId| if a < b { (a, b) } else { (b, a) };
        let id = |s: &str| topo.lookup(s).expect("validated");
        for c in &t.cells {
            edges.insert(key(id(&c.id), id(&c.base_station)), 0);
        }
        for b in &t.base_stations {
            edges.insert(key(id(&b.id), id(&b.core)), 0);
        }
        for c in &t.cores {
            for n in &c.breakout_targets {
                edges.insert(key(id(&c.id), id(n)), 0);
            }
        }
        for l in &t.wired_links {
            edges.insert(key(id(&l.a), id(&l.b)), l.latency_ns);
        }
        let mut adjacency = vec![Vec::new(); topo.node_count()];
        for (&(a, b), &lat) in &edges {
            adjacency[a.index()].push((b, lat));
            adjacency[b.index()].push((a, lat));
        }
        for adj in &mut adjacency {
            adj.sort_by(|x, y| topo.id(x.0).cmp(topo.id(y.0)));
        }
        Self { adjacency, local_link_latency }
    }

    fn home_core_private(&self, topo: &ValidatedTopology, attach: &Attachments, n: NodeId) -> bool {
        let cell = match topo.kind(n) {
            NodeKind::Core(k) => return k == CoreKind::Private,
            NodeKind::Cell => Some(n),
            NodeKind::Device(_) => attach.root_cell(topo, n),
            _ => None,
        };
        cell.and_then(|c| topo.core_of_cell(c)).is_some_and(|core| topo.kind(core) == NodeKind::Core(CoreKind::Private))
    }

    fn factory_side(&self, topo: &ValidatedTopology, attach: &Attachments, n: NodeId) -> bool {
        match topo.kind(n) {
            NodeKind::Network(k) => k != NetworkKind::Internet,
            _ => self.home_core_private(topo, attach, n),
        }
    }

    /// Traffic between a private-core device and the factory side may not
    /// leave the private network.
    pub fn is_protected(&self, topo: &ValidatedTopology, attach: &Attachments, src: NodeId, dst: NodeId) -> bool {
        (self.home_core_private(topo, attach, src) && self.factory_side(topo, attach, dst))
            || (self.home_core_private(topo, attach, dst) && self.factory_side(topo, attach, src))
    }

    pub fn route(
        &self,
        topo: &ValidatedTopology,
        attach: &Attachments,
        src: NodeId,
        dst: NodeId,
    ) -> Result<Path, CorenetError> {
        let unreachable = || CorenetError::Unreachable { src: topo.id(src).to_string(), dst: topo.id(dst).to_string() };
        let up = |n: NodeId| {
            if topo.kind(n).is_device() {
                attach.chain(topo, n)
            } else {
                Some(vec![n])
            }
        };
        let src_chain = up(src).ok_or_else(unreachable)?;
        let dst_chain = up(dst).ok_or_else(unreachable)?;

        // Shared ancestor in the attachment tree (same parent device or cell).
        let mut hops: Vec<NodeId> = Vec::new();
        let meet = src_chain.iter().enumerate().find_map(|(i, n)| dst_chain.iter().position(|m| m == n).map(|j| (i, j)));
        if let Some((i, j)) = meet {
            hops.extend_from_slice(&src_chain[..=i]);
            hops.extend(dst_chain[..j].iter().rev());
        } else {
            let from = *src_chain.last().expect("non-empty");
            let to = *dst_chain.last().expect("non-empty");
            let protected = self.is_protected(topo, attach, src, dst);
            let middle = self.bfs(topo, from, to, protected).ok_or_else(unreachable)?;
            hops.extend_from_slice(&src_chain);
            hops.extend_from_slice(&middle[1..]);
            hops.extend(dst_chain[..dst_chain.len() - 1].iter().rev());
        }
        let wired_latency_ns = hops.windows(2).map(|w| self.edge_latency(topo, w[0], w[1])).sum();
        Ok(Path { hops, wired_latency_ns })
    }

    /// Latency of the edge between adjacent path hops.
    pub fn edge_latency(&self, topo: &ValidatedTopology, a: NodeId, b: NodeId) -> Nanos {
        match (topo.kind(a), topo.kind(b)) {
            (NodeKind::Device(_), NodeKind::Device(_)) => self.local_link_latency,
            (NodeKind::Device(_), _) | (_, NodeKind::Device(_)) => 0,
            _ => self.adjacency[a.index()].iter().find(|(n, _)| *n == b).map(|&(_, l)| l).unwrap_or(0),
        }
    }

    fn bfs(&self, topo: &ValidatedTopology, from: NodeId, to: NodeId, protected: bool) -> Option<Vec<NodeId>> {
        let allowed = |n: NodeId| !(protected && is_public(topo.kind(n)));
        if !allowed(from) || !allowed(to) {
            return None;
        }
        let mut parent: Vec<Option<NodeId>> = vec![None; self.adjacency.len()];
        let mut seen = vec![false; self.adjacency.len()];
        seen[from.index()] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(n) = queue.pop_front() {
            if n == to {
                let mut path = vec![to];
                let mut cur = to;
                while let Some(p) = parent[cur.index()] {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            for &(m, _) in &self.adjacency[n.index()] {
                if !seen[m.index()] && allowed(m) {
                    seen[m.index()] = true;
                    parent[m.index()] = Some(n);
                    queue.push_back(m);
                }
            }
        }
        None
    }
}

/// One-shot convenience around [`Router::route`].
pub fn route(
    topo: &ValidatedTopology,
    attach: &Attachments,
    src: NodeId,
    dst: NodeId,
    local_link_latency: Nanos,
) -> Result<Path, CorenetError> {
    Router::new(topo, local_link_latency).route(topo, attach, src, dst)
}
