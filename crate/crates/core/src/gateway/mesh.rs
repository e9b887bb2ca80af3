use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::GatewayError;

/// Undirected gateway mesh.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MeshGraph {
    adj: BTreeMap<String, BTreeSet<String>>,
}

impl MeshGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_edges<'a>(edges: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut g = Self::new();
        for (a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn add_node(&mut self, n: &str) {
        self.adj.entry(n.to_string()).or_default();
    }

    pub fn add_edge(&mut self, a: &str, b: &str) {
        if a == b {
            self.add_node(a);
            return;
        }
        self.adj.entry(a.to_string()).or_default().insert(b.to_string());
        self.adj.entry(b.to_string()).or_default().insert(a.to_string());
    }

    /// Neighbors in ascending id order.
    pub fn neighbors(&self, n: &str) -> impl Iterator<Item = &str> {
        self.adj.get(n).into_iter().flatten().map(String::as_str)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.adj.keys().map(String::as_str)
    }
}

/// Minimum-hop path from `src` to the nearest gateway in `uplinks`, ties
/// broken by the smallest next-hop id. The path starts at `src`; a
/// gateway with its own uplink gets a zero-hop path.
pub fn mesh_route(graph: &MeshGraph, src: &str, uplinks: &BTreeSet<String>) -> Result<Vec<String>, GatewayError> {
    if uplinks.contains(src) {
        return Ok(vec![src.to_string()]);
    }
    // hop distance of every node to its nearest uplink
    let mut dist: BTreeMap<&str, u32> = BTreeMap::new();
    let mut queue = VecDeque::new();
    for u in uplinks {
        if let Some((k, _)) = graph.adj.get_key_value(u.as_str()) {
            dist.insert(k.as_str(), 0);
            queue.push_back(k.as_str());
        }
    }
    while let Some(n) = queue.pop_front() {
        let d = dist[n];
        for m in graph.neighbors(n) {
            if !dist.contains_key(m) {
                dist.insert(m, d + 1);
                queue.push_back(m);
            }
        }
    }
    let no_route = || GatewayError::NoRoute(src.to_string());
    let mut d = *dist.get(src).ok_or_else(no_route)?;
    let mut path = vec![src.to_string()];
    let mut cur = src;
    while d > 0 {
        cur = graph.neighbors(cur).find(|m| dist.get(m) == Some(&(d - 1))).ok_or_else(no_route)?;
        path.push(cur.to_string());
        d -= 1;
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RngStream;

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn uplink_gateway_has_empty_path() {
        let g = MeshGraph::from_edges([("a", "b")]);
        assert_eq!(mesh_route(&g, "a", &set(&["a"])).unwrap(), vec!["a"]);
    }

    #[test]
    fn isolated_gateway_has_no_route() {
        let mut g = MeshGraph::from_edges([("a", "b")]);
        g.add_node("z");
        assert_eq!(mesh_route(&g, "z", &set(&["a"])), Err(GatewayError::NoRoute("z".into())));
    }

    #[test]
    fn tie_goes_to_smallest_next_hop() {
        // s-b-u and s-a-u are both two hops
        let g = MeshGraph::from_edges([("s", "b"), ("b", "u"), ("s", "a"), ("a", "u")]);
        assert_eq!(mesh_route(&g, "s", &set(&["u"])).unwrap(), vec!["s", "a", "u"]);
    }

    /// Plain single-source BFS from `src`; distance to the closest uplink.
    fn bfs_oracle(edges: &[(usize, usize)], n: usize, src: usize, uplinks: &[usize]) -> Option<usize> {
        let mut dist = vec![usize::MAX; n];
        dist[src] = 0;
        let mut q = VecDeque::from([src]);
        while let Some(x) = q.pop_front() {
            if uplinks.contains(&x) {
                return Some(dist[x]);
            }
            for &(a, b) in edges {
                let y = if a == x { b } else if b == x { a } else { continue };
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    q.push_back(y);
                }
            }
        }
        None
    }

    #[test]
    fn random_graphs_match_bfs() {
        let mut rng = RngStream::derive(3, "mesh");
        for _ in 0..300 {
            let n = 1 + rng.below(20) as usize;
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.below(100) < 15 {
                        edges.push((a, b));
                    }
                }
            }
            let name = |i: usize| format!("g{i:02}");
            let mut g = MeshGraph::new();
            for i in 0..n {
                g.add_node(&name(i));
            }
            for &(a, b) in &edges {
                g.add_edge(&name(a), &name(b));
            }
            let uplinks: Vec<usize> = (0..n).filter(|_| rng.below(4) == 0).collect();
            let up: BTreeSet<String> = uplinks.iter().map(|&i| name(i)).collect();
            let src = rng.below(n as u64) as usize;
            let got = mesh_route(&g, &name(src), &up);
            match bfs_oracle(&edges, n, src, &uplinks) {
                None => assert!(got.is_err()),
                Some(d) => {
                    let p = got.unwrap();
                    assert_eq!(p.len() - 1, d);
                    assert!(up.contains(p.last().unwrap()));
                    for w in p.windows(2) {
                        assert!(g.neighbors(&w[0]).any(|m| m == w[1]));
                    }
                }
            }
        }
    }
}
