//! Nodes, links and static minimum-hop routing.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::net::Ipv4Addr;

use crate::units::Bandwidth;

use super::NetError;

/// Index of a node. Nodes are ordered by name, so ids compare like names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Index of a link. Links are ordered by name, so comparing id sequences is
/// the same as comparing link-name sequences lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub(crate) usize);

impl LinkId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Host { ip: Ipv4Addr },
    Switch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub kind: NodeKind,
}

impl Node {
    pub fn is_switch(&self) -> bool {
        matches!(self.kind, NodeKind::Switch)
    }

    pub fn ip(&self) -> Option<Ipv4Addr> {
        match self.kind {
            NodeKind::Host { ip } => Some(ip),
            NodeKind::Switch => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub id: LinkId,
    pub name: String,
    pub endpoints: (NodeId, NodeId),
    pub capacity: Bandwidth,
}

impl Link {
    /// The endpoint opposite `node`, if `node` is an endpoint at all.
    pub fn other_end(&self, node: NodeId) -> Option<NodeId> {
        match self.endpoints {
            (a, b) if a == node => Some(b),
            (a, b) if b == node => Some(a),
            _ => None,
        }
    }
}

/// Immutable network graph. Links are undirected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    adjacency: Vec<Vec<LinkId>>,
}

impl Topology {
    pub fn builder() -> TopologyBuilder {
        TopologyBuilder::default()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes
            .binary_search_by(|n| n.name.as_str().cmp(name))
            .ok()
            .map(NodeId)
    }

    pub fn link_by_name(&self, name: &str) -> Option<LinkId> {
        self.links
            .binary_search_by(|l| l.name.as_str().cmp(name))
            .ok()
            .map(LinkId)
    }

    pub fn host_by_ip(&self, ip: Ipv4Addr) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.ip() == Some(ip)).map(|n| n.id)
    }

    /// Links incident to `node`, in link-id order.
    pub fn incident(&self, node: NodeId) -> &[LinkId] {
        &self.adjacency[node.0]
    }

    pub fn switches(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.is_switch())
    }

    /// Minimum-hop path from `src` to `dst`. Among equal-length paths the one
    /// whose link-id sequence is lexicographically smallest wins.
    pub fn path_for(&self, src: NodeId, dst: NodeId) -> Result<Vec<LinkId>, NetError> {
        if src.0 >= self.nodes.len() || dst.0 >= self.nodes.len() {
            return Err(NetError::NoRoute { src, dst });
        }
        if src == dst {
            return Ok(Vec::new());
        }
        // Hop distance of every node to dst.
        let mut dist = vec![usize::MAX; self.nodes.len()];
        dist[dst.0] = 0;
        let mut queue = VecDeque::from([dst]);
        while let Some(node) = queue.pop_front() {
            for &link in &self.adjacency[node.0] {
                let next = self.links[link.0]
                    .other_end(node)
                    .expect("adjacency is consistent");
                if dist[next.0] == usize::MAX {
                    dist[next.0] = dist[node.0] + 1;
                    queue.push_back(next);
                }
            }
        }
        if dist[src.0] == usize::MAX {
            return Err(NetError::NoRoute { src, dst });
        }
        // Walking greedily on the smallest admissible link id yields the
        // lexicographically smallest sequence among the shortest paths.
        let mut path = Vec::with_capacity(dist[src.0]);
        let mut at = src;
        while at != dst {
            let (link, next) = self.adjacency[at.0]
                .iter()
                .map(|&l| (l, self.links[l.0].other_end(at).unwrap()))
                .find(|&(_, n)| dist[n.0] + 1 == dist[at.0])
                .expect("a closer neighbour exists on a shortest path");
            path.push(link);
            at = next;
        }
        Ok(path)
    }

    /// Node sequence visited by `path` starting from `src`.
    pub fn path_nodes(&self, src: NodeId, path: &[LinkId]) -> Result<Vec<NodeId>, NetError> {
        let mut nodes = Vec::with_capacity(path.len() + 1);
        nodes.push(src);
        let mut at = src;
        for &link in path {
            let next = self
                .links
                .get(link.0)
                .and_then(|l| l.other_end(at))
                .ok_or(NetError::DisconnectedPath(link))?;
            nodes.push(next);
            at = next;
        }
        Ok(nodes)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TopologyError {
    #[error("duplicate node name `{0}`")]
    DuplicateNode(String),
    #[error("duplicate link name `{0}`")]
    DuplicateLink(String),
    #[error("duplicate host address {0}")]
    DuplicateAddress(Ipv4Addr),
    #[error("link `{link}` references unknown node `{node}`")]
    UnknownEndpoint { link: String, node: String },
    #[error("link `{0}` is a self-loop")]
    SelfLoop(String),
    #[error("link `{0}` has zero capacity")]
    ZeroCapacity(String),
}

#[derive(Debug, Default)]
pub struct TopologyBuilder {
    nodes: Vec<(String, NodeKind)>,
    links: Vec<(String, String, String, Bandwidth)>,
}

impl TopologyBuilder {
    pub fn host(mut self, name: &str, ip: Ipv4Addr) -> Self {
        self.nodes.push((name.to_string(), NodeKind::Host { ip }));
        self
    }

    pub fn switch(mut self, name: &str) -> Self {
        self.nodes.push((name.to_string(), NodeKind::Switch));
        self
    }

    pub fn link(mut self, name: &str, a: &str, b: &str, capacity: Bandwidth) -> Self {
        self.links
            .push((name.to_string(), a.to_string(), b.to_string(), capacity));
        self
    }

    pub fn build(self) -> Result<Topology, TopologyError> {
        let mut by_name = BTreeMap::new();
        let mut addresses = BTreeMap::new();
        for (name, kind) in self.nodes {
            if let NodeKind::Host { ip } = kind {
                if addresses.insert(ip, ()).is_some() {
                    return Err(TopologyError::DuplicateAddress(ip));
                }
            }
            if by_name.insert(name.clone(), kind).is_some() {
                return Err(TopologyError::DuplicateNode(name));
            }
        }
        let nodes: Vec<Node> = by_name
            .into_iter()
            .enumerate()
            .map(|(i, (name, kind))| Node {
                id: NodeId(i),
                name,
                kind,
            })
            .collect();
        let lookup = |name: &str| {
            nodes
                .binary_search_by(|n| n.name.as_str().cmp(name))
                .ok()
                .map(NodeId)
        };

        let mut links_by_name = BTreeMap::new();
        for (name, a, b, capacity) in self.links {
            let ea = lookup(&a).ok_or_else(|| TopologyError::UnknownEndpoint {
                link: name.clone(),
                node: a.clone(),
            })?;
            let eb = lookup(&b).ok_or_else(|| TopologyError::UnknownEndpoint {
                link: name.clone(),
                node: b.clone(),
            })?;
            if ea == eb {
                return Err(TopologyError::SelfLoop(name));
            }
            if capacity.is_zero() {
                return Err(TopologyError::ZeroCapacity(name));
            }
            if links_by_name
                .insert(name.clone(), (ea, eb, capacity))
                .is_some()
            {
                return Err(TopologyError::DuplicateLink(name));
            }
        }
        let links: Vec<Link> = links_by_name
            .into_iter()
            .enumerate()
            .map(|(i, (name, (a, b, capacity)))| Link {
                id: LinkId(i),
                name,
                endpoints: (a, b),
                capacity,
            })
            .collect();

        let mut adjacency = vec![Vec::new(); nodes.len()];
        for link in &links {
            adjacency[link.endpoints.0 .0].push(link.id);
            adjacency[link.endpoints.1 .0].push(link.id);
        }
        Ok(Topology {
            nodes,
            links,
            adjacency,
        })
    }
}
