//! Mesh backbone topologies: random geometric generation, node roles and
//! minimum-hop paths.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// End user outside the backbone; never relays.
    Client,
    /// Backbone node bridging one or more clients.
    #[serde(rename = "edge")]
    EdgeRoute,
    #[serde(rename = "route")]
    RouteNode,
}

impl Role {
    pub fn is_backbone(self) -> bool {
        !matches!(self, Role::Client)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub pos: Point,
    pub role: Role,
    pub label: Option<String>,
    /// Clients attached to this node (edge route nodes only).
    pub clients: Vec<NodeId>,
}

/// Unordered in-range pair; `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub established: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    adjacency: Vec<Vec<NodeId>>,
    attachments: BTreeMap<NodeId, NodeId>,
    range: Option<f64>,
    area_side: Option<f64>,
}

impl Topology {
    pub fn builder() -> TopologyBuilder {
        TopologyBuilder::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    pub fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes.get(id.index()).ok_or(Error::UnknownNode(id))
    }

    pub fn role(&self, id: NodeId) -> Result<Role> {
        Ok(self.node(id)?.role)
    }

    /// Display name: the label when present, else the numeric id.
    pub fn name(&self, id: NodeId) -> String {
        match self.nodes.get(id.index()).and_then(|n| n.label.clone()) {
            Some(l) => l,
            None => id.to_string(),
        }
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn established_links(&self) -> impl Iterator<Item = &Link> {
        self.links.iter().filter(|l| l.established)
    }

    pub fn range(&self) -> Option<f64> {
        self.range
    }

    pub fn area_side(&self) -> Option<f64> {
        self.area_side
    }

    /// Client → edge route node.
    pub fn attachments(&self) -> &BTreeMap<NodeId, NodeId> {
        &self.attachments
    }

    pub fn attachment(&self, client: NodeId) -> Option<NodeId> {
        self.attachments.get(&client).copied()
    }

    pub fn clients(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(|n| n.role == Role::Client)
            .map(|n| n.id)
    }

    /// Nodes sharing an established link with `id`, ascending.
    pub fn neighbors(&self, id: NodeId) -> Result<&[NodeId]> {
        self.adjacency
            .get(id.index())
            .map(Vec::as_slice)
            .ok_or(Error::UnknownNode(id))
    }

    pub fn are_linked(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency
            .get(a.index())
            .is_some_and(|adj| adj.binary_search(&b).is_ok())
    }

    /// Shortest path over established links, clients only as endpoints.
    /// Among equal-length paths the smallest next hop wins at every step.
    pub fn min_hop_path(&self, src: NodeId, dst: NodeId) -> Result<Option<Vec<NodeId>>> {
        self.node(src)?;
        self.node(dst)?;
        if src == dst {
            return Err(Error::Parameter("source and destination coincide".into()));
        }
        // distances measured from dst so the forward walk can pick greedily
        let mut dist = vec![usize::MAX; self.nodes.len()];
        dist[dst.index()] = 0;
        let mut queue = VecDeque::from([dst]);
        while let Some(u) = queue.pop_front() {
            if u != dst && self.nodes[u.index()].role == Role::Client {
                continue;
            }
            for &v in &self.adjacency[u.index()] {
                if dist[v.index()] == usize::MAX {
                    dist[v.index()] = dist[u.index()] + 1;
                    queue.push_back(v);
                }
            }
        }
        if dist[src.index()] == usize::MAX {
            return Ok(None);
        }
        let mut path = vec![src];
        let mut cur = src;
        while cur != dst {
            let d = dist[cur.index()];
            let next = self.adjacency[cur.index()]
                .iter()
                .copied()
                .find(|v| {
                    dist[v.index()] + 1 == d
                        && (*v == dst || self.nodes[v.index()].role != Role::Client)
                })
                .expect("BFS layer has a predecessor");
            path.push(next);
            cur = next;
        }
        Ok(Some(path))
    }

    pub fn to_dump(&self, source: Option<NodeId>, dest: Option<NodeId>) -> TopologyDump {
        TopologyDump {
            area_side: self.area_side,
            range: self.range,
            nodes: self
                .nodes
                .iter()
                .map(|n| DumpNode {
                    id: n.id,
                    x: n.pos.x,
                    y: n.pos.y,
                    role: n.role,
                    label: n.label.clone(),
                })
                .collect(),
            links: self.established_links().map(|l| [l.a, l.b]).collect(),
            attachments: self.attachments.iter().map(|(&c, &e)| [c, e]).collect(),
            source,
            dest,
        }
    }

    pub fn from_dump(dump: &TopologyDump) -> Result<Topology> {
        let mut b = TopologyBuilder::default();
        for (i, n) in dump.nodes.iter().enumerate() {
            if n.id.index() != i {
                return Err(Error::Parameter(format!(
                    "node ids must be 0..N in order; found {} at position {i}",
                    n.id
                )));
            }
            let role = if n.role == Role::EdgeRoute {
                // promoted again by attach() below
                Role::RouteNode
            } else {
                n.role
            };
            let id = b.add_node(Point::new(n.x, n.y), role);
            if let Some(l) = &n.label {
                b.set_label(id, l);
            }
        }
        let attached: BTreeSet<(NodeId, NodeId)> = dump
            .attachments
            .iter()
            .flat_map(|&[c, e]| [(c, e), (e, c)])
            .collect();
        for &[a, b2] in &dump.links {
            if !attached.contains(&(a, b2)) {
                b.link(a, b2);
            }
        }
        for &[c, e] in &dump.attachments {
            b.attach(c, e);
        }
        for n in &dump.nodes {
            if n.role == Role::EdgeRoute {
                b.promote(n.id);
            }
        }
        b.range = dump.range;
        b.area_side = dump.area_side;
        b.build()
    }

    /// Straight line `0 - 1 - ... - hops`, clients at both ends.
    ///
    /// With `hops == 1` the two clients are direct neighbours and no edge
    /// node exists; with `hops == 2` one edge node serves both clients.
    pub fn linear(hops: usize) -> Result<(Topology, NodeId, NodeId)> {
        if hops == 0 {
            return Err(Error::Parameter("hop count must be at least 1".into()));
        }
        let mut b = TopologyBuilder::default();
        let src = b.add_node(Point::new(0.0, 0.0), Role::Client);
        let mut prev = src;
        for i in 1..hops {
            let id = b.add_node(Point::new(100.0 * i as f64, 0.0), Role::RouteNode);
            if i > 1 {
                b.link(prev, id);
            }
            prev = id;
        }
        let dst = b.add_node(Point::new(100.0 * hops as f64, 0.0), Role::Client);
        if hops == 1 {
            b.link(src, dst);
        } else {
            b.attach(src, NodeId(1));
            b.attach(dst, NodeId(hops as u32 - 1));
        }
        Ok((b.build()?, src, dst))
    }

    /// The eight-node walkthrough network A..H: source client A behind edge
    /// node B, destination client H behind edge node G.
    pub fn walkthrough() -> (Topology, NodeId, NodeId) {
        let mut b = TopologyBuilder::default();
        let spots = [
            ("A", 0.0, 300.0, Role::Client),
            ("B", 150.0, 300.0, Role::RouteNode),
            ("C", 300.0, 450.0, Role::RouteNode),
            ("D", 300.0, 300.0, Role::RouteNode),
            ("E", 300.0, 150.0, Role::RouteNode),
            ("F", 450.0, 450.0, Role::RouteNode),
            ("G", 450.0, 300.0, Role::RouteNode),
            ("H", 600.0, 300.0, Role::Client),
        ];
        for (label, x, y, role) in spots {
            let id = b.add_node(Point::new(x, y), role);
            b.set_label(id, label);
        }
        let id = |c: char| NodeId(c as u32 - 'A' as u32);
        for (x, y) in [
            ('B', 'C'),
            ('B', 'D'),
            ('B', 'E'),
            ('C', 'D'),
            ('D', 'E'),
            ('C', 'F'),
            ('D', 'F'),
            ('D', 'G'),
            ('E', 'G'),
            ('F', 'G'),
        ] {
            b.link(id(x), id(y));
        }
        b.attach(id('A'), id('B'));
        b.attach(id('H'), id('G'));
        (
            b.build().expect("walkthrough topology is valid"),
            id('A'),
            id('H'),
        )
    }
}

#[derive(Debug, Default, Clone)]
pub struct TopologyBuilder {
    nodes: Vec<Node>,
    links: BTreeMap<(NodeId, NodeId), bool>,
    attachments: BTreeMap<NodeId, NodeId>,
    range: Option<f64>,
    area_side: Option<f64>,
}

impl TopologyBuilder {
    pub fn add_node(&mut self, pos: Point, role: Role) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            id,
            pos,
            role,
            label: None,
            clients: Vec::new(),
        });
        id
    }

    pub fn set_label(&mut self, id: NodeId, label: &str) {
        if let Some(n) = self.nodes.get_mut(id.index()) {
            n.label = Some(label.to_string());
        }
    }

    fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
        (a.min(b), a.max(b))
    }

    /// Established link.
    pub fn link(&mut self, a: NodeId, b: NodeId) -> &mut Self {
        self.links.insert(Self::key(a, b), true);
        self
    }

    /// In-range pair whose channel could not be established.
    pub fn failed_link(&mut self, a: NodeId, b: NodeId) -> &mut Self {
        self.links.entry(Self::key(a, b)).or_insert(false);
        self
    }

    pub fn promote(&mut self, id: NodeId) {
        if let Some(n) = self.nodes.get_mut(id.index()) {
            if n.role == Role::RouteNode {
                n.role = Role::EdgeRoute;
            }
        }
    }

    /// Attach `client` to `edge` over an established link; promotes `edge`.
    pub fn attach(&mut self, client: NodeId, edge: NodeId) -> &mut Self {
        self.link(client, edge);
        self.attachments.insert(client, edge);
        self.promote(edge);
        self
    }

    pub fn range(&mut self, r: f64) -> &mut Self {
        self.range = Some(r);
        self
    }

    pub fn build(&self) -> Result<Topology> {
        let count = self.nodes.len();
        let check = |id: NodeId| {
            if id.index() < count {
                Ok(())
            } else {
                Err(Error::UnknownNode(id))
            }
        };
        let mut nodes = self.nodes.clone();
        let mut adjacency = vec![Vec::new(); count];
        let mut links = Vec::with_capacity(self.links.len());
        for (&(a, b), &established) in &self.links {
            check(a)?;
            check(b)?;
            if a == b {
                return Err(Error::Parameter(format!("self-link at node {a}")));
            }
            if established {
                adjacency[a.index()].push(b);
                adjacency[b.index()].push(a);
            }
            links.push(Link { a, b, established });
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        for (&client, &edge) in &self.attachments {
            check(client)?;
            check(edge)?;
            if nodes[client.index()].role != Role::Client {
                return Err(Error::Parameter(format!(
                    "attached node {client} is not a client"
                )));
            }
            if !nodes[edge.index()].role.is_backbone() {
                return Err(Error::Parameter(format!("edge node {edge} is a client")));
            }
            nodes[edge.index()].clients.push(client);
        }
        for n in &nodes {
            if n.role != Role::Client {
                continue;
            }
            for &peer in &adjacency[n.id.index()] {
                let to_edge = self.attachments.get(&n.id) == Some(&peer);
                let to_client = nodes[peer.index()].role == Role::Client;
                if !to_edge && !to_client {
                    return Err(Error::Parameter(format!(
                        "client {} linked to {peer}, which is not its edge node",
                        n.id
                    )));
                }
            }
        }
        Ok(Topology {
            nodes,
            links,
            adjacency,
            attachments: self.attachments.clone(),
            range: self.range,
            area_side: self.area_side,
        })
    }
}

/// Serialized form used by `route --dump` and `route --topology`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyDump {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_side: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
    pub nodes: Vec<DumpNode>,
    /// Established links only.
    pub links: Vec<[NodeId; 2]>,
    /// `[client, edge]` pairs.
    #[serde(default)]
    pub attachments: Vec<[NodeId; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dest: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpNode {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    /// Route nodes in the backbone; the two clients come on top.
    pub backbone_count: usize,
    /// Transmission range R in meters.
    pub range: f64,
    /// Probability that an in-range channel is established.
    pub link_prob: f64,
    #[serde(default = "default_area_side")]
    pub area_side: f64,
    #[serde(default)]
    pub seed: u64,
    /// Try the next-nearest in-range backbone node when a client's
    /// attachment draw fails.
    #[serde(default)]
    pub fallback_attach: bool,
}

fn default_area_side() -> f64 {
    1000.0
}

impl TopologyConfig {
    pub fn new(backbone_count: usize, range: f64, link_prob: f64, seed: u64) -> Self {
        TopologyConfig {
            backbone_count,
            range,
            link_prob,
            area_side: default_area_side(),
            seed,
            fallback_attach: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.backbone_count == 0 {
            return Err(Error::Parameter("backbone_count must be at least 1".into()));
        }
        if !(self.range.is_finite() && self.range > 0.0) {
            return Err(Error::Parameter(format!(
                "range {} must be positive",
                self.range
            )));
        }
        if !(0.0..=1.0).contains(&self.link_prob) {
            return Err(Error::Parameter(format!(
                "link probability {} outside [0, 1]",
                self.link_prob
            )));
        }
        if !(self.area_side.is_finite() && self.area_side > 0.0) {
            return Err(Error::Parameter(format!(
                "area side {} must be positive",
                self.area_side
            )));
        }
        Ok(())
    }
}

/// A generated network with its two clients.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub topology: Topology,
    pub source: NodeId,
    pub dest: NodeId,
}

/// Generate from `cfg.seed`.
pub fn generate(cfg: &TopologyConfig) -> Result<Generated> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    generate_with(cfg, &mut rng)
}

/// Uniform placement in the square; backbone nodes are `0..backbone_count`,
/// then the source and destination clients.
pub fn generate_with<R: Rng + ?Sized>(cfg: &TopologyConfig, rng: &mut R) -> Result<Generated> {
    cfg.validate()?;
    let side = cfg.area_side;
    let mut b = TopologyBuilder {
        range: Some(cfg.range),
        area_side: Some(side),
        ..Default::default()
    };
    let total = cfg.backbone_count + 2;
    let positions: Vec<Point> = (0..total)
        .map(|_| Point::new(rng.gen::<f64>() * side, rng.gen::<f64>() * side))
        .collect();
    for (i, &pos) in positions.iter().enumerate() {
        let role = if i < cfg.backbone_count {
            Role::RouteNode
        } else {
            Role::Client
        };
        b.add_node(pos, role);
    }
    for i in 0..cfg.backbone_count {
        for j in i + 1..cfg.backbone_count {
            if positions[i].distance(positions[j]) <= cfg.range {
                let (a, c) = (NodeId(i as u32), NodeId(j as u32));
                if rng.gen::<f64>() < cfg.link_prob {
                    b.link(a, c);
                } else {
                    b.failed_link(a, c);
                }
            }
        }
    }
    let source = NodeId(cfg.backbone_count as u32);
    let dest = NodeId(cfg.backbone_count as u32 + 1);
    for client in [source, dest] {
        let here = positions[client.index()];
        let mut candidates: Vec<(f64, usize)> = (0..cfg.backbone_count)
            .map(|i| (here.distance(positions[i]), i))
            .filter(|&(d, _)| d <= cfg.range)
            .collect();
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for (_, i) in candidates {
            let edge = NodeId(i as u32);
            if rng.gen::<f64>() < cfg.link_prob {
                b.attach(client, edge);
                break;
            }
            b.failed_link(client, edge);
            if !cfg.fallback_attach {
                break;
            }
        }
    }
    Ok(Generated {
        topology: b.build()?,
        source,
        dest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collinear(xs: &[f64], range: f64) -> Topology {
        let mut b = TopologyBuilder::default();
        b.range(range);
        let ids: Vec<NodeId> = xs
            .iter()
            .map(|&x| b.add_node(Point::new(x, 0.0), Role::RouteNode))
            .collect();
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                if (xs[i] - xs[j]).abs() <= range {
                    b.link(ids[i], ids[j]);
                }
            }
        }
        b.build().unwrap()
    }

    /// Every simple path, shortest length; exponential, for tiny graphs only.
    fn brute_force_shortest(t: &Topology, src: NodeId, dst: NodeId) -> Option<usize> {
        fn dfs(
            t: &Topology,
            cur: NodeId,
            dst: NodeId,
            seen: &mut Vec<bool>,
            len: usize,
            best: &mut Option<usize>,
        ) {
            if cur == dst {
                *best = Some(best.map_or(len, |b| b.min(len)));
                return;
            }
            for &v in t.neighbors(cur).unwrap() {
                if seen[v.index()] || (v != dst && t.role(v).unwrap() == Role::Client) {
                    continue;
                }
                seen[v.index()] = true;
                dfs(t, v, dst, seen, len + 1, best);
                seen[v.index()] = false;
            }
        }
        let mut seen = vec![false; t.len()];
        seen[src.index()] = true;
        let mut best = None;
        dfs(t, src, dst, &mut seen, 0, &mut best);
        best
    }

    #[test]
    fn out_of_range_pair_has_no_link() {
        let t = collinear(&[0.0, 250.0], 200.0);
        assert!(t.neighbors(NodeId(0)).unwrap().is_empty());
    }

    #[test]
    fn collinear_chain() {
        let t = collinear(&[0.0, 150.0, 300.0, 450.0], 200.0);
        assert_eq!(t.established_links().count(), 3);
        assert_eq!(t.neighbors(NodeId(1)).unwrap(), &[NodeId(0), NodeId(2)]);
        let path = t.min_hop_path(NodeId(0), NodeId(3)).unwrap().unwrap();
        assert_eq!(path, vec![NodeId(0), NodeId(1), NodeId(2), NodeId(3)]);
    }

    #[test]
    fn disconnected_has_no_path() {
        let t = collinear(&[0.0, 150.0, 600.0], 200.0);
        assert_eq!(t.min_hop_path(NodeId(0), NodeId(2)).unwrap(), None);
        assert!(t.min_hop_path(NodeId(0), NodeId(9)).is_err());
        assert!(t.min_hop_path(NodeId(0), NodeId(0)).is_err());
        assert!(t.neighbors(NodeId(9)).is_err());
    }

    #[test]
    fn walkthrough_structure() {
        let (t, a, h) = Topology::walkthrough();
        let names = |ids: &[NodeId]| ids.iter().map(|&i| t.name(i)).collect::<Vec<_>>().join("");
        assert_eq!(names(t.neighbors(NodeId(1)).unwrap()), "ACDE");
        assert_eq!(names(t.neighbors(NodeId(6)).unwrap()), "DEFH");
        assert_eq!(names(&t.min_hop_path(a, h).unwrap().unwrap()), "ABDGH");
        assert_eq!(t.role(NodeId(1)).unwrap(), Role::EdgeRoute);
        assert_eq!(t.node(NodeId(6)).unwrap().clients, vec![h]);
        assert_eq!(t.attachment(a), Some(NodeId(1)));
    }

    #[test]
    fn p_zero_gives_no_links() {
        for seed in 0..20 {
            let cfg = TopologyConfig::new(60, 300.0, 0.0, seed);
            let g = generate(&cfg).unwrap();
            assert_eq!(g.topology.established_links().count(), 0);
            assert!(g.topology.attachments().is_empty());
        }
    }

    #[test]
    fn generation_invariants() {
        for seed in 0..30 {
            let cfg = TopologyConfig::new(40, 250.0, 0.6, seed);
            let g = generate(&cfg).unwrap();
            let t = &g.topology;
            assert_eq!(t.len(), 42);
            for l in t.links() {
                let d = t.node(l.a).unwrap().pos.distance(t.node(l.b).unwrap().pos);
                assert!(d <= cfg.range);
            }
            for n in t.nodes() {
                assert!((0.0..=1000.0).contains(&n.pos.x) && (0.0..=1000.0).contains(&n.pos.y));
                for &v in t.neighbors(n.id).unwrap() {
                    assert!(t.neighbors(v).unwrap().contains(&n.id));
                }
            }
            for (&c, &e) in t.attachments() {
                assert_eq!(t.neighbors(c).unwrap(), &[e]);
                assert_eq!(t.role(e).unwrap(), Role::EdgeRoute);
                // nearest in-range backbone node
                let here = t.node(c).unwrap().pos;
                let d = here.distance(t.node(e).unwrap().pos);
                for i in 0..cfg.backbone_count {
                    assert!(here.distance(t.node(NodeId(i as u32)).unwrap().pos) >= d);
                }
            }
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let cfg = TopologyConfig::new(80, 200.0, 0.5, 42);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = TopologyConfig { seed: 43, ..cfg };
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn established_fraction_tracks_p() {
        let p = 0.3;
        let (mut hits, mut total) = (0usize, 0usize);
        for seed in 0..40 {
            let g = generate(&TopologyConfig::new(80, 250.0, p, seed)).unwrap();
            for l in g.topology.links() {
                let backbone = g.topology.role(l.a).unwrap().is_backbone()
                    && g.topology.role(l.b).unwrap().is_backbone();
                if backbone {
                    total += 1;
                    hits += l.established as usize;
                }
            }
        }
        let sigma = (total as f64 * p * (1.0 - p)).sqrt();
        assert!((hits as f64 - total as f64 * p).abs() <= 3.0 * sigma);
    }

    #[test]
    fn fallback_attach_switch() {
        let mut attached = [0usize; 2];
        for (k, fallback) in [false, true].into_iter().enumerate() {
            for seed in 0..200 {
                let cfg = TopologyConfig {
                    fallback_attach: fallback,
                    ..TopologyConfig::new(100, 250.0, 0.3, seed)
                };
                attached[k] += generate(&cfg).unwrap().topology.attachments().len();
            }
        }
        assert!(attached[1] > attached[0]);
    }

    #[test]
    fn bfs_matches_brute_force() {
        for seed in 0..200 {
            let cfg = TopologyConfig {
                area_side: 400.0,
                ..TopologyConfig::new(8, 180.0, 0.7, seed)
            };
            let g = generate(&cfg).unwrap();
            let t = &g.topology;
            for a in 0..t.len() as u32 {
                for b in 0..t.len() as u32 {
                    if a == b {
                        continue;
                    }
                    let (a, b) = (NodeId(a), NodeId(b));
                    let bfs = t.min_hop_path(a, b).unwrap().map(|p| p.len() - 1);
                    assert_eq!(bfs, brute_force_shortest(t, a, b), "seed {seed} {a}->{b}");
                }
            }
        }
    }

    #[test]
    fn dump_round_trip() {
        let (t, a, h) = Topology::walkthrough();
        let dump = t.to_dump(Some(a), Some(h));
        let json = serde_json::to_string(&dump).unwrap();
        let back: TopologyDump = serde_json::from_str(&json).unwrap();
        assert_eq!(Topology::from_dump(&back).unwrap(), t);

        let g = generate(&TopologyConfig::new(30, 300.0, 0.5, 3)).unwrap();
        let again = Topology::from_dump(&g.topology.to_dump(None, None)).unwrap();
        for id in g.topology.node_ids() {
            assert_eq!(
                again.neighbors(id).unwrap(),
                g.topology.neighbors(id).unwrap()
            );
            assert_eq!(again.role(id).unwrap(), g.topology.role(id).unwrap());
        }
    }

    #[test]
    fn builder_rejects_client_shortcuts() {
        let mut b = TopologyBuilder::default();
        let c = b.add_node(Point::new(0.0, 0.0), Role::Client);
        let r1 = b.add_node(Point::new(1.0, 0.0), Role::RouteNode);
        let r2 = b.add_node(Point::new(2.0, 0.0), Role::RouteNode);
        b.attach(c, r1);
        b.link(c, r2);
        assert!(b.build().is_err());
    }

    #[test]
    fn linear_topologies() {
        for hops in 1..=6 {
            let (t, s, d) = Topology::linear(hops).unwrap();
            assert_eq!(t.min_hop_path(s, d).unwrap().unwrap().len(), hops + 1);
        }
        assert!(Topology::linear(0).is_err());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn generated_paths_are_valid(
            count in 2usize..80,
            range in 100.0f64..400.0,
            p in 0.0f64..=1.0,
            seed in any::<u64>(),
        ) {
            let cfg = TopologyConfig::new(count, range, p, seed);
            let g = generate(&cfg).unwrap();
            let t = &g.topology;
            prop_assert_eq!(t.role(g.source).unwrap(), Role::Client);
            prop_assert_eq!(t.role(g.dest).unwrap(), Role::Client);
            for l in t.established_links() {
                let d = t.node(l.a).unwrap().pos.distance(t.node(l.b).unwrap().pos);
                prop_assert!(d <= range);
            }
            if let Some(path) = t.min_hop_path(g.source, g.dest).unwrap() {
                prop_assert_eq!(path[0], g.source);
                prop_assert_eq!(*path.last().unwrap(), g.dest);
                for w in path.windows(2) {
                    prop_assert!(t.are_linked(w[0], w[1]));
                }
                for &mid in &path[1..path.len() - 1] {
                    prop_assert!(t.role(mid).unwrap().is_backbone());
                }
                let back = t.min_hop_path(g.dest, g.source).unwrap().unwrap();
                prop_assert_eq!(back.len(), path.len());
            } else {
                prop_assert!(t.min_hop_path(g.dest, g.source).unwrap().is_none());
            }
        }

        #[test]
        fn dumps_round_trip(count in 2usize..40, p in 0.0f64..=1.0, seed in any::<u64>()) {
            let g = generate(&TopologyConfig::new(count, 250.0, p, seed)).unwrap();
            let dump = g.topology.to_dump(Some(g.source), Some(g.dest));
            let json = serde_json::to_string(&dump).unwrap();
            let back = Topology::from_dump(&serde_json::from_str(&json).unwrap()).unwrap();
            prop_assert_eq!(back.to_dump(Some(g.source), Some(g.dest)), dump);
        }
    }
}
