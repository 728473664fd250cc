//! Discrete-event simulation of quantum route discovery.
//!
//! The source client floods a route request (QRR). The edge node serving the
//! destination picks a route and answers with a route reply (QRF) that walks
//! back to the source; every node it passes performs its entanglement swap.
//! The source measures the data qubit and sends a RESULT packet forward so
//! the destination can recover the state.
//!
//! In `piggyback` mode swap outcomes ride on the QRF. In `separate` mode each
//! swap node sends its outcome to the destination in its own packet instead.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::chain::{
    EntanglementDegree, ExactChannel, HopMeasurement, MeasurementLog, QuantumChannel, Recovery,
    TrackedChannel,
};
use crate::error::{Error, Result};
use crate::quantum::{BellOutcome, StateVector};
use crate::topology::{NodeId, Role, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Piggyback,
    Separate,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Piggyback => "piggyback",
            Mode::Separate => "separate",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "piggyback" => Ok(Mode::Piggyback),
            "separate" => Ok(Mode::Separate),
            _ => Err(Error::Parameter(format!(
                "unknown mode {s:?} (expected piggyback or separate)"
            ))),
        }
    }
}

/// How the quantum channel along the route is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantumMode {
    /// Coefficient recurrence; any route length.
    #[default]
    Tracked,
    /// Full state vector; short routes only.
    Exact,
}

impl fmt::Display for QuantumMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuantumMode::Tracked => "tracked",
            QuantumMode::Exact => "exact",
        })
    }
}

impl FromStr for QuantumMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tracked" => Ok(QuantumMode::Tracked),
            "exact" => Ok(QuantumMode::Exact),
            _ => Err(Error::Parameter(format!(
                "unknown quantum mode {s:?} (expected tracked or exact)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub mode: Mode,
    pub quantum: QuantumMode,
    pub n: EntanglementDegree,
    /// Ticks the selecting edge node keeps collecting QRR copies after the
    /// first one. Zero selects on first receipt.
    pub selection_window: u64,
    pub request_id: u64,
    /// Per-link delay overrides; every other link takes one tick.
    pub link_delays: BTreeMap<(NodeId, NodeId), u64>,
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            mode: Mode::Piggyback,
            quantum: QuantumMode::Tracked,
            n: EntanglementDegree::MAXIMAL,
            selection_window: 0,
            request_id: 1,
            link_delays: BTreeMap::new(),
            trace: false,
        }
    }
}

impl SimConfig {
    pub fn with_delay(mut self, a: NodeId, b: NodeId, ticks: u64) -> Self {
        self.link_delays.insert((a.min(b), a.max(b)), ticks);
        self
    }

    fn delay(&self, a: NodeId, b: NodeId) -> u64 {
        self.link_delays
            .get(&(a.min(b), a.max(b)))
            .copied()
            .unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QrrPacket {
    pub source: NodeId,
    pub dest: NodeId,
    pub request_id: u64,
    pub prev_node: NodeId,
    /// Relays traversed so far; the source sends 0.
    pub cost: usize,
    /// Source followed by every relay, in order.
    pub route_record: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QrfPacket {
    pub request_id: u64,
    pub route: Vec<NodeId>,
    /// Swap outcomes so far, destination side first. Empty in separate mode.
    pub log: Vec<HopMeasurement>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultPacket {
    pub request_id: u64,
    pub route: Vec<NodeId>,
    pub swaps: Vec<HopMeasurement>,
    pub source_bell: BellOutcome,
}

/// One swap outcome travelling on its own (separate mode).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtraResultPacket {
    pub request_id: u64,
    pub route: Vec<NodeId>,
    /// Position of the measuring node in `route`.
    pub position: usize,
    pub measurement: HopMeasurement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Qrr(QrrPacket),
    Qrf(QrfPacket),
    Result(ResultPacket),
    ExtraResult(ExtraResultPacket),
}

impl Packet {
    pub fn kind(&self) -> &'static str {
        match self {
            Packet::Qrr(_) => "qrr",
            Packet::Qrf(_) => "qrf",
            Packet::Result(_) => "result",
            Packet::ExtraResult(_) => "extra",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketCounts {
    pub qrr: u64,
    pub qrf: u64,
    pub result: u64,
    pub extra_result: u64,
}

impl PacketCounts {
    pub fn total(&self) -> u64 {
        self.qrr + self.qrf + self.result + self.extra_result
    }

    fn bump(&mut self, p: &Packet) {
        match p {
            Packet::Qrr(_) => self.qrr += 1,
            Packet::Qrf(_) => self.qrf += 1,
            Packet::Result(_) => self.result += 1,
            Packet::ExtraResult(_) => self.extra_result += 1,
        }
    }
}

impl fmt::Display for PacketCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "qrr={} qrf={} result={} extra_result={} total={}",
            self.qrr,
            self.qrf,
            self.result,
            self.extra_result,
            self.total()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteTableEntry {
    /// Next node toward the destination; known once the QRF passes.
    pub upward: Option<NodeId>,
    /// Node the first copy of the QRR came from; at the selecting node, the
    /// sender of the chosen copy.
    pub downward: NodeId,
    pub request_id: u64,
    pub cost: usize,
    pub source: NodeId,
    pub dest: NodeId,
}

#[derive(Debug, Clone)]
struct Buffered {
    tick: u64,
    seq: u64,
    pkt: QrrPacket,
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: NodeId,
    pub role: Role,
    pub clients: Vec<NodeId>,
    pub route_table: BTreeMap<(NodeId, u64), RouteTableEntry>,
    pub seen: BTreeSet<(NodeId, u64)>,
    pending: Vec<Buffered>,
    selected: BTreeSet<(NodeId, u64)>,
}

impl NodeState {
    fn new(t: &Topology, id: NodeId) -> Self {
        let node = &t.nodes()[id.index()];
        NodeState {
            id,
            role: node.role,
            clients: node.clients.clone(),
            route_table: BTreeMap::new(),
            seen: BTreeSet::new(),
            pending: Vec::new(),
            selected: BTreeSet::new(),
        }
    }

    fn selects_for(&self, dest: NodeId) -> bool {
        self.id == dest || (self.role == Role::EdgeRoute && self.clients.contains(&dest))
    }
}

/// A QRR copy held by the selecting node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub arrival: u64,
    pub cost: usize,
    pub route_record: Vec<NodeId>,
}

/// Minimum cost first, then earliest arrival. Returns the full route from
/// source to `dest` through `selector`.
pub fn select_route(
    candidates: &[Candidate],
    selector: NodeId,
    dest: NodeId,
) -> Option<Vec<NodeId>> {
    let best = candidates
        .iter()
        .enumerate()
        .min_by_key(|(i, c)| (c.cost, c.arrival, *i))?
        .1;
    let mut route = best.route_record.clone();
    route.push(selector);
    if selector != dest {
        route.push(dest);
    }
    Some(route)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub tick: u64,
    pub kind: &'static str,
    pub from: NodeId,
    pub to: NodeId,
    pub summary: String,
}

/// Tab-separated trace, one event per line, nodes by label when they have one.
pub fn format_trace(events: &[TraceEvent], t: &Topology) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            e.tick,
            e.kind,
            t.name(e.from),
            t.name(e.to),
            e.summary
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct SessionReport {
    pub route: Option<Vec<NodeId>>,
    pub hops: usize,
    pub success: bool,
    /// Only on success.
    pub fidelity: Option<f64>,
    pub attempt_prob: Option<f64>,
    pub log: Option<MeasurementLog>,
    pub packets: PacketCounts,
    pub completion_time: u64,
    pub mode: Mode,
    /// Nodes the QRF visited, selector first.
    pub qrf_path: Vec<NodeId>,
    /// Nodes the RESULT packet visited, source first.
    pub result_path: Vec<NodeId>,
    pub trace: Vec<TraceEvent>,
}

impl SessionReport {
    pub fn summary(&self, t: &Topology) -> String {
        let names = |p: &[NodeId]| p.iter().map(|&i| t.name(i)).collect::<Vec<_>>().join("-");
        let mut s = String::new();
        match &self.route {
            Some(r) => s.push_str(&format!("route: {} ({} hops)\n", names(r), self.hops)),
            None => s.push_str("route: none\n"),
        }
        if !self.qrf_path.is_empty() {
            s.push_str(&format!("qrf path: {}\n", names(&self.qrf_path)));
        }
        if let Some(log) = &self.log {
            s.push_str(&format!("measurements: {log}\n"));
        }
        s.push_str(&format!("mode: {}\n", self.mode));
        s.push_str(&format!("packets: {}\n", self.packets));
        s.push_str(&format!(
            "completion time: {} ticks\n",
            self.completion_time
        ));
        s.push_str(&format!("success: {}\n", self.success));
        if let Some(p) = self.attempt_prob {
            s.push_str(&format!("correction success probability: {p:.12}\n"));
        }
        if let Some(f) = self.fidelity {
            s.push_str(&format!("fidelity: {f:.12}\n"));
        }
        s
    }
}

#[derive(Debug)]
enum Event {
    Deliver {
        from: NodeId,
        to: NodeId,
        packet: Packet,
    },
    CloseWindow {
        node: NodeId,
        key: (NodeId, u64),
    },
}

/// One session's event loop and node states.
pub struct Session<'a> {
    topo: &'a Topology,
    cfg: &'a SimConfig,
    rng: &'a mut dyn RngCore,
    src: NodeId,
    dst: NodeId,
    nodes: Vec<NodeState>,
    queue: BTreeMap<(u64, u64), Event>,
    seq: u64,
    now: u64,
    packets: PacketCounts,
    trace: Vec<TraceEvent>,
    channel: Box<dyn QuantumChannel>,
    route: Option<Vec<NodeId>>,
    qrf_path: Vec<NodeId>,
    result_path: Vec<NodeId>,
    extras: BTreeMap<usize, HopMeasurement>,
    result: Option<ResultPacket>,
    recovery: Option<Recovery>,
    completion: u64,
}

impl<'a> Session<'a> {
    pub fn new(
        topo: &'a Topology,
        src: NodeId,
        dst: NodeId,
        input: &StateVector,
        cfg: &'a SimConfig,
        rng: &'a mut dyn RngCore,
    ) -> Result<Self> {
        for id in [src, dst] {
            if topo.role(id)? != Role::Client {
                return Err(Error::Parameter(format!("node {id} is not a client")));
            }
        }
        if src == dst {
            return Err(Error::Parameter("source and destination coincide".into()));
        }
        let channel: Box<dyn QuantumChannel> = match cfg.quantum {
            QuantumMode::Tracked => Box::new(TrackedChannel::new(input, cfg.n)?),
            QuantumMode::Exact => Box::new(ExactChannel::new(input, cfg.n)?),
        };
        Ok(Session {
            topo,
            cfg,
            rng,
            src,
            dst,
            nodes: topo.node_ids().map(|id| NodeState::new(topo, id)).collect(),
            queue: BTreeMap::new(),
            seq: 0,
            now: 0,
            packets: PacketCounts::default(),
            trace: Vec::new(),
            channel,
            route: None,
            qrf_path: Vec::new(),
            result_path: Vec::new(),
            extras: BTreeMap::new(),
            result: None,
            recovery: None,
            completion: 0,
        })
    }

    pub fn node(&self, id: NodeId) -> Result<&NodeState> {
        self.nodes.get(id.index()).ok_or(Error::UnknownNode(id))
    }

    /// Originate the request and process events until the queue drains.
    pub fn run(&mut self) -> Result<SessionReport> {
        let key = (self.src, self.cfg.request_id);
        let origin = &mut self.nodes[self.src.index()];
        origin.seen.insert(key);
        origin.route_table.insert(
            key,
            RouteTableEntry {
                upward: None,
                downward: self.src,
                request_id: self.cfg.request_id,
                cost: 0,
                source: self.src,
                dest: self.dst,
            },
        );
        let qrr = QrrPacket {
            source: self.src,
            dest: self.dst,
            request_id: self.cfg.request_id,
            prev_node: self.src,
            cost: 0,
            route_record: vec![self.src],
        };
        self.broadcast(self.src, Packet::Qrr(qrr))?;

        while let Some(((tick, seq), ev)) = self.queue.pop_first() {
            self.now = tick;
            match ev {
                Event::Deliver { from, to, packet } => {
                    if self.cfg.trace {
                        let summary = self.describe(&packet);
                        self.note(packet.kind(), from, to, summary);
                    }
                    match packet {
                        Packet::Qrr(p) => self.handle_qrr(to, p, seq)?,
                        Packet::Qrf(p) => self.process_qrf(to, from, p)?,
                        Packet::Result(p) => self.handle_result(to, p)?,
                        Packet::ExtraResult(p) => self.handle_extra(to, p)?,
                    }
                }
                Event::CloseWindow { node, key } => self.select(node, key)?,
            }
        }
        self.report()
    }

    fn report(&mut self) -> Result<SessionReport> {
        let hops = self.route.as_ref().map_or(0, |r| r.len() - 1);
        if self.route.is_some() && self.recovery.is_none() {
            return Err(Error::Protocol("route selected but never recovered".into()));
        }
        let rec = self.recovery.take();
        Ok(SessionReport {
            route: self.route.take(),
            hops,
            success: rec.as_ref().is_some_and(|r| r.success),
            fidelity: rec.as_ref().and_then(|r| r.fidelity),
            attempt_prob: rec.as_ref().map(|r| r.attempt_prob),
            log: rec.map(|r| r.log),
            packets: self.packets,
            completion_time: self.completion,
            mode: self.cfg.mode,
            qrf_path: std::mem::take(&mut self.qrf_path),
            result_path: std::mem::take(&mut self.result_path),
            trace: std::mem::take(&mut self.trace),
        })
    }

    fn schedule(&mut self, at: u64, ev: Event) {
        self.queue.insert((at, self.seq), ev);
        self.seq += 1;
    }

    fn note(&mut self, kind: &'static str, from: NodeId, to: NodeId, summary: String) {
        if self.cfg.trace {
            self.trace.push(TraceEvent {
                tick: self.now,
                kind,
                from,
                to,
                summary,
            });
        }
    }

    fn unicast(&mut self, from: NodeId, to: NodeId, packet: Packet) -> Result<()> {
        if !self.topo.are_linked(from, to) {
            return Err(Error::Protocol(format!("no link {from}-{to}")));
        }
        self.packets.bump(&packet);
        let at = self.now + self.cfg.delay(from, to);
        self.schedule(at, Event::Deliver { from, to, packet });
        Ok(())
    }

    /// One transmission reaching every neighbour. A node without neighbours
    /// has nobody to transmit to and sends nothing.
    fn broadcast(&mut self, from: NodeId, packet: Packet) -> Result<()> {
        let neighbors = self.topo.neighbors(from)?;
        if neighbors.is_empty() {
            return Ok(());
        }
        self.packets.bump(&packet);
        for &to in neighbors {
            let at = self.now + self.cfg.delay(from, to);
            let packet = packet.clone();
            self.schedule(at, Event::Deliver { from, to, packet });
        }
        Ok(())
    }

    fn names(&self, ids: &[NodeId]) -> String {
        ids.iter()
            .map(|&i| self.topo.name(i))
            .collect::<Vec<_>>()
            .join("-")
    }

    fn describe(&self, p: &Packet) -> String {
        let log = |l: &[HopMeasurement]| {
            if l.is_empty() {
                "-".to_string()
            } else {
                MeasurementLog::new(l.to_vec()).to_string()
            }
        };
        match p {
            Packet::Qrr(q) => format!(
                "id={} cost={} record={}",
                q.request_id,
                q.cost,
                self.names(&q.route_record)
            ),
            Packet::Qrf(q) => format!("route={} log={}", self.names(&q.route), log(&q.log)),
            Packet::Result(r) => format!("swaps={} source={}", log(&r.swaps), r.source_bell),
            Packet::ExtraResult(x) => format!(
                "origin={} m={}",
                self.topo.name(x.route[x.position]),
                x.measurement
            ),
        }
    }

    fn handle_qrr(&mut self, at: NodeId, pkt: QrrPacket, seq: u64) -> Result<()> {
        let key = (pkt.source, pkt.request_id);
        let now = self.now;
        let state = &mut self.nodes[at.index()];
        let first = state.seen.insert(key);
        if first {
            state.route_table.insert(
                key,
                RouteTableEntry {
                    upward: None,
                    downward: pkt.prev_node,
                    request_id: pkt.request_id,
                    cost: pkt.cost,
                    source: pkt.source,
                    dest: pkt.dest,
                },
            );
        }

        if state.selects_for(pkt.dest) {
            if state.selected.contains(&key) {
                return Ok(());
            }
            state.pending.push(Buffered {
                tick: now,
                seq,
                pkt,
            });
            if self.cfg.selection_window == 0 {
                return self.select(at, key);
            }
            if first {
                let close = now + self.cfg.selection_window;
                self.schedule(close, Event::CloseWindow { node: at, key });
            }
            return Ok(());
        }

        if !first || state.role == Role::Client {
            return Ok(());
        }
        let mut fwd = pkt;
        fwd.cost += 1;
        fwd.route_record.push(at);
        fwd.prev_node = at;
        self.broadcast(at, Packet::Qrr(fwd))
    }

    fn select(&mut self, node: NodeId, key: (NodeId, u64)) -> Result<()> {
        let state = &mut self.nodes[node.index()];
        state.selected.insert(key);
        let mut buffered = std::mem::take(&mut state.pending);
        buffered.sort_by_key(|b| (b.tick, b.seq));
        let candidates: Vec<Candidate> = buffered
            .iter()
            .filter(|b| (b.pkt.source, b.pkt.request_id) == key)
            .map(|b| Candidate {
                arrival: b.tick,
                cost: b.pkt.cost,
                route_record: b.pkt.route_record.clone(),
            })
            .collect();
        let Some(route) = select_route(&candidates, node, self.dst) else {
            return Ok(());
        };
        if self.cfg.trace {
            let summary = format!(
                "route={} candidates={}",
                self.names(&route),
                candidates.len()
            );
            self.note("select", node, node, summary);
        }
        // a later, cheaper copy may have won; point the entry at its sender
        let pos = route.iter().position(|&r| r == node).unwrap_or(1);
        if let Some(e) = self.nodes[node.index()].route_table.get_mut(&key) {
            e.downward = route[pos - 1];
            e.cost = pos - 1;
        }
        self.route = Some(route.clone());
        self.qrf_path.push(node);

        let qrf = QrfPacket {
            request_id: key.1,
            route,
            log: Vec::new(),
        };
        if node == self.dst {
            // clients linked directly: the reply has nothing to swap
            let up = qrf.route[qrf.route.len() - 2];
            return self.unicast(node, up, Packet::Qrf(qrf));
        }
        self.set_upward(node, key, self.dst)?;
        let pos = qrf.route.len() - 2;
        self.swap_and_forward(node, pos, qrf)
    }

    fn set_upward(&mut self, node: NodeId, key: (NodeId, u64), upward: NodeId) -> Result<()> {
        let entry = self.nodes[node.index()]
            .route_table
            .get_mut(&key)
            .ok_or_else(|| Error::Protocol(format!("node {node} has no route entry")))?;
        entry.upward = Some(upward);
        Ok(())
    }

    /// This node's swap, then the reply moves one hop toward the source.
    fn swap_and_forward(&mut self, node: NodeId, pos: usize, mut qrf: QrfPacket) -> Result<()> {
        let m = self.channel.swap(&mut *self.rng)?;
        self.note("swap", node, node, m.to_string());
        match self.cfg.mode {
            Mode::Piggyback => qrf.log.push(m),
            Mode::Separate => {
                let extra = ExtraResultPacket {
                    request_id: qrf.request_id,
                    route: qrf.route.clone(),
                    position: pos,
                    measurement: m,
                };
                self.unicast(node, qrf.route[pos + 1], Packet::ExtraResult(extra))?;
            }
        }
        let key = (qrf.route[0], qrf.request_id);
        let down = self.nodes[node.index()]
            .route_table
            .get(&key)
            .map(|e| e.downward)
            .ok_or_else(|| Error::Protocol(format!("node {node} has no route entry")))?;
        let up = qrf.route[pos - 1];
        if down != up {
            return Err(Error::Protocol(format!(
                "route predecessor {up} of {node} differs from its table entry {down}"
            )));
        }
        self.unicast(node, up, Packet::Qrf(qrf))
    }

    fn position(route: &[NodeId], node: NodeId) -> Result<usize> {
        route
            .iter()
            .position(|&r| r == node)
            .ok_or_else(|| Error::Protocol(format!("node {node} is not on the route")))
    }

    fn process_qrf(&mut self, at: NodeId, from: NodeId, pkt: QrfPacket) -> Result<()> {
        let pos = Self::position(&pkt.route, at)?;
        if pkt.route.get(pos + 1) != Some(&from) {
            return Err(Error::Protocol(format!(
                "reply reached {at} from off-route {from}"
            )));
        }
        self.qrf_path.push(at);
        let key = (pkt.route[0], pkt.request_id);
        self.set_upward(at, key, from)?;
        if pos > 0 {
            return self.swap_and_forward(at, pos, pkt);
        }
        let bell = self.channel.measure_source(&mut *self.rng)?;
        self.note("measure", at, at, bell.to_string());
        self.result_path.push(at);
        let result = ResultPacket {
            request_id: pkt.request_id,
            swaps: pkt.log,
            source_bell: bell,
            route: pkt.route,
        };
        let next = result.route[1];
        self.unicast(at, next, Packet::Result(result))
    }

    fn handle_result(&mut self, at: NodeId, pkt: ResultPacket) -> Result<()> {
        let pos = Self::position(&pkt.route, at)?;
        self.result_path.push(at);
        if at != self.dst {
            let next = pkt.route[pos + 1];
            return self.unicast(at, next, Packet::Result(pkt));
        }
        self.result = Some(pkt);
        self.try_recover()
    }

    fn handle_extra(&mut self, at: NodeId, pkt: ExtraResultPacket) -> Result<()> {
        let pos = Self::position(&pkt.route, at)?;
        if at != self.dst {
            let next = pkt.route[pos + 1];
            return self.unicast(at, next, Packet::ExtraResult(pkt));
        }
        self.extras.insert(pkt.position, pkt.measurement);
        self.try_recover()
    }

    /// Recover once the RESULT and, in separate mode, every swap outcome
    /// have arrived.
    fn try_recover(&mut self) -> Result<()> {
        let Some(result) = &self.result else {
            return Ok(());
        };
        let hops = result.route.len() - 1;
        let swaps: Vec<HopMeasurement> = match self.cfg.mode {
            Mode::Piggyback => result.swaps.clone(),
            Mode::Separate => {
                if self.extras.len() < hops - 1 {
                    return Ok(());
                }
                // swaps happened destination side first
                self.extras.values().rev().copied().collect()
            }
        };
        if swaps.len() != hops - 1 {
            return Err(Error::Protocol(format!(
                "{} swap outcomes for a {hops}-hop route",
                swaps.len()
            )));
        }
        let bell = result.source_bell;
        let rec = self.channel.recover(&swaps, bell, &mut *self.rng)?;
        if self.cfg.trace {
            let mut summary = format!("log={} success={}", rec.log, rec.success);
            if let Some(f) = rec.fidelity {
                summary.push_str(&format!(" fidelity={f:.12}"));
            }
            self.note("recover", self.dst, self.dst, summary);
        }
        self.recovery = Some(rec);
        self.completion = self.now;
        Ok(())
    }
}

/// Run one complete session from `src` to `dst` carrying `input`.
pub fn run_session<R: RngCore>(
    t: &Topology,
    src: NodeId,
    dst: NodeId,
    input: &StateVector,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<SessionReport> {
    Session::new(t, src, dst, input, cfg, rng)?.run()
}
