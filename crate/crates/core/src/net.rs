//! Nets: agent kinds, agents carrying value tuples, port-to-port wiring and
//! named free interfaces. Construction is incremental; `validate` is the
//! gate that checks the perfect-matching invariant before reduction.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KindId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentId(pub u64);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// A node species: port count, which ports are principal, and how many
/// value slots its instances carry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentKind {
    pub name: String,
    pub arity: usize,
    pub principal_ports: Vec<usize>,
    pub value_arity: usize,
}

impl AgentKind {
    pub fn new(
        name: impl Into<String>,
        arity: usize,
        principal_ports: Vec<usize>,
        value_arity: usize,
    ) -> Self {
        AgentKind {
            name: name.into(),
            arity,
            principal_ports,
            value_arity,
        }
    }

    /// The port a partner faces when this kind sits on the passive side of
    /// a rule: its first principal port.
    pub fn first_principal(&self) -> usize {
        self.principal_ports[0]
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("kind `{0}` is already registered")]
    DuplicateKind(String),
    #[error("unknown kind `{0}`")]
    UnknownKind(String),
    #[error("kind `{name}`: invalid principal ports {ports:?} for arity {arity}")]
    BadPrincipalPorts {
        name: String,
        ports: Vec<usize>,
        arity: usize,
    },
    #[error("agent of kind `{kind}` expects {expected} values, got {got}")]
    ValueArity {
        kind: String,
        expected: usize,
        got: usize,
    },
    #[error("no such agent {0}")]
    NoSuchAgent(AgentId),
    #[error("port {port} out of range for agent {agent} of kind `{kind}` (arity {arity})")]
    PortOutOfRange {
        agent: AgentId,
        kind: String,
        port: usize,
        arity: usize,
    },
    #[error("endpoint {0} is already wired")]
    AlreadyWired(PortRef),
    #[error("cannot wire a port to itself")]
    SelfWire,
    #[error("endpoint {0} is not wired")]
    NotWired(PortRef),
}

/// Registry of the agent kinds of one interaction system.
#[derive(Debug, Default, Clone)]
pub struct KindTable {
    kinds: Vec<AgentKind>,
    by_name: HashMap<String, KindId>,
}

impl KindTable {
    pub fn new() -> Self {
        KindTable::default()
    }

    pub fn register(&mut self, kind: AgentKind) -> Result<KindId, NetError> {
        if self.by_name.contains_key(&kind.name) {
            return Err(NetError::DuplicateKind(kind.name));
        }
        let ok = !kind.principal_ports.is_empty()
            && kind.principal_ports.len() <= kind.arity
            && kind.principal_ports.iter().all(|&p| p < kind.arity)
            && {
                let set: BTreeSet<_> = kind.principal_ports.iter().collect();
                set.len() == kind.principal_ports.len()
            };
        if !ok {
            return Err(NetError::BadPrincipalPorts {
                name: kind.name,
                ports: kind.principal_ports,
                arity: kind.arity,
            });
        }
        let id = KindId(self.kinds.len() as u32);
        self.by_name.insert(kind.name.clone(), id);
        self.kinds.push(kind);
        Ok(id)
    }

    pub fn get(&self, id: KindId) -> &AgentKind {
        &self.kinds[id.0 as usize]
    }

    pub fn lookup(&self, name: &str) -> Option<KindId> {
        self.by_name.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<KindId, NetError> {
        self.lookup(name)
            .ok_or_else(|| NetError::UnknownKind(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (KindId, &AgentKind)> {
        self.kinds
            .iter()
            .enumerate()
            .map(|(i, k)| (KindId(i as u32), k))
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agent {
    pub id: AgentId,
    pub kind: KindId,
    pub values: Vec<Value>,
}

/// One end of a wire: an agent port or a named free interface port.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PortRef {
    Agent(AgentId, usize),
    Iface(String),
}

impl PortRef {
    pub fn iface(name: impl Into<String>) -> PortRef {
        PortRef::Iface(name.into())
    }

    pub fn agent_id(&self) -> Option<AgentId> {
        match self {
            PortRef::Agent(id, _) => Some(*id),
            PortRef::Iface(_) => None,
        }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PortRef::Agent(id, p) => write!(f, "{id}.{p}"),
            PortRef::Iface(name) => write!(f, "@{name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub port: PortRef,
    pub problem: String,
}

#[derive(Debug, Clone)]
pub struct Net {
    kinds: Arc<KindTable>,
    agents: BTreeMap<AgentId, Agent>,
    peers: BTreeMap<PortRef, PortRef>,
    next_id: u64,
}

impl Net {
    pub fn new(kinds: Arc<KindTable>) -> Net {
        Net {
            kinds,
            agents: BTreeMap::new(),
            peers: BTreeMap::new(),
            next_id: 0,
        }
    }

    pub fn kinds(&self) -> &KindTable {
        &self.kinds
    }

    pub fn kinds_arc(&self) -> Arc<KindTable> {
        Arc::clone(&self.kinds)
    }

    /// Swaps in a kind table that extends the current one (same ids for all
    /// existing kinds). The engine uses this to add its observer kind.
    pub(crate) fn set_kinds(&mut self, kinds: Arc<KindTable>) {
        debug_assert!(kinds.len() >= self.kinds.len());
        self.kinds = kinds;
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> impl Iterator<Item = &Agent> {
        self.agents.values()
    }

    pub fn agent(&self, id: AgentId) -> Option<&Agent> {
        self.agents.get(&id)
    }

    pub fn kind_of(&self, id: AgentId) -> Option<&AgentKind> {
        self.agents.get(&id).map(|a| self.kinds.get(a.kind))
    }

    /// All wires, each unordered pair listed once, smaller endpoint first.
    pub fn wires(&self) -> Vec<(PortRef, PortRef)> {
        self.peers
            .iter()
            .filter(|(a, b)| a < b)
            .map(|(a, b)| (a.clone(), b.clone()))
            .collect()
    }

    pub fn wire_count(&self) -> usize {
        self.peers.len() / 2
    }

    /// The free interface: names wired somewhere in the net.
    pub fn interface(&self) -> BTreeSet<String> {
        self.peers
            .keys()
            .filter_map(|p| match p {
                PortRef::Iface(name) => Some(name.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn peer(&self, port: &PortRef) -> Option<&PortRef> {
        self.peers.get(port)
    }

    /// Adds an agent with all ports dangling; the net is transiently
    /// invalid until they are wired.
    pub fn add_agent(&mut self, kind: KindId, values: Vec<Value>) -> Result<AgentId, NetError> {
        let k = self.kinds.get(kind);
        if values.len() != k.value_arity {
            return Err(NetError::ValueArity {
                kind: k.name.clone(),
                expected: k.value_arity,
                got: values.len(),
            });
        }
        let id = AgentId(self.next_id);
        self.next_id += 1;
        self.agents.insert(id, Agent { id, kind, values });
        Ok(id)
    }

    pub fn add_agent_by_name(
        &mut self,
        kind: &str,
        values: Vec<Value>,
    ) -> Result<AgentId, NetError> {
        let id = self.kinds.require(kind)?;
        self.add_agent(id, values)
    }

    fn check_endpoint(&self, p: &PortRef) -> Result<(), NetError> {
        if let PortRef::Agent(id, port) = p {
            let agent = self.agents.get(id).ok_or(NetError::NoSuchAgent(*id))?;
            let kind = self.kinds.get(agent.kind);
            if *port >= kind.arity {
                return Err(NetError::PortOutOfRange {
                    agent: *id,
                    kind: kind.name.clone(),
                    port: *port,
                    arity: kind.arity,
                });
            }
        }
        Ok(())
    }

    pub fn connect(&mut self, a: PortRef, b: PortRef) -> Result<(), NetError> {
        if a == b {
            return Err(NetError::SelfWire);
        }
        self.check_endpoint(&a)?;
        self.check_endpoint(&b)?;
        if self.peers.contains_key(&a) {
            return Err(NetError::AlreadyWired(a));
        }
        if self.peers.contains_key(&b) {
            return Err(NetError::AlreadyWired(b));
        }
        self.peers.insert(a.clone(), b.clone());
        self.peers.insert(b, a);
        Ok(())
    }

    /// Removes the wire at `port`, returning the other end.
    pub fn disconnect(&mut self, port: &PortRef) -> Result<PortRef, NetError> {
        let peer = self
            .peers
            .remove(port)
            .ok_or_else(|| NetError::NotWired(port.clone()))?;
        self.peers.remove(&peer);
        Ok(peer)
    }

    /// Removes an agent and every wire touching it. Returns the agent.
    pub fn remove_agent(&mut self, id: AgentId) -> Result<Agent, NetError> {
        let agent = self.agents.remove(&id).ok_or(NetError::NoSuchAgent(id))?;
        let arity = self.kinds.get(agent.kind).arity;
        for port in 0..arity {
            let p = PortRef::Agent(id, port);
            if self.peers.contains_key(&p) {
                self.disconnect(&p).unwrap();
            }
        }
        Ok(agent)
    }

    /// Checks the perfect-matching invariant: every port of every agent is
    /// wired exactly once. Returns every violation rather than the first.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut violations = Vec::new();
        for agent in self.agents.values() {
            let arity = self.kinds.get(agent.kind).arity;
            for port in 0..arity {
                let p = PortRef::Agent(agent.id, port);
                if !self.peers.contains_key(&p) {
                    violations.push(Violation {
                        port: p,
                        problem: "dangling port".to_string(),
                    });
                }
            }
        }
        // wires to agents that no longer exist (cannot arise via the public
        // API, but the check is cheap and guards engine splicing)
        for (a, _) in self.peers.iter() {
            if let PortRef::Agent(id, _) = a {
                if !self.agents.contains_key(id) {
                    violations.push(Violation {
                        port: a.clone(),
                        problem: "wire references missing agent".to_string(),
                    });
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    /// Builds a channel as a chain of stream cells. `head` is the consumer
    /// side: the first value's principal port is wired toward it. The last
    /// cell's tail goes to `tail`, or to a fresh nil agent when
    /// `tail` is `StreamTail::Nil`.
    pub fn mk_stream(
        &mut self,
        cell_kind: KindId,
        values: &[Value],
        head: PortRef,
        tail: StreamTail,
    ) -> Result<Vec<AgentId>, NetError> {
        if self.peers.contains_key(&head) {
            return Err(NetError::AlreadyWired(head));
        }
        if let StreamTail::Port(p) = &tail {
            if self.peers.contains_key(p) {
                return Err(NetError::AlreadyWired(p.clone()));
            }
        }
        let mut ids = Vec::with_capacity(values.len());
        let mut upstream = head;
        for v in values {
            let id = self.add_agent(cell_kind, vec![*v])?;
            self.connect(PortRef::Agent(id, 0), upstream)?;
            upstream = PortRef::Agent(id, 1);
            ids.push(id);
        }
        match tail {
            StreamTail::Port(p) => self.connect(upstream, p)?,
            StreamTail::Nil(nil_kind) => {
                let nil = self.add_agent(nil_kind, vec![])?;
                self.connect(upstream, PortRef::Agent(nil, 0))?;
                ids.push(nil);
            }
        }
        Ok(ids)
    }
}

/// What terminates a stream built by [`Net::mk_stream`].
#[derive(Debug, Clone)]
pub enum StreamTail {
    /// Wire the last cell's tail (or the head directly, for an empty
    /// stream) to this endpoint.
    Port(PortRef),
    /// Terminate with a nil agent of the given kind.
    Nil(KindId),
}

/// Structural equality up to agent renaming: a bijection preserving kind
/// names, values, port wiring and interface names.
pub fn isomorphic(a: &Net, b: &Net) -> bool {
    if a.agents.len() != b.agents.len() || a.peers.len() != b.peers.len() {
        return false;
    }
    if a.interface() != b.interface() {
        return false;
    }
    let sig = |net: &Net, ag: &Agent| -> (String, Vec<Value>) {
        (net.kinds.get(ag.kind).name.clone(), ag.values.clone())
    };
    // multiset of signatures must agree
    let mut sa: Vec<_> = a.agents.values().map(|ag| sig(a, ag)).collect();
    let mut sb: Vec<_> = b.agents.values().map(|ag| sig(b, ag)).collect();
    sa.sort();
    sb.sort();
    if sa != sb {
        return false;
    }

    let mut mapping: HashMap<AgentId, AgentId> = HashMap::new();
    let mut used: BTreeSet<AgentId> = BTreeSet::new();

    // Extending `x ↦ y` must be consistent with everything already mapped.
    fn extend(
        a: &Net,
        b: &Net,
        mapping: &mut HashMap<AgentId, AgentId>,
        used: &mut BTreeSet<AgentId>,
        x: AgentId,
        y: AgentId,
    ) -> bool {
        if let Some(&m) = mapping.get(&x) {
            return m == y;
        }
        if used.contains(&y) {
            return false;
        }
        let ax = &a.agents[&x];
        let ay = &b.agents[&y];
        if a.kinds.get(ax.kind).name != b.kinds.get(ay.kind).name || ax.values != ay.values {
            return false;
        }
        mapping.insert(x, y);
        used.insert(y);
        let arity = a.kinds.get(ax.kind).arity;
        for port in 0..arity {
            let pa = a.peers.get(&PortRef::Agent(x, port));
            let pb = b.peers.get(&PortRef::Agent(y, port));
            match (pa, pb) {
                (None, None) => {}
                (Some(PortRef::Iface(na)), Some(PortRef::Iface(nb))) => {
                    if na != nb {
                        return false;
                    }
                }
                (Some(PortRef::Agent(xa, qa)), Some(PortRef::Agent(xb, qb))) => {
                    if qa != qb || !extend(a, b, mapping, used, *xa, *xb) {
                        return false;
                    }
                }
                _ => return false,
            }
        }
        true
    }

    // Seed from interface ports: their peers must correspond exactly.
    for name in a.interface() {
        let pa = a.peers.get(&PortRef::iface(name.clone())).unwrap();
        let pb = b.peers.get(&PortRef::iface(name.clone())).unwrap();
        match (pa, pb) {
            (PortRef::Iface(na), PortRef::Iface(nb)) => {
                if na != nb {
                    return false;
                }
            }
            (PortRef::Agent(xa, qa), PortRef::Agent(xb, qb)) => {
                if qa != qb || !extend(a, b, &mut mapping, &mut used, *xa, *xb) {
                    return false;
                }
            }
            _ => return false,
        }
    }

    // Closed components: backtrack over candidate images.
    fn finish(
        a: &Net,
        b: &Net,
        mapping: &mut HashMap<AgentId, AgentId>,
        used: &mut BTreeSet<AgentId>,
    ) -> bool {
        let next = a.agents.keys().find(|id| !mapping.contains_key(id)).copied();
        let Some(x) = next else { return true };
        let candidates: Vec<AgentId> = b
            .agents
            .keys()
            .filter(|id| !used.contains(id))
            .copied()
            .collect();
        for y in candidates {
            let saved_map = mapping.clone();
            let saved_used = used.clone();
            if extend(a, b, mapping, used, x, y) && finish(a, b, mapping, used) {
                return true;
            }
            *mapping = saved_map;
            *used = saved_used;
        }
        false
    }

    finish(a, b, &mut mapping, &mut used)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream_kinds() -> Arc<KindTable> {
        let mut t = KindTable::new();
        t.register(AgentKind::new("num", 2, vec![0], 1)).unwrap();
        t.register(AgentKind::new("nil", 1, vec![0], 0)).unwrap();
        Arc::new(t)
    }

    fn list_net(values: &[i64]) -> Net {
        let kinds = stream_kinds();
        let mut net = Net::new(Arc::clone(&kinds));
        let num = kinds.lookup("num").unwrap();
        let nil = kinds.lookup("nil").unwrap();
        let vals: Vec<Value> = values.iter().map(|&v| Value::Int(v)).collect();
        net.mk_stream(num, &vals, PortRef::iface("out"), StreamTail::Nil(nil))
            .unwrap();
        net
    }

    #[test]
    fn empty_net_is_valid() {
        let net = Net::new(stream_kinds());
        assert_eq!(net.agent_count(), 0);
        assert_eq!(net.wire_count(), 0);
        assert!(net.validate().is_ok());
    }

    #[test]
    fn add_agent_checks_value_arity() {
        let kinds = stream_kinds();
        let mut net = Net::new(Arc::clone(&kinds));
        let num = kinds.lookup("num").unwrap();
        assert!(net.add_agent(num, vec![]).is_err());
        let id = net.add_agent(num, vec![Value::Int(1)]).unwrap();
        assert_eq!(net.kind_of(id).unwrap().arity, 2);
    }

    #[test]
    fn double_connect_is_rejected() {
        let kinds = stream_kinds();
        let mut net = Net::new(Arc::clone(&kinds));
        let num = kinds.lookup("num").unwrap();
        let nil = kinds.lookup("nil").unwrap();
        let a = net.add_agent(num, vec![Value::Int(1)]).unwrap();
        let b = net.add_agent(nil, vec![]).unwrap();
        net.connect(PortRef::Agent(a, 1), PortRef::Agent(b, 0))
            .unwrap();
        let err = net
            .connect(PortRef::Agent(a, 1), PortRef::iface("x"))
            .unwrap_err();
        assert!(matches!(err, NetError::AlreadyWired(_)));
    }

    #[test]
    fn dangling_ports_are_reported_and_repairable() {
        let kinds = stream_kinds();
        let mut net = Net::new(Arc::clone(&kinds));
        let num = kinds.lookup("num").unwrap();
        let a = net.add_agent(num, vec![Value::Int(1)]).unwrap();
        let violations = net.validate().unwrap_err();
        assert_eq!(violations.len(), 2);
        net.connect(PortRef::Agent(a, 0), PortRef::iface("h"))
            .unwrap();
        net.connect(PortRef::Agent(a, 1), PortRef::iface("t"))
            .unwrap();
        assert!(net.validate().is_ok());
    }

    #[test]
    fn mk_stream_counts() {
        // n cells plus one nil, n+1 spine wires (plus the nil wire)
        let net = list_net(&[1, 2, 3, 4]);
        assert_eq!(net.agent_count(), 5);
        assert_eq!(net.wire_count(), 5);
        assert!(net.validate().is_ok());
    }

    #[test]
    fn empty_stream_is_a_plain_edge() {
        let kinds = stream_kinds();
        let mut net = Net::new(Arc::clone(&kinds));
        let num = kinds.lookup("num").unwrap();
        net.mk_stream(
            num,
            &[],
            PortRef::iface("head"),
            StreamTail::Port(PortRef::iface("tail")),
        )
        .unwrap();
        assert_eq!(net.agent_count(), 0);
        assert_eq!(net.wire_count(), 1);
        assert_eq!(
            net.peer(&PortRef::iface("head")),
            Some(&PortRef::iface("tail"))
        );
    }

    #[test]
    fn isomorphic_is_insertion_order_independent() {
        let kinds = stream_kinds();
        let num = kinds.lookup("num").unwrap();
        let nil = kinds.lookup("nil").unwrap();

        let a = list_net(&[1]);

        // same singleton list, built back to front
        let mut b = Net::new(Arc::clone(&kinds));
        let n = b.add_agent(nil, vec![]).unwrap();
        let c = b.add_agent(num, vec![Value::Int(1)]).unwrap();
        b.connect(PortRef::Agent(c, 1), PortRef::Agent(n, 0)).unwrap();
        b.connect(PortRef::Agent(c, 0), PortRef::iface("out")).unwrap();

        assert!(isomorphic(&a, &b));
        assert!(isomorphic(&a, &a));
    }

    #[test]
    fn isomorphic_distinguishes_value_order() {
        // frozen from an exhaustive bijection check over the 3+3 agents:
        // no mapping preserves both values and wiring
        let a = list_net(&[1, 2]);
        let b = list_net(&[2, 1]);
        assert!(!isomorphic(&a, &b));
        assert!(brute_force_iso(&a, &b).is_none());
        assert!(brute_force_iso(&a, &list_net(&[1, 2])).is_some());
    }

    /// Independent oracle: enumerate every bijection (only usable on tiny
    /// nets) and check wiring/kind/value/interface preservation directly.
    fn brute_force_iso(a: &Net, b: &Net) -> Option<Vec<(AgentId, AgentId)>> {
        let ids_a: Vec<AgentId> = a.agents().map(|ag| ag.id).collect();
        let ids_b: Vec<AgentId> = b.agents().map(|ag| ag.id).collect();
        if ids_a.len() != ids_b.len() {
            return None;
        }
        let map_port = |p: &PortRef, perm: &HashMap<AgentId, AgentId>| match p {
            PortRef::Agent(id, q) => PortRef::Agent(perm[id], *q),
            PortRef::Iface(n) => PortRef::iface(n.clone()),
        };
        fn perms(items: &[AgentId]) -> Vec<Vec<AgentId>> {
            if items.is_empty() {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for (i, &x) in items.iter().enumerate() {
                let mut rest = items.to_vec();
                rest.remove(i);
                for mut tail in perms(&rest) {
                    tail.insert(0, x);
                    out.push(tail);
                }
            }
            out
        }
        for perm_vec in perms(&ids_b) {
            let perm: HashMap<AgentId, AgentId> =
                ids_a.iter().copied().zip(perm_vec.iter().copied()).collect();
            let kinds_ok = ids_a.iter().all(|id| {
                let x = a.agent(*id).unwrap();
                let y = b.agent(perm[id]).unwrap();
                a.kinds().get(x.kind).name == b.kinds().get(y.kind).name && x.values == y.values
            });
            if !kinds_ok {
                continue;
            }
            let mut wa: Vec<(PortRef, PortRef)> = a
                .wires()
                .iter()
                .map(|(p, q)| {
                    let (mp, mq) = (map_port(p, &perm), map_port(q, &perm));
                    if mp <= mq {
                        (mp, mq)
                    } else {
                        (mq, mp)
                    }
                })
                .collect();
            wa.sort();
            let mut wb = b.wires();
            wb.sort();
            if wa == wb {
                return Some(ids_a.iter().map(|&x| (x, perm[&x])).collect());
            }
        }
        None
    }
}
