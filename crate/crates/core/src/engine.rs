//! Reduction: active-configuration detection, FIFO-fair firing, observer
//! taps, interaction counting and traces.
//!
//! Fairness means no redex created later fires before a still-valid older
//! one. Observation is done inside the formalism: an observer agent sits on
//! a free interface port, consumes stream cells one at a time and re-arms
//! itself on the tail. Observer firings are counted separately so that
//! interaction counts stay comparable with nets that carry no
//! instrumentation.

use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::net::{AgentId, AgentKind, KindId, Net, PortRef};
use crate::rules::{Rule, RuleSet, TplPort};
use crate::value::Value;

/// Name of the built-in observer kind; registered on demand.
pub const OBS_KIND: &str = "$obs";

/// An active configuration: an anchor whose principal ports all face the
/// first principal ports of the listed partners, under a registered key.
/// The rule alternative is resolved at fire time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Redex {
    pub anchor: AgentId,
    pub partners: Vec<AgentId>,
}

impl Redex {
    pub fn participants(&self) -> Vec<AgentId> {
        let mut v = vec![self.anchor];
        v.extend(&self.partners);
        v.sort();
        v
    }

    fn min_id(&self) -> AgentId {
        *self.participants().first().unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerMode {
    /// Fair deterministic order: oldest valid redex first.
    Fifo,
    /// Uniformly random valid redex each step; only for confluence and
    /// determinism testing.
    Seeded(u64),
}

#[derive(Debug, Clone)]
pub struct TapSpec {
    pub channel: String,
    pub limit: usize,
}

impl TapSpec {
    pub fn new(channel: impl Into<String>, limit: usize) -> TapSpec {
        TapSpec {
            channel: channel.into(),
            limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TapState {
    pub channel: String,
    pub captured: Vec<Value>,
    pub limit: usize,
}

impl TapState {
    pub fn is_full(&self) -> bool {
        self.captured.len() >= self.limit
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    NormalForm,
    BudgetExhausted,
    TapLimitsReached,
    /// An active configuration exists but no rule or no guard applies.
    Stuck(Vec<AgentId>),
    /// A value expression failed (division by zero).
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub index: u64,
    pub rule: String,
    pub anchor: AgentId,
    pub partners: Vec<AgentId>,
}

impl TraceEntry {
    /// One-line export form: `<index> <rule-name> <anchor-id> <partner-ids…>`.
    pub fn render(&self) -> String {
        let mut s = format!("{} {} {}", self.index, self.rule, self.anchor.0);
        for p in &self.partners {
            s.push_str(&format!(" {}", p.0));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub interactions: u64,
    pub observer_interactions: u64,
    pub status: RunStatus,
    pub taps: Vec<TapState>,
    pub trace: Option<Vec<TraceEntry>>,
}

impl RunReport {
    pub fn captured(&self, channel: &str) -> Option<&[Value]> {
        self.taps
            .iter()
            .find(|t| t.channel == channel)
            .map(|t| t.captured.as_slice())
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: SchedulerMode,
    pub budget: u64,
    pub taps: Vec<TapSpec>,
    pub trace: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            mode: SchedulerMode::Fifo,
            budget: 1_000_000,
            taps: Vec::new(),
            trace: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("tap channel `{0}` is not a free interface port of the net")]
    NoSuchChannel(String),
    #[error("net is not valid: {0} violation(s), first: {1}")]
    InvalidNet(usize, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum QItem {
    Rule(Redex),
    Obs { obs: AgentId, cell: AgentId },
}

impl QItem {
    fn min_id(&self) -> AgentId {
        match self {
            QItem::Rule(r) => r.min_id(),
            QItem::Obs { obs, cell } => *obs.min(cell),
        }
    }

    /// Batch ordering: rule redexes ahead of observations (so a value is
    /// recorded only once the interactions that produced it are counted),
    /// then by smallest participant id.
    fn order_key(&self) -> (bool, AgentId) {
        (matches!(self, QItem::Obs { .. }), self.min_id())
    }

    fn key(&self) -> Vec<AgentId> {
        match self {
            QItem::Rule(r) => r.participants(),
            QItem::Obs { obs, cell } => {
                let mut v = vec![*obs, *cell];
                v.sort();
                v
            }
        }
    }
}

/// Lists every active configuration of the net under the given rules,
/// ordered by smallest participating agent id.
pub fn find_redexes(net: &Net, rules: &RuleSet) -> Vec<Redex> {
    let mut out = Vec::new();
    let mut seen: HashSet<Vec<AgentId>> = HashSet::new();
    for agent in net.agents() {
        if let Some(redex) = detect_anchor(net, rules, agent.id) {
            if seen.insert(redex.participants()) {
                out.push(redex);
            }
        }
    }
    out.sort_by_key(|r| (r.min_id(), r.anchor));
    out
}

/// Checks whether `id` anchors a registered rule key right now.
fn detect_anchor(net: &Net, rules: &RuleSet, id: AgentId) -> Option<Redex> {
    let agent = net.agent(id)?;
    if !rules.is_anchor(agent.kind) {
        return None;
    }
    let kind = net.kinds().get(agent.kind);
    let mut partners = Vec::with_capacity(kind.principal_ports.len());
    let mut partner_kinds = Vec::with_capacity(kind.principal_ports.len());
    for &pp in &kind.principal_ports {
        let peer = net.peer(&PortRef::Agent(id, pp))?;
        let (pid, pport) = match peer {
            PortRef::Agent(pid, pport) => (*pid, *pport),
            PortRef::Iface(_) => return None,
        };
        let pagent = net.agent(pid)?;
        let pkind = net.kinds().get(pagent.kind);
        if pport != pkind.first_principal() {
            return None;
        }
        partners.push(pid);
        partner_kinds.push(pagent.kind);
    }
    if rules.alternatives(agent.kind, &partner_kinds).is_empty() {
        return None;
    }
    Some(Redex {
        anchor: id,
        partners,
    })
}

/// Is this agent fully engaged (every principal port facing a peer's first
/// principal port) but covered by no rule? Observer participants are
/// exempt: an observer facing a non-cell just means observation ended.
fn detect_stuck(net: &Net, rules: &RuleSet, id: AgentId, obs_kind: Option<KindId>) -> bool {
    let Some(agent) = net.agent(id) else {
        return false;
    };
    if Some(agent.kind) == obs_kind {
        return false;
    }
    let kind = net.kinds().get(agent.kind);
    let mut partner_kinds = Vec::new();
    for &pp in &kind.principal_ports {
        let Some(PortRef::Agent(pid, pport)) = net.peer(&PortRef::Agent(id, pp)) else {
            return false;
        };
        let pagent = net.agent(*pid).unwrap();
        if Some(pagent.kind) == obs_kind {
            return false;
        }
        let pkind = net.kinds().get(pagent.kind);
        if *pport != pkind.first_principal() {
            return false;
        }
        partner_kinds.push(pagent.kind);
    }
    // covered as anchor?
    if !rules.alternatives(agent.kind, &partner_kinds).is_empty() {
        return false;
    }
    // covered as a partner of some peer's anchored rule?
    for &pp in &kind.principal_ports {
        if let Some(PortRef::Agent(pid, _)) = net.peer(&PortRef::Agent(id, pp)) {
            if detect_anchor(net, rules, *pid).is_some() {
                return false;
            }
        }
    }
    true
}

/// Does this kind look like a stream cell the observer can consume?
/// (arity 2, one value slot, principal port 0 facing the consumer)
fn is_stream_cell(kind: &AgentKind) -> bool {
    kind.arity == 2 && kind.value_arity == 1 && kind.principal_ports == [0]
}

pub enum StepOutcome {
    Fired(TraceEntry),
    Observed { channel: String, value: Value },
    NoRedex,
    Stuck(Vec<AgentId>),
    Aborted(String),
}

/// A reduction in progress: the net, the rule set and the scheduler state.
pub struct Machine {
    net: Net,
    rules: Arc<RuleSet>,
    obs_kind: Option<KindId>,
    /// tap index per observer agent, parallel to `taps`
    observers: Vec<AgentId>,
    taps: Vec<TapState>,
    queue: VecDeque<QItem>,
    queued: HashSet<Vec<AgentId>>,
    interactions: u64,
    observer_interactions: u64,
    trace: Option<Vec<TraceEntry>>,
    rng: Option<ChaCha8Rng>,
}

impl Machine {
    pub fn new(net: Net, rules: Arc<RuleSet>, options: &RunOptions) -> Result<Machine, EngineError> {
        if let Err(violations) = net.validate() {
            return Err(EngineError::InvalidNet(
                violations.len(),
                format!("{} ({})", violations[0].port, violations[0].problem),
            ));
        }
        let mut machine = Machine {
            net,
            rules,
            obs_kind: None,
            observers: Vec::new(),
            taps: Vec::new(),
            queue: VecDeque::new(),
            queued: HashSet::new(),
            interactions: 0,
            observer_interactions: 0,
            trace: if options.trace { Some(Vec::new()) } else { None },
            rng: match options.mode {
                SchedulerMode::Fifo => None,
                SchedulerMode::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            },
        };
        machine.attach_taps(&options.taps)?;
        machine.initial_scan();
        Ok(machine)
    }

    pub fn net(&self) -> &Net {
        &self.net
    }

    pub fn into_net(self) -> Net {
        self.net
    }

    pub fn interactions(&self) -> u64 {
        self.interactions
    }

    pub fn taps(&self) -> &[TapState] {
        &self.taps
    }

    fn ensure_obs_kind(&mut self) -> KindId {
        if let Some(id) = self.obs_kind {
            return id;
        }
        if let Some(id) = self.net.kinds().lookup(OBS_KIND) {
            self.obs_kind = Some(id);
            return id;
        }
        let mut extended = self.net.kinds().clone();
        let id = extended
            .register(AgentKind::new(OBS_KIND, 1, vec![0], 0))
            .expect("observer kind registration");
        self.net.set_kinds(Arc::new(extended));
        self.obs_kind = Some(id);
        id
    }

    fn attach_taps(&mut self, taps: &[TapSpec]) -> Result<(), EngineError> {
        for spec in taps {
            let kind = self.ensure_obs_kind();
            let iface = PortRef::iface(spec.channel.clone());
            if self.net.peer(&iface).is_none() {
                return Err(EngineError::NoSuchChannel(spec.channel.clone()));
            }
            let peer = self.net.disconnect(&iface).unwrap();
            let obs = self.net.add_agent(kind, vec![]).unwrap();
            self.net.connect(PortRef::Agent(obs, 0), peer).unwrap();
            self.observers.push(obs);
            self.taps.push(TapState {
                channel: spec.channel.clone(),
                captured: Vec::new(),
                limit: spec.limit,
            });
        }
        Ok(())
    }

    fn initial_scan(&mut self) {
        let mut items: Vec<QItem> = find_redexes(&self.net, &self.rules)
            .into_iter()
            .map(QItem::Rule)
            .collect();
        for (i, &obs) in self.observers.iter().enumerate() {
            if let Some(item) = self.detect_obs(i, obs) {
                items.push(item);
            }
        }
        items.sort_by_key(|i| i.order_key());
        for item in items {
            self.enqueue(item);
        }
    }

    fn detect_obs(&self, tap_idx: usize, obs: AgentId) -> Option<QItem> {
        if self.taps[tap_idx].is_full() {
            return None;
        }
        let peer = self.net.peer(&PortRef::Agent(obs, 0))?;
        let (cell, port) = match peer {
            PortRef::Agent(id, port) => (*id, *port),
            PortRef::Iface(_) => return None,
        };
        let cell_kind = self.net.kind_of(cell)?;
        if port == 0 && is_stream_cell(cell_kind) {
            Some(QItem::Obs { obs, cell })
        } else {
            None
        }
    }

    fn enqueue(&mut self, item: QItem) {
        if self.queued.insert(item.key()) {
            self.queue.push_back(item);
        }
    }

    fn item_valid(&self, item: &QItem) -> bool {
        match item {
            QItem::Rule(redex) => match detect_anchor(&self.net, &self.rules, redex.anchor) {
                Some(found) => found == *redex,
                None => false,
            },
            QItem::Obs { obs, cell: _ } => {
                let idx = self.observers.iter().position(|o| o == obs);
                match idx {
                    Some(i) => self.detect_obs(i, *obs) == Some(item.clone()),
                    None => false,
                }
            }
        }
    }

    /// Pops the oldest still-valid item; stale entries (agents consumed by
    /// earlier firings) are discarded lazily.
    fn next_fifo(&mut self) -> Option<QItem> {
        while let Some(item) = self.queue.pop_front() {
            self.queued.remove(&item.key());
            if self.item_valid(&item) {
                return Some(item);
            }
        }
        None
    }

    fn all_current_items(&self) -> Vec<QItem> {
        let mut items: Vec<QItem> = find_redexes(&self.net, &self.rules)
            .into_iter()
            .map(QItem::Rule)
            .collect();
        for (i, &obs) in self.observers.iter().enumerate() {
            if let Some(item) = self.detect_obs(i, obs) {
                items.push(item);
            }
        }
        items.sort_by_key(|i| i.order_key());
        items
    }

    fn next_random(&mut self) -> Option<QItem> {
        let items = self.all_current_items();
        if items.is_empty() {
            return None;
        }
        let rng = self.rng.as_mut().expect("seeded mode");
        let i = rng.gen_range(0..items.len());
        Some(items[i].clone())
    }

    /// Fires one chosen active configuration, bypassing the scheduler.
    /// Exists for local-confluence checks, where the point is comparing
    /// different firing orders from the same net.
    pub fn fire_redex(&mut self, redex: Redex) -> StepOutcome {
        self.fire(redex)
    }

    /// Performs one interaction (or one observation). `NoRedex` means the
    /// queue ran dry and a full scan confirmed there is nothing to fire.
    pub fn step(&mut self) -> StepOutcome {
        let item = if self.rng.is_some() {
            self.next_random()
        } else {
            self.next_fifo()
        };
        let Some(item) = item else {
            // The queue guards against missed enqueues with a full rescan.
            let items = self.all_current_items();
            if !items.is_empty() {
                for item in items {
                    self.enqueue(item);
                }
                return self.step();
            }
            let obs_kind = self.obs_kind;
            let stuck: Vec<AgentId> = self
                .net
                .agents()
                .map(|a| a.id)
                .filter(|&id| detect_stuck(&self.net, &self.rules, id, obs_kind))
                .collect();
            if stuck.is_empty() {
                return StepOutcome::NoRedex;
            }
            return StepOutcome::Stuck(stuck);
        };
        match item {
            QItem::Rule(redex) => self.fire(redex),
            QItem::Obs { obs, cell } => self.observe(obs, cell),
        }
    }

    fn observe(&mut self, obs: AgentId, cell: AgentId) -> StepOutcome {
        let tap_idx = self.observers.iter().position(|o| *o == obs).unwrap();
        let value = self.net.agent(cell).unwrap().values[0];
        let tail_peer = self.net.peer(&PortRef::Agent(cell, 1)).cloned();
        self.net.remove_agent(cell).unwrap();
        if let Some(tail_peer) = tail_peer {
            self.net
                .connect(PortRef::Agent(obs, 0), tail_peer)
                .expect("observer re-arm");
        }
        self.taps[tap_idx].captured.push(value);
        self.observer_interactions += 1;
        if let Some(next) = self.detect_obs(tap_idx, obs) {
            self.enqueue(next);
        }
        StepOutcome::Observed {
            channel: self.taps[tap_idx].channel.clone(),
            value,
        }
    }

    fn fire(&mut self, redex: Redex) -> StepOutcome {
        // resolve the alternative: bind values, evaluate guards
        let anchor_agent = self.net.agent(redex.anchor).unwrap().clone();
        let partner_kinds: Vec<KindId> = redex
            .partners
            .iter()
            .map(|&p| self.net.agent(p).unwrap().kind)
            .collect();
        let alts: Vec<usize> = self
            .rules
            .alternatives(anchor_agent.kind, &partner_kinds)
            .to_vec();
        let mut chosen: Option<(usize, std::collections::HashMap<String, Value>)> = None;
        for idx in alts {
            let rule = self.rules.rule(idx);
            let mut env = std::collections::HashMap::new();
            for (name, v) in rule.lhs.anchor_bindings.iter().zip(&anchor_agent.values) {
                env.insert(name.clone(), *v);
            }
            for (pat, &pid) in rule.lhs.partners.iter().zip(&redex.partners) {
                let pagent = self.net.agent(pid).unwrap();
                for (name, v) in pat.bindings.iter().zip(&pagent.values) {
                    env.insert(name.clone(), *v);
                }
            }
            match rule.guard.eval(&env) {
                Ok(Value::Bool(true)) => {
                    chosen = Some((idx, env));
                    break;
                }
                Ok(Value::Bool(false)) => {}
                Ok(_) | Err(_) => {
                    return StepOutcome::Aborted(format!(
                        "guard of rule `{}` failed to evaluate at {:?}",
                        rule.name,
                        redex.participants()
                    ));
                }
            }
        }
        let Some((rule_idx, env)) = chosen else {
            return StepOutcome::Stuck(redex.participants());
        };
        let rules = Arc::clone(&self.rules);
        let rule = rules.rule(rule_idx);
        match self.splice(rule, &redex, &env) {
            Ok(()) => {
                self.interactions += 1;
                let entry = TraceEntry {
                    index: self.interactions,
                    rule: rule.name.clone(),
                    anchor: redex.anchor,
                    partners: redex.partners.clone(),
                };
                if let Some(trace) = &mut self.trace {
                    trace.push(entry.clone());
                }
                StepOutcome::Fired(entry)
            }
            Err(msg) => StepOutcome::Aborted(msg),
        }
    }

    /// Replaces the redex agents by the rule's instantiated template,
    /// reconnecting residual ports by name. Residual ports wired to each
    /// other inside the redex, and template wires joining two residual
    /// names, are handled by contracting name chains.
    fn splice(
        &mut self,
        rule: &Rule,
        redex: &Redex,
        env: &std::collections::HashMap<String, Value>,
    ) -> Result<(), String> {
        #[derive(Clone, PartialEq, Eq, Hash, Debug)]
        enum Node {
            Term(PortRef),
            Name(String),
        }

        // residual name -> lhs port, and the reverse for self-wire lookup
        let mut lhs_port_of: Vec<(String, PortRef)> = Vec::new();
        for (port, name) in &rule.lhs.anchor_residuals {
            lhs_port_of.push((name.clone(), PortRef::Agent(redex.anchor, *port)));
        }
        for (pat, &pid) in rule.lhs.partners.iter().zip(&redex.partners) {
            for (port, name) in &pat.residuals {
                lhs_port_of.push((name.clone(), PortRef::Agent(pid, *port)));
            }
        }
        let name_of_lhs_port: std::collections::HashMap<PortRef, String> = lhs_port_of
            .iter()
            .map(|(n, p)| (p.clone(), n.clone()))
            .collect();

        // edges incident to each residual name (exactly two per name)
        let mut edges: std::collections::HashMap<String, Vec<Node>> =
            std::collections::HashMap::new();
        let add_edge = |a: Node, b: Node, edges: &mut std::collections::HashMap<String, Vec<Node>>| {
            if let Node::Name(n) = &a {
                edges.entry(n.clone()).or_default().push(b.clone());
            }
            if let Node::Name(n) = &b {
                edges.entry(n.clone()).or_default().push(a);
            }
        };

        // LHS side: each residual's outside peer
        let mut seen_internal: HashSet<(String, String)> = HashSet::new();
        for (name, port) in &lhs_port_of {
            let peer = self
                .net
                .peer(port)
                .cloned()
                .ok_or_else(|| format!("residual port {port} of rule `{}` not wired", rule.name))?;
            if let Some(other) = name_of_lhs_port.get(&peer) {
                // two residual ports wired to each other inside the redex
                let key = if name < other {
                    (name.clone(), other.clone())
                } else {
                    (other.clone(), name.clone())
                };
                if seen_internal.insert(key) {
                    add_edge(Node::Name(name.clone()), Node::Name(other.clone()), &mut edges);
                }
            } else {
                add_edge(Node::Name(name.clone()), Node::Term(peer), &mut edges);
            }
        }

        // consume the redex
        self.net.remove_agent(redex.anchor).map_err(|e| e.to_string())?;
        for &p in &redex.partners {
            self.net.remove_agent(p).map_err(|e| e.to_string())?;
        }

        // instantiate template agents
        let mut fresh: Vec<AgentId> = Vec::with_capacity(rule.rhs.agents.len());
        for agent in &rule.rhs.agents {
            let mut values = Vec::with_capacity(agent.values.len());
            for e in &agent.values {
                let v = e.eval(env).map_err(|err| {
                    format!(
                        "rule `{}` at agents {:?}: {err}",
                        rule.name,
                        redex.participants()
                    )
                })?;
                values.push(v);
            }
            let id = self
                .net
                .add_agent(agent.kind, values)
                .map_err(|e| e.to_string())?;
            fresh.push(id);
        }

        let mut touched: Vec<AgentId> = fresh.clone();

        // template wires: agent-agent connect now, name-bearing become edges
        for (a, b) in &rule.rhs.wires {
            let to_node = |p: &TplPort| match p {
                TplPort::Agent(idx, port) => Node::Term(PortRef::Agent(fresh[*idx], *port)),
                TplPort::Iface(name) => Node::Name(name.clone()),
            };
            match (to_node(a), to_node(b)) {
                (Node::Term(pa), Node::Term(pb)) => {
                    self.net.connect(pa, pb).map_err(|e| e.to_string())?;
                }
                (a, b) => add_edge(a, b, &mut edges),
            }
        }

        // contract name chains into direct wires
        let mut visited: HashSet<String> = HashSet::new();
        let mut names: Vec<&String> = edges.keys().collect();
        names.sort();
        for name in names {
            if visited.contains(name.as_str()) {
                continue;
            }
            let incident = &edges[name];
            debug_assert_eq!(incident.len(), 2, "residual `{name}` in rule `{}`", rule.name);
            // walk outward in both directions until terminals (or a loop)
            let mut endpoints: Vec<PortRef> = Vec::new();
            let mut looped = false;
            visited.insert(name.clone());
            for start in incident.clone() {
                let mut prev = Node::Name(name.clone());
                let mut cur = start;
                loop {
                    match cur {
                        Node::Term(p) => {
                            endpoints.push(p);
                            break;
                        }
                        Node::Name(n) => {
                            if n == *name {
                                looped = true;
                                break;
                            }
                            visited.insert(n.clone());
                            let next = edges[&n]
                                .iter()
                                .find(|x| **x != prev)
                                .cloned()
                                .unwrap_or_else(|| edges[&n][0].clone());
                            prev = Node::Name(n);
                            cur = next;
                        }
                    }
                }
                if looped {
                    break;
                }
            }
            if looped {
                // a closed loop of wires with no agent on it: nothing to keep
                continue;
            }
            debug_assert_eq!(endpoints.len(), 2);
            let (a, b) = (endpoints[0].clone(), endpoints[1].clone());
            for p in [&a, &b] {
                if let PortRef::Agent(id, _) = p {
                    touched.push(*id);
                }
            }
            self.net.connect(a, b).map_err(|e| e.to_string())?;
        }

        // look for redexes created by the splice
        let mut candidates: Vec<AgentId> = Vec::new();
        for &id in &touched {
            candidates.push(id);
            if let Some(agent) = self.net.agent(id) {
                let arity = self.net.kinds().get(agent.kind).arity;
                for port in 0..arity {
                    if let Some(PortRef::Agent(peer, _)) = self.net.peer(&PortRef::Agent(id, port))
                    {
                        candidates.push(*peer);
                    }
                }
            }
        }
        candidates.sort();
        candidates.dedup();
        let mut new_items: Vec<QItem> = Vec::new();
        for id in candidates {
            if let Some(r) = detect_anchor(&self.net, &self.rules, id) {
                new_items.push(QItem::Rule(r));
            }
            // a touched stream cell may now face an observer
            for (i, &obs) in self.observers.iter().enumerate() {
                if let Some(PortRef::Agent(peer, _)) = self.net.peer(&PortRef::Agent(obs, 0)) {
                    if *peer == id {
                        if let Some(item) = self.detect_obs(i, obs) {
                            new_items.push(item);
                        }
                    }
                }
            }
        }
        new_items.sort_by_key(|i| i.order_key());
        new_items.dedup();
        for item in new_items {
            self.enqueue(item);
        }
        Ok(())
    }

    /// Reduces until normal form, exhausted budget, filled taps, a stuck
    /// pair or an abort. The budget counts rule interactions only.
    pub fn run(&mut self, budget: u64) -> RunReport {
        let status = loop {
            if !self.taps.is_empty() && self.taps.iter().all(|t| t.is_full()) {
                break RunStatus::TapLimitsReached;
            }
            if self.interactions >= budget {
                break RunStatus::BudgetExhausted;
            }
            match self.step() {
                StepOutcome::Fired(_) | StepOutcome::Observed { .. } => {}
                StepOutcome::NoRedex => break RunStatus::NormalForm,
                StepOutcome::Stuck(ids) => break RunStatus::Stuck(ids),
                StepOutcome::Aborted(msg) => break RunStatus::Aborted(msg),
            }
        };
        RunReport {
            interactions: self.interactions,
            observer_interactions: self.observer_interactions,
            status,
            taps: self.taps.clone(),
            trace: self.trace.clone(),
        }
    }
}

/// One-shot reduction with the default FIFO scheduler.
pub fn run(
    net: Net,
    rules: Arc<RuleSet>,
    options: RunOptions,
) -> Result<(RunReport, Net), EngineError> {
    let budget = options.budget;
    let mut machine = Machine::new(net, rules, &options)?;
    let report = machine.run(budget);
    Ok((report, machine.into_net()))
}

/// Like [`run`] but with a uniformly random scheduler; observations must
/// not depend on the seed (one-step confluence).
pub fn run_seeded(
    net: Net,
    rules: Arc<RuleSet>,
    seed: u64,
    budget: u64,
    taps: Vec<TapSpec>,
) -> Result<(RunReport, Net), EngineError> {
    run(
        net,
        rules,
        RunOptions {
            mode: SchedulerMode::Seeded(seed),
            budget,
            taps,
            trace: false,
        },
    )
}
