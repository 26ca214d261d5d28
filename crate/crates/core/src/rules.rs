//! Guarded interaction rules. A rule matches an anchor agent whose
//! principal ports all face partner agents (principal-to-principal), checks
//! a guard over the matched value slots, and replaces the whole group by a
//! net template that exposes exactly the residual ports of the left side.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::net::{KindId, KindTable, Net, NetError, PortRef};
use crate::value::Value;

/// A partner pattern: the kind expected at one of the anchor's principal
/// ports. The partner faces the anchor with its first principal port; its
/// remaining ports are residuals.
#[derive(Debug, Clone)]
pub struct PartnerPat {
    pub kind: KindId,
    /// Binding names for the partner's value slots.
    pub bindings: Vec<String>,
    /// (port index, residual name) for every port except the facing one.
    pub residuals: Vec<(usize, String)>,
}

#[derive(Debug, Clone)]
pub struct RuleLhs {
    pub anchor: KindId,
    pub anchor_bindings: Vec<String>,
    /// (port index, residual name) for the anchor's non-principal ports.
    pub anchor_residuals: Vec<(usize, String)>,
    pub partners: Vec<PartnerPat>,
}

/// An endpoint inside a rule's replacement template.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TplPort {
    /// (template agent index, port index)
    Agent(usize, usize),
    /// A residual name carried over from the left side.
    Iface(String),
}

#[derive(Debug, Clone)]
pub struct TplAgent {
    pub kind: KindId,
    pub values: Vec<Expr>,
}

#[derive(Debug, Clone)]
pub struct RuleRhs {
    pub agents: Vec<TplAgent>,
    pub wires: Vec<(TplPort, TplPort)>,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub name: String,
    pub lhs: RuleLhs,
    pub guard: Expr,
    pub rhs: RuleRhs,
}

#[derive(Debug, Error, Clone)]
pub enum RuleError {
    #[error("rule `{rule}`: {source}")]
    Net {
        rule: String,
        #[source]
        source: NetError,
    },
    #[error("rule `{rule}`: partner count {got} does not match {expected} principal ports")]
    PartnerCount {
        rule: String,
        expected: usize,
        got: usize,
    },
    #[error("rule `{rule}`: binding `{name}` declared twice")]
    DuplicateBinding { rule: String, name: String },
    #[error("rule `{rule}`: binding count mismatch for `{kind}`: {got} names for {expected} value slots")]
    BindingArity {
        rule: String,
        kind: String,
        expected: usize,
        got: usize,
    },
    #[error("rule `{rule}`: interface mismatch: missing on RHS {missing:?}, extra on RHS {extra:?}, duplicated {duplicated:?}")]
    InterfaceMismatch {
        rule: String,
        missing: Vec<String>,
        extra: Vec<String>,
        duplicated: Vec<String>,
    },
    #[error("rule `{rule}`: residual ports malformed: {detail}")]
    BadResiduals { rule: String, detail: String },
    #[error("rule `{rule}`: template port {port:?} wired {count} times (must be exactly once)")]
    TemplateWiring {
        rule: String,
        port: String,
        count: usize,
    },
    #[error("rule `{rule}`: expression references `{name}` which is not a binding")]
    UnknownBinding { rule: String, name: String },
    #[error("rules `{a}` and `{b}` have overlapping guards{witness}")]
    OverlappingGuards {
        a: String,
        b: String,
        /// " at x=0, y=1" when a witness was found by enumeration, or
        /// " (syntactic overlap)" otherwise.
        witness: String,
    },
    #[error("rule `{rule}` at agents {agents:?}: {source}")]
    Eval {
        rule: String,
        agents: Vec<u64>,
        #[source]
        source: EvalError,
    },
}

/// Rules indexed by (anchor kind, partner kind tuple). Immutable once the
/// defining phase is over; freely shareable.
#[derive(Debug, Clone)]
pub struct RuleSet {
    kinds: Arc<KindTable>,
    rules: Vec<Rule>,
    index: HashMap<(KindId, Vec<KindId>), Vec<usize>>,
    anchors: HashSet<KindId>,
}

impl RuleSet {
    pub fn new(kinds: Arc<KindTable>) -> RuleSet {
        RuleSet {
            kinds,
            rules: Vec::new(),
            index: HashMap::new(),
            anchors: HashSet::new(),
        }
    }

    pub fn kinds(&self) -> &KindTable {
        &self.kinds
    }

    pub fn kinds_arc(&self) -> Arc<KindTable> {
        Arc::clone(&self.kinds)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, idx: usize) -> &Rule {
        &self.rules[idx]
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn is_anchor(&self, kind: KindId) -> bool {
        self.anchors.contains(&kind)
    }

    /// Guarded alternatives registered for this exact key, in definition
    /// order.
    pub fn alternatives(&self, anchor: KindId, partners: &[KindId]) -> &[usize] {
        self.index
            .get(&(anchor, partners.to_vec()))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// Validates and adds a rule: interface preservation, well-formed
    /// bindings, and guard disjointness against the alternatives already
    /// registered under the same key.
    pub fn define(&mut self, rule: Rule) -> Result<(), RuleError> {
        self.validate_rule(&rule)?;
        let key = (
            rule.lhs.anchor,
            rule.lhs.partners.iter().map(|p| p.kind).collect::<Vec<_>>(),
        );
        if let Some(existing) = self.index.get(&key) {
            for &idx in existing {
                let other = &self.rules[idx];
                if let Some(witness) =
                    guards_overlap(&rule.guard, &other.guard, &binding_names(&rule.lhs))
                {
                    return Err(RuleError::OverlappingGuards {
                        a: other.name.clone(),
                        b: rule.name.clone(),
                        witness,
                    });
                }
            }
        }
        let idx = self.rules.len();
        self.anchors.insert(rule.lhs.anchor);
        self.index.entry(key).or_default().push(idx);
        self.rules.push(rule);
        Ok(())
    }

    fn validate_rule(&self, rule: &Rule) -> Result<(), RuleError> {
        let name = &rule.name;
        let anchor_kind = self.kinds.get(rule.lhs.anchor);
        if rule.lhs.partners.len() != anchor_kind.principal_ports.len() {
            return Err(RuleError::PartnerCount {
                rule: name.clone(),
                expected: anchor_kind.principal_ports.len(),
                got: rule.lhs.partners.len(),
            });
        }

        // bindings: correct arity per side, globally distinct
        let mut bindings: HashSet<String> = HashSet::new();
        let mut check_bindings = |kind_name: &str, names: &[String], expected: usize| {
            if names.len() != expected {
                return Err(RuleError::BindingArity {
                    rule: name.clone(),
                    kind: kind_name.to_string(),
                    expected,
                    got: names.len(),
                });
            }
            for n in names {
                if !bindings.insert(n.clone()) {
                    return Err(RuleError::DuplicateBinding {
                        rule: name.clone(),
                        name: n.clone(),
                    });
                }
            }
            Ok(())
        };
        check_bindings(
            &anchor_kind.name,
            &rule.lhs.anchor_bindings,
            anchor_kind.value_arity,
        )?;
        for p in &rule.lhs.partners {
            let k = self.kinds.get(p.kind);
            check_bindings(&k.name, &p.bindings, k.value_arity)?;
        }
        let bindings: HashSet<String> = binding_names(&rule.lhs).into_iter().collect();

        // residual port sets must be exactly the non-facing ports
        let mut residual_names: Vec<String> = Vec::new();
        {
            let principal: BTreeSet<usize> = anchor_kind.principal_ports.iter().copied().collect();
            let declared: BTreeSet<usize> =
                rule.lhs.anchor_residuals.iter().map(|(p, _)| *p).collect();
            let expected: BTreeSet<usize> =
                (0..anchor_kind.arity).filter(|p| !principal.contains(p)).collect();
            if declared != expected || declared.len() != rule.lhs.anchor_residuals.len() {
                return Err(RuleError::BadResiduals {
                    rule: name.clone(),
                    detail: format!(
                        "anchor `{}` residuals {declared:?}, expected {expected:?}",
                        anchor_kind.name
                    ),
                });
            }
            residual_names.extend(rule.lhs.anchor_residuals.iter().map(|(_, n)| n.clone()));
        }
        for p in &rule.lhs.partners {
            let k = self.kinds.get(p.kind);
            let facing = k.first_principal();
            let declared: BTreeSet<usize> = p.residuals.iter().map(|(q, _)| *q).collect();
            let expected: BTreeSet<usize> = (0..k.arity).filter(|q| *q != facing).collect();
            if declared != expected || declared.len() != p.residuals.len() {
                return Err(RuleError::BadResiduals {
                    rule: name.clone(),
                    detail: format!(
                        "partner `{}` residuals {declared:?}, expected {expected:?}",
                        k.name
                    ),
                });
            }
            residual_names.extend(p.residuals.iter().map(|(_, n)| n.clone()));
        }
        {
            let unique: HashSet<&String> = residual_names.iter().collect();
            if unique.len() != residual_names.len() {
                return Err(RuleError::BadResiduals {
                    rule: name.clone(),
                    detail: "residual names are not distinct".to_string(),
                });
            }
        }

        // interface preservation: RHS iface names = residual names, each once
        let mut rhs_iface_counts: HashMap<String, usize> = HashMap::new();
        let mut port_counts: HashMap<TplPort, usize> = HashMap::new();
        for (a, b) in &rule.rhs.wires {
            for p in [a, b] {
                if let TplPort::Iface(n) = p {
                    *rhs_iface_counts.entry(n.clone()).or_default() += 1;
                }
                *port_counts.entry(p.clone()).or_default() += 1;
            }
        }
        let lhs_set: BTreeSet<&String> = residual_names.iter().collect();
        let rhs_set: BTreeSet<&String> = rhs_iface_counts.keys().collect();
        let missing: Vec<String> = lhs_set.difference(&rhs_set).map(|s| (*s).clone()).collect();
        let extra: Vec<String> = rhs_set.difference(&lhs_set).map(|s| (*s).clone()).collect();
        let duplicated: Vec<String> = rhs_iface_counts
            .iter()
            .filter(|(_, &c)| c > 1)
            .map(|(n, _)| n.clone())
            .collect();
        if !missing.is_empty() || !extra.is_empty() || !duplicated.is_empty() {
            let mut missing = missing;
            let mut extra = extra;
            let mut duplicated = duplicated;
            missing.sort();
            extra.sort();
            duplicated.sort();
            return Err(RuleError::InterfaceMismatch {
                rule: name.clone(),
                missing,
                extra,
                duplicated,
            });
        }

        // every template agent port wired exactly once
        for (idx, agent) in rule.rhs.agents.iter().enumerate() {
            let k = self.kinds.get(agent.kind);
            if agent.values.len() != k.value_arity {
                return Err(RuleError::BindingArity {
                    rule: name.clone(),
                    kind: k.name.clone(),
                    expected: k.value_arity,
                    got: agent.values.len(),
                });
            }
            for port in 0..k.arity {
                let count = port_counts
                    .get(&TplPort::Agent(idx, port))
                    .copied()
                    .unwrap_or(0);
                if count != 1 {
                    return Err(RuleError::TemplateWiring {
                        rule: name.clone(),
                        port: format!("{}[{idx}].{port}", k.name),
                        count,
                    });
                }
            }
        }
        for (port, count) in &port_counts {
            if let TplPort::Agent(idx, _) = port {
                if *idx >= rule.rhs.agents.len() {
                    return Err(RuleError::TemplateWiring {
                        rule: name.clone(),
                        port: format!("{port:?}"),
                        count: *count,
                    });
                }
            }
        }

        // guard and value expressions may reference bindings only
        for v in rule.guard.var_list() {
            if !bindings.contains(&v) {
                return Err(RuleError::UnknownBinding {
                    rule: name.clone(),
                    name: v,
                });
            }
        }
        for agent in &rule.rhs.agents {
            for e in &agent.values {
                for v in e.var_list() {
                    if !bindings.contains(&v) {
                        return Err(RuleError::UnknownBinding {
                            rule: name.clone(),
                            name: v,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

fn binding_names(lhs: &RuleLhs) -> Vec<String> {
    let mut names = lhs.anchor_bindings.clone();
    for p in &lhs.partners {
        names.extend(p.bindings.iter().cloned());
    }
    names
}

/// Disjointness by enumeration: candidate integer points are the compared
/// literals, their neighbours and zero; booleans take both truth values.
/// Returns a witness description when both guards hold somewhere. When the
/// grid would be too large, falls back to a syntactic identity check.
fn guards_overlap(a: &Expr, b: &Expr, bindings: &[String]) -> Option<String> {
    let mut lits = Vec::new();
    a.int_literals(&mut lits);
    b.int_literals(&mut lits);
    let mut points: Vec<i64> = vec![0];
    for l in lits {
        for p in [l.wrapping_sub(1), l, l.wrapping_add(1)] {
            if !points.contains(&p) {
                points.push(p);
            }
        }
    }
    points.sort_unstable();
    let mut candidates: Vec<Value> = points.into_iter().map(Value::Int).collect();
    candidates.push(Value::Bool(false));
    candidates.push(Value::Bool(true));

    let n = bindings.len();
    let total = (candidates.len() as f64).powi(n as i32);
    if total > 200_000.0 {
        // grid too large to enumerate; be conservative about the one case
        // we can still decide
        if a == b {
            return Some(" (syntactic overlap)".to_string());
        }
        return None;
    }

    let mut idx = vec![0usize; n];
    loop {
        let env: HashMap<String, Value> = bindings
            .iter()
            .enumerate()
            .map(|(i, name)| (name.clone(), candidates[idx[i]]))
            .collect();
        let sat = |g: &Expr| matches!(g.eval(&env), Ok(Value::Bool(true)));
        if sat(a) && sat(b) {
            let mut parts: Vec<String> = bindings
                .iter()
                .map(|name| format!("{name}={}", env[name]))
                .collect();
            parts.sort();
            let at = if parts.is_empty() {
                " (both guards are unconditional)".to_string()
            } else {
                format!(" at {}", parts.join(", "))
            };
            return Some(at);
        }
        // next grid point
        let mut i = 0;
        loop {
            if i == n {
                return None;
            }
            idx[i] += 1;
            if idx[i] < candidates.len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// A ruleset health report: kind pairs with no rule and guard families that
/// do not cover all value assignments found by enumeration.
#[derive(Debug, Clone, Default)]
pub struct RulesetReport {
    /// Unordered kind-name pairs with no rule in either orientation.
    pub missing_pairs: Vec<(String, String)>,
    /// (key description, witness assignment) for non-exhaustive families.
    pub nonexhaustive: Vec<(String, String)>,
}

impl RulesetReport {
    pub fn has_gap_for(&self, kind: &str) -> bool {
        self.missing_pairs
            .iter()
            .any(|(a, b)| a == kind || b == kind)
    }
}

/// Scans for (a) kind pairs that could form an active pair but have no
/// rule, and (b) guard families with uncovered value assignments.
pub fn check_ruleset(rs: &RuleSet) -> RulesetReport {
    let kinds = rs.kinds();
    let mut report = RulesetReport::default();

    let covered = |a: KindId, b: KindId| -> bool {
        rs.rules().iter().any(|r| {
            (r.lhs.anchor == a && r.lhs.partners.iter().any(|p| p.kind == b))
                || (r.lhs.anchor == b && r.lhs.partners.iter().any(|p| p.kind == a))
        })
    };
    let all: Vec<KindId> = kinds.iter().map(|(id, _)| id).collect();
    for (i, &a) in all.iter().enumerate() {
        for &b in &all[i..] {
            if !covered(a, b) {
                report
                    .missing_pairs
                    .push((kinds.get(a).name.clone(), kinds.get(b).name.clone()));
            }
        }
    }

    // exhaustiveness per key, by the same enumeration grid used for
    // disjointness
    let mut keys: Vec<(&(KindId, Vec<KindId>), &Vec<usize>)> = rs.index.iter().collect();
    keys.sort_by_key(|(k, _)| {
        let mut names = vec![kinds.get(k.0).name.clone()];
        names.extend(k.1.iter().map(|id| kinds.get(*id).name.clone()));
        names
    });
    for (key, alt_idxs) in keys {
        let guards: Vec<&Expr> = alt_idxs.iter().map(|&i| &rs.rules[i].guard).collect();
        if guards.iter().any(|g| matches!(g, Expr::Bool(true))) {
            continue;
        }
        let bindings = binding_names(&rs.rules[alt_idxs[0]].lhs);
        if let Some(witness) = find_uncovered(&guards, &bindings) {
            let desc = format!(
                "{}({})",
                kinds.get(key.0).name,
                key.1
                    .iter()
                    .map(|id| kinds.get(*id).name.clone())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            report.nonexhaustive.push((desc, witness));
        }
    }
    report
}

fn find_uncovered(guards: &[&Expr], bindings: &[String]) -> Option<String> {
    let mut lits = Vec::new();
    for g in guards {
        g.int_literals(&mut lits);
    }
    let mut points: Vec<i64> = vec![0];
    for l in lits {
        for p in [l.wrapping_sub(1), l, l.wrapping_add(1)] {
            if !points.contains(&p) {
                points.push(p);
            }
        }
    }
    points.sort_unstable();
    let mut candidates: Vec<Value> = points.into_iter().map(Value::Int).collect();
    candidates.push(Value::Bool(false));
    candidates.push(Value::Bool(true));

    let n = bindings.len();
    if (candidates.len() as f64).powi(n as i32) > 200_000.0 {
        return None;
    }
    let mut idx = vec![0usize; n];
    loop {
        let env: HashMap<String, Value> = bindings
            .iter()
            .enumerate()
            .map(|(i, name)| (name.clone(), candidates[idx[i]]))
            .collect();
        // skip grid points that type-error in every guard (wrong-typed
        // assignments are not reachable states)
        let evals: Vec<_> = guards.iter().map(|g| g.eval(&env)).collect();
        let any_well_typed = evals.iter().any(|r| r.is_ok());
        let any_sat = evals
            .iter()
            .any(|r| matches!(r, Ok(Value::Bool(true))));
        if any_well_typed && !any_sat {
            let mut parts: Vec<String> = bindings
                .iter()
                .map(|name| format!("{name}={}", env[name]))
                .collect();
            parts.sort();
            return Some(parts.join(", "));
        }
        let mut i = 0;
        loop {
            if i == n {
                return None;
            }
            idx[i] += 1;
            if idx[i] < candidates.len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Builds the replacement net for a rule under concrete bound values. The
/// result is a standalone net whose interface is the residual name set.
pub fn instantiate(
    rule: &Rule,
    kinds: &Arc<KindTable>,
    env: &HashMap<String, Value>,
) -> Result<Net, RuleError> {
    let mut net = Net::new(Arc::clone(kinds));
    let mut ids = Vec::with_capacity(rule.rhs.agents.len());
    for agent in &rule.rhs.agents {
        let values: Result<Vec<Value>, EvalError> =
            agent.values.iter().map(|e| e.eval(env)).collect();
        let values = values.map_err(|e| RuleError::Eval {
            rule: rule.name.clone(),
            agents: vec![],
            source: e,
        })?;
        let id = net.add_agent(agent.kind, values).map_err(|e| RuleError::Net {
            rule: rule.name.clone(),
            source: e,
        })?;
        ids.push(id);
    }
    for (a, b) in &rule.rhs.wires {
        let to_port = |p: &TplPort| match p {
            TplPort::Agent(idx, port) => PortRef::Agent(ids[*idx], *port),
            TplPort::Iface(name) => PortRef::iface(name.clone()),
        };
        net.connect(to_port(a), to_port(b)).map_err(|e| RuleError::Net {
            rule: rule.name.clone(),
            source: e,
        })?;
    }
    Ok(net)
}

/// Fluent construction of rules by kind name; resolution against the kind
/// table happens at `build` time.
pub struct RuleBuilder {
    name: String,
    anchor: Option<(String, Vec<String>, Vec<(usize, String)>)>,
    partners: Vec<(String, Vec<String>, Vec<(usize, String)>)>,
    guard: Expr,
    agents: Vec<(String, Vec<Expr>)>,
    wires: Vec<(TplPort, TplPort)>,
}

impl Rule {
    pub fn builder(name: impl Into<String>) -> RuleBuilder {
        RuleBuilder {
            name: name.into(),
            anchor: None,
            partners: Vec::new(),
            guard: Expr::Bool(true),
            agents: Vec::new(),
            wires: Vec::new(),
        }
    }
}

impl RuleBuilder {
    pub fn anchor(mut self, kind: &str, bindings: &[&str], residuals: &[(usize, &str)]) -> Self {
        self.anchor = Some((
            kind.to_string(),
            bindings.iter().map(|s| s.to_string()).collect(),
            residuals.iter().map(|(p, n)| (*p, n.to_string())).collect(),
        ));
        self
    }

    pub fn partner(mut self, kind: &str, bindings: &[&str], residuals: &[(usize, &str)]) -> Self {
        self.partners.push((
            kind.to_string(),
            bindings.iter().map(|s| s.to_string()).collect(),
            residuals.iter().map(|(p, n)| (*p, n.to_string())).collect(),
        ));
        self
    }

    pub fn guard(mut self, guard: Expr) -> Self {
        self.guard = guard;
        self
    }

    pub fn agent(mut self, kind: &str, values: Vec<Expr>) -> Self {
        self.agents.push((kind.to_string(), values));
        self
    }

    pub fn wire(mut self, a: TplPort, b: TplPort) -> Self {
        self.wires.push((a, b));
        self
    }

    pub fn build(self, kinds: &KindTable) -> Result<Rule, RuleError> {
        let name = self.name;
        let resolve = |k: &str| {
            kinds.require(k).map_err(|e| RuleError::Net {
                rule: name.clone(),
                source: e,
            })
        };
        let (anchor_name, anchor_bindings, anchor_residuals) =
            self.anchor.expect("rule has no anchor");
        let lhs = RuleLhs {
            anchor: resolve(&anchor_name)?,
            anchor_bindings,
            anchor_residuals,
            partners: self
                .partners
                .into_iter()
                .map(|(k, bindings, residuals)| {
                    Ok(PartnerPat {
                        kind: resolve(&k)?,
                        bindings,
                        residuals,
                    })
                })
                .collect::<Result<Vec<_>, RuleError>>()?,
        };
        let rhs = RuleRhs {
            agents: self
                .agents
                .into_iter()
                .map(|(k, values)| {
                    Ok(TplAgent {
                        kind: resolve(&k)?,
                        values,
                    })
                })
                .collect::<Result<Vec<_>, RuleError>>()?,
            wires: self.wires,
        };
        Ok(Rule {
            name,
            lhs,
            guard: self.guard,
            rhs,
        })
    }
}

/// Shorthand for template ports in rule definitions.
pub fn tpl(agent: usize, port: usize) -> TplPort {
    TplPort::Agent(agent, port)
}

pub fn res(name: &str) -> TplPort {
    TplPort::Iface(name.to_string())
}
