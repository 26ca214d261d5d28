//! Compilation of process networks to interaction nets.
//!
//! Each process becomes a family of agent kinds, one per *wait state*: a
//! pair of (the wait the process is blocked on, the values of its control
//! booleans). Control booleans are the bool variables whose value is a
//! compile-time constant at every wait; they select the state, so they cost
//! no value slot. Everything else is data and travels in the agent's value
//! tuple, trimmed per state to the variables that are actually live.
//!
//! A channel is a consumer-facing stream of `num` cells: the cell holding
//! the oldest value points its principal port at the reader (or at a free
//! interface port named after the channel, for outputs). A blocked process
//! points its principal port at that stream head, so a queued value is
//! exactly an active pair and an empty queue is exactly a blocked wait. One
//! interaction consumes the head cell, runs the straight-line code up to
//! the next wait — every send splices fresh cells into the writer-side end
//! of the target stream — and leaves the successor-state agent behind.
//! Branches whose condition is not decided by control booleans become
//! guarded rule alternatives, disjoint and exhaustive by construction.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{BinOp, Expr};
use crate::kpn::ast::{NetworkDecl, ProcessDecl, Stmt};
use crate::kpn::flat::{flatten, Instr};
use crate::kpn::interp::const_value;
use crate::kpn::validate::{entry_assigned, validate_network, Diagnostic};
use crate::net::{AgentKind, KindTable, Net, NetError, PortRef, StreamTail};
use crate::rules::{res, tpl, Rule, RuleError, RuleSet};
use crate::value::Value;

/// The binding name a rule gives to the value read from the stream head.
/// `$` keeps it out of the surface language's identifier space.
const IN_BINDING: &str = "$in";

/// Upper bound on wait states per process; networks are tiny and a blowup
/// here means a control variable failed to stay constant.
const MAX_STATES: usize = 64;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("invalid network:\n{}", fmt_diags(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("process {process}: more than {MAX_STATES} wait states")]
    TooManyStates { process: String },
    #[error("process {process}: {message}")]
    Eval { process: String, message: String },
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Net(#[from] NetError),
}

fn fmt_diags(ds: &[Diagnostic]) -> String {
    ds.iter()
        .map(|d| format!("  {d}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// A compiled network: an interaction system plus the initial net, ready
/// for the engine. Output channels appear as free interface ports named
/// after the channel; tap those to observe the network.
#[derive(Debug)]
pub struct CompiledSystem {
    pub name: String,
    pub kinds: Arc<KindTable>,
    pub rules: Arc<RuleSet>,
    pub net: Net,
    /// Output channel names, in declaration order.
    pub outputs: Vec<String>,
}

/// One wait state of a process.
struct State {
    /// Instruction index of the wait this state blocks on.
    pc: usize,
    /// Values of the control booleans at this wait.
    valuation: BTreeMap<String, Value>,
    /// The channel waited on and the variable receiving the value.
    chan: String,
    var: String,
}

/// One guarded transition out of a wait state.
struct Transition {
    guard: Expr,
    /// Sends in program order, as expressions over the source state's live
    /// variables and [`IN_BINDING`].
    sends: Vec<(String, Expr)>,
    target: usize,
    /// The symbolic environment at the target wait.
    updates: BTreeMap<String, Expr>,
}

struct Automaton {
    states: Vec<State>,
    transitions: Vec<Vec<Transition>>,
    /// Live variables per state, sorted; these are the value slots.
    live: Vec<Vec<String>>,
    init_state: usize,
    /// Concrete variable values when the process first blocks.
    init_env: HashMap<String, Value>,
    /// Sends executed before the first wait, beyond the prelude.
    init_sends: Vec<(String, Value)>,
}

enum Stop {
    Demote(String),
    Fail(CompileError),
}

impl From<CompileError> for Stop {
    fn from(e: CompileError) -> Stop {
        Stop::Fail(e)
    }
}

pub fn compile(d: &NetworkDecl) -> Result<CompiledSystem, CompileError> {
    validate_network(d).map_err(CompileError::Invalid)?;
    if let Some(p) = d.processes.iter().find(|p| p.name == "num") {
        return Err(CompileError::Invalid(vec![Diagnostic {
            message: format!(
                "process {} collides with the reserved stream cell kind",
                p.name
            ),
        }]));
    }

    let autos: Vec<Automaton> = d
        .processes
        .iter()
        .map(build_automaton)
        .collect::<Result<_, _>>()?;

    // kind table: the stream cell, then one kind per wait state
    let mut kt = KindTable::new();
    kt.register(AgentKind::new("num", 2, vec![0], 1))?;
    let mut kind_names: Vec<Vec<String>> = Vec::new();
    for (p, a) in d.processes.iter().zip(&autos) {
        let arity = p.reads.len() + p.writes.len();
        let mut names = Vec::new();
        for (i, st) in a.states.iter().enumerate() {
            let name = if a.states.len() == 1 {
                p.name.clone()
            } else {
                format!("{}.{}", p.name, i)
            };
            let principal = read_port(p, &st.chan);
            kt.register(AgentKind::new(
                name.clone(),
                arity,
                vec![principal],
                a.live[i].len(),
            ))?;
            names.push(name);
        }
        kind_names.push(names);
    }
    let kinds = Arc::new(kt);

    let mut rules = RuleSet::new(Arc::clone(&kinds));
    for ((p, a), names) in d.processes.iter().zip(&autos).zip(&kind_names) {
        for (i, st) in a.states.iter().enumerate() {
            for (j, t) in a.transitions[i].iter().enumerate() {
                let rule = build_rule(p, a, names, i, st, j, t, &kinds)?;
                rules.define(rule)?;
            }
        }
    }
    let rules = Arc::new(rules);

    // the initial net: one agent per process, channels as token streams
    let mut net = Net::new(Arc::clone(&kinds));
    let mut agent_of: HashMap<&str, crate::net::AgentId> = HashMap::new();
    for ((p, a), names) in d.processes.iter().zip(&autos).zip(&kind_names) {
        let values: Vec<Value> = a.live[a.init_state]
            .iter()
            .map(|v| {
                a.init_env.get(v).copied().ok_or_else(|| CompileError::Eval {
                    process: p.name.clone(),
                    message: format!("initial value of {v} is not known at compile time"),
                })
            })
            .collect::<Result<_, _>>()?;
        let id = net.add_agent_by_name(&names[a.init_state], values)?;
        agent_of.insert(p.name.as_str(), id);
    }

    let num = kinds.require("num")?;
    for chan in &d.channels {
        let consumer = match d.reader_of(chan) {
            Some(p) => PortRef::Agent(agent_of[p.name.as_str()], read_port(p, chan)),
            None => PortRef::iface(chan.clone()),
        };
        let producer = match d.writer_of(chan) {
            Some(p) => PortRef::Agent(agent_of[p.name.as_str()], write_port(p, chan)),
            None => PortRef::iface(format!("{chan}.in")),
        };
        let mut tokens: Vec<Value> = d.inits.get(chan).cloned().unwrap_or_default();
        if let Some(w) = d.writer_of(chan) {
            for s in &w.prelude {
                if let Stmt::Send { expr, chan: c, .. } = s {
                    if c == chan {
                        // the validator already restricted preludes to
                        // constant sends
                        tokens.push(const_value(expr).expect("constant prelude send"));
                    }
                }
            }
            let a = &autos[d.processes.iter().position(|p| p.name == w.name).unwrap()];
            tokens.extend(
                a.init_sends
                    .iter()
                    .filter(|(c, _)| c == chan)
                    .map(|(_, v)| *v),
            );
        }
        net.mk_stream(num, &tokens, consumer, StreamTail::Port(producer))?;
    }

    Ok(CompiledSystem {
        name: d.name.clone(),
        kinds,
        rules,
        net,
        outputs: d.outputs.clone(),
    })
}

/// Port layout of a process kind: read ports in `reads` order, then write
/// ports in `writes` order. A channel both read and written gets two ports.
fn read_port(p: &ProcessDecl, chan: &str) -> usize {
    p.reads.iter().position(|c| c == chan).unwrap()
}

fn write_port(p: &ProcessDecl, chan: &str) -> usize {
    p.reads.len() + p.writes.iter().position(|c| c == chan).unwrap()
}

#[allow(clippy::too_many_arguments)]
fn build_rule(
    p: &ProcessDecl,
    a: &Automaton,
    names: &[String],
    i: usize,
    st: &State,
    j: usize,
    t: &Transition,
    kinds: &KindTable,
) -> Result<Rule, CompileError> {
    let name = if a.transitions[i].len() == 1 {
        format!("{}~num", names[i])
    } else {
        format!("{}~num~{j}", names[i])
    };
    let principal = read_port(p, &st.chan);

    let bindings: Vec<&str> = a.live[i].iter().map(|s| s.as_str()).collect();
    let mut residuals: Vec<(usize, String)> = Vec::new();
    for c in &p.reads {
        let q = read_port(p, c);
        if q != principal {
            residuals.push((q, format!("r_{c}")));
        }
    }
    for c in &p.writes {
        residuals.push((write_port(p, c), format!("w_{c}")));
    }
    let residual_refs: Vec<(usize, &str)> =
        residuals.iter().map(|(q, n)| (*q, n.as_str())).collect();

    let successor_values: Vec<Expr> = a.live[t.target]
        .iter()
        .map(|v| {
            t.updates
                .get(v)
                .cloned()
                .unwrap_or_else(|| Expr::var(v.clone()))
        })
        .collect();

    let mut b = Rule::builder(name)
        .anchor(&names[i], &bindings, &residual_refs)
        .partner("num", &[IN_BINDING], &[(1, "s")])
        .guard(t.guard.clone())
        .agent(&names[t.target], successor_values);

    // template agent 0 is the successor; sends become cells 1.. in program
    // order
    let mut cell_of_send: Vec<usize> = Vec::new();
    for (_, e) in &t.sends {
        cell_of_send.push(1 + cell_of_send.len());
        b = b.agent("num", vec![e.clone()]);
    }

    // reads: the consumed channel continues at the stream tail, the others
    // pass through untouched
    for c in &p.reads {
        let q = read_port(p, c);
        if q == principal {
            b = b.wire(tpl(0, q), res("s"));
        } else {
            b = b.wire(tpl(0, q), res(&format!("r_{c}")));
        }
    }
    // writes: splice this transition's cells between the downstream hookup
    // and the successor, oldest value closest to the consumer
    for c in &p.writes {
        let q = write_port(p, c);
        let cells: Vec<usize> = t
            .sends
            .iter()
            .enumerate()
            .filter(|(_, (sc, _))| sc == c)
            .map(|(k, _)| cell_of_send[k])
            .collect();
        let w = format!("w_{c}");
        match cells.split_first() {
            None => b = b.wire(tpl(0, q), res(&w)),
            Some((&first, rest)) => {
                b = b.wire(tpl(first, 0), res(&w));
                let mut prev = first;
                for &cell in rest {
                    b = b.wire(tpl(prev, 1), tpl(cell, 0));
                    prev = cell;
                }
                b = b.wire(tpl(prev, 1), tpl(0, q));
            }
        }
    }

    Ok(b.build(kinds)?)
}

/// Conjunction with trivial-case elimination, to keep guards readable in
/// dumps and traces.
fn and(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Bool(true), x) | (x, Expr::Bool(true)) => x,
        (a, b) => Expr::bin(BinOp::And, a, b),
    }
}

/// Every variable the process ever binds.
fn collect_vars(p: &ProcessDecl) -> BTreeSet<String> {
    fn walk(stmts: &[Stmt], out: &mut BTreeSet<String>) {
        for s in stmts {
            match s {
                Stmt::Wait { var, .. } | Stmt::Assign { var, .. } => {
                    out.insert(var.clone());
                }
                Stmt::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    walk(then_branch, out);
                    walk(else_branch, out);
                }
                Stmt::Send { .. } => {}
            }
        }
    }
    let mut out: BTreeSet<String> = p.locals.iter().map(|l| l.name.clone()).collect();
    walk(&p.prelude, &mut out);
    walk(&p.body, &mut out);
    out
}

fn build_automaton(p: &ProcessDecl) -> Result<Automaton, CompileError> {
    let code = flatten(&p.body);
    let entry = entry_assigned(p);
    let all_vars = collect_vars(p);

    // run the pre-wait prefix of the first iteration now, concretely: its
    // sends become initial tokens and its assignments initial data
    let mut init_env = entry.clone();
    let mut init_sends = Vec::new();
    let mut pc = 0usize;
    let init_state_pc = loop {
        match &code[pc] {
            Instr::Wait { .. } => break pc,
            Instr::Send { expr, chan } => {
                let v = eval_concrete(p, expr, &init_env)?;
                init_sends.push((chan.clone(), v));
                pc += 1;
            }
            Instr::Assign { var, expr } => {
                let v = eval_concrete(p, expr, &init_env)?;
                init_env.insert(var.clone(), v);
                pc += 1;
            }
            Instr::JumpIfFalse { cond, target } => {
                match eval_concrete(p, cond, &init_env)? {
                    Value::Bool(true) => pc += 1,
                    Value::Bool(false) => pc = *target,
                    Value::Int(_) => unreachable!("type-checked condition"),
                }
            }
            Instr::Jump { target } => pc = *target,
            Instr::IterEnd => unreachable!("validated loop waits on every path"),
        }
    };

    // control candidates: booleans with a known value at the first wait;
    // demote any that turns symbolic at some wait, until stable
    let mut ctrl: BTreeSet<String> = init_env
        .iter()
        .filter(|(_, v)| matches!(v, Value::Bool(_)))
        .map(|(k, _)| k.clone())
        .collect();
    loop {
        let init_valuation: BTreeMap<String, Value> = ctrl
            .iter()
            .map(|c| (c.clone(), init_env[c]))
            .collect();
        let mut ex = Explorer {
            p,
            code: &code,
            ctrl: &ctrl,
            all_vars: &all_vars,
            states: Vec::new(),
            index: HashMap::new(),
            transitions: Vec::new(),
        };
        match ex.run(init_state_pc, init_valuation) {
            Ok(()) => {
                let live = liveness(&ex.states, &ex.transitions);
                return Ok(Automaton {
                    states: ex.states,
                    transitions: ex.transitions,
                    live,
                    init_state: 0,
                    init_env,
                    init_sends,
                });
            }
            Err(Stop::Demote(v)) => {
                ctrl.remove(&v);
            }
            Err(Stop::Fail(e)) => return Err(e),
        }
    }
}

fn eval_concrete(
    p: &ProcessDecl,
    e: &Expr,
    env: &HashMap<String, Value>,
) -> Result<Value, CompileError> {
    e.eval(env).map_err(|err| CompileError::Eval {
        process: p.name.clone(),
        message: format!("before the first wait: {err}"),
    })
}

struct Explorer<'a> {
    p: &'a ProcessDecl,
    code: &'a [Instr],
    ctrl: &'a BTreeSet<String>,
    all_vars: &'a BTreeSet<String>,
    states: Vec<State>,
    index: HashMap<(usize, BTreeMap<String, Value>), usize>,
    transitions: Vec<Vec<Transition>>,
}

impl<'a> Explorer<'a> {
    fn run(&mut self, init_pc: usize, init_valuation: BTreeMap<String, Value>) -> Result<(), Stop> {
        let mut queue = VecDeque::new();
        queue.push_back(self.intern(init_pc, init_valuation)?);
        while let Some(s) = queue.pop_front() {
            let before = self.states.len();
            let env = self.entry_env(s);
            let pc = self.states[s].pc;
            self.paths(s, pc + 1, env, Expr::Bool(true), Vec::new(), false)?;
            // newly interned states need exploring too
            queue.extend(before..self.states.len());
        }
        Ok(())
    }

    /// Symbolic environment on entering state `s`, just after the waited
    /// value arrived: control booleans are constants, the wait variable is
    /// the fresh input, everything else refers to its own value slot.
    fn entry_env(&self, s: usize) -> BTreeMap<String, Expr> {
        let st = &self.states[s];
        let mut env: BTreeMap<String, Expr> = self
            .all_vars
            .iter()
            .map(|v| (v.clone(), Expr::var(v.clone())))
            .collect();
        for (c, v) in &st.valuation {
            env.insert(
                c.clone(),
                match v {
                    Value::Int(n) => Expr::Int(*n),
                    Value::Bool(b) => Expr::Bool(*b),
                },
            );
        }
        env.insert(st.var.clone(), Expr::var(IN_BINDING));
        env
    }

    fn intern(
        &mut self,
        pc: usize,
        valuation: BTreeMap<String, Value>,
    ) -> Result<usize, Stop> {
        if let Some(&i) = self.index.get(&(pc, valuation.clone())) {
            return Ok(i);
        }
        if self.states.len() >= MAX_STATES {
            return Err(Stop::Fail(CompileError::TooManyStates {
                process: self.p.name.clone(),
            }));
        }
        let (var, chan) = match &self.code[pc] {
            Instr::Wait { var, chan } => (var.clone(), chan.clone()),
            _ => unreachable!("states are wait instructions"),
        };
        let i = self.states.len();
        self.index.insert((pc, valuation.clone()), i);
        self.states.push(State {
            pc,
            valuation,
            chan,
            var,
        });
        self.transitions.push(Vec::new());
        Ok(i)
    }

    /// Follows straight-line code from `pc` until the next wait, forking on
    /// conditions the control booleans leave open.
    fn paths(
        &mut self,
        from: usize,
        mut pc: usize,
        mut env: BTreeMap<String, Expr>,
        guard: Expr,
        mut sends: Vec<(String, Expr)>,
        mut wrapped: bool,
    ) -> Result<(), Stop> {
        loop {
            match &self.code[pc] {
                Instr::Wait { .. } => {
                    let mut valuation = BTreeMap::new();
                    for c in self.ctrl {
                        match env.get(c).map(|e| e.fold()) {
                            Some(Expr::Int(n)) => {
                                valuation.insert(c.clone(), Value::Int(n));
                            }
                            Some(Expr::Bool(b)) => {
                                valuation.insert(c.clone(), Value::Bool(b));
                            }
                            _ => return Err(Stop::Demote(c.clone())),
                        }
                    }
                    let target = self.intern(pc, valuation)?;
                    self.transitions[from].push(Transition {
                        guard,
                        sends,
                        target,
                        updates: env,
                    });
                    return Ok(());
                }
                Instr::Send { expr, chan } => {
                    let subst: HashMap<String, Expr> =
                        env.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
                    sends.push((chan.clone(), expr.subst(&subst).fold()));
                    pc += 1;
                }
                Instr::Assign { var, expr } => {
                    let subst: HashMap<String, Expr> =
                        env.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
                    let e = expr.subst(&subst).fold();
                    env.insert(var.clone(), e);
                    pc += 1;
                }
                Instr::JumpIfFalse { cond, target } => {
                    let subst: HashMap<String, Expr> =
                        env.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
                    let c = cond.subst(&subst).fold();
                    match c {
                        Expr::Bool(true) => pc += 1,
                        Expr::Bool(false) => pc = *target,
                        c => {
                            // data-dependent branch: one rule alternative
                            // per arm, guards disjoint by construction
                            let not_c = Expr::Not(Box::new(c.clone())).fold();
                            self.paths(
                                from,
                                pc + 1,
                                env.clone(),
                                and(guard.clone(), c),
                                sends.clone(),
                                wrapped,
                            )?;
                            self.paths(from, *target, env, and(guard, not_c), sends, wrapped)?;
                            return Ok(());
                        }
                    }
                }
                Instr::Jump { target } => pc = *target,
                Instr::IterEnd => {
                    assert!(!wrapped, "validated loop waits on every path");
                    wrapped = true;
                    pc = 0;
                }
            }
        }
    }
}

/// Smallest per-state variable sets closed under "everything a transition
/// reads must be carried in".
fn liveness(states: &[State], transitions: &[Vec<Transition>]) -> Vec<Vec<String>> {
    let n = states.len();
    let mut live: Vec<BTreeSet<String>> = vec![BTreeSet::new(); n];
    loop {
        let mut changed = false;
        for s in 0..n {
            let mut need: BTreeSet<String> = BTreeSet::new();
            for t in &transitions[s] {
                need.extend(t.guard.var_list());
                for (_, e) in &t.sends {
                    need.extend(e.var_list());
                }
                for v in &live[t.target] {
                    match t.updates.get(v) {
                        Some(e) => need.extend(e.var_list()),
                        None => {
                            need.insert(v.clone());
                        }
                    }
                }
            }
            need.remove(IN_BINDING);
            if !need.is_subset(&live[s]) {
                live[s].extend(need);
                changed = true;
            }
        }
        if !changed {
            return live.into_iter().map(|s| s.into_iter().collect()).collect();
        }
    }
}
