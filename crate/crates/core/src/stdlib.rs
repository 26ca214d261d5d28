//! Prebuilt interaction systems: stream map (`inc`), stream duplication
//! (`delta`), pairwise addition (combined and curried), the cyclic integer
//! generator, the running-total node, the stateless two-node adder, the
//! alternating-bit network, and the multiples / factorial / Fibonacci nets.
//!
//! Port conventions, fixed once here:
//!   - stream cells `num`: port 0 principal (faces the consumer), port 1 tail
//!   - `inc`: port 0 principal (input stream), port 1 output
//!   - `delta`: port 0 principal (input), ports 1/2 the two copies
//!   - combined `plus`/`star`: ports 0/1 principal (the two inputs), port 2 output
//!   - process nodes: read ports first (declaration order), then write ports

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{BinOp, Expr};
use crate::net::{AgentKind, KindTable, Net, NetError, PortRef, StreamTail};
use crate::rules::{res, tpl, Rule, RuleError, RuleSet};
use crate::value::Value;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("unknown net parameter `{0}`")]
    UnknownArg(String),
}

/// Parameters accepted by the net constructors. Unset fields take each
/// system's own default.
#[derive(Debug, Clone, Default)]
pub struct NetArgs {
    pub n: Option<i64>,
    pub m: Option<i64>,
    pub input: Option<Vec<i64>>,
}

impl NetArgs {
    fn n(&self, default: i64) -> i64 {
        self.n.unwrap_or(default)
    }

    fn m(&self, default: i64) -> i64 {
        self.m.unwrap_or(default)
    }

    fn input(&self, default: &[i64]) -> Vec<Value> {
        self.input
            .clone()
            .unwrap_or_else(|| default.to_vec())
            .into_iter()
            .map(Value::Int)
            .collect()
    }
}

/// An agent-kind table, a rule set and a net constructor, packaged under a
/// name addressable from the CLI.
pub struct SystemBundle {
    pub name: &'static str,
    pub kinds: Arc<KindTable>,
    pub rules: Arc<RuleSet>,
    /// Interface names worth tapping by default.
    pub default_taps: Vec<&'static str>,
    build: fn(&SystemBundle, &NetArgs) -> Result<Net, BuildError>,
}

impl SystemBundle {
    pub fn build(&self, args: &NetArgs) -> Result<Net, BuildError> {
        (self.build)(self, args)
    }
}

pub const SYSTEM_NAMES: &[&str] = &[
    "inc",
    "delta",
    "plus",
    "ints",
    "running_total",
    "plus_process",
    "altbit",
    "multiples",
    "factorial",
    "fib",
];

pub fn by_name(name: &str) -> Result<SystemBundle, BuildError> {
    match name {
        "inc" => Ok(inc_system()),
        "delta" => Ok(delta_system()),
        "plus" => Ok(plus_system()),
        "ints" => Ok(ints_system()),
        "running_total" => Ok(running_total_system()),
        "plus_process" => Ok(plus_process_system()),
        "altbit" => Ok(altbit_system()),
        "multiples" => Ok(multiples_system()),
        "factorial" => Ok(factorial_system()),
        "fib" => Ok(fib_system()),
        other => Err(BuildError::UnknownSystem(other.to_string())),
    }
}

fn num_kind() -> AgentKind {
    AgentKind::new("num", 2, vec![0], 1)
}

fn nil_kind() -> AgentKind {
    AgentKind::new("nil", 1, vec![0], 0)
}

fn inc_num_rule(kinds: &KindTable) -> Result<Rule, RuleError> {
    Rule::builder("inc/num")
        .anchor("inc", &[], &[(1, "out")])
        .partner("num", &["x"], &[(1, "rest")])
        .agent("num", vec![Expr::add(Expr::var("x"), Expr::Int(1))])
        .agent("inc", vec![])
        .wire(tpl(0, 0), res("out"))
        .wire(tpl(0, 1), tpl(1, 1))
        .wire(tpl(1, 0), res("rest"))
        .build(kinds)
}

fn inc_nil_rule(kinds: &KindTable) -> Result<Rule, RuleError> {
    Rule::builder("inc/nil")
        .anchor("inc", &[], &[(1, "out")])
        .partner("nil", &[], &[])
        .agent("nil", vec![])
        .wire(tpl(0, 0), res("out"))
        .build(kinds)
}

fn delta_num_rule(kinds: &KindTable) -> Result<Rule, RuleError> {
    Rule::builder("delta/num")
        .anchor("delta", &[], &[(1, "l"), (2, "r")])
        .partner("num", &["x"], &[(1, "rest")])
        .agent("num", vec![Expr::var("x")])
        .agent("num", vec![Expr::var("x")])
        .agent("delta", vec![])
        .wire(tpl(0, 0), res("l"))
        .wire(tpl(1, 0), res("r"))
        .wire(tpl(0, 1), tpl(2, 1))
        .wire(tpl(1, 1), tpl(2, 2))
        .wire(tpl(2, 0), res("rest"))
        .build(kinds)
}

fn delta_nil_rule(kinds: &KindTable) -> Result<Rule, RuleError> {
    Rule::builder("delta/nil")
        .anchor("delta", &[], &[(1, "l"), (2, "r")])
        .partner("nil", &[], &[])
        .agent("nil", vec![])
        .agent("nil", vec![])
        .wire(tpl(0, 0), res("l"))
        .wire(tpl(1, 0), res("r"))
        .build(kinds)
}

/// The combined two-principal-port pairwise rule for an arithmetic node.
fn combined_arith_rule(kinds: &KindTable, node: &str, op: BinOp) -> Result<Rule, RuleError> {
    Rule::builder(&format!("{node}/(num,num)"))
        .anchor(node, &[], &[(2, "out")])
        .partner("num", &["x"], &[(1, "xs")])
        .partner("num", &["y"], &[(1, "ys")])
        .agent(
            "num",
            vec![Expr::bin(op, Expr::var("x"), Expr::var("y"))],
        )
        .agent(node, vec![])
        .wire(tpl(0, 0), res("out"))
        .wire(tpl(0, 1), tpl(1, 2))
        .wire(tpl(1, 0), res("xs"))
        .wire(tpl(1, 1), res("ys"))
        .build(kinds)
}

fn ruleset(kinds: Arc<KindTable>, rules: Vec<Rule>) -> Arc<RuleSet> {
    let mut rs = RuleSet::new(kinds);
    for r in rules {
        rs.define(r).expect("stdlib rule");
    }
    Arc::new(rs)
}

// ---------------------------------------------------------------------------
// inc: increment every element of a list

pub fn inc_system() -> SystemBundle {
    let mut t = KindTable::new();
    t.register(AgentKind::new("inc", 2, vec![0], 0)).unwrap();
    t.register(num_kind()).unwrap();
    t.register(nil_kind()).unwrap();
    let kinds = Arc::new(t);
    let rules = ruleset(
        Arc::clone(&kinds),
        vec![
            inc_num_rule(&kinds).unwrap(),
            inc_nil_rule(&kinds).unwrap(),
        ],
    );
    SystemBundle {
        name: "inc",
        kinds,
        rules,
        default_taps: vec!["out"],
        build: |b, args| {
            let mut net = Net::new(Arc::clone(&b.kinds));
            let inc = net.add_agent_by_name("inc", vec![])?;
            net.connect(PortRef::Agent(inc, 1), PortRef::iface("out"))?;
            let num = b.kinds.require("num")?;
            let nil = b.kinds.require("nil")?;
            net.mk_stream(
                num,
                &args.input(&[1, 2, 3]),
                PortRef::Agent(inc, 0),
                StreamTail::Nil(nil),
            )?;
            Ok(net)
        },
    }
}

// ---------------------------------------------------------------------------
// delta: duplicate a list into two copies

pub fn delta_system() -> SystemBundle {
    let mut t = KindTable::new();
    t.register(AgentKind::new("delta", 3, vec![0], 0)).unwrap();
    t.register(num_kind()).unwrap();
    t.register(nil_kind()).unwrap();
    let kinds = Arc::new(t);
    let rules = ruleset(
        Arc::clone(&kinds),
        vec![
            delta_num_rule(&kinds).unwrap(),
            delta_nil_rule(&kinds).unwrap(),
        ],
    );
    SystemBundle {
        name: "delta",
        kinds,
        rules,
        default_taps: vec!["out1", "out2"],
        build: |b, args| {
            let mut net = Net::new(Arc::clone(&b.kinds));
            let d = net.add_agent_by_name("delta", vec![])?;
            net.connect(PortRef::Agent(d, 1), PortRef::iface("out1"))?;
            net.connect(PortRef::Agent(d, 2), PortRef::iface("out2"))?;
            let num = b.kinds.require("num")?;
            let nil = b.kinds.require("nil")?;
            net.mk_stream(
                num,
                &args.input(&[1, 2]),
                PortRef::Agent(d, 0),
                StreamTail::Nil(nil),
            )?;
            Ok(net)
        },
    }
}

// ---------------------------------------------------------------------------
// plus: pairwise addition, both the combined form and the curried two-rule
// variant. No rule for nil is given (the source nets are streamed uses);
// check_ruleset flags the gap.

pub fn plus_system() -> SystemBundle {
    let mut t = KindTable::new();
    t.register(AgentKind::new("plus", 3, vec![0, 1], 0)).unwrap();
    // curried variant: plusc waits on the left stream, plusx(x) on the right
    t.register(AgentKind::new("plusc", 3, vec![0], 0)).unwrap();
    t.register(AgentKind::new("plusx", 3, vec![1], 1)).unwrap();
    t.register(AgentKind::new("delta", 3, vec![0], 0)).unwrap();
    t.register(num_kind()).unwrap();
    t.register(nil_kind()).unwrap();
    let kinds = Arc::new(t);
    let plusc_num = Rule::builder("plusc/num")
        .anchor("plusc", &[], &[(1, "r"), (2, "out")])
        .partner("num", &["x"], &[(1, "ls")])
        .agent("plusx", vec![Expr::var("x")])
        .wire(tpl(0, 0), res("ls"))
        .wire(tpl(0, 1), res("r"))
        .wire(tpl(0, 2), res("out"))
        .build(&kinds)
        .unwrap();
    let plusx_num = Rule::builder("plusx/num")
        .anchor("plusx", &["x"], &[(0, "ls"), (2, "out")])
        .partner("num", &["y"], &[(1, "rs")])
        .agent("num", vec![Expr::add(Expr::var("x"), Expr::var("y"))])
        .agent("plusc", vec![])
        .wire(tpl(0, 0), res("out"))
        .wire(tpl(0, 1), tpl(1, 2))
        .wire(tpl(1, 0), res("ls"))
        .wire(tpl(1, 1), res("rs"))
        .build(&kinds)
        .unwrap();
    let rules = ruleset(
        Arc::clone(&kinds),
        vec![
            combined_arith_rule(&kinds, "plus", BinOp::Add).unwrap(),
            plusc_num,
            plusx_num,
            delta_num_rule(&kinds).unwrap(),
            delta_nil_rule(&kinds).unwrap(),
        ],
    );
    SystemBundle {
        name: "plus",
        kinds,
        rules,
        default_taps: vec!["out"],
        // plus over delta of the input list: elementwise doubling
        build: |b, args| {
            let mut net = Net::new(Arc::clone(&b.kinds));
            let p = net.add_agent_by_name("plus", vec![])?;
            let d = net.add_agent_by_name("delta", vec![])?;
            net.connect(PortRef::Agent(p, 2), PortRef::iface("out"))?;
            net.connect(PortRef::Agent(d, 1), PortRef::Agent(p, 0))?;
            net.connect(PortRef::Agent(d, 2), PortRef::Agent(p, 1))?;
            let num = b.kinds.require("num")?;
            let nil = b.kinds.require("nil")?;
            net.mk_stream(
                num,
                &args.input(&[1, 2, 3, 4]),
                PortRef::Agent(d, 0),
                StreamTail::Nil(nil),
            )?;
            Ok(net)
        },
    }
}

// ---------------------------------------------------------------------------
// ints(n): the cyclic generator (delta feeding inc feeding back)

pub fn ints_system() -> SystemBundle {
    let mut t = KindTable::new();
    t.register(AgentKind::new("delta", 3, vec![0], 0)).unwrap();
    t.register(AgentKind::new("inc", 2, vec![0], 0)).unwrap();
    t.register(num_kind()).unwrap();
    t.register(nil_kind()).unwrap();
    let kinds = Arc::new(t);
    let rules = ruleset(
        Arc::clone(&kinds),
        vec![
            delta_num_rule(&kinds).unwrap(),
            delta_nil_rule(&kinds).unwrap(),
            inc_num_rule(&kinds).unwrap(),
            inc_nil_rule(&kinds).unwrap(),
        ],
    );
    SystemBundle {
        name: "ints",
        kinds,
        rules,
        default_taps: vec!["out"],
        build: |b, args| {
            let mut net = Net::new(Arc::clone(&b.kinds));
            let d = net.add_agent_by_name("delta", vec![])?;
            let i = net.add_agent_by_name("inc", vec![])?;
            let n = net.add_agent_by_name("num", vec![Value::Int(args.n(1))])?;
            net.connect(PortRef::Agent(d, 1), PortRef::iface("out"))?;
            net.connect(PortRef::Agent(d, 0), PortRef::Agent(n, 0))?;
            net.connect(PortRef::Agent(n, 1), PortRef::Agent(i, 1))?;
            net.connect(PortRef::Agent(i, 0), PortRef::Agent(d, 2))?;
            Ok(net)
        },
    }
}

// ---------------------------------------------------------------------------
// running total: one node s(x), one rule s(x)·y ⇒ s(x+y) with emission

pub fn running_total_system() -> SystemBundle {
    let mut t = KindTable::new();
    // s: port 0 principal (input channel), port 1 output channel
    t.register(AgentKind::new("s", 2, vec![0], 1)).unwrap();
    t.register(num_kind()).unwrap();
    let kinds = Arc::new(t);
    let rule = Rule::builder("s/num")
        .anchor("s", &["x"], &[(1, "out")])
        .partner("num", &["y"], &[(1, "rest")])
        .agent("num", vec![Expr::add(Expr::var("x"), Expr::var("y"))])
        .agent("s", vec![Expr::add(Expr::var("x"), Expr::var("y"))])
        .wire(tpl(0, 0), res("out"))
        .wire(tpl(0, 1), tpl(1, 1))
        .wire(tpl(1, 0), res("rest"))
        .build(&kinds)
        .unwrap();
    let rules = ruleset(Arc::clone(&kinds), vec![rule]);
    SystemBundle {
        name: "running_total",
        kinds,
        rules,
        default_taps: vec!["out"],
        build: |b, args| {
            let mut net = Net::new(Arc::clone(&b.kinds));
            let s = net.add_agent_by_name("s", vec![Value::Int(args.n(0))])?;
            net.connect(PortRef::Agent(s, 1), PortRef::iface("out"))?;
            let num = b.kinds.require("num")?;
            // input tail stays open: when it runs out the node just waits
            net.mk_stream(
                num,
                &args.input(&[1, 2, 3]),
                PortRef::Agent(s, 0),
                StreamTail::Port(PortRef::iface("in")),
            )?;
            Ok(net)
        },
    }
}

// ---------------------------------------------------------------------------
// plus process: the stateless running total. Two node states, the running
// sum lives on the self-loop channel W (initialised with 0).
// Ports on both states: 0 = read U, 1 = read W, 2 = write V, 3 = write W.

pub fn plus_process_system() -> SystemBundle {
    let mut t = KindTable::new();
    t.register(AgentKind::new("plus1", 4, vec![0], 0)).unwrap();
    t.register(AgentKind::new("plus2", 4, vec![1], 1)).unwrap();
    t.register(num_kind()).unwrap();
    let kinds = Arc::new(t);
    let r1 = Rule::builder("plus1/num")
        .anchor("plus1", &[], &[(1, "wr"), (2, "v"), (3, "ww")])
        .partner("num", &["x"], &[(1, "urest")])
        .agent("plus2", vec![Expr::var("x")])
        .wire(tpl(0, 0), res("urest"))
        .wire(tpl(0, 1), res("wr"))
        .wire(tpl(0, 2), res("v"))
        .wire(tpl(0, 3), res("ww"))
        .build(&kinds)
        .unwrap();
    let r2 = Rule::builder("plus2/num")
        .anchor("plus2", &["x"], &[(0, "ur"), (2, "v"), (3, "ww")])
        .partner("num", &["y"], &[(1, "wrest")])
        .agent("plus1", vec![])
        .agent("num", vec![Expr::add(Expr::var("x"), Expr::var("y"))])
        .agent("num", vec![Expr::add(Expr::var("x"), Expr::var("y"))])
        .wire(tpl(0, 0), res("ur"))
        .wire(tpl(0, 1), res("wrest"))
        .wire(tpl(1, 0), res("v"))
        .wire(tpl(1, 1), tpl(0, 2))
        .wire(tpl(2, 0), res("ww"))
        .wire(tpl(2, 1), tpl(0, 3))
        .build(&kinds)
        .unwrap();
    let rules = ruleset(Arc::clone(&kinds), vec![r1, r2]);
    SystemBundle {
        name: "plus_process",
        kinds,
        rules,
        default_taps: vec!["V"],
        build: |b, args| {
            let mut net = Net::new(Arc::clone(&b.kinds));
            let p = net.add_agent_by_name("plus1", vec![])?;
            let num = b.kinds.require("num")?;
            // U: external input, open tail
            net.mk_stream(
                num,
                &args.input(&[1, 2, 3]),
                PortRef::Agent(p, 0),
                StreamTail::Port(PortRef::iface("Uin")),
            )?;
            // W: self loop, initialised with m (0 in the source network)
            net.mk_stream(
                num,
                &[Value::Int(args.m(0))],
                PortRef::Agent(p, 1),
                StreamTail::Port(PortRef::Agent(p, 3)),
            )?;
            // V: output
            net.connect(PortRef::Agent(p, 2), PortRef::iface("V"))?;
            Ok(net)
        },
    }
}

// ---------------------------------------------------------------------------
// alternating bit. f alternately reads its two inputs and copies each value
// to both the observed channel X and the internal channel C feeding g; g
// alternately routes to V and Y; h0 and h1 copy their input to their
// output. Tokens 0 (toward f's left input) and 1 (toward f's right input)
// start the cycle.
//
// Ports: f*: 0 = read U, 1 = read W, 2 = write X, 3 = write C
//        g*: 0 = read C, 1 = write V, 2 = write Y
//        h*: 0 = read,   1 = write

pub fn altbit_system() -> SystemBundle {
    let mut t = KindTable::new();
    t.register(AgentKind::new("f1", 4, vec![0], 0)).unwrap();
    t.register(AgentKind::new("f2", 4, vec![1], 0)).unwrap();
    t.register(AgentKind::new("g1", 3, vec![0], 0)).unwrap();
    t.register(AgentKind::new("g2", 3, vec![0], 0)).unwrap();
    t.register(AgentKind::new("h0", 2, vec![0], 0)).unwrap();
    t.register(AgentKind::new("h1", 2, vec![0], 0)).unwrap();
    t.register(num_kind()).unwrap();
    let kinds = Arc::new(t);

    let f_rule = |anchor: &str, succ: &str, read_port: usize, rest: &str| {
        let other_read = if read_port == 0 { (1, "w") } else { (0, "u") };
        Rule::builder(&format!("{anchor}/num"))
            .anchor(anchor, &[], &[other_read, (2, "x"), (3, "c")])
            .partner("num", &["i"], &[(1, rest)])
            .agent(succ, vec![])
            .agent("num", vec![Expr::var("i")])
            .agent("num", vec![Expr::var("i")])
            .wire(tpl(0, read_port), res(rest))
            .wire(tpl(0, other_read.0), res(other_read.1))
            .wire(tpl(1, 0), res("x"))
            .wire(tpl(1, 1), tpl(0, 2))
            .wire(tpl(2, 0), res("c"))
            .wire(tpl(2, 1), tpl(0, 3))
            .build(&kinds)
            .unwrap()
    };
    let g_rule = |anchor: &str, succ: &str, out_port: usize, out_name: &str, thru: (usize, &str)| {
        Rule::builder(&format!("{anchor}/num"))
            .anchor(anchor, &[], &[(1, "v"), (2, "y")])
            .partner("num", &["i"], &[(1, "crest")])
            .agent(succ, vec![])
            .agent("num", vec![Expr::var("i")])
            .wire(tpl(0, 0), res("crest"))
            .wire(tpl(0, thru.0), res(thru.1))
            .wire(tpl(1, 0), res(out_name))
            .wire(tpl(1, 1), tpl(0, out_port))
            .build(&kinds)
            .unwrap()
    };
    let h_rule = |anchor: &str| {
        Rule::builder(&format!("{anchor}/num"))
            .anchor(anchor, &[], &[(1, "out")])
            .partner("num", &["i"], &[(1, "rest")])
            .agent(anchor, vec![])
            .agent("num", vec![Expr::var("i")])
            .wire(tpl(0, 0), res("rest"))
            .wire(tpl(1, 0), res("out"))
            .wire(tpl(1, 1), tpl(0, 1))
            .build(&kinds)
            .unwrap()
    };
    let rules = ruleset(
        Arc::clone(&kinds),
        vec![
            f_rule("f1", "f2", 0, "urest"),
            f_rule("f2", "f1", 1, "wrest"),
            g_rule("g1", "g2", 1, "v", (2, "y")),
            g_rule("g2", "g1", 2, "y", (1, "v")),
            h_rule("h0"),
            h_rule("h1"),
        ],
    );
    SystemBundle {
        name: "altbit",
        kinds,
        rules,
        default_taps: vec!["X"],
        build: |b, args| {
            let mut net = Net::new(Arc::clone(&b.kinds));
            let f = net.add_agent_by_name("f1", vec![])?;
            let g = net.add_agent_by_name("g1", vec![])?;
            let h0 = net.add_agent_by_name("h0", vec![])?;
            let h1 = net.add_agent_by_name("h1", vec![])?;
            let num = b.kinds.require("num")?;
            // U: h0 -> f, token `n` (0 in the source network)
            net.mk_stream(
                num,
                &[Value::Int(args.n(0))],
                PortRef::Agent(f, 0),
                StreamTail::Port(PortRef::Agent(h0, 1)),
            )?;
            // W: h1 -> f, token `m` (1 in the source network)
            net.mk_stream(
                num,
                &[Value::Int(args.m(1))],
                PortRef::Agent(f, 1),
                StreamTail::Port(PortRef::Agent(h1, 1)),
            )?;
            // X: f's observed output
            net.connect(PortRef::Agent(f, 2), PortRef::iface("X"))?;
            // C: f -> g
            net.connect(PortRef::Agent(g, 0), PortRef::Agent(f, 3))?;
            // V: g -> h0, Y: g -> h1
            net.connect(PortRef::Agent(h0, 0), PortRef::Agent(g, 1))?;
            net.connect(PortRef::Agent(h1, 0), PortRef::Agent(g, 2))?;
            Ok(net)
        },
    }
}

// ---------------------------------------------------------------------------
// multiples / fib share the {delta, plus, num} system: two rules in total.

fn delta_plus_kinds() -> Arc<KindTable> {
    let mut t = KindTable::new();
    t.register(AgentKind::new("delta", 3, vec![0], 0)).unwrap();
    t.register(AgentKind::new("plus", 3, vec![0, 1], 0)).unwrap();
    t.register(num_kind()).unwrap();
    Arc::new(t)
}

fn delta_plus_rules(kinds: &Arc<KindTable>) -> Arc<RuleSet> {
    ruleset(
        Arc::clone(kinds),
        vec![
            delta_num_rule(kinds).unwrap(),
            combined_arith_rule(kinds, "plus", BinOp::Add).unwrap(),
        ],
    )
}

/// The λ⟨x,y⟩.⟨x,x+y⟩ block with both outputs fed back: the left loop
/// keeps recirculating `n`, the right loop accumulates, and a second delta
/// on the adder's output taps the stream of multiples.
pub fn multiples_system() -> SystemBundle {
    let kinds = delta_plus_kinds();
    let rules = delta_plus_rules(&kinds);
    SystemBundle {
        name: "multiples",
        kinds,
        rules,
        default_taps: vec!["out"],
        build: |b, args| {
            let mut net = Net::new(Arc::clone(&b.kinds));
            let d1 = net.add_agent_by_name("delta", vec![])?;
            let p = net.add_agent_by_name("plus", vec![])?;
            let d2 = net.add_agent_by_name("delta", vec![])?;
            let n = net.add_agent_by_name("num", vec![Value::Int(args.n(1))])?;
            let z = net.add_agent_by_name("num", vec![Value::Int(0)])?;
            // left loop: n circulates through d1, one copy per round to plus
            net.connect(PortRef::Agent(n, 0), PortRef::Agent(d1, 0))?;
            net.connect(PortRef::Agent(n, 1), PortRef::Agent(d1, 1))?;
            net.connect(PortRef::Agent(d1, 2), PortRef::Agent(p, 0))?;
            // right loop: 0, then each sum, comes back to plus via d2
            net.connect(PortRef::Agent(z, 0), PortRef::Agent(p, 1))?;
            net.connect(PortRef::Agent(z, 1), PortRef::Agent(d2, 1))?;
            net.connect(PortRef::Agent(d2, 0), PortRef::Agent(p, 2))?;
            net.connect(PortRef::Agent(d2, 2), PortRef::iface("out"))?;
            Ok(net)
        },
    }
}

/// Three kinds of nodes, two rules. The observed stream is the one feeding
/// the duplicator: the starting token followed by every sum.
pub fn fib_system() -> SystemBundle {
    let kinds = delta_plus_kinds();
    let rules = delta_plus_rules(&kinds);
    SystemBundle {
        name: "fib",
        kinds,
        rules,
        default_taps: vec!["out"],
        build: |b, _args| {
            let mut net = Net::new(Arc::clone(&b.kinds));
            let dm = net.add_agent_by_name("delta", vec![])?;
            let p = net.add_agent_by_name("plus", vec![])?;
            let dt = net.add_agent_by_name("delta", vec![])?;
            let l = net.add_agent_by_name("num", vec![Value::Int(1)])?;
            let r = net.add_agent_by_name("num", vec![Value::Int(1)])?;
            // input loop into the main delta, tapped through dt
            net.connect(PortRef::Agent(dm, 0), PortRef::Agent(dt, 1))?;
            net.connect(PortRef::Agent(dt, 0), PortRef::Agent(r, 0))?;
            net.connect(PortRef::Agent(r, 1), PortRef::Agent(p, 2))?;
            net.connect(PortRef::Agent(dt, 2), PortRef::iface("out"))?;
            // left copy queues behind the other starting token
            net.connect(PortRef::Agent(p, 0), PortRef::Agent(l, 0))?;
            net.connect(PortRef::Agent(l, 1), PortRef::Agent(dm, 1))?;
            // right copy goes straight to the adder
            net.connect(PortRef::Agent(dm, 2), PortRef::Agent(p, 1))?;
            Ok(net)
        },
    }
}

/// The factorial net: the left loop counts n, n+1, … through inc; the
/// right loop multiplies the accumulator by each counter value.
pub fn factorial_system() -> SystemBundle {
    let mut t = KindTable::new();
    t.register(AgentKind::new("delta", 3, vec![0], 0)).unwrap();
    t.register(AgentKind::new("inc", 2, vec![0], 0)).unwrap();
    t.register(AgentKind::new("star", 3, vec![0, 1], 0)).unwrap();
    t.register(num_kind()).unwrap();
    let kinds = Arc::new(t);
    let rules = ruleset(
        Arc::clone(&kinds),
        vec![
            delta_num_rule(&kinds).unwrap(),
            inc_num_rule(&kinds).unwrap(),
            combined_arith_rule(&kinds, "star", BinOp::Mul).unwrap(),
        ],
    );
    SystemBundle {
        name: "factorial",
        kinds,
        rules,
        default_taps: vec!["out"],
        build: |b, args| {
            let mut net = Net::new(Arc::clone(&b.kinds));
            let d1 = net.add_agent_by_name("delta", vec![])?;
            let i = net.add_agent_by_name("inc", vec![])?;
            let st = net.add_agent_by_name("star", vec![])?;
            let d2 = net.add_agent_by_name("delta", vec![])?;
            let n = net.add_agent_by_name("num", vec![Value::Int(args.n(1))])?;
            let m = net.add_agent_by_name("num", vec![Value::Int(args.m(1))])?;
            // left loop: n -> d1, one copy through inc and back behind n
            net.connect(PortRef::Agent(n, 0), PortRef::Agent(d1, 0))?;
            net.connect(PortRef::Agent(d1, 1), PortRef::Agent(i, 0))?;
            net.connect(PortRef::Agent(i, 1), PortRef::Agent(n, 1))?;
            net.connect(PortRef::Agent(d1, 2), PortRef::Agent(st, 0))?;
            // right loop: m, then each product, back to star through d2
            net.connect(PortRef::Agent(m, 0), PortRef::Agent(st, 1))?;
            net.connect(PortRef::Agent(m, 1), PortRef::Agent(d2, 1))?;
            net.connect(PortRef::Agent(d2, 0), PortRef::Agent(st, 2))?;
            net.connect(PortRef::Agent(d2, 2), PortRef::iface("out"))?;
            Ok(net)
        },
    }
}

/// Parses `k=v` argument pairs from the CLI into [`NetArgs`].
pub fn parse_net_args(pairs: &BTreeMap<String, String>) -> Result<NetArgs, BuildError> {
    let mut args = NetArgs::default();
    for (k, v) in pairs {
        match k.as_str() {
            "n" => args.n = Some(v.parse().map_err(|_| BuildError::UnknownArg(k.clone()))?),
            "m" => args.m = Some(v.parse().map_err(|_| BuildError::UnknownArg(k.clone()))?),
            "input" => {
                let list: Result<Vec<i64>, _> = v
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.trim().parse())
                    .collect();
                args.input = Some(list.map_err(|_| BuildError::UnknownArg(k.clone()))?);
            }
            _ => return Err(BuildError::UnknownArg(k.clone())),
        }
    }
    Ok(args)
}
