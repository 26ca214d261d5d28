//! Stable plain-text rendering of a system (kinds, rules, net). The output
//! is deterministic for identical inputs, so it doubles as a cheap equality
//! check for compiled artifacts.

use std::fmt::Write;

use crate::net::{Net, PortRef};
use crate::rules::{RuleSet, TplPort};

pub fn dump_kinds(out: &mut String, rules: &RuleSet) {
    let kinds = rules.kinds();
    writeln!(out, "KINDS {}", kinds.len()).unwrap();
    for (_, k) in kinds.iter() {
        writeln!(
            out,
            "  {} arity={} principal={:?} values={}",
            k.name, k.arity, k.principal_ports, k.value_arity
        )
        .unwrap();
    }
}

pub fn dump_rules(out: &mut String, rules: &RuleSet) {
    let kinds = rules.kinds();
    writeln!(out, "RULES {}", rules.len()).unwrap();
    for r in rules.rules() {
        let partners: Vec<String> = r
            .lhs
            .partners
            .iter()
            .map(|p| {
                format!(
                    "{}({})",
                    kinds.get(p.kind).name,
                    p.bindings.join(", ")
                )
            })
            .collect();
        write!(
            out,
            "  {}: {}({}) >< {}",
            r.name,
            kinds.get(r.lhs.anchor).name,
            r.lhs.anchor_bindings.join(", "),
            partners.join(", ")
        )
        .unwrap();
        if !matches!(r.guard, crate::expr::Expr::Bool(true)) {
            write!(out, " when {}", r.guard).unwrap();
        }
        writeln!(out).unwrap();
        for (idx, a) in r.rhs.agents.iter().enumerate() {
            let values: Vec<String> = a.values.iter().map(|e| e.to_string()).collect();
            writeln!(
                out,
                "    +{idx} {}[{}]",
                kinds.get(a.kind).name,
                values.join(", ")
            )
            .unwrap();
        }
        let mut wires: Vec<String> = r
            .rhs
            .wires
            .iter()
            .map(|(a, b)| {
                let p = |t: &TplPort| match t {
                    TplPort::Agent(i, q) => format!("+{i}.{q}"),
                    TplPort::Iface(n) => format!("@{n}"),
                };
                let (x, y) = (p(a), p(b));
                if x <= y {
                    format!("    {x} -- {y}")
                } else {
                    format!("    {y} -- {x}")
                }
            })
            .collect();
        wires.sort();
        for w in wires {
            writeln!(out, "{w}").unwrap();
        }
    }
}

pub fn dump_net(out: &mut String, net: &Net) {
    writeln!(out, "NET agents={} wires={}", net.agent_count(), net.wire_count()).unwrap();
    for a in net.agents() {
        let values: Vec<String> = a.values.iter().map(|v| v.to_string()).collect();
        writeln!(
            out,
            "  {} {}[{}]",
            a.id,
            net.kinds().get(a.kind).name,
            values.join(", ")
        )
        .unwrap();
    }
    let mut wires = net.wires();
    wires.sort();
    for (a, b) in wires {
        let p = |x: &PortRef| x.to_string();
        writeln!(out, "  {} -- {}", p(&a), p(&b)).unwrap();
    }
}

/// The full three-section dump.
pub fn dump_system(rules: &RuleSet, net: &Net) -> String {
    let mut out = String::new();
    dump_kinds(&mut out, rules);
    dump_rules(&mut out, rules);
    dump_net(&mut out, net);
    out
}
