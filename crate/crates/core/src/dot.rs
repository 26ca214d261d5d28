//! Graphviz export of a net. Agents are ellipses labelled with kind and
//! values, interface ports are boxes, and wires touching a principal port
//! are drawn bold so active pairs stand out.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::net::{Net, PortRef};

pub fn to_dot(net: &Net) -> String {
    let mut out = String::new();
    writeln!(out, "graph net {{").unwrap();
    writeln!(out, "  node [fontname=\"monospace\"];").unwrap();

    for a in net.agents() {
        let kind = net.kinds().get(a.kind);
        let label = if a.values.is_empty() {
            kind.name.clone()
        } else {
            let values: Vec<String> = a.values.iter().map(|v| v.to_string()).collect();
            format!("{}({})", kind.name, values.join(", "))
        };
        writeln!(out, "  {} [label=\"{}\"];", a.id, escape(&label)).unwrap();
    }

    // interface ports, named and boxed, in name order
    let mut iface_ids: BTreeMap<String, String> = BTreeMap::new();
    for (i, name) in net.interface().iter().enumerate() {
        let id = format!("iface{i}");
        writeln!(
            out,
            "  {id} [shape=box, label=\"{}\"];",
            escape(name)
        )
        .unwrap();
        iface_ids.insert(name.clone(), id);
    }

    let is_principal = |p: &PortRef| match p {
        PortRef::Agent(id, q) => net
            .kind_of(*id)
            .map(|k| k.principal_ports.contains(q))
            .unwrap_or(false),
        PortRef::Iface(_) => false,
    };
    let node = |p: &PortRef| match p {
        PortRef::Agent(id, _) => id.to_string(),
        PortRef::Iface(name) => iface_ids[name].clone(),
    };
    let port_label = |p: &PortRef| match p {
        PortRef::Agent(_, q) => q.to_string(),
        PortRef::Iface(_) => String::new(),
    };

    let mut wires = net.wires();
    wires.sort();
    for (a, b) in wires {
        let mut attrs = vec![format!(
            "taillabel=\"{}\", headlabel=\"{}\"",
            port_label(&a),
            port_label(&b)
        )];
        if is_principal(&a) && is_principal(&b) {
            attrs.push("style=bold, color=red".to_string());
        } else if is_principal(&a) || is_principal(&b) {
            attrs.push("style=bold".to_string());
        }
        writeln!(out, "  {} -- {} [{}];", node(&a), node(&b), attrs.join(", ")).unwrap();
    }
    writeln!(out, "}}").unwrap();
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stdlib::{by_name, parse_net_args};
    use std::collections::BTreeMap;

    #[test]
    fn dot_output_is_deterministic_and_marks_active_pairs() {
        let bundle = by_name("inc").unwrap();
        let args = parse_net_args(&BTreeMap::new()).unwrap();
        let net = bundle.build(&args).unwrap();
        let a = to_dot(&net);
        let b = to_dot(&net);
        assert_eq!(a, b);
        assert!(a.starts_with("graph net {"));
        // inc starts with exactly one active pair
        assert_eq!(a.matches("color=red").count(), 1);
        assert!(a.contains("shape=box"));
    }
}
