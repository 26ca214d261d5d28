//! One-step confluence: firing order never changes the result. Checked as
//! the diamond property on randomly wired nets and on mid-reduction states
//! of the compiled corpus, and end-to-end by comparing randomly scheduled
//! runs against the FIFO scheduler.

use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kpnet_core::engine::{find_redexes, run_seeded, Machine, StepOutcome};
use kpnet_core::kpn::{compile, parse_network, CompiledSystem};
use kpnet_core::{
    isomorphic, run, AgentKind, Expr, KindTable, Net, PortRef, Rule, RuleSet, RunOptions, TapSpec,
    Value,
};
use kpnet_core::rules::{res, tpl};

/// A small total system: unary `inc` and fan-out `delta` over number
/// streams. Every principal pairing that has a rule also has exactly one,
/// with no guard, so any two coexisting redexes commute.
fn arith_rules() -> Arc<RuleSet> {
    let mut kt = KindTable::new();
    kt.register(AgentKind::new("num", 2, vec![0], 1)).unwrap();
    kt.register(AgentKind::new("nil", 1, vec![0], 0)).unwrap();
    kt.register(AgentKind::new("inc", 2, vec![0], 0)).unwrap();
    kt.register(AgentKind::new("delta", 3, vec![0], 0)).unwrap();
    let kinds = Arc::new(kt);
    let mut rules = RuleSet::new(Arc::clone(&kinds));
    rules
        .define(
            Rule::builder("inc/num")
                .anchor("inc", &[], &[(1, "out")])
                .partner("num", &["x"], &[(1, "t")])
                .agent("num", vec![Expr::add(Expr::var("x"), Expr::Int(1))])
                .agent("inc", vec![])
                .wire(tpl(0, 0), res("out"))
                .wire(tpl(0, 1), tpl(1, 1))
                .wire(tpl(1, 0), res("t"))
                .build(&kinds)
                .unwrap(),
        )
        .unwrap();
    rules
        .define(
            Rule::builder("inc/nil")
                .anchor("inc", &[], &[(1, "out")])
                .partner("nil", &[], &[])
                .agent("nil", vec![])
                .wire(tpl(0, 0), res("out"))
                .build(&kinds)
                .unwrap(),
        )
        .unwrap();
    rules
        .define(
            Rule::builder("delta/num")
                .anchor("delta", &[], &[(1, "o1"), (2, "o2")])
                .partner("num", &["x"], &[(1, "t")])
                .agent("num", vec![Expr::var("x")])
                .agent("num", vec![Expr::var("x")])
                .agent("delta", vec![])
                .wire(tpl(0, 0), res("o1"))
                .wire(tpl(1, 0), res("o2"))
                .wire(tpl(2, 0), res("t"))
                .wire(tpl(2, 1), tpl(0, 1))
                .wire(tpl(2, 2), tpl(1, 1))
                .build(&kinds)
                .unwrap(),
        )
        .unwrap();
    rules
        .define(
            Rule::builder("delta/nil")
                .anchor("delta", &[], &[(1, "o1"), (2, "o2")])
                .partner("nil", &[], &[])
                .agent("nil", vec![])
                .agent("nil", vec![])
                .wire(tpl(0, 0), res("o1"))
                .wire(tpl(1, 0), res("o2"))
                .build(&kinds)
                .unwrap(),
        )
        .unwrap();
    Arc::new(rules)
}

/// A random closed net: a handful of agents, every port wired by a random
/// perfect matching.
fn random_net(rules: &RuleSet, rng: &mut ChaCha8Rng) -> Net {
    let kinds = rules.kinds_arc();
    loop {
        let mut net = Net::new(Arc::clone(&kinds));
        let n_num = rng.gen_range(2..=5);
        let n_nil = rng.gen_range(0..=2);
        let n_inc = rng.gen_range(1..=3);
        let n_delta = rng.gen_range(0..=2);
        let mut ports: Vec<PortRef> = Vec::new();
        let add = |net: &mut Net, kind: &str, values: Vec<Value>, arity: usize,
                       ports: &mut Vec<PortRef>| {
            let id = net.add_agent_by_name(kind, values).unwrap();
            for p in 0..arity {
                ports.push(PortRef::Agent(id, p));
            }
        };
        for _ in 0..n_num {
            let v = rng.gen_range(-9..=9);
            add(&mut net, "num", vec![Value::Int(v)], 2, &mut ports);
        }
        for _ in 0..n_nil {
            add(&mut net, "nil", vec![], 1, &mut ports);
        }
        for _ in 0..n_inc {
            add(&mut net, "inc", vec![], 2, &mut ports);
        }
        for _ in 0..n_delta {
            add(&mut net, "delta", vec![], 3, &mut ports);
        }
        if ports.len() % 2 != 0 {
            // odd port count cannot form a perfect matching; leave the last
            // port on a free interface
            net.connect(ports.pop().unwrap(), PortRef::iface("spare"))
                .unwrap();
        }
        // Fisher–Yates, then pair consecutive entries
        for i in (1..ports.len()).rev() {
            let j = rng.gen_range(0..=i);
            ports.swap(i, j);
        }
        for pair in ports.chunks(2) {
            net.connect(pair[0].clone(), pair[1].clone()).unwrap();
        }
        assert!(net.validate().is_ok());
        if find_redexes(&net, rules).len() >= 2 {
            return net;
        }
    }
}

fn assert_diamond(net: &Net, rules: &Arc<RuleSet>, label: &str) {
    let redexes = find_redexes(net, rules);
    assert!(redexes.len() >= 2, "{label}: wanted two redexes");
    let (r1, r2) = (redexes[0].clone(), redexes[1].clone());
    let overlap = r1
        .participants()
        .iter()
        .any(|a| r2.participants().contains(a));
    assert!(!overlap, "{label}: redexes share an agent");

    let fire_both = |first, second| {
        let mut m = Machine::new(net.clone(), Arc::clone(rules), &RunOptions::default()).unwrap();
        for r in [first, second] {
            match m.fire_redex(r) {
                StepOutcome::Fired(_) => {}
                _ => panic!("{label}: firing failed"),
            }
        }
        m.into_net()
    };
    let ab = fire_both(r1.clone(), r2.clone());
    let ba = fire_both(r2, r1);
    assert!(isomorphic(&ab, &ba), "{label}: orders diverge");
}

#[test]
fn diamond_property_on_200_random_nets() {
    let rules = arith_rules();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1f2e3d4c);
    for i in 0..200 {
        let net = random_net(&rules, &mut rng);
        assert!(net.agent_count() <= 12);
        assert_diamond(&net, &rules, &format!("random net {i}"));
    }
}

fn load_compiled(name: &str) -> CompiledSystem {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../networks")
        .join(format!("{name}.kpn"));
    let text = std::fs::read_to_string(&path).unwrap();
    compile(&parse_network(&text).unwrap()).unwrap()
}

#[test]
fn diamond_property_on_corpus_reduction_states() {
    // single-process networks reduce strictly sequentially (one redex at a
    // time), so only the fan-out networks can exhibit a diamond
    for (name, must_find) in [
        ("altbit", true),
        ("plus_process", false),
        ("multiples", false),
        ("running_total", false),
    ] {
        let sys = load_compiled(name);
        let mut m =
            Machine::new(sys.net.clone(), Arc::clone(&sys.rules), &RunOptions::default()).unwrap();
        let mut checked = false;
        for _ in 0..60 {
            let net = m.net().clone();
            if find_redexes(&net, &sys.rules).len() >= 2 {
                assert_diamond(&net, &sys.rules, name);
                checked = true;
                break;
            }
            if !matches!(m.step(), StepOutcome::Fired(_)) {
                break;
            }
        }
        assert!(
            checked || !must_find,
            "{name}: no state with two redexes in 60 steps"
        );
    }
}

#[test]
fn seeded_schedules_match_fifo_on_the_corpus() {
    for name in ["altbit", "plus_process", "multiples", "running_total", "echo"] {
        let sys = load_compiled(name);
        let taps: Vec<TapSpec> = sys
            .outputs
            .iter()
            .map(|c| TapSpec::new(c.clone(), 12))
            .collect();
        let opts = RunOptions {
            taps: taps.clone(),
            ..RunOptions::default()
        };
        let (fifo, _) = run(sys.net.clone(), Arc::clone(&sys.rules), opts).unwrap();
        for seed in 0..10u64 {
            let (seeded, _) = run_seeded(
                sys.net.clone(),
                Arc::clone(&sys.rules),
                seed,
                1_000_000,
                taps.clone(),
            )
            .unwrap();
            for t in &fifo.taps {
                assert_eq!(
                    seeded.captured(&t.channel),
                    Some(t.captured.as_slice()),
                    "{name} seed {seed} channel {}",
                    t.channel
                );
            }
        }
    }
}
