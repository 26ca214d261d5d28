//! The acceptance gate. Each test checks one shipping criterion end to end
//! and prints a single pass line, so `cargo test --test acceptance -- --nocapture`
//! reads as a checklist.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kpnet_core::engine::{find_redexes, Machine, StepOutcome};
use kpnet_core::kpn::interp::{run_reference, DEFAULT_BUDGET};
use kpnet_core::kpn::{compile, parse_network, validate_network, NetworkDecl};
use kpnet_core::rules::{res, tpl};
use kpnet_core::{
    by_name, isomorphic, run, run_seeded, AgentKind, Expr, KindTable, Net, NetArgs, PortRef, Rule,
    RuleSet, RunOptions, RunStatus, StreamTail, TapSpec, Value,
};

fn networks_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../networks")
}

fn load(name: &str) -> NetworkDecl {
    let path = networks_dir().join(format!("{name}.kpn"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
    let d = parse_network(&text).unwrap();
    validate_network(&d).unwrap_or_else(|e| panic!("{name}: {e:?}"));
    d
}

fn tap_ints(system: &str, args: &NetArgs, channel: &str, limit: usize) -> (Vec<i64>, u64) {
    let bundle = by_name(system).unwrap();
    let net = bundle.build(args).unwrap();
    let opts = RunOptions {
        taps: vec![TapSpec::new(channel, limit)],
        ..RunOptions::default()
    };
    let (report, _) = run(net, Arc::clone(&bundle.rules), opts).unwrap();
    let got = report
        .captured(channel)
        .unwrap()
        .iter()
        .map(|v| v.as_int().unwrap())
        .collect();
    (got, report.interactions)
}

/// Mapping a three-element stream takes one interaction per cell plus one
/// for the terminator, and the normal form is the incremented stream.
#[test]
fn criterion_01_inc_normal_form_and_count() {
    let bundle = by_name("inc").unwrap();
    let net = bundle.build(&NetArgs::default()).unwrap();
    let (report, result) = run(net, Arc::clone(&bundle.rules), RunOptions::default()).unwrap();
    assert_eq!(report.status, RunStatus::NormalForm);
    assert_eq!(report.interactions, 4);

    let mut want = Net::new(Arc::clone(&bundle.kinds));
    let num = bundle.kinds.require("num").unwrap();
    let nil = bundle.kinds.require("nil").unwrap();
    want.mk_stream(
        num,
        &[Value::Int(2), Value::Int(3), Value::Int(4)],
        PortRef::iface("out"),
        StreamTail::Nil(nil),
    )
    .unwrap();
    assert!(isomorphic(&result, &want), "normal form is not [2, 3, 4]");
    println!("criterion 1: pass — inc on [1, 2, 3] gives [2, 3, 4] in exactly 4 interactions");
}

/// The cyclic generator costs exactly two interactions per emitted number,
/// at every prefix length up to a thousand.
#[test]
fn criterion_02_ints_costs_two_interactions_per_value() {
    let (first, n) = tap_ints("ints", &NetArgs::default(), "out", 3);
    assert_eq!(first, vec![1, 2, 3]);
    assert_eq!(n, 6);
    for k in [1usize, 10, 100, 1000] {
        let (got, n) = tap_ints("ints", &NetArgs::default(), "out", k);
        assert_eq!(got.len(), k);
        assert_eq!(n, 2 * k as u64, "prefix of {k} values");
    }
    println!("criterion 2: pass — ints(1) emits 1, 2, 3 in 6 interactions; 2 per value up to 1000");
}

/// Both alternating-bit variants — the hand-built bundle and the compiled
/// source — produce (0, 1)* on X, and the compiled system has the expected
/// shape: six rules, two states each for f and g, one each for h0 and h1.
#[test]
fn criterion_03_alternating_bit_bundle_and_compiled() {
    let k = 500usize;
    let want: Vec<i64> = (0..2 * k).map(|i| (i % 2) as i64).collect();

    let (bundle_out, _) = tap_ints("altbit", &NetArgs::default(), "X", 2 * k);
    assert_eq!(bundle_out, want, "stdlib bundle");

    let sys = compile(&load("altbit")).unwrap();
    let opts = RunOptions {
        taps: vec![TapSpec::new("X", 2 * k)],
        ..RunOptions::default()
    };
    let (report, _) = run(sys.net.clone(), Arc::clone(&sys.rules), opts).unwrap();
    let compiled_out: Vec<i64> = report
        .captured("X")
        .unwrap()
        .iter()
        .map(|v| v.as_int().unwrap())
        .collect();
    assert_eq!(compiled_out, want, "compiled source");

    assert_eq!(sys.rules.len(), 6);
    let states = |p: &str| {
        sys.kinds
            .iter()
            .filter(|(_, kind)| kind.name == p || kind.name.starts_with(&format!("{p}.")))
            .count()
    };
    assert_eq!(states("f"), 2);
    assert_eq!(states("g"), 2);
    assert_eq!(states("h0"), 1);
    assert_eq!(states("h1"), 1);
    println!("criterion 3: pass — alternating bit yields (0, 1)^500 both ways; compiled shape is 6 rules with states f:2 g:2 h0:1 h1:1");
}

/// The multiples net counts n, 2n, 3n, … including the degenerate n = 0.
#[test]
fn criterion_04_multiples_of_n() {
    for n in [0i64, 1, 3, 7] {
        let args = NetArgs {
            n: Some(n),
            ..NetArgs::default()
        };
        let (got, _) = tap_ints("multiples", &args, "out", 5);
        assert_eq!(got, vec![n, 2 * n, 3 * n, 4 * n, 5 * n], "n = {n}");
    }
    println!("criterion 4: pass — multiples emits n, 2n, …, 5n for n in 0, 1, 3, 7");
}

/// The factorial net seeded with n = 1, m = 1 streams k! for k = 1..8.
#[test]
fn criterion_05_factorials() {
    let args = NetArgs {
        n: Some(1),
        m: Some(1),
        ..NetArgs::default()
    };
    let (got, _) = tap_ints("factorial", &args, "out", 8);
    let mut fact = 1i64;
    let want: Vec<i64> = (1..=8)
        .map(|k| {
            fact *= k;
            fact
        })
        .collect();
    assert_eq!(got, want);
    println!("criterion 5: pass — factorial net emits 1!, 2!, …, 8!");
}

/// Fibonacci from two agent shapes and two rules (plus the number cell),
/// satisfying the recurrence and the frozen opening.
#[test]
fn criterion_06_fibonacci_shape_and_prefix() {
    let bundle = by_name("fib").unwrap();
    assert_eq!(bundle.kinds.len(), 3);
    assert_eq!(bundle.rules.len(), 2);
    let (got, _) = tap_ints("fib", &NetArgs::default(), "out", 20);
    assert_eq!(&got[..10], &[1, 2, 3, 5, 8, 13, 21, 34, 55, 89]);
    for w in got.windows(3) {
        assert_eq!(w[2], w[1] + w[0]);
    }
    println!("criterion 6: pass — fib uses 3 kinds and 2 rules; 20 outputs satisfy the recurrence");
}

/// Every corpus network: the compiled net and the reference interpreter see
/// the same 50-value prefix on every output channel.
#[test]
fn criterion_07_oracle_equivalence_on_the_corpus() {
    for name in ["echo", "running_total", "plus_process", "altbit", "multiples"] {
        let d = load(name);
        let limits: BTreeMap<String, usize> =
            d.outputs.iter().map(|c| (c.clone(), 50)).collect();
        let oracle = run_reference(&d, &limits, DEFAULT_BUDGET).outputs;

        let sys = compile(&d).unwrap();
        let opts = RunOptions {
            taps: d.outputs.iter().map(|c| TapSpec::new(c.clone(), 50)).collect(),
            ..RunOptions::default()
        };
        let (report, _) = run(sys.net, Arc::clone(&sys.rules), opts).unwrap();
        for chan in &d.outputs {
            assert_eq!(
                report.captured(chan).unwrap(),
                oracle[chan].as_slice(),
                "{name} channel {chan}"
            );
        }
    }
    println!("criterion 7: pass — compiled nets match the reference on 50-value prefixes");
}

/// A total toy system for the random diamond check: every rule-bearing pair
/// has exactly one unguarded rule, so disjoint redexes always commute.
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

fn random_net(rules: &RuleSet, rng: &mut ChaCha8Rng) -> Net {
    let kinds = rules.kinds_arc();
    loop {
        let mut net = Net::new(Arc::clone(&kinds));
        let mut ports: Vec<PortRef> = Vec::new();
        for (kind, lo, hi, arity, has_value) in [
            ("num", 2, 5, 2, true),
            ("nil", 0, 2, 1, false),
            ("inc", 1, 3, 2, false),
            ("delta", 0, 2, 3, false),
        ] {
            for _ in 0..rng.gen_range(lo..=hi) {
                let values = if has_value {
                    vec![Value::Int(rng.gen_range(-9..=9))]
                } else {
                    vec![]
                };
                let id = net.add_agent_by_name(kind, values).unwrap();
                for p in 0..arity {
                    ports.push(PortRef::Agent(id, p));
                }
            }
        }
        if ports.len() % 2 != 0 {
            net.connect(ports.pop().unwrap(), PortRef::iface("spare"))
                .unwrap();
        }
        for i in (1..ports.len()).rev() {
            let j = rng.gen_range(0..=i);
            ports.swap(i, j);
        }
        for pair in ports.chunks(2) {
            net.connect(pair[0].clone(), pair[1].clone()).unwrap();
        }
        if find_redexes(&net, rules).len() >= 2 {
            return net;
        }
    }
}

fn assert_diamond(net: &Net, rules: &Arc<RuleSet>, label: &str) {
    let redexes = find_redexes(net, rules);
    let (r1, r2) = (redexes[0].clone(), redexes[1].clone());
    assert!(
        !r1.participants().iter().any(|a| r2.participants().contains(a)),
        "{label}: redexes share an agent"
    );
    let fire_both = |first, second| {
        let mut m = Machine::new(net.clone(), Arc::clone(rules), &RunOptions::default()).unwrap();
        for r in [first, second] {
            assert!(matches!(m.fire_redex(r), StepOutcome::Fired(_)), "{label}");
        }
        m.into_net()
    };
    let ab = fire_both(r1.clone(), r2.clone());
    let ba = fire_both(r2, r1);
    assert!(isomorphic(&ab, &ba), "{label}: firing orders diverge");
}

/// Order never matters: the diamond holds on 200 random small nets with two
/// redexes, and ten random schedules of every corpus system reproduce the
/// fair scheduler's tap sequences exactly.
#[test]
fn criterion_08_confluence_and_schedule_independence() {
    let rules = arith_rules();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
    for i in 0..200 {
        let net = random_net(&rules, &mut rng);
        assert!(net.agent_count() <= 12);
        assert_diamond(&net, &rules, &format!("random net {i}"));
    }

    for name in ["echo", "running_total", "plus_process", "altbit", "multiples"] {
        let sys = compile(&load(name)).unwrap();
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
    println!("criterion 8: pass — diamond on 200 random nets; 10 seeded runs per corpus net match fifo");
}

/// Each classic single-fault mutation is rejected with a diagnostic that
/// names the offending channel, process or variable.
#[test]
fn criterion_09_faulty_networks_are_rejected_by_name() {
    let cases: &[(&str, &str, &[&str])] = &[
        (
            "duplicate writer",
            "network dup\n  channels U, W, V\n  init U = [1]\n  init W = [2]\n  output V\n  \
             process copy reads U writes V\n    repeat\n      x = wait(U)\n      send x on V\n    end\n  end\n  \
             process copy2 reads W writes V\n    repeat\n      x = wait(W)\n      send x on V\n    end\n  end\nend\n",
            &["channel V", "2 writers", "copy", "copy2"],
        ),
        (
            "waitless loop",
            "network spin\n  channels M\n  output M\n  \
             process gen reads writes M\n    int acc = 0\n    repeat\n      acc = acc + 1\n      send acc on M\n    end\n  end\nend\n",
            &["process gen", "no wait on loop path"],
        ),
        (
            "type error",
            "network badty\n  channels U, V\n  init U = [1]\n  output V\n  \
             process total reads U writes V\n    bool acc = true\n    repeat\n      x = wait(U)\n      acc = acc + x\n      send acc on V\n    end\n  end\nend\n",
            &["process total", "`acc`"],
        ),
        (
            "missing init",
            "network noinit\n  channels U, V\n  output V\n  \
             process copy reads U writes V\n    repeat\n      x = wait(U)\n      send x on V\n    end\n  end\nend\n",
            &["channel U", "no writer and no init tokens"],
        ),
    ];
    for (fault, src, needles) in cases {
        let d = parse_network(src).unwrap_or_else(|e| panic!("{fault}: {e}"));
        let diags = validate_network(&d).expect_err(fault);
        let joined = diags
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("\n");
        for needle in *needles {
            assert!(joined.contains(needle), "{fault}: `{needle}` not in:\n{joined}");
        }
    }
    println!("criterion 9: pass — all four fault classes rejected, naming the offending entity");
}

/// Two identical CLI invocations are byte-identical, interaction counts
/// included.
#[test]
fn criterion_10_runs_are_reproducible() {
    let net_path = networks_dir().join("altbit.kpn");
    let invoke = || {
        Command::new(env!("CARGO_BIN_EXE_kpnet"))
            .args([
                "run",
                net_path.to_str().unwrap(),
                "--tap",
                "X=20",
                "--format",
                "records",
            ])
            .output()
            .unwrap()
    };
    let (a, b) = (invoke(), invoke());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.status.code(), b.status.code());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stderr, b.stderr);
    let text = String::from_utf8_lossy(&a.stdout);
    assert!(text.contains("interactions="), "counts missing:\n{text}");
    println!("criterion 10: pass — repeated runs are byte-identical, counts included");
}
