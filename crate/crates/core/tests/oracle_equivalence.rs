//! The compiled net and the reference interpreter must agree on every
//! observed prefix, for every network in the corpus, regardless of the
//! reference's scheduling order.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use kpnet_core::engine::{run, RunOptions, TapSpec};
use kpnet_core::kpn::interp::{run_reference, run_reference_with_order, DEFAULT_BUDGET};
use kpnet_core::kpn::{compile, parse_network, validate_network, NetworkDecl};
use kpnet_core::Value;

const CORPUS: &[&str] = [
    "echo",
    "running_total",
    "plus_process",
    "altbit",
    "multiples",
]
.as_slice();

fn load(name: &str) -> NetworkDecl {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../networks")
        .join(format!("{name}.kpn"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
    let d = parse_network(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    validate_network(&d).unwrap_or_else(|e| panic!("{name}: {e:?}"));
    d
}

fn reference_prefixes(d: &NetworkDecl, limit: usize) -> BTreeMap<String, Vec<Value>> {
    let limits: BTreeMap<String, usize> =
        d.outputs.iter().map(|c| (c.clone(), limit)).collect();
    run_reference(d, &limits, DEFAULT_BUDGET).outputs
}

fn compiled_prefixes(d: &NetworkDecl, limit: usize) -> BTreeMap<String, Vec<Value>> {
    let sys = compile(d).unwrap();
    let opts = RunOptions {
        taps: d
            .outputs
            .iter()
            .map(|c| TapSpec::new(c.clone(), limit))
            .collect(),
        ..RunOptions::default()
    };
    let (report, _) = run(sys.net, Arc::clone(&sys.rules), opts).unwrap();
    d.outputs
        .iter()
        .map(|c| (c.clone(), report.captured(c).unwrap().to_vec()))
        .collect()
}

#[test]
fn corpus_agrees_with_the_reference_on_a_50_prefix() {
    for name in CORPUS {
        let d = load(name);
        let want = reference_prefixes(&d, 50);
        let got = compiled_prefixes(&d, 50);
        assert_eq!(got, want, "network {name}");
    }
}

#[test]
fn reference_outputs_are_schedule_independent() {
    for name in CORPUS {
        let d = load(name);
        let limits: BTreeMap<String, usize> =
            d.outputs.iter().map(|c| (c.clone(), 20)).collect();
        let base = run_reference(&d, &limits, DEFAULT_BUDGET).outputs;
        let n = d.processes.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.reverse();
        let rev = run_reference_with_order(&d, &limits, DEFAULT_BUDGET, &order).outputs;
        assert_eq!(rev, base, "network {name}");
    }
}

#[test]
fn compiled_prefixes_are_monotone() {
    for name in CORPUS {
        let d = load(name);
        let short = compiled_prefixes(&d, 5);
        let long = compiled_prefixes(&d, 15);
        for chan in d.outputs.iter() {
            let s = &short[chan];
            let l = &long[chan];
            let k = s.len().min(l.len());
            assert_eq!(&s[..k], &l[..k], "network {name} channel {chan}");
            assert!(s.len() <= l.len(), "network {name} channel {chan}");
        }
    }
}
