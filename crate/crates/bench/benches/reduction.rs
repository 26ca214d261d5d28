use criterion::{criterion_group, criterion_main, Criterion};
use kpnet_core::{run, NetArgs, RunOptions, TapSpec};

fn bench_systems(c: &mut Criterion) {
    for (system, taps) in [("ints", 200usize), ("fib", 50), ("multiples", 200)] {
        let bundle = kpnet_core::by_name(system).unwrap();
        c.bench_function(&format!("{system}/tap{taps}"), |b| {
            b.iter(|| {
                let net = bundle.build(&NetArgs::default()).unwrap();
                let opts = RunOptions {
                    taps: vec![TapSpec::new("out", taps)],
                    ..RunOptions::default()
                };
                run(net, std::sync::Arc::clone(&bundle.rules), opts).unwrap()
            })
        });
    }
}

criterion_group!(benches, bench_systems);
criterion_main!(benches);
