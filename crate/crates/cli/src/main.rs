//! `kpnet`: compile, run and inspect process networks and the built-in
//! interaction systems.
//!
//! Exit codes: 0 success, 1 bad input (parse/validation/argument errors),
//! 2 reduction failure (stuck pair or aborted guard), 3 the compiled net
//! disagreed with the reference interpreter.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kpnet_core::dump::dump_system;
use kpnet_core::engine::{run, RunOptions, RunStatus, SchedulerMode, TapSpec};
use kpnet_core::kpn::interp::{run_reference, DEFAULT_BUDGET};
use kpnet_core::kpn::{compile, parse_network, validate_network, CompiledSystem, NetworkDecl};
use kpnet_core::stdlib::{by_name, parse_net_args, SYSTEM_NAMES};
use kpnet_core::{to_dot, Net, RuleSet, RunReport, Value};

const EXIT_INPUT: u8 = 1;
const EXIT_REDUCTION: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(name = "kpnet", version, about = "Process networks on interaction nets")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Reduce a network and print the values observed on tapped channels
    Run(RunCmd),
    /// Compile a network and print the resulting interaction system
    Compile(CompileCmd),
    /// Run the reference interpreter; with --check, compare the compiled
    /// net against it
    Oracle(OracleCmd),
    /// Export the initial net as Graphviz
    Dot(DotCmd),
}

#[derive(Args)]
struct Source {
    /// Network source file (.kpn)
    #[arg(value_name = "FILE")]
    file: Option<PathBuf>,
    /// Use a built-in system instead of a source file
    #[arg(long, value_name = "NAME", conflicts_with = "file")]
    system: Option<String>,
    /// Parameter for a built-in system, repeatable (e.g. --arg n=7)
    #[arg(long = "arg", value_name = "K=V")]
    args: Vec<String>,
}

#[derive(Args)]
struct RunCmd {
    #[command(flatten)]
    source: Source,
    /// Observe a channel, stopping after N values (repeatable)
    #[arg(long = "tap", value_name = "CHAN=N")]
    taps: Vec<String>,
    /// Maximum number of interactions
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
    /// Use the randomized scheduler with this seed (default: FIFO)
    #[arg(long)]
    seed: Option<u64>,
    /// Write an interaction trace to this file
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Print the system (kinds, rules, initial net) before reducing
    #[arg(long)]
    dump: bool,
    /// Write output here instead of stdout
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Lines)]
    format: Format,
}

#[derive(Args)]
struct CompileCmd {
    /// Network source file (.kpn)
    #[arg(value_name = "FILE")]
    file: PathBuf,
    /// Write output here instead of stdout
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OracleCmd {
    /// Network source file (.kpn)
    #[arg(value_name = "FILE")]
    file: PathBuf,
    /// Observe a channel, stopping after N values (repeatable; defaults to
    /// every output channel at 10)
    #[arg(long = "tap", value_name = "CHAN=N")]
    taps: Vec<String>,
    /// Maximum number of reduction interactions for the compiled side
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
    /// Also compile and reduce, failing if the results differ
    #[arg(long)]
    check: bool,
    /// Write output here instead of stdout
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Lines)]
    format: Format,
}

#[derive(Args)]
struct DotCmd {
    #[command(flatten)]
    source: Source,
    /// Write output here instead of stdout
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    /// One `channel value` pair per line
    Lines,
    /// One line per channel plus a run summary
    Records,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run(c) => cmd_run(c),
        Cmd::Compile(c) => cmd_compile(c),
        Cmd::Oracle(c) => cmd_oracle(c),
        Cmd::Dot(c) => cmd_dot(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("kpnet: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// A loaded system, whatever its origin: rules plus an initial net plus the
/// channels worth observing by default.
struct Loaded {
    rules: Arc<RuleSet>,
    net: Net,
    default_taps: Vec<String>,
}

fn load(source: &Source) -> Result<Loaded, Failure> {
    match (&source.file, &source.system) {
        (Some(path), None) => {
            let d = read_network(path)?;
            let sys = compile_network(&d)?;
            let CompiledSystem {
                rules, net, outputs, ..
            } = sys;
            Ok(Loaded {
                rules,
                net,
                default_taps: outputs,
            })
        }
        (None, Some(name)) => {
            let bundle = by_name(name).map_err(|_| {
                Failure::input(format!(
                    "unknown system `{name}` (available: {})",
                    SYSTEM_NAMES.join(", ")
                ))
            })?;
            let mut kv = BTreeMap::new();
            for raw in &source.args {
                let (k, v) = raw
                    .split_once('=')
                    .ok_or_else(|| Failure::input(format!("--arg `{raw}`: expected K=V")))?;
                kv.insert(k.to_string(), v.to_string());
            }
            let args =
                parse_net_args(&kv).map_err(|e| Failure::input(format!("--arg: {e}")))?;
            let net = bundle
                .build(&args)
                .map_err(|e| Failure::input(format!("system `{name}`: {e}")))?;
            Ok(Loaded {
                rules: Arc::clone(&bundle.rules),
                net,
                default_taps: bundle.default_taps.iter().map(|s| s.to_string()).collect(),
            })
        }
        (None, None) => Err(Failure::input("pass a .kpn file or --system NAME")),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    }
}

fn read_network(path: &PathBuf) -> Result<NetworkDecl, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let d = parse_network(&text)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    validate_network(&d).map_err(|ds| {
        let mut msg = format!("{}: invalid network", path.display());
        for d in ds {
            let _ = write!(msg, "\n  {d}");
        }
        Failure::input(msg)
    })?;
    Ok(d)
}

fn compile_network(d: &NetworkDecl) -> Result<CompiledSystem, Failure> {
    compile(d).map_err(|e| Failure::input(e.to_string()))
}

fn parse_taps(raw: &[String], fallback: &[String]) -> Result<Vec<TapSpec>, Failure> {
    if raw.is_empty() {
        return Ok(fallback.iter().map(|c| TapSpec::new(c.clone(), 10)).collect());
    }
    raw.iter()
        .map(|spec| {
            let (chan, n) = spec
                .split_once('=')
                .ok_or_else(|| Failure::input(format!("--tap `{spec}`: expected CHAN=N")))?;
            let limit: usize = n
                .parse()
                .map_err(|_| Failure::input(format!("--tap `{spec}`: bad count `{n}`")))?;
            Ok(TapSpec::new(chan, limit))
        })
        .collect()
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn render_report(report: &RunReport, format: Format) -> String {
    let mut s = String::new();
    match format {
        Format::Lines => {
            for tap in &report.taps {
                for v in &tap.captured {
                    let _ = writeln!(s, "{} {v}", tap.channel);
                }
            }
        }
        Format::Records => {
            for tap in &report.taps {
                let values: Vec<String> =
                    tap.captured.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(s, "{}: [{}]", tap.channel, values.join(", "));
            }
            let _ = writeln!(
                s,
                "interactions={} observations={} status={}",
                report.interactions,
                report.observer_interactions,
                status_word(&report.status)
            );
        }
    }
    s
}

fn status_word(status: &RunStatus) -> &'static str {
    match status {
        RunStatus::NormalForm => "normal-form",
        RunStatus::TapLimitsReached => "taps-filled",
        RunStatus::BudgetExhausted => "budget-exhausted",
        RunStatus::Stuck(_) => "stuck",
        RunStatus::Aborted(_) => "aborted",
    }
}

fn cmd_run(c: RunCmd) -> Result<(), Failure> {
    let loaded = load(&c.source)?;
    let taps = parse_taps(&c.taps, &loaded.default_taps)?;
    let opts = RunOptions {
        mode: match c.seed {
            Some(seed) => SchedulerMode::Seeded(seed),
            None => SchedulerMode::Fifo,
        },
        budget: c.budget,
        taps,
        trace: c.trace.is_some(),
    };

    let mut text = String::new();
    if c.dump {
        text.push_str(&dump_system(&loaded.rules, &loaded.net));
    }
    let (report, _net) = run(loaded.net, Arc::clone(&loaded.rules), opts)
        .map_err(|e| Failure::input(e.to_string()))?;

    if let Some(path) = &c.trace {
        let mut lines = String::new();
        for entry in report.trace.as_deref().unwrap_or(&[]) {
            let _ = writeln!(lines, "{}", entry.render());
        }
        std::fs::write(path, lines)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    }

    text.push_str(&render_report(&report, c.format));
    emit(&c.output, &text)?;

    match &report.status {
        RunStatus::Stuck(ids) => Err(Failure {
            code: EXIT_REDUCTION,
            message: format!("reduction stuck at agents {ids:?}"),
        }),
        RunStatus::Aborted(msg) => Err(Failure {
            code: EXIT_REDUCTION,
            message: format!("reduction aborted: {msg}"),
        }),
        _ => Ok(()),
    }
}

fn cmd_compile(c: CompileCmd) -> Result<(), Failure> {
    let d = read_network(&c.file)?;
    let sys = compile_network(&d)?;
    emit(&c.output, &dump_system(&sys.rules, &sys.net))
}

fn cmd_oracle(c: OracleCmd) -> Result<(), Failure> {
    let d = read_network(&c.file)?;
    let outputs: Vec<String> = d.outputs.clone();
    let taps = parse_taps(&c.taps, &outputs)?;
    let limits: BTreeMap<String, usize> =
        taps.iter().map(|t| (t.channel.clone(), t.limit)).collect();
    let reference = run_reference(&d, &limits, DEFAULT_BUDGET);

    let mut text = String::new();
    for (chan, values) in &reference.outputs {
        match c.format {
            Format::Lines => {
                for v in values {
                    let _ = writeln!(text, "{chan} {v}");
                }
            }
            Format::Records => {
                let rendered: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(text, "{chan}: [{}]", rendered.join(", "));
            }
        }
    }

    let mut mismatches = Vec::new();
    if c.check {
        let sys = compile_network(&d)?;
        let opts = RunOptions {
            budget: c.budget,
            taps: taps.clone(),
            ..RunOptions::default()
        };
        let (report, _) = run(sys.net, Arc::clone(&sys.rules), opts)
            .map_err(|e| Failure::input(e.to_string()))?;
        for t in &taps {
            let compiled: &[Value] = report.captured(&t.channel).unwrap_or(&[]);
            let oracle = reference
                .outputs
                .get(&t.channel)
                .map(|v| v.as_slice())
                .unwrap_or(&[]);
            if compiled != oracle {
                mismatches.push(format!(
                    "channel {}: compiled {compiled:?} vs oracle {oracle:?}",
                    t.channel
                ));
            }
        }
        if mismatches.is_empty() {
            let _ = writeln!(text, "check: compiled net matches the oracle");
        }
    }

    emit(&c.output, &text)?;
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_MISMATCH,
            message: mismatches.join("\n"),
        })
    }
}

fn cmd_dot(c: DotCmd) -> Result<(), Failure> {
    let loaded = load(&c.source)?;
    emit(&c.output, &to_dot(&loaded.net))
}
