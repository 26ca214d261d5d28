//! An interaction-net runtime with value-carrying agents, guarded rules and
//! multi-principal-port nodes, a library of prebuilt systems, and a small
//! process-network language with a reference interpreter and a compiler
//! targeting the runtime.

pub mod dot;
pub mod dump;
pub mod engine;
pub mod expr;
pub mod kpn;
pub mod net;
pub mod rules;
pub mod stdlib;
pub mod value;

pub use dot::to_dot;
pub use dump::dump_system;
pub use engine::{
    run, run_seeded, Machine, RunOptions, RunReport, RunStatus, SchedulerMode, TapSpec, TraceEntry,
};
pub use expr::{BinOp, EvalError, Expr};
pub use net::{
    isomorphic, Agent, AgentId, AgentKind, KindId, KindTable, Net, NetError, PortRef, StreamTail,
};
pub use rules::{check_ruleset, instantiate, Rule, RuleError, RuleSet, RulesetReport};
pub use stdlib::{by_name, NetArgs, SystemBundle, SYSTEM_NAMES};
pub use value::Value;
