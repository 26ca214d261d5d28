//! Reference interpreter: unbounded FIFO channels, blocking waits,
//! non-blocking sends, deterministic round-robin scheduling. This is the
//! oracle the compiled nets are compared against.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::expr::Expr;
use crate::kpn::ast::{NetworkDecl, Stmt};
use crate::kpn::flat::{flatten, Instr};
use crate::value::Value;

/// Default cap on executed primitive statements, so a divergent
/// non-producing network still terminates.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefStatus {
    /// Every observed channel reached its limit.
    Satisfied,
    /// No process could make a step.
    Deadlock,
    /// The statement budget ran out first.
    Budget,
    /// A value expression failed at runtime (division by zero).
    Error(String),
}

#[derive(Debug, Clone)]
pub struct RefResult {
    /// Observed values per limited channel, truncated to the limit.
    pub outputs: BTreeMap<String, Vec<Value>>,
    pub status: RefStatus,
}

struct Proc {
    name: String,
    code: Vec<Instr>,
    pc: usize,
    env: HashMap<String, Value>,
}

enum Turn {
    /// Completed one loop iteration (or got as far as a block after
    /// making progress).
    Progress,
    Blocked,
    Failed(String),
}

pub fn run_reference(
    d: &NetworkDecl,
    limits: &BTreeMap<String, usize>,
    budget: u64,
) -> RefResult {
    let order: Vec<usize> = (0..d.processes.len()).collect();
    run_reference_with_order(d, limits, budget, &order)
}

/// Like [`run_reference`] with an explicit round-robin permutation; the
/// observed outputs must not depend on it (Kahn determinism).
pub fn run_reference_with_order(
    d: &NetworkDecl,
    limits: &BTreeMap<String, usize>,
    budget: u64,
    order: &[usize],
) -> RefResult {
    let mut channels: BTreeMap<String, VecDeque<Value>> = d
        .channels
        .iter()
        .map(|c| (c.clone(), VecDeque::new()))
        .collect();
    for (chan, vals) in &d.inits {
        if let Some(q) = channels.get_mut(chan) {
            q.extend(vals.iter().copied());
        }
    }
    let mut observed: BTreeMap<String, Vec<Value>> = limits
        .keys()
        .map(|c| (c.clone(), Vec::new()))
        .collect();

    let mut procs: Vec<Proc> = Vec::new();
    for p in &d.processes {
        let mut env: HashMap<String, Value> =
            p.locals.iter().map(|l| (l.name.clone(), l.init)).collect();
        // preludes run once, before anything else: constant sends become
        // queued tokens (after init tokens, in declaration order)
        for s in &p.prelude {
            match s {
                Stmt::Send { expr, chan, .. } => {
                    let v = match expr.eval(&env) {
                        Ok(v) => v,
                        Err(e) => {
                            return RefResult {
                                outputs: observed,
                                status: RefStatus::Error(format!(
                                    "process {} prelude: {e}",
                                    p.name
                                )),
                            }
                        }
                    };
                    if let Some(q) = channels.get_mut(chan) {
                        q.push_back(v);
                    }
                    if let Some(log) = observed.get_mut(chan) {
                        log.push(v);
                    }
                }
                Stmt::Assign { var, expr, .. } => {
                    if let Ok(v) = expr.eval(&env) {
                        env.insert(var.clone(), v);
                    }
                }
                _ => {}
            }
        }
        procs.push(Proc {
            name: p.name.clone(),
            code: flatten(&p.body),
            pc: 0,
            env,
        });
    }

    let satisfied = |observed: &BTreeMap<String, Vec<Value>>| {
        !limits.is_empty()
            && limits
                .iter()
                .all(|(c, &n)| observed.get(c).map(|v| v.len()).unwrap_or(0) >= n)
    };

    let mut steps: u64 = 0;
    let status = 'outer: loop {
        if satisfied(&observed) {
            break RefStatus::Satisfied;
        }
        let mut any_progress = false;
        for &i in order {
            if steps >= budget {
                break 'outer RefStatus::Budget;
            }
            match run_turn(&mut procs[i], &mut channels, &mut observed, budget, &mut steps) {
                Turn::Progress => any_progress = true,
                Turn::Blocked => {}
                Turn::Failed(msg) => break 'outer RefStatus::Error(msg),
            }
            if satisfied(&observed) {
                break 'outer RefStatus::Satisfied;
            }
        }
        if !any_progress {
            break RefStatus::Deadlock;
        }
    };

    let mut outputs = observed;
    for (chan, vals) in outputs.iter_mut() {
        if let Some(&n) = limits.get(chan) {
            vals.truncate(n);
        }
    }
    RefResult { outputs, status }
}

/// Runs one scheduling quantum: until the process blocks on an empty
/// channel or finishes one loop iteration.
fn run_turn(
    p: &mut Proc,
    channels: &mut BTreeMap<String, VecDeque<Value>>,
    observed: &mut BTreeMap<String, Vec<Value>>,
    budget: u64,
    steps: &mut u64,
) -> Turn {
    let mut moved = false;
    loop {
        if *steps >= budget {
            return if moved { Turn::Progress } else { Turn::Blocked };
        }
        match &p.code[p.pc] {
            Instr::Wait { var, chan } => {
                let Some(q) = channels.get_mut(chan) else {
                    return Turn::Failed(format!("process {}: no channel {chan}", p.name));
                };
                match q.pop_front() {
                    Some(v) => {
                        p.env.insert(var.clone(), v);
                        p.pc += 1;
                        *steps += 1;
                        moved = true;
                    }
                    None => return if moved { Turn::Progress } else { Turn::Blocked },
                }
            }
            Instr::Send { expr, chan } => {
                let v = match expr.eval(&p.env) {
                    Ok(v) => v,
                    Err(e) => return Turn::Failed(format!("process {}: {e}", p.name)),
                };
                if let Some(q) = channels.get_mut(chan) {
                    q.push_back(v);
                }
                if let Some(log) = observed.get_mut(chan) {
                    log.push(v);
                }
                p.pc += 1;
                *steps += 1;
                moved = true;
            }
            Instr::Assign { var, expr } => {
                let v = match expr.eval(&p.env) {
                    Ok(v) => v,
                    Err(e) => return Turn::Failed(format!("process {}: {e}", p.name)),
                };
                p.env.insert(var.clone(), v);
                p.pc += 1;
                *steps += 1;
                moved = true;
            }
            Instr::JumpIfFalse { cond, target } => {
                match cond.eval(&p.env) {
                    Ok(Value::Bool(true)) => p.pc += 1,
                    Ok(Value::Bool(false)) => p.pc = *target,
                    Ok(v) => {
                        return Turn::Failed(format!(
                            "process {}: condition evaluated to {v}",
                            p.name
                        ))
                    }
                    Err(e) => return Turn::Failed(format!("process {}: {e}", p.name)),
                }
                *steps += 1;
                moved = true;
            }
            Instr::Jump { target } => {
                p.pc = *target;
                *steps += 1;
            }
            Instr::IterEnd => {
                p.pc = 0;
                *steps += 1;
                return Turn::Progress;
            }
        }
    }
}

/// Convenience: evaluate a constant expression (used by the compiler for
/// prelude sends).
pub(crate) fn const_value(e: &Expr) -> Option<Value> {
    match e.fold() {
        Expr::Int(n) => Some(Value::Int(n)),
        Expr::Bool(b) => Some(Value::Bool(b)),
        _ => None,
    }
}
