//! Syntax trees for the process-network language.

use std::collections::BTreeMap;

use crate::expr::Expr;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Int,
    Bool,
}

impl std::fmt::Display for Ty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ty::Int => write!(f, "int"),
            Ty::Bool => write!(f, "bool"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalDecl {
    pub name: String,
    pub ty: Ty,
    pub init: Value,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    /// `send <expr> on <chan>`
    Send {
        expr: Expr,
        chan: String,
        line: usize,
    },
    /// `<var> = wait(<chan>)`
    Wait {
        var: String,
        chan: String,
        line: usize,
    },
    /// `<var> = <expr>`
    Assign {
        var: String,
        expr: Expr,
        line: usize,
    },
    /// `if <expr> then … [else …] end`
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
        line: usize,
    },
}

impl Stmt {
    pub fn line(&self) -> usize {
        match self {
            Stmt::Send { line, .. }
            | Stmt::Wait { line, .. }
            | Stmt::Assign { line, .. }
            | Stmt::If { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessDecl {
    pub name: String,
    pub reads: Vec<String>,
    pub writes: Vec<String>,
    pub locals: Vec<LocalDecl>,
    /// Statements before `repeat`, executed once.
    pub prelude: Vec<Stmt>,
    /// The `repeat … end` body.
    pub body: Vec<Stmt>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkDecl {
    pub name: String,
    pub channels: Vec<String>,
    pub inits: BTreeMap<String, Vec<Value>>,
    pub outputs: Vec<String>,
    pub processes: Vec<ProcessDecl>,
}

impl NetworkDecl {
    pub fn process(&self, name: &str) -> Option<&ProcessDecl> {
        self.processes.iter().find(|p| p.name == name)
    }

    pub fn writer_of(&self, chan: &str) -> Option<&ProcessDecl> {
        self.processes
            .iter()
            .find(|p| p.writes.iter().any(|c| c == chan))
    }

    pub fn reader_of(&self, chan: &str) -> Option<&ProcessDecl> {
        self.processes
            .iter()
            .find(|p| p.reads.iter().any(|c| c == chan))
    }
}
