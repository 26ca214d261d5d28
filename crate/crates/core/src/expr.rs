//! The expression language shared by rule guards, rule value templates and
//! the process DSL: integer arithmetic, comparisons, boolean connectives.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "div",
            BinOp::Mod => "mod",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }

    fn is_arith(&self) -> bool {
        matches!(
            self,
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod
        )
    }

    fn is_cmp(&self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(String),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivByZero,
    #[error("type error: {0}")]
    Type(String),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Add, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Mul, a, b)
    }

    /// Evaluates under an environment. Integer arithmetic wraps; `div`/`mod`
    /// by zero is the one failure mode of a well-typed expression.
    pub fn eval(&self, env: &HashMap<String, Value>) -> Result<Value, EvalError> {
        match self {
            Expr::Int(n) => Ok(Value::Int(*n)),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Var(name) => env
                .get(name)
                .copied()
                .ok_or_else(|| EvalError::Unbound(name.clone())),
            Expr::Not(e) => match e.eval(env)? {
                Value::Bool(b) => Ok(Value::Bool(!b)),
                v => Err(EvalError::Type(format!("not applied to {}", v.type_name()))),
            },
            Expr::Bin(op, a, b) => {
                let va = a.eval(env)?;
                let vb = b.eval(env)?;
                eval_bin(*op, va, vb)
            }
        }
    }

    /// Collects the variable names referenced by this expression.
    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Int(_) | Expr::Bool(_) => {}
            Expr::Var(name) => {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
            Expr::Not(e) => e.vars(out),
            Expr::Bin(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }

    pub fn var_list(&self) -> Vec<String> {
        let mut v = Vec::new();
        self.vars(&mut v);
        v
    }

    /// Replaces variables by the expressions bound in `subst`, leaving
    /// unknown variables alone.
    pub fn subst(&self, subst: &HashMap<String, Expr>) -> Expr {
        match self {
            Expr::Int(_) | Expr::Bool(_) => self.clone(),
            Expr::Var(name) => subst.get(name).cloned().unwrap_or_else(|| self.clone()),
            Expr::Not(e) => Expr::Not(Box::new(e.subst(subst))),
            Expr::Bin(op, a, b) => Expr::bin(*op, a.subst(subst), b.subst(subst)),
        }
    }

    /// Constant folding. Does not fold `div`/`mod` (their failure must
    /// surface at evaluation time, with rule context attached).
    pub fn fold(&self) -> Expr {
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) => self.clone(),
            Expr::Not(e) => match e.fold() {
                Expr::Bool(b) => Expr::Bool(!b),
                e => Expr::Not(Box::new(e)),
            },
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.fold(), b.fold());
                if *op == BinOp::Div || *op == BinOp::Mod {
                    return Expr::bin(*op, a, b);
                }
                if let (Some(va), Some(vb)) = (as_const(&a), as_const(&b)) {
                    if let Ok(v) = eval_bin(*op, va, vb) {
                        return match v {
                            Value::Int(n) => Expr::Int(n),
                            Value::Bool(b) => Expr::Bool(b),
                        };
                    }
                }
                // short-circuit folds when one side is a constant boolean
                match (op, &a, &b) {
                    (BinOp::And, Expr::Bool(false), _) | (BinOp::And, _, Expr::Bool(false)) => {
                        Expr::Bool(false)
                    }
                    (BinOp::And, Expr::Bool(true), other)
                    | (BinOp::And, other, Expr::Bool(true)) => other.clone(),
                    (BinOp::Or, Expr::Bool(true), _) | (BinOp::Or, _, Expr::Bool(true)) => {
                        Expr::Bool(true)
                    }
                    (BinOp::Or, Expr::Bool(false), other)
                    | (BinOp::Or, other, Expr::Bool(false)) => other.clone(),
                    _ => Expr::bin(*op, a, b),
                }
            }
        }
    }

    /// The literals this expression compares variables against, used to seed
    /// guard enumeration.
    pub fn int_literals(&self, out: &mut Vec<i64>) {
        match self {
            Expr::Int(n) => {
                if !out.contains(n) {
                    out.push(*n);
                }
            }
            Expr::Bool(_) | Expr::Var(_) => {}
            Expr::Not(e) => e.int_literals(out),
            Expr::Bin(_, a, b) => {
                a.int_literals(out);
                b.int_literals(out);
            }
        }
    }
}

fn as_const(e: &Expr) -> Option<Value> {
    match e {
        Expr::Int(n) => Some(Value::Int(*n)),
        Expr::Bool(b) => Some(Value::Bool(*b)),
        _ => None,
    }
}

fn eval_bin(op: BinOp, a: Value, b: Value) -> Result<Value, EvalError> {
    if op.is_arith() {
        let (x, y) = int_pair(op, a, b)?;
        let r = match op {
            BinOp::Add => x.wrapping_add(y),
            BinOp::Sub => x.wrapping_sub(y),
            BinOp::Mul => x.wrapping_mul(y),
            BinOp::Div => {
                if y == 0 {
                    return Err(EvalError::DivByZero);
                }
                x.wrapping_div(y)
            }
            BinOp::Mod => {
                if y == 0 {
                    return Err(EvalError::DivByZero);
                }
                x.wrapping_rem(y)
            }
            _ => unreachable!(),
        };
        Ok(Value::Int(r))
    } else if op.is_cmp() {
        match (op, a, b) {
            (BinOp::Eq, a, b) if a.type_name() == b.type_name() => Ok(Value::Bool(a == b)),
            (BinOp::Ne, a, b) if a.type_name() == b.type_name() => Ok(Value::Bool(a != b)),
            (_, Value::Int(x), Value::Int(y)) => {
                let r = match op {
                    BinOp::Lt => x < y,
                    BinOp::Le => x <= y,
                    BinOp::Gt => x > y,
                    BinOp::Ge => x >= y,
                    _ => unreachable!(),
                };
                Ok(Value::Bool(r))
            }
            (_, a, b) => Err(EvalError::Type(format!(
                "{} applied to {} and {}",
                op.symbol(),
                a.type_name(),
                b.type_name()
            ))),
        }
    } else {
        match (a, b) {
            (Value::Bool(x), Value::Bool(y)) => {
                let r = match op {
                    BinOp::And => x && y,
                    BinOp::Or => x || y,
                    _ => unreachable!(),
                };
                Ok(Value::Bool(r))
            }
            (a, b) => Err(EvalError::Type(format!(
                "{} applied to {} and {}",
                op.symbol(),
                a.type_name(),
                b.type_name()
            ))),
        }
    }
}

fn int_pair(op: BinOp, a: Value, b: Value) -> Result<(i64, i64), EvalError> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Ok((x, y)),
        (a, b) => Err(EvalError::Type(format!(
            "{} applied to {} and {}",
            op.symbol(),
            a.type_name(),
            b.type_name()
        ))),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Var(name) => write!(f, "{name}"),
            Expr::Not(e) => write!(f, "not ({e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}
