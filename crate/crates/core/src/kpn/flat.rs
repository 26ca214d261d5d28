//! Flattening of structured process bodies into a linear instruction list
//! with jumps. Shared by the reference interpreter (resumable program
//! counter) and the compiler (wait-point discovery).

use crate::expr::Expr;
use crate::kpn::ast::Stmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    Send { expr: Expr, chan: String },
    Wait { var: String, chan: String },
    Assign { var: String, expr: Expr },
    JumpIfFalse { cond: Expr, target: usize },
    Jump { target: usize },
    /// End of one loop iteration; execution wraps to instruction 0.
    IterEnd,
}

/// Flattens a repeat body. The result always ends with `IterEnd`.
pub fn flatten(body: &[Stmt]) -> Vec<Instr> {
    let mut out = Vec::new();
    flatten_into(body, &mut out);
    out.push(Instr::IterEnd);
    out
}

fn flatten_into(stmts: &[Stmt], out: &mut Vec<Instr>) {
    for s in stmts {
        match s {
            Stmt::Send { expr, chan, .. } => out.push(Instr::Send {
                expr: expr.clone(),
                chan: chan.clone(),
            }),
            Stmt::Wait { var, chan, .. } => out.push(Instr::Wait {
                var: var.clone(),
                chan: chan.clone(),
            }),
            Stmt::Assign { var, expr, .. } => out.push(Instr::Assign {
                var: var.clone(),
                expr: expr.clone(),
            }),
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                let branch_at = out.len();
                out.push(Instr::Jump { target: 0 }); // patched below
                flatten_into(then_branch, out);
                let jump_out_at = out.len();
                out.push(Instr::Jump { target: 0 }); // patched below
                let else_start = out.len();
                flatten_into(else_branch, out);
                let end = out.len();
                out[branch_at] = Instr::JumpIfFalse {
                    cond: cond.clone(),
                    target: else_start,
                };
                out[jump_out_at] = Instr::Jump { target: end };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    #[test]
    fn if_else_compiles_to_jumps() {
        let body = vec![Stmt::If {
            cond: Expr::var("b"),
            then_branch: vec![Stmt::Wait {
                var: "x".into(),
                chan: "U".into(),
                line: 1,
            }],
            else_branch: vec![Stmt::Wait {
                var: "x".into(),
                chan: "W".into(),
                line: 2,
            }],
            line: 1,
        }];
        let code = flatten(&body);
        assert_eq!(
            code,
            vec![
                Instr::JumpIfFalse {
                    cond: Expr::var("b"),
                    target: 3
                },
                Instr::Wait {
                    var: "x".into(),
                    chan: "U".into()
                },
                Instr::Jump { target: 4 },
                Instr::Wait {
                    var: "x".into(),
                    chan: "W".into()
                },
                Instr::IterEnd,
            ]
        );
    }
}
