//! Line-oriented parser for `.kpn` network files, plus the canonical
//! pretty-printer used by the round-trip tests.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::{BinOp, Expr};
use crate::kpn::ast::{LocalDecl, NetworkDecl, ProcessDecl, Stmt, Ty};
use crate::value::Value;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, col {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

fn err<T>(line: usize, col: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        col,
        msg: msg.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Tok {
    text: String,
    col: usize,
}

/// Tokenizes one line: identifiers/keywords, integers, and the fixed
/// operator/punctuation set. `#` starts a comment.
fn tokenize(line: &str, line_no: usize) -> Result<Vec<Tok>, ParseError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push(Tok {
                text: chars[start..i].iter().collect(),
                col,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            toks.push(Tok {
                text: chars[start..i].iter().collect(),
                col,
            });
            continue;
        }
        // two-character operators first
        if i + 1 < chars.len() {
            let two: String = chars[i..i + 2].iter().collect();
            if matches!(two.as_str(), "==" | "!=" | "<=" | ">=") {
                toks.push(Tok { text: two, col });
                i += 2;
                continue;
            }
        }
        if matches!(c, '+' | '-' | '*' | '(' | ')' | '[' | ']' | ',' | '=' | '<' | '>') {
            toks.push(Tok {
                text: c.to_string(),
                col,
            });
            i += 1;
            continue;
        }
        return err(line_no, col, format!("unexpected character `{c}`"));
    }
    Ok(toks)
}

const KEYWORDS: &[&str] = &[
    "network", "channels", "init", "output", "process", "reads", "writes", "repeat", "end",
    "send", "on", "wait", "if", "then", "else", "int", "bool", "true", "false", "and", "or",
    "not", "div", "mod",
];

fn is_ident(s: &str) -> bool {
    !KEYWORDS.contains(&s)
        && s.chars().next().map(|c| c.is_ascii_alphabetic() || c == '_') == Some(true)
}

/// Cursor over the tokens of a single line.
struct Line {
    no: usize,
    toks: Vec<Tok>,
    pos: usize,
}

impl Line {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eol_col(&self) -> usize {
        self.toks.last().map(|t| t.col + t.text.len()).unwrap_or(1)
    }

    fn expect(&mut self, what: &str) -> Result<Tok, ParseError> {
        match self.next() {
            Some(t) if t.text == what => Ok(t),
            Some(t) => err(self.no, t.col, format!("expected `{what}`, found `{}`", t.text)),
            None => err(self.no, self.eol_col(), format!("expected `{what}`")),
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.next() {
            Some(t) if is_ident(&t.text) => Ok(t.text),
            Some(t) => err(self.no, t.col, format!("expected {what}, found `{}`", t.text)),
            None => err(self.no, self.eol_col(), format!("expected {what}")),
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => err(self.no, t.col, format!("unexpected `{}`", t.text)),
        }
    }

    /// Comma-separated identifier list, stopping before `stop` (if given).
    fn ident_list(&mut self, stop: Option<&str>) -> Result<Vec<String>, ParseError> {
        let mut names = vec![self.expect_ident("a name")?];
        loop {
            match self.peek() {
                Some(t) if t.text == "," => {
                    self.next();
                    names.push(self.expect_ident("a name")?);
                }
                Some(t) if Some(t.text.as_str()) == stop => break,
                Some(t) if stop.is_none() => {
                    return err(self.no, t.col, format!("unexpected `{}`", t.text))
                }
                _ => break,
            }
        }
        Ok(names)
    }
}

// --- expression parsing (precedence climbing) ------------------------------

fn parse_expr(line: &mut Line) -> Result<Expr, ParseError> {
    parse_or(line)
}

fn parse_or(line: &mut Line) -> Result<Expr, ParseError> {
    let mut e = parse_and(line)?;
    while line.peek().map(|t| t.text.as_str()) == Some("or") {
        line.next();
        e = Expr::bin(BinOp::Or, e, parse_and(line)?);
    }
    Ok(e)
}

fn parse_and(line: &mut Line) -> Result<Expr, ParseError> {
    let mut e = parse_cmp(line)?;
    while line.peek().map(|t| t.text.as_str()) == Some("and") {
        line.next();
        e = Expr::bin(BinOp::And, e, parse_cmp(line)?);
    }
    Ok(e)
}

fn parse_cmp(line: &mut Line) -> Result<Expr, ParseError> {
    let e = parse_add(line)?;
    let op = match line.peek().map(|t| t.text.as_str()) {
        Some("==") => Some(BinOp::Eq),
        Some("!=") => Some(BinOp::Ne),
        Some("<") => Some(BinOp::Lt),
        Some("<=") => Some(BinOp::Le),
        Some(">") => Some(BinOp::Gt),
        Some(">=") => Some(BinOp::Ge),
        _ => None,
    };
    if let Some(op) = op {
        line.next();
        return Ok(Expr::bin(op, e, parse_add(line)?));
    }
    Ok(e)
}

fn parse_add(line: &mut Line) -> Result<Expr, ParseError> {
    let mut e = parse_mul(line)?;
    loop {
        let op = match line.peek().map(|t| t.text.as_str()) {
            Some("+") => BinOp::Add,
            Some("-") => BinOp::Sub,
            _ => break,
        };
        line.next();
        e = Expr::bin(op, e, parse_mul(line)?);
    }
    Ok(e)
}

fn parse_mul(line: &mut Line) -> Result<Expr, ParseError> {
    let mut e = parse_unary(line)?;
    loop {
        let op = match line.peek().map(|t| t.text.as_str()) {
            Some("*") => BinOp::Mul,
            Some("div") => BinOp::Div,
            Some("mod") => BinOp::Mod,
            _ => break,
        };
        line.next();
        e = Expr::bin(op, e, parse_unary(line)?);
    }
    Ok(e)
}

fn parse_unary(line: &mut Line) -> Result<Expr, ParseError> {
    match line.peek().map(|t| t.text.clone()) {
        Some(t) if t == "not" => {
            line.next();
            Ok(Expr::Not(Box::new(parse_unary(line)?)))
        }
        Some(t) if t == "-" => {
            line.next();
            Ok(Expr::bin(BinOp::Sub, Expr::Int(0), parse_unary(line)?))
        }
        _ => parse_atom(line),
    }
}

fn parse_atom(line: &mut Line) -> Result<Expr, ParseError> {
    let no = line.no;
    let eol = line.eol_col();
    let Some(t) = line.next() else {
        return err(no, eol, "expected expression");
    };
    if t.text == "(" {
        let e = parse_expr(line)?;
        line.expect(")")?;
        return Ok(e);
    }
    if t.text == "true" {
        return Ok(Expr::Bool(true));
    }
    if t.text == "false" {
        return Ok(Expr::Bool(false));
    }
    if t.text.chars().all(|c| c.is_ascii_digit()) {
        return match t.text.parse::<i64>() {
            Ok(n) => Ok(Expr::Int(n)),
            Err(_) => err(no, t.col, format!("integer literal `{}` out of range", t.text)),
        };
    }
    if is_ident(&t.text) {
        return Ok(Expr::var(t.text));
    }
    err(no, t.col, format!("expected expression, found `{}`", t.text))
}

// --- file structure ---------------------------------------------------------

struct Lines {
    items: Vec<(usize, Vec<Tok>)>,
    pos: usize,
}

impl Lines {
    fn next_line(&mut self) -> Option<Line> {
        let (no, toks) = self.items.get(self.pos)?.clone();
        self.pos += 1;
        Some(Line { no, toks, pos: 0 })
    }

    fn last_line_no(&self) -> usize {
        self.items.last().map(|(n, _)| *n).unwrap_or(1)
    }
}

pub fn parse_network(text: &str) -> Result<NetworkDecl, ParseError> {
    let mut items = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let toks = tokenize(raw, i + 1)?;
        if !toks.is_empty() {
            items.push((i + 1, toks));
        }
    }
    let mut lines = Lines { items, pos: 0 };

    let mut header = match lines.next_line() {
        Some(l) => l,
        None => return err(1, 1, "empty file: expected `network <name>`"),
    };
    header.expect("network")?;
    let name = header.expect_ident("a network name")?;
    header.expect_end()?;

    let mut channels: Vec<String> = Vec::new();
    let mut inits: BTreeMap<String, Vec<Value>> = BTreeMap::new();
    let mut outputs: Vec<String> = Vec::new();
    let mut processes: Vec<ProcessDecl> = Vec::new();
    let mut closed = false;

    while let Some(mut line) = lines.next_line() {
        let head = line.next().unwrap();
        match head.text.as_str() {
            "channels" => {
                for c in line.ident_list(None)? {
                    if channels.contains(&c) {
                        return err(line.no, head.col, format!("duplicate channel `{c}`"));
                    }
                    channels.push(c);
                }
            }
            "init" => {
                let chan = line.expect_ident("a channel name")?;
                if inits.contains_key(&chan) {
                    return err(line.no, head.col, format!("duplicate init for channel `{chan}`"));
                }
                line.expect("=")?;
                line.expect("[")?;
                let mut vals = Vec::new();
                if line.peek().map(|t| t.text.as_str()) != Some("]") {
                    loop {
                        let neg = if line.peek().map(|t| t.text.as_str()) == Some("-") {
                            line.next();
                            true
                        } else {
                            false
                        };
                        let no = line.no;
                        let eol = line.eol_col();
                        let t = match line.next() {
                            Some(t) if t.text.chars().all(|c| c.is_ascii_digit()) => t,
                            Some(t) => {
                                return err(no, t.col, format!("expected integer, found `{}`", t.text))
                            }
                            None => return err(no, eol, "expected integer"),
                        };
                        let n: i64 = t.text.parse().map_err(|_| ParseError {
                            line: no,
                            col: t.col,
                            msg: format!("integer literal `{}` out of range", t.text),
                        })?;
                        vals.push(Value::Int(if neg { -n } else { n }));
                        if line.peek().map(|t| t.text.as_str()) == Some(",") {
                            line.next();
                        } else {
                            break;
                        }
                    }
                }
                line.expect("]")?;
                line.expect_end()?;
                inits.insert(chan, vals);
            }
            "output" => {
                for c in line.ident_list(None)? {
                    if outputs.contains(&c) {
                        return err(line.no, head.col, format!("duplicate output `{c}`"));
                    }
                    outputs.push(c);
                }
            }
            "process" => {
                let p = parse_process(&mut lines, line)?;
                if processes.iter().any(|q| q.name == p.name) {
                    return err(p.line, head.col, format!("duplicate process `{}`", p.name));
                }
                processes.push(p);
            }
            "end" => {
                line.expect_end()?;
                closed = true;
                break;
            }
            other => {
                return err(
                    line.no,
                    head.col,
                    format!("expected `channels`, `init`, `output`, `process` or `end`, found `{other}`"),
                )
            }
        }
    }
    if !closed {
        return err(lines.last_line_no(), 1, "missing `end` for `network`");
    }
    if let Some(mut line) = lines.next_line() {
        let t = line.next().unwrap();
        return err(line.no, t.col, format!("unexpected `{}` after `end`", t.text));
    }
    Ok(NetworkDecl {
        name,
        channels,
        inits,
        outputs,
        processes,
    })
}

fn parse_process(lines: &mut Lines, mut header: Line) -> Result<ProcessDecl, ParseError> {
    let line_no = header.no;
    let name = header.expect_ident("a process name")?;
    header.expect("reads")?;
    let reads = match header.peek() {
        // allow `reads writes …` as an empty read list? No: reads are
        // mandatory syntax but the list may be empty via `reads writes`.
        Some(t) if t.text == "writes" => Vec::new(),
        _ => header.ident_list(Some("writes"))?,
    };
    header.expect("writes")?;
    let writes = header.ident_list(None)?;

    let mut locals: Vec<LocalDecl> = Vec::new();
    let mut prelude: Vec<Stmt> = Vec::new();
    let mut body: Option<Vec<Stmt>> = None;

    loop {
        let Some(mut line) = lines.next_line() else {
            return err(lines.last_line_no(), 1, format!("missing `end` for process `{name}`"));
        };
        let head = line.peek().cloned().unwrap();
        match head.text.as_str() {
            "int" | "bool" => {
                line.next();
                let ty = if head.text == "int" { Ty::Int } else { Ty::Bool };
                let var = line.expect_ident("a variable name")?;
                if locals.iter().any(|l| l.name == var) {
                    return err(line.no, head.col, format!("duplicate local `{var}`"));
                }
                line.expect("=")?;
                let e = parse_expr(&mut line)?;
                line.expect_end()?;
                let init = match e.fold() {
                    Expr::Int(n) => Value::Int(n),
                    Expr::Bool(b) => Value::Bool(b),
                    _ => {
                        return err(
                            line.no,
                            head.col,
                            format!("local `{var}` must be initialised with a constant"),
                        )
                    }
                };
                if body.is_some() || !prelude.is_empty() {
                    return err(
                        line.no,
                        head.col,
                        format!("local `{var}` must be declared before any statement"),
                    );
                }
                locals.push(LocalDecl {
                    name: var,
                    ty,
                    init,
                    line: line.no,
                });
            }
            "repeat" => {
                line.next();
                line.expect_end()?;
                if body.is_some() {
                    return err(line.no, head.col, "a process has exactly one `repeat` block");
                }
                let (stmts, _) = parse_stmts(lines, &name, &["end"])?;
                body = Some(stmts);
            }
            "end" => {
                line.next();
                line.expect_end()?;
                let Some(body) = body else {
                    return err(line.no, head.col, format!("process `{name}` has no `repeat` block"));
                };
                return Ok(ProcessDecl {
                    name,
                    reads,
                    writes,
                    locals,
                    prelude,
                    body,
                    line: line_no,
                });
            }
            _ => {
                if body.is_some() {
                    return err(
                        line.no,
                        head.col,
                        "statements after `repeat … end` (expected `end` of process)",
                    );
                }
                prelude.push(parse_stmt(lines, line)?);
            }
        }
    }
}

/// Parses statements until one of `terminators` begins a line; returns the
/// statements and the terminator seen.
fn parse_stmts(
    lines: &mut Lines,
    proc_name: &str,
    terminators: &[&str],
) -> Result<(Vec<Stmt>, String), ParseError> {
    let mut stmts = Vec::new();
    loop {
        let Some(line) = lines.next_line() else {
            return err(
                lines.last_line_no(),
                1,
                format!("missing `end` in process `{proc_name}`"),
            );
        };
        let head = line.peek().cloned().unwrap();
        if terminators.contains(&head.text.as_str()) && line.toks.len() == 1 {
            return Ok((stmts, head.text));
        }
        stmts.push(parse_stmt(lines, line)?);
    }
}

fn parse_stmt(lines: &mut Lines, mut line: Line) -> Result<Stmt, ParseError> {
    let head = line.peek().cloned().unwrap();
    match head.text.as_str() {
        "send" => {
            line.next();
            let expr = parse_expr(&mut line)?;
            line.expect("on")?;
            let chan = line.expect_ident("a channel name")?;
            line.expect_end()?;
            Ok(Stmt::Send {
                expr,
                chan,
                line: line.no,
            })
        }
        "if" => {
            line.next();
            let cond = parse_expr(&mut line)?;
            line.expect("then")?;
            line.expect_end()?;
            let if_line = line.no;
            let (then_branch, term) = parse_stmts(lines, "if", &["else", "end"])?;
            let else_branch = if term == "else" {
                let (stmts, _) = parse_stmts(lines, "if", &["end"])?;
                stmts
            } else {
                Vec::new()
            };
            Ok(Stmt::If {
                cond,
                then_branch,
                else_branch,
                line: if_line,
            })
        }
        _ => {
            let var = line.expect_ident("a statement")?;
            line.expect("=")?;
            if line.peek().map(|t| t.text.as_str()) == Some("wait") {
                line.next();
                line.expect("(")?;
                let chan = line.expect_ident("a channel name")?;
                line.expect(")")?;
                line.expect_end()?;
                return Ok(Stmt::Wait {
                    var,
                    chan,
                    line: line.no,
                });
            }
            let expr = parse_expr(&mut line)?;
            line.expect_end()?;
            Ok(Stmt::Assign {
                var,
                expr,
                line: line.no,
            })
        }
    }
}

// --- pretty printer ---------------------------------------------------------

/// Canonical text form; `parse_network(pretty(d))` reproduces `d` up to
/// statement line numbers.
pub fn pretty(d: &NetworkDecl) -> String {
    let mut out = String::new();
    let push = |out: &mut String, depth: usize, s: &str| {
        for _ in 0..depth {
            out.push_str("  ");
        }
        out.push_str(s);
        out.push('\n');
    };
    push(&mut out, 0, &format!("network {}", d.name));
    if !d.channels.is_empty() {
        push(&mut out, 1, &format!("channels {}", d.channels.join(", ")));
    }
    for (chan, vals) in &d.inits {
        let items: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
        push(&mut out, 1, &format!("init {chan} = [{}]", items.join(", ")));
    }
    if !d.outputs.is_empty() {
        push(&mut out, 1, &format!("output {}", d.outputs.join(", ")));
    }
    for p in &d.processes {
        push(
            &mut out,
            1,
            &format!(
                "process {} reads {} writes {}",
                p.name,
                p.reads.join(", "),
                p.writes.join(", ")
            ),
        );
        for l in &p.locals {
            push(&mut out, 2, &format!("{} {} = {}", l.ty, l.name, l.init));
        }
        for s in &p.prelude {
            pretty_stmt(&mut out, 2, s, &push);
        }
        push(&mut out, 2, "repeat");
        for s in &p.body {
            pretty_stmt(&mut out, 3, s, &push);
        }
        push(&mut out, 2, "end");
        push(&mut out, 1, "end");
    }
    push(&mut out, 0, "end");
    out
}

fn pretty_stmt(out: &mut String, depth: usize, s: &Stmt, push: &dyn Fn(&mut String, usize, &str)) {
    match s {
        Stmt::Send { expr, chan, .. } => push(out, depth, &format!("send {expr} on {chan}")),
        Stmt::Wait { var, chan, .. } => push(out, depth, &format!("{var} = wait({chan})")),
        Stmt::Assign { var, expr, .. } => push(out, depth, &format!("{var} = {expr}")),
        Stmt::If {
            cond,
            then_branch,
            else_branch,
            ..
        } => {
            push(out, depth, &format!("if {cond} then"));
            for s in then_branch {
                pretty_stmt(out, depth + 1, s, push);
            }
            if !else_branch.is_empty() {
                push(out, depth, "else");
                for s in else_branch {
                    pretty_stmt(out, depth + 1, s, push);
                }
            }
            push(out, depth, "end");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ECHO: &str = "\
# a process that copies its input channel to its output
network echo
  channels U, V
  init U = [4, 2]
  output V
  process copy reads U writes V
    repeat
      x = wait(U)
      send x on V
    end
  end
end
";

    #[test]
    fn parses_a_minimal_network() {
        let d = parse_network(ECHO).unwrap();
        assert_eq!(d.name, "echo");
        assert_eq!(d.channels, vec!["U", "V"]);
        assert_eq!(d.inits["U"], vec![Value::Int(4), Value::Int(2)]);
        assert_eq!(d.outputs, vec!["V"]);
        assert_eq!(d.processes.len(), 1);
        let p = &d.processes[0];
        assert_eq!(p.body.len(), 2);
        assert!(matches!(&p.body[0], Stmt::Wait { var, chan, .. } if var == "x" && chan == "U"));
    }

    #[test]
    fn prelude_and_branching() {
        let text = "\
network t
  channels U, V, X
  output X
  process h reads V writes U
    send 0 on U
    repeat
      x = wait(V)
      send x on U
    end
  end
  process f reads U writes X
    bool b = true
    repeat
      if b then
        x = wait(U)
      else
        x = wait(U)
      end
      send x on X
      b = not b
    end
  end
end
";
        let d = parse_network(text).unwrap();
        let h = d.process("h").unwrap();
        assert_eq!(h.prelude.len(), 1);
        assert!(matches!(&h.prelude[0], Stmt::Send { chan, .. } if chan == "U"));
        let f = d.process("f").unwrap();
        assert_eq!(f.locals.len(), 1);
        assert_eq!(f.locals[0].init, Value::Bool(true));
        assert!(matches!(&f.body[0], Stmt::If { else_branch, .. } if else_branch.len() == 1));
    }

    #[test]
    fn send_without_expression_fails_at_on() {
        let text = "\
network t
  channels U
  init U = [1]
  process p reads U writes U
    repeat
      x = wait(U)
      send on U
    end
  end
end
";
        let e = parse_network(text).unwrap_err();
        assert_eq!(e.line, 7);
        assert!(e.msg.contains("`on`"), "{}", e.msg);
    }

    #[test]
    fn duplicate_channel_is_rejected() {
        let text = "network t\n  channels U, U\nend\n";
        let e = parse_network(text).unwrap_err();
        assert!(e.msg.contains("duplicate channel"), "{}", e.msg);
    }

    #[test]
    fn round_trip_through_pretty_printer() {
        for text in [ECHO] {
            let d = parse_network(text).unwrap();
            let d2 = parse_network(&pretty(&d)).unwrap();
            // line numbers differ; compare the printed canonical forms
            assert_eq!(pretty(&d), pretty(&d2));
            assert_eq!(d.channels, d2.channels);
            assert_eq!(d.inits, d2.inits);
        }
    }

    #[test]
    fn expression_precedence() {
        let mut line = Line {
            no: 1,
            toks: tokenize("1 + 2 * 3 == 7 and not false", 1).unwrap(),
            pos: 0,
        };
        let e = parse_expr(&mut line).unwrap();
        assert_eq!(e.to_string(), "(((1 + (2 * 3)) == 7) and not (false))");
    }
}
