//! Textual modeling language: a small assignment-style dialect producing
//! symbolic transition systems.
//!
//! A model declares `input`/`output`/`state` variables over finite domains,
//! then gives one assignment per output/state variable in an `init` block and
//! one in a `next` block. Right-hand sides are expressions, set choices
//! `{e1, ..., ek}`, or `if/elif/else` chains over those. Inputs are free:
//! they take any in-domain value each step by declaration, never by
//! assignment. `eps` is reserved and auto-added to output enum domains.

mod elaborate;
mod parse;

pub use elaborate::elaborate;
pub use parse::parse;

use crate::domain::VarDomain;
use crate::pred::BinOp;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Byte range into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        Span { start, end }
    }

    pub fn join(self, other: Span) -> Span {
        Span { start: self.start.min(other.start), end: self.end.max(other.end) }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LangError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{}", render_diagnostics(.0))]
    Semantic(Vec<Diagnostic>),
    #[error("type error: {0}")]
    Type(String),
}

/// A single semantic problem; analysis reports all of them, not just the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub msg: String,
    pub line: usize,
    pub col: usize,
}

fn render_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| format!("{}:{}: {}", d.line, d.col, d.msg))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Line/column (1-based) of a byte offset.
pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for (i, ch) in text.char_indices() {
        if i >= offset {
            break;
        }
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub domain: VarDomain,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Bool(bool, Span),
    Int(i64, Span),
    /// A variable reference or enum literal; resolved during elaboration.
    Ident(String, Span),
    Unary { op: UnaryOp, operand: Box<Expr>, span: Span },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr>, span: Span },
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Bool(_, s) | Expr::Int(_, s) | Expr::Ident(_, s) => *s,
            Expr::Unary { span, .. } | Expr::Binary { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    Expr(Expr),
    Set(Vec<Expr>, Span),
    Ite { arms: Vec<(Expr, Rhs)>, otherwise: Box<Rhs>, span: Span },
}

impl Rhs {
    pub fn span(&self) -> Span {
        match self {
            Rhs::Expr(e) => e.span(),
            Rhs::Set(_, s) => *s,
            Rhs::Ite { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assign {
    pub target: String,
    pub rhs: Rhs,
    pub span: Span,
}

/// Parsed model: declarations plus per-variable `init` and `next` assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelAst {
    pub inputs: Vec<VarDecl>,
    pub outputs: Vec<VarDecl>,
    pub states: Vec<VarDecl>,
    pub init: Vec<Assign>,
    pub next: Vec<Assign>,
}

impl ModelAst {
    pub fn decls(&self) -> impl Iterator<Item = &VarDecl> {
        self.inputs.iter().chain(self.outputs.iter()).chain(self.states.iter())
    }

    pub fn decl(&self, name: &str) -> Option<&VarDecl> {
        self.decls().find(|d| d.name == name)
    }

    pub fn is_input(&self, name: &str) -> bool {
        self.inputs.iter().any(|d| d.name == name)
    }

    pub fn is_output(&self, name: &str) -> bool {
        self.outputs.iter().any(|d| d.name == name)
    }

    pub fn is_state(&self, name: &str) -> bool {
        self.states.iter().any(|d| d.name == name)
    }

    /// Enum literals visible in the model (for identifier resolution).
    pub fn enum_literals(&self) -> Vec<&str> {
        let mut lits = Vec::new();
        for d in self.decls() {
            if let VarDomain::Enum(ls) = &d.domain {
                for l in ls {
                    if !lits.contains(&l.as_str()) {
                        lits.push(l.as_str());
                    }
                }
            }
        }
        lits
    }

    /// Structural equality ignoring source spans.
    pub fn structurally_eq(&self, other: &ModelAst) -> bool {
        let mut a = self.clone();
        let mut b = other.clone();
        a.strip_spans();
        b.strip_spans();
        a == b
    }

    pub fn strip_spans(&mut self) {
        for d in
            self.inputs.iter_mut().chain(self.outputs.iter_mut()).chain(self.states.iter_mut())
        {
            d.span = Span::default();
        }
        for a in self.init.iter_mut().chain(self.next.iter_mut()) {
            a.span = Span::default();
            strip_rhs(&mut a.rhs);
        }
    }
}

fn strip_rhs(rhs: &mut Rhs) {
    match rhs {
        Rhs::Expr(e) => strip_expr(e),
        Rhs::Set(elems, s) => {
            *s = Span::default();
            elems.iter_mut().for_each(strip_expr);
        }
        Rhs::Ite { arms, otherwise, span } => {
            *span = Span::default();
            for (g, r) in arms {
                strip_expr(g);
                strip_rhs(r);
            }
            strip_rhs(otherwise);
        }
    }
}

fn strip_expr(e: &mut Expr) {
    match e {
        Expr::Bool(_, s) | Expr::Int(_, s) | Expr::Ident(_, s) => *s = Span::default(),
        Expr::Unary { operand, span, .. } => {
            *span = Span::default();
            strip_expr(operand);
        }
        Expr::Binary { lhs, rhs, span, .. } => {
            *span = Span::default();
            strip_expr(lhs);
            strip_expr(rhs);
        }
    }
}

// --- rendering -------------------------------------------------------------

fn precedence(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::Xor | BinOp::Xnor => 2,
        BinOp::And => 3,
        BinOp::Eq | BinOp::Neq | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
        BinOp::Add | BinOp::Sub => 5,
        // Not part of the surface grammar; parenthesized defensively.
        BinOp::Implies | BinOp::Iff => 0,
    }
}

pub(crate) fn render_expr(e: &Expr, out: &mut String) {
    render_expr_prec(e, 0, out);
}

fn render_expr_prec(e: &Expr, parent: u8, out: &mut String) {
    match e {
        Expr::Bool(b, _) => out.push_str(if *b { "true" } else { "false" }),
        Expr::Int(i, _) => out.push_str(&i.to_string()),
        Expr::Ident(name, _) => out.push_str(name),
        Expr::Unary { op, operand, .. } => {
            out.push_str(match op {
                UnaryOp::Not => "!",
                UnaryOp::Neg => "-",
            });
            render_expr_prec(operand, 6, out);
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            let prec = precedence(*op);
            if prec < parent {
                out.push('(');
            }
            // Left-associative chains keep the left child at the same level;
            // the right child needs one more. Comparisons are non-associative,
            // so both their children are bumped.
            let lhs_min = if prec == 4 { prec + 1 } else { prec };
            render_expr_prec(lhs, lhs_min, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            render_expr_prec(rhs, prec + 1, out);
            if prec < parent {
                out.push(')');
            }
        }
    }
}

fn render_rhs(rhs: &Rhs, out: &mut String) {
    match rhs {
        Rhs::Expr(e) => render_expr(e, out),
        Rhs::Set(elems, _) => {
            out.push('{');
            for (i, e) in elems.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                render_expr(e, out);
            }
            out.push('}');
        }
        Rhs::Ite { arms, otherwise, .. } => {
            for (i, (guard, branch)) in arms.iter().enumerate() {
                out.push_str(if i == 0 { "if (" } else { " elif (" });
                render_expr(guard, out);
                out.push_str("): ");
                // A nested if-chain in arm position must be parenthesized to
                // keep the surrounding chain's elif/else unambiguous.
                if matches!(branch, Rhs::Ite { .. }) {
                    out.push('(');
                    render_rhs(branch, out);
                    out.push(')');
                } else {
                    render_rhs(branch, out);
                }
            }
            out.push_str(" else: ");
            render_rhs(otherwise, out);
        }
    }
}

fn render_domain(domain: &VarDomain, out: &mut String) {
    match domain {
        VarDomain::Bool => out.push_str("bool"),
        VarDomain::Enum(lits) => {
            out.push_str("enum { ");
            out.push_str(&lits.join(", "));
            out.push_str(" }");
        }
        VarDomain::Int { lo, hi } => out.push_str(&format!("int[{lo}..{hi}]")),
    }
}

/// Canonical source text of a model; `parse(render(a))` is structurally `a`.
pub fn render(ast: &ModelAst) -> String {
    let mut out = String::new();
    for (kw, decls) in
        [("input", &ast.inputs), ("output", &ast.outputs), ("state", &ast.states)]
    {
        if decls.is_empty() {
            continue;
        }
        out.push_str(kw);
        out.push('\n');
        for d in decls {
            out.push_str("  ");
            out.push_str(&d.name);
            out.push_str(" : ");
            render_domain(&d.domain, &mut out);
            out.push_str(";\n");
        }
    }
    for (kw, assigns) in [("init", &ast.init), ("next", &ast.next)] {
        if assigns.is_empty() {
            continue;
        }
        out.push_str(kw);
        out.push('\n');
        for a in assigns {
            out.push_str("  ");
            out.push_str(&a.target);
            out.push_str(" := ");
            render_rhs(&a.rhs, &mut out);
            out.push_str(";\n");
        }
    }
    out
}

impl fmt::Display for ModelAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", render(self))
    }
}

/// The beverage machine reference model (also shipped as `models/beverage.rm`).
pub const BEVERAGE_SOURCE: &str = "\
input
  in : enum { eps, req, fill };
output
  out : enum { eps, coff, tea };
state
  wtr : int[0..2];
init
  out := eps;
  wtr := 2;
next
  out := if (in = req && wtr > 0): {coff, tea} else: eps;
  wtr := if (in = fill): 2 elif (in = req && wtr > 0): wtr - 1 else: wtr;
";
