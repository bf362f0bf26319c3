//! Lexer, parser, and semantic analysis for the modeling language.

use super::{line_col, Assign, Diagnostic, Expr, LangError, ModelAst, Rhs, Span, UnaryOp, VarDecl};
use crate::domain::{VarDomain, EPS};
use crate::pred::BinOp;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Assign, // :=
    Colon,
    Semi,
    Comma,
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    DotDot,
    Not,
    NotEq,
    AndAnd,
    OrOr,
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!(
                "`{}`",
                match other {
                    Tok::Assign => ":=",
                    Tok::Colon => ":",
                    Tok::Semi => ";",
                    Tok::Comma => ",",
                    Tok::LBrace => "{",
                    Tok::RBrace => "}",
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::LBracket => "[",
                    Tok::RBracket => "]",
                    Tok::DotDot => "..",
                    Tok::Not => "!",
                    Tok::NotEq => "!=",
                    Tok::AndAnd => "&&",
                    Tok::OrOr => "||",
                    Tok::Eq => "=",
                    Tok::Lt => "<",
                    Tok::Le => "<=",
                    Tok::Gt => ">",
                    Tok::Ge => ">=",
                    Tok::Plus => "+",
                    Tok::Minus => "-",
                    _ => unreachable!(),
                }
            ),
        }
    }
}

struct Lexer<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { text, bytes: text.as_bytes(), pos: 0 }
    }

    fn error(&self, pos: usize, msg: impl Into<String>) -> LangError {
        let (line, col) = line_col(self.text, pos);
        LangError::Syntax { line, col, msg: msg.into() }
    }

    fn tokenize(mut self) -> Result<Vec<(Tok, Span)>, LangError> {
        let mut toks = Vec::new();
        loop {
            self.skip_trivia();
            let start = self.pos;
            if self.pos >= self.bytes.len() {
                toks.push((Tok::Eof, Span::new(start, start)));
                return Ok(toks);
            }
            let c = self.bytes[self.pos];
            let tok = match c {
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                    while self.pos < self.bytes.len()
                        && (self.bytes[self.pos].is_ascii_alphanumeric()
                            || self.bytes[self.pos] == b'_')
                    {
                        self.pos += 1;
                    }
                    Tok::Ident(self.text[start..self.pos].to_string())
                }
                b'0'..=b'9' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                    let lit = &self.text[start..self.pos];
                    Tok::Int(
                        lit.parse::<i64>()
                            .map_err(|_| self.error(start, format!("integer `{lit}` overflows")))?,
                    )
                }
                b':' => {
                    self.pos += 1;
                    if self.peek() == Some(b'=') {
                        self.pos += 1;
                        Tok::Assign
                    } else {
                        Tok::Colon
                    }
                }
                b';' => {
                    self.pos += 1;
                    Tok::Semi
                }
                b',' => {
                    self.pos += 1;
                    Tok::Comma
                }
                b'{' => {
                    self.pos += 1;
                    Tok::LBrace
                }
                b'}' => {
                    self.pos += 1;
                    Tok::RBrace
                }
                b'(' => {
                    self.pos += 1;
                    Tok::LParen
                }
                b')' => {
                    self.pos += 1;
                    Tok::RParen
                }
                b'[' => {
                    self.pos += 1;
                    Tok::LBracket
                }
                b']' => {
                    self.pos += 1;
                    Tok::RBracket
                }
                b'.' => {
                    self.pos += 1;
                    if self.peek() == Some(b'.') {
                        self.pos += 1;
                        Tok::DotDot
                    } else {
                        return Err(self.error(start, "expected `..`"));
                    }
                }
                b'!' => {
                    self.pos += 1;
                    if self.peek() == Some(b'=') {
                        self.pos += 1;
                        Tok::NotEq
                    } else {
                        Tok::Not
                    }
                }
                b'&' => {
                    self.pos += 1;
                    if self.peek() == Some(b'&') {
                        self.pos += 1;
                        Tok::AndAnd
                    } else {
                        return Err(self.error(start, "expected `&&`"));
                    }
                }
                b'|' => {
                    self.pos += 1;
                    if self.peek() == Some(b'|') {
                        self.pos += 1;
                        Tok::OrOr
                    } else {
                        return Err(self.error(start, "expected `||`"));
                    }
                }
                b'=' => {
                    self.pos += 1;
                    Tok::Eq
                }
                b'<' => {
                    self.pos += 1;
                    if self.peek() == Some(b'=') {
                        self.pos += 1;
                        Tok::Le
                    } else {
                        Tok::Lt
                    }
                }
                b'>' => {
                    self.pos += 1;
                    if self.peek() == Some(b'=') {
                        self.pos += 1;
                        Tok::Ge
                    } else {
                        Tok::Gt
                    }
                }
                b'+' => {
                    self.pos += 1;
                    Tok::Plus
                }
                b'-' => {
                    self.pos += 1;
                    Tok::Minus
                }
                other => {
                    return Err(self.error(start, format!("unexpected character `{}`", other as char)))
                }
            };
            toks.push((tok, Span::new(start, self.pos)));
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_trivia(&mut self) {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            // Line comments.
            if self.pos + 1 < self.bytes.len()
                && self.bytes[self.pos] == b'/'
                && self.bytes[self.pos + 1] == b'/'
            {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
    }
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error_at(&self, span: Span, msg: impl Into<String>) -> LangError {
        let (line, col) = line_col(self.text, span.start);
        LangError::Syntax { line, col, msg: msg.into() }
    }

    fn error_here(&self, msg: impl Into<String>) -> LangError {
        let span = self.toks[self.pos].1;
        self.error_at(span, msg)
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok) -> Result<Span, LangError> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(self.error_here(format!(
                "expected {}, found {}",
                tok.describe(),
                self.peek().describe()
            )))
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Span), LangError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.bump().1;
                Ok((name, span))
            }
            other => Err(self.error_here(format!("expected identifier, found {}", other.describe()))),
        }
    }

    fn is_keyword(name: &str) -> bool {
        matches!(
            name,
            "input"
                | "output"
                | "state"
                | "init"
                | "next"
                | "if"
                | "elif"
                | "else"
                | "bool"
                | "enum"
                | "int"
                | "xor"
                | "xnor"
                | "true"
                | "false"
        )
    }

    fn at_section_keyword(&self) -> bool {
        matches!(self.peek(), Tok::Ident(name)
            if matches!(name.as_str(), "input" | "output" | "state" | "init" | "next"))
    }

    fn parse_model(&mut self) -> Result<ModelAst, LangError> {
        let mut ast = ModelAst {
            inputs: Vec::new(),
            outputs: Vec::new(),
            states: Vec::new(),
            init: Vec::new(),
            next: Vec::new(),
        };
        if *self.peek() == Tok::Eof {
            return Err(self.error_here("no sections"));
        }
        while *self.peek() != Tok::Eof {
            let (name, span) = self.expect_ident()?;
            match name.as_str() {
                "input" | "output" | "state" => {
                    let decls = self.parse_decls()?;
                    match name.as_str() {
                        "input" => ast.inputs.extend(decls),
                        "output" => ast.outputs.extend(decls),
                        _ => ast.states.extend(decls),
                    }
                }
                "init" | "next" => {
                    let assigns = self.parse_assigns()?;
                    if name == "init" {
                        ast.init.extend(assigns);
                    } else {
                        ast.next.extend(assigns);
                    }
                }
                other => {
                    return Err(self.error_at(
                        span,
                        format!("expected a section keyword, found `{other}`"),
                    ))
                }
            }
        }
        Ok(ast)
    }

    fn parse_decls(&mut self) -> Result<Vec<VarDecl>, LangError> {
        let mut decls = Vec::new();
        loop {
            match self.peek() {
                Tok::Ident(_) if !self.at_section_keyword() => {}
                _ => break,
            }
            let (name, start) = self.expect_ident()?;
            if Self::is_keyword(&name) {
                return Err(self.error_at(start, format!("`{name}` is a reserved word")));
            }
            self.expect(Tok::Colon)?;
            let domain = self.parse_type()?;
            let end = self.expect(Tok::Semi)?;
            decls.push(VarDecl { name, domain, span: start.join(end) });
        }
        if decls.is_empty() {
            return Err(self.error_here("expected at least one declaration"));
        }
        Ok(decls)
    }

    fn parse_type(&mut self) -> Result<VarDomain, LangError> {
        let (name, span) = self.expect_ident()?;
        match name.as_str() {
            "bool" => Ok(VarDomain::Bool),
            "enum" => {
                self.expect(Tok::LBrace)?;
                let mut lits = Vec::new();
                loop {
                    let (lit, lit_span) = self.expect_ident()?;
                    if Self::is_keyword(&lit) {
                        return Err(
                            self.error_at(lit_span, format!("`{lit}` is a reserved word"))
                        );
                    }
                    if lits.contains(&lit) {
                        return Err(
                            self.error_at(lit_span, format!("duplicate enum literal `{lit}`"))
                        );
                    }
                    lits.push(lit);
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect(Tok::RBrace)?;
                Ok(VarDomain::Enum(lits))
            }
            "int" => {
                self.expect(Tok::LBracket)?;
                let lo = self.parse_signed_int()?;
                self.expect(Tok::DotDot)?;
                let hi = self.parse_signed_int()?;
                let rb = self.expect(Tok::RBracket)?;
                if lo > hi {
                    return Err(self.error_at(rb, format!("empty int range [{lo}..{hi}]")));
                }
                Ok(VarDomain::Int { lo, hi })
            }
            other => Err(self.error_at(span, format!("expected a type, found `{other}`"))),
        }
    }

    fn parse_signed_int(&mut self) -> Result<i64, LangError> {
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(if negative { -i } else { i })
            }
            other => Err(self.error_here(format!("expected integer, found {}", other.describe()))),
        }
    }

    fn parse_assigns(&mut self) -> Result<Vec<Assign>, LangError> {
        let mut assigns = Vec::new();
        loop {
            match self.peek() {
                Tok::Ident(_) if !self.at_section_keyword() => {}
                _ => break,
            }
            let (target, start) = self.expect_ident()?;
            self.expect(Tok::Assign)?;
            let rhs = self.parse_rhs()?;
            let end = self.expect(Tok::Semi)?;
            assigns.push(Assign { target, rhs, span: start.join(end) });
        }
        if assigns.is_empty() {
            return Err(self.error_here("expected at least one assignment"));
        }
        Ok(assigns)
    }

    fn parse_rhs(&mut self) -> Result<Rhs, LangError> {
        match self.peek() {
            Tok::Ident(name) if name == "if" => self.parse_ite(),
            Tok::LBrace => self.parse_set(),
            // A parenthesized if-chain disambiguates nesting in arm position;
            // any other leading `(` starts an ordinary expression.
            Tok::LParen if matches!(&self.toks[self.pos + 1].0, Tok::Ident(k) if k == "if") => {
                self.bump();
                let inner = self.parse_ite()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            _ => Ok(Rhs::Expr(self.parse_expr()?)),
        }
    }

    fn parse_set(&mut self) -> Result<Rhs, LangError> {
        let start = self.expect(Tok::LBrace)?;
        let mut elems = vec![self.parse_expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            elems.push(self.parse_expr()?);
        }
        let end = self.expect(Tok::RBrace)?;
        Ok(Rhs::Set(elems, start.join(end)))
    }

    fn parse_ite(&mut self) -> Result<Rhs, LangError> {
        let start = self.peek_span();
        self.bump(); // `if`
        let mut arms = Vec::new();
        loop {
            self.expect(Tok::LParen)?;
            let guard = self.parse_expr()?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::Colon)?;
            let branch = self.parse_rhs()?;
            arms.push((guard, branch));
            match self.peek().clone() {
                Tok::Ident(k) if k == "elif" => {
                    self.bump();
                }
                Tok::Ident(k) if k == "else" => break,
                other => {
                    return Err(self.error_here(format!(
                        "expected `elif` or `else`, found {}",
                        other.describe()
                    )))
                }
            }
        }
        self.bump(); // `else`
        self.expect(Tok::Colon)?;
        let otherwise = self.parse_rhs()?;
        let span = start.join(otherwise.span());
        Ok(Rhs::Ite { arms, otherwise: Box::new(otherwise), span })
    }

    // Precedence climbing: || < xor/xnor < && < comparisons < additive < unary.
    fn parse_expr(&mut self) -> Result<Expr, LangError> {
        self.parse_or()
    }

    fn parse_or(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.parse_xor()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.parse_xor()?;
            lhs = binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_xor(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.parse_and()?;
        loop {
            let op = match self.peek() {
                Tok::Ident(k) if k == "xor" => BinOp::Xor,
                Tok::Ident(k) if k == "xnor" => BinOp::Xnor,
                _ => break,
            };
            self.bump();
            let rhs = self.parse_and()?;
            lhs = binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.parse_cmp()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.parse_cmp()?;
            lhs = binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_cmp(&mut self) -> Result<Expr, LangError> {
        let lhs = self.parse_additive()?;
        let op = match self.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::NotEq => BinOp::Neq,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.parse_additive()?;
        // Comparisons are non-associative: `a = b = c` is rejected.
        if matches!(self.peek(), Tok::Eq | Tok::NotEq | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge) {
            return Err(self.error_here("comparisons do not chain; parenthesize"));
        }
        Ok(binary(op, lhs, rhs))
    }

    fn parse_additive(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.parse_unary()?;
            lhs = binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, LangError> {
        match self.peek() {
            Tok::Not => {
                let start = self.bump().1;
                let operand = self.parse_unary()?;
                let span = start.join(operand.span());
                Ok(Expr::Unary { op: UnaryOp::Not, operand: Box::new(operand), span })
            }
            Tok::Minus => {
                let start = self.bump().1;
                let operand = self.parse_unary()?;
                let span = start.join(operand.span());
                Ok(Expr::Unary { op: UnaryOp::Neg, operand: Box::new(operand), span })
            }
            _ => self.parse_atom(),
        }
    }

    fn parse_atom(&mut self) -> Result<Expr, LangError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let inner = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Int(i) => {
                let span = self.bump().1;
                Ok(Expr::Int(i, span))
            }
            Tok::Ident(name) => {
                if name == "true" || name == "false" {
                    let span = self.bump().1;
                    Ok(Expr::Bool(name == "true", span))
                } else if Self::is_keyword(&name) {
                    Err(self.error_here(format!("`{name}` is a reserved word")))
                } else {
                    let span = self.bump().1;
                    Ok(Expr::Ident(name, span))
                }
            }
            other => Err(self.error_here(format!("expected expression, found {}", other.describe()))),
        }
    }
}

fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
    let span = lhs.span().join(rhs.span());
    Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span }
}

/// Parse a model from source text: syntax errors abort with line/column;
/// semantic errors are collected exhaustively.
pub fn parse(text: &str) -> Result<ModelAst, LangError> {
    let toks = Lexer::new(text).tokenize()?;
    let mut parser = Parser { text, toks, pos: 0 };
    let mut ast = parser.parse_model()?;
    analyze(text, &mut ast)?;
    Ok(ast)
}

/// Semantic analysis: auto-adds `eps` to output enum domains, then checks
/// declarations, assignment coverage, and identifier resolution. All problems
/// are reported together.
fn analyze(text: &str, ast: &mut ModelAst) -> Result<(), LangError> {
    let mut diags: Vec<Diagnostic> = Vec::new();
    let report = |span: Span, msg: String| {
        let (line, col) = line_col(text, span.start);
        Diagnostic { msg, line, col }
    };

    for d in &mut ast.outputs {
        match &mut d.domain {
            VarDomain::Enum(lits) => {
                if !lits.iter().any(|l| l == EPS) {
                    lits.insert(0, EPS.to_string());
                }
            }
            _ => diags.push(report(
                d.span,
                format!("output `{}` must be an enum (its domain must contain `{EPS}`)", d.name),
            )),
        }
    }

    let mut seen: Vec<&str> = Vec::new();
    let decls: Vec<VarDecl> = ast.decls().cloned().collect();
    for d in &decls {
        if seen.contains(&d.name.as_str()) {
            diags.push(report(d.span, format!("variable `{}` declared twice", d.name)));
        } else {
            seen.push(&d.name);
        }
    }
    let literals = ast.enum_literals().iter().map(|s| s.to_string()).collect::<Vec<_>>();
    for d in &decls {
        if literals.contains(&d.name) {
            diags.push(report(
                d.span,
                format!("`{}` is both a variable and an enum literal", d.name),
            ));
        }
    }

    // Assignment coverage: every output/state variable exactly once in both
    // blocks; inputs and undeclared names never.
    for (block_name, assigns) in [("init", &ast.init), ("next", &ast.next)] {
        let mut assigned: Vec<&str> = Vec::new();
        for a in assigns {
            if ast.is_input(&a.target) {
                diags.push(report(
                    a.span,
                    format!("input `{}` cannot be assigned (inputs are free)", a.target),
                ));
            } else if ast.decl(&a.target).is_none() {
                diags.push(report(a.span, format!("assignment to undeclared `{}`", a.target)));
            } else if assigned.contains(&a.target.as_str()) {
                diags.push(report(
                    a.span,
                    format!("`{}` assigned twice in {block_name}", a.target),
                ));
            } else {
                assigned.push(&a.target);
            }
        }
        for d in ast.outputs.iter().chain(ast.states.iter()) {
            if !assigned.contains(&d.name.as_str()) {
                diags.push(report(
                    d.span,
                    format!("`{}` unassigned in {block_name}", d.name),
                ));
            }
        }
    }

    // Identifier resolution inside expressions; init right-hand sides must
    // not mention inputs (the initial predicate ranges over outputs/states).
    let check_expr = |e: &Expr, in_init: bool, diags: &mut Vec<Diagnostic>| {
        let mut stack = vec![e];
        while let Some(e) = stack.pop() {
            match e {
                Expr::Ident(name, span) => {
                    let declared = ast.decl(name).is_some();
                    let is_literal = literals.contains(name);
                    if !declared && !is_literal {
                        diags.push(report(*span, format!("undeclared identifier `{name}`")));
                    } else if declared && in_init && ast.is_input(name) {
                        diags.push(report(
                            *span,
                            format!("init expression references input `{name}`"),
                        ));
                    }
                }
                Expr::Unary { operand, .. } => stack.push(operand),
                Expr::Binary { lhs, rhs, .. } => {
                    stack.push(lhs);
                    stack.push(rhs);
                }
                Expr::Bool(..) | Expr::Int(..) => {}
            }
        }
    };
    for (assigns, in_init) in [(&ast.init, true), (&ast.next, false)] {
        for a in assigns {
            let mut stack = vec![&a.rhs];
            while let Some(rhs) = stack.pop() {
                match rhs {
                    Rhs::Expr(e) => check_expr(e, in_init, &mut diags),
                    Rhs::Set(elems, _) => {
                        elems.iter().for_each(|e| check_expr(e, in_init, &mut diags))
                    }
                    Rhs::Ite { arms, otherwise, .. } => {
                        for (g, r) in arms {
                            check_expr(g, in_init, &mut diags);
                            stack.push(r);
                        }
                        stack.push(otherwise);
                    }
                }
            }
        }
    }

    if diags.is_empty() {
        Ok(())
    } else {
        Err(LangError::Semantic(diags))
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, LangError, BEVERAGE_SOURCE};
    use crate::domain::VarDomain;

    #[test]
    fn empty_file_reports_no_sections() {
        let err = parse("").unwrap_err();
        assert!(matches!(err, LangError::Syntax { msg, .. } if msg.contains("no sections")));
        let err = parse("  // just a comment\n").unwrap_err();
        assert!(matches!(err, LangError::Syntax { msg, .. } if msg.contains("no sections")));
    }

    #[test]
    fn unassigned_output_is_reported() {
        let src = "output out : enum { eps, on };\nnext out := out;\n";
        let err = parse(src).unwrap_err();
        match err {
            LangError::Semantic(diags) => {
                assert!(diags.iter().any(|d| d.msg.contains("`out` unassigned in init")), "{diags:?}");
            }
            other => panic!("expected semantic errors, got {other}"),
        }
    }

    #[test]
    fn semantic_errors_are_listed_exhaustively() {
        // Duplicate declaration, assignment to an input, and an undeclared
        // identifier must all surface in one pass.
        let src = "\
input a : bool;
state a : bool;
output o : enum { eps };
init o := eps; a := true;
next o := eps; a := missing; a := true;
";
        let err = parse(src).unwrap_err();
        match err {
            LangError::Semantic(diags) => {
                let text = diags.iter().map(|d| d.msg.clone()).collect::<Vec<_>>().join("\n");
                assert!(text.contains("declared twice"), "{text}");
                assert!(text.contains("undeclared identifier `missing`"), "{text}");
                assert!(diags.len() >= 3, "{text}");
            }
            other => panic!("expected semantic errors, got {other}"),
        }
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let src = "input a : bool\noutput o : enum { eps };\n";
        match parse(src).unwrap_err() {
            LangError::Syntax { line, col, msg } => {
                assert_eq!(line, 2);
                assert!(col >= 1);
                assert!(msg.contains("expected `;`"), "{msg}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn eps_is_auto_added_to_output_enums() {
        let src = "output o : enum { on, off };\nstate x : bool;\ninit o := on; x := false;\nnext o := on; x := x;\n";
        let ast = parse(src).unwrap();
        assert_eq!(
            ast.outputs[0].domain,
            VarDomain::Enum(vec!["eps".into(), "on".into(), "off".into()])
        );
    }

    #[test]
    fn non_enum_outputs_are_rejected() {
        let src = "output o : bool;\ninit o := true;\nnext o := o;\n";
        assert!(matches!(parse(src).unwrap_err(), LangError::Semantic(_)));
    }

    #[test]
    fn spans_cover_their_nodes() {
        let ast = parse(BEVERAGE_SOURCE).unwrap();
        for a in ast.init.iter().chain(ast.next.iter()) {
            assert!(a.span.start < a.span.end);
            assert!(a.span.end <= BEVERAGE_SOURCE.len());
            let rhs = a.rhs.span();
            assert!(a.span.start <= rhs.start && rhs.end <= a.span.end);
        }
    }

    #[test]
    fn comparison_chains_are_rejected() {
        let src = "state x : int[0..1];\noutput o : enum { eps };\ninit x := 0; o := eps;\nnext x := x; o := if (x = 0 = true): eps else: eps;\n";
        assert!(matches!(parse(src).unwrap_err(), LangError::Syntax { .. }));
    }

    #[test]
    fn negative_int_bounds_parse() {
        let src = "state x : int[-2..-1];\noutput o : enum { eps };\ninit x := -2; o := eps;\nnext x := x; o := eps;\n";
        let ast = parse(src).unwrap();
        assert_eq!(ast.states[0].domain, VarDomain::Int { lo: -2, hi: -1 });
    }
}
