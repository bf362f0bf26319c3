//! Syntactic mutation of models, and conditional mutants.
//!
//! A mutation is a single-site edit drawn from a closed operator catalogue
//! (arithmetic/relational/boolean operator exchanges, `!` insertion/removal,
//! integer constant replacement). A conditional mutant combines the original
//! and mutated model into one system guarded by a fresh frozen boolean state
//! variable `mut`: the mutated fragment is taken iff `mut` holds, so the
//! `mut=false` projection reproduces the original traces and the `mut=true`
//! projection the mutant's.

use crate::domain::{Value, VarDomain};
use crate::lang::{
    elaborate, render_expr, Assign, Expr, LangError, ModelAst, Rhs, Span, UnaryOp, VarDecl,
};
use crate::pred::{BinOp, Pred};
use crate::sts::Sts;
use thiserror::Error;

/// Name of the mutant-selection state variable.
pub const MUT_VAR: &str = "mut";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MutationError {
    #[error("mutation inapplicable at byte {offset}: {reason}")]
    Inapplicable { offset: usize, reason: String },
    #[error("model already declares `{0}`")]
    NameTaken(String),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error("not a conditional mutant: {0}")]
    NotConditional(String),
}

/// Which integer a constant is replaced by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstVariant {
    Zero,
    One,
    PlusOne,
    MinusOne,
}

/// The closed mutation operator catalogue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationOperator {
    SwapBinaryPlusMinus,
    /// Drops a unary minus (the grammar has no unary plus).
    SwapUnaryPlusMinus,
    SwapEqNeq,
    SwapRelational(BinOp),
    DropNot,
    InsertNot,
    SwapBoolConnective(BinOp),
    ReplaceIntConstant(ConstVariant),
}

impl MutationOperator {
    /// Stable tag used in mutation identifiers and reports.
    pub fn tag(&self) -> String {
        match self {
            MutationOperator::SwapBinaryPlusMinus => "swap-plus-minus".into(),
            MutationOperator::SwapUnaryPlusMinus => "swap-unary-plus-minus".into(),
            MutationOperator::SwapEqNeq => "swap-eq-neq".into(),
            MutationOperator::SwapRelational(op) => format!("swap-rel-{}", op_word(*op)),
            MutationOperator::DropNot => "drop-not".into(),
            MutationOperator::InsertNot => "insert-not".into(),
            MutationOperator::SwapBoolConnective(op) => format!("swap-bool-{}", op_word(*op)),
            MutationOperator::ReplaceIntConstant(v) => format!(
                "replace-const-{}",
                match v {
                    ConstVariant::Zero => "zero",
                    ConstVariant::One => "one",
                    ConstVariant::PlusOne => "plus1",
                    ConstVariant::MinusOne => "minus1",
                }
            ),
        }
    }
}

fn op_word(op: BinOp) -> &'static str {
    match op {
        BinOp::Lt => "lt",
        BinOp::Le => "le",
        BinOp::Gt => "gt",
        BinOp::Ge => "ge",
        BinOp::And => "and",
        BinOp::Or => "or",
        BinOp::Xor => "xor",
        BinOp::Xnor => "xnor",
        _ => "op",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteKind {
    Init,
    Next,
}

impl SiteKind {
    pub fn label(&self) -> &'static str {
        match self {
            SiteKind::Init => "init",
            SiteKind::Next => "next",
        }
    }
}

/// One navigation step from an assignment's rhs down to a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathStep {
    /// Into the branch rhs of arm `i` of an if-chain.
    IteArm(usize),
    IteElse,
    /// Into the guard expression of arm `i`.
    IteGuard(usize),
    /// Into element `i` of a set choice.
    SetElem(usize),
    /// Into the left/right operand of a binary expression.
    Left,
    Right,
    /// Into the operand of a unary expression.
    Operand,
}

/// Addressable mutation site: an assignment plus a path into its rhs.
#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub kind: SiteKind,
    pub assign_index: usize,
    pub path: Vec<PathStep>,
    /// Source span of the mutated node in the original text.
    pub span: Span,
}

/// A single applicable mutation with its rendered fragments.
#[derive(Debug, Clone, PartialEq)]
pub struct Mutation {
    pub operator: MutationOperator,
    pub site: Site,
    pub original: String,
    pub replacement: String,
}

impl Mutation {
    /// Stable identifier: `op-tag@byte-offset`.
    pub fn id(&self) -> String {
        format!("{}@{}", self.operator.tag(), self.site.span.start)
    }
}

/// Options for mutation enumeration.
#[derive(Debug, Clone)]
pub struct MutationOptions {
    /// Mutate init-block right-hand sides as well as next-block ones.
    pub include_init_sites: bool,
    /// Restrict to these operator tags (prefix match on `tag()`), empty = all.
    pub operator_filter: Vec<String>,
}

impl Default for MutationOptions {
    fn default() -> Self {
        MutationOptions { include_init_sites: true, operator_filter: Vec::new() }
    }
}

/// Enumerate every applicable (operator, site) pair in source order,
/// deduplicated: no replacement textually equal to the original fragment, and
/// no two mutations with equal site and replacement.
pub fn enumerate_mutations(ast: &ModelAst, opts: &MutationOptions) -> Vec<Mutation> {
    let mut out = Vec::new();
    if opts.include_init_sites {
        for (i, a) in ast.init.iter().enumerate() {
            collect_rhs(&a.rhs, SiteKind::Init, i, &mut Vec::new(), &mut out);
        }
    }
    for (i, a) in ast.next.iter().enumerate() {
        collect_rhs(&a.rhs, SiteKind::Next, i, &mut Vec::new(), &mut out);
    }
    // Source order; the stable sort keeps catalogue order at equal offsets.
    out.sort_by_key(|m| m.site.span.start);
    if !opts.operator_filter.is_empty() {
        out.retain(|m| opts.operator_filter.iter().any(|f| m.operator.tag().starts_with(f)));
    }
    // Drop duplicates that produce the same replacement at the same site.
    let mut seen: Vec<(Span, String)> = Vec::new();
    out.retain(|m| {
        let key = (m.site.span, m.replacement.clone());
        if seen.contains(&key) {
            false
        } else {
            seen.push(key);
            true
        }
    });
    out
}

fn collect_rhs(
    rhs: &Rhs,
    kind: SiteKind,
    assign_index: usize,
    path: &mut Vec<PathStep>,
    out: &mut Vec<Mutation>,
) {
    match rhs {
        Rhs::Expr(e) => collect_expr(e, kind, assign_index, path, out),
        Rhs::Set(elems, _) => {
            for (i, e) in elems.iter().enumerate() {
                path.push(PathStep::SetElem(i));
                collect_expr(e, kind, assign_index, path, out);
                path.pop();
            }
        }
        Rhs::Ite { arms, otherwise, .. } => {
            for (i, (guard, branch)) in arms.iter().enumerate() {
                path.push(PathStep::IteGuard(i));
                // Insert-not applies at guard positions, once per site.
                push_mutation(
                    out,
                    MutationOperator::InsertNot,
                    kind,
                    assign_index,
                    path,
                    guard.span(),
                    guard,
                    &Expr::Unary {
                        op: UnaryOp::Not,
                        operand: Box::new(guard.clone()),
                        span: guard.span(),
                    },
                );
                collect_expr(guard, kind, assign_index, path, out);
                path.pop();
                path.push(PathStep::IteArm(i));
                collect_rhs(branch, kind, assign_index, path, out);
                path.pop();
            }
            path.push(PathStep::IteElse);
            collect_rhs(otherwise, kind, assign_index, path, out);
            path.pop();
        }
    }
}

fn collect_expr(
    e: &Expr,
    kind: SiteKind,
    assign_index: usize,
    path: &mut Vec<PathStep>,
    out: &mut Vec<Mutation>,
) {
    match e {
        Expr::Bool(..) | Expr::Ident(..) => {}
        Expr::Int(c, span) => {
            let candidates = [
                (ConstVariant::Zero, 0),
                (ConstVariant::One, 1),
                (ConstVariant::PlusOne, c + 1),
                (ConstVariant::MinusOne, c - 1),
            ];
            for (variant, value) in candidates {
                if value == *c {
                    continue;
                }
                push_mutation(
                    out,
                    MutationOperator::ReplaceIntConstant(variant),
                    kind,
                    assign_index,
                    path,
                    *span,
                    e,
                    &int_expr(value, *span),
                );
            }
        }
        Expr::Unary { op, operand, span } => {
            match op {
                UnaryOp::Not => push_mutation(
                    out,
                    MutationOperator::DropNot,
                    kind,
                    assign_index,
                    path,
                    *span,
                    e,
                    operand,
                ),
                UnaryOp::Neg => push_mutation(
                    out,
                    MutationOperator::SwapUnaryPlusMinus,
                    kind,
                    assign_index,
                    path,
                    *span,
                    e,
                    operand,
                ),
            }
            path.push(PathStep::Operand);
            collect_expr(operand, kind, assign_index, path, out);
            path.pop();
        }
        Expr::Binary { op, lhs, rhs, span } => {
            let swaps: Vec<(MutationOperator, BinOp)> = match op {
                BinOp::Add => vec![(MutationOperator::SwapBinaryPlusMinus, BinOp::Sub)],
                BinOp::Sub => vec![(MutationOperator::SwapBinaryPlusMinus, BinOp::Add)],
                BinOp::Eq => vec![(MutationOperator::SwapEqNeq, BinOp::Neq)],
                BinOp::Neq => vec![(MutationOperator::SwapEqNeq, BinOp::Eq)],
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    [BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge]
                        .into_iter()
                        .filter(|o| o != op)
                        .map(|o| (MutationOperator::SwapRelational(o), o))
                        .collect()
                }
                BinOp::And | BinOp::Or | BinOp::Xor | BinOp::Xnor => {
                    [BinOp::And, BinOp::Or, BinOp::Xor, BinOp::Xnor]
                        .into_iter()
                        .filter(|o| o != op)
                        .map(|o| (MutationOperator::SwapBoolConnective(o), o))
                        .collect()
                }
                _ => vec![],
            };
            for (operator, new_op) in swaps {
                let replaced =
                    Expr::Binary { op: new_op, lhs: lhs.clone(), rhs: rhs.clone(), span: *span };
                push_mutation(out, operator, kind, assign_index, path, *span, e, &replaced);
            }
            path.push(PathStep::Left);
            collect_expr(lhs, kind, assign_index, path, out);
            path.pop();
            path.push(PathStep::Right);
            collect_expr(rhs, kind, assign_index, path, out);
            path.pop();
        }
    }
}

fn int_expr(value: i64, span: Span) -> Expr {
    if value < 0 {
        Expr::Unary { op: UnaryOp::Neg, operand: Box::new(Expr::Int(-value, span)), span }
    } else {
        Expr::Int(value, span)
    }
}

#[allow(clippy::too_many_arguments)]
fn push_mutation(
    out: &mut Vec<Mutation>,
    operator: MutationOperator,
    kind: SiteKind,
    assign_index: usize,
    path: &[PathStep],
    span: Span,
    original: &Expr,
    replacement: &Expr,
) {
    let mut orig_text = String::new();
    render_expr(original, &mut orig_text);
    let mut repl_text = String::new();
    render_expr(replacement, &mut repl_text);
    if orig_text == repl_text {
        return;
    }
    out.push(Mutation {
        operator,
        site: Site { kind, assign_index, path: path.to_vec(), span },
        original: orig_text,
        replacement: repl_text,
    });
}

/// Apply a mutation to a model, producing the mutated AST.
pub fn apply_mutation(ast: &ModelAst, m: &Mutation) -> Result<ModelAst, MutationError> {
    let mut mutated = ast.clone();
    let assign = target_assign_mut(&mut mutated, &m.site)?;
    let (expr, _) = resolve_site_mut(&mut assign.rhs, &m.site)?;
    *expr = mutate_expr(expr, m)?;
    Ok(mutated)
}

fn target_assign_mut<'a>(
    ast: &'a mut ModelAst,
    site: &Site,
) -> Result<&'a mut Assign, MutationError> {
    let block = match site.kind {
        SiteKind::Init => &mut ast.init,
        SiteKind::Next => &mut ast.next,
    };
    block.get_mut(site.assign_index).ok_or_else(|| MutationError::Inapplicable {
        offset: site.span.start,
        reason: "assignment index out of range".into(),
    })
}

/// Walk a site path and return the addressed expression plus whether the path
/// went through a guard position.
fn resolve_site_mut<'a>(
    rhs: &'a mut Rhs,
    site: &Site,
) -> Result<(&'a mut Expr, bool), MutationError> {
    let offset = site.span.start;
    let bad = |reason: &str| MutationError::Inapplicable {
        offset,
        reason: reason.to_string(),
    };
    let mut in_guard = false;
    enum Cursor<'b> {
        AtRhs(&'b mut Rhs),
        AtExpr(&'b mut Expr),
    }
    let mut cur = Cursor::AtRhs(rhs);
    for step in &site.path {
        cur = match (step, cur) {
            (PathStep::IteArm(i), Cursor::AtRhs(Rhs::Ite { arms, .. })) => {
                Cursor::AtRhs(&mut arms.get_mut(*i).ok_or_else(|| bad("arm index"))?.1)
            }
            (PathStep::IteElse, Cursor::AtRhs(Rhs::Ite { otherwise, .. })) => {
                Cursor::AtRhs(otherwise)
            }
            (PathStep::IteGuard(i), Cursor::AtRhs(Rhs::Ite { arms, .. })) => {
                in_guard = true;
                Cursor::AtExpr(&mut arms.get_mut(*i).ok_or_else(|| bad("guard index"))?.0)
            }
            (PathStep::SetElem(i), Cursor::AtRhs(Rhs::Set(elems, _))) => {
                Cursor::AtExpr(elems.get_mut(*i).ok_or_else(|| bad("set index"))?)
            }
            (step, cursor) => {
                let expr = match cursor {
                    Cursor::AtExpr(e) => e,
                    Cursor::AtRhs(Rhs::Expr(e)) => e,
                    _ => return Err(bad("path does not address an expression")),
                };
                match (step, expr) {
                    (PathStep::Left, Expr::Binary { lhs, .. }) => Cursor::AtExpr(lhs),
                    (PathStep::Right, Expr::Binary { rhs, .. }) => Cursor::AtExpr(rhs),
                    (PathStep::Operand, Expr::Unary { operand, .. }) => Cursor::AtExpr(operand),
                    _ => return Err(bad("path step does not match the node")),
                }
            }
        };
    }
    match cur {
        Cursor::AtExpr(e) => Ok((e, in_guard)),
        Cursor::AtRhs(Rhs::Expr(e)) => Ok((e, in_guard)),
        _ => Err(bad("path does not address an expression")),
    }
}

fn mutate_expr(expr: &Expr, m: &Mutation) -> Result<Expr, MutationError> {
    let bad = |reason: &str| MutationError::Inapplicable {
        offset: m.site.span.start,
        reason: reason.to_string(),
    };
    Ok(match (&m.operator, expr) {
        (MutationOperator::SwapBinaryPlusMinus, Expr::Binary { op, lhs, rhs, span })
            if matches!(op, BinOp::Add | BinOp::Sub) =>
        {
            let new_op = if *op == BinOp::Add { BinOp::Sub } else { BinOp::Add };
            Expr::Binary { op: new_op, lhs: lhs.clone(), rhs: rhs.clone(), span: *span }
        }
        (MutationOperator::SwapUnaryPlusMinus, Expr::Unary { op: UnaryOp::Neg, operand, .. }) => {
            (**operand).clone()
        }
        (MutationOperator::SwapEqNeq, Expr::Binary { op, lhs, rhs, span })
            if matches!(op, BinOp::Eq | BinOp::Neq) =>
        {
            let new_op = if *op == BinOp::Eq { BinOp::Neq } else { BinOp::Eq };
            Expr::Binary { op: new_op, lhs: lhs.clone(), rhs: rhs.clone(), span: *span }
        }
        (MutationOperator::SwapRelational(to), Expr::Binary { op, lhs, rhs, span })
            if matches!(op, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge) =>
        {
            Expr::Binary { op: *to, lhs: lhs.clone(), rhs: rhs.clone(), span: *span }
        }
        (MutationOperator::DropNot, Expr::Unary { op: UnaryOp::Not, operand, .. }) => {
            (**operand).clone()
        }
        (MutationOperator::InsertNot, guard) => Expr::Unary {
            op: UnaryOp::Not,
            operand: Box::new(guard.clone()),
            span: guard.span(),
        },
        (MutationOperator::SwapBoolConnective(to), Expr::Binary { op, lhs, rhs, span })
            if matches!(op, BinOp::And | BinOp::Or | BinOp::Xor | BinOp::Xnor) =>
        {
            Expr::Binary { op: *to, lhs: lhs.clone(), rhs: rhs.clone(), span: *span }
        }
        (MutationOperator::ReplaceIntConstant(variant), Expr::Int(c, span)) => {
            let value = match variant {
                ConstVariant::Zero => 0,
                ConstVariant::One => 1,
                ConstVariant::PlusOne => c + 1,
                ConstVariant::MinusOne => c - 1,
            };
            int_expr(value, *span)
        }
        _ => return Err(bad("operator does not match the addressed node")),
    })
}

/// A combined original+mutant system selected by the frozen `mut` variable.
#[derive(Debug, Clone)]
pub struct ConditionalMutant {
    /// Elaborated system whose state set includes `mut`.
    pub sts: Sts,
    /// The combined AST (with `mut` declared and wired in).
    pub combined: ModelAst,
    /// The unmodified source model.
    pub original: ModelAst,
    /// Catalogue mutation, when the mutant came from one.
    pub mutation: Option<Mutation>,
}

impl ConditionalMutant {
    /// Substitute a fixed `mut` value and drop the variable: the resulting
    /// system's traces are the conditional mutant's traces with that `mut`
    /// value, restricted to the original variables.
    pub fn project(&self, mut_value: bool) -> Sts {
        project_sts(&self.sts, mut_value)
    }

    /// Wrap a model that already carries the `mut` machinery (a handwritten
    /// conditional mutant) without going through the catalogue.
    pub fn from_model_with_mut(
        combined: ModelAst,
        original: ModelAst,
    ) -> Result<Self, MutationError> {
        let decl = combined
            .states
            .iter()
            .find(|d| d.name == MUT_VAR)
            .ok_or_else(|| MutationError::NotConditional(format!("no state `{MUT_VAR}`")))?;
        if decl.domain != VarDomain::Bool {
            return Err(MutationError::NotConditional(format!("`{MUT_VAR}` must be bool")));
        }
        let frozen = combined.next.iter().any(|a| {
            a.target == MUT_VAR
                && matches!(&a.rhs, Rhs::Expr(Expr::Ident(n, _)) if n == MUT_VAR)
        });
        if !frozen {
            return Err(MutationError::NotConditional(format!(
                "`{MUT_VAR}` must be frozen by `{MUT_VAR} := {MUT_VAR};`"
            )));
        }
        let sts = elaborate(&combined)?;
        // Both polarities must be initial.
        let mut saw = (false, false);
        for (_, x) in sts
            .initial_pairs_allow_empty()
            .map_err(|e| MutationError::NotConditional(e.to_string()))?
        {
            match x.get(MUT_VAR).and_then(|v| v.as_bool()) {
                Some(false) => saw.0 = true,
                Some(true) => saw.1 = true,
                None => {}
            }
        }
        if !(saw.0 && saw.1) {
            return Err(MutationError::NotConditional(format!(
                "`{MUT_VAR}` must be initialized non-deterministically"
            )));
        }
        Ok(ConditionalMutant { sts, combined, original, mutation: None })
    }

    pub fn id(&self) -> String {
        self.mutation.as_ref().map(|m| m.id()).unwrap_or_else(|| "handwritten".into())
    }
}

/// Fix `mut` in any system whose state set carries it (a conditional mutant
/// or its determinized counterpart) and drop the variable.
pub fn project_sts(sts: &Sts, mut_value: bool) -> Sts {
    let value = Value::Bool(mut_value);
    let states = crate::sts::VarSet::new(
        sts.states.vars().iter().filter(|(n, _)| n != MUT_VAR).cloned().collect(),
    );
    Sts {
        inputs: sts.inputs.clone(),
        outputs: sts.outputs.clone(),
        states,
        init: subst_var(&sts.init, MUT_VAR, &value),
        trans: subst_var(&sts.trans, MUT_VAR, &value),
    }
}

fn subst_var(pred: &Pred, name: &str, value: &Value) -> Pred {
    match pred {
        Pred::Const(_) => pred.clone(),
        Pred::Var { name: n, .. } if n == name => Pred::Const(value.clone()),
        Pred::Var { .. } => pred.clone(),
        Pred::Not(p) => Pred::Not(Box::new(subst_var(p, name, value))),
        Pred::Neg(p) => Pred::Neg(Box::new(subst_var(p, name, value))),
        Pred::Binary { op, lhs, rhs } => Pred::Binary {
            op: *op,
            lhs: Box::new(subst_var(lhs, name, value)),
            rhs: Box::new(subst_var(rhs, name, value)),
        },
        Pred::Ite { arms, otherwise } => Pred::Ite {
            arms: arms
                .iter()
                .map(|(g, v)| (subst_var(g, name, value), subst_var(v, name, value)))
                .collect(),
            otherwise: Box::new(subst_var(otherwise, name, value)),
        },
        Pred::SetChoice(elems) => {
            Pred::SetChoice(elems.iter().map(|e| subst_var(e, name, value)).collect())
        }
        Pred::Membership { lhs, set } => Pred::Membership {
            lhs: Box::new(subst_var(lhs, name, value)),
            set: Box::new(subst_var(set, name, value)),
        },
    }
}

/// Build the conditional mutant for a catalogue mutation: declares `mut`,
/// initializes it non-deterministically, freezes it, and wraps the mutated
/// fragment so it is taken iff `mut` holds. Constant replacements whose value
/// falls outside the target variable's domain are rejected.
pub fn build_conditional_mutant(
    ast: &ModelAst,
    m: &Mutation,
) -> Result<ConditionalMutant, MutationError> {
    if ast.decl(MUT_VAR).is_some() || ast.enum_literals().contains(&MUT_VAR) {
        return Err(MutationError::NameTaken(MUT_VAR.into()));
    }
    reject_out_of_domain(ast, m)?;

    let mut combined = ast.clone();
    combined.states.push(VarDecl {
        name: MUT_VAR.into(),
        domain: VarDomain::Bool,
        span: Span::default(),
    });

    {
        let assign = target_assign_mut(&mut combined, &m.site)?;
        let span = assign.rhs.span();
        let guard_pos = m.site.path.iter().position(|s| matches!(s, PathStep::IteGuard(_)));
        if let Some(pos) = guard_pos {
            // Mutation inside a guard: the guard becomes
            // (mut && g_mutated) || (!mut && g).
            let guard_site = Site { path: m.site.path[..=pos].to_vec(), ..m.site.clone() };
            let (guard, _) = resolve_site_mut(&mut assign.rhs, &guard_site)?;
            let original_guard = guard.clone();
            let sub_path = m.site.path[pos + 1..].to_vec();
            let mutated_guard = {
                let mut g = original_guard.clone();
                let target = resolve_expr_path_mut(&mut g, &sub_path, m.site.span.start)?;
                *target = mutate_expr(target, m)?;
                g
            };
            let gspan = original_guard.span();
            *guard = Expr::Binary {
                op: BinOp::Or,
                lhs: Box::new(Expr::Binary {
                    op: BinOp::And,
                    lhs: Box::new(Expr::Ident(MUT_VAR.into(), gspan)),
                    rhs: Box::new(mutated_guard),
                    span: gspan,
                }),
                rhs: Box::new(Expr::Binary {
                    op: BinOp::And,
                    lhs: Box::new(Expr::Unary {
                        op: UnaryOp::Not,
                        operand: Box::new(Expr::Ident(MUT_VAR.into(), gspan)),
                        span: gspan,
                    }),
                    rhs: Box::new(original_guard),
                    span: gspan,
                }),
                span: gspan,
            };
        } else {
            // Mutation inside a value position: wrap the innermost enclosing
            // leaf rhs as `if (mut): mutated else: original`.
            let leaf_prefix: Vec<PathStep> = m
                .site
                .path
                .iter()
                .take_while(|s| matches!(s, PathStep::IteArm(_) | PathStep::IteElse))
                .cloned()
                .collect();
            let leaf = resolve_rhs_path_mut(&mut assign.rhs, &leaf_prefix, m.site.span.start)?;
            let original_leaf = leaf.clone();
            let sub_site =
                Site { path: m.site.path[leaf_prefix.len()..].to_vec(), ..m.site.clone() };
            let mutated_leaf = {
                let mut l = original_leaf.clone();
                let (target, _) = resolve_site_mut(&mut l, &sub_site)?;
                *target = mutate_expr(target, m)?;
                l
            };
            *leaf = Rhs::Ite {
                arms: vec![(Expr::Ident(MUT_VAR.into(), span), mutated_leaf)],
                otherwise: Box::new(original_leaf),
                span,
            };
        }
    }

    combined.init.push(Assign {
        target: MUT_VAR.into(),
        rhs: Rhs::Set(
            vec![Expr::Bool(false, Span::default()), Expr::Bool(true, Span::default())],
            Span::default(),
        ),
        span: Span::default(),
    });
    combined.next.push(Assign {
        target: MUT_VAR.into(),
        rhs: Rhs::Expr(Expr::Ident(MUT_VAR.into(), Span::default())),
        span: Span::default(),
    });

    let sts = elaborate(&combined)?;
    Ok(ConditionalMutant { sts, combined, original: ast.clone(), mutation: Some(m.clone()) })
}

fn resolve_rhs_path_mut<'a>(
    rhs: &'a mut Rhs,
    path: &[PathStep],
    offset: usize,
) -> Result<&'a mut Rhs, MutationError> {
    let mut cur = rhs;
    for step in path {
        cur = match (step, cur) {
            (PathStep::IteArm(i), Rhs::Ite { arms, .. }) => {
                &mut arms
                    .get_mut(*i)
                    .ok_or(MutationError::Inapplicable {
                        offset,
                        reason: "arm index out of range".into(),
                    })?
                    .1
            }
            (PathStep::IteElse, Rhs::Ite { otherwise, .. }) => otherwise,
            _ => {
                return Err(MutationError::Inapplicable {
                    offset,
                    reason: "path does not address an rhs".into(),
                })
            }
        };
    }
    Ok(cur)
}

fn resolve_expr_path_mut<'a>(
    expr: &'a mut Expr,
    path: &[PathStep],
    offset: usize,
) -> Result<&'a mut Expr, MutationError> {
    let mut cur = expr;
    for step in path {
        cur = match (step, cur) {
            (PathStep::Left, Expr::Binary { lhs, .. }) => lhs,
            (PathStep::Right, Expr::Binary { rhs, .. }) => rhs,
            (PathStep::Operand, Expr::Unary { operand, .. }) => operand,
            _ => {
                return Err(MutationError::Inapplicable {
                    offset,
                    reason: "path does not address an expression".into(),
                })
            }
        };
    }
    Ok(cur)
}

/// Reject constant replacements that land outside the assigned variable's
/// domain when the constant is a direct value leaf (the whole rhs expression
/// or a set element). Constants embedded in larger expressions are
/// unconstrained: arithmetic is over unbounded integers.
fn reject_out_of_domain(ast: &ModelAst, m: &Mutation) -> Result<(), MutationError> {
    let MutationOperator::ReplaceIntConstant(variant) = m.operator else {
        return Ok(());
    };
    let is_leaf = m
        .site
        .path
        .iter()
        .all(|s| matches!(s, PathStep::IteArm(_) | PathStep::IteElse | PathStep::SetElem(_)));
    if !is_leaf {
        return Ok(());
    }
    let block = match m.site.kind {
        SiteKind::Init => &ast.init,
        SiteKind::Next => &ast.next,
    };
    let assign = &block[m.site.assign_index];
    let Some(decl) = ast.decl(&assign.target) else {
        return Ok(());
    };
    let VarDomain::Int { lo, hi } = decl.domain else {
        return Ok(());
    };
    let mut probe = assign.rhs.clone();
    let (expr, _) = resolve_site_mut(&mut probe, &m.site)?;
    let Expr::Int(c, _) = expr else {
        return Ok(());
    };
    let value = match variant {
        ConstVariant::Zero => 0,
        ConstVariant::One => 1,
        ConstVariant::PlusOne => *c + 1,
        ConstVariant::MinusOne => *c - 1,
    };
    if value < lo || value > hi {
        return Err(MutationError::Inapplicable {
            offset: m.site.span.start,
            reason: format!(
                "replacement {value} outside domain [{lo}..{hi}] of `{}`",
                assign.target
            ),
        });
    }
    Ok(())
}

/// The single contiguous byte region where two renderings differ, as
/// `(start, end_in_a, end_in_b)`; `None` when the texts are equal.
pub fn single_edit_region(original: &str, mutated: &str) -> Option<(usize, usize, usize)> {
    if original == mutated {
        return None;
    }
    let a = original.as_bytes();
    let b = mutated.as_bytes();
    let mut start = 0;
    while start < a.len() && start < b.len() && a[start] == b[start] {
        start += 1;
    }
    let mut end_a = a.len();
    let mut end_b = b.len();
    while end_a > start && end_b > start && a[end_a - 1] == b[end_b - 1] {
        end_a -= 1;
        end_b -= 1;
    }
    Some((start, end_a, end_b))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::domain::{enum_v, int_v, Valuation};
    use crate::lang::{parse, render, BEVERAGE_SOURCE};
    use crate::sts::Budget;

    fn beverage_ast() -> ModelAst {
        parse(BEVERAGE_SOURCE).unwrap()
    }

    /// The running-example mutant: the fill branch refills 1 unit instead of 2.
    pub(crate) fn fill_mutation(ast: &ModelAst) -> Mutation {
        enumerate_mutations(ast, &MutationOptions::default())
            .into_iter()
            .find(|m| m.site.kind == SiteKind::Next && m.original == "2" && m.replacement == "1")
            .expect("fill-constant mutation exists")
    }

    #[test]
    fn catalogue_covers_beverage_sites() {
        let ast = beverage_ast();
        let muts = enumerate_mutations(&ast, &MutationOptions::default());
        let tags: Vec<String> = muts.iter().map(|m| m.operator.tag()).collect();
        assert!(tags.iter().any(|t| t == "swap-plus-minus"), "{tags:?}");
        assert!(tags.iter().any(|t| t.starts_with("swap-rel-")));
        assert!(tags.iter().any(|t| t == "swap-eq-neq"));
        assert!(tags.iter().any(|t| t.starts_with("swap-bool-")));
        assert!(tags.iter().any(|t| t == "insert-not"));
        assert!(tags.iter().any(|t| t.starts_with("replace-const-")));
        // No negation or unary minus in the source: those classes are absent.
        assert!(!tags.iter().any(|t| t == "drop-not"));
        assert!(!tags.iter().any(|t| t == "swap-unary-plus-minus"));
    }

    #[test]
    fn wtr_minus_one_swaps_to_plus() {
        let ast = beverage_ast();
        let muts = enumerate_mutations(&ast, &MutationOptions::default());
        let swap =
            muts.iter().find(|m| m.operator == MutationOperator::SwapBinaryPlusMinus).unwrap();
        assert_eq!(swap.original, "wtr - 1");
        assert_eq!(swap.replacement, "wtr + 1");
    }

    #[test]
    fn constant_two_replacements_deduplicate() {
        let ast = beverage_ast();
        let muts = enumerate_mutations(&ast, &MutationOptions::default());
        // The fill-branch constant 2 (a next-block site).
        let repl: Vec<&str> = muts
            .iter()
            .filter(|m| {
                m.site.kind == SiteKind::Next
                    && m.original == "2"
                    && m.operator.tag().starts_with("replace-const")
            })
            .map(|m| m.replacement.as_str())
            .collect();
        assert_eq!(repl, vec!["0", "1", "3"]);
    }

    #[test]
    fn enum_only_model_has_no_mutations() {
        let src = "output o : enum { eps, a };\ninit o := a;\nnext o := o;\n";
        let ast = parse(src).unwrap();
        assert!(enumerate_mutations(&ast, &MutationOptions::default()).is_empty());
    }

    #[test]
    fn mutations_are_unique() {
        let ast = beverage_ast();
        let muts = enumerate_mutations(&ast, &MutationOptions::default());
        let mut keys: Vec<(usize, &str)> =
            muts.iter().map(|m| (m.site.span.start, m.replacement.as_str())).collect();
        let before = keys.len();
        keys.sort();
        keys.dedup();
        assert_eq!(before, keys.len());
        let mut ids: Vec<String> = muts.iter().map(|m| m.id()).collect();
        ids.sort();
        let n = ids.len();
        ids.dedup();
        assert_eq!(n, ids.len(), "identifiers must be unique");
    }

    #[test]
    fn applying_a_mutation_is_a_single_edit() {
        let ast = beverage_ast();
        let rendered = render(&ast);
        for m in enumerate_mutations(&ast, &MutationOptions::default()) {
            let mutated = apply_mutation(&ast, &m).unwrap();
            let out = render(&mutated);
            assert!(single_edit_region(&rendered, &out).is_some(), "{} produced no edit", m.id());
            parse(&out).unwrap();
        }
    }

    #[test]
    fn conditional_mutant_matches_figure_semantics() {
        let ast = beverage_ast();
        let cm = build_conditional_mutant(&ast, &fill_mutation(&ast)).unwrap();
        // mut active: filling from wtr=1 yields 1 unit.
        let state = Valuation::from_pairs(&[("wtr", int_v(1)), ("mut", Value::Bool(true))]);
        let input = Valuation::from_pairs(&[("in", enum_v("fill"))]);
        let succ = cm.sts.successors(&state, &input).unwrap();
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].0.get("out"), Some(&enum_v("eps")));
        assert_eq!(succ[0].1.get("wtr"), Some(&int_v(1)));
        assert_eq!(succ[0].1.get("mut"), Some(&Value::Bool(true)));
        // mut inactive: the original 2-unit refill.
        let state0 = Valuation::from_pairs(&[("wtr", int_v(1)), ("mut", Value::Bool(false))]);
        let succ0 = cm.sts.successors(&state0, &input).unwrap();
        assert_eq!(succ0[0].1.get("wtr"), Some(&int_v(2)));
    }

    #[test]
    fn false_projection_reproduces_original_traces() {
        let ast = beverage_ast();
        let original = crate::lang::elaborate(&ast).unwrap();
        let cm = build_conditional_mutant(&ast, &fill_mutation(&ast)).unwrap();
        let projected = cm.project(false);
        let a = original.enumerate_traces(4, &mut Budget::default()).unwrap();
        let b = projected.enumerate_traces(4, &mut Budget::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn true_projection_follows_the_mutant() {
        let ast = beverage_ast();
        let cm = build_conditional_mutant(&ast, &fill_mutation(&ast)).unwrap();
        let mutant = cm.project(true);
        let state = Valuation::from_pairs(&[("wtr", int_v(1))]);
        let input = Valuation::from_pairs(&[("in", enum_v("fill"))]);
        let succ = mutant.successors(&state, &input).unwrap();
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].1.get("wtr"), Some(&int_v(1)));
    }

    #[test]
    fn mut_is_constant_along_traces() {
        let ast = beverage_ast();
        let cm = build_conditional_mutant(&ast, &fill_mutation(&ast)).unwrap();
        for t in cm.sts.enumerate_traces(3, &mut Budget::default()).unwrap() {
            let first = t.0[0].state.get(MUT_VAR).unwrap().clone();
            assert!(t.0.iter().all(|s| s.state.get(MUT_VAR) == Some(&first)));
        }
    }

    #[test]
    fn projections_are_equally_input_enabled() {
        let ast = beverage_ast();
        let cm = build_conditional_mutant(&ast, &fill_mutation(&ast)).unwrap();
        for depth in 0..=3 {
            let collect = |sts: &Sts| {
                let mut seqs: Vec<Vec<Valuation>> = sts
                    .enumerate_traces(depth, &mut Budget::default())
                    .unwrap()
                    .iter()
                    .map(|t| t.inputs())
                    .collect();
                seqs.sort();
                seqs.dedup();
                seqs
            };
            assert_eq!(collect(&cm.project(false)), collect(&cm.project(true)));
        }
    }

    #[test]
    fn identity_like_mutant_projections_agree() {
        // A handwritten conditional mutant whose branches are identical.
        let combined_src = "\
input i : bool;
output o : enum { eps, a };
state mut : bool;
init o := eps; mut := {false, true};
next o := if (mut): a else: a; mut := mut;
";
        let original_src = "\
input i : bool;
output o : enum { eps, a };
init o := eps;
next o := a;
";
        let cm = ConditionalMutant::from_model_with_mut(
            parse(combined_src).unwrap(),
            parse(original_src).unwrap(),
        )
        .unwrap();
        let a = cm.project(false);
        let b = cm.project(true);
        for depth in 0..=3 {
            assert_eq!(
                a.enumerate_traces(depth, &mut Budget::default()).unwrap(),
                b.enumerate_traces(depth, &mut Budget::default()).unwrap()
            );
        }
    }

    #[test]
    fn out_of_domain_replacement_is_rejected() {
        let ast = beverage_ast();
        let muts = enumerate_mutations(&ast, &MutationOptions::default());
        let three = muts
            .iter()
            .find(|m| m.site.kind == SiteKind::Next && m.original == "2" && m.replacement == "3")
            .unwrap();
        let err = build_conditional_mutant(&ast, three).unwrap_err();
        assert!(matches!(err, MutationError::Inapplicable { .. }), "{err}");
    }

    #[test]
    fn guard_mutation_wraps_with_mut_polarity() {
        let ast = beverage_ast();
        let muts = enumerate_mutations(&ast, &MutationOptions::default());
        let insert = muts.iter().find(|m| m.operator == MutationOperator::InsertNot).unwrap();
        let cm = build_conditional_mutant(&ast, insert).unwrap();
        let rendered = render(&cm.combined);
        assert!(rendered.contains("mut &&"), "{rendered}");
        assert!(rendered.contains("!mut &&"), "{rendered}");
        parse(&rendered).unwrap();
    }

    #[test]
    fn init_sites_can_be_disabled() {
        let ast = beverage_ast();
        let all = enumerate_mutations(&ast, &MutationOptions::default());
        let no_init = enumerate_mutations(
            &ast,
            &MutationOptions { include_init_sites: false, ..Default::default() },
        );
        assert!(all.iter().any(|m| m.site.kind == SiteKind::Init));
        assert!(no_init.iter().all(|m| m.site.kind == SiteKind::Next));
        assert!(no_init.len() < all.len());
    }
}
