//! Predicate expressions over finite-domain variables, and their evaluation.
//!
//! Predicates house both the initial-conditions formula (over outputs and
//! states) and the transition-relation formula (over inputs, outputs, states,
//! and primed successor states). Integer arithmetic is evaluated over
//! unbounded integers; domains constrain only the assignments enumerated by
//! the caller, so an intermediate out-of-domain value is not an error.

use crate::domain::{Valuation, Value};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    And,
    Or,
    Implies,
    Iff,
    Xor,
    Xnor,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Implies => "->",
            BinOp::Iff => "<->",
            BinOp::Xor => "xor",
            BinOp::Xnor => "xnor",
            BinOp::Eq => "=",
            BinOp::Neq => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
        }
    }
}

/// Expression tree over typed finite-domain variables.
///
/// `SetChoice` nodes are only meaningful inside `Membership` nodes; evaluating
/// one bare is an error. A primed `Var` names a successor-state variable, or
/// an output variable (outputs carry no previous value in the transition
/// relation, so a primed output reference is an alias for the unprimed one).
#[derive(Debug, Clone, PartialEq)]
pub enum Pred {
    Const(Value),
    Var { name: String, primed: bool },
    Not(Box<Pred>),
    Neg(Box<Pred>),
    Binary { op: BinOp, lhs: Box<Pred>, rhs: Box<Pred> },
    /// Guarded chain: first arm whose guard holds selects the value; `otherwise` otherwise.
    Ite { arms: Vec<(Pred, Pred)>, otherwise: Box<Pred> },
    /// `{e1, ..., ek}` — a non-deterministic choice among the listed values.
    SetChoice(Vec<Pred>),
    /// `lhs ∈ set` where `set` may be a `SetChoice`, an `Ite` over set
    /// expressions, or a plain expression (treated as a singleton).
    Membership { lhs: Box<Pred>, set: Box<Pred> },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("unbound variable `{}{}`", .0, if *.1 { "'" } else { "" })]
    Unbound(String, bool),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("set choice evaluated outside a membership")]
    BareSetChoice,
}

/// Evaluation environment: `current` covers inputs, outputs, and source
/// states; `primed` covers successor states. Primed output references fall
/// back to `current`.
#[derive(Debug, Clone, Copy)]
pub struct Env<'a> {
    pub current: &'a Valuation,
    pub primed: Option<&'a Valuation>,
}

impl<'a> Env<'a> {
    pub fn current_only(current: &'a Valuation) -> Self {
        Env { current, primed: None }
    }

    fn lookup(&self, name: &str, primed: bool) -> Result<Value, EvalError> {
        if primed {
            if let Some(p) = self.primed {
                if let Some(v) = p.get(name) {
                    return Ok(v.clone());
                }
            }
            // Primed outputs alias the transition output in `current`.
            if let Some(v) = self.current.get(name) {
                return Ok(v.clone());
            }
            return Err(EvalError::Unbound(name.to_string(), true));
        }
        self.current
            .get(name)
            .cloned()
            .ok_or_else(|| EvalError::Unbound(name.to_string(), false))
    }
}

/// Evaluate `pred` under `env` to a concrete value.
pub fn eval_pred(pred: &Pred, env: &Env) -> Result<Value, EvalError> {
    match pred {
        Pred::Const(v) => Ok(v.clone()),
        Pred::Var { name, primed } => env.lookup(name, *primed),
        Pred::Not(p) => {
            let v = eval_pred(p, env)?;
            match v {
                Value::Bool(b) => Ok(Value::Bool(!b)),
                other => Err(EvalError::TypeMismatch(format!("! applied to {other}"))),
            }
        }
        Pred::Neg(p) => {
            let v = eval_pred(p, env)?;
            match v {
                Value::Int(i) => Ok(Value::Int(-i)),
                other => Err(EvalError::TypeMismatch(format!("unary - applied to {other}"))),
            }
        }
        Pred::Binary { op, lhs, rhs } => eval_binary(*op, lhs, rhs, env),
        Pred::Ite { arms, otherwise } => {
            for (guard, value) in arms {
                if eval_bool(guard, env)? {
                    return eval_pred(value, env);
                }
            }
            eval_pred(otherwise, env)
        }
        Pred::SetChoice(_) => Err(EvalError::BareSetChoice),
        Pred::Membership { lhs, set } => {
            let v = eval_pred(lhs, env)?;
            Ok(Value::Bool(set_contains(set, &v, env)?))
        }
    }
}

/// Evaluate a predicate expected to be boolean.
pub fn eval_bool(pred: &Pred, env: &Env) -> Result<bool, EvalError> {
    match eval_pred(pred, env)? {
        Value::Bool(b) => Ok(b),
        other => Err(EvalError::TypeMismatch(format!("expected bool, got {other}"))),
    }
}

/// Does the set expression contain `v`? Recurses through `Ite` branches so
/// set choices never need to be materialized.
fn set_contains(set: &Pred, v: &Value, env: &Env) -> Result<bool, EvalError> {
    match set {
        Pred::SetChoice(elems) => {
            for e in elems {
                if values_equal(&eval_pred(e, env)?, v)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Pred::Ite { arms, otherwise } => {
            for (guard, branch) in arms {
                if eval_bool(guard, env)? {
                    return set_contains(branch, v, env);
                }
            }
            set_contains(otherwise, v, env)
        }
        other => values_equal(&eval_pred(other, env)?, v),
    }
}

fn values_equal(a: &Value, b: &Value) -> Result<bool, EvalError> {
    match (a, b) {
        (Value::Bool(x), Value::Bool(y)) => Ok(x == y),
        (Value::Int(x), Value::Int(y)) => Ok(x == y),
        (Value::Enum(x), Value::Enum(y)) => Ok(x == y),
        _ => Err(EvalError::TypeMismatch(format!("comparing {a} with {b}"))),
    }
}

fn eval_binary(op: BinOp, lhs: &Pred, rhs: &Pred, env: &Env) -> Result<Value, EvalError> {
    use BinOp::*;
    // Short-circuit the boolean connectives that allow it.
    match op {
        And => {
            return Ok(Value::Bool(eval_bool(lhs, env)? && eval_bool(rhs, env)?));
        }
        Or => {
            return Ok(Value::Bool(eval_bool(lhs, env)? || eval_bool(rhs, env)?));
        }
        Implies => {
            return Ok(Value::Bool(!eval_bool(lhs, env)? || eval_bool(rhs, env)?));
        }
        _ => {}
    }
    let a = eval_pred(lhs, env)?;
    let b = eval_pred(rhs, env)?;
    match op {
        Add | Sub => match (&a, &b) {
            (Value::Int(x), Value::Int(y)) => Ok(Value::Int(if op == Add { x + y } else { x - y })),
            _ => Err(EvalError::TypeMismatch(format!("{} on {a} and {b}", op.symbol()))),
        },
        Iff | Xor | Xnor => match (&a, &b) {
            (Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(match op {
                Iff | Xnor => x == y,
                _ => x != y,
            })),
            _ => Err(EvalError::TypeMismatch(format!("{} on {a} and {b}", op.symbol()))),
        },
        Eq => Ok(Value::Bool(values_equal(&a, &b)?)),
        Neq => Ok(Value::Bool(!values_equal(&a, &b)?)),
        Lt | Le | Gt | Ge => match (&a, &b) {
            (Value::Int(x), Value::Int(y)) => Ok(Value::Bool(match op {
                Lt => x < y,
                Le => x <= y,
                Gt => x > y,
                _ => x >= y,
            })),
            _ => Err(EvalError::TypeMismatch(format!("{} on {a} and {b}", op.symbol()))),
        },
        And | Or | Implies => unreachable!(),
    }
}

/// Variables referenced by a predicate, as `(name, primed)` pairs.
pub fn referenced_vars(pred: &Pred, out: &mut Vec<(String, bool)>) {
    match pred {
        Pred::Const(_) => {}
        Pred::Var { name, primed } => {
            if !out.iter().any(|(n, p)| n == name && p == primed) {
                out.push((name.clone(), *primed));
            }
        }
        Pred::Not(p) | Pred::Neg(p) => referenced_vars(p, out),
        Pred::Binary { lhs, rhs, .. } => {
            referenced_vars(lhs, out);
            referenced_vars(rhs, out);
        }
        Pred::Ite { arms, otherwise } => {
            for (g, v) in arms {
                referenced_vars(g, out);
                referenced_vars(v, out);
            }
            referenced_vars(otherwise, out);
        }
        Pred::SetChoice(elems) => {
            for e in elems {
                referenced_vars(e, out);
            }
        }
        Pred::Membership { lhs, set } => {
            referenced_vars(lhs, out);
            referenced_vars(set, out);
        }
    }
}

// --- construction helpers -------------------------------------------------

impl Pred {
    pub fn var(name: &str) -> Pred {
        Pred::Var { name: name.to_string(), primed: false }
    }

    pub fn primed(name: &str) -> Pred {
        Pred::Var { name: name.to_string(), primed: true }
    }

    pub fn lit(v: Value) -> Pred {
        Pred::Const(v)
    }

    pub fn binary(op: BinOp, lhs: Pred, rhs: Pred) -> Pred {
        Pred::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn eq(lhs: Pred, rhs: Pred) -> Pred {
        Pred::binary(BinOp::Eq, lhs, rhs)
    }

    pub fn and(lhs: Pred, rhs: Pred) -> Pred {
        Pred::binary(BinOp::And, lhs, rhs)
    }

    pub fn or(lhs: Pred, rhs: Pred) -> Pred {
        Pred::binary(BinOp::Or, lhs, rhs)
    }

    pub fn not(p: Pred) -> Pred {
        Pred::Not(Box::new(p))
    }

    /// Conjunction of all given predicates; `true` when empty.
    pub fn and_all(preds: impl IntoIterator<Item = Pred>) -> Pred {
        let mut iter = preds.into_iter();
        match iter.next() {
            None => Pred::Const(Value::Bool(true)),
            Some(first) => iter.fold(first, Pred::and),
        }
    }

    /// Disjunction of all given predicates; `false` when empty.
    pub fn or_all(preds: impl IntoIterator<Item = Pred>) -> Pred {
        let mut iter = preds.into_iter();
        match iter.next() {
            None => Pred::Const(Value::Bool(false)),
            Some(first) => iter.fold(first, Pred::or),
        }
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pred::Const(v) => write!(f, "{v}"),
            Pred::Var { name, primed } => write!(f, "{name}{}", if *primed { "'" } else { "" }),
            Pred::Not(p) => write!(f, "!({p})"),
            Pred::Neg(p) => write!(f, "-({p})"),
            Pred::Binary { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            Pred::Ite { arms, otherwise } => {
                for (i, (g, v)) in arms.iter().enumerate() {
                    write!(f, "{}({g}): {v} ", if i == 0 { "if" } else { "elif" })?;
                }
                write!(f, "else: {otherwise}")
            }
            Pred::SetChoice(elems) => {
                let parts: Vec<String> = elems.iter().map(|e| e.to_string()).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
            Pred::Membership { lhs, set } => write!(f, "({lhs} in {set})"),
        }
    }
}
