//! Elaboration of a parsed model into a symbolic transition system.
//!
//! The initial predicate is the conjunction, over `init` assignments, of
//! `v ∈ rhs` (sets as membership, scalars as equality, if-chains as guarded
//! selection). The transition predicate does the same for `next` assignments,
//! priming state targets; output targets stay unprimed since an output names
//! the value produced by the transition itself. Inputs are left unconstrained
//! and are therefore free each step.

use super::{Expr, LangError, ModelAst, Rhs, UnaryOp};
use crate::domain::{Value, VarDomain};
use crate::pred::{BinOp, Pred};
use crate::sts::{Sts, VarSet};

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Bool,
    Int,
    Enum,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kind::Bool => write!(f, "bool"),
            Kind::Int => write!(f, "int"),
            Kind::Enum => write!(f, "enum"),
        }
    }
}

fn kind_of_domain(d: &VarDomain) -> Kind {
    match d {
        VarDomain::Bool => Kind::Bool,
        VarDomain::Int { .. } => Kind::Int,
        VarDomain::Enum(_) => Kind::Enum,
    }
}

struct Elaborator<'a> {
    ast: &'a ModelAst,
    literals: Vec<&'a str>,
}

impl<'a> Elaborator<'a> {
    fn infer(&self, e: &Expr) -> Result<Kind, LangError> {
        match e {
            Expr::Bool(..) => Ok(Kind::Bool),
            Expr::Int(..) => Ok(Kind::Int),
            Expr::Ident(name, _) => {
                if let Some(decl) = self.ast.decl(name) {
                    Ok(kind_of_domain(&decl.domain))
                } else if self.literals.contains(&name.as_str()) {
                    Ok(Kind::Enum)
                } else {
                    Err(LangError::Type(format!("undeclared identifier `{name}`")))
                }
            }
            Expr::Unary { op, operand, .. } => {
                let k = self.infer(operand)?;
                match op {
                    UnaryOp::Not if k == Kind::Bool => Ok(Kind::Bool),
                    UnaryOp::Neg if k == Kind::Int => Ok(Kind::Int),
                    UnaryOp::Not => Err(LangError::Type(format!("! applied to {k}"))),
                    UnaryOp::Neg => Err(LangError::Type(format!("unary - applied to {k}"))),
                }
            }
            Expr::Binary { op, lhs, rhs, .. } => {
                let l = self.infer(lhs)?;
                let r = self.infer(rhs)?;
                match op {
                    BinOp::And | BinOp::Or | BinOp::Xor | BinOp::Xnor | BinOp::Implies
                    | BinOp::Iff => {
                        if l == Kind::Bool && r == Kind::Bool {
                            Ok(Kind::Bool)
                        } else {
                            Err(LangError::Type(format!("{} on {l} and {r}", op.symbol())))
                        }
                    }
                    BinOp::Add | BinOp::Sub => {
                        if l == Kind::Int && r == Kind::Int {
                            Ok(Kind::Int)
                        } else {
                            Err(LangError::Type(format!("{} on {l} and {r}", op.symbol())))
                        }
                    }
                    BinOp::Eq | BinOp::Neq => {
                        if l == r {
                            Ok(Kind::Bool)
                        } else {
                            Err(LangError::Type(format!("{} on {l} and {r}", op.symbol())))
                        }
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        if l == Kind::Int && r == Kind::Int {
                            Ok(Kind::Bool)
                        } else {
                            Err(LangError::Type(format!("{} on {l} and {r}", op.symbol())))
                        }
                    }
                }
            }
        }
    }

    fn compile_expr(&self, e: &Expr) -> Pred {
        match e {
            Expr::Bool(b, _) => Pred::Const(Value::Bool(*b)),
            Expr::Int(i, _) => Pred::Const(Value::Int(*i)),
            Expr::Ident(name, _) => {
                if self.ast.decl(name).is_some() {
                    Pred::var(name)
                } else {
                    Pred::Const(Value::Enum(name.clone()))
                }
            }
            Expr::Unary { op, operand, .. } => {
                let inner = self.compile_expr(operand);
                match op {
                    UnaryOp::Not => Pred::Not(Box::new(inner)),
                    UnaryOp::Neg => Pred::Neg(Box::new(inner)),
                }
            }
            Expr::Binary { op, lhs, rhs, .. } => {
                Pred::binary(*op, self.compile_expr(lhs), self.compile_expr(rhs))
            }
        }
    }

    /// Check an rhs against the target kind and compile it to a set
    /// expression suitable for a membership node.
    fn compile_rhs(&self, target: &str, target_kind: &Kind, rhs: &Rhs) -> Result<Pred, LangError> {
        match rhs {
            Rhs::Expr(e) => {
                let k = self.infer(e)?;
                if k != *target_kind {
                    return Err(LangError::Type(format!(
                        "`{target}` is {target_kind} but assigned {k}"
                    )));
                }
                Ok(self.compile_expr(e))
            }
            Rhs::Set(elems, _) => {
                let mut compiled = Vec::with_capacity(elems.len());
                for e in elems {
                    let k = self.infer(e)?;
                    if k != *target_kind {
                        return Err(LangError::Type(format!(
                            "`{target}` is {target_kind} but a set element is {k}"
                        )));
                    }
                    compiled.push(self.compile_expr(e));
                }
                Ok(Pred::SetChoice(compiled))
            }
            Rhs::Ite { arms, otherwise, .. } => {
                let mut compiled_arms = Vec::with_capacity(arms.len());
                for (guard, branch) in arms {
                    let gk = self.infer(guard)?;
                    if gk != Kind::Bool {
                        return Err(LangError::Type(format!("guard of `{target}` is {gk}")));
                    }
                    compiled_arms
                        .push((self.compile_expr(guard), self.compile_rhs(target, target_kind, branch)?));
                }
                Ok(Pred::Ite {
                    arms: compiled_arms,
                    otherwise: Box::new(self.compile_rhs(target, target_kind, otherwise)?),
                })
            }
        }
    }
}

/// Elaborate a parsed model into an [`Sts`].
pub fn elaborate(ast: &ModelAst) -> Result<Sts, LangError> {
    let el = Elaborator { ast, literals: ast.enum_literals() };
    let decl_set = |decls: &[super::VarDecl]| {
        VarSet::new(decls.iter().map(|d| (d.name.clone(), d.domain.clone())).collect())
    };
    let inputs = decl_set(&ast.inputs);
    let outputs = decl_set(&ast.outputs);
    let states = decl_set(&ast.states);

    let mut init_conjuncts = Vec::new();
    for a in &ast.init {
        let decl = ast.decl(&a.target).expect("analysis resolved targets");
        let kind = kind_of_domain(&decl.domain);
        let set = el.compile_rhs(&a.target, &kind, &a.rhs)?;
        init_conjuncts.push(Pred::Membership { lhs: Box::new(Pred::var(&a.target)), set: Box::new(set) });
    }

    let mut trans_conjuncts = Vec::new();
    for a in &ast.next {
        let decl = ast.decl(&a.target).expect("analysis resolved targets");
        let kind = kind_of_domain(&decl.domain);
        let set = el.compile_rhs(&a.target, &kind, &a.rhs)?;
        let lhs = if ast.is_state(&a.target) {
            Pred::primed(&a.target)
        } else {
            Pred::var(&a.target)
        };
        trans_conjuncts.push(Pred::Membership { lhs: Box::new(lhs), set: Box::new(set) });
    }

    Sts::new(
        inputs,
        outputs,
        states,
        Pred::and_all(init_conjuncts),
        Pred::and_all(trans_conjuncts),
    )
    .map_err(|e| LangError::Type(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::super::{parse, render, BEVERAGE_SOURCE};
    use super::*;
    use crate::domain::{enum_v, int_v, Valuation};
    use crate::sts::Budget;

    #[test]
    fn beverage_parses_with_expected_shape() {
        let ast = parse(BEVERAGE_SOURCE).unwrap();
        assert_eq!(ast.inputs.len(), 1);
        assert_eq!(ast.outputs.len(), 1);
        assert_eq!(ast.states.len(), 1);
        assert_eq!(ast.init.len(), 2);
        assert_eq!(ast.next.len(), 2);
    }

    #[test]
    fn elaborated_beverage_matches_handwritten_transition_relation() {
        let ast = parse(BEVERAGE_SOURCE).unwrap();
        let elaborated = elaborate(&ast).unwrap();
        let handwritten = crate::sts::tests::beverage();
        // Cross-evaluate both predicate forms over the full product.
        for wtr in 0..=2 {
            let state = Valuation::from_pairs(&[("wtr", int_v(wtr))]);
            for input in ["eps", "req", "fill"] {
                let iv = Valuation::from_pairs(&[("in", enum_v(input))]);
                assert_eq!(
                    elaborated.successors(&state, &iv).unwrap(),
                    handwritten.successors(&state, &iv).unwrap(),
                    "wtr={wtr} in={input}"
                );
            }
        }
        assert_eq!(
            elaborated.initial_pairs().unwrap(),
            handwritten.initial_pairs().unwrap()
        );
    }

    #[test]
    fn beverage_request_with_water_admits_exactly_coff_and_tea() {
        let ast = parse(BEVERAGE_SOURCE).unwrap();
        let sts = elaborate(&ast).unwrap();
        let state = Valuation::from_pairs(&[("wtr", int_v(2))]);
        let input = Valuation::from_pairs(&[("in", enum_v("req"))]);
        let outs: Vec<_> = sts
            .successors(&state, &input)
            .unwrap()
            .into_iter()
            .map(|(o, _)| o.get("out").unwrap().clone())
            .collect();
        assert_eq!(outs, vec![enum_v("coff"), enum_v("tea")]);
    }

    #[test]
    fn set_choice_compiles_to_membership() {
        let src = "output o : enum { eps };\nstate x : int[0..1];\ninit o := eps; x := 0;\nnext o := eps; x := {0, 1};\n";
        let sts = elaborate(&parse(src).unwrap()).unwrap();
        let state = Valuation::from_pairs(&[("x", int_v(0))]);
        let succ = sts.successors(&state, &Valuation::new()).unwrap();
        let next: Vec<i64> =
            succ.iter().map(|(_, x)| x.get("x").unwrap().as_int().unwrap()).collect();
        assert_eq!(next, vec![0, 1]);
    }

    #[test]
    fn elaboration_totality_when_chains_end_in_else() {
        let ast = parse(BEVERAGE_SOURCE).unwrap();
        let sts = elaborate(&ast).unwrap();
        let report = sts.validate(4).unwrap();
        assert!(report.total);
    }

    #[test]
    fn type_errors_are_reported() {
        let src = "output o : enum { eps };\nstate x : int[0..1];\ninit o := eps; x := 0;\nnext o := eps; x := x && true;\n";
        let err = elaborate(&parse(src).unwrap()).unwrap_err();
        assert!(matches!(err, LangError::Type(_)), "{err}");

        let src2 = "output o : enum { eps };\nstate x : int[0..1];\ninit o := eps; x := 0;\nnext o := eps; x := if (x): 0 else: 1;\n";
        let err2 = elaborate(&parse(src2).unwrap()).unwrap_err();
        assert!(matches!(err2, LangError::Type(_)), "{err2}");
    }

    #[test]
    fn render_round_trips_beverage() {
        let ast = parse(BEVERAGE_SOURCE).unwrap();
        let rendered = render(&ast);
        let reparsed = parse(&rendered).unwrap();
        assert!(ast.structurally_eq(&reparsed));
        // Idempotence on source.
        assert_eq!(render(&reparsed), rendered);
    }

    #[test]
    fn traces_of_elaborated_beverage_are_finite_and_exact() {
        let ast = parse(BEVERAGE_SOURCE).unwrap();
        let sts = elaborate(&ast).unwrap();
        let traces = sts.enumerate_traces(2, &mut Budget::default()).unwrap();
        let handwritten = crate::sts::tests::beverage();
        let expected = handwritten.enumerate_traces(2, &mut Budget::default()).unwrap();
        assert_eq!(traces, expected);
    }
}
