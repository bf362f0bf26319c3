//! Seeded random model/mutation corpus for differential and property testing.
//!
//! Instances are small by construction (at most three state variables over
//! domains of at most three values, at most two input variables) and are
//! regenerated until the original model and the conditional mutant are total
//! within the validation depth, so bounded verdicts coincide with the literal
//! prefix-set definitions. Generation is deterministic per seed.
//!
//! Three flavors populate the determinism strata: catalogue mutations on
//! deterministic models (deterministic/deterministic), catalogue mutations on
//! set-choice models (non-deterministic both sides), and hand-wired mutants
//! that replace a scalar leaf by a two-element set choice on a deterministic
//! model (deterministic model, non-deterministic mutant).

use crate::domain::{Value, VarDomain, EPS};
use crate::lang::{elaborate, parse, render, Assign, Expr, ModelAst, Rhs, Span, UnaryOp, VarDecl};
use crate::mutate::{
    build_conditional_mutant, enumerate_mutations, ConditionalMutant, MutationOptions, MUT_VAR,
};
use crate::pred::BinOp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Validation depth used by the generator's totality checks.
pub const VALIDATION_DEPTH: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceKind {
    /// A catalogue mutation, by identifier.
    Catalogue(String),
    /// A scalar leaf replaced by a two-element set choice.
    SetIntroducing(String),
}

#[derive(Debug, Clone)]
pub struct CorpusInstance {
    pub index: usize,
    pub model: ModelAst,
    pub cm: ConditionalMutant,
    pub kind: InstanceKind,
    pub orig_deterministic: bool,
    pub mut_deterministic: bool,
}

#[derive(Debug, Clone)]
pub struct CorpusConfig {
    /// Instances with catalogue mutations (half on deterministic models).
    pub catalogue: usize,
    /// Deterministic-model instances with a set-introducing mutant.
    pub set_introducing: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig { catalogue: 200, set_introducing: 40 }
    }
}

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.rng.random_range(0..items.len())]
    }

    fn coin(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }

    fn value_of(&mut self, dom: &VarDomain) -> Value {
        dom.value_at(self.rng.random_range(0..dom.size()))
    }
}

const ENUM_LITERALS: &[&str] = &["go", "halt", "ping", "pong", "lo", "hi", "mid"];

fn literal_expr(v: &Value) -> Expr {
    let s = Span::default();
    match v {
        Value::Bool(b) => Expr::Bool(*b, s),
        Value::Int(i) if *i < 0 => Expr::Unary {
            op: UnaryOp::Neg,
            operand: Box::new(Expr::Int(-i, s)),
            span: s,
        },
        Value::Int(i) => Expr::Int(*i, s),
        Value::Enum(name) => Expr::Ident(name.clone(), s),
    }
}

fn gen_domain(g: &mut Gen, used_literals: &mut Vec<String>) -> VarDomain {
    match g.rng.random_range(0..3) {
        0 => VarDomain::Bool,
        1 => VarDomain::Int { lo: 0, hi: g.rng.random_range(1..=2) },
        _ => {
            let count = g.rng.random_range(2..=3usize);
            let mut lits = Vec::new();
            let mut offset = g.rng.random_range(0..ENUM_LITERALS.len());
            while lits.len() < count {
                let cand = ENUM_LITERALS[offset % ENUM_LITERALS.len()].to_string();
                offset += 1;
                if !lits.contains(&cand) {
                    lits.push(cand);
                }
            }
            used_literals.extend(lits.iter().cloned());
            VarDomain::Enum(lits)
        }
    }
}

/// A random boolean guard over the given (name, domain) pairs.
fn gen_guard(g: &mut Gen, vars: &[(String, VarDomain)]) -> Expr {
    let s = Span::default();
    let atom = |g: &mut Gen| -> Expr {
        let (name, dom) = {
            let pick = g.pick(vars);
            (pick.0.clone(), pick.1.clone())
        };
        match dom {
            VarDomain::Bool => {
                if g.coin(0.5) {
                    Expr::Ident(name, s)
                } else {
                    Expr::Unary {
                        op: UnaryOp::Not,
                        operand: Box::new(Expr::Ident(name, s)),
                        span: s,
                    }
                }
            }
            VarDomain::Int { .. } => {
                let op = *g.pick(&[BinOp::Eq, BinOp::Neq, BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge]);
                let value = g.value_of(&dom);
                Expr::Binary {
                    op,
                    lhs: Box::new(Expr::Ident(name, s)),
                    rhs: Box::new(literal_expr(&value)),
                    span: s,
                }
            }
            VarDomain::Enum(_) => {
                let op = *g.pick(&[BinOp::Eq, BinOp::Neq]);
                let value = g.value_of(&dom);
                Expr::Binary {
                    op,
                    lhs: Box::new(Expr::Ident(name, s)),
                    rhs: Box::new(literal_expr(&value)),
                    span: s,
                }
            }
        }
    };
    let first = atom(g);
    if g.coin(0.3) {
        let op = *g.pick(&[BinOp::And, BinOp::Or, BinOp::Xor]);
        Expr::Binary { op, lhs: Box::new(first), rhs: Box::new(atom(g)), span: s }
    } else {
        first
    }
}

/// A random value leaf for a variable, possibly a set choice when
/// non-determinism is wanted.
fn gen_leaf(g: &mut Gen, name: &str, dom: &VarDomain, allow_set: bool, in_next: bool) -> Rhs {
    let s = Span::default();
    if allow_set && g.coin(0.35) && dom.size() >= 2 {
        let a = g.rng.random_range(0..dom.size());
        let mut b = g.rng.random_range(0..dom.size());
        if b == a {
            b = (b + 1) % dom.size();
        }
        return Rhs::Set(
            vec![literal_expr(&dom.value_at(a)), literal_expr(&dom.value_at(b))],
            s,
        );
    }
    // Copies and arithmetic make sense only in the next block.
    if in_next {
        match dom {
            VarDomain::Int { lo, hi } if g.coin(0.4) => {
                if g.coin(0.5) {
                    return Rhs::Expr(Expr::Ident(name.into(), s));
                }
                // Guarded step toward a bound stays in-domain.
                let up = g.coin(0.5);
                let (op, bound_cmp, bound) =
                    if up { (BinOp::Add, BinOp::Lt, *hi) } else { (BinOp::Sub, BinOp::Gt, *lo) };
                let step = Expr::Binary {
                    op,
                    lhs: Box::new(Expr::Ident(name.into(), s)),
                    rhs: Box::new(Expr::Int(1, s)),
                    span: s,
                };
                let guard = Expr::Binary {
                    op: bound_cmp,
                    lhs: Box::new(Expr::Ident(name.into(), s)),
                    rhs: Box::new(literal_expr(&Value::Int(bound))),
                    span: s,
                };
                return Rhs::Ite {
                    arms: vec![(guard, Rhs::Expr(step))],
                    otherwise: Box::new(Rhs::Expr(Expr::Ident(name.into(), s))),
                    span: s,
                };
            }
            _ if g.coin(0.25) => return Rhs::Expr(Expr::Ident(name.into(), s)),
            _ => {}
        }
    }
    Rhs::Expr(literal_expr(&g.value_of(dom)))
}

fn gen_rhs(
    g: &mut Gen,
    name: &str,
    dom: &VarDomain,
    guard_vars: &[(String, VarDomain)],
    allow_set: bool,
    in_next: bool,
) -> Rhs {
    let s = Span::default();
    if in_next && g.coin(0.75) {
        let arm_count = g.rng.random_range(1..=2usize);
        let arms = (0..arm_count)
            .map(|_| (gen_guard(g, guard_vars), gen_leaf(g, name, dom, allow_set, in_next)))
            .collect();
        Rhs::Ite {
            arms,
            otherwise: Box::new(gen_leaf(g, name, dom, allow_set, in_next)),
            span: s,
        }
    } else {
        gen_leaf(g, name, dom, allow_set, in_next)
    }
}

/// Generate one candidate model; callers validate and retry.
fn gen_model(g: &mut Gen, nondet: bool) -> ModelAst {
    let s = Span::default();
    let mut literals = vec![EPS.to_string()];

    let input_names = ["ia", "ib"];
    let n_inputs = if g.coin(0.7) { 1 } else { 2 };
    let inputs: Vec<VarDecl> = (0..n_inputs)
        .map(|i| {
            // Keep the input product small: two inputs means two booleans.
            let domain = if n_inputs == 2 {
                VarDomain::Bool
            } else {
                gen_domain(g, &mut literals)
            };
            VarDecl { name: input_names[i].into(), domain, span: s }
        })
        .collect();

    let out_lit_count = g.rng.random_range(1..=2usize);
    let mut out_lits = vec![EPS.to_string()];
    let mut offset = g.rng.random_range(0..ENUM_LITERALS.len());
    while out_lits.len() < out_lit_count + 1 {
        let cand = ENUM_LITERALS[offset % ENUM_LITERALS.len()].to_string();
        offset += 1;
        if !out_lits.contains(&cand) {
            out_lits.push(cand);
        }
    }
    literals.extend(out_lits.iter().cloned());
    let outputs =
        vec![VarDecl { name: "out".into(), domain: VarDomain::Enum(out_lits), span: s }];

    let state_names = ["sa", "sb", "sc"];
    let n_states = g.rng.random_range(1..=3usize);
    let states: Vec<VarDecl> = (0..n_states)
        .map(|i| VarDecl { name: state_names[i].into(), domain: gen_domain(g, &mut literals), span: s })
        .collect();

    let guard_vars: Vec<(String, VarDomain)> = inputs
        .iter()
        .chain(states.iter())
        .map(|d| (d.name.clone(), d.domain.clone()))
        .collect();
    let state_guard_vars: Vec<(String, VarDomain)> =
        states.iter().map(|d| (d.name.clone(), d.domain.clone())).collect();

    let mut init = Vec::new();
    let mut next = Vec::new();
    for d in outputs.iter().chain(states.iter()) {
        // Init non-determinism is rarer than transition non-determinism.
        let init_set = nondet && g.coin(0.2);
        let init_rhs = if init_set {
            gen_leaf(g, &d.name, &d.domain, true, false)
        } else {
            Rhs::Expr(literal_expr(&{
                let mut v = g.value_of(&d.domain);
                // Bias initial outputs toward silence.
                if d.name == "out" && g.coin(0.7) {
                    v = Value::Enum(EPS.into());
                }
                v
            }))
        };
        init.push(Assign { target: d.name.clone(), rhs: init_rhs, span: s });
        let allow_set = nondet && g.coin(0.6);
        // Guards in init would be fine, but keep init simple; next gets the
        // structure. State guards avoid referencing the new output.
        let _ = &state_guard_vars;
        next.push(Assign {
            target: d.name.clone(),
            rhs: gen_rhs(g, &d.name, &d.domain, &guard_vars, allow_set, true),
            span: s,
        });
    }

    ModelAst { inputs, outputs, states, init, next }
}

fn model_is_usable(ast: &ModelAst) -> Option<crate::sts::Sts> {
    let sts = elaborate(ast).ok()?;
    let report = sts.validate(VALIDATION_DEPTH).ok()?;
    if report.total && report.initial_count > 0 {
        Some(sts)
    } else {
        None
    }
}

/// Exact number of depth-`depth` trace prefixes, or `None` past `cap`.
/// Per-state path counts evolve by summing over transition arcs.
fn prefix_count_within(sts: &crate::sts::Sts, depth: usize, cap: u64) -> Option<u64> {
    let ex = crate::sts::Explorer::new(sts);
    let mut counts: std::collections::HashMap<u64, u64> = std::collections::HashMap::new();
    for &(_, x) in ex.initial().ok()?.iter() {
        *counts.entry(x).or_insert(0) += 1;
    }
    let mut total: u64 = counts.values().sum();
    for _ in 0..depth {
        if total > cap {
            return None;
        }
        let mut next: std::collections::HashMap<u64, u64> = std::collections::HashMap::new();
        for (&x, &c) in &counts {
            for input in 0..ex.input_count() {
                for &(_, x2) in ex.successors(x, input).ok()?.iter() {
                    *next.entry(x2).or_insert(0) += c;
                }
            }
        }
        counts = next;
        total = counts.values().sum();
    }
    if total > cap {
        None
    } else {
        Some(total)
    }
}

/// Largest prefix count tolerated per instance: keeps full prefix
/// enumeration (the brute-force oracle's precondition) and AP-trace domain
/// construction comfortably inside the default budgets.
const PREFIX_CAP: u64 = 40_000;

fn cm_is_usable(cm: &ConditionalMutant) -> bool {
    matches!(cm.sts.validate(VALIDATION_DEPTH), Ok(r) if r.total)
        && matches!(cm.project(true).validate(VALIDATION_DEPTH), Ok(r) if r.total)
        && matches!(cm.project(false).validate(VALIDATION_DEPTH), Ok(r) if r.total)
        && prefix_count_within(&cm.sts, VALIDATION_DEPTH, PREFIX_CAP).is_some()
}

/// Hand-wire a conditional mutant whose mutation replaces the else-leaf (or
/// plain rhs) of a random next assignment with a two-element set choice.
fn set_introducing_cm(g: &mut Gen, model: &ModelAst) -> Option<(ConditionalMutant, String)> {
    let s = Span::default();
    let candidates: Vec<usize> = model
        .next
        .iter()
        .enumerate()
        .filter(|(_, a)| a.target != MUT_VAR)
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let idx = *g.pick(&candidates);
    let target = model.next[idx].target.clone();
    let dom = model.decl(&target)?.domain.clone();
    if dom.size() < 2 {
        return None;
    }

    let mut combined = model.clone();
    combined.states.push(VarDecl { name: MUT_VAR.into(), domain: VarDomain::Bool, span: s });
    combined.init.push(Assign {
        target: MUT_VAR.into(),
        rhs: Rhs::Set(vec![Expr::Bool(false, s), Expr::Bool(true, s)], s),
        span: s,
    });
    combined.next.push(Assign {
        target: MUT_VAR.into(),
        rhs: Rhs::Expr(Expr::Ident(MUT_VAR.into(), s)),
        span: s,
    });

    // Wrap the leaf: the whole rhs when scalar, the else-branch otherwise.
    // The mutant's set sometimes keeps the original value (potential-only
    // non-determinism) and sometimes excludes it (so definite kills exist in
    // the deterministic-model stratum).
    let wrap = |leaf: &Rhs, g: &mut Gen| -> Option<Rhs> {
        let Rhs::Expr(base) = leaf else {
            return None;
        };
        let base = base.clone();
        let rendered = |e: &Expr| {
            let mut text = String::new();
            crate::lang::render_expr(e, &mut text);
            text
        };
        let alternatives: Vec<Expr> = dom
            .values()
            .map(|v| literal_expr(&v))
            .filter(|e| rendered(e) != rendered(&base))
            .collect();
        let set = if alternatives.len() >= 2 && g.coin(0.5) {
            vec![alternatives[0].clone(), alternatives[1].clone()]
        } else {
            vec![base.clone(), alternatives.first()?.clone()]
        };
        Some(Rhs::Ite {
            arms: vec![(Expr::Ident(MUT_VAR.into(), s), Rhs::Set(set, s))],
            otherwise: Box::new(Rhs::Expr(base)),
            span: s,
        })
    };

    let assign = &mut combined.next[idx];
    let new_rhs = match &assign.rhs {
        Rhs::Expr(_) => wrap(&assign.rhs.clone(), g)?,
        Rhs::Ite { arms, otherwise, span } => {
            let wrapped = wrap(otherwise, g)?;
            Rhs::Ite { arms: arms.clone(), otherwise: Box::new(wrapped), span: *span }
        }
        Rhs::Set(..) => return None,
    };
    assign.rhs = new_rhs;

    // Round-trip through source so spans are realistic.
    let source = render(&combined);
    let reparsed = parse(&source).ok()?;
    let cm = ConditionalMutant::from_model_with_mut(reparsed, model.clone()).ok()?;
    Some((cm, format!("set-choice@{target}")))
}

/// Generate a deterministic corpus for the given seed.
pub fn generate_corpus(seed: u64, config: &CorpusConfig) -> Vec<CorpusInstance> {
    let mut out = Vec::new();
    let mut produced = 0usize;
    let mut attempt = 0u64;
    while produced < config.catalogue {
        attempt += 1;
        let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed ^ (attempt.wrapping_mul(0x9e3779b97f4a7c15))) };
        let nondet = produced % 2 == 1;
        let ast = gen_model(&mut g, nondet);
        // Round-trip through source so mutation sites carry real spans.
        let source = render(&ast);
        let Ok(model) = parse(&source) else { continue };
        if !model.structurally_eq(&ast) {
            continue;
        }
        if model_is_usable(&model).is_none() {
            continue;
        }
        let mutations = enumerate_mutations(&model, &MutationOptions::default());
        if mutations.is_empty() {
            continue;
        }
        // Try a few random mutations until one yields a total mutant.
        let mut found = None;
        for _ in 0..8 {
            let m = g.pick(&mutations).clone();
            if let Ok(cm) = build_conditional_mutant(&model, &m) {
                if cm_is_usable(&cm) {
                    found = Some((cm, m));
                    break;
                }
            }
        }
        let Some((cm, m)) = found else { continue };
        let orig_det = cm.project(false).validate(VALIDATION_DEPTH).map(|r| r.deterministic);
        let mut_det = cm.project(true).validate(VALIDATION_DEPTH).map(|r| r.deterministic);
        let (Ok(orig_deterministic), Ok(mut_deterministic)) = (orig_det, mut_det) else {
            continue;
        };
        out.push(CorpusInstance {
            index: produced,
            model,
            kind: InstanceKind::Catalogue(m.id()),
            cm,
            orig_deterministic,
            mut_deterministic,
        });
        produced += 1;
    }

    let mut set_produced = 0usize;
    while set_produced < config.set_introducing {
        attempt += 1;
        let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed ^ (attempt.wrapping_mul(0xd1b54a32d192ed03))) };
        let ast = gen_model(&mut g, false);
        let source = render(&ast);
        let Ok(model) = parse(&source) else { continue };
        let Some(sts) = model_is_usable(&model) else { continue };
        let Ok(report) = sts.validate(VALIDATION_DEPTH) else { continue };
        if !report.deterministic {
            continue;
        }
        let Some((cm, desc)) = set_introducing_cm(&mut g, &model) else { continue };
        if !cm_is_usable(&cm) {
            continue;
        }
        let Ok(orig_v) = cm.project(false).validate(VALIDATION_DEPTH) else { continue };
        let Ok(mut_v) = cm.project(true).validate(VALIDATION_DEPTH) else { continue };
        out.push(CorpusInstance {
            index: config.catalogue + set_produced,
            model,
            kind: InstanceKind::SetIntroducing(desc),
            cm,
            orig_deterministic: orig_v.deterministic,
            mut_deterministic: mut_v.deterministic,
        });
        set_produced += 1;
    }
    out
}
