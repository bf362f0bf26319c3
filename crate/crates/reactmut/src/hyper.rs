//! Killing hyperproperties and bounded evaluation of quantified trace
//! formulas.
//!
//! Formulas quantify over atomic-proposition traces of one system and relate
//! positions across traces (`ap@p`). Evaluation is bounded: quantifiers
//! expand over the finite set of depth-`n` AP-trace prefixes, `F` holds iff
//! its operand holds at some position `<= n`, `G` iff at all positions
//! `<= n`, `X` at the last position is false, and `U` is standard bounded.
//! Verdicts are tagged with the bound and never asserted as unbounded truth;
//! the killability searches are the authoritative unbounded procedure.
//!
//! The four killing formulas are built here: output divergence of an original
//! and a mutant trace under equal inputs, in the quantifier arrangements for
//! killing deterministic models (phi1), potential killing (phi2), definite
//! killing (phi3), and definite killing of deterministic models with
//! non-deterministic mutants (phi4). The `mut`-polarity literal of the
//! existential trace is a top-level conjunct: written inside the
//! universally-quantified implication it would make the formula vacuously
//! true under a wrong-polarity witness.

use crate::domain::Valuation;
use crate::kill::{test_kills, KillMode, Test};
use crate::mutate::{ConditionalMutant, MUT_VAR};
use crate::pred::Pred;
use crate::sts::{ap_trace, ApLabeling, Budget, Explorer, Sts, StsError, TracePrefix};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use thiserror::Error;

/// Name of the mutant-polarity atomic proposition.
pub const MUT_AP: &str = "mut";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum HyperError {
    #[error(transparent)]
    Sts(#[from] StsError),
    #[error("labelings beyond {0} propositions are unsupported")]
    TooManyAps(usize),
    #[error("trace variable `{0}` is unbound")]
    UnboundTraceVar(String),
    #[error("formula syntax error: {0}")]
    Parse(String),
    #[error("witness has wrong mut polarity for the formula (expected mut={0})")]
    WrongPolarity(bool),
    #[error("witness exhibits no divergence position")]
    NoDivergence,
    #[error("no original trace matches the witness inputs")]
    NoEqualInputTrace,
    #[error("formula references proposition `{0}` missing from the labeling")]
    UnknownAp(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    Exists,
    Forall,
}

/// LTL body over atoms `ap@trace_var`.
#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Const(bool),
    Atom { ap: String, trace: String },
    Not(Box<Body>),
    And(Box<Body>, Box<Body>),
    Or(Box<Body>, Box<Body>),
    Implies(Box<Body>, Box<Body>),
    Iff(Box<Body>, Box<Body>),
    Next(Box<Body>),
    Until(Box<Body>, Box<Body>),
    Eventually(Box<Body>),
    Always(Box<Body>),
}

impl Body {
    fn and_all(parts: impl IntoIterator<Item = Body>) -> Body {
        let mut iter = parts.into_iter();
        match iter.next() {
            None => Body::Const(true),
            Some(first) => iter.fold(first, |a, b| Body::And(Box::new(a), Box::new(b))),
        }
    }

    fn or_all(parts: impl IntoIterator<Item = Body>) -> Body {
        let mut iter = parts.into_iter();
        match iter.next() {
            None => Body::Const(false),
            Some(first) => iter.fold(first, |a, b| Body::Or(Box::new(a), Box::new(b))),
        }
    }

    fn atom(ap: &str, trace: &str) -> Body {
        Body::Atom { ap: ap.to_string(), trace: trace.to_string() }
    }
}

/// Which killing formula a built formula is, plus the AP vocabulary it uses.
/// Carried so evaluation can take the input-grouped fast path.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiShape {
    pub kind: PhiKind,
    pub input_aps: Vec<String>,
    pub output_aps: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiKind {
    Phi1,
    Phi2,
    Phi3,
    Phi4,
}

impl PhiKind {
    pub fn from_index(k: usize) -> Option<PhiKind> {
        match k {
            1 => Some(PhiKind::Phi1),
            2 => Some(PhiKind::Phi2),
            3 => Some(PhiKind::Phi3),
            4 => Some(PhiKind::Phi4),
            _ => None,
        }
    }

    /// The killing notion the formula captures on its stratum.
    pub fn kill_mode(&self) -> KillMode {
        match self {
            PhiKind::Phi1 | PhiKind::Phi2 => KillMode::Potential,
            PhiKind::Phi3 | PhiKind::Phi4 => KillMode::Definite,
        }
    }

    /// The mut polarity the existential witness must carry.
    pub fn witness_polarity(&self) -> bool {
        matches!(self, PhiKind::Phi2)
    }
}

/// A quantified hyperproperty: a prefix of at most three trace quantifiers
/// over an LTL body.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperFormula {
    pub prefix: Vec<(Quantifier, String)>,
    pub body: Body,
    pub shape: Option<PhiShape>,
}

/// Build one of the killing formulas over the given input/output AP names.
pub fn build_phi(kind: PhiKind, input_aps: &[String], output_aps: &[String]) -> HyperFormula {
    let eq_inputs = |a: &str, b: &str| {
        Body::and_all(
            input_aps
                .iter()
                .map(|i| Body::Iff(Box::new(Body::atom(i, a)), Box::new(Body::atom(i, b)))),
        )
    };
    let diverge = |a: &str, b: &str| {
        Body::Eventually(Box::new(Body::or_all(output_aps.iter().map(|o| {
            Body::Not(Box::new(Body::Iff(
                Box::new(Body::atom(o, a)),
                Box::new(Body::atom(o, b)),
            )))
        }))))
    };
    let mut_is = |t: &str, polarity: bool| {
        let a = Body::atom(MUT_AP, t);
        Body::Always(Box::new(if polarity { a } else { Body::Not(Box::new(a)) }))
    };
    let (prefix, body) = match kind {
        PhiKind::Phi1 => (
            vec![(Quantifier::Exists, "p".into()), (Quantifier::Exists, "q".into())],
            Body::And(
                Box::new(Body::Always(Box::new(Body::and_all([
                    Body::Not(Box::new(Body::atom(MUT_AP, "p"))),
                    Body::atom(MUT_AP, "q"),
                    strip_always(eq_inputs("p", "q")),
                ])))),
                Box::new(diverge("p", "q")),
            ),
        ),
        PhiKind::Phi2 => (
            vec![(Quantifier::Exists, "p".into()), (Quantifier::Forall, "q".into())],
            Body::And(
                Box::new(mut_is("p", true)),
                Box::new(Body::Implies(
                    Box::new(Body::Always(Box::new(Body::and_all([
                        Body::Not(Box::new(Body::atom(MUT_AP, "q"))),
                        strip_always(eq_inputs("p", "q")),
                    ])))),
                    Box::new(diverge("p", "q")),
                )),
            ),
        ),
        PhiKind::Phi3 => (
            vec![
                (Quantifier::Exists, "p".into()),
                (Quantifier::Forall, "q".into()),
                (Quantifier::Forall, "r".into()),
            ],
            Body::And(
                Box::new(mut_is("p", false)),
                Box::new(Body::Implies(
                    Box::new(Body::Always(Box::new(Body::and_all([
                        Body::atom(MUT_AP, "q"),
                        Body::Not(Box::new(Body::atom(MUT_AP, "r"))),
                        strip_always(eq_inputs("p", "q")),
                        strip_always(eq_inputs("p", "r")),
                    ])))),
                    Box::new(diverge("q", "r")),
                )),
            ),
        ),
        PhiKind::Phi4 => (
            vec![(Quantifier::Exists, "p".into()), (Quantifier::Forall, "q".into())],
            Body::And(
                Box::new(mut_is("p", false)),
                Box::new(Body::Implies(
                    Box::new(Body::Always(Box::new(Body::and_all([
                        Body::atom(MUT_AP, "q"),
                        strip_always(eq_inputs("p", "q")),
                    ])))),
                    Box::new(diverge("p", "q")),
                )),
            ),
        ),
    };
    HyperFormula {
        prefix,
        body,
        shape: Some(PhiShape {
            kind,
            input_aps: input_aps.to_vec(),
            output_aps: output_aps.to_vec(),
        }),
    }
}

// build_phi composes the input-equality conjunction inside an enclosing
// `Always`; this keeps helper output reusable there.
fn strip_always(b: Body) -> Body {
    b
}

/// Per-value input/output AP names of a system.
pub fn io_ap_names(sts: &Sts) -> (Vec<String>, Vec<String>) {
    let names = |set: &crate::sts::VarSet| {
        let mut aps = Vec::new();
        for (name, dom) in set.vars() {
            for v in dom.values() {
                aps.push(format!("[{name}={v}]"));
            }
        }
        aps
    };
    (names(&sts.inputs), names(&sts.outputs))
}

/// Build the killing formula for a conditional mutant from its own
/// input/output vocabulary.
pub fn build_phi_for(kind: PhiKind, sts: &Sts) -> HyperFormula {
    let (ins, outs) = io_ap_names(sts);
    build_phi(kind, &ins, &outs)
}

/// The labeling the killing formulas are evaluated under: per-value
/// input/output propositions plus the `mut` polarity bit.
pub fn killing_labeling(sts: &Sts) -> ApLabeling {
    let mut labeling = ApLabeling::io(sts);
    if sts.states.contains_var(MUT_VAR) {
        labeling.push(MUT_AP, Pred::eq(Pred::var(MUT_VAR), Pred::lit(crate::domain::Value::Bool(true))));
    }
    labeling
}

/// Bounded verdict with any leading existential witnesses.
#[derive(Debug, Clone)]
pub struct HyperVerdict {
    pub holds: bool,
    /// The evaluation bound; the verdict says nothing beyond it.
    pub bound: usize,
    /// One concrete prefix per leading existential quantifier.
    pub witnesses: Vec<(String, TracePrefix)>,
}

const MAX_APS: usize = 128;

struct ApDomain {
    /// Deduplicated AP traces with a representative raw prefix each;
    /// representatives are materialized only when returned as witnesses.
    traces: Vec<Vec<u128>>,
    reps: Vec<Vec<(Option<u64>, u64, u64)>>,
    ap_bits: HashMap<String, usize>,
}

fn build_domain(
    sts: &Sts,
    labeling: &ApLabeling,
    depth: usize,
    budget: &mut Budget,
) -> Result<ApDomain, HyperError> {
    if labeling.aps.len() > MAX_APS {
        return Err(HyperError::TooManyAps(MAX_APS));
    }
    let ap_bits: HashMap<String, usize> =
        labeling.aps.iter().enumerate().map(|(i, (n, _))| (n.clone(), i)).collect();
    let ex = Explorer::new(sts);

    struct Walk<'a, 'b> {
        ex: &'a Explorer<'a>,
        labeling: &'b ApLabeling,
        ap_bits: &'b HashMap<String, usize>,
        depth: usize,
        // AP bitsets per concrete position, memoized across prefixes.
        memo: HashMap<(Option<u64>, u64, u64), u128>,
        seen: HashMap<Vec<u128>, ()>,
        traces: Vec<Vec<u128>>,
        reps: Vec<Vec<(Option<u64>, u64, u64)>>,
    }

    impl Walk<'_, '_> {
        fn bits_at(&mut self, key: (Option<u64>, u64, u64)) -> Result<u128, HyperError> {
            if let Some(&b) = self.memo.get(&key) {
                return Ok(b);
            }
            let concrete = self.ex.materialize(&[key]);
            let sets = ap_trace(&concrete, self.labeling).map_err(HyperError::Sts)?;
            let mut b = 0u128;
            for name in &sets[0] {
                b |= 1 << self.ap_bits[name];
            }
            self.memo.insert(key, b);
            Ok(b)
        }

        fn explore(
            &mut self,
            path_bits: &mut Vec<u128>,
            path_raw: &mut Vec<(Option<u64>, u64, u64)>,
            state: u64,
            budget: &mut Budget,
        ) -> Result<(), HyperError> {
            if path_raw.len() == self.depth + 1 {
                if self.seen.insert(path_bits.clone(), ()).is_none() {
                    self.traces.push(path_bits.clone());
                    self.reps.push(path_raw.clone());
                }
                return Ok(());
            }
            for input in 0..self.ex.input_count() {
                for &(o, x) in self.ex.successors(state, input)?.iter() {
                    budget.charge(1).map_err(HyperError::Sts)?;
                    let key = (Some(input), o, x);
                    path_bits.push(self.bits_at(key)?);
                    path_raw.push(key);
                    self.explore(path_bits, path_raw, x, budget)?;
                    path_bits.pop();
                    path_raw.pop();
                }
            }
            Ok(())
        }
    }

    let mut walk = Walk {
        ex: &ex,
        labeling,
        ap_bits: &ap_bits,
        depth,
        memo: HashMap::new(),
        seen: HashMap::new(),
        traces: Vec::new(),
        reps: Vec::new(),
    };
    for &(o, x) in ex.initial()?.iter() {
        budget.charge(1).map_err(HyperError::Sts)?;
        let key = (None, o, x);
        let bits = walk.bits_at(key)?;
        let mut path_bits = vec![bits];
        let mut path_raw = vec![key];
        walk.explore(&mut path_bits, &mut path_raw, x, budget)?;
    }
    Ok(ApDomain { traces: walk.traces, reps: walk.reps, ap_bits })
}

/// Body with trace variables and propositions resolved to slots and bit
/// masks, so quantifier loops evaluate without lookups or allocation.
enum CBody {
    Const(bool),
    Atom { mask: u128, slot: usize },
    Not(Box<CBody>),
    And(Box<CBody>, Box<CBody>),
    Or(Box<CBody>, Box<CBody>),
    Implies(Box<CBody>, Box<CBody>),
    Iff(Box<CBody>, Box<CBody>),
    Next(Box<CBody>),
    Until(Box<CBody>, Box<CBody>),
    Eventually(Box<CBody>),
    Always(Box<CBody>),
}

fn compile_body(
    body: &Body,
    vars: &[String],
    ap_bits: &HashMap<String, usize>,
) -> Result<CBody, HyperError> {
    Ok(match body {
        Body::Const(b) => CBody::Const(*b),
        Body::Atom { ap, trace } => {
            let slot = vars
                .iter()
                .position(|v| v == trace)
                .ok_or_else(|| HyperError::UnboundTraceVar(trace.clone()))?;
            let bit = ap_bits.get(ap).ok_or_else(|| HyperError::UnknownAp(ap.clone()))?;
            CBody::Atom { mask: 1u128 << bit, slot }
        }
        Body::Not(b) => CBody::Not(Box::new(compile_body(b, vars, ap_bits)?)),
        Body::And(a, b) => CBody::And(
            Box::new(compile_body(a, vars, ap_bits)?),
            Box::new(compile_body(b, vars, ap_bits)?),
        ),
        Body::Or(a, b) => CBody::Or(
            Box::new(compile_body(a, vars, ap_bits)?),
            Box::new(compile_body(b, vars, ap_bits)?),
        ),
        Body::Implies(a, b) => CBody::Implies(
            Box::new(compile_body(a, vars, ap_bits)?),
            Box::new(compile_body(b, vars, ap_bits)?),
        ),
        Body::Iff(a, b) => CBody::Iff(
            Box::new(compile_body(a, vars, ap_bits)?),
            Box::new(compile_body(b, vars, ap_bits)?),
        ),
        Body::Next(b) => CBody::Next(Box::new(compile_body(b, vars, ap_bits)?)),
        Body::Until(a, b) => CBody::Until(
            Box::new(compile_body(a, vars, ap_bits)?),
            Box::new(compile_body(b, vars, ap_bits)?),
        ),
        Body::Eventually(b) => CBody::Eventually(Box::new(compile_body(b, vars, ap_bits)?)),
        Body::Always(b) => CBody::Always(Box::new(compile_body(b, vars, ap_bits)?)),
    })
}

fn eval_cbody(body: &CBody, binding: &[&Vec<u128>], pos: usize, last: usize) -> bool {
    match body {
        CBody::Const(b) => *b,
        CBody::Atom { mask, slot } => binding[*slot][pos] & mask != 0,
        CBody::Not(b) => !eval_cbody(b, binding, pos, last),
        CBody::And(a, b) => {
            eval_cbody(a, binding, pos, last) && eval_cbody(b, binding, pos, last)
        }
        CBody::Or(a, b) => eval_cbody(a, binding, pos, last) || eval_cbody(b, binding, pos, last),
        CBody::Implies(a, b) => {
            !eval_cbody(a, binding, pos, last) || eval_cbody(b, binding, pos, last)
        }
        CBody::Iff(a, b) => eval_cbody(a, binding, pos, last) == eval_cbody(b, binding, pos, last),
        CBody::Next(b) => pos < last && eval_cbody(b, binding, pos + 1, last),
        CBody::Eventually(b) => (pos..=last).any(|i| eval_cbody(b, binding, i, last)),
        CBody::Always(b) => (pos..=last).all(|i| eval_cbody(b, binding, i, last)),
        CBody::Until(a, b) => (pos..=last).any(|i| {
            eval_cbody(b, binding, i, last) && (pos..i).all(|j| eval_cbody(a, binding, j, last))
        }),
    }
}

/// Evaluate a formula over all depth-`n` AP-trace prefixes of `sts` by
/// materialized quantifier expansion. Formulas built by [`build_phi`] take an
/// input-grouped fast path with identical semantics.
pub fn eval_bounded(
    sts: &Sts,
    labeling: &ApLabeling,
    formula: &HyperFormula,
    depth: usize,
    budget: &mut Budget,
) -> Result<HyperVerdict, HyperError> {
    let domain = build_domain(sts, labeling, depth, budget)?;
    if let Some(shape) = &formula.shape {
        if shape_masks(shape, &domain).is_some() {
            let raw = eval_phi_grouped(shape, &domain)?;
            return Ok(finish_verdict(sts, formula, &domain, raw, depth));
        }
    }
    let raw = eval_naive(formula, &domain, depth, budget)?;
    Ok(finish_verdict(sts, formula, &domain, raw, depth))
}

/// Force the general evaluator even for recognized formulas (used to check
/// the fast path against the definition).
pub fn eval_bounded_naive(
    sts: &Sts,
    labeling: &ApLabeling,
    formula: &HyperFormula,
    depth: usize,
    budget: &mut Budget,
) -> Result<HyperVerdict, HyperError> {
    let domain = build_domain(sts, labeling, depth, budget)?;
    let raw = eval_naive(formula, &domain, depth, budget)?;
    Ok(finish_verdict(sts, formula, &domain, raw, depth))
}

/// Expand the quantifiers at `binding[fixed..]` over the whole domain; the
/// first `fixed` slots stay bound to the caller's choices.
#[allow(clippy::too_many_arguments)]
fn quantifier_loop<'d>(
    quantifiers: &[Quantifier],
    fixed: usize,
    compiled: &CBody,
    domain: &'d ApDomain,
    binding: &mut Vec<&'d Vec<u128>>,
    depth: usize,
    budget: &mut Budget,
    witness_idx: &mut Vec<usize>,
    leading_exists: usize,
) -> Result<bool, HyperError> {
    let quant_level = binding.len() - fixed;
    if quant_level == quantifiers.len() {
        budget.charge(1).map_err(HyperError::Sts)?;
        return Ok(eval_cbody(compiled, binding, 0, depth));
    }
    let q = quantifiers[quant_level];
    for idx in 0..domain.traces.len() {
        binding.push(&domain.traces[idx]);
        let ok = quantifier_loop(
            quantifiers,
            fixed,
            compiled,
            domain,
            binding,
            depth,
            budget,
            witness_idx,
            leading_exists,
        )?;
        binding.pop();
        match q {
            Quantifier::Exists => {
                if ok {
                    if quant_level < leading_exists {
                        witness_idx.truncate(quant_level);
                        witness_idx.push(idx);
                    }
                    return Ok(true);
                }
            }
            Quantifier::Forall => {
                if !ok {
                    return Ok(false);
                }
            }
        }
    }
    Ok(matches!(q, Quantifier::Forall))
}

fn eval_naive(
    formula: &HyperFormula,
    domain: &ApDomain,
    depth: usize,
    budget: &mut Budget,
) -> Result<RawVerdict, HyperError> {
    let vars: Vec<String> = formula.prefix.iter().map(|(_, n)| n.clone()).collect();
    let compiled = compile_body(&formula.body, &vars, &domain.ap_bits)?;
    let quantifiers: Vec<Quantifier> = formula.prefix.iter().map(|(q, _)| *q).collect();
    let leading_exists = quantifiers.iter().take_while(|q| **q == Quantifier::Exists).count();
    let mut witness_idx: Vec<usize> = Vec::new();
    let mut binding: Vec<&Vec<u128>> = Vec::new();
    let holds = quantifier_loop(
        &quantifiers,
        0,
        &compiled,
        domain,
        &mut binding,
        depth,
        budget,
        &mut witness_idx,
        leading_exists,
    )?;
    let witnesses =
        if holds { witness_idx.iter().map(|&idx| idx).collect() } else { Vec::new() };
    Ok(RawVerdict { holds, witnesses })
}

/// Verdict before witness materialization.
struct RawVerdict {
    holds: bool,
    witnesses: Vec<usize>,
}

fn finish_verdict(
    sts: &Sts,
    formula: &HyperFormula,
    domain: &ApDomain,
    raw: RawVerdict,
    depth: usize,
) -> HyperVerdict {
    let ex = Explorer::new(sts);
    HyperVerdict {
        holds: raw.holds,
        bound: depth,
        witnesses: raw
            .witnesses
            .iter()
            .enumerate()
            .map(|(lvl, &idx)| (formula.prefix[lvl].1.clone(), ex.materialize(&domain.reps[idx])))
            .collect(),
    }
}

/// Re-evaluate a formula with its leading existential quantifiers fixed to
/// the given witnesses; remaining quantifiers expand over the full domain.
pub fn check_witnesses(
    sts: &Sts,
    labeling: &ApLabeling,
    formula: &HyperFormula,
    depth: usize,
    witnesses: &[(String, TracePrefix)],
    budget: &mut Budget,
) -> Result<bool, HyperError> {
    let domain = build_domain(sts, labeling, depth, budget)?;
    // Bind each witness by locating its AP trace in the domain.
    let mut fixed: Vec<(String, usize)> = Vec::new();
    for (name, prefix) in witnesses {
        let sets = ap_trace(prefix, labeling).map_err(HyperError::Sts)?;
        let bits: Vec<u128> = sets
            .iter()
            .map(|s| {
                let mut b = 0u128;
                for ap in s {
                    b |= 1 << domain.ap_bits[ap];
                }
                b
            })
            .collect();
        let idx = domain
            .traces
            .iter()
            .position(|t| *t == bits)
            .ok_or_else(|| HyperError::Parse(format!("witness for `{name}` not in domain")))?;
        fixed.push((name.clone(), idx));
    }
    // Formulas built by build_phi re-check through the same input grouping
    // that evaluates them; anything else expands the remaining quantifiers.
    if let Some(shape) = &formula.shape {
        if let Some(masks) = shape_masks(shape, &domain) {
            let idxs: Vec<usize> = fixed.iter().map(|&(_, idx)| idx).collect();
            if let Some(holds) = check_phi_witnesses(shape, &masks, &domain, &idxs) {
                return Ok(holds);
            }
        }
    }
    let vars: Vec<String> = formula.prefix.iter().map(|(_, n)| n.clone()).collect();
    let compiled = compile_body(&formula.body, &vars, &domain.ap_bits)?;
    let quantifiers: Vec<Quantifier> =
        formula.prefix.iter().skip(fixed.len()).map(|(q, _)| *q).collect();
    let mut binding: Vec<&Vec<u128>> = fixed.iter().map(|&(_, idx)| &domain.traces[idx]).collect();
    let mut witness_idx = Vec::new();
    quantifier_loop(
        &quantifiers,
        fixed.len(),
        &compiled,
        &domain,
        &mut binding,
        depth,
        budget,
        &mut witness_idx,
        0,
    )
}

/// Grouped re-check of a killing formula with its existential witnesses
/// fixed; `None` when the witness count does not cover the leading
/// existential block (the caller falls back to expansion).
fn check_phi_witnesses(
    shape: &PhiShape,
    masks: &ShapeMasks,
    domain: &ApDomain,
    fixed: &[usize],
) -> Option<bool> {
    let in_key = |idx: usize| -> Vec<u128> {
        domain.traces[idx].iter().map(|b| b & masks.input).collect()
    };
    let out_key = |idx: usize| -> Vec<u128> {
        domain.traces[idx].iter().map(|b| b & masks.output).collect()
    };
    let is_mut = |idx: usize| domain.traces[idx][0] & masks.mut_bit != 0;
    // Output-sequence sets of the two sides within one input group.
    let side_outs = |key: &[u128], mutant: bool| -> std::collections::BTreeSet<Vec<u128>> {
        domain
            .traces
            .iter()
            .enumerate()
            .filter(|(i, t)| {
                is_mut(*i) == mutant
                    && t.iter().zip(key.iter()).all(|(b, k)| b & masks.input == *k)
            })
            .map(|(i, _)| out_key(i))
            .collect()
    };
    match shape.kind {
        PhiKind::Phi1 => {
            let (&p, &q) = (fixed.first()?, fixed.get(1)?);
            Some(!is_mut(p) && is_mut(q) && in_key(p) == in_key(q) && out_key(p) != out_key(q))
        }
        PhiKind::Phi2 => {
            let &p = fixed.first()?;
            Some(is_mut(p) && !side_outs(&in_key(p), false).contains(&out_key(p)))
        }
        PhiKind::Phi3 => {
            let &p = fixed.first()?;
            let key = in_key(p);
            let orig = side_outs(&key, false);
            let mutant = side_outs(&key, true);
            Some(!is_mut(p) && orig.intersection(&mutant).next().is_none())
        }
        PhiKind::Phi4 => {
            let &p = fixed.first()?;
            Some(!is_mut(p) && !side_outs(&in_key(p), true).contains(&out_key(p)))
        }
    }
}

// --- input-grouped fast path ------------------------------------------------

struct ShapeMasks {
    input: u128,
    output: u128,
    mut_bit: u128,
}

fn shape_masks(shape: &PhiShape, domain: &ApDomain) -> Option<ShapeMasks> {
    let mut input = 0u128;
    for ap in &shape.input_aps {
        input |= 1u128 << *domain.ap_bits.get(ap)?;
    }
    let mut output = 0u128;
    for ap in &shape.output_aps {
        output |= 1u128 << *domain.ap_bits.get(ap)?;
    }
    let mut_bit = 1u128 << *domain.ap_bits.get(MUT_AP)?;
    Some(ShapeMasks { input, output, mut_bit })
}

/// Evaluate a killing formula by grouping AP traces by input projection and
/// mut polarity. Equal inputs at every position is exactly equality of the
/// input projections, and eventual output divergence is exactly inequality of
/// the output projections, so the formula reduces to set conditions per input
/// sequence. Groups iterate in canonical order, so witnesses are
/// deterministic.
fn eval_phi_grouped(shape: &PhiShape, domain: &ApDomain) -> Result<RawVerdict, HyperError> {
    let masks = shape_masks(shape, domain).expect("checked by caller");
    type Key = Vec<u128>;
    struct Group {
        orig: BTreeMap<Key, usize>,
        mutant: BTreeMap<Key, usize>,
    }
    let mut groups: BTreeMap<Key, Group> = BTreeMap::new();
    for (idx, bits) in domain.traces.iter().enumerate() {
        let in_key: Key = bits.iter().map(|b| b & masks.input).collect();
        let out_key: Key = bits.iter().map(|b| b & masks.output).collect();
        let is_mut = bits[0] & masks.mut_bit != 0;
        let group = groups
            .entry(in_key)
            .or_insert_with(|| Group { orig: BTreeMap::new(), mutant: BTreeMap::new() });
        let side = if is_mut { &mut group.mutant } else { &mut group.orig };
        side.entry(out_key).or_insert(idx);
    }

    let verdict = |witnesses: Vec<usize>| RawVerdict { holds: true, witnesses };

    match shape.kind {
        PhiKind::Phi1 => {
            for group in groups.values() {
                for (o_out, &o_idx) in &group.orig {
                    for (m_out, &m_idx) in &group.mutant {
                        if o_out != m_out {
                            return Ok(verdict(vec![o_idx, m_idx]));
                        }
                    }
                }
            }
        }
        PhiKind::Phi2 => {
            for group in groups.values() {
                for (m_out, &m_idx) in &group.mutant {
                    if !group.orig.contains_key(m_out) {
                        return Ok(verdict(vec![m_idx]));
                    }
                }
            }
        }
        PhiKind::Phi3 => {
            for group in groups.values() {
                if let Some((_, &o_idx)) = group.orig.iter().next() {
                    if group.mutant.keys().all(|m_out| !group.orig.contains_key(m_out)) {
                        return Ok(verdict(vec![o_idx]));
                    }
                }
            }
        }
        PhiKind::Phi4 => {
            for group in groups.values() {
                for (o_out, &o_idx) in &group.orig {
                    if !group.mutant.contains_key(o_out) {
                        return Ok(verdict(vec![o_idx]));
                    }
                }
            }
        }
    }
    Ok(RawVerdict { holds: false, witnesses: Vec::new() })
}

/// Convert an existential witness into a test of the original model, trimmed
/// to the first depth at which it kills in the formula's mode. A phi2 witness
/// carries `mut=true` and is replaced by an equal-input original trace first.
pub fn witness_to_test(
    cm: &ConditionalMutant,
    kind: PhiKind,
    witness: &TracePrefix,
) -> Result<Test, HyperError> {
    let polarity = witness.steps()[0]
        .state
        .get(MUT_VAR)
        .and_then(|v| v.as_bool())
        .ok_or_else(|| HyperError::Parse(format!("witness lacks `{MUT_VAR}`")))?;
    if polarity != kind.witness_polarity() {
        return Err(HyperError::WrongPolarity(kind.witness_polarity()));
    }

    let inputs: Vec<Valuation> = witness.inputs();
    let outputs: Vec<Valuation> = if polarity {
        // Any equal-input original trace yields the test.
        let orig_sts = cm.project(false);
        let orig = Explorer::new(&orig_sts);
        let in_ids: Vec<u64> = inputs
            .iter()
            .map(|v| orig.input_idx(v).ok_or(HyperError::NoEqualInputTrace))
            .collect::<Result<_, _>>()?;
        let run = orig.first_run(&in_ids)?.ok_or(HyperError::NoEqualInputTrace)?;
        run.outputs()
    } else {
        witness.outputs()
    };

    let mode = kind.kill_mode();
    for d in 0..=inputs.len() {
        let candidate = Test { inputs: inputs[..d].to_vec(), outputs: outputs[..=d].to_vec() };
        if test_kills(cm, &candidate, mode).unwrap_or(false) {
            return Ok(candidate);
        }
    }
    Err(HyperError::NoDivergence)
}

// --- text format -------------------------------------------------------------

impl fmt::Display for Quantifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantifier::Exists => write!(f, "exists"),
            Quantifier::Forall => write!(f, "forall"),
        }
    }
}

fn fmt_body(b: &Body, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match b {
        Body::Const(true) => write!(f, "true"),
        Body::Const(false) => write!(f, "false"),
        Body::Atom { ap, trace } => write!(f, "{ap}@{trace}"),
        Body::Not(x) => {
            write!(f, "!")?;
            fmt_atomic(x, f)
        }
        Body::And(a, b) => {
            fmt_atomic(a, f)?;
            write!(f, " && ")?;
            fmt_atomic(b, f)
        }
        Body::Or(a, b) => {
            fmt_atomic(a, f)?;
            write!(f, " || ")?;
            fmt_atomic(b, f)
        }
        Body::Implies(a, b) => {
            fmt_atomic(a, f)?;
            write!(f, " -> ")?;
            fmt_atomic(b, f)
        }
        Body::Iff(a, b) => {
            fmt_atomic(a, f)?;
            write!(f, " <-> ")?;
            fmt_atomic(b, f)
        }
        Body::Next(x) => {
            write!(f, "X(")?;
            fmt_body(x, f)?;
            write!(f, ")")
        }
        Body::Eventually(x) => {
            write!(f, "F(")?;
            fmt_body(x, f)?;
            write!(f, ")")
        }
        Body::Always(x) => {
            write!(f, "G(")?;
            fmt_body(x, f)?;
            write!(f, ")")
        }
        Body::Until(a, b) => {
            fmt_atomic(a, f)?;
            write!(f, " U ")?;
            fmt_atomic(b, f)
        }
    }
}

fn fmt_atomic(b: &Body, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match b {
        Body::Atom { .. } | Body::Const(_) => fmt_body(b, f),
        _ => {
            write!(f, "(")?;
            fmt_body(b, f)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for HyperFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (q, name) in &self.prefix {
            write!(f, "{q} {name}. ")?;
        }
        fmt_body(&self.body, f)
    }
}

/// Parse the textual formula format: `exists p. forall q. G(...) -> F(...)`
/// with atoms `[var=value]@p` and `mut@p`, connectives `! && || -> <->`,
/// temporal `G F X U`, and parentheses.
pub fn parse_formula(text: &str) -> Result<HyperFormula, HyperError> {
    let toks = tokenize_formula(text)?;
    let mut p = FormulaParser { toks, pos: 0 };
    let mut prefix = Vec::new();
    loop {
        match p.peek() {
            FTok::Ident(w) if w == "exists" || w == "forall" => {
                let q = if w == "exists" { Quantifier::Exists } else { Quantifier::Forall };
                p.bump();
                let name = match p.bump() {
                    FTok::Ident(n) => n,
                    other => {
                        return Err(HyperError::Parse(format!(
                            "expected trace variable, found {other:?}"
                        )))
                    }
                };
                if !matches!(p.bump(), FTok::Dot) {
                    return Err(HyperError::Parse("expected `.` after trace variable".into()));
                }
                prefix.push((q, name));
            }
            _ => break,
        }
    }
    if prefix.len() > 3 {
        return Err(HyperError::Parse("at most three trace quantifiers".into()));
    }
    let body = p.parse_iff()?;
    if !matches!(p.peek(), FTok::Eof) {
        return Err(HyperError::Parse(format!("trailing tokens: {:?}", p.peek())));
    }
    // Every referenced trace variable must be bound.
    let mut vars = Vec::new();
    collect_trace_vars(&body, &mut vars);
    for v in vars {
        if !prefix.iter().any(|(_, n)| *n == v) {
            return Err(HyperError::UnboundTraceVar(v));
        }
    }
    Ok(HyperFormula { prefix, body, shape: None })
}

fn collect_trace_vars(b: &Body, out: &mut Vec<String>) {
    match b {
        Body::Atom { trace, .. } => {
            if !out.contains(trace) {
                out.push(trace.clone());
            }
        }
        Body::Const(_) => {}
        Body::Not(x) | Body::Next(x) | Body::Eventually(x) | Body::Always(x) => {
            collect_trace_vars(x, out)
        }
        Body::And(a, b)
        | Body::Or(a, b)
        | Body::Implies(a, b)
        | Body::Iff(a, b)
        | Body::Until(a, b) => {
            collect_trace_vars(a, out);
            collect_trace_vars(b, out);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum FTok {
    Ident(String),
    Ap(String),
    At,
    Dot,
    LParen,
    RParen,
    Not,
    AndAnd,
    OrOr,
    Arrow,
    DArrow,
    Eof,
}

fn tokenize_formula(text: &str) -> Result<Vec<FTok>, HyperError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'[' => {
                let start = i;
                while i < bytes.len() && bytes[i] != b']' {
                    i += 1;
                }
                if i == bytes.len() {
                    return Err(HyperError::Parse("unterminated `[`".into()));
                }
                i += 1;
                toks.push(FTok::Ap(text[start..i].to_string()));
            }
            b'@' => {
                toks.push(FTok::At);
                i += 1;
            }
            b'.' => {
                toks.push(FTok::Dot);
                i += 1;
            }
            b'(' => {
                toks.push(FTok::LParen);
                i += 1;
            }
            b')' => {
                toks.push(FTok::RParen);
                i += 1;
            }
            b'!' => {
                toks.push(FTok::Not);
                i += 1;
            }
            b'&' if bytes.get(i + 1) == Some(&b'&') => {
                toks.push(FTok::AndAnd);
                i += 2;
            }
            b'|' if bytes.get(i + 1) == Some(&b'|') => {
                toks.push(FTok::OrOr);
                i += 2;
            }
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                toks.push(FTok::Arrow);
                i += 2;
            }
            b'<' if bytes.get(i + 1) == Some(&b'-') && bytes.get(i + 2) == Some(&b'>') => {
                toks.push(FTok::DArrow);
                i += 3;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push(FTok::Ident(text[start..i].to_string()));
            }
            other => {
                return Err(HyperError::Parse(format!(
                    "unexpected character `{}`",
                    other as char
                )))
            }
        }
    }
    toks.push(FTok::Eof);
    Ok(toks)
}

struct FormulaParser {
    toks: Vec<FTok>,
    pos: usize,
}

impl FormulaParser {
    fn peek(&self) -> &FTok {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> FTok {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn parse_iff(&mut self) -> Result<Body, HyperError> {
        let mut lhs = self.parse_implies()?;
        while *self.peek() == FTok::DArrow {
            self.bump();
            let rhs = self.parse_implies()?;
            lhs = Body::Iff(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_implies(&mut self) -> Result<Body, HyperError> {
        let lhs = self.parse_or()?;
        if *self.peek() == FTok::Arrow {
            self.bump();
            // Right associative.
            let rhs = self.parse_implies()?;
            return Ok(Body::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn parse_or(&mut self) -> Result<Body, HyperError> {
        let mut lhs = self.parse_and()?;
        while *self.peek() == FTok::OrOr {
            self.bump();
            let rhs = self.parse_and()?;
            lhs = Body::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Body, HyperError> {
        let mut lhs = self.parse_until()?;
        while *self.peek() == FTok::AndAnd {
            self.bump();
            let rhs = self.parse_until()?;
            lhs = Body::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_until(&mut self) -> Result<Body, HyperError> {
        let lhs = self.parse_unary()?;
        if matches!(self.peek(), FTok::Ident(w) if w == "U") {
            self.bump();
            let rhs = self.parse_unary()?;
            return Ok(Body::Until(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Body, HyperError> {
        match self.peek().clone() {
            FTok::Not => {
                self.bump();
                Ok(Body::Not(Box::new(self.parse_unary()?)))
            }
            FTok::Ident(w) if w == "G" || w == "F" || w == "X" => {
                self.bump();
                let inner = self.parse_unary()?;
                Ok(match w.as_str() {
                    "G" => Body::Always(Box::new(inner)),
                    "F" => Body::Eventually(Box::new(inner)),
                    _ => Body::Next(Box::new(inner)),
                })
            }
            FTok::LParen => {
                self.bump();
                let inner = self.parse_iff()?;
                if !matches!(self.bump(), FTok::RParen) {
                    return Err(HyperError::Parse("expected `)`".into()));
                }
                Ok(inner)
            }
            FTok::Ident(w) if w == "true" || w == "false" => {
                self.bump();
                Ok(Body::Const(w == "true"))
            }
            FTok::Ap(ap) | FTok::Ident(ap) => {
                self.bump();
                if !matches!(self.bump(), FTok::At) {
                    return Err(HyperError::Parse(format!("expected `@` after `{ap}`")));
                }
                match self.bump() {
                    FTok::Ident(trace) => Ok(Body::Atom { ap, trace }),
                    other => {
                        Err(HyperError::Parse(format!("expected trace variable, found {other:?}")))
                    }
                }
            }
            other => Err(HyperError::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::enum_v;
    use crate::kill::tests::{coffee_only_cm, fill_cm, fill_set_cm, identity_cm};

    fn eval_phi(cm: &ConditionalMutant, kind: PhiKind, depth: usize) -> HyperVerdict {
        let formula = build_phi_for(kind, &cm.sts);
        let labeling = killing_labeling(&cm.sts);
        eval_bounded(&cm.sts, &labeling, &formula, depth, &mut Budget::default()).unwrap()
    }

    #[test]
    fn phi_shapes_match_their_quantifier_prefixes() {
        let cm = fill_cm();
        let (ins, outs) = io_ap_names(&cm.sts);
        let phi1 = build_phi(PhiKind::Phi1, &ins, &outs);
        assert_eq!(
            phi1.prefix.iter().map(|(q, _)| *q).collect::<Vec<_>>(),
            vec![Quantifier::Exists, Quantifier::Exists]
        );
        let phi2 = build_phi(PhiKind::Phi2, &ins, &outs);
        assert_eq!(
            phi2.prefix.iter().map(|(q, _)| *q).collect::<Vec<_>>(),
            vec![Quantifier::Exists, Quantifier::Forall]
        );
        // The mutant polarity sits on the existential trace of phi2.
        assert!(phi2.to_string().contains("G(mut@p)"), "{phi2}");
        let phi3 = build_phi(PhiKind::Phi3, &ins, &outs);
        assert_eq!(
            phi3.prefix.iter().map(|(q, _)| *q).collect::<Vec<_>>(),
            vec![Quantifier::Exists, Quantifier::Forall, Quantifier::Forall]
        );
        assert!(phi3.to_string().contains("G(!mut@p)"), "{phi3}");
        let printed = phi3.to_string();
        assert!(printed.contains("[in=req]@q"), "{printed}");
        assert!(printed.contains("F("), "{printed}");
    }

    /// Deterministic model with an identical-branch mutant: no divergence
    /// exists anywhere, so phi1 fails at every bound.
    fn deterministic_identity_cm() -> ConditionalMutant {
        let combined = "\
input i : bool;
output o : enum { eps, a };
state x : bool;
state mut : bool;
init o := eps; x := false; mut := {false, true};
next
  o := if (i): a else: eps;
  x := if (mut): i else: i;
  mut := mut;
";
        let original = "\
input i : bool;
output o : enum { eps, a };
state x : bool;
init o := eps; x := false;
next
  o := if (i): a else: eps;
  x := i;
";
        ConditionalMutant::from_model_with_mut(
            crate::lang::parse(combined).unwrap(),
            crate::lang::parse(original).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn identity_mutant_never_satisfies_phi1() {
        let cm = deterministic_identity_cm();
        for depth in 0..=4 {
            assert!(!eval_phi(&cm, PhiKind::Phi1, depth).holds, "depth {depth}");
        }
        // On a non-deterministic identity mutant phi1 still fails: equal
        // choices exist on both sides, but no unmatched behavior does.
        // (Potential kills require leaving the original's behavior set, which
        // an identical mutant cannot do; phi1 only sees chosen pairs, so it
        // can diverge there. The deterministic claim is the one asserted.)
        let nondet = identity_cm();
        let verdict = eval_phi(&nondet, PhiKind::Phi2, 3);
        assert!(!verdict.holds, "identity mutant is not potentially killable");
    }

    #[test]
    fn fill_mutant_satisfies_phi3_with_verifying_witness() {
        let cm = fill_cm();
        let verdict = eval_phi(&cm, PhiKind::Phi3, 7);
        assert!(verdict.holds);
        let (_, witness) = &verdict.witnesses[0];
        let t = witness_to_test(&cm, PhiKind::Phi3, witness).unwrap();
        assert!(test_kills(&cm, &t, KillMode::Definite).unwrap());
        // The divergence step shows a drink against the mutant's silence.
        let last = t.outputs.last().unwrap().get("out").unwrap().clone();
        assert!(last == enum_v("coff") || last == enum_v("tea"));
    }

    #[test]
    fn fill_mutant_satisfies_phi1_and_phi2() {
        let cm = fill_cm();
        assert!(eval_phi(&cm, PhiKind::Phi1, 7).holds);
        let verdict = eval_phi(&cm, PhiKind::Phi2, 7);
        assert!(verdict.holds);
        let (_, witness) = &verdict.witnesses[0];
        let t = witness_to_test(&cm, PhiKind::Phi2, witness).unwrap();
        assert!(test_kills(&cm, &t, KillMode::Potential).unwrap());
    }

    #[test]
    fn set_fill_mutant_separates_phi2_from_phi3() {
        let cm = fill_set_cm();
        assert!(eval_phi(&cm, PhiKind::Phi2, 7).holds, "potentially killable");
        assert!(!eval_phi(&cm, PhiKind::Phi3, 7).holds, "not definitely killable");
    }

    #[test]
    fn coffee_only_mutant_fails_phi2_but_passes_phi1() {
        let cm = coffee_only_cm();
        assert!(!eval_phi(&cm, PhiKind::Phi2, 6).holds, "equivalent mutant");
        // phi1 over-approximates on non-deterministic models: the original
        // may choose tea while the mutant chooses coffee.
        assert!(eval_phi(&cm, PhiKind::Phi1, 6).holds);
    }

    #[test]
    fn fast_path_agrees_with_materialized_expansion() {
        for cm in [fill_cm(), fill_set_cm(), coffee_only_cm(), identity_cm()] {
            let labeling = killing_labeling(&cm.sts);
            for kind in [PhiKind::Phi1, PhiKind::Phi2, PhiKind::Phi4] {
                let formula = build_phi_for(kind, &cm.sts);
                for depth in 0..=3 {
                    let fast = eval_bounded(
                        &cm.sts,
                        &labeling,
                        &formula,
                        depth,
                        &mut Budget::default(),
                    )
                    .unwrap();
                    let naive = eval_bounded_naive(
                        &cm.sts,
                        &labeling,
                        &formula,
                        depth,
                        &mut Budget::default(),
                    )
                    .unwrap();
                    assert_eq!(fast.holds, naive.holds, "{kind:?} at depth {depth}");
                }
            }
            // The three-quantifier expansion is costlier; check shallower.
            let formula = build_phi_for(PhiKind::Phi3, &cm.sts);
            for depth in 0..=2 {
                let fast =
                    eval_bounded(&cm.sts, &labeling, &formula, depth, &mut Budget::default())
                        .unwrap();
                let naive = eval_bounded_naive(
                    &cm.sts,
                    &labeling,
                    &formula,
                    depth,
                    &mut Budget::default(),
                )
                .unwrap();
                assert_eq!(fast.holds, naive.holds, "phi3 at depth {depth}");
            }
        }
    }

    #[test]
    fn witnesses_reevaluate_to_true() {
        let cm = fill_cm();
        let labeling = killing_labeling(&cm.sts);
        for kind in [PhiKind::Phi1, PhiKind::Phi2, PhiKind::Phi3] {
            let formula = build_phi_for(kind, &cm.sts);
            let verdict =
                eval_bounded(&cm.sts, &labeling, &formula, 5, &mut Budget::default()).unwrap();
            assert!(verdict.holds, "{kind:?}");
            assert!(check_witnesses(
                &cm.sts,
                &labeling,
                &formula,
                5,
                &verdict.witnesses,
                &mut Budget::default()
            )
            .unwrap());
        }
    }

    #[test]
    fn grouped_witness_recheck_matches_expansion() {
        // Arbitrary fixed candidates (not only true witnesses) must get the
        // same answer from the grouped re-check and the full expansion.
        for cm in [fill_cm(), fill_set_cm(), coffee_only_cm()] {
            let labeling = killing_labeling(&cm.sts);
            let ex = Explorer::new(&cm.sts);
            let raw = ex.enumerate_raw(2, &mut Budget::default()).unwrap();
            let candidates: Vec<TracePrefix> =
                raw.iter().step_by(raw.len() / 6 + 1).map(|p| ex.materialize(p)).collect();
            for kind in [PhiKind::Phi1, PhiKind::Phi2, PhiKind::Phi3, PhiKind::Phi4] {
                let shaped = build_phi_for(kind, &cm.sts);
                let stripped = HyperFormula { shape: None, ..shaped.clone() };
                for (i, w) in candidates.iter().enumerate() {
                    let fixed: Vec<(String, TracePrefix)> = if kind == PhiKind::Phi1 {
                        let other = &candidates[(i + 1) % candidates.len()];
                        vec![("p".into(), w.clone()), ("q".into(), other.clone())]
                    } else {
                        vec![("p".into(), w.clone())]
                    };
                    let grouped = check_witnesses(
                        &cm.sts,
                        &labeling,
                        &shaped,
                        2,
                        &fixed,
                        &mut Budget::default(),
                    )
                    .unwrap();
                    let naive = check_witnesses(
                        &cm.sts,
                        &labeling,
                        &stripped,
                        2,
                        &fixed,
                        &mut Budget::default(),
                    )
                    .unwrap();
                    assert_eq!(grouped, naive, "{kind:?} candidate {i}");
                }
            }
        }
    }

    #[test]
    fn wrong_polarity_witness_is_rejected() {
        let cm = fill_cm();
        let verdict = eval_phi(&cm, PhiKind::Phi3, 5);
        let (_, witness) = &verdict.witnesses[0];
        // phi2 expects a mut=true witness; a phi3 witness carries mut=false.
        assert!(matches!(
            witness_to_test(&cm, PhiKind::Phi2, witness),
            Err(HyperError::WrongPolarity(true))
        ));
    }

    #[test]
    fn zero_length_witness_without_divergence_errors() {
        let cm = fill_cm();
        let ex = Explorer::new(&cm.sts);
        let raw = ex.enumerate_raw(0, &mut Budget::default()).unwrap();
        let w = raw
            .iter()
            .map(|p| ex.materialize(p))
            .find(|t| t.steps()[0].state.get(MUT_VAR) == Some(&crate::domain::Value::Bool(false)))
            .unwrap();
        assert_eq!(witness_to_test(&cm, PhiKind::Phi3, &w), Err(HyperError::NoDivergence));
    }

    #[test]
    fn formula_text_round_trips() {
        let cm = fill_cm();
        for kind in [PhiKind::Phi1, PhiKind::Phi2, PhiKind::Phi3, PhiKind::Phi4] {
            let formula = build_phi_for(kind, &cm.sts);
            let printed = formula.to_string();
            let parsed = parse_formula(&printed).unwrap();
            assert_eq!(parsed.prefix, formula.prefix, "{printed}");
            assert_eq!(parsed.body, formula.body, "{printed}");
        }
        assert!(matches!(
            parse_formula("exists p. [x=1]@q"),
            Err(HyperError::UnboundTraceVar(_))
        ));
    }

    #[test]
    fn parsed_formulas_evaluate_via_the_general_path() {
        // A two-trace property with no recognized shape: some pair of traces
        // shares outputs at every position.
        let cm = identity_cm();
        let labeling = killing_labeling(&cm.sts);
        let formula = parse_formula(
            "exists p. exists q. G(mut@p && !mut@q && ([out=eps]@p <-> [out=eps]@q) \
             && ([out=coff]@p <-> [out=coff]@q) && ([out=tea]@p <-> [out=tea]@q))",
        )
        .unwrap();
        let verdict =
            eval_bounded(&cm.sts, &labeling, &formula, 3, &mut Budget::default()).unwrap();
        assert!(verdict.holds, "identity mutant mirrors the original");
    }
}
