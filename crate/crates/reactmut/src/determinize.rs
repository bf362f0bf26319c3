//! Controllable non-determinism: the transformation that adds a fresh input
//! `nd` selecting among non-deterministic choices, and a fresh initial state
//! flagged by a boolean `xtau`, so the result is deterministic up to `mut`.
//!
//! Two forms are built. The explicit form enumerates initial pairs and
//! transitions, partitions them into shared / original-only / mutant-only,
//! and assembles a transition predicate in which every branch of a
//! non-deterministic point is selected by its `nd` value; a branch exclusive
//! to the other side becomes a self-loop whose output differs from the
//! branch's own output, which is what lets divergence surface where one side
//! lost or gained non-determinism. Loops emit `eps`, except where the
//! exclusive branch itself outputs `eps`: there they emit a reserved fresh
//! output `tau` instead, since an `eps` loop would be indistinguishable from
//! the branch it stands in for and the sides could mimic each other forever.
//! The syntactic form rewrites set choices into `nd`-indexed if-chains in
//! the model text. `nd` values beyond a point's branch count alias the last
//! branch, which keeps the result total without adding behavior; at
//! deterministic points `nd` is ignored entirely.
//!
//! The transformation over-approximates killability: tests from the
//! determinized system kill the real mutant only if non-determinism can be
//! controlled, but a mutant equivalent after the transformation is equivalent
//! outright.

use crate::domain::{Valuation, Value, VarDomain, EPS};
use crate::kill::{decide_equivalence, search_potential_between, KillStatus, SearchDepth};
use crate::lang::{Assign, Expr, ModelAst, Rhs, Span, VarDecl};
use crate::mutate::{project_sts, ConditionalMutant, MUT_VAR};
use crate::pred::{BinOp, Pred};
use crate::sts::{Budget, Explorer, Sts, StsError, VarSet, DEFAULT_NODE_BUDGET};
use thiserror::Error;

/// Name of the fresh choice-selection input.
pub const ND_VAR: &str = "nd";
/// Name of the fresh initial-state flag.
pub const XTAU_VAR: &str = "xtau";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransformError {
    #[error(transparent)]
    Sts(#[from] StsError),
    #[error("model already declares `{0}`")]
    NameTaken(String),
}

/// The `nd` assignment: which (output, successor) each value selects, per
/// branching point, in canonical order.
#[derive(Debug, Clone)]
pub struct NdEncoding {
    /// Domain size of `nd` (the maximum branching degree).
    pub nd_domain: usize,
    /// Initial (output, state) pairs reachable from the fresh state, in `nd`
    /// order.
    pub init_branches: Vec<(Valuation, Valuation)>,
    /// Branch table per non-deterministic (state, input) point.
    pub nondet_points: Vec<NdPoint>,
}

#[derive(Debug, Clone)]
pub struct NdPoint {
    pub state: Valuation,
    pub input: Valuation,
    /// (output, successor) per `nd` value, in canonical order.
    pub branches: Vec<(Valuation, Valuation)>,
}

/// A determinized conditional mutant.
#[derive(Debug, Clone)]
pub struct Determinized {
    pub sts: Sts,
    pub encoding: NdEncoding,
}

fn eq_lit(name: &str, value: Value, primed: bool) -> Pred {
    let var = if primed { Pred::primed(name) } else { Pred::var(name) };
    Pred::eq(var, Pred::lit(value))
}

fn valuation_eq(v: &Valuation, primed: bool) -> Vec<Pred> {
    v.iter().map(|(name, value)| eq_lit(name, value.clone(), primed)).collect()
}

fn eps_output(outputs: &VarSet) -> Valuation {
    let mut v = Valuation::new();
    for (name, _) in outputs.vars() {
        v.set(name.clone(), Value::Enum(EPS.into()));
    }
    v
}

/// Guard selecting branch `j` of a `k`-branch point; values past the last
/// branch alias it, and single-branch points ignore `nd`.
fn nd_guard(j: usize, k: usize) -> Option<Pred> {
    if k <= 1 {
        return None;
    }
    if j + 1 < k {
        Some(eq_lit(ND_VAR, Value::Int(j as i64), false))
    } else {
        Some(Pred::binary(BinOp::Ge, Pred::var(ND_VAR), Pred::lit(Value::Int(j as i64))))
    }
}

/// Make the non-determinism of a conditional mutant controllable: enumerate
/// its initial pairs and transitions per `mut` polarity, size `nd` by the
/// maximum branching degree, and rebuild the transition relation so each
/// branch is selected by `nd`.
pub fn determinize_explicit(cm: &ConditionalMutant) -> Result<Determinized, TransformError> {
    let base = &cm.sts;
    for taken in [ND_VAR, XTAU_VAR] {
        if base.inputs.contains_var(taken)
            || base.outputs.contains_var(taken)
            || base.states.contains_var(taken)
        {
            return Err(TransformError::NameTaken(taken.into()));
        }
    }

    // Reserve a loop-marker literal absent from every output domain.
    let tau = {
        let mut candidate = "tau".to_string();
        let mut n = 0;
        let taken = |name: &str| {
            base.outputs.vars().iter().any(|(_, d)| match d {
                VarDomain::Enum(lits) => lits.iter().any(|l| l == name),
                _ => false,
            })
        };
        while taken(&candidate) {
            candidate = format!("tau{n}");
            n += 1;
        }
        candidate
    };
    let outputs = VarSet::new(
        base.outputs
            .vars()
            .iter()
            .map(|(name, dom)| {
                let VarDomain::Enum(lits) = dom else { unreachable!("outputs are enums") };
                let mut lits = lits.clone();
                lits.push(tau.clone());
                (name.clone(), VarDomain::Enum(lits))
            })
            .collect(),
    );

    let orig = project_sts(base, false);
    let mutant = project_sts(base, true);
    let orig_ex = Explorer::new(&orig);
    let mut_ex = Explorer::new(&mutant);
    // Both projections index the same core spaces.
    let merged_os = orig.outputs.merged(&orig.states);
    let pair_key = |o: u64, x: u64| -> u64 {
        let v = orig_ex.output_val(o).merged(&orig_ex.state_val(x));
        merged_os.index_of(&v).expect("pair in merged space")
    };
    let sorted_pairs = |mut pairs: Vec<(u64, u64)>| -> Vec<(u64, u64)> {
        pairs.sort_by_key(|&(o, x)| pair_key(o, x));
        pairs.dedup();
        pairs
    };

    // Initial branch universe across both polarities.
    let init_orig: Vec<(u64, u64)> = orig_ex.initial()?.to_vec();
    let init_mut: Vec<(u64, u64)> = mut_ex.initial()?.to_vec();
    let init_universe =
        sorted_pairs(init_orig.iter().chain(init_mut.iter()).copied().collect());

    // Transition branch universes at non-deterministic points.
    struct Point {
        state: u64,
        input: u64,
        universe: Vec<(u64, u64)>,
        in_orig: Vec<bool>,
        in_mut: Vec<bool>,
    }
    let mut points: Vec<Point> = Vec::new();
    let mut det_rules: Vec<(u64, u64, bool, (u64, u64))> = Vec::new();
    for state in 0..orig_ex.state_count() {
        for input in 0..orig_ex.input_count() {
            let s_orig = orig_ex.successors(state, input)?;
            let s_mut = mut_ex.successors(state, input)?;
            if s_orig.len() > 1 || s_mut.len() > 1 {
                let universe =
                    sorted_pairs(s_orig.iter().chain(s_mut.iter()).copied().collect());
                let in_orig = universe.iter().map(|p| s_orig.contains(p)).collect();
                let in_mut = universe.iter().map(|p| s_mut.contains(p)).collect();
                points.push(Point { state, input, universe, in_orig, in_mut });
            } else {
                if let Some(&pair) = s_orig.first() {
                    det_rules.push((state, input, false, pair));
                }
                if let Some(&pair) = s_mut.first() {
                    det_rules.push((state, input, true, pair));
                }
            }
        }
    }

    let nd_domain = init_universe
        .len()
        .max(points.iter().map(|p| p.universe.len()).max().unwrap_or(0))
        .max(1);

    // Assemble the new system.
    let inputs = base
        .inputs
        .merged(&VarSet::new(vec![(ND_VAR.into(), VarDomain::Int { lo: 0, hi: nd_domain as i64 - 1 })]));
    let states = base.states.merged(&VarSet::new(vec![(XTAU_VAR.into(), VarDomain::Bool)]));
    let xtau_core = orig.states.valuation_at(0);
    let o_eps = eps_output(&base.outputs);
    let o_tau = {
        let mut v = Valuation::new();
        for (name, _) in base.outputs.vars() {
            v.set(name.clone(), Value::Enum(tau.clone()));
        }
        v
    };
    // A loop must be distinguishable from the branch it replaces.
    let loop_output = |branch_out: &Valuation| -> Valuation {
        if *branch_out == o_eps {
            o_tau.clone()
        } else {
            o_eps.clone()
        }
    };

    let init = Pred::and_all(
        valuation_eq(&o_eps, false)
            .into_iter()
            .chain(valuation_eq(&xtau_core, false))
            .chain([eq_lit(XTAU_VAR, Value::Bool(true), false)]),
    );

    let mut disjuncts: Vec<Pred> = Vec::new();
    let k_init = init_universe.len();
    for b in [false, true] {
        let side_init = if b { &init_mut } else { &init_orig };
        for (j, &(o, x)) in init_universe.iter().enumerate() {
            let mut conj = vec![
                eq_lit(XTAU_VAR, Value::Bool(true), false),
                eq_lit(MUT_VAR, Value::Bool(b), false),
            ];
            conj.extend(valuation_eq(&xtau_core, false));
            conj.extend(nd_guard(j, k_init));
            if side_init.contains(&(o, x)) {
                conj.extend(valuation_eq(&orig_ex.output_val(o), false));
                conj.extend(valuation_eq(&orig_ex.state_val(x), true));
                conj.push(eq_lit(XTAU_VAR, Value::Bool(false), true));
            } else {
                // No corresponding initial pair on this side: loop at the
                // fresh state, output distinguishable from the pair's.
                conj.extend(valuation_eq(&loop_output(&orig_ex.output_val(o)), false));
                conj.extend(valuation_eq(&xtau_core, true));
                conj.push(eq_lit(XTAU_VAR, Value::Bool(true), true));
            }
            conj.push(eq_lit(MUT_VAR, Value::Bool(b), true));
            disjuncts.push(Pred::and_all(conj));
        }
    }

    for point in &points {
        let k = point.universe.len();
        for b in [false, true] {
            let present = if b { &point.in_mut } else { &point.in_orig };
            for (j, &(o, x2)) in point.universe.iter().enumerate() {
                let mut conj = vec![
                    eq_lit(XTAU_VAR, Value::Bool(false), false),
                    eq_lit(MUT_VAR, Value::Bool(b), false),
                ];
                conj.extend(valuation_eq(&orig_ex.state_val(point.state), false));
                conj.extend(valuation_eq(&orig_ex.input_val(point.input), false));
                conj.extend(nd_guard(j, k));
                if present[j] {
                    conj.extend(valuation_eq(&orig_ex.output_val(o), false));
                    conj.extend(valuation_eq(&orig_ex.state_val(x2), true));
                } else {
                    // Branch exclusive to the other side: self-loop with an
                    // output the branch cannot produce, so the divergence is
                    // visible at this very step.
                    conj.extend(valuation_eq(&loop_output(&orig_ex.output_val(o)), false));
                    conj.extend(valuation_eq(&orig_ex.state_val(point.state), true));
                }
                conj.push(eq_lit(XTAU_VAR, Value::Bool(false), true));
                conj.push(eq_lit(MUT_VAR, Value::Bool(b), true));
                disjuncts.push(Pred::and_all(conj));
            }
        }
    }

    for &(state, input, b, (o, x2)) in &det_rules {
        let mut conj = vec![
            eq_lit(XTAU_VAR, Value::Bool(false), false),
            eq_lit(MUT_VAR, Value::Bool(b), false),
        ];
        conj.extend(valuation_eq(&orig_ex.state_val(state), false));
        conj.extend(valuation_eq(&orig_ex.input_val(input), false));
        conj.extend(valuation_eq(&orig_ex.output_val(o), false));
        conj.extend(valuation_eq(&orig_ex.state_val(x2), true));
        conj.push(eq_lit(XTAU_VAR, Value::Bool(false), true));
        conj.push(eq_lit(MUT_VAR, Value::Bool(b), true));
        disjuncts.push(Pred::and_all(conj));
    }

    let sts = Sts::new(inputs, outputs, states, init, Pred::or_all(disjuncts))
        .map_err(TransformError::Sts)?;

    let encoding = NdEncoding {
        nd_domain,
        init_branches: init_universe
            .iter()
            .map(|&(o, x)| (orig_ex.output_val(o), orig_ex.state_val(x)))
            .collect(),
        nondet_points: points
            .iter()
            .map(|p| NdPoint {
                state: orig_ex.state_val(p.state),
                input: orig_ex.input_val(p.input),
                branches: p
                    .universe
                    .iter()
                    .map(|&(o, x)| (orig_ex.output_val(o), orig_ex.state_val(x)))
                    .collect(),
            })
            .collect(),
    };
    Ok(Determinized { sts, encoding })
}

/// Rewrite every set choice of a model into an `nd`-indexed if-chain, with
/// `nd` declared as a fresh input sized by the maximum set arity. The `mut`
/// initialization set is exempt: mutant selection stays non-deterministic so
/// the result is deterministic up to `mut`.
pub fn determinize_syntactic(ast: &ModelAst) -> Result<ModelAst, TransformError> {
    if ast.decl(ND_VAR).is_some() || ast.enum_literals().contains(&ND_VAR) {
        return Err(TransformError::NameTaken(ND_VAR.into()));
    }
    fn max_arity(rhs: &Rhs) -> usize {
        match rhs {
            Rhs::Expr(_) => 1,
            Rhs::Set(elems, _) => elems.len(),
            Rhs::Ite { arms, otherwise, .. } => arms
                .iter()
                .map(|(_, r)| max_arity(r))
                .chain([max_arity(otherwise)])
                .max()
                .unwrap_or(1),
        }
    }
    let n = ast
        .init
        .iter()
        .chain(ast.next.iter())
        .filter(|a| a.target != MUT_VAR)
        .map(|a| max_arity(&a.rhs))
        .max()
        .unwrap_or(1)
        .max(1);

    fn rewrite(rhs: &Rhs) -> Rhs {
        match rhs {
            Rhs::Expr(e) => Rhs::Expr(e.clone()),
            Rhs::Set(elems, span) => {
                if elems.len() == 1 {
                    return Rhs::Expr(elems[0].clone());
                }
                let arms = elems[..elems.len() - 1]
                    .iter()
                    .enumerate()
                    .map(|(j, e)| {
                        let guard = Expr::Binary {
                            op: BinOp::Eq,
                            lhs: Box::new(Expr::Ident(ND_VAR.into(), *span)),
                            rhs: Box::new(Expr::Int(j as i64, *span)),
                            span: *span,
                        };
                        (guard, Rhs::Expr(e.clone()))
                    })
                    .collect();
                Rhs::Ite {
                    arms,
                    otherwise: Box::new(Rhs::Expr(elems[elems.len() - 1].clone())),
                    span: *span,
                }
            }
            Rhs::Ite { arms, otherwise, span } => Rhs::Ite {
                arms: arms.iter().map(|(g, r)| (g.clone(), rewrite(r))).collect(),
                otherwise: Box::new(rewrite(otherwise)),
                span: *span,
            },
        }
    }

    let mut out = ast.clone();
    out.inputs.push(VarDecl {
        name: ND_VAR.into(),
        domain: VarDomain::Int { lo: 0, hi: n as i64 - 1 },
        span: Span::default(),
    });
    let rewrite_block = |assigns: &mut Vec<Assign>| {
        for a in assigns.iter_mut() {
            if a.target != MUT_VAR {
                a.rhs = rewrite(&a.rhs);
            }
        }
    };
    rewrite_block(&mut out.init);
    rewrite_block(&mut out.next);
    Ok(out)
}

/// Transformation property report.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformReport {
    /// The determinized system is deterministic up to `mut`.
    pub deterministic_up_to_mut: bool,
    /// Every depth-`n` prefix of the conditional mutant embeds, one step
    /// shifted, into the determinized system.
    pub trace_inclusion: bool,
    /// The determinized system is killable (potential-search fixpoint).
    pub d_killable: bool,
    /// The conditional mutant's own verdict.
    pub cm_status: KillStatus,
    /// Equivalence transfers in the sound direction: not killable after the
    /// transformation implies equivalent.
    pub soundness_holds: bool,
}

/// Check the transformation properties at the given depth.
pub fn verify_transform(
    cm: &ConditionalMutant,
    d: &Determinized,
    depth: usize,
) -> Result<TransformReport, TransformError> {
    let mut budget = Budget::default();

    // (1) Determinism up to mut.
    let validation = d.sts.validate_modulo(depth + 1, &[MUT_VAR])?;
    let deterministic_up_to_mut = validation.deterministic;

    // (2) Trace inclusion: simulate each conditional-mutant prefix inside the
    // determinized system, choosing nd values from the encoding and checking
    // each chosen step against the actual successor relation.
    let trace_inclusion = check_trace_inclusion(cm, d, depth, &mut budget)?;

    // (3) Soundness direction of equivalence transfer.
    let d_orig = project_sts(&d.sts, false);
    let d_mut = project_sts(&d.sts, true);
    let d_search =
        search_potential_between(&d_orig, &d_mut, SearchDepth::Fixpoint, &mut budget)?;
    let d_killable = d_search.kill.is_some();
    let verdict = decide_equivalence(cm, DEFAULT_NODE_BUDGET);
    let soundness_holds = d_killable || verdict.status == KillStatus::Equivalent;

    Ok(TransformReport {
        deterministic_up_to_mut,
        trace_inclusion,
        d_killable,
        cm_status: verdict.status,
        soundness_holds,
    })
}

fn check_trace_inclusion(
    cm: &ConditionalMutant,
    d: &Determinized,
    depth: usize,
    budget: &mut Budget,
) -> Result<bool, TransformError> {
    let cm_ex = Explorer::new(&cm.sts);
    let d_ex = Explorer::new(&d.sts);
    let prefixes = cm_ex.enumerate_raw(depth, budget)?;

    let core_names: Vec<&str> =
        cm.sts.states.vars().iter().map(|(n, _)| n.as_str()).collect();
    let find_nd = |branches: &[(Valuation, Valuation)], out: &Valuation, core: &Valuation| {
        branches.iter().position(|(bo, bx)| bo == out && bx == core)
    };

    for prefix in &prefixes {
        // The conditional-mutant prefix fixes mut; D starts at the fresh
        // state with the same polarity.
        let first_state = cm_ex.sts.states.valuation_at(prefix[0].2);
        let mut_value = first_state.get(MUT_VAR).cloned().expect("conditional mutant has mut");

        let mut d_state = {
            let mut v = cm.sts.states.valuation_at(0).restrict(&core_names);
            // The fresh initial core is the canonically least core state.
            let least = project_sts(&cm.sts, false).states.valuation_at(0);
            for (name, value) in least.iter() {
                v.set(name.clone(), value.clone());
            }
            v.set(MUT_VAR, mut_value.clone());
            v.set(XTAU_VAR, Value::Bool(true));
            v
        };

        for (j, &(input, out, state)) in prefix.iter().enumerate() {
            let out_val = cm_ex.output_val(out);
            let target_core = cm_ex.state_val(state).without(&[MUT_VAR]);
            let (base_input, nd_value) = if j == 0 {
                // The jump from the fresh state: any base input, nd selecting
                // the initial pair.
                let nd = match find_nd(&d.encoding.init_branches, &out_val, &target_core) {
                    Some(nd) => nd,
                    None => return Ok(false),
                };
                (cm.sts.inputs.valuation_at(0), nd)
            } else {
                let input_val = cm_ex.input_val(input.expect("input past position 0"));
                let source_core = d_state.without(&[MUT_VAR, XTAU_VAR]);
                let nd = d
                    .encoding
                    .nondet_points
                    .iter()
                    .find(|p| p.state == source_core && p.input == input_val)
                    .map(|p| find_nd(&p.branches, &out_val, &target_core))
                    .unwrap_or(Some(0));
                match nd {
                    Some(nd) => (input_val, nd),
                    None => return Ok(false),
                }
            };
            let mut d_input = base_input;
            d_input.set(ND_VAR, Value::Int(nd_value as i64));

            // Verify the chosen step against the determinized system itself.
            let expected_state = {
                let mut v = target_core.clone();
                v.set(MUT_VAR, mut_value.clone());
                v.set(XTAU_VAR, Value::Bool(false));
                v
            };
            let d_state_idx = d_ex.state_idx(&d_state).expect("state in space");
            let d_input_idx = d_ex.input_idx(&d_input).expect("input in space");
            let succ = d_ex.successors(d_state_idx, d_input_idx)?;
            let hit = succ.iter().any(|&(o, x)| {
                d_ex.output_val(o) == out_val && d_ex.state_val(x) == expected_state
            });
            if !hit {
                return Ok(false);
            }
            d_state = expected_state;
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{enum_v, int_v};
    use crate::kill::tests::{coffee_only_cm, fill_cm, fill_set_cm, identity_cm};
    use crate::lang::{elaborate, parse, render};

    #[test]
    fn beverage_nd_domain_is_two_and_selects_drinks() {
        let cm = fill_cm();
        let d = determinize_explicit(&cm).unwrap();
        assert_eq!(d.encoding.nd_domain, 2);

        // From the post-jump state wtr=2, nd selects coffee or tea.
        let state = Valuation::from_pairs(&[
            ("wtr", int_v(2)),
            ("mut", Value::Bool(false)),
            ("xtau", Value::Bool(false)),
        ]);
        let drink = |nd: i64| {
            let input = Valuation::from_pairs(&[("in", enum_v("req")), ("nd", int_v(nd))]);
            let succ = d.sts.successors(&state, &input).unwrap();
            assert_eq!(succ.len(), 1, "deterministic under full input");
            succ[0].0.get("out").unwrap().clone()
        };
        assert_eq!(drink(0), enum_v("coff"));
        assert_eq!(drink(1), enum_v("tea"));
    }

    #[test]
    fn determinized_beverage_is_deterministic_up_to_mut() {
        let cm = fill_cm();
        let d = determinize_explicit(&cm).unwrap();
        let report = d.sts.validate_modulo(5, &[MUT_VAR]).unwrap();
        assert!(report.deterministic);
        assert!(report.total);
        // Plain validation still sees the mut choice.
        assert_eq!(d.sts.validate(0).unwrap().initial_count, 2);
    }

    #[test]
    fn nd_is_dont_care_at_deterministic_points() {
        let cm = fill_cm();
        let d = determinize_explicit(&cm).unwrap();
        let state = Valuation::from_pairs(&[
            ("wtr", int_v(2)),
            ("mut", Value::Bool(false)),
            ("xtau", Value::Bool(false)),
        ]);
        // `fill` is deterministic: nd must not matter.
        let succ_for = |nd: i64| {
            let input = Valuation::from_pairs(&[("in", enum_v("fill")), ("nd", int_v(nd))]);
            d.sts.successors(&state, &input).unwrap()
        };
        assert_eq!(succ_for(0), succ_for(1));
        assert_eq!(succ_for(0).len(), 1);
    }

    #[test]
    fn transform_report_passes_on_the_running_example() {
        let cm = fill_cm();
        let d = determinize_explicit(&cm).unwrap();
        let report = verify_transform(&cm, &d, 4).unwrap();
        assert!(report.deterministic_up_to_mut);
        assert!(report.trace_inclusion);
        assert!(report.d_killable);
        assert_eq!(report.cm_status, KillStatus::DefinitelyKillable);
        assert!(report.soundness_holds);
    }

    #[test]
    fn identity_mutant_checks_pass_trivially() {
        let cm = identity_cm();
        let d = determinize_explicit(&cm).unwrap();
        let report = verify_transform(&cm, &d, 4).unwrap();
        assert!(report.deterministic_up_to_mut);
        assert!(report.trace_inclusion);
        assert!(!report.d_killable);
        assert_eq!(report.cm_status, KillStatus::Equivalent);
        assert!(report.soundness_holds);
    }

    #[test]
    fn equivalent_coffee_only_mutant_is_killable_after_transformation() {
        // Determinization deprives the model of its ability to match the
        // mutant by choosing tea: killability here is an artifact, which is
        // exactly the over-approximation direction.
        let cm = coffee_only_cm();
        let d = determinize_explicit(&cm).unwrap();
        let report = verify_transform(&cm, &d, 4).unwrap();
        assert!(report.deterministic_up_to_mut);
        assert!(report.trace_inclusion);
        assert!(report.d_killable, "killable after the transformation");
        assert_eq!(report.cm_status, KillStatus::Equivalent);
        assert!(report.soundness_holds, "the sound direction is vacuous here");
    }

    #[test]
    fn set_fill_mutant_transform_properties_hold() {
        let cm = fill_set_cm();
        let d = determinize_explicit(&cm).unwrap();
        let report = verify_transform(&cm, &d, 4).unwrap();
        assert!(report.deterministic_up_to_mut);
        assert!(report.trace_inclusion);
        assert!(report.d_killable);
        assert_eq!(report.cm_status, KillStatus::PotentiallyOnly);
        assert!(report.soundness_holds);
    }

    #[test]
    fn syntactic_rewrite_matches_the_case_switch_shape() {
        let cm = fill_cm();
        let rewritten = determinize_syntactic(&cm.combined).unwrap();
        let text = render(&rewritten);
        assert!(text.contains("nd : int[0..1]"), "{text}");
        assert!(text.contains("if (nd = 0): coff else: tea"), "{text}");
        // mut stays non-deterministic.
        assert!(text.contains("mut := {false, true}"), "{text}");
        let sts = elaborate(&rewritten).unwrap();
        let report = sts.validate_modulo(5, &[MUT_VAR]).unwrap();
        assert!(report.deterministic, "deterministic up to mut");
        assert!(report.total);
    }

    #[test]
    fn syntactic_rewrite_is_identity_plus_nd_on_deterministic_models() {
        let src = "\
input i : bool;
output o : enum { eps, a };
init o := eps;
next o := if (i): a else: eps;
";
        let ast = parse(src).unwrap();
        let rewritten = determinize_syntactic(&ast).unwrap();
        assert_eq!(rewritten.inputs.len(), 2);
        assert_eq!(rewritten.inputs[1].name, "nd");
        assert_eq!(rewritten.inputs[1].domain, VarDomain::Int { lo: 0, hi: 0 });
        let mut stripped = rewritten.clone();
        stripped.inputs.remove(1);
        assert!(stripped.structurally_eq(&ast));
    }

    #[test]
    fn deterministic_mutant_keeps_behavior_after_transformation() {
        // On an already-deterministic conditional mutant, D's step-1-onward
        // behavior matches the original system under any nd.
        let cm = fill_cm();
        let d = determinize_explicit(&cm).unwrap();
        // Walk D for two steps mirroring cm: jump, then fill with mut on.
        let init = d.sts.initial_pairs().unwrap();
        assert_eq!(init.len(), 2, "unique up to mut");
        assert!(init.iter().all(|(o, x)| {
            o.get("out") == Some(&enum_v("eps")) && x.get("xtau") == Some(&Value::Bool(true))
        }));
    }

    #[test]
    fn name_collisions_are_rejected() {
        let src = "\
input nd : bool;
output o : enum { eps, a };
init o := eps;
next o := a;
";
        let ast = parse(src).unwrap();
        assert!(matches!(
            determinize_syntactic(&ast),
            Err(TransformError::NameTaken(_))
        ));
    }
}
