//! Potential and definite killability, killing-test extraction, and an
//! independent brute-force oracle.
//!
//! A mutant is *potentially killable* when some mutant behavior over some
//! inputs falls outside the original's input/output behaviors, and
//! *definitely killable* when for some input sequence the mutant's and the
//! original's output-sequence sets are disjoint, so killing succeeds however
//! non-determinism is resolved. Both searches run breadth-first over subset
//! states, so witnesses are shortest and, ties included, canonical. Run to a
//! fixpoint the searches are complete for these finite-state systems: prefix
//! trees are finitely branching, so a mutant with no finite witness is
//! equivalent.
//!
//! A deviation counts as a kill only while both sides still admit runs; a
//! side that deadlocks (possible only for mutants with out-of-domain
//! updates) never kills or saves anything by vacuity.

use crate::domain::Valuation;
use crate::mutate::ConditionalMutant;
use crate::sts::{Budget, Explorer, StsError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, VecDeque};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KillError {
    #[error(transparent)]
    Sts(#[from] StsError),
    #[error("not a test of the original model: {0}")]
    NotATest(String),
}

/// A finite test: `inputs` drive steps `1..=n`; `outputs` cover positions
/// `0..=n` including the initial output. By construction every test is an
/// input/output restriction of an original-model trace prefix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Test {
    pub inputs: Vec<Valuation>,
    pub outputs: Vec<Valuation>,
}

impl Test {
    pub fn length(&self) -> usize {
        self.inputs.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KillMode {
    Potential,
    Definite,
}

impl std::fmt::Display for KillMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KillMode::Potential => write!(f, "potential"),
            KillMode::Definite => write!(f, "definite"),
        }
    }
}

/// Verdict classes. `PotentiallyOnly` asserts a potential kill exists;
/// whether definite killing was refuted or merely not attempted is recorded
/// in the diagnostics. `Equivalent` is only ever produced by a completed
/// fixpoint, never by a bounded search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KillStatus {
    DefinitelyKillable,
    PotentiallyOnly,
    Equivalent,
    UnknownWithinBound(u64),
}

impl std::fmt::Display for KillStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KillStatus::DefinitelyKillable => write!(f, "definitely-killable"),
            KillStatus::PotentiallyOnly => write!(f, "potentially-only"),
            KillStatus::Equivalent => write!(f, "equivalent"),
            KillStatus::UnknownWithinBound(b) => write!(f, "unknown(budget {b})"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerdictDiagnostics {
    pub kill_depth: Option<usize>,
    /// Set by the equivalence decision: whether a definite-search fixpoint
    /// refuted definite killability.
    pub definite_refuted: Option<bool>,
    pub potential_nodes: Option<usize>,
    pub definite_nodes: Option<usize>,
    /// Deviating mutant output sequence for a potential kill.
    pub mutant_outputs: Option<Vec<Valuation>>,
    pub budget_spent: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KillVerdict {
    pub status: KillStatus,
    pub witness: Option<Test>,
    pub diagnostics: VerdictDiagnostics,
}

/// How far a search may go: a depth bound, or until the subset space closes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchDepth {
    Bounded(usize),
    Fixpoint,
}

/// One discovered kill.
#[derive(Debug, Clone, PartialEq)]
pub struct Kill {
    pub depth: usize,
    pub inputs: Vec<Valuation>,
    /// A test of the original model over those inputs (absent only when the
    /// original admits no run over them, which cannot happen for total
    /// originals).
    pub test: Option<Test>,
    /// For potential kills: the mutant's deviating outputs along the search path.
    pub mutant_outputs: Option<Vec<Valuation>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub kill: Option<Kill>,
    /// The subset space closed without hitting the depth bound, so a
    /// no-kill answer is a fixpoint answer.
    pub complete: bool,
    pub nodes: usize,
    pub budget_spent: u64,
}

fn sorted_set(mut v: Vec<u64>) -> Box<[u64]> {
    v.sort_unstable();
    v.dedup();
    v.into_boxed_slice()
}

fn run_to_test(run: &crate::sts::TracePrefix) -> Test {
    Test { inputs: run.inputs(), outputs: run.outputs() }
}

/// Search for a shortest potentially-killing behavior: breadth-first over
/// pairs of a concrete mutant state and the set of original states consistent
/// with the mutant's input/output prefix. The prefix kills when that set
/// empties while the mutant step exists.
pub fn search_potential(
    cm: &ConditionalMutant,
    depth: SearchDepth,
    budget: &mut Budget,
) -> Result<SearchOutcome, StsError> {
    search_potential_between(&cm.project(false), &cm.project(true), depth, budget)
}

/// [`search_potential`] over explicit original/mutant systems; both must
/// share input and output variable sets.
pub fn search_potential_between(
    orig_sts: &crate::sts::Sts,
    mut_sts: &crate::sts::Sts,
    depth: SearchDepth,
    budget: &mut Budget,
) -> Result<SearchOutcome, StsError> {
    let orig = Explorer::new(orig_sts);
    let mutant = Explorer::new(mut_sts);

    struct Node {
        mut_state: u64,
        orig_set: Box<[u64]>,
        depth: usize,
        root_output: u64,
        parent: Option<(usize, u64, u64)>, // (node, input, output)
    }
    let mut arena: Vec<Node> = Vec::new();
    let mut visited: HashMap<(u64, Box<[u64]>), ()> = HashMap::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut capped = false;

    // Reconstruct (inputs, mutant outputs incl. position 0) back to the root.
    let path_of = |arena: &[Node],
                   idx: usize,
                   last: Option<(u64, u64)>|
     -> (Vec<u64>, Vec<u64>) {
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        if let Some((i, o)) = last {
            inputs.push(i);
            outputs.push(o);
        }
        let mut cur = idx;
        loop {
            match arena[cur].parent {
                Some((p, inp, out)) => {
                    inputs.push(inp);
                    outputs.push(out);
                    cur = p;
                }
                None => break,
            }
        }
        inputs.reverse();
        outputs.reverse();
        outputs.insert(0, arena[cur].root_output);
        (inputs, outputs)
    };

    let orig_init = orig.initial()?;
    for &(o, xm) in mutant.initial()?.iter() {
        budget.charge(1)?;
        let consistent: Vec<u64> =
            orig_init.iter().filter(|(oo, _)| *oo == o).map(|(_, x)| *x).collect();
        if consistent.is_empty() {
            // The mutant's initial output is no original initial output.
            let test = orig_init
                .first()
                .map(|&(oo, _)| Test { inputs: vec![], outputs: vec![orig.output_val(oo)] });
            return Ok(SearchOutcome {
                kill: Some(Kill {
                    depth: 0,
                    inputs: vec![],
                    test,
                    mutant_outputs: Some(vec![mutant.output_val(o)]),
                }),
                complete: true,
                nodes: arena.len(),
                budget_spent: budget.spent(),
            });
        }
        let key = (xm, sorted_set(consistent));
        if visited.contains_key(&key) {
            continue;
        }
        visited.insert(key.clone(), ());
        arena.push(Node {
            mut_state: xm,
            orig_set: key.1,
            depth: 0,
            root_output: o,
            parent: None,
        });
        queue.push_back(arena.len() - 1);
    }

    while let Some(idx) = queue.pop_front() {
        if let SearchDepth::Bounded(b) = depth {
            if arena[idx].depth >= b {
                capped = true;
                continue;
            }
        }
        for input in 0..mutant.input_count() {
            let succ = mutant.successors(arena[idx].mut_state, input)?;
            for &(o, xm) in succ.iter() {
                budget.charge(1)?;
                let mut consistent = Vec::new();
                for &xo in arena[idx].orig_set.iter() {
                    for &(oo, xo2) in orig.successors(xo, input)?.iter() {
                        if oo == o {
                            consistent.push(xo2);
                        }
                    }
                }
                if consistent.is_empty() {
                    let (in_ids, out_ids) = path_of(&arena, idx, Some((input, o)));
                    let test = orig.first_run(&in_ids)?.map(|run| run_to_test(&run));
                    return Ok(SearchOutcome {
                        kill: Some(Kill {
                            depth: in_ids.len(),
                            inputs: in_ids.iter().map(|&i| mutant.input_val(i)).collect(),
                            test,
                            mutant_outputs: Some(
                                out_ids.iter().map(|&o| mutant.output_val(o)).collect(),
                            ),
                        }),
                        complete: true,
                        nodes: arena.len(),
                        budget_spent: budget.spent(),
                    });
                }
                let key = (xm, sorted_set(consistent));
                if visited.contains_key(&key) {
                    continue;
                }
                visited.insert(key.clone(), ());
                arena.push(Node {
                    mut_state: xm,
                    orig_set: key.1,
                    depth: arena[idx].depth + 1,
                    root_output: arena[idx].root_output,
                    parent: Some((idx, input, o)),
                });
                queue.push_back(arena.len() - 1);
            }
        }
    }

    Ok(SearchOutcome {
        kill: None,
        complete: !capped,
        nodes: arena.len(),
        budget_spent: budget.spent(),
    })
}

/// Search for a shortest definitely-killing input sequence: breadth-first
/// over input sequences, tracking original-alone and mutant-alone reachable
/// state sets plus the set of (original, mutant) state pairs jointly
/// reachable under equal outputs at every position. An input sequence kills
/// when the joint set empties while both sides individually still admit runs.
pub fn search_definite(
    cm: &ConditionalMutant,
    depth: SearchDepth,
    budget: &mut Budget,
) -> Result<SearchOutcome, StsError> {
    let orig_sts = cm.project(false);
    let mut_sts = cm.project(true);
    let orig = Explorer::new(&orig_sts);
    let mutant = Explorer::new(&mut_sts);

    type JointKey = (Box<[u64]>, Box<[u64]>, Box<[(u64, u64)]>);
    struct Node {
        orig_set: Box<[u64]>,
        mut_set: Box<[u64]>,
        joint: Box<[(u64, u64)]>,
        depth: usize,
        parent: Option<(usize, u64)>,
    }
    let path_inputs = |arena: &[Node], mut idx: usize, last: u64| -> Vec<u64> {
        let mut inputs = vec![last];
        while let Some((p, i)) = arena[idx].parent {
            inputs.push(i);
            idx = p;
        }
        inputs.reverse();
        inputs
    };

    let orig_init = orig.initial()?;
    let mut_init = mutant.initial()?;
    let orig_set0: Vec<u64> = orig_init.iter().map(|&(_, x)| x).collect();
    let mut_set0: Vec<u64> = mut_init.iter().map(|&(_, x)| x).collect();
    let mut joint0 = Vec::new();
    for &(oo, xo) in orig_init.iter() {
        for &(om, xm) in mut_init.iter() {
            if oo == om {
                joint0.push((xo, xm));
            }
        }
    }
    joint0.sort_unstable();
    joint0.dedup();

    if !orig_set0.is_empty() && !mut_set0.is_empty() && joint0.is_empty() {
        // Initial outputs are already disjoint: the empty test kills.
        let test = orig_init
            .first()
            .map(|&(o, _)| Test { inputs: vec![], outputs: vec![orig.output_val(o)] });
        return Ok(SearchOutcome {
            kill: Some(Kill { depth: 0, inputs: vec![], test, mutant_outputs: None }),
            complete: true,
            nodes: 0,
            budget_spent: budget.spent(),
        });
    }

    let mut arena: Vec<Node> = Vec::new();
    let mut visited: HashMap<JointKey, ()> = HashMap::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut capped = false;
    if !orig_set0.is_empty() && !mut_set0.is_empty() {
        let key: JointKey =
            (sorted_set(orig_set0), sorted_set(mut_set0), joint0.into_boxed_slice());
        visited.insert(key.clone(), ());
        arena.push(Node { orig_set: key.0, mut_set: key.1, joint: key.2, depth: 0, parent: None });
        queue.push_back(0);
    }

    while let Some(idx) = queue.pop_front() {
        if let SearchDepth::Bounded(b) = depth {
            if arena[idx].depth >= b {
                capped = true;
                continue;
            }
        }
        for input in 0..orig.input_count() {
            budget.charge(1)?;
            let mut orig_next = Vec::new();
            for &x in arena[idx].orig_set.iter() {
                orig_next.extend(orig.successors(x, input)?.iter().map(|&(_, x2)| x2));
            }
            let mut mut_next = Vec::new();
            for &x in arena[idx].mut_set.iter() {
                mut_next.extend(mutant.successors(x, input)?.iter().map(|&(_, x2)| x2));
            }
            if orig_next.is_empty() || mut_next.is_empty() {
                // A side died: this input sequence is out of scope.
                continue;
            }
            let mut joint_next = Vec::new();
            for &(xo, xm) in arena[idx].joint.iter() {
                let so = orig.successors(xo, input)?;
                let sm = mutant.successors(xm, input)?;
                for &(oo, xo2) in so.iter() {
                    for &(om, xm2) in sm.iter() {
                        budget.charge(1)?;
                        if oo == om {
                            joint_next.push((xo2, xm2));
                        }
                    }
                }
            }
            joint_next.sort_unstable();
            joint_next.dedup();
            if joint_next.is_empty() {
                let in_ids = path_inputs(&arena, idx, input);
                let test = orig.first_run(&in_ids)?.map(|run| run_to_test(&run));
                return Ok(SearchOutcome {
                    kill: Some(Kill {
                        depth: in_ids.len(),
                        inputs: in_ids.iter().map(|&i| orig.input_val(i)).collect(),
                        test,
                        mutant_outputs: None,
                    }),
                    complete: true,
                    nodes: arena.len(),
                    budget_spent: budget.spent(),
                });
            }
            let key: JointKey =
                (sorted_set(orig_next), sorted_set(mut_next), joint_next.into_boxed_slice());
            if visited.contains_key(&key) {
                continue;
            }
            visited.insert(key.clone(), ());
            arena.push(Node {
                orig_set: key.0,
                mut_set: key.1,
                joint: key.2,
                depth: arena[idx].depth + 1,
                parent: Some((idx, input)),
            });
            queue.push_back(arena.len() - 1);
        }
    }

    Ok(SearchOutcome {
        kill: None,
        complete: !capped,
        nodes: arena.len(),
        budget_spent: budget.spent(),
    })
}

/// Decide the full verdict by running both searches to their fixpoints:
/// no potential kill at the fixpoint means the mutant is equivalent;
/// otherwise the definite fixpoint separates definitely-killable from
/// potentially-only. Budget exhaustion degrades to an explicit unknown.
pub fn decide_equivalence(cm: &ConditionalMutant, budget_limit: u64) -> KillVerdict {
    let mut budget = Budget::new(budget_limit);
    let pot = match search_potential(cm, SearchDepth::Fixpoint, &mut budget) {
        Ok(outcome) => outcome,
        Err(_) => {
            return KillVerdict {
                status: KillStatus::UnknownWithinBound(budget_limit),
                witness: None,
                diagnostics: VerdictDiagnostics {
                    budget_spent: budget.spent(),
                    ..Default::default()
                },
            }
        }
    };
    let Some(pot_kill) = pot.kill else {
        return KillVerdict {
            status: KillStatus::Equivalent,
            witness: None,
            diagnostics: VerdictDiagnostics {
                potential_nodes: Some(pot.nodes),
                budget_spent: budget.spent(),
                ..Default::default()
            },
        };
    };
    let mut def_budget = Budget::new(budget_limit);
    match search_definite(cm, SearchDepth::Fixpoint, &mut def_budget) {
        Err(_) => KillVerdict {
            // Potential killability is established, definite status is not.
            status: KillStatus::UnknownWithinBound(budget_limit),
            witness: pot_kill.test,
            diagnostics: VerdictDiagnostics {
                kill_depth: Some(pot_kill.depth),
                potential_nodes: Some(pot.nodes),
                mutant_outputs: pot_kill.mutant_outputs,
                budget_spent: budget.spent() + def_budget.spent(),
                ..Default::default()
            },
        },
        Ok(def) => match def.kill {
            Some(def_kill) => KillVerdict {
                status: KillStatus::DefinitelyKillable,
                witness: def_kill.test,
                diagnostics: VerdictDiagnostics {
                    kill_depth: Some(def_kill.depth),
                    definite_refuted: Some(false),
                    potential_nodes: Some(pot.nodes),
                    definite_nodes: Some(def.nodes),
                    budget_spent: budget.spent() + def_budget.spent(),
                    ..Default::default()
                },
            },
            None => KillVerdict {
                status: KillStatus::PotentiallyOnly,
                witness: pot_kill.test,
                diagnostics: VerdictDiagnostics {
                    kill_depth: Some(pot_kill.depth),
                    definite_refuted: Some(true),
                    potential_nodes: Some(pot.nodes),
                    definite_nodes: Some(def.nodes),
                    mutant_outputs: pot_kill.mutant_outputs,
                    budget_spent: budget.spent() + def_budget.spent(),
                    ..Default::default()
                },
            },
        },
    }
}

/// Does `t` kill the mutant in the given mode? Computed by exact enumeration
/// over `t`'s input sequence. Potential: some mutant input/output prefix over
/// `t`'s inputs is reproduced by no original trace. Definite: the mutant and
/// original output-sequence sets over `t`'s inputs are disjoint (and both
/// sides alive).
pub fn test_kills(cm: &ConditionalMutant, t: &Test, mode: KillMode) -> Result<bool, KillError> {
    test_kills_between(&cm.project(false), &cm.project(true), t, mode)
}

/// [`test_kills`] over explicit original/mutant systems.
pub fn test_kills_between(
    orig_sts: &crate::sts::Sts,
    mut_sts: &crate::sts::Sts,
    t: &Test,
    mode: KillMode,
) -> Result<bool, KillError> {
    let orig = Explorer::new(orig_sts);
    let mutant = Explorer::new(mut_sts);

    if t.outputs.len() != t.inputs.len() + 1 {
        return Err(KillError::NotATest(format!(
            "{} inputs need {} outputs, found {}",
            t.inputs.len(),
            t.inputs.len() + 1,
            t.outputs.len()
        )));
    }
    let in_ids: Vec<u64> = t
        .inputs
        .iter()
        .map(|v| orig.input_idx(v).ok_or_else(|| KillError::NotATest(format!("bad input {v}"))))
        .collect::<Result<_, _>>()?;
    let out_ids: Vec<u64> = t
        .outputs
        .iter()
        .map(|v| orig.output_idx(v).ok_or_else(|| KillError::NotATest(format!("bad output {v}"))))
        .collect::<Result<_, _>>()?;
    if !orig.has_run(&in_ids, &out_ids)? {
        return Err(KillError::NotATest(
            "no original trace matches the test's inputs and outputs".into(),
        ));
    }

    match mode {
        KillMode::Potential => {
            for mut_out in mutant.output_seqs(&in_ids)? {
                if !orig.has_run(&in_ids, &mut_out)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        KillMode::Definite => {
            let mut_outs = mutant.output_seqs(&in_ids)?;
            if mut_outs.is_empty() {
                return Ok(false);
            }
            let orig_outs = orig.output_seqs(&in_ids)?;
            Ok(orig_outs.intersection(&mut_outs).next().is_none())
        }
    }
}

/// Bounded ground truth computed straight from the definitions: enumerate all
/// prefixes of both projections depth by depth and apply the set
/// non-inclusion / disjointness conditions directly. Used to cross-check the
/// searches, never in the main pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleOutcome {
    pub potential_kill_depth: Option<usize>,
    pub definite_kill_depth: Option<usize>,
    pub bound: usize,
}

pub fn brute_force_oracle(
    cm: &ConditionalMutant,
    bound: usize,
    budget: &mut Budget,
) -> Result<OracleOutcome, StsError> {
    let orig_sts = cm.project(false);
    let mut_sts = cm.project(true);
    let orig = Explorer::new(&orig_sts);
    let mutant = Explorer::new(&mut_sts);

    let mut potential_kill_depth = None;
    let mut definite_kill_depth = None;
    for k in 0..=bound {
        if potential_kill_depth.is_some() && definite_kill_depth.is_some() {
            break;
        }
        let orig_prefixes = orig.enumerate_raw(k, budget)?;
        let mut_prefixes = mutant.enumerate_raw(k, budget)?;
        let io = |p: &[(Option<u64>, u64, u64)]| -> Vec<(Option<u64>, u64)> {
            p.iter().map(|&(i, o, _)| (i, o)).collect()
        };
        if potential_kill_depth.is_none() {
            let orig_io: BTreeSet<Vec<(Option<u64>, u64)>> =
                orig_prefixes.iter().map(|p| io(p)).collect();
            if mut_prefixes.iter().any(|q| !orig_io.contains(&io(q))) {
                potential_kill_depth = Some(k);
            }
        }
        if definite_kill_depth.is_none() {
            let group = |prefixes: &[Vec<(Option<u64>, u64, u64)>]| {
                let mut m: HashMap<Vec<u64>, BTreeSet<Vec<u64>>> = HashMap::new();
                for p in prefixes {
                    let ins: Vec<u64> = p.iter().skip(1).map(|&(i, _, _)| i.unwrap()).collect();
                    let outs: Vec<u64> = p.iter().map(|&(_, o, _)| o).collect();
                    m.entry(ins).or_default().insert(outs);
                }
                m
            };
            let orig_by_input = group(&orig_prefixes);
            let mut_by_input = group(&mut_prefixes);
            let mut keys: Vec<_> = orig_by_input.keys().collect();
            keys.sort();
            for ins in keys {
                if let Some(m_outs) = mut_by_input.get(ins) {
                    let o_outs = &orig_by_input[ins];
                    if !m_outs.is_empty() && o_outs.intersection(m_outs).next().is_none() {
                        definite_kill_depth = Some(k);
                        break;
                    }
                }
            }
        }
    }
    Ok(OracleOutcome { potential_kill_depth, definite_kill_depth, bound })
}
