//! Symbolic transition systems over finite domains, and their explicit
//! semantics: initial pairs, successor computation, bounded trace enumeration,
//! projections, and AP labeling.
//!
//! A system is a tuple of input/output/state variables with an
//! initial-conditions predicate over outputs and states and a transition
//! predicate over inputs, outputs, states, and primed states. All traces of a
//! well-formed system are infinite; this module works with bounded prefixes.
//!
//! Trace indexing: position 0 carries the initial output and state with a
//! designated "no input" placeholder; position `j >= 1` carries the input
//! consumed at step `j` together with the output produced and the state
//! reached by that step. The placeholder is excluded from killing comparisons.

use crate::domain::{Valuation, VarDomain, EPS};
use crate::pred::{eval_bool, referenced_vars, Env, EvalError, Pred};
use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::rc::Rc;
use thiserror::Error;

/// Default enumeration guard: generated (input, output, state) triples.
pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StsError {
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("budget exhausted after {spent} nodes")]
    BudgetExhausted { spent: u64 },
    #[error("model error: {0}")]
    Model(String),
}

/// Mutable enumeration guard. Exhaustion is an explicit error, never silent
/// truncation.
#[derive(Debug, Clone)]
pub struct Budget {
    limit: u64,
    spent: u64,
}

impl Budget {
    pub fn new(limit: u64) -> Self {
        Budget { limit, spent: 0 }
    }

    pub fn charge(&mut self, n: u64) -> Result<(), StsError> {
        self.spent = self.spent.saturating_add(n);
        if self.spent > self.limit {
            Err(StsError::BudgetExhausted { spent: self.spent })
        } else {
            Ok(())
        }
    }

    pub fn spent(&self) -> u64 {
        self.spent
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::new(DEFAULT_NODE_BUDGET)
    }
}

/// An ordered set of typed variables. Variables are kept sorted by name, and
/// total valuations are indexed mixed-radix with the first variable most
/// significant, so index order coincides with the canonical valuation order.
#[derive(Debug, Clone, PartialEq)]
pub struct VarSet {
    vars: Vec<(String, VarDomain)>,
}

impl VarSet {
    pub fn new(mut vars: Vec<(String, VarDomain)>) -> VarSet {
        vars.sort_by(|a, b| a.0.cmp(&b.0));
        VarSet { vars }
    }

    pub fn empty() -> VarSet {
        VarSet { vars: Vec::new() }
    }

    pub fn vars(&self) -> &[(String, VarDomain)] {
        &self.vars
    }

    pub fn names(&self) -> Vec<&str> {
        self.vars.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn domain(&self, name: &str) -> Option<&VarDomain> {
        self.vars.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }

    pub fn contains_var(&self, name: &str) -> bool {
        self.domain(name).is_some()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Number of total valuations (1 for the empty set).
    pub fn count(&self) -> u64 {
        self.vars.iter().map(|(_, d)| d.size() as u64).product()
    }

    /// The valuation at `idx` in canonical order.
    pub fn valuation_at(&self, idx: u64) -> Valuation {
        let mut rem = idx;
        let mut val = Valuation::new();
        for (name, dom) in self.vars.iter().rev() {
            let size = dom.size() as u64;
            val.set(name.clone(), dom.value_at((rem % size) as usize));
            rem /= size;
        }
        val
    }

    /// Canonical index of a total valuation over exactly these variables.
    pub fn index_of(&self, v: &Valuation) -> Option<u64> {
        if v.len() != self.vars.len() {
            return None;
        }
        let mut idx = 0u64;
        for (name, dom) in &self.vars {
            let value = v.get(name)?;
            idx = idx * dom.size() as u64 + dom.index_of(value)? as u64;
        }
        Some(idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = Valuation> + '_ {
        (0..self.count()).map(|i| self.valuation_at(i))
    }

    /// Union with another variable set over disjoint names.
    pub fn merged(&self, other: &VarSet) -> VarSet {
        let mut vars = self.vars.clone();
        vars.extend(other.vars.iter().cloned());
        VarSet::new(vars)
    }
}

/// A symbolic transition system.
#[derive(Debug, Clone)]
pub struct Sts {
    pub inputs: VarSet,
    pub outputs: VarSet,
    pub states: VarSet,
    pub init: Pred,
    pub trans: Pred,
}

impl Sts {
    /// Build a system, checking well-formedness: pairwise-disjoint variable
    /// names, enum output domains containing `eps`, declared predicate
    /// variables, and no inputs or primed references in the initial predicate.
    pub fn new(
        inputs: VarSet,
        outputs: VarSet,
        states: VarSet,
        init: Pred,
        trans: Pred,
    ) -> Result<Sts, StsError> {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for set in [&inputs, &outputs, &states] {
            for (name, _) in set.vars() {
                if !seen.insert(name) {
                    return Err(StsError::Model(format!("variable `{name}` declared twice")));
                }
            }
        }
        for (name, dom) in outputs.vars() {
            match dom {
                VarDomain::Enum(lits) if lits.iter().any(|l| l == EPS) => {}
                _ => {
                    return Err(StsError::Model(format!(
                        "output `{name}` must be an enum containing `{EPS}`"
                    )))
                }
            }
        }
        let mut init_vars = Vec::new();
        referenced_vars(&init, &mut init_vars);
        for (name, primed) in &init_vars {
            if *primed {
                return Err(StsError::Model(format!(
                    "initial predicate references primed `{name}'`"
                )));
            }
            if inputs.contains_var(name) {
                return Err(StsError::Model(format!(
                    "initial predicate references input `{name}`"
                )));
            }
            if !outputs.contains_var(name) && !states.contains_var(name) {
                return Err(StsError::Model(format!("undeclared variable `{name}` in init")));
            }
        }
        let mut trans_vars = Vec::new();
        referenced_vars(&trans, &mut trans_vars);
        for (name, primed) in &trans_vars {
            let declared =
                inputs.contains_var(name) || outputs.contains_var(name) || states.contains_var(name);
            if !declared {
                return Err(StsError::Model(format!("undeclared variable `{name}` in trans")));
            }
            if *primed && inputs.contains_var(name) {
                return Err(StsError::Model(format!("primed input `{name}'` in trans")));
            }
        }
        Ok(Sts { inputs, outputs, states, init, trans })
    }

    /// All (output, state) pairs satisfying the initial predicate, in
    /// canonical order. An empty result is a model error.
    pub fn initial_pairs(&self) -> Result<Vec<(Valuation, Valuation)>, StsError> {
        let pairs = self.initial_pairs_allow_empty()?;
        if pairs.is_empty() {
            return Err(StsError::Model("initial predicate is unsatisfiable".into()));
        }
        Ok(pairs)
    }

    pub(crate) fn initial_pairs_allow_empty(
        &self,
    ) -> Result<Vec<(Valuation, Valuation)>, StsError> {
        let merged = self.outputs.merged(&self.states);
        let out_names = self.outputs.names();
        let state_names = self.states.names();
        let mut pairs = Vec::new();
        for val in merged.iter() {
            if eval_bool(&self.init, &Env::current_only(&val))? {
                pairs.push((val.restrict(&out_names), val.restrict(&state_names)));
            }
        }
        Ok(pairs)
    }

    /// All (output, successor state) pairs reachable from `state` under
    /// `input`, in canonical order. An empty result signals a totality
    /// violation at this pair.
    pub fn successors(
        &self,
        state: &Valuation,
        input: &Valuation,
    ) -> Result<Vec<(Valuation, Valuation)>, StsError> {
        let merged = self.outputs.merged(&self.states);
        let out_names = self.outputs.names();
        let state_names = self.states.names();
        let base = state.merged(input);
        let mut result = Vec::new();
        for cand in merged.iter() {
            let output = cand.restrict(&out_names);
            let next_state = cand.restrict(&state_names);
            let current = base.merged(&output);
            let env = Env { current: &current, primed: Some(&next_state) };
            if eval_bool(&self.trans, &env)? {
                result.push((output, next_state));
            }
        }
        Ok(result)
    }

    /// All trace prefixes of length `depth + 1`, exact and finite.
    pub fn enumerate_traces(
        &self,
        depth: usize,
        budget: &mut Budget,
    ) -> Result<Vec<TracePrefix>, StsError> {
        let ex = Explorer::new(self);
        ex.enumerate_traces(depth, budget)
    }

    /// Determinism/totality report over states reachable within `depth`.
    pub fn validate(&self, depth: usize) -> Result<ValidationReport, StsError> {
        self.validate_modulo(depth, &[])
    }

    /// Like [`Sts::validate`], but uniqueness checks are taken modulo the
    /// named state variables (used for "deterministic up to mut").
    pub fn validate_modulo(
        &self,
        depth: usize,
        ignore: &[&str],
    ) -> Result<ValidationReport, StsError> {
        let ex = Explorer::new(self);
        ex.validate_modulo(depth, ignore, &mut Budget::default())
    }
}

/// One step of a trace prefix. `input` is `None` exactly at position 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TraceStep {
    pub input: Option<Valuation>,
    pub output: Valuation,
    pub state: Valuation,
}

/// A bounded prefix of a trace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TracePrefix(pub Vec<TraceStep>);

impl TracePrefix {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Trace depth: number of transitions taken (length - 1).
    pub fn depth(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.0
    }

    /// Componentwise restriction to the named variables, order preserved.
    pub fn restrict(&self, vars: &[&str]) -> TracePrefix {
        TracePrefix(
            self.0
                .iter()
                .map(|s| TraceStep {
                    input: s.input.as_ref().map(|i| i.restrict(vars)),
                    output: s.output.restrict(vars),
                    state: s.state.restrict(vars),
                })
                .collect(),
        )
    }

    /// Input valuations at positions `1..len` (the placeholder is skipped).
    pub fn inputs(&self) -> Vec<Valuation> {
        self.0.iter().skip(1).map(|s| s.input.clone().expect("input past position 0")).collect()
    }

    /// Output valuations at positions `0..len`.
    pub fn outputs(&self) -> Vec<Valuation> {
        self.0.iter().map(|s| s.output.clone()).collect()
    }
}

/// Named atomic propositions over inputs, outputs, and states.
#[derive(Debug, Clone, Default)]
pub struct ApLabeling {
    pub aps: Vec<(String, Pred)>,
}

impl ApLabeling {
    pub fn new(aps: Vec<(String, Pred)>) -> Self {
        ApLabeling { aps }
    }

    /// Default labeling: one `[v=value]` proposition per (variable, value)
    /// pair over all inputs, outputs, and states; uniquely characterizes
    /// every position of a trace.
    pub fn per_value(sts: &Sts) -> Self {
        let mut aps = Vec::new();
        for set in [&sts.inputs, &sts.outputs, &sts.states] {
            for (name, dom) in set.vars() {
                for value in dom.values() {
                    aps.push((
                        format!("[{name}={value}]"),
                        Pred::eq(Pred::var(name), Pred::lit(value)),
                    ));
                }
            }
        }
        ApLabeling { aps }
    }

    /// Per-value labeling restricted to inputs and outputs.
    pub fn io(sts: &Sts) -> Self {
        let mut aps = Vec::new();
        for set in [&sts.inputs, &sts.outputs] {
            for (name, dom) in set.vars() {
                for value in dom.values() {
                    aps.push((
                        format!("[{name}={value}]"),
                        Pred::eq(Pred::var(name), Pred::lit(value)),
                    ));
                }
            }
        }
        ApLabeling { aps }
    }

    pub fn push(&mut self, name: impl Into<String>, pred: Pred) {
        self.aps.push((name.into(), pred));
    }

    pub fn names(&self) -> Vec<&str> {
        self.aps.iter().map(|(n, _)| n.as_str()).collect()
    }
}

/// AP trace of a prefix: position `j` carries exactly the propositions whose
/// predicate holds at `(I_j, O_j, X_j)`. At position 0 propositions that
/// mention an input variable do not hold (the input is the placeholder).
pub fn ap_trace(prefix: &TracePrefix, labels: &ApLabeling) -> Result<Vec<BTreeSet<String>>, StsError> {
    let mut result = Vec::with_capacity(prefix.len());
    for step in prefix.steps() {
        let mut current = step.output.merged(&step.state);
        if let Some(input) = &step.input {
            current = current.merged(input);
        }
        let env = Env::current_only(&current);
        let mut set = BTreeSet::new();
        for (name, pred) in &labels.aps {
            let mut vars = Vec::new();
            referenced_vars(pred, &mut vars);
            if vars.iter().any(|(v, _)| current.get(v).is_none()) {
                continue;
            }
            if eval_bool(pred, &env)? {
                set.insert(name.clone());
            }
        }
        result.push(set);
    }
    Ok(result)
}

/// Result of [`Sts::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub deterministic: bool,
    pub total: bool,
    /// Distinct initial pairs (modulo ignored variables).
    pub initial_count: usize,
    /// A (state, input) with more than one successor, if any.
    pub nondet_witness: Option<(Valuation, Valuation)>,
    /// A (state, input) with no successor, if any.
    pub dead_witness: Option<(Valuation, Valuation)>,
    pub states_explored: usize,
}

/// Memoizing exploration front end over an [`Sts`]. Valuations are interned
/// as canonical indices; successor sets are cached per (state, input).
pub struct Explorer<'a> {
    pub sts: &'a Sts,
    succ: RefCell<HashMap<(u64, u64), Rc<Vec<(u64, u64)>>>>,
    init: RefCell<Option<Rc<Vec<(u64, u64)>>>>,
}

impl<'a> Explorer<'a> {
    pub fn new(sts: &'a Sts) -> Self {
        Explorer { sts, succ: RefCell::new(HashMap::new()), init: RefCell::new(None) }
    }

    pub fn input_count(&self) -> u64 {
        self.sts.inputs.count()
    }

    pub fn state_count(&self) -> u64 {
        self.sts.states.count()
    }

    pub fn input_val(&self, idx: u64) -> Valuation {
        self.sts.inputs.valuation_at(idx)
    }

    pub fn output_val(&self, idx: u64) -> Valuation {
        self.sts.outputs.valuation_at(idx)
    }

    pub fn state_val(&self, idx: u64) -> Valuation {
        self.sts.states.valuation_at(idx)
    }

    pub fn state_idx(&self, v: &Valuation) -> Option<u64> {
        self.sts.states.index_of(v)
    }

    pub fn output_idx(&self, v: &Valuation) -> Option<u64> {
        self.sts.outputs.index_of(v)
    }

    pub fn input_idx(&self, v: &Valuation) -> Option<u64> {
        self.sts.inputs.index_of(v)
    }

    /// Initial (output, state) index pairs, cached, possibly empty.
    pub fn initial(&self) -> Result<Rc<Vec<(u64, u64)>>, StsError> {
        if let Some(cached) = self.init.borrow().as_ref() {
            return Ok(Rc::clone(cached));
        }
        let pairs = self
            .sts
            .initial_pairs_allow_empty()?
            .into_iter()
            .map(|(o, x)| {
                (
                    self.sts.outputs.index_of(&o).expect("output in space"),
                    self.sts.states.index_of(&x).expect("state in space"),
                )
            })
            .collect::<Vec<_>>();
        let rc = Rc::new(pairs);
        *self.init.borrow_mut() = Some(Rc::clone(&rc));
        Ok(rc)
    }

    /// Successor (output, state) index pairs of `state` under `input`, cached.
    pub fn successors(&self, state: u64, input: u64) -> Result<Rc<Vec<(u64, u64)>>, StsError> {
        if let Some(cached) = self.succ.borrow().get(&(state, input)) {
            return Ok(Rc::clone(cached));
        }
        let pairs = self
            .sts
            .successors(&self.state_val(state), &self.input_val(input))?
            .into_iter()
            .map(|(o, x)| {
                (
                    self.sts.outputs.index_of(&o).expect("output in space"),
                    self.sts.states.index_of(&x).expect("state in space"),
                )
            })
            .collect::<Vec<_>>();
        let rc = Rc::new(pairs);
        self.succ.borrow_mut().insert((state, input), Rc::clone(&rc));
        Ok(rc)
    }

    /// All trace prefixes of length `depth + 1` as concrete valuations.
    pub fn enumerate_traces(
        &self,
        depth: usize,
        budget: &mut Budget,
    ) -> Result<Vec<TracePrefix>, StsError> {
        let raw = self.enumerate_raw(depth, budget)?;
        Ok(raw.iter().map(|p| self.materialize(p)).collect())
    }

    /// Raw prefixes as index triples `(input, output, state)`; the position-0
    /// input index is `None`.
    pub fn enumerate_raw(
        &self,
        depth: usize,
        budget: &mut Budget,
    ) -> Result<Vec<Vec<(Option<u64>, u64, u64)>>, StsError> {
        let mut prefixes: Vec<Vec<(Option<u64>, u64, u64)>> = Vec::new();
        for &(o, x) in self.initial()?.iter() {
            budget.charge(1)?;
            prefixes.push(vec![(None, o, x)]);
        }
        for _ in 0..depth {
            let mut next = Vec::new();
            for prefix in &prefixes {
                let (_, _, state) = *prefix.last().expect("nonempty prefix");
                for input in 0..self.input_count() {
                    for &(o, x) in self.successors(state, input)?.iter() {
                        budget.charge(1)?;
                        let mut extended = prefix.clone();
                        extended.push((Some(input), o, x));
                        next.push(extended);
                    }
                }
            }
            prefixes = next;
        }
        Ok(prefixes)
    }

    pub fn materialize(&self, raw: &[(Option<u64>, u64, u64)]) -> TracePrefix {
        TracePrefix(
            raw.iter()
                .map(|&(i, o, x)| TraceStep {
                    input: i.map(|idx| self.input_val(idx)),
                    output: self.output_val(o),
                    state: self.state_val(x),
                })
                .collect(),
        )
    }

    /// Is there a run whose inputs and outputs both match the given
    /// sequences? (`outputs` has one more element than `inputs`.)
    pub fn has_run(&self, inputs: &[u64], outputs: &[u64]) -> Result<bool, StsError> {
        let mut states: BTreeSet<u64> = self
            .initial()?
            .iter()
            .filter(|(o, _)| *o == outputs[0])
            .map(|(_, x)| *x)
            .collect();
        for (j, &input) in inputs.iter().enumerate() {
            let want = outputs[j + 1];
            let mut next = BTreeSet::new();
            for &s in &states {
                for &(o, x) in self.successors(s, input)?.iter() {
                    if o == want {
                        next.insert(x);
                    }
                }
            }
            states = next;
            if states.is_empty() {
                return Ok(false);
            }
        }
        Ok(!states.is_empty())
    }

    /// Distinct output sequences over a fixed input sequence, canonical order.
    pub fn output_seqs(&self, inputs: &[u64]) -> Result<BTreeSet<Vec<u64>>, StsError> {
        // Group runs by emitted outputs; branch only on distinct outputs.
        let mut result = BTreeSet::new();
        let mut frontier: Vec<(Vec<u64>, BTreeSet<u64>)> = Vec::new();
        let init = self.initial()?;
        let mut by_output: HashMap<u64, BTreeSet<u64>> = HashMap::new();
        for &(o, x) in init.iter() {
            by_output.entry(o).or_default().insert(x);
        }
        for (o, states) in by_output {
            frontier.push((vec![o], states));
        }
        for &input in inputs {
            let mut next_frontier: Vec<(Vec<u64>, BTreeSet<u64>)> = Vec::new();
            for (seq, states) in frontier {
                let mut by_output: HashMap<u64, BTreeSet<u64>> = HashMap::new();
                for &s in &states {
                    for &(o, x) in self.successors(s, input)?.iter() {
                        by_output.entry(o).or_default().insert(x);
                    }
                }
                for (o, next_states) in by_output {
                    let mut extended = seq.clone();
                    extended.push(o);
                    next_frontier.push((extended, next_states));
                }
            }
            frontier = next_frontier;
        }
        for (seq, _) in frontier {
            result.insert(seq);
        }
        Ok(result)
    }

    /// First (canonical) concrete run over the given input sequence, if any.
    pub fn first_run(&self, inputs: &[u64]) -> Result<Option<TracePrefix>, StsError> {
        let mut path: Vec<(Option<u64>, u64, u64)> = Vec::new();
        for &(o, x) in self.initial()?.iter() {
            path.push((None, o, x));
            if self.extend_first(&mut path, inputs, 0)? {
                return Ok(Some(self.materialize(&path)));
            }
            path.pop();
        }
        Ok(None)
    }

    fn extend_first(
        &self,
        path: &mut Vec<(Option<u64>, u64, u64)>,
        inputs: &[u64],
        j: usize,
    ) -> Result<bool, StsError> {
        if j == inputs.len() {
            return Ok(true);
        }
        let (_, _, state) = *path.last().expect("nonempty path");
        let succ = self.successors(state, inputs[j])?;
        for &(o, x) in succ.iter() {
            path.push((Some(inputs[j]), o, x));
            if self.extend_first(path, inputs, j + 1)? {
                return Ok(true);
            }
            path.pop();
        }
        Ok(false)
    }

    /// States reachable within `depth` steps.
    pub fn reachable(&self, depth: usize, budget: &mut Budget) -> Result<BTreeSet<u64>, StsError> {
        let mut seen: BTreeSet<u64> = BTreeSet::new();
        let mut queue: VecDeque<(u64, usize)> = VecDeque::new();
        for &(_, x) in self.initial()?.iter() {
            if seen.insert(x) {
                queue.push_back((x, 0));
            }
        }
        while let Some((state, d)) = queue.pop_front() {
            if d == depth {
                continue;
            }
            for input in 0..self.input_count() {
                budget.charge(1)?;
                for &(_, x) in self.successors(state, input)?.iter() {
                    if seen.insert(x) {
                        queue.push_back((x, d + 1));
                    }
                }
            }
        }
        Ok(seen)
    }

    pub fn validate_modulo(
        &self,
        depth: usize,
        ignore: &[&str],
        budget: &mut Budget,
    ) -> Result<ValidationReport, StsError> {
        let quotient = |v: &Valuation| v.without(ignore);
        let init = self.initial()?;
        let mut init_classes: BTreeSet<(u64, Valuation)> = BTreeSet::new();
        for &(o, x) in init.iter() {
            init_classes.insert((o, quotient(&self.state_val(x))));
        }
        let mut deterministic = init_classes.len() <= 1;
        let mut total = !init.is_empty();
        let mut nondet_witness = None;
        let mut dead_witness = None;

        let reachable = self.reachable(depth, budget)?;
        for &state in &reachable {
            for input in 0..self.input_count() {
                budget.charge(1)?;
                let succ = self.successors(state, input)?;
                if succ.is_empty() {
                    total = false;
                    if dead_witness.is_none() {
                        dead_witness = Some((self.state_val(state), self.input_val(input)));
                    }
                }
                let mut classes: BTreeSet<(u64, Valuation)> = BTreeSet::new();
                for &(o, x) in succ.iter() {
                    classes.insert((o, quotient(&self.state_val(x))));
                }
                if classes.len() > 1 {
                    deterministic = false;
                    if nondet_witness.is_none() {
                        nondet_witness = Some((self.state_val(state), self.input_val(input)));
                    }
                }
            }
        }
        Ok(ValidationReport {
            deterministic,
            total,
            initial_count: init_classes.len(),
            nondet_witness,
            dead_witness,
            states_explored: reachable.len(),
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::domain::{bool_v, enum_v, int_v};
    use crate::pred::BinOp;
    use std::collections::HashMap;

    /// Hand-written beverage machine: the transition relation is transcribed
    /// disjunct by disjunct, including the stutter case for a request with an
    /// empty tank.
    pub fn beverage() -> Sts {
        let inputs = VarSet::new(vec![(
            "in".into(),
            VarDomain::Enum(vec!["eps".into(), "req".into(), "fill".into()]),
        )]);
        let outputs = VarSet::new(vec![(
            "out".into(),
            VarDomain::Enum(vec!["eps".into(), "coff".into(), "tea".into()]),
        )]);
        let states = VarSet::new(vec![("wtr".into(), VarDomain::Int { lo: 0, hi: 2 })]);
        let init = Pred::and(
            Pred::eq(Pred::var("out"), Pred::lit(enum_v("eps"))),
            Pred::eq(Pred::var("wtr"), Pred::lit(int_v(2))),
        );
        let serve = |drink: &str| {
            Pred::and_all([
                Pred::binary(BinOp::Gt, Pred::var("wtr"), Pred::lit(int_v(0))),
                Pred::eq(Pred::var("in"), Pred::lit(enum_v("req"))),
                Pred::eq(Pred::var("out"), Pred::lit(enum_v(drink))),
                Pred::eq(
                    Pred::primed("wtr"),
                    Pred::binary(BinOp::Sub, Pred::var("wtr"), Pred::lit(int_v(1))),
                ),
            ])
        };
        let fill = Pred::and_all([
            Pred::eq(Pred::var("in"), Pred::lit(enum_v("fill"))),
            Pred::eq(Pred::var("out"), Pred::lit(enum_v("eps"))),
            Pred::eq(Pred::primed("wtr"), Pred::lit(int_v(2))),
        ]);
        let idle = Pred::and_all([
            Pred::eq(Pred::var("in"), Pred::lit(enum_v("eps"))),
            Pred::eq(Pred::var("out"), Pred::lit(enum_v("eps"))),
            Pred::eq(Pred::primed("wtr"), Pred::var("wtr")),
        ]);
        // Empty-tank request stutters with eps output.
        let dry = Pred::and_all([
            Pred::eq(Pred::var("in"), Pred::lit(enum_v("req"))),
            Pred::eq(Pred::var("wtr"), Pred::lit(int_v(0))),
            Pred::eq(Pred::var("out"), Pred::lit(enum_v("eps"))),
            Pred::eq(Pred::primed("wtr"), Pred::var("wtr")),
        ]);
        let trans = Pred::or_all([serve("coff"), serve("tea"), fill, idle, dry]);
        Sts::new(inputs, outputs, states, init, trans).unwrap()
    }

    #[test]
    fn beverage_initial_pairs() {
        let sts = beverage();
        let pairs = sts.initial_pairs().unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].0.get("out"), Some(&enum_v("eps")));
        assert_eq!(pairs[0].1.get("wtr"), Some(&int_v(2)));
    }

    #[test]
    fn unsatisfiable_init_is_model_error() {
        let mut sts = beverage();
        sts.init = Pred::Const(bool_v(false));
        assert!(matches!(sts.initial_pairs(), Err(StsError::Model(_))));
    }

    #[test]
    fn free_init_enumerates_full_product() {
        let inputs = VarSet::empty();
        let outputs = VarSet::new(vec![(
            "o".into(),
            VarDomain::Enum(vec!["eps".into(), "on".into()]),
        )]);
        let states = VarSet::new(vec![("x".into(), VarDomain::Bool)]);
        let sts = Sts::new(
            inputs,
            outputs,
            states,
            Pred::Const(bool_v(true)),
            Pred::Const(bool_v(true)),
        )
        .unwrap();
        assert_eq!(sts.initial_pairs().unwrap().len(), 4);
    }

    #[test]
    fn beverage_successors_match_paper_rules() {
        let sts = beverage();
        let wtr2 = Valuation::from_pairs(&[("wtr", int_v(2))]);
        let req = Valuation::from_pairs(&[("in", enum_v("req"))]);
        let succ = sts.successors(&wtr2, &req).unwrap();
        assert_eq!(succ.len(), 2);
        // Canonical order: coff before tea (enum declaration order).
        assert_eq!(succ[0].0.get("out"), Some(&enum_v("coff")));
        assert_eq!(succ[0].1.get("wtr"), Some(&int_v(1)));
        assert_eq!(succ[1].0.get("out"), Some(&enum_v("tea")));
        assert_eq!(succ[1].1.get("wtr"), Some(&int_v(1)));

        // Empty tank: request stutters with eps.
        let wtr0 = Valuation::from_pairs(&[("wtr", int_v(0))]);
        let succ0 = sts.successors(&wtr0, &req).unwrap();
        assert_eq!(succ0.len(), 1);
        assert_eq!(succ0[0].0.get("out"), Some(&enum_v("eps")));
        assert_eq!(succ0[0].1.get("wtr"), Some(&int_v(0)));
    }

    #[test]
    fn depth_zero_trace_is_initial_with_placeholder() {
        let sts = beverage();
        let traces = sts.enumerate_traces(0, &mut Budget::default()).unwrap();
        assert_eq!(traces.len(), 1);
        let step = &traces[0].0[0];
        assert!(step.input.is_none());
        assert_eq!(step.output.get("out"), Some(&enum_v("eps")));
        assert_eq!(step.state.get("wtr"), Some(&int_v(2)));
    }

    /// Independent recursive enumeration used as an oracle for the iterative
    /// trace enumerator.
    fn count_traces_recursive(sts: &Sts, state: &Valuation, depth: usize) -> usize {
        if depth == 0 {
            return 1;
        }
        let mut total = 0;
        for input in sts.inputs.iter() {
            for (_, next) in sts.successors(state, &input).unwrap() {
                total += count_traces_recursive(sts, &next, depth - 1);
            }
        }
        total
    }

    #[test]
    fn trace_counts_cross_checked_against_recursion() {
        let sts = beverage();
        for depth in 0..=3 {
            let expected: usize = sts
                .initial_pairs()
                .unwrap()
                .iter()
                .map(|(_, x)| count_traces_recursive(&sts, x, depth))
                .sum();
            let got = sts.enumerate_traces(depth, &mut Budget::default()).unwrap().len();
            assert_eq!(got, expected, "depth {depth}");
        }
    }

    #[test]
    fn prefix_property_shorter_enumeration_is_prefix_closed() {
        let sts = beverage();
        let deep = sts.enumerate_traces(3, &mut Budget::default()).unwrap();
        let shallow = sts.enumerate_traces(2, &mut Budget::default()).unwrap();
        let cut: BTreeSet<Vec<TraceStep>> =
            deep.iter().map(|t| t.0[..3].to_vec()).collect();
        let shallow_set: BTreeSet<Vec<TraceStep>> = shallow.iter().map(|t| t.0.clone()).collect();
        assert_eq!(cut, shallow_set);
    }

    #[test]
    fn budget_exhaustion_is_explicit() {
        let sts = beverage();
        let mut tiny = Budget::new(3);
        let err = sts.enumerate_traces(3, &mut tiny).unwrap_err();
        assert!(matches!(err, StsError::BudgetExhausted { .. }));
    }

    #[test]
    fn restriction_examples() {
        let sts = beverage();
        // The depth-3 run fed eps, req, req: outputs eps, eps, coff|tea, ...
        let traces = sts.enumerate_traces(3, &mut Budget::default()).unwrap();
        let wanted: Vec<&TracePrefix> = traces
            .iter()
            .filter(|t| {
                let ins = t.inputs();
                ins[0] == Valuation::from_pairs(&[("in", enum_v("eps"))])
                    && ins[1] == Valuation::from_pairs(&[("in", enum_v("req"))])
                    && ins[2] == Valuation::from_pairs(&[("in", enum_v("req"))])
            })
            .collect();
        assert!(!wanted.is_empty());
        let p = wanted[0];
        let restricted = p.restrict(&["in"]);
        assert!(restricted.0[0].input.is_none());
        assert_eq!(restricted.0[1].input.as_ref().unwrap().get("in"), Some(&enum_v("eps")));
        assert!(restricted.0[0].output.is_empty());
        assert!(restricted.0[0].state.is_empty());

        // Restriction to all variables is the identity.
        let all = p.restrict(&["in", "out", "wtr"]);
        assert_eq!(&all, p);

        // Restriction to nothing keeps length.
        let none = p.restrict(&[]);
        assert_eq!(none.len(), p.len());
        assert!(none.0.iter().all(|s| s.output.is_empty() && s.state.is_empty()));
    }

    #[test]
    fn ap_trace_with_paper_labels() {
        let sts = beverage();
        let labels = ApLabeling::new(vec![
            ("[in=eps]".into(), Pred::eq(Pred::var("in"), Pred::lit(enum_v("eps")))),
            ("[in=req]".into(), Pred::eq(Pred::var("in"), Pred::lit(enum_v("req")))),
            ("[out=eps]".into(), Pred::eq(Pred::var("out"), Pred::lit(enum_v("eps")))),
            ("[out=coff]".into(), Pred::eq(Pred::var("out"), Pred::lit(enum_v("coff")))),
            ("[out=tea]".into(), Pred::eq(Pred::var("out"), Pred::lit(enum_v("tea")))),
            ("[wtr>0]".into(), Pred::binary(BinOp::Gt, Pred::var("wtr"), Pred::lit(int_v(0)))),
            ("[wtr=0]".into(), Pred::eq(Pred::var("wtr"), Pred::lit(int_v(0)))),
        ]);
        // Drive eps, req, req from the initial state: outputs eps, eps, coff, tea.
        let traces = sts.enumerate_traces(3, &mut Budget::default()).unwrap();
        let p = traces
            .iter()
            .find(|t| {
                let ins: Vec<_> =
                    t.inputs().iter().map(|v| v.get("in").unwrap().clone()).collect();
                let outs: Vec<_> =
                    t.outputs().iter().map(|v| v.get("out").unwrap().clone()).collect();
                ins == vec![enum_v("eps"), enum_v("req"), enum_v("req")]
                    && outs == vec![enum_v("eps"), enum_v("eps"), enum_v("coff"), enum_v("tea")]
            })
            .expect("paper trace exists");
        let ap = ap_trace(p, &labels).unwrap();
        let set = |names: &[&str]| -> BTreeSet<String> {
            names.iter().map(|s| s.to_string()).collect()
        };
        assert_eq!(ap[0], set(&["[out=eps]", "[wtr>0]"]));
        assert_eq!(ap[1], set(&["[in=eps]", "[out=eps]", "[wtr>0]"]));
        assert_eq!(ap[2], set(&["[in=req]", "[out=coff]", "[wtr>0]"]));
        assert_eq!(ap[3], set(&["[in=req]", "[out=tea]", "[wtr=0]"]));
    }

    #[test]
    fn ap_trace_empty_labeling() {
        let sts = beverage();
        let traces = sts.enumerate_traces(1, &mut Budget::default()).unwrap();
        let ap = ap_trace(&traces[0], &ApLabeling::default()).unwrap();
        assert!(ap.iter().all(|s| s.is_empty()));
    }

    #[test]
    fn per_value_labeling_partitions_and_is_injective() {
        let sts = beverage();
        let labels = ApLabeling::per_value(&sts);
        let traces = sts.enumerate_traces(2, &mut Budget::default()).unwrap();
        let mut seen: HashMap<Vec<String>, TraceStep> = HashMap::new();
        for t in &traces {
            let ap = ap_trace(t, &labels).unwrap();
            for (j, step) in t.steps().iter().enumerate() {
                let var_count = if j == 0 { 2 } else { 3 };
                assert_eq!(ap[j].len(), var_count, "one AP per variable");
                if j > 0 {
                    let key: Vec<String> = ap[j].iter().cloned().collect();
                    if let Some(prev) = seen.get(&key) {
                        assert_eq!(prev, step, "AP labeling must be injective");
                    } else {
                        seen.insert(key, step.clone());
                    }
                }
            }
        }
    }

    #[test]
    fn validate_beverage() {
        let sts = beverage();
        let report = sts.validate(4).unwrap();
        assert!(!report.deterministic, "req yields coff or tea");
        assert!(report.total);
        assert!(report.nondet_witness.is_some());

        let mut broken = beverage();
        broken.init = Pred::Const(bool_v(false));
        let report = broken.validate(0).unwrap();
        assert!(!report.total);
        assert_eq!(report.initial_count, 0);
    }

    #[test]
    fn successor_order_is_stable() {
        let sts = beverage();
        let wtr2 = Valuation::from_pairs(&[("wtr", int_v(2))]);
        let req = Valuation::from_pairs(&[("in", enum_v("req"))]);
        let a = sts.successors(&wtr2, &req).unwrap();
        let b = sts.successors(&wtr2, &req).unwrap();
        assert_eq!(a, b);
    }

}
