//! Per-mutant scoring and machine-readable run reports.
//!
//! The aggregate metrics mirror the usual mutation-testing vocabulary:
//! mutation score (killed / total), equivalent-mutant percentage, resource
//! limits hit, deduplicated test count with average and maximum test length,
//! and total runtime.

use crate::determinize::determinize_explicit;
use crate::hyper::{
    build_phi_for, eval_bounded, killing_labeling, witness_to_test, PhiKind,
};
use crate::kill::{
    decide_equivalence, search_definite, search_potential, search_potential_between, test_kills,
    test_kills_between, KillMode, KillStatus, KillVerdict, SearchDepth, Test, VerdictDiagnostics,
};
use crate::lang::ModelAst;
use crate::mutate::{build_conditional_mutant, project_sts, ConditionalMutant, Mutation};
use crate::sts::{Budget, DEFAULT_NODE_BUDGET};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Potential,
    Definite,
    Equivalence,
    Hyper,
}

impl std::fmt::Display for RunMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunMode::Potential => write!(f, "potential"),
            RunMode::Definite => write!(f, "definite"),
            RunMode::Equivalence => write!(f, "equivalence"),
            RunMode::Hyper => write!(f, "hyper"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScoreConfig {
    pub mode: RunMode,
    pub bound: usize,
    pub budget: u64,
    /// Decide killability on the determinized system instead (the paper's
    /// pipeline for non-deterministic models): killable there means killable
    /// if non-determinism can be controlled; not killable there is a sound
    /// equivalence verdict.
    pub determinize: bool,
    /// Re-verify every witness test in its claimed mode.
    pub verify_witnesses: bool,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            mode: RunMode::Equivalence,
            bound: 7,
            budget: DEFAULT_NODE_BUDGET,
            determinize: false,
            verify_witnesses: true,
        }
    }
}

/// One catalogue entry in the mutant JSONL export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MutantRecord {
    pub id: String,
    pub operator: String,
    pub span: (usize, usize),
    pub original: String,
    pub replacement: String,
    pub site: String,
}

impl MutantRecord {
    pub fn from_mutation(m: &Mutation) -> MutantRecord {
        MutantRecord {
            id: m.id(),
            operator: m.operator.tag(),
            span: (m.site.span.start, m.site.span.end),
            original: m.original.clone(),
            replacement: m.replacement.clone(),
            site: m.site.kind.label().to_string(),
        }
    }
}

/// One line of the test-suite JSONL export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestRecord {
    pub mutant_id: String,
    pub mode: KillMode,
    pub inputs: Vec<crate::domain::Valuation>,
    pub outputs: Vec<crate::domain::Valuation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MutantOutcome {
    pub id: String,
    pub operator: String,
    pub site: String,
    pub original: String,
    pub replacement: String,
    pub verdict: Option<KillVerdict>,
    pub error: Option<String>,
    pub wall_ms: u64,
    pub budget_exhausted: bool,
    /// Whether the witness test re-verified in its claimed mode.
    pub witness_verified: Option<bool>,
    /// The verdict was computed on the determinized system, so killing
    /// assumes controllable non-determinism.
    pub controlled_nondeterminism: bool,
}

impl MutantOutcome {
    pub fn killed(&self) -> bool {
        matches!(
            self.verdict.as_ref().map(|v| &v.status),
            Some(KillStatus::DefinitelyKillable) | Some(KillStatus::PotentiallyOnly)
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub total_mutants: usize,
    pub killed: usize,
    pub equivalent: usize,
    pub unknown: usize,
    pub errors: usize,
    pub mutation_score_pct: f64,
    pub equivalent_pct: f64,
    pub unknown_pct: f64,
    pub error_pct: f64,
    /// Deduplicated witness tests.
    pub tests: usize,
    pub avg_test_len: f64,
    pub max_test_len: usize,
    pub resource_limit_count: usize,
    pub total_runtime_ms: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub model: String,
    pub mode: RunMode,
    pub bound: usize,
    pub per_mutant: Vec<MutantOutcome>,
    pub aggregate: Aggregate,
}

fn error_outcome(m: &Mutation, error: String, wall_ms: u64) -> MutantOutcome {
    MutantOutcome {
        id: m.id(),
        operator: m.operator.tag(),
        site: m.site.kind.label().to_string(),
        original: m.original.clone(),
        replacement: m.replacement.clone(),
        verdict: None,
        error: Some(error),
        wall_ms,
        budget_exhausted: false,
        witness_verified: None,
        controlled_nondeterminism: false,
    }
}

/// Decide one mutant's verdict under the given configuration.
pub fn score_mutant(ast: &ModelAst, m: &Mutation, config: &ScoreConfig) -> MutantOutcome {
    let started = Instant::now();
    let cm = match build_conditional_mutant(ast, m) {
        Ok(cm) => cm,
        Err(e) => return error_outcome(m, e.to_string(), started.elapsed().as_millis() as u64),
    };
    let mut outcome = score_conditional_mutant(&cm, config);
    outcome.wall_ms = started.elapsed().as_millis() as u64;
    outcome
}

/// Decide a prebuilt conditional mutant (also used for handwritten mutants).
pub fn score_conditional_mutant(cm: &ConditionalMutant, config: &ScoreConfig) -> MutantOutcome {
    let started = Instant::now();
    let (id, operator, site, original, replacement) = match &cm.mutation {
        Some(m) => (
            m.id(),
            m.operator.tag(),
            m.site.kind.label().to_string(),
            m.original.clone(),
            m.replacement.clone(),
        ),
        None => (
            cm.id(),
            "handwritten".into(),
            "model".into(),
            String::new(),
            String::new(),
        ),
    };

    let (verdict, controlled, verify_projs) = if config.determinize {
        match determinized_verdict(cm, config) {
            Ok((v, projs)) => (v, true, projs),
            Err(e) => {
                let mut out = MutantOutcome {
                    id,
                    operator,
                    site,
                    original,
                    replacement,
                    verdict: None,
                    error: Some(e),
                    wall_ms: started.elapsed().as_millis() as u64,
                    budget_exhausted: false,
                    witness_verified: None,
                    controlled_nondeterminism: true,
                };
                out.wall_ms = started.elapsed().as_millis() as u64;
                return out;
            }
        }
    } else {
        (mode_verdict(cm, config), false, None)
    };

    let budget_exhausted = matches!(verdict.status, KillStatus::UnknownWithinBound(_))
        && verdict.diagnostics.budget_spent >= config.budget;
    let witness_verified = if config.verify_witnesses {
        verdict.witness.as_ref().map(|t| {
            let mode = match verdict.status {
                KillStatus::DefinitelyKillable => KillMode::Definite,
                _ => KillMode::Potential,
            };
            match &verify_projs {
                Some((orig, mutant)) => {
                    test_kills_between(orig, mutant, t, mode).unwrap_or(false)
                }
                None => test_kills(cm, t, mode).unwrap_or(false),
            }
        })
    } else {
        None
    };

    MutantOutcome {
        id,
        operator,
        site,
        original,
        replacement,
        verdict: Some(verdict),
        error: None,
        wall_ms: started.elapsed().as_millis() as u64,
        budget_exhausted,
        witness_verified,
        controlled_nondeterminism: controlled,
    }
}

fn mode_verdict(cm: &ConditionalMutant, config: &ScoreConfig) -> KillVerdict {
    match config.mode {
        RunMode::Equivalence => decide_equivalence(cm, config.budget),
        RunMode::Potential => {
            let mut budget = Budget::new(config.budget);
            match search_potential(cm, SearchDepth::Bounded(config.bound), &mut budget) {
                Err(_) => unknown_verdict(config.budget, budget.spent()),
                Ok(out) => match out.kill {
                    Some(kill) => KillVerdict {
                        status: KillStatus::PotentiallyOnly,
                        witness: kill.test,
                        diagnostics: VerdictDiagnostics {
                            kill_depth: Some(kill.depth),
                            potential_nodes: Some(out.nodes),
                            mutant_outputs: kill.mutant_outputs,
                            budget_spent: budget.spent(),
                            ..Default::default()
                        },
                    },
                    None if out.complete => KillVerdict {
                        status: KillStatus::Equivalent,
                        witness: None,
                        diagnostics: VerdictDiagnostics {
                            potential_nodes: Some(out.nodes),
                            budget_spent: budget.spent(),
                            ..Default::default()
                        },
                    },
                    None => unknown_verdict(config.bound as u64, budget.spent()),
                },
            }
        }
        RunMode::Definite => {
            let mut budget = Budget::new(config.budget);
            match search_definite(cm, SearchDepth::Bounded(config.bound), &mut budget) {
                Err(_) => unknown_verdict(config.budget, budget.spent()),
                Ok(out) => match out.kill {
                    Some(kill) => KillVerdict {
                        status: KillStatus::DefinitelyKillable,
                        witness: kill.test,
                        diagnostics: VerdictDiagnostics {
                            kill_depth: Some(kill.depth),
                            definite_nodes: Some(out.nodes),
                            budget_spent: budget.spent(),
                            ..Default::default()
                        },
                    },
                    None => KillVerdict {
                        // Not definitely killable within the bound (a
                        // fixpoint refutes it outright); potential status
                        // was not examined in this mode.
                        status: KillStatus::UnknownWithinBound(config.bound as u64),
                        witness: None,
                        diagnostics: VerdictDiagnostics {
                            definite_refuted: Some(out.complete),
                            definite_nodes: Some(out.nodes),
                            budget_spent: budget.spent(),
                            ..Default::default()
                        },
                    },
                },
            }
        }
        RunMode::Hyper => hyper_verdict(cm, config),
    }
}

fn unknown_verdict(limit: u64, spent: u64) -> KillVerdict {
    KillVerdict {
        status: KillStatus::UnknownWithinBound(limit),
        witness: None,
        diagnostics: VerdictDiagnostics { budget_spent: spent, ..Default::default() },
    }
}

fn hyper_verdict(cm: &ConditionalMutant, config: &ScoreConfig) -> KillVerdict {
    let labeling = killing_labeling(&cm.sts);
    let run = |kind: PhiKind| -> Option<Test> {
        let formula = build_phi_for(kind, &cm.sts);
        let mut budget = Budget::new(config.budget);
        let verdict = eval_bounded(&cm.sts, &labeling, &formula, config.bound, &mut budget).ok()?;
        if !verdict.holds {
            return None;
        }
        let (_, witness) = verdict.witnesses.first()?;
        witness_to_test(cm, kind, witness).ok()
    };
    if let Some(test) = run(PhiKind::Phi3) {
        return KillVerdict {
            status: KillStatus::DefinitelyKillable,
            witness: Some(test),
            diagnostics: VerdictDiagnostics::default(),
        };
    }
    if let Some(test) = run(PhiKind::Phi2) {
        return KillVerdict {
            status: KillStatus::PotentiallyOnly,
            witness: Some(test),
            diagnostics: VerdictDiagnostics::default(),
        };
    }
    unknown_verdict(config.bound as u64, 0)
}

type Projections = Option<(crate::sts::Sts, crate::sts::Sts)>;

fn determinized_verdict(
    cm: &ConditionalMutant,
    config: &ScoreConfig,
) -> Result<(KillVerdict, Projections), String> {
    let d = determinize_explicit(cm).map_err(|e| e.to_string())?;
    let orig = project_sts(&d.sts, false);
    let mutant = project_sts(&d.sts, true);
    let mut budget = Budget::new(config.budget);
    match search_potential_between(&orig, &mutant, SearchDepth::Fixpoint, &mut budget) {
        Err(_) => Ok((unknown_verdict(config.budget, budget.spent()), None)),
        Ok(out) => match out.kill {
            // The determinized mutant projection is deterministic, so a kill
            // is definite for the transformed system.
            Some(kill) => Ok((
                KillVerdict {
                    status: KillStatus::DefinitelyKillable,
                    witness: kill.test,
                    diagnostics: VerdictDiagnostics {
                        kill_depth: Some(kill.depth),
                        potential_nodes: Some(out.nodes),
                        mutant_outputs: kill.mutant_outputs,
                        budget_spent: budget.spent(),
                        ..Default::default()
                    },
                },
                Some((orig, mutant)),
            )),
            None => Ok((
                KillVerdict {
                    status: KillStatus::Equivalent,
                    witness: None,
                    diagnostics: VerdictDiagnostics {
                        potential_nodes: Some(out.nodes),
                        budget_spent: budget.spent(),
                        ..Default::default()
                    },
                },
                Some((orig, mutant)),
            )),
        },
    }
}

/// Aggregate the per-mutant outcomes into one report.
pub fn aggregate(outcomes: &[MutantOutcome], total_runtime_ms: u64) -> Aggregate {
    let total = outcomes.len();
    let killed = outcomes.iter().filter(|o| o.killed()).count();
    let equivalent = outcomes
        .iter()
        .filter(|o| matches!(o.verdict.as_ref().map(|v| &v.status), Some(KillStatus::Equivalent)))
        .count();
    let unknown = outcomes
        .iter()
        .filter(|o| {
            matches!(
                o.verdict.as_ref().map(|v| &v.status),
                Some(KillStatus::UnknownWithinBound(_))
            )
        })
        .count();
    let errors = outcomes.iter().filter(|o| o.error.is_some()).count();
    let pct = |n: usize| if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };

    let suite: BTreeSet<&Test> =
        outcomes.iter().filter_map(|o| o.verdict.as_ref().and_then(|v| v.witness.as_ref())).collect();
    let tests = suite.len();
    let max_test_len = suite.iter().map(|t| t.length()).max().unwrap_or(0);
    let avg_test_len = if tests == 0 {
        0.0
    } else {
        suite.iter().map(|t| t.length()).sum::<usize>() as f64 / tests as f64
    };

    Aggregate {
        total_mutants: total,
        killed,
        equivalent,
        unknown,
        errors,
        mutation_score_pct: pct(killed),
        equivalent_pct: pct(equivalent),
        unknown_pct: pct(unknown),
        error_pct: pct(errors),
        tests,
        avg_test_len,
        max_test_len,
        resource_limit_count: outcomes.iter().filter(|o| o.budget_exhausted).count(),
        total_runtime_ms,
    }
}

/// Score a list of catalogue mutations sequentially. (The CLI fans mutants
/// out across workers and aggregates with the same function.)
pub fn mutation_score(
    ast: &ModelAst,
    mutations: &[Mutation],
    model_name: &str,
    config: &ScoreConfig,
) -> RunReport {
    let started = Instant::now();
    let per_mutant: Vec<MutantOutcome> =
        mutations.iter().map(|m| score_mutant(ast, m, config)).collect();
    let aggregate = aggregate(&per_mutant, started.elapsed().as_millis() as u64);
    RunReport {
        model: model_name.to_string(),
        mode: config.mode,
        bound: config.bound,
        per_mutant,
        aggregate,
    }
}

/// Human-readable summary in the usual mutation-report vocabulary.
pub fn human_summary(report: &RunReport) -> String {
    let a = &report.aggregate;
    let mut out = String::new();
    out.push_str(&format!("Model                  {}\n", report.model));
    out.push_str(&format!("Mode                   {} (bound {})\n", report.mode, report.bound));
    out.push_str(&format!("# Mutants              {}\n", a.total_mutants));
    out.push_str(&format!(
        "Mutation Score         {:.1}% ({} killed)\n",
        a.mutation_score_pct, a.killed
    ));
    out.push_str(&format!("  Avg. Test-case Len.  {:.2}\n", a.avg_test_len));
    out.push_str(&format!("  Max Test-case Len.   {}\n", a.max_test_len));
    out.push_str(&format!(
        "Equivalent Mutants     {:.1}% ({})\n",
        a.equivalent_pct, a.equivalent
    ));
    out.push_str(&format!("Unknown                {:.1}% ({})\n", a.unknown_pct, a.unknown));
    out.push_str(&format!("Errors                 {:.1}% ({})\n", a.error_pct, a.errors));
    out.push_str(&format!("# Tests (deduplicated) {}\n", a.tests));
    out.push_str(&format!("# Resource Limit       {}\n", a.resource_limit_count));
    out.push_str(&format!(
        "Total Runtime          {:.2}s\n",
        a.total_runtime_ms as f64 / 1000.0
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse, BEVERAGE_SOURCE};
    use crate::mutate::{enumerate_mutations, MutationOptions};

    #[test]
    fn beverage_score_report_is_consistent() {
        let ast = parse(BEVERAGE_SOURCE).unwrap();
        let mutations = enumerate_mutations(&ast, &MutationOptions::default());
        let config = ScoreConfig::default();
        let report = mutation_score(&ast, &mutations, "beverage", &config);
        let a = &report.aggregate;
        assert_eq!(a.total_mutants, mutations.len());
        assert_eq!(a.killed + a.equivalent + a.unknown + a.errors, a.total_mutants);
        let pct_sum = a.mutation_score_pct + a.equivalent_pct + a.unknown_pct + a.error_pct;
        assert!((pct_sum - 100.0).abs() < 1e-6, "{pct_sum}");
        assert!(a.killed > 0, "the running example has killable mutants");
        assert!(a.errors > 0, "the out-of-domain constant mutation is rejected");
        // Every witness re-verified.
        for o in &report.per_mutant {
            if o.killed() {
                assert_eq!(o.witness_verified, Some(true), "{}", o.id);
            }
        }
    }

    #[test]
    fn empty_mutant_list_reports_no_mutants() {
        let ast = parse(BEVERAGE_SOURCE).unwrap();
        let report = mutation_score(&ast, &[], "beverage", &ScoreConfig::default());
        assert_eq!(report.aggregate.total_mutants, 0);
        assert_eq!(report.aggregate.tests, 0);
        assert_eq!(report.aggregate.mutation_score_pct, 0.0);
    }

    #[test]
    fn identity_like_mutant_scores_equivalent() {
        let cm = crate::kill::tests::identity_cm();
        let outcome = score_conditional_mutant(&cm, &ScoreConfig::default());
        assert_eq!(
            outcome.verdict.unwrap().status,
            KillStatus::Equivalent,
            "score 0%, equivalent 100%"
        );
    }

    #[test]
    fn hyper_mode_agrees_with_equivalence_mode_on_the_running_example() {
        let cm = crate::kill::tests::fill_cm();
        let hyper = score_conditional_mutant(
            &cm,
            &ScoreConfig { mode: RunMode::Hyper, ..Default::default() },
        );
        assert_eq!(hyper.verdict.unwrap().status, KillStatus::DefinitelyKillable);
        assert_eq!(hyper.witness_verified, Some(true));

        let set_cm = crate::kill::tests::fill_set_cm();
        let hyper2 = score_conditional_mutant(
            &set_cm,
            &ScoreConfig { mode: RunMode::Hyper, ..Default::default() },
        );
        assert_eq!(hyper2.verdict.unwrap().status, KillStatus::PotentiallyOnly);
    }

    #[test]
    fn determinize_mode_is_sound_on_equivalent_mutants() {
        let cm = crate::kill::tests::identity_cm();
        let outcome = score_conditional_mutant(
            &cm,
            &ScoreConfig { determinize: true, ..Default::default() },
        );
        assert!(outcome.controlled_nondeterminism);
        assert_eq!(outcome.verdict.unwrap().status, KillStatus::Equivalent);

        // The coffee-only mutant flips: killable under controlled
        // non-determinism although equivalent outright.
        let coffee = crate::kill::tests::coffee_only_cm();
        let outcome2 = score_conditional_mutant(
            &coffee,
            &ScoreConfig { determinize: true, ..Default::default() },
        );
        assert_eq!(outcome2.verdict.unwrap().status, KillStatus::DefinitelyKillable);
        assert_eq!(outcome2.witness_verified, Some(true));
    }
}
