//! Batch front end: parse, mutate, determinize, check, and score `.rm`
//! models, with parallel fan-out over mutants.
//!
//! Exit codes: 0 on success, 1 on a model error, 2 when any budget was
//! exhausted along the way.

use clap::{Parser, Subcommand, ValueEnum};
use reactmut::determinize::{determinize_explicit, determinize_syntactic, verify_transform};
use reactmut::hyper::{
    build_phi_for, eval_bounded, killing_labeling, parse_formula, witness_to_test, PhiKind,
};
use reactmut::kill::{KillStatus, Test};
use reactmut::lang::{elaborate, parse, render, ModelAst};
use reactmut::mutate::{
    build_conditional_mutant, enumerate_mutations, ConditionalMutant, Mutation, MutationOptions,
    MUT_VAR,
};
use reactmut::report::{
    aggregate, human_summary, score_conditional_mutant, MutantOutcome, MutantRecord, RunMode,
    RunReport, ScoreConfig, TestRecord,
};
use reactmut::sts::{Budget, Explorer, DEFAULT_NODE_BUDGET};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "reactmut", about = "Mutation-driven test generation for reactive models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Potential,
    Definite,
    Equivalence,
    Hyper,
}

impl From<ModeArg> for RunMode {
    fn from(m: ModeArg) -> RunMode {
        match m {
            ModeArg::Potential => RunMode::Potential,
            ModeArg::Definite => RunMode::Definite,
            ModeArg::Equivalence => RunMode::Equivalence,
            ModeArg::Hyper => RunMode::Hyper,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model: determinism and totality over reachable states.
    Validate {
        model: PathBuf,
        #[arg(long, default_value_t = 7)]
        bound: usize,
    },
    /// Emit the mutation catalogue as JSON lines.
    Mutants {
        model: PathBuf,
        /// Comma-separated operator tag prefixes to keep.
        #[arg(long)]
        ops: Option<String>,
        /// Leave init-block sites unmutated.
        #[arg(long)]
        skip_init_sites: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide killability of one mutant (or of a model that carries `mut`).
    Kill {
        model: PathBuf,
        /// Mutation identifier from `mutants`.
        #[arg(long)]
        mutant: Option<String>,
        #[arg(long, value_enum, default_value = "equivalence")]
        mode: ModeArg,
        #[arg(long, default_value_t = 7)]
        bound: usize,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        budget: u64,
        /// Decide on the determinized system (controllable non-determinism).
        #[arg(long)]
        determinize: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Generate a deduplicated killing-test suite over all mutants.
    Testsuite {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "equivalence")]
        mode: ModeArg,
        #[arg(long, default_value_t = 7)]
        bound: usize,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        budget: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        ops: Option<String>,
        #[arg(long)]
        skip_init_sites: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score all mutants and report killed/equivalent/unknown percentages.
    Score {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "equivalence")]
        mode: ModeArg,
        #[arg(long, default_value_t = 7)]
        bound: usize,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        budget: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Recorded in the report for reproducibility bookkeeping.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        ops: Option<String>,
        #[arg(long)]
        skip_init_sites: bool,
        #[arg(long)]
        determinize: bool,
        /// Directory for report.json, testsuite.jsonl, and mutants.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Emit the determinized model (`.rm` via the syntactic rewrite, or the
    /// explicit transition table as JSON).
    Determinize {
        model: PathBuf,
        /// Mutation identifier when the model does not carry `mut` itself.
        #[arg(long)]
        mutant: Option<String>,
        /// Emit the explicit transition-table JSON instead of `.rm` text.
        #[arg(long)]
        explicit: bool,
        /// Also check the transformation properties at this depth.
        #[arg(long)]
        verify_depth: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a hyperproperty over bounded trace prefixes.
    Hyper {
        model: PathBuf,
        /// Formula file in the textual format, or use --phi.
        #[arg(long, conflicts_with = "phi")]
        formula: Option<PathBuf>,
        /// Built-in killing formula (1..=4).
        #[arg(long)]
        phi: Option<usize>,
        #[arg(long, default_value_t = 5)]
        bound: usize,
        #[arg(long)]
        mutant: Option<String>,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        budget: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
}

enum CliError {
    Model(String),
    Budget(String),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Model(_) => ExitCode::from(1),
            CliError::Budget(_) => ExitCode::from(2),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Model(m) | CliError::Budget(m) => m,
        }
    }
}

fn model_err(e: impl std::fmt::Display) -> CliError {
    CliError::Model(e.to_string())
}

fn load_model(path: &Path) -> Result<ModelAst, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Model(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| CliError::Model(format!("{}: {e}", path.display())))
}

/// Resolve the conditional mutant for commands operating on one: either the
/// model already carries `mut` (a handwritten conditional mutant) or a
/// catalogue identifier selects the mutation.
fn resolve_mutant(ast: &ModelAst, mutant: Option<&str>) -> Result<ConditionalMutant, CliError> {
    match mutant {
        Some(id) => {
            let m = find_mutation(ast, id)?;
            build_conditional_mutant(ast, &m).map_err(model_err)
        }
        None if ast.is_state(MUT_VAR) => {
            ConditionalMutant::from_model_with_mut(ast.clone(), ast.clone()).map_err(model_err)
        }
        None => Err(CliError::Model(format!(
            "model does not declare `{MUT_VAR}`; select a mutation with --mutant <id>"
        ))),
    }
}

fn find_mutation(ast: &ModelAst, id: &str) -> Result<Mutation, CliError> {
    enumerate_mutations(ast, &MutationOptions::default())
        .into_iter()
        .find(|m| m.id() == id)
        .ok_or_else(|| CliError::Model(format!("no mutation with id `{id}`")))
}

fn mutation_options(ops: Option<&str>, skip_init_sites: bool) -> MutationOptions {
    MutationOptions {
        include_init_sites: !skip_init_sites,
        operator_filter: ops
            .map(|s| s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect())
            .unwrap_or_default(),
    }
}

/// Fan the mutants out over a fixed number of workers; output order (and
/// therefore every verdict) is independent of the worker count.
fn parallel_score(
    ast: &ModelAst,
    mutations: &[Mutation],
    config: &ScoreConfig,
    workers: usize,
) -> Vec<MutantOutcome> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<MutantOutcome>>> = Mutex::new(vec![None; mutations.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= mutations.len() {
                    break;
                }
                let outcome = match build_conditional_mutant(ast, &mutations[idx]) {
                    Ok(cm) => score_conditional_mutant(&cm, config),
                    Err(e) => error_outcome(&mutations[idx], e.to_string()),
                };
                slots.lock().expect("poisoned").as_mut_slice()[idx] = Some(outcome);
            });
        }
    });
    slots.into_inner().expect("poisoned").into_iter().map(|o| o.expect("scored")).collect()
}

fn error_outcome(m: &Mutation, error: String) -> MutantOutcome {
    MutantOutcome {
        id: m.id(),
        operator: m.operator.tag(),
        site: m.site.kind.label().to_string(),
        original: m.original.clone(),
        replacement: m.replacement.clone(),
        verdict: None,
        error: Some(error),
        wall_ms: 0,
        budget_exhausted: false,
        witness_verified: None,
        controlled_nondeterminism: false,
    }
}

fn write_or_print(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Model(format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn test_summary(t: &Test) -> String {
    let ins: Vec<String> = t.inputs.iter().map(|v| v.to_string()).collect();
    let outs: Vec<String> = t.outputs.iter().map(|v| v.to_string()).collect();
    format!("inputs: [{}]  outputs: [{}]", ins.join(" ; "), outs.join(" ; "))
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Validate { model, bound } => {
            let ast = load_model(&model)?;
            let sts = elaborate(&ast).map_err(model_err)?;
            let report = sts.validate(bound).map_err(model_err)?;
            println!(
                "deterministic: {}\ntotal: {}\ninitial pairs: {}\nstates explored: {}",
                report.deterministic, report.total, report.initial_count, report.states_explored
            );
            if let Some((state, input)) = &report.nondet_witness {
                println!("non-deterministic at: state {{{state}}} input {{{input}}}");
            }
            if let Some((state, input)) = &report.dead_witness {
                println!("no successor at: state {{{state}}} input {{{input}}}");
            }
            if !report.total || report.initial_count == 0 {
                return Err(CliError::Model("model violates totality".into()));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Mutants { model, ops, skip_init_sites, out } => {
            let ast = load_model(&model)?;
            let opts = mutation_options(ops.as_deref(), skip_init_sites);
            let mut lines = String::new();
            for m in enumerate_mutations(&ast, &opts) {
                let record = MutantRecord::from_mutation(&m);
                lines.push_str(&serde_json::to_string(&record).expect("serializable"));
                lines.push('\n');
            }
            write_or_print(out.as_deref(), &lines)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Kill { model, mutant, mode, bound, budget, determinize, format } => {
            let ast = load_model(&model)?;
            let cm = resolve_mutant(&ast, mutant.as_deref())?;
            let config = ScoreConfig {
                mode: mode.into(),
                bound,
                budget,
                determinize,
                verify_witnesses: true,
            };
            let outcome = score_conditional_mutant(&cm, &config);
            match format {
                FormatArg::Json => {
                    println!("{}", serde_json::to_string_pretty(&outcome).expect("serializable"))
                }
                FormatArg::Text => {
                    let verdict = outcome.verdict.as_ref();
                    println!(
                        "mutant {}: {}",
                        outcome.id,
                        verdict
                            .map(|v| v.status.to_string())
                            .unwrap_or_else(|| outcome.error.clone().unwrap_or_default())
                    );
                    if let Some(t) = verdict.and_then(|v| v.witness.as_ref()) {
                        println!("witness ({} steps): {}", t.length(), test_summary(t));
                        println!("witness verified: {:?}", outcome.witness_verified);
                    }
                }
            }
            if outcome.budget_exhausted {
                return Err(CliError::Budget("budget exhausted".into()));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Testsuite { model, mode, bound, budget, workers, ops, skip_init_sites, out } => {
            let ast = load_model(&model)?;
            let opts = mutation_options(ops.as_deref(), skip_init_sites);
            let mutations = enumerate_mutations(&ast, &opts);
            let config = ScoreConfig {
                mode: mode.into(),
                bound,
                budget,
                determinize: false,
                verify_witnesses: true,
            };
            let outcomes = parallel_score(&ast, &mutations, &config, workers);
            let mut seen: BTreeSet<Test> = BTreeSet::new();
            let mut lines = String::new();
            for o in &outcomes {
                let Some(v) = &o.verdict else { continue };
                let Some(t) = &v.witness else { continue };
                if !o.killed() || !seen.insert(t.clone()) {
                    continue;
                }
                let record = TestRecord {
                    mutant_id: o.id.clone(),
                    mode: match v.status {
                        KillStatus::DefinitelyKillable => reactmut::kill::KillMode::Definite,
                        _ => reactmut::kill::KillMode::Potential,
                    },
                    inputs: t.inputs.clone(),
                    outputs: t.outputs.clone(),
                };
                lines.push_str(&serde_json::to_string(&record).expect("serializable"));
                lines.push('\n');
            }
            write_or_print(out.as_deref(), &lines)?;
            if outcomes.iter().any(|o| o.budget_exhausted) {
                return Err(CliError::Budget("budget exhausted for some mutants".into()));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Score {
            model,
            mode,
            bound,
            budget,
            workers,
            seed,
            ops,
            skip_init_sites,
            determinize,
            out,
            format,
        } => {
            let ast = load_model(&model)?;
            let opts = mutation_options(ops.as_deref(), skip_init_sites);
            let mutations = enumerate_mutations(&ast, &opts);
            let config = ScoreConfig {
                mode: mode.into(),
                bound,
                budget,
                determinize,
                verify_witnesses: true,
            };
            let started = Instant::now();
            let outcomes = parallel_score(&ast, &mutations, &config, workers);
            let agg = aggregate(&outcomes, started.elapsed().as_millis() as u64);
            let report = RunReport {
                model: model.display().to_string(),
                mode: config.mode,
                bound,
                per_mutant: outcomes,
                aggregate: agg,
            };
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir)
                    .map_err(|e| CliError::Model(format!("{}: {e}", dir.display())))?;
                let mut report_json =
                    serde_json::to_value(&report).expect("serializable");
                report_json["seed"] = serde_json::json!(seed);
                report_json["workers"] = serde_json::json!(workers);
                std::fs::write(
                    dir.join("report.json"),
                    serde_json::to_string_pretty(&report_json).expect("serializable"),
                )
                .map_err(model_err)?;
                let mut mutants_jsonl = String::new();
                for m in &mutations {
                    mutants_jsonl
                        .push_str(&serde_json::to_string(&MutantRecord::from_mutation(m)).unwrap());
                    mutants_jsonl.push('\n');
                }
                std::fs::write(dir.join("mutants.jsonl"), mutants_jsonl).map_err(model_err)?;
                let mut suite = String::new();
                let mut seen: BTreeSet<Test> = BTreeSet::new();
                for o in &report.per_mutant {
                    if let Some(v) = &o.verdict {
                        if let Some(t) = &v.witness {
                            if o.killed() && seen.insert(t.clone()) {
                                let record = TestRecord {
                                    mutant_id: o.id.clone(),
                                    mode: match v.status {
                                        KillStatus::DefinitelyKillable => {
                                            reactmut::kill::KillMode::Definite
                                        }
                                        _ => reactmut::kill::KillMode::Potential,
                                    },
                                    inputs: t.inputs.clone(),
                                    outputs: t.outputs.clone(),
                                };
                                suite.push_str(&serde_json::to_string(&record).unwrap());
                                suite.push('\n');
                            }
                        }
                    }
                }
                std::fs::write(dir.join("testsuite.jsonl"), suite).map_err(model_err)?;
            }
            match format {
                FormatArg::Json => {
                    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"))
                }
                FormatArg::Text => print!("{}", human_summary(&report)),
            }
            if report.per_mutant.iter().any(|o| o.budget_exhausted) {
                return Err(CliError::Budget("budget exhausted for some mutants".into()));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Determinize { model, mutant, explicit, verify_depth, out } => {
            let ast = load_model(&model)?;
            let cm = resolve_mutant(&ast, mutant.as_deref())?;
            if explicit {
                let d = determinize_explicit(&cm).map_err(model_err)?;
                let table = explicit_table(&d).map_err(model_err)?;
                let mut json = serde_json::json!({
                    "nd_domain": d.encoding.nd_domain,
                    "init_branches": d.encoding.init_branches,
                    "nondet_points": d.encoding.nondet_points.iter().map(|p| {
                        serde_json::json!({
                            "state": p.state, "input": p.input, "branches": p.branches,
                        })
                    }).collect::<Vec<_>>(),
                    "transitions": table,
                });
                if let Some(depth) = verify_depth {
                    let report = verify_transform(&cm, &d, depth).map_err(model_err)?;
                    json["verify"] = serde_json::json!({
                        "deterministic_up_to_mut": report.deterministic_up_to_mut,
                        "trace_inclusion": report.trace_inclusion,
                        "d_killable": report.d_killable,
                        "cm_status": report.cm_status.to_string(),
                        "soundness_holds": report.soundness_holds,
                    });
                }
                write_or_print(
                    out.as_deref(),
                    &format!("{}\n", serde_json::to_string_pretty(&json).expect("serializable")),
                )?;
            } else {
                let rewritten = determinize_syntactic(&cm.combined).map_err(model_err)?;
                write_or_print(out.as_deref(), &render(&rewritten))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Hyper { model, formula, phi, bound, mutant, budget, format } => {
            let ast = load_model(&model)?;
            let cm = resolve_mutant(&ast, mutant.as_deref())?;
            let (parsed, kind) = match (formula, phi) {
                (Some(path), None) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| CliError::Model(format!("{}: {e}", path.display())))?;
                    (parse_formula(&text).map_err(model_err)?, None)
                }
                (None, Some(k)) => {
                    let kind = PhiKind::from_index(k)
                        .ok_or_else(|| CliError::Model(format!("no formula phi{k}")))?;
                    (build_phi_for(kind, &cm.sts), Some(kind))
                }
                _ => return Err(CliError::Model("pass exactly one of --formula or --phi".into())),
            };
            let labeling = killing_labeling(&cm.sts);
            let mut eval_budget = Budget::new(budget);
            let verdict = eval_bounded(&cm.sts, &labeling, &parsed, bound, &mut eval_budget)
                .map_err(|e| match e {
                    reactmut::hyper::HyperError::Sts(
                        reactmut::sts::StsError::BudgetExhausted { spent },
                    ) => CliError::Budget(format!("budget exhausted after {spent} nodes")),
                    other => CliError::Model(other.to_string()),
                })?;
            match format {
                FormatArg::Json => {
                    let witnesses: Vec<serde_json::Value> = verdict
                        .witnesses
                        .iter()
                        .map(|(name, w)| {
                            serde_json::json!({
                                "trace": name,
                                "inputs": w.inputs(),
                                "outputs": w.outputs(),
                            })
                        })
                        .collect();
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&serde_json::json!({
                            "formula": parsed.to_string(),
                            "bound": verdict.bound,
                            "holds": verdict.holds,
                            "witnesses": witnesses,
                        }))
                        .expect("serializable")
                    );
                }
                FormatArg::Text => {
                    println!("formula: {parsed}");
                    println!("holds (bounded at {}): {}", verdict.bound, verdict.holds);
                    for (name, w) in &verdict.witnesses {
                        let t = Test { inputs: w.inputs(), outputs: w.outputs() };
                        println!("witness {name}: {}", test_summary(&t));
                        if let Some(kind) = kind {
                            match witness_to_test(&cm, kind, w) {
                                Ok(test) => println!(
                                    "  as killing test ({} steps): {}",
                                    test.length(),
                                    test_summary(&test)
                                ),
                                Err(e) => println!("  (no killing test: {e})"),
                            }
                        }
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Enumerate the determinized system's transitions for inspection.
fn explicit_table(
    d: &reactmut::determinize::Determinized,
) -> Result<Vec<serde_json::Value>, reactmut::sts::StsError> {
    let ex = Explorer::new(&d.sts);
    let mut budget = Budget::default();
    let mut rows = Vec::new();
    let reachable = ex.reachable(usize::MAX, &mut budget)?;
    for &state in &reachable {
        for input in 0..ex.input_count() {
            for &(o, x) in ex.successors(state, input)?.iter() {
                rows.push(serde_json::json!({
                    "state": ex.state_val(state),
                    "input": ex.input_val(input),
                    "output": ex.output_val(o),
                    "next": ex.state_val(x),
                }));
            }
        }
    }
    Ok(rows)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}
