//! Command-line front end over knowledge files.
//!
//! Exit codes are a contract: 0 for true/SAT/valid/ok, 1 for
//! false/UNSAT/invalid, 2 for parse or usage errors, 3 for budget exhaustion.

use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::change::{enumerate_subs, modified_nodes};
use crate::circumscription::smaller_model_witness_budgeted;
use crate::deduction::{check_derivation, infer_judgment};
use crate::knowledge::{load_knowledge, save_model, KnowledgeFile};
use crate::model::Transition;
use crate::semantics::{eval, eval_budgeted, Assignment, Budget, EvalError};
use crate::solver::{enumerate_models, sat, small_model_bound, valid, SatOutcome, SolverError, ValidOutcome, ValidityError};
use crate::syntax::prenex::{fragment_normalize, Target};
use crate::syntax::theory::theory_formula;

/// A finished command: exit code plus the two output streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CommandOutput {
    fn ok(stdout: String) -> Self {
        CommandOutput { code: 0, stdout, stderr: String::new() }
    }

    fn with_code(code: i32, stdout: String) -> Self {
        CommandOutput { code, stdout, stderr: String::new() }
    }

    fn fail(code: i32, msg: String) -> Self {
        CommandOutput { code, stdout: String::new(), stderr: msg }
    }
}

#[derive(Parser, Debug)]
#[command(name = "flb", about = "Reasoning on transitions of forests of linked bounded trees")]
struct Cli {
    /// Seed for reproducible reports.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Validate every model: forest shape, height, link functionality,
    /// support, and agreement with the generated theory sentence.
    Check { file: PathBuf },
    /// Evaluate a formula on a model under an assignment.
    Eval {
        file: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long)]
        formula: String,
        /// Variable bindings, e.g. `--assign x=m1`.
        #[arg(long = "assign")]
        assigns: Vec<String>,
        #[arg(long, default_value_t = 100_000_000)]
        budget: u64,
    },
    /// Check a named derivation and print its judgment.
    Derive {
        file: PathBuf,
        #[arg(long)]
        derivation: String,
    },
    /// Attempt to infer a judgment for a formula.
    Infer {
        file: PathBuf,
        #[arg(long)]
        formula: String,
    },
    /// Print every sub of a model around a kernel.
    Subs {
        file: PathBuf,
        #[arg(long)]
        model: String,
        /// Comma-separated kernel nodes.
        #[arg(long, default_value = "")]
        kernel: String,
        #[arg(long, default_value_t = 0)]
        radius: usize,
    },
    /// Exact change-minimality of a model for a formula.
    Minimal {
        file: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long)]
        formula: String,
        #[arg(long = "assign")]
        assigns: Vec<String>,
        #[arg(long, default_value_t = 100_000_000)]
        budget: u64,
    },
    /// Enumerate all supported valid structures satisfying a formula.
    Enumerate {
        file: PathBuf,
        #[arg(long)]
        formula: String,
        #[arg(long = "max-nodes")]
        max_nodes: usize,
        #[arg(long, default_value_t = 50_000_000)]
        budget: u64,
    },
    /// Small-model satisfiability modulo the theory.
    Sat {
        file: PathBuf,
        #[arg(long)]
        formula: String,
        /// Override the tree budget chosen from the existential count.
        #[arg(long = "max-trees")]
        max_trees: Option<usize>,
        #[arg(long, default_value_t = 200_000_000)]
        budget: u64,
    },
    /// Validity modulo the theory, via unsatisfiability of the negation.
    Valid {
        file: PathBuf,
        #[arg(long)]
        formula: String,
        #[arg(long = "max-trees")]
        max_trees: Option<usize>,
        #[arg(long, default_value_t = 200_000_000)]
        budget: u64,
    },
    /// Normalize a formula into a target prenex fragment.
    Normalize {
        file: PathBuf,
        #[arg(long)]
        formula: String,
        /// `ea` for exists*forall*, `ae` for forall*exists*.
        #[arg(long)]
        target: String,
    },
}

/// Runs one command; arguments exclude the program name.
pub fn run_command(args: &[String]) -> CommandOutput {
    let mut argv = vec!["flb".to_string()];
    argv.extend(args.iter().cloned());
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders help and version on stdout with success
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                CommandOutput::fail(2, rendered)
            } else {
                CommandOutput::ok(rendered)
            };
        }
    };
    match dispatch(cli) {
        Ok(out) => out,
        Err(msg) => CommandOutput::fail(2, msg),
    }
}

fn load(file: &PathBuf) -> Result<KnowledgeFile, String> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| format!("cannot read {}: {e}\n", file.display()))?;
    load_knowledge(&text).map_err(|e| format!("{}: {e}\n", file.display()))
}

fn parse_assigns(kf: &KnowledgeFile, model: &Transition, assigns: &[String]) -> Result<Assignment, String> {
    let _ = kf;
    let mut out = Assignment::new();
    for a in assigns {
        let (var, node) = a
            .split_once('=')
            .ok_or_else(|| format!("malformed assignment `{a}`, expected VAR=NODE\n"))?;
        if !model.nodes().contains(node) {
            return Err(format!("assignment target `{node}` is not a node of the model\n"));
        }
        out.insert(var.trim().to_string(), node.trim().to_string());
    }
    Ok(out)
}

fn budget_failure(e: &EvalError) -> Option<CommandOutput> {
    matches!(e, EvalError::BudgetExceeded)
        .then(|| CommandOutput::fail(3, "budget exhausted\n".to_string()))
}

fn dispatch(cli: Cli) -> Result<CommandOutput, String> {
    match cli.cmd {
        Cmd::Check { file } => {
            let kf = load(&file)?;
            let theory = theory_formula(&kf.sig);
            let mut out = String::new();
            let mut all_ok = true;
            for (name, t) in &kf.models {
                let violations = t.validate_flb();
                let supported = t.is_supported();
                let theory_holds = eval(t, &Assignment::new(), &theory)
                    .map_err(|e| format!("{e}\n"))?;
                if violations.is_empty() != theory_holds {
                    out.push_str(&format!(
                        "model {name}: INTERNAL DISAGREEMENT between structural validation and the theory sentence\n"
                    ));
                    all_ok = false;
                    continue;
                }
                if violations.is_empty() && supported {
                    out.push_str(&format!("model {name}: valid supported structure\n"));
                } else {
                    all_ok = false;
                    if !supported {
                        out.push_str(&format!("model {name}: not supported (a node is absent from both conditions)\n"));
                    }
                    for v in &violations {
                        out.push_str(&format!("model {name}: {v}\n"));
                    }
                }
            }
            Ok(CommandOutput::with_code(if all_ok { 0 } else { 1 }, out))
        }
        Cmd::Eval { file, model, formula, assigns, budget } => {
            let kf = load(&file)?;
            let t = kf.model(&model).ok_or_else(|| format!("no model named `{model}`\n"))?;
            let f = kf.parse_formula(&formula).map_err(|e| format!("formula: {e}\n"))?;
            let a = parse_assigns(&kf, t, &assigns)?;
            match eval_budgeted(t, &a, &f, &mut Budget::new(budget)) {
                Ok(true) => Ok(CommandOutput::ok("true\n".into())),
                Ok(false) => Ok(CommandOutput::with_code(1, "false\n".into())),
                Err(e) => Ok(budget_failure(&e).unwrap_or_else(|| CommandOutput::fail(2, format!("{e}\n")))),
            }
        }
        Cmd::Derive { file, derivation } => {
            let kf = load(&file)?;
            let dv = kf
                .derivation(&derivation)
                .ok_or_else(|| format!("no derivation named `{derivation}`\n"))?;
            match check_derivation(dv, &kf.sig) {
                Ok(j) => Ok(CommandOutput::ok(format!("{j}\n"))),
                Err(e) => Ok(CommandOutput::with_code(1, format!("rule violation: {e}\n"))),
            }
        }
        Cmd::Infer { file, formula } => {
            let kf = load(&file)?;
            let f = kf.parse_formula(&formula).map_err(|e| format!("formula: {e}\n"))?;
            match infer_judgment(&f, &kf.sig) {
                Some((j, dv)) => Ok(CommandOutput::ok(format!("{j}\n{dv}\n"))),
                None => Ok(CommandOutput::with_code(1, "no derivation found\n".into())),
            }
        }
        Cmd::Subs { file, model, kernel, radius } => {
            let kf = load(&file)?;
            let t = kf.model(&model).ok_or_else(|| format!("no model named `{model}`\n"))?;
            let kernel: BTreeSet<String> = kernel
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            for n in &kernel {
                if !t.nodes().contains(n) {
                    return Err(format!("kernel node `{n}` is not a node of the model\n"));
                }
            }
            let subs = enumerate_subs(t, &kernel, radius).map_err(|e| format!("{e}\n"))?;
            let decomp = t.decompose().map_err(|e| format!("{e}\n"))?;
            let mut out = String::new();
            for (i, (spec, sub)) in subs.iter().enumerate() {
                let root = &decomp.trees[spec.cleared_tree].root;
                out.push_str(&format!(
                    "# sub {i}: cleared tree rooted at {root}, prune={}\n",
                    spec.prune
                ));
                out.push_str(&save_model(&format!("sub_{i}"), sub));
            }
            Ok(CommandOutput::ok(out))
        }
        Cmd::Minimal { file, model, formula, assigns, budget } => {
            let kf = load(&file)?;
            let t = kf.model(&model).ok_or_else(|| format!("no model named `{model}`\n"))?;
            let violations = t.validate_flb();
            if !violations.is_empty() {
                return Err(format!("model `{model}` is not a valid structure\n"));
            }
            let f = kf.parse_formula(&formula).map_err(|e| format!("formula: {e}\n"))?;
            let a = parse_assigns(&kf, t, &assigns)?;
            let mut budget = Budget::new(budget);
            match eval_budgeted(t, &a, &f, &mut budget) {
                Ok(true) => {}
                Ok(false) => {
                    return Ok(CommandOutput::with_code(
                        1,
                        "false (the model does not satisfy the formula)\n".into(),
                    ))
                }
                Err(e) => {
                    return Ok(budget_failure(&e)
                        .unwrap_or_else(|| CommandOutput::fail(2, format!("{e}\n"))))
                }
            }
            match smaller_model_witness_budgeted(t, &a, &f, &mut budget) {
                Ok(None) => Ok(CommandOutput::ok("true\n".into())),
                Ok(Some(witness)) => {
                    let mut out = String::from("false\n");
                    out.push_str(&save_model("witness", &witness));
                    Ok(CommandOutput::with_code(1, out))
                }
                Err(e) => Ok(budget_failure(&e)
                    .unwrap_or_else(|| CommandOutput::fail(2, format!("{e}\n")))),
            }
        }
        Cmd::Enumerate { file, formula, max_nodes, budget } => {
            let kf = load(&file)?;
            let f = kf.parse_formula(&formula).map_err(|e| format!("formula: {e}\n"))?;
            match enumerate_models(&kf.sig, max_nodes, &f, budget) {
                Ok(models) => {
                    let mut out = format!("{} structures\n", models.len());
                    for (i, m) in models.iter().enumerate() {
                        out.push_str(&save_model(&format!("model_{i}"), m));
                    }
                    Ok(CommandOutput::ok(out))
                }
                Err(SolverError::BudgetExceeded) => {
                    Ok(CommandOutput::fail(3, "budget exhausted\n".into()))
                }
                Err(e) => Ok(CommandOutput::fail(2, format!("{e}\n"))),
            }
        }
        Cmd::Sat { file, formula, max_trees, budget } => {
            let kf = load(&file)?;
            let f = kf.parse_formula(&formula).map_err(|e| format!("formula: {e}\n"))?;
            let pf = match fragment_normalize(&f, Target::ExistsForall) {
                Ok(Some(pf)) => pf,
                Ok(None) => {
                    return Err("formula does not normalize into exists*forall* within the search bound\n".into())
                }
                Err(e) => return Err(format!("{e}\n")),
            };
            let bound = small_model_bound(&pf, &kf.sig).map_err(|e| format!("{e}\n"))?;
            match sat(&pf, &kf.sig, max_trees, budget) {
                Ok(SatOutcome::Sat { witness, assignment }) => {
                    let mut out = format!(
                        "SAT (searched up to {} trees of {} nodes)\n",
                        max_trees.unwrap_or(bound.max_trees),
                        bound.tree_size
                    );
                    if !assignment.is_empty() {
                        out.push_str("assignment:");
                        for (v, n) in &assignment {
                            out.push_str(&format!(" {v}={n}"));
                        }
                        out.push('\n');
                    }
                    out.push_str(&save_model("witness", &witness));
                    Ok(CommandOutput::ok(out))
                }
                Ok(SatOutcome::Unsat) => Ok(CommandOutput::with_code(1, "UNSAT\n".into())),
                Err(SolverError::BudgetExceeded) => {
                    Ok(CommandOutput::fail(3, "budget exhausted\n".into()))
                }
                Err(e) => Ok(CommandOutput::fail(2, format!("{e}\n"))),
            }
        }
        Cmd::Valid { file, formula, max_trees, budget } => {
            let kf = load(&file)?;
            let f = kf.parse_formula(&formula).map_err(|e| format!("formula: {e}\n"))?;
            match valid(&f, &kf.sig, max_trees, budget) {
                Ok(ValidOutcome::Valid) => Ok(CommandOutput::ok("valid\n".into())),
                Ok(ValidOutcome::Invalid { counter, assignment }) => {
                    let mut out = String::from("invalid\n");
                    if !assignment.is_empty() {
                        out.push_str("counter-assignment:");
                        for (v, n) in &assignment {
                            out.push_str(&format!(" {v}={n}"));
                        }
                        out.push('\n');
                    }
                    out.push_str(&save_model("counter_model", &counter));
                    Ok(CommandOutput::with_code(1, out))
                }
                Err(ValidityError::Solver(SolverError::BudgetExceeded)) => {
                    Ok(CommandOutput::fail(3, "budget exhausted\n".into()))
                }
                Err(e) => Ok(CommandOutput::fail(2, format!("{e}\n"))),
            }
        }
        Cmd::Normalize { file, formula, target } => {
            let kf = load(&file)?;
            let f = kf.parse_formula(&formula).map_err(|e| format!("formula: {e}\n"))?;
            let target = match target.as_str() {
                "ea" => Target::ExistsForall,
                "ae" => Target::ForallExists,
                other => return Err(format!("unknown target `{other}`, expected `ea` or `ae`\n")),
            };
            match fragment_normalize(&f, target) {
                Ok(Some(pf)) => Ok(CommandOutput::ok(format!("{pf}\n"))),
                Ok(None) => Ok(CommandOutput::with_code(
                    1,
                    "no normal form found within the search bound\n".into(),
                )),
                Err(e) => Ok(CommandOutput::fail(2, format!("{e}\n"))),
            }
        }
    }
}

// keep the unused field warning away until a randomized command lands
#[allow(dead_code)]
fn seed_of(cli: &Cli) -> u64 {
    cli.seed
}
