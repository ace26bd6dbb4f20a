//! `epcoord`: validate, project, solve and benchmark dispatch hierarchies.

mod report;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ep_core::generator::{generate, GenSpec};
use ep_core::oracle::{benchmark, compare, solve_joint, verify_projection};
use ep_core::{
    parse_and_validate, run_coordinated, stage1_project, DispatchError, LpStatus, ModelError,
    SystemTree,
};
use serde_json::{json, Value};

const EXIT_INFEASIBLE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "epcoord",
    version,
    about = "Equivalent-projection coordination of dispatch hierarchies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Model document to read.
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Generate the model instead, e.g. `leaves=8` or `levels=3,branching=2`.
    #[arg(long = "gen", global = true, conflicts_with = "input")]
    gen_spec: Option<String>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Seed for generation and projection sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Samples per EP when verifying projections.
    #[arg(long, global = true, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,

    /// Benchmark repetitions.
    #[arg(long, global = true, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    reps: u64,

    /// Include every node's EP in solve reports.
    #[arg(long, global = true)]
    emit_eps: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a model.
    Validate,
    /// Print every non-root node's canonical EP.
    Project,
    /// Solve jointly, by coordination, or both and compare.
    Solve {
        #[arg(long, value_enum, default_value_t = Mode::Coordinated)]
        mode: Mode,
    },
    /// Time the coordinated stages against the joint solve.
    Bench,
    /// Write a generated model document.
    Gen,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Joint,
    Coordinated,
    Compare,
}

struct Failure {
    code: u8,
    report: Value,
}

impl Failure {
    fn input(kind: &str, message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            report: report::error(kind, &message.into()),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::input(report::error_kind(&format!("{e:?}")), e.to_string())
    }
}

impl From<DispatchError> for Failure {
    fn from(e: DispatchError) -> Self {
        let code = match &e {
            DispatchError::Model(inner) => return inner.clone().into(),
            DispatchError::InfeasibleSubsystem { .. }
            | DispatchError::UpperInfeasible { .. }
            | DispatchError::UpperUnbounded { .. } => EXIT_INFEASIBLE,
            DispatchError::UnboundedCost { .. } => EXIT_INPUT,
            _ => EXIT_INTERNAL,
        };
        let mut report = report::error(report::error_kind(&format!("{e:?}")), &e.to_string());
        if let DispatchError::InfeasibleSubsystem { node }
        | DispatchError::UnboundedCost { node }
        | DispatchError::UpperInfeasible { node }
        | DispatchError::UpperUnbounded { node }
        | DispatchError::InternalInconsistency { node, .. } = &e
        {
            report["node"] = json!(node);
        }
        Failure { code, report }
    }
}

fn load(cli: &Cli) -> Result<SystemTree, Failure> {
    match (&cli.input, &cli.gen_spec) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Failure::input("Io", format!("cannot read {}: {e}", path.display()))
            })?;
            Ok(parse_and_validate(&text)?)
        }
        (None, Some(spec)) => {
            let spec: GenSpec = spec
                .parse()
                .map_err(|e: ep_core::generator::GenSpecError| {
                    Failure::input("GenSpec", e.to_string())
                })?;
            Ok(generate(&spec, cli.seed))
        }
        (None, None) => Err(Failure::input(
            "Usage",
            "either --input or --gen is required",
        )),
    }
}

/// Runs the command; the report is returned together with the exit code.
fn execute(cli: &Cli) -> Result<(Value, u8), Failure> {
    if let Command::Gen = cli.command {
        let spec = cli.gen_spec.as_deref().unwrap_or("");
        let spec: GenSpec = spec
            .parse()
            .map_err(|e: ep_core::generator::GenSpecError| {
                Failure::input("GenSpec", e.to_string())
            })?;
        return Ok((generate(&spec, cli.seed).to_document(), 0));
    }
    let tree = load(cli)?;
    match cli.command {
        Command::Validate => Ok((
            json!({
                "status": "valid",
                "name": tree.name(),
                "nodes": tree.nodes().len(),
                "edges": tree.edge_count(),
                "depth": tree.depth(),
            }),
            0,
        )),
        Command::Project => {
            let stage1 = stage1_project(&tree)?;
            Ok((json!({ "eps": report::eps(&tree, stage1.eps.values()) }), 0))
        }
        Command::Solve { mode: Mode::Joint } => {
            let outcome = solve_joint(&tree)?;
            let code = if outcome.status() == LpStatus::Optimal {
                0
            } else {
                EXIT_INFEASIBLE
            };
            Ok((report::joint(&outcome), code))
        }
        Command::Solve {
            mode: Mode::Coordinated,
        } => {
            let r = run_coordinated(&tree)?;
            Ok((report::dispatch(&tree, &r, cli.emit_eps), 0))
        }
        Command::Solve {
            mode: Mode::Compare,
        } => {
            let r = compare(&tree)?;
            let mut checks = Vec::new();
            if r.coordinated.is_some() {
                let stage1 = stage1_project(&tree)?;
                for (i, (id, ep)) in stage1.eps.iter().enumerate() {
                    let seed = cli.seed.wrapping_add(i as u64);
                    checks.push(verify_projection(
                        &stage1.ofrs[id],
                        ep,
                        cli.samples as usize,
                        seed,
                    ));
                }
            }
            let ok = r.passed() && checks.iter().all(|c| c.passed());
            let code = if ok && r.jod_status == LpStatus::Optimal {
                0
            } else {
                EXIT_INFEASIBLE
            };
            Ok((report::comparison(&tree, &r, &checks, cli.emit_eps), code))
        }
        Command::Bench => {
            let r = benchmark(&tree, cli.reps as usize)?;
            let mut v = serde_json::to_value(&r).expect("serializable");
            v["composition"] = json!("t_coor = projection_path + upper + local_path");
            Ok((v, 0))
        }
        Command::Gen => unreachable!("handled above"),
    }
}

fn emit(cli: &Cli, value: &Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    match &cli.output {
        Some(path) => fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (value, code) = match execute(&cli) {
        Ok(done) => done,
        Err(f) => {
            if let Some(msg) = f.report["message"].as_str() {
                eprintln!("epcoord: {msg}");
            }
            (f.report, f.code)
        }
    };
    if let Err(e) = emit(&cli, &value) {
        eprintln!("epcoord: cannot write report: {e}");
        return ExitCode::from(EXIT_INPUT);
    }
    ExitCode::from(code)
}
