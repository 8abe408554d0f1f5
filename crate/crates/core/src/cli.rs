//! The `laglift` command line.
//!
//! ```text
//! laglift plan     --registry R (--manifest M | --tree T) --usage U [--format json|text] [--output F]
//! laglift baseline --registry R (--manifest M | --tree T) [--format json|text] [--output F]
//! laglift report   --registry R (--manifest M | --tree T) [--format json|text] [--output F]
//! laglift verify   PLAN --registry R (--manifest M | --tree T) --usage U [--format json|text]
//! laglift gen      --output DIR [--seed N] [--packages N] [--max-versions N]
//!                  [--breaking-prob P] [--usage-density P]
//! ```
//!
//! Exit codes: 0 success, 1 bad input, 2 internal invariant violation.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::compat::UsageModel;
use crate::graph::{graph_metrics, parse_dep_tree, resolve_graph, restore_edges, DependencyGraph, RootManifest};
use crate::harness::{format_table, gen_ecosystem, oracle_verify_plan, EcosystemParams};
use crate::planner::{baseline_direct_latest, plan_upgrades, Outcome, UpgradePlan};
use crate::registry::RegistryIndex;

#[derive(Debug, Parser)]
#[command(name = "laglift", version, about = "Plan dependency upgrades that cut technical lag without breaking or bloating the project")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan lag-reducing upgrades with the debloat and compatibility filters.
    Plan {
        #[command(flatten)]
        input: GraphInput,
        /// Usage model of the project.
        #[arg(long, value_name = "PATH")]
        usage: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Bump every direct dependency to its latest stable release.
    Baseline {
        #[command(flatten)]
        input: GraphInput,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Print size and lag metrics of the graph.
    Report {
        #[command(flatten)]
        input: GraphInput,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Check a saved plan against an independent replay.
    Verify {
        /// Plan JSON written by `plan` or `baseline`.
        plan: PathBuf,
        #[command(flatten)]
        input: GraphInput,
        #[arg(long, value_name = "PATH")]
        usage: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write a synthetic registry, manifest and usage model into a directory.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        packages: usize,
        #[arg(long, default_value_t = 5)]
        max_versions: usize,
        #[arg(long, default_value_t = 0.2)]
        breaking_prob: f64,
        #[arg(long, default_value_t = 0.4)]
        usage_density: f64,
        /// Directory for registry.json, manifest.json and usage.json.
        #[arg(long, value_name = "DIR")]
        output: PathBuf,
    },
}

#[derive(Debug, Args)]
struct GraphInput {
    #[arg(long, value_name = "PATH")]
    registry: PathBuf,
    /// Root manifest JSON.
    #[arg(long, value_name = "PATH", required_unless_present = "tree", conflicts_with = "tree")]
    manifest: Option<PathBuf>,
    /// `mvn dependency:tree` output.
    #[arg(long, value_name = "PATH", required_unless_present = "manifest")]
    tree: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

enum CliError {
    Input(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Internal(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Internal(m) => m,
        }
    }
}

/// Parses `argv` (program name first), runs the command, and returns the
/// process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match execute(cli.command) {
        Ok((bytes, target)) => {
            let written = match target {
                Some(path) => std::fs::write(&path, &bytes)
                    .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
                None => stdout.write_all(&bytes).map_err(|e| CliError::Internal(e.to_string())),
            };
            match written {
                Ok(()) => 0,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {}", e.message());
                    e.code()
                }
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.code()
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn load_graph(input: &GraphInput) -> Result<(RegistryIndex, DependencyGraph), CliError> {
    let reg = RegistryIndex::load(&input.registry).map_err(input_err)?;
    let graph = match (&input.manifest, &input.tree) {
        (Some(m), None) => {
            let manifest = RootManifest::load(m).map_err(input_err)?;
            resolve_graph(&manifest, &reg).map_err(|e| CliError::Input(format!("{}: {e}", m.display())))?
        }
        (None, Some(t)) => {
            let text = read(t)?;
            let tree = parse_dep_tree(&text).map_err(|e| CliError::Input(format!("{}: {e}", t.display())))?;
            restore_edges(&tree, &reg).map_err(|e| CliError::Input(format!("{}: {e}", t.display())))?
        }
        _ => return Err(CliError::Input("exactly one of --manifest or --tree is required".into())),
    };
    Ok((reg, graph))
}

fn input_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

type Rendered = (Vec<u8>, Option<PathBuf>);

fn execute(command: Command) -> Result<Rendered, CliError> {
    match command {
        Command::Plan { input, usage, output } => {
            let (reg, graph) = load_graph(&input)?;
            let usage = UsageModel::load(&usage).map_err(input_err)?;
            let plan = plan_upgrades(&graph, &reg, &usage).map_err(input_err)?;
            check_plan(&plan)?;
            Ok((render_plan(&plan, output.format), output.output))
        }
        Command::Baseline { input, output } => {
            let (reg, graph) = load_graph(&input)?;
            let plan = baseline_direct_latest(&graph, &reg).map_err(input_err)?;
            check_plan(&plan)?;
            Ok((render_plan(&plan, output.format), output.output))
        }
        Command::Report { input, output } => {
            let (reg, graph) = load_graph(&input)?;
            let m = graph_metrics(&graph, &reg).map_err(input_err)?;
            let bytes = match output.format {
                Format::Json => json_sorted(&m),
                Format::Text => format_table(
                    &["node_count", "total_version_lag", "total_time_lag_days"],
                    &[[
                        m.node_count.to_string(),
                        m.total_version_lag.to_string(),
                        m.total_time_lag_days.to_string(),
                    ]],
                ),
            };
            Ok((bytes.into_bytes(), output.output))
        }
        Command::Verify {
            plan,
            input,
            usage,
            output,
        } => {
            let plan_text = read(&plan)?;
            let saved = UpgradePlan::from_json(&plan_text)
                .map_err(|e| CliError::Input(format!("malformed plan {}: {e}", plan.display())))?;
            let (reg, graph) = load_graph(&input)?;
            let usage = UsageModel::load(&usage).map_err(input_err)?;
            let verdict = oracle_verify_plan(&saved, &graph, &reg, &usage);
            if !verdict.passed() {
                let lines: Vec<String> = verdict
                    .divergences
                    .iter()
                    .map(|d| {
                        let at = match (&d.decision, &d.package) {
                            (Some(i), Some(p)) => format!("decision {i} ({p}): "),
                            (Some(i), None) => format!("decision {i}: "),
                            (None, Some(p)) => format!("{p}: "),
                            (None, None) => String::new(),
                        };
                        format!("{at}{}", d.message)
                    })
                    .collect();
                return Err(CliError::Input(format!(
                    "plan {} failed verification\n  {}",
                    plan.display(),
                    lines.join("\n  ")
                )));
            }
            let bytes = match output.format {
                Format::Json => json_sorted(&serde_json::json!({
                    "passed": true,
                    "decisions": saved.decisions.len(),
                })),
                Format::Text => format!("pass: {} decisions verified\n", saved.decisions.len()),
            };
            Ok((bytes.into_bytes(), output.output))
        }
        Command::Gen {
            seed,
            packages,
            max_versions,
            breaking_prob,
            usage_density,
            output,
        } => {
            let params = EcosystemParams {
                seed,
                package_count: packages,
                max_versions,
                breaking_probability: breaking_prob,
                usage_density,
                ..EcosystemParams::default()
            };
            let eco = gen_ecosystem(&params).map_err(input_err)?;
            eco.write_bundle(&output)
                .map_err(|e| CliError::Input(format!("cannot write bundle to {}: {e}", output.display())))?;
            let listing = [crate::harness::REGISTRY_FILE, crate::harness::MANIFEST_FILE, crate::harness::USAGE_FILE]
                .iter()
                .map(|f| format!("{}\n", output.join(f).display()))
                .collect::<String>();
            Ok((listing.into_bytes(), None))
        }
    }
}

/// Invariants every emitted plan must satisfy.
fn check_plan(plan: &UpgradePlan) -> Result<(), CliError> {
    for d in &plan.decisions {
        let ok = match d.outcome {
            Outcome::Upgraded => d.to_version > d.from_version,
            _ => d.to_version == d.from_version,
        } && d.rejected.iter().all(|r| r.version > d.from_version);
        if !ok {
            return Err(CliError::Internal(format!(
                "internal error: inconsistent decision for {} ({} -> {}, {})",
                d.package,
                d.from_version,
                d.to_version,
                d.outcome.as_str()
            )));
        }
    }
    Ok(())
}

fn json_sorted<T: serde::Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable");
    serde_json::to_string_pretty(&v).expect("serializable") + "\n"
}

fn render_plan(plan: &UpgradePlan, format: Format) -> Vec<u8> {
    match format {
        Format::Json => plan.to_json().into_bytes(),
        Format::Text => {
            let (b, a) = (&plan.metrics_before, &plan.metrics_after);
            let summary = format_table(
                &["mode", "nodes", "version_lag", "reduced_version_lag", "time_lag_days", "deps", "reduced_deps"],
                &[[
                    plan.mode.as_str().to_string(),
                    plan.decisions.len().to_string(),
                    b.total_version_lag.to_string(),
                    (b.total_version_lag as i64 - a.total_version_lag as i64).to_string(),
                    b.total_time_lag_days.to_string(),
                    b.node_count.to_string(),
                    (b.node_count as i64 - a.node_count as i64).to_string(),
                ]],
            );
            let rows: Vec<[String; 5]> = plan
                .decisions
                .iter()
                .map(|d| {
                    let rejected = d
                        .rejected
                        .iter()
                        .map(|r| match r.reason {
                            crate::planner::RejectReason::Debloat => format!("{}(debloat)", r.version),
                            crate::planner::RejectReason::Incompatible => {
                                let ev: Vec<String> = r.evidence.iter().map(ToString::to_string).collect();
                                format!("{}(incompatible: {})", r.version, ev.join(" "))
                            }
                        })
                        .collect::<Vec<_>>()
                        .join(", ");
                    [
                        d.package.to_string(),
                        d.from_version.to_string(),
                        d.to_version.to_string(),
                        d.outcome.as_str().to_string(),
                        rejected,
                    ]
                })
                .collect();
            let decisions = format_table(&["package", "from", "to", "outcome", "rejected"], &rows);
            format!("{summary}\n{decisions}").into_bytes()
        }
    }
}
