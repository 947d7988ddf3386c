use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};

use conquard_core::driver::{load_graph, run_pipeline, RunOptions};
use conquard_core::engine::{NodeOutcome, Registry};

/// Continuous quality control: run analysis pipelines and render dashboards.
#[derive(Parser, Debug)]
#[command(name = "conquard", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute a pipeline and write the HTML report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        project: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        history_file: Option<PathBuf>,
        /// Defaults to the run timestamp.
        #[arg(long)]
        run_id: Option<String>,
        /// Validate only, like `validate`.
        #[arg(long)]
        dry_run: bool,
        /// Pin the run timestamp (RFC 3339), for reproducible reports.
        #[arg(long, value_parser = parse_timestamp)]
        timestamp: Option<DateTime<Utc>>,
        /// Do not print processor warnings.
        #[arg(short, long)]
        quiet: bool,
    },
    /// Check a pipeline statically without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the processor catalog.
    ListProcessors,
}

fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("expected an RFC 3339 timestamp such as 2024-01-31T02:00:00Z: {e}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let registry = Registry::with_builtins();
    let code = match cli.command {
        Command::ListProcessors => {
            print!("{}", registry.catalog());
            0
        }
        Command::Validate { config } => validate(&config, &registry),
        Command::Run {
            config,
            dry_run: true,
            ..
        } => validate(&config, &registry),
        Command::Run {
            config,
            project,
            out,
            history_file,
            run_id,
            timestamp,
            quiet,
            dry_run: false,
        } => match (project, out) {
            (Some(project), Some(out)) => run(
                RunOptions {
                    config,
                    project,
                    out_dir: out,
                    history_file,
                    run_id,
                    timestamp,
                },
                quiet,
                &registry,
            ),
            _ => {
                eprintln!("error: `run` needs --project and --out (or --dry-run)");
                1
            }
        },
    };
    ExitCode::from(code as u8)
}

fn validate(config: &Path, registry: &Registry) -> i32 {
    match load_graph(config, registry) {
        Ok(g) => {
            println!(
                "OK: {} processors, {} edges, {} outputs, {} views",
                g.nodes.len(),
                g.edges.len(),
                g.outputs.len(),
                g.views.len()
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(opts: RunOptions, quiet: bool, registry: &Registry) -> i32 {
    let outcome = match run_pipeline(&opts, registry) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    for (id, o) in &outcome.execution.outcomes {
        match o {
            NodeOutcome::Success { warnings, .. } => {
                if !quiet {
                    for w in warnings {
                        eprintln!("warning: [{id}] {w}");
                    }
                }
            }
            NodeOutcome::Failed(e) => eprintln!("error: {e}"),
            NodeOutcome::FailedUpstream { failed_producers } => {
                eprintln!("error: processor `{id}` skipped: upstream failure in {}", failed_producers.join(", "))
            }
        }
    }
    if !quiet {
        for w in &outcome.warnings {
            eprintln!("warning: {w}");
        }
    }
    for v in &outcome.blocking_red {
        eprintln!("blocking: `{}` is RED for {}", v.source, v.metric);
    }
    eprintln!(
        "{} processors run, report written to {}",
        outcome.execution.outcomes.len(),
        opts.out_dir.display()
    );
    outcome.status.exit_code()
}
