//! End-to-end run: parse, validate, execute, record history, render.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SubsecRound, Utc};

use crate::config::{parse_config, ConfigError};
use crate::engine::{build_graph, execute, Data, ExecEnv, ExecutionGraph, ExecutionResult, NodeOutcome, Registry, Verdict};
use crate::history::{append_snapshot_locked, HistoryError, StoreLock};
use crate::assess::Color;
use crate::report::{render_report, ReportData, ReportError};
use crate::scope::ResourceNode;

pub const REPORT_TITLE: &str = "Quality report";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("cannot read configuration {path}: {source}")]
    ConfigUnreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {error}")]
    Config { path: PathBuf, error: ConfigError },
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl RunError {
    /// 1 for configuration errors, 2 for everything that broke the run.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::ConfigUnreadable { .. } | RunError::Config { .. } => 1,
            RunError::History(_) | RunError::Report(_) => 2,
        }
    }
}

/// Reads, parses, expands and validates a pipeline file.
pub fn load_graph(config_path: &Path, registry: &Registry) -> Result<ExecutionGraph, RunError> {
    let text = fs::read_to_string(config_path).map_err(|source| RunError::ConfigUnreadable {
        path: config_path.to_path_buf(),
        source,
    })?;
    let config_err = |error| RunError::Config {
        path: config_path.to_path_buf(),
        error,
    };
    let config = parse_config(&text).map_err(config_err)?;
    build_graph(&config, registry).map_err(config_err)
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub project: PathBuf,
    pub out_dir: PathBuf,
    pub history_file: Option<PathBuf>,
    pub run_id: Option<String>,
    /// Pins the report and history timestamp; defaults to now.
    pub timestamp: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Success,
    ExecutionFailure,
    BlockingRed,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::ExecutionFailure => 2,
            RunStatus::BlockingRed => 3,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub graph: ExecutionGraph,
    pub execution: ExecutionResult,
    pub status: RunStatus,
    /// Blocking verdicts that came out RED.
    pub blocking_red: Vec<Verdict>,
    pub report_files: Vec<PathBuf>,
    /// Warnings not tied to a processor (history, etc.).
    pub warnings: Vec<String>,
}

pub fn run_pipeline(opts: &RunOptions, registry: &Registry) -> Result<RunOutcome, RunError> {
    let graph = load_graph(&opts.config, registry)?;
    let timestamp = opts.timestamp.unwrap_or_else(Utc::now).trunc_subsecs(0);
    let config_dir = opts
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let mut env = ExecEnv::new(&opts.project, config_dir, timestamp);
    if let Some(id) = &opts.run_id {
        env.run_id = id.clone();
    }
    env.history_store = opts.history_file.clone();

    // Held for the whole run so concurrent runs fail before doing work.
    let lock = match &opts.history_file {
        Some(store) => Some(StoreLock::acquire(store)?),
        None => None,
    };

    let execution = execute(&graph, registry, &env);
    let mut warnings = Vec::new();

    if let Some(lock) = &lock {
        let records = collect_snapshot(&graph, &execution, &mut warnings);
        if !records.is_empty() {
            warnings.extend(append_snapshot_locked(lock, &env.run_id, timestamp, &records)?);
        }
    }
    drop(lock);

    let data = assemble_report(&graph, &execution, timestamp);
    let report_files = render_report(&data, &graph.views, &opts.out_dir)?;

    let blocking_red: Vec<Verdict> = execution
        .outcomes
        .iter()
        .filter_map(|(_, o)| o.outputs())
        .flat_map(|o| o.values())
        .filter_map(|d| match d {
            Data::Verdict(v) if v.blocking && v.color == Color::Red => Some((**v).clone()),
            _ => None,
        })
        .collect();
    let status = if execution.has_failures() {
        RunStatus::ExecutionFailure
    } else if !blocking_red.is_empty() {
        RunStatus::BlockingRed
    } else {
        RunStatus::Success
    };
    Ok(RunOutcome {
        graph,
        execution,
        status,
        blocking_red,
        report_files,
        warnings,
    })
}

/// Snapshot records of all successful recorders, first one wins on clashes.
fn collect_snapshot(graph: &ExecutionGraph, execution: &ExecutionResult, warnings: &mut Vec<String>) -> Vec<(String, String, f64)> {
    let mut seen = BTreeSet::new();
    let mut records = Vec::new();
    for id in &graph.order {
        let Some(outputs) = execution.get(id).and_then(NodeOutcome::outputs) else {
            continue;
        };
        for d in outputs.values() {
            let Data::Snapshot(s) = d else { continue };
            for r in &s.records {
                if seen.insert((r.0.clone(), r.1.clone())) {
                    records.push(r.clone());
                } else {
                    warnings.push(format!(
                        "`{}` of `{}` recorded twice; `{id}` ignored",
                        r.1,
                        if r.0.is_empty() { "<root>" } else { &r.0 }
                    ));
                }
            }
        }
    }
    records
}

/// Merges the outputs of `output` processors (in execution order) into the
/// data the report is rendered from.
pub fn assemble_report(graph: &ExecutionGraph, execution: &ExecutionResult, timestamp: DateTime<Utc>) -> ReportData {
    let mut data = ReportData::new(REPORT_TITLE, timestamp, ResourceNode::root());
    let mut tree: Option<ResourceNode> = None;
    for id in &graph.outputs {
        let Some(outputs) = execution.get(id).and_then(NodeOutcome::outputs) else {
            continue;
        };
        for d in outputs.values() {
            match d {
                Data::Tree(t) => match &mut tree {
                    None => tree = Some(t.root.clone()),
                    Some(base) => base.merge_from(&t.root),
                },
                Data::Clones(c) if data.clones.is_none() => data.clones = Some((**c).clone()),
                Data::Architecture(a) if data.architecture.is_none() => data.architecture = Some((**a).clone()),
                Data::Trend(t) => data.trends.push((**t).clone()),
                Data::Treemap(t) => data.treemaps.push((**t).clone()),
                _ => {}
            }
        }
    }
    if let Some(t) = tree {
        data.tree = t;
    }
    for (id, o) in &execution.outcomes {
        match o {
            NodeOutcome::Success { .. } => {}
            NodeOutcome::Failed(e) => data.diagnostics.push(format!("processor `{id}` FAILED: {}", e.cause)),
            NodeOutcome::FailedUpstream { failed_producers } => data.diagnostics.push(format!(
                "processor `{id}` FAILED_UPSTREAM (after {})",
                failed_producers.join(", ")
            )),
        }
    }
    let warnings = execution.warnings().count();
    if warnings > 0 {
        data.diagnostics.push(format!("{warnings} processor warning(s); see the run log"));
    }
    data
}
