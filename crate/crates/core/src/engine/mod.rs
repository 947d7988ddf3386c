//! Processor registry, execution graph and sequential fail-soft executor.

mod processors;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, Utc};

use crate::arch::Conformance;
use crate::assess::Color;
use crate::clones::CloneReport;
use crate::config::{expand_blocks, ConfigError, PipelineConfig, Reference, Value};
use crate::report::{TreemapSpec, TrendEntry, ViewSpec};
use crate::scope::{ProfileSet, ResourceNode};

pub use processors::builtin_descriptors;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DataType {
    Tree,
    Clones,
    Architecture,
    Snapshot,
    Trend,
    Verdict,
    Treemap,
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataType::Tree => "tree",
            DataType::Clones => "clones",
            DataType::Architecture => "architecture",
            DataType::Snapshot => "snapshot",
            DataType::Trend => "trend",
            DataType::Verdict => "verdict",
            DataType::Treemap => "treemap",
        })
    }
}

/// A resource tree together with the profiles it was tokenized with.
#[derive(Debug, Clone)]
pub struct TreeData {
    pub root: ResourceNode,
    pub profiles: Arc<ProfileSet>,
}

/// Metric records destined for the history store.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Snapshot {
    /// (entity, metric, value)
    pub records: Vec<(String, String, f64)>,
}

/// A quality verdict that may gate the run.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub source: String,
    pub metric: String,
    pub color: Color,
    pub blocking: bool,
}

#[derive(Debug, Clone)]
pub enum Data {
    Tree(Arc<TreeData>),
    Clones(Arc<CloneReport>),
    Architecture(Arc<Conformance>),
    Snapshot(Arc<Snapshot>),
    Trend(Arc<TrendEntry>),
    Verdict(Arc<Verdict>),
    Treemap(Arc<TreemapSpec>),
}

impl Data {
    pub fn data_type(&self) -> DataType {
        match self {
            Data::Tree(_) => DataType::Tree,
            Data::Clones(_) => DataType::Clones,
            Data::Architecture(_) => DataType::Architecture,
            Data::Snapshot(_) => DataType::Snapshot,
            Data::Trend(_) => DataType::Trend,
            Data::Verdict(_) => DataType::Verdict,
            Data::Treemap(_) => DataType::Treemap,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamType {
    String,
    Integer,
    Float,
    Boolean,
    StringList,
    Ref(DataType),
}

impl fmt::Display for ParamType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamType::String => f.write_str("string"),
            ParamType::Integer => f.write_str("integer"),
            ParamType::Float => f.write_str("float"),
            ParamType::Boolean => f.write_str("boolean"),
            ParamType::StringList => f.write_str("string-list"),
            ParamType::Ref(t) => write!(f, "@{t}"),
        }
    }
}

impl ParamType {
    fn accepts(&self, v: &Value) -> bool {
        matches!(
            (self, v),
            (ParamType::String, Value::Str(_))
                | (ParamType::Integer, Value::Int(_))
                | (ParamType::Float, Value::Float(_) | Value::Int(_))
                | (ParamType::Boolean, Value::Bool(_))
                | (ParamType::StringList, Value::StrList(_))
                | (ParamType::Ref(_), Value::Ref(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub ty: ParamType,
    pub required: bool,
    pub default: Option<Value>,
    /// Allowed values of a string parameter.
    pub choices: Option<Vec<String>>,
}

impl ParamSpec {
    pub fn required(name: &str, ty: ParamType) -> Self {
        ParamSpec {
            name: name.into(),
            ty,
            required: true,
            default: None,
            choices: None,
        }
    }

    pub fn optional(name: &str, ty: ParamType, default: Option<Value>) -> Self {
        ParamSpec {
            name: name.into(),
            ty,
            required: false,
            default,
            choices: None,
        }
    }

    pub fn with_choices(mut self, choices: &[&str]) -> Self {
        self.choices = Some(choices.iter().map(|c| c.to_string()).collect());
        self
    }
}

pub type Outputs = BTreeMap<String, Data>;
pub type Executor = Arc<dyn Fn(&mut ProcessorContext<'_>) -> Result<Outputs, String> + Send + Sync>;

#[derive(Clone)]
pub struct ProcessorDescriptor {
    pub kind: String,
    pub description: String,
    pub params: Vec<ParamSpec>,
    pub outputs: Vec<(String, DataType)>,
    pub executor: Executor,
}

impl fmt::Debug for ProcessorDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProcessorDescriptor")
            .field("kind", &self.kind)
            .field("params", &self.params)
            .field("outputs", &self.outputs)
            .finish_non_exhaustive()
    }
}

impl ProcessorDescriptor {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn output_type(&self, port: &str) -> Option<DataType> {
        self.outputs.iter().find(|(p, _)| p == port).map(|(_, t)| *t)
    }

    /// One catalog line: kind, parameter schema, output ports.
    pub fn catalog_line(&self) -> String {
        let params: Vec<String> = self
            .params
            .iter()
            .map(|p| {
                let mut s = format!("{}: {}", p.name, p.ty);
                if let Some(c) = &p.choices {
                    s.push_str(&format!(" {{{}}}", c.join("|")));
                }
                match (&p.default, p.required) {
                    (_, true) => s.push_str(" (required)"),
                    (Some(d), false) => s.push_str(&format!(" = {d}")),
                    (None, false) => s.push_str(" (optional)"),
                }
                s
            })
            .collect();
        let outputs: Vec<String> = self.outputs.iter().map(|(p, t)| format!("{p}: {t}")).collect();
        format!("{}\t({})\t-> {}", self.kind, params.join(", "), outputs.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegistryError {
    #[error("processor kind `{0}` is already registered")]
    DuplicateKind(String),
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    kinds: BTreeMap<String, ProcessorDescriptor>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry::default()
    }

    /// The shipped processor catalog.
    pub fn with_builtins() -> Self {
        let mut r = Registry::empty();
        for d in builtin_descriptors() {
            r.register(d).expect("builtin kinds are unique");
        }
        r
    }

    pub fn register(&mut self, descriptor: ProcessorDescriptor) -> Result<(), RegistryError> {
        if self.kinds.contains_key(&descriptor.kind) {
            return Err(RegistryError::DuplicateKind(descriptor.kind));
        }
        self.kinds.insert(descriptor.kind.clone(), descriptor);
        Ok(())
    }

    pub fn get(&self, kind: &str) -> Option<&ProcessorDescriptor> {
        self.kinds.get(kind)
    }

    /// Descriptors sorted by kind.
    pub fn list(&self) -> impl Iterator<Item = &ProcessorDescriptor> {
        self.kinds.values()
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn catalog(&self) -> String {
        self.list().map(|d| d.catalog_line() + "\n").collect()
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: String,
    pub kind: String,
    pub line: usize,
    /// Declared parameters plus defaults.
    pub params: BTreeMap<String, Value>,
    /// Producer ids this node reads from, sorted.
    pub producers: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExecutionGraph {
    pub nodes: BTreeMap<String, Node>,
    /// (producer, consumer), sorted, without duplicates.
    pub edges: Vec<(String, String)>,
    pub order: Vec<String>,
    /// Ids marked with `output`; all nodes when the config marks none.
    pub outputs: Vec<String>,
    pub views: Vec<ViewSpec>,
}

impl ExecutionGraph {
    pub fn is_output(&self, id: &str) -> bool {
        self.outputs.iter().any(|o| o == id)
    }
}

/// Validates a configuration against the registry and orders it.
/// Block instances are expanded first if present.
pub fn build_graph(config: &PipelineConfig, registry: &Registry) -> Result<ExecutionGraph, ConfigError> {
    let expanded;
    let config = if config.is_flat() {
        config
    } else {
        expanded = expand_blocks(config)?;
        &expanded
    };

    let decls: BTreeMap<&str, _> = config.processors().map(|p| (p.id.as_str(), p)).collect();
    let mut nodes = BTreeMap::new();
    let mut edges = BTreeSet::new();
    for decl in config.processors() {
        let descriptor = registry.get(&decl.kind).ok_or_else(|| ConfigError::UnknownProcessorKind {
            id: decl.id.clone(),
            kind: decl.kind.clone(),
            line: decl.line,
        })?;
        let mut params = BTreeMap::new();
        for (name, v) in &decl.params {
            let spec = descriptor.param(name).ok_or_else(|| ConfigError::UnknownParam {
                id: decl.id.clone(),
                kind: decl.kind.clone(),
                param: name.clone(),
                line: v.line,
            })?;
            let mismatch = |expected: String, found: String| ConfigError::ParamTypeMismatch {
                id: decl.id.clone(),
                param: name.clone(),
                expected,
                found,
                line: v.line,
            };
            if !spec.ty.accepts(&v.value) {
                return Err(mismatch(spec.ty.to_string(), v.value.type_name().to_string()));
            }
            if let (Some(choices), Value::Str(s)) = (&spec.choices, &v.value) {
                if !choices.contains(s) {
                    return Err(mismatch(format!("one of {}", choices.join(", ")), format!("\"{s}\"")));
                }
            }
            if let (ParamType::Ref(want), Value::Ref(r)) = (&spec.ty, &v.value) {
                let producer = decls.get(r.producer.as_str()).ok_or_else(|| ConfigError::DanglingReference {
                    id: decl.id.clone(),
                    reference: r.to_string(),
                    target: r.producer.clone(),
                    line: v.line,
                })?;
                let port_type = registry
                    .get(&producer.kind)
                    .and_then(|d| d.output_type(&r.port))
                    .ok_or_else(|| ConfigError::DanglingReference {
                        id: decl.id.clone(),
                        reference: r.to_string(),
                        target: r.producer.clone(),
                        line: v.line,
                    })?;
                if port_type != *want {
                    return Err(mismatch(format!("@{want}"), format!("@{port_type} ({r})")));
                }
                edges.insert((r.producer.clone(), decl.id.clone()));
            }
            params.insert(name.clone(), v.value.clone());
        }
        for spec in &descriptor.params {
            if params.contains_key(&spec.name) {
                continue;
            }
            match &spec.default {
                Some(d) => {
                    params.insert(spec.name.clone(), d.clone());
                }
                None if spec.required => {
                    return Err(ConfigError::MissingRequiredParam {
                        id: decl.id.clone(),
                        param: spec.name.clone(),
                        line: decl.line,
                    })
                }
                None => {}
            }
        }
        let producers: BTreeSet<String> = decl.references().map(|(_, r)| r.producer.clone()).collect();
        nodes.insert(
            decl.id.clone(),
            Node {
                id: decl.id.clone(),
                kind: decl.kind.clone(),
                line: decl.line,
                params,
                producers: producers.into_iter().collect(),
            },
        );
    }

    for o in &config.outputs {
        if !nodes.contains_key(&o.value) {
            return Err(ConfigError::UnknownOutput {
                id: o.value.clone(),
                line: o.line,
            });
        }
    }
    let views = config
        .views
        .iter()
        .map(ViewSpec::from_decl)
        .collect::<Result<Vec<_>, _>>()?;

    let order = topological_order(&nodes)?;
    let outputs = if config.outputs.is_empty() {
        order.clone()
    } else {
        let marked: BTreeSet<&str> = config.outputs.iter().map(|o| o.value.as_str()).collect();
        order.iter().filter(|id| marked.contains(id.as_str())).cloned().collect()
    };
    Ok(ExecutionGraph {
        nodes,
        edges: edges.into_iter().collect(),
        order,
        outputs,
        views,
    })
}

/// Kahn's algorithm with the lexicographically smallest ready node first.
fn topological_order(nodes: &BTreeMap<String, Node>) -> Result<Vec<String>, ConfigError> {
    let mut indegree: BTreeMap<&str, usize> = nodes.keys().map(|k| (k.as_str(), 0)).collect();
    let mut consumers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for n in nodes.values() {
        for p in &n.producers {
            *indegree.get_mut(n.id.as_str()).expect("node") += 1;
            consumers.entry(p.as_str()).or_default().push(&n.id);
        }
    }
    let mut ready: BTreeSet<&str> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&k, _)| k).collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(next) = ready.pop_first() {
        order.push(next.to_string());
        for &c in consumers.get(next).map(Vec::as_slice).unwrap_or(&[]) {
            let d = indegree.get_mut(c).expect("node");
            *d -= 1;
            if *d == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() == nodes.len() {
        return Ok(order);
    }
    // Every node left has a producer that is also left: walk producers
    // until a node repeats.
    let done: BTreeSet<&str> = order.iter().map(String::as_str).collect();
    let left = |id: &str| !done.contains(id);
    let start = nodes.keys().find(|k| left(k)).expect("remaining node");
    let mut walk: Vec<&str> = vec![start];
    let mut pos: BTreeMap<&str, usize> = BTreeMap::from([(start.as_str(), 0)]);
    loop {
        let cur = *walk.last().expect("non-empty");
        let prev = nodes[cur]
            .producers
            .iter()
            .find(|p| left(p))
            .expect("remaining node has a remaining producer");
        if let Some(&i) = pos.get(prev.as_str()) {
            // walk[i..] followed backwards is the cycle.
            let mut cycle: Vec<String> = walk[i..].iter().rev().map(|s| s.to_string()).collect();
            let min = cycle
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            cycle.rotate_left(min);
            cycle.push(cycle[0].clone());
            return Err(ConfigError::CycleDetected { path: cycle });
        }
        pos.insert(prev, walk.len());
        walk.push(prev);
    }
}

/// Run-wide settings shared by all processors.
#[derive(Debug, Clone)]
pub struct ExecEnv {
    pub project_root: PathBuf,
    /// Directory that relative auxiliary file paths are resolved against.
    pub config_dir: PathBuf,
    pub history_store: Option<PathBuf>,
    pub run_id: String,
    pub timestamp: DateTime<Utc>,
}

impl ExecEnv {
    pub fn new(project_root: impl Into<PathBuf>, config_dir: impl Into<PathBuf>, timestamp: DateTime<Utc>) -> Self {
        ExecEnv {
            project_root: project_root.into(),
            config_dir: config_dir.into(),
            history_store: None,
            run_id: timestamp.format("%Y%m%dT%H%M%SZ").to_string(),
            timestamp,
        }
    }
}

/// What a processor sees while it runs.
pub struct ProcessorContext<'a> {
    pub id: &'a str,
    pub env: &'a ExecEnv,
    params: &'a BTreeMap<String, Value>,
    inputs: BTreeMap<String, Data>,
    warnings: Vec<String>,
}

impl<'a> ProcessorContext<'a> {
    pub fn param(&self, name: &str) -> Option<&Value> {
        self.params.get(name)
    }

    pub fn str(&self, name: &str) -> Result<&str, String> {
        self.opt_str(name).ok_or_else(|| format!("parameter `{name}` is not set"))
    }

    pub fn opt_str(&self, name: &str) -> Option<&str> {
        self.params.get(name).and_then(Value::as_str)
    }

    pub fn int(&self, name: &str) -> Result<i64, String> {
        self.params
            .get(name)
            .and_then(Value::as_i64)
            .ok_or_else(|| format!("parameter `{name}` is not set"))
    }

    pub fn float(&self, name: &str) -> Result<f64, String> {
        self.params
            .get(name)
            .and_then(Value::as_f64)
            .ok_or_else(|| format!("parameter `{name}` is not set"))
    }

    pub fn opt_float(&self, name: &str) -> Option<f64> {
        self.params.get(name).and_then(Value::as_f64)
    }

    pub fn bool(&self, name: &str) -> Result<bool, String> {
        self.params
            .get(name)
            .and_then(Value::as_bool)
            .ok_or_else(|| format!("parameter `{name}` is not set"))
    }

    pub fn list(&self, name: &str) -> Result<&[String], String> {
        self.params
            .get(name)
            .and_then(Value::as_list)
            .ok_or_else(|| format!("parameter `{name}` is not set"))
    }

    pub fn input(&self, name: &str) -> Result<&Data, String> {
        self.inputs
            .get(name)
            .ok_or_else(|| format!("input `{name}` is not connected"))
    }

    pub fn tree(&self, name: &str) -> Result<Arc<TreeData>, String> {
        match self.input(name)? {
            Data::Tree(t) => Ok(t.clone()),
            other => Err(format!("input `{name}` is {}, not a tree", other.data_type())),
        }
    }

    pub fn snapshot(&self, name: &str) -> Result<Arc<Snapshot>, String> {
        match self.input(name)? {
            Data::Snapshot(s) => Ok(s.clone()),
            other => Err(format!("input `{name}` is {}, not a snapshot", other.data_type())),
        }
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn warn_all(&mut self, messages: impl IntoIterator<Item = String>) {
        self.warnings.extend(messages);
    }

    /// Resolves a path parameter relative to the configuration directory.
    pub fn config_path(&self, value: &str) -> PathBuf {
        self.env.config_dir.join(value)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("processor `{id}` failed: {cause}")]
pub struct ProcessorError {
    pub id: String,
    pub cause: String,
}

#[derive(Debug, Clone)]
pub enum NodeOutcome {
    Success { outputs: Outputs, warnings: Vec<String> },
    Failed(ProcessorError),
    /// Skipped because a producer failed (directly or transitively).
    FailedUpstream { failed_producers: Vec<String> },
}

impl NodeOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, NodeOutcome::Success { .. })
    }

    pub fn outputs(&self) -> Option<&Outputs> {
        match self {
            NodeOutcome::Success { outputs, .. } => Some(outputs),
            _ => None,
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            NodeOutcome::Success { .. } => "OK",
            NodeOutcome::Failed(_) => "FAILED",
            NodeOutcome::FailedUpstream { .. } => "FAILED_UPSTREAM",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExecutionResult {
    /// Outcomes in execution order.
    pub outcomes: Vec<(String, NodeOutcome)>,
}

impl ExecutionResult {
    pub fn get(&self, id: &str) -> Option<&NodeOutcome> {
        self.outcomes.iter().find(|(i, _)| i == id).map(|(_, o)| o)
    }

    pub fn has_failures(&self) -> bool {
        self.outcomes.iter().any(|(_, o)| !o.is_success())
    }

    pub fn warnings(&self) -> impl Iterator<Item = (&str, &str)> {
        self.outcomes.iter().flat_map(|(id, o)| match o {
            NodeOutcome::Success { warnings, .. } => warnings.iter().map(|w| (id.as_str(), w.as_str())).collect(),
            _ => Vec::new(),
        })
    }
}

/// Runs every node once in topological order. A failing node does not stop
/// the run; its dependents are marked FAILED_UPSTREAM.
pub fn execute(graph: &ExecutionGraph, registry: &Registry, env: &ExecEnv) -> ExecutionResult {
    let mut result = ExecutionResult::default();
    let mut done: BTreeMap<&str, usize> = BTreeMap::new();
    for id in &graph.order {
        let node = &graph.nodes[id];
        let failed: Vec<String> = node
            .producers
            .iter()
            .filter(|p| done.get(p.as_str()).is_none_or(|&i| !result.outcomes[i].1.is_success()))
            .cloned()
            .collect();
        let outcome = if !failed.is_empty() {
            NodeOutcome::FailedUpstream {
                failed_producers: failed,
            }
        } else {
            run_node(node, registry, env, |r: &Reference| {
                done.get(r.producer.as_str())
                    .and_then(|&i| result.outcomes[i].1.outputs())
                    .and_then(|o| o.get(&r.port))
                    .cloned()
            })
        };
        done.insert(id, result.outcomes.len());
        result.outcomes.push((id.clone(), outcome));
    }
    result
}

fn run_node(
    node: &Node,
    registry: &Registry,
    env: &ExecEnv,
    lookup: impl Fn(&Reference) -> Option<Data>,
) -> NodeOutcome {
    let fail = |cause: String| {
        NodeOutcome::Failed(ProcessorError {
            id: node.id.clone(),
            cause,
        })
    };
    let Some(descriptor) = registry.get(&node.kind) else {
        return fail(format!("unknown processor kind `{}`", node.kind));
    };
    let mut inputs = BTreeMap::new();
    for (name, v) in &node.params {
        if let Value::Ref(r) = v {
            match lookup(r) {
                Some(d) => {
                    inputs.insert(name.clone(), d);
                }
                None => return fail(format!("producer did not emit `{r}`")),
            }
        }
    }
    let mut ctx = ProcessorContext {
        id: &node.id,
        env,
        params: &node.params,
        inputs,
        warnings: Vec::new(),
    };
    let run = panic::catch_unwind(AssertUnwindSafe(|| (descriptor.executor)(&mut ctx)));
    match run {
        Ok(Ok(outputs)) => {
            for (port, ty) in &descriptor.outputs {
                match outputs.get(port) {
                    Some(d) if d.data_type() == *ty => {}
                    Some(d) => return fail(format!("output `{port}` has type {}, expected {ty}", d.data_type())),
                    None => return fail(format!("output `{port}` was not produced")),
                }
            }
            let mut warnings = ctx.warnings;
            warnings.dedup();
            NodeOutcome::Success { outputs, warnings }
        }
        Ok(Err(cause)) => fail(cause),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(format!("internal error: {msg}"))
        }
    }
}
