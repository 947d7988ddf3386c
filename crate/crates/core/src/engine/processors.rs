//! The shipped processor catalog.

use std::collections::BTreeMap;
use std::fs;
use std::sync::Arc;

use super::{
    Data, DataType, Outputs, ParamSpec, ParamType, ProcessorContext, ProcessorDescriptor, Snapshot, TreeData, Verdict,
};
use crate::arch::{check_conformance, extract_dependencies, ArchitectureSpec, ARCH_VIOLATIONS};
use crate::assess::{aggregate_assessments, aggregate_values, assess, AggregationOp, Color, Direction, ThresholdRule};
use crate::clones::{analyze, CorpusFile, CLONE_RATIO, DEFAULT_MIN_LENGTH};
use crate::config::Value;
use crate::glob::PathFilter;
use crate::history::{assess_trend, read_store, TrendKind, TrendPoint, TrendRule, TrendSeries};
use crate::metrics::{
    compute_size_metrics, compute_structure_metrics, COMMENT_RATIO, CONDITION_RATIO, CYCLOMATIC, LOC, NESTING_MAX,
    PROC_AVG_LENGTH, PROC_COUNT, SLOC,
};
use crate::report::{TreemapSpec, TrendEntry};
use crate::scope::{scan, ProfileSet, ResourceNode};

type Exec = fn(&mut ProcessorContext<'_>) -> Result<Outputs, String>;

fn descriptor(kind: &str, description: &str, params: Vec<ParamSpec>, outputs: &[(&str, DataType)], exec: Exec) -> ProcessorDescriptor {
    ProcessorDescriptor {
        kind: kind.into(),
        description: description.into(),
        params,
        outputs: outputs.iter().map(|(p, t)| (p.to_string(), *t)).collect(),
        executor: Arc::new(exec),
    }
}

fn tree_in() -> ParamSpec {
    ParamSpec::required("input", ParamType::Ref(DataType::Tree))
}

fn s(v: &str) -> Option<Value> {
    Some(Value::Str(v.into()))
}

fn list(v: &[&str]) -> Option<Value> {
    Some(Value::StrList(v.iter().map(|x| x.to_string()).collect()))
}

pub fn builtin_descriptors() -> Vec<ProcessorDescriptor> {
    use DataType::*;
    use ParamType as P;
    vec![
        descriptor(
            "scope-scanner",
            "scan the project directory into a resource tree",
            vec![
                ParamSpec::optional("root", P::String, s(".")),
                ParamSpec::optional("include", P::StringList, list(&[])),
                ParamSpec::optional("exclude", P::StringList, list(&[])),
                ParamSpec::optional("profiles", P::String, None),
            ],
            &[("tree", Tree)],
            scope_scanner,
        ),
        descriptor(
            "file-filter",
            "keep only files matching include and not exclude globs",
            vec![
                tree_in(),
                ParamSpec::optional("include", P::StringList, list(&[])),
                ParamSpec::optional("exclude", P::StringList, list(&[])),
            ],
            &[("tree", Tree)],
            file_filter,
        ),
        descriptor(
            "loc-analyzer",
            "loc, sloc and comment.ratio per file",
            vec![tree_in()],
            &[("tree", Tree)],
            loc_analyzer,
        ),
        descriptor(
            "structure-analyzer",
            "procedures, loop nesting, condition ratio and cyclomatic complexity per file",
            vec![tree_in()],
            &[("tree", Tree)],
            structure_analyzer,
        ),
        descriptor(
            "clone-detector",
            "token-based clone detection and cloning ratio",
            vec![
                tree_in(),
                ParamSpec::optional("min_length", P::Integer, Some(Value::Int(DEFAULT_MIN_LENGTH as i64))),
            ],
            &[("tree", Tree), ("report", Clones)],
            clone_detector,
        ),
        descriptor(
            "arch-checker",
            "check file dependencies against an architecture spec",
            vec![tree_in(), ParamSpec::required("spec", P::String)],
            &[("tree", Tree), ("report", Architecture)],
            arch_checker,
        ),
        descriptor(
            "metric-aggregator",
            "aggregate a metric up the tree",
            vec![
                tree_in(),
                ParamSpec::required("metric", P::String),
                ParamSpec::optional("op", P::String, s("SUM")).with_choices(AggregationOp::NAMES),
            ],
            &[("tree", Tree)],
            metric_aggregator,
        ),
        descriptor(
            "threshold-assessor",
            "traffic-light assessment of a metric by thresholds",
            vec![
                tree_in(),
                ParamSpec::required("metric", P::String),
                ParamSpec::optional("direction", P::String, s("HIGHER_IS_WORSE"))
                    .with_choices(&["HIGHER_IS_WORSE", "LOWER_IS_WORSE"]),
                ParamSpec::required("yellow", P::Float),
                ParamSpec::required("red", P::Float),
                ParamSpec::optional("op", P::String, None).with_choices(AggregationOp::NAMES),
                ParamSpec::optional("blocking", P::Boolean, Some(Value::Bool(false))),
            ],
            &[("tree", Tree), ("verdict", Verdict)],
            threshold_assessor,
        ),
        descriptor(
            "assessment-aggregator",
            "worst-wins aggregation of file assessments",
            vec![tree_in(), ParamSpec::required("metric", P::String)],
            &[("tree", Tree)],
            assessment_aggregator,
        ),
        descriptor(
            "history-recorder",
            "select metric values for the history store",
            vec![
                tree_in(),
                ParamSpec::required("metrics", P::StringList),
                ParamSpec::optional("entities", P::StringList, list(&[""])),
            ],
            &[("snapshot", Snapshot)],
            history_recorder,
        ),
        descriptor(
            "trend-assessor",
            "compare this run's value with the previous run",
            vec![
                ParamSpec::required("input", P::Ref(Snapshot)),
                ParamSpec::required("metric", P::String),
                ParamSpec::optional("entity", P::String, s("")),
                ParamSpec::optional("kind", P::String, s("MUST_NOT_INCREASE")).with_choices(&TrendKind::NAMES),
                ParamSpec::optional("tolerance", P::Float, Some(Value::Float(0.0))),
                ParamSpec::optional("blocking", P::Boolean, Some(Value::Bool(false))),
            ],
            &[("trend", Trend), ("verdict", Verdict)],
            trend_assessor,
        ),
        descriptor(
            "treemap-renderer",
            "tree map sized by one metric and colored by an assessment",
            vec![
                tree_in(),
                ParamSpec::optional("weight", P::String, s(LOC)),
                ParamSpec::optional("color", P::String, None),
            ],
            &[("treemap", Treemap)],
            treemap_renderer,
        ),
    ]
}

fn tree_out(root: ResourceNode, profiles: Arc<ProfileSet>) -> Data {
    Data::Tree(Arc::new(TreeData { root, profiles }))
}

fn single(port: &str, data: Data) -> Outputs {
    Outputs::from([(port.to_string(), data)])
}

fn scope_scanner(ctx: &mut ProcessorContext<'_>) -> Result<Outputs, String> {
    let mut profiles = ProfileSet::builtin();
    if let Some(p) = ctx.opt_str("profiles") {
        let path = ctx.config_path(p);
        let text = fs::read_to_string(&path).map_err(|e| format!("cannot read profiles {}: {e}", path.display()))?;
        let user = ProfileSet::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        profiles = profiles.with_overrides(user).map_err(|e| e.to_string())?;
    }
    let filter = PathFilter::new(ctx.list("include")?, ctx.list("exclude")?).map_err(|e| e.to_string())?;
    let root = ctx.env.project_root.join(ctx.str("root")?);
    let result = scan(&root, &filter, &profiles).map_err(|e| e.to_string())?;
    ctx.warn_all(result.warnings);
    Ok(single("tree", tree_out(result.tree, Arc::new(profiles))))
}

fn file_filter(ctx: &mut ProcessorContext<'_>) -> Result<Outputs, String> {
    let input = ctx.tree("input")?;
    let filter = PathFilter::new(ctx.list("include")?, ctx.list("exclude")?).map_err(|e| e.to_string())?;
    let root = input.root.filtered(&|f| filter.accepts(f.path()));
    Ok(single("tree", tree_out(root, input.profiles.clone())))
}

fn loc_analyzer(ctx: &mut ProcessorContext<'_>) -> Result<Outputs, String> {
    let input = ctx.tree("input")?;
    let mut root = input.root.clone();
    let mut warnings = Vec::new();
    root.visit_post_order_mut(&mut |n| {
        let Some(src) = n.source() else { return };
        let m = compute_size_metrics(&src.content, &src.stream);
        for (k, v) in [
            (LOC, m.loc as f64),
            (SLOC, m.sloc as f64),
            (COMMENT_RATIO, m.comment_ratio),
        ] {
            warnings.extend(n.attach_value(k, v));
        }
    });
    ctx.warn_all(warnings);
    Ok(single("tree", tree_out(root, input.profiles.clone())))
}

fn structure_analyzer(ctx: &mut ProcessorContext<'_>) -> Result<Outputs, String> {
    let input = ctx.tree("input")?;
    let profiles = input.profiles.clone();
    let mut root = input.root.clone();
    let mut warnings = Vec::new();
    root.visit_post_order_mut(&mut |n| {
        let (Some(src), Some(lang)) = (n.source(), n.language()) else {
            return;
        };
        let Some(profile) = profiles.get(lang) else { return };
        let m = compute_structure_metrics(&src.stream, profile);
        let path = n.path().to_string();
        warnings.extend(m.warnings.iter().map(|w| format!("{path}: {w}")));
        for (k, v) in [
            (PROC_COUNT, m.procedure_count as f64),
            (PROC_AVG_LENGTH, m.average_procedure_length),
            (NESTING_MAX, m.max_nesting as f64),
            (CONDITION_RATIO, m.condition_ratio),
            (CYCLOMATIC, m.cyclomatic as f64),
        ] {
            warnings.extend(n.attach_value(k, v));
        }
    });
    ctx.warn_all(warnings);
    Ok(single("tree", tree_out(root, profiles)))
}

fn clone_detector(ctx: &mut ProcessorContext<'_>) -> Result<Outputs, String> {
    let input = ctx.tree("input")?;
    let min = ctx.int("min_length")?;
    let min = usize::try_from(min).map_err(|_| format!("min_length must be positive, got {min}"))?;
    let corpus: Vec<CorpusFile<'_>> = input
        .root
        .files()
        .filter_map(|f| {
            f.source().map(|s| CorpusFile {
                path: f.path(),
                tokens: &s.stream.tokens,
            })
        })
        .collect();
    let (report, warnings) = analyze(&corpus, min).map_err(|e| e.to_string())?;
    ctx.warn_all(warnings);

    // Per node: cloned lines / sloc over the subtree.
    let mut root = input.root.clone();
    let mut sums: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut warnings = Vec::new();
    root.visit_post_order_mut(&mut |n| {
        let (cloned, sloc) = if let Some(src) = n.source() {
            let sloc = src.stream.code_lines().len();
            (report.cloned_lines.get(n.path()).map_or(0, |l| l.len()), sloc)
        } else if n.is_file() {
            return;
        } else {
            n.children()
                .iter()
                .filter_map(|c| sums.get(c.path()))
                .fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
        };
        sums.insert(n.path().to_string(), (cloned, sloc));
        warnings.extend(n.attach_value(CLONE_RATIO, cloned as f64 / sloc.max(1) as f64));
    });
    ctx.warn_all(warnings);
    Ok(Outputs::from([
        ("tree".to_string(), tree_out(root, input.profiles.clone())),
        ("report".to_string(), Data::Clones(Arc::new(report))),
    ]))
}

fn arch_checker(ctx: &mut ProcessorContext<'_>) -> Result<Outputs, String> {
    let input = ctx.tree("input")?;
    let path = ctx.config_path(ctx.str("spec")?);
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read architecture spec {}: {e}", path.display()))?;
    let spec = ArchitectureSpec::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let deps = extract_dependencies(&input.root, &input.profiles);
    let conformance = check_conformance(&deps, &spec).map_err(|e| e.to_string())?;
    let per_file = conformance.violations_by_file();
    let mut root = input.root.clone();
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    let mut warnings = Vec::new();
    root.visit_post_order_mut(&mut |n| {
        let v = if n.is_file() {
            per_file.get(n.path()).copied().unwrap_or(0) as f64
        } else {
            n.children().iter().filter_map(|c| sums.get(c.path())).sum()
        };
        sums.insert(n.path().to_string(), v);
        warnings.extend(n.attach_value(ARCH_VIOLATIONS, v));
    });
    ctx.warn_all(warnings);
    Ok(Outputs::from([
        ("tree".to_string(), tree_out(root, input.profiles.clone())),
        ("report".to_string(), Data::Architecture(Arc::new(conformance))),
    ]))
}

fn metric_aggregator(ctx: &mut ProcessorContext<'_>) -> Result<Outputs, String> {
    let input = ctx.tree("input")?;
    let metric = ctx.str("metric")?.to_string();
    let op: AggregationOp = ctx.str("op")?.parse().map_err(|e: crate::assess::AssessError| e.to_string())?;
    let mut root = input.root.clone();
    let warnings = aggregate_values(&mut root, &metric, op);
    ctx.warn_all(warnings);
    Ok(single("tree", tree_out(root, input.profiles.clone())))
}

fn threshold_assessor(ctx: &mut ProcessorContext<'_>) -> Result<Outputs, String> {
    let input = ctx.tree("input")?;
    let metric = ctx.str("metric")?.to_string();
    let direction: Direction = ctx.str("direction")?.parse().map_err(|e: crate::assess::AssessError| e.to_string())?;
    let rule = ThresholdRule::new(&metric, direction, ctx.float("yellow")?, ctx.float("red")?).map_err(|e| e.to_string())?;
    let op = match ctx.opt_str("op") {
        Some(o) => Some(o.parse::<AggregationOp>().map_err(|e| e.to_string())?),
        None => None,
    };
    let mut root = input.root.clone();
    let mut warnings = Vec::new();
    if let Some(op) = op {
        // Assess every node's own (aggregated) value.
        warnings.extend(aggregate_values(&mut root, &metric, op));
        root.visit_post_order_mut(&mut |n| {
            if let Some(v) = n.value(&metric) {
                warnings.extend(n.attach_assessment(&metric, assess(v, &rule)));
            }
        });
    } else {
        // Assess files, then worst-wins upwards.
        root.visit_post_order_mut(&mut |n| {
            if n.is_file() {
                if let Some(v) = n.value(&metric) {
                    warnings.extend(n.attach_assessment(&metric, assess(v, &rule)));
                }
            }
        });
        warnings.extend(aggregate_assessments(&mut root, &metric));
    }
    let color = root.assessment(&metric).map_or(Color::Green, |a| a.color);
    let verdict = Verdict {
        source: ctx.id.to_string(),
        metric,
        color,
        blocking: ctx.bool("blocking")?,
    };
    ctx.warn_all(warnings);
    Ok(Outputs::from([
        ("tree".to_string(), tree_out(root, input.profiles.clone())),
        ("verdict".to_string(), Data::Verdict(Arc::new(verdict))),
    ]))
}

fn assessment_aggregator(ctx: &mut ProcessorContext<'_>) -> Result<Outputs, String> {
    let input = ctx.tree("input")?;
    let metric = ctx.str("metric")?.to_string();
    let mut root = input.root.clone();
    let warnings = aggregate_assessments(&mut root, &metric);
    ctx.warn_all(warnings);
    Ok(single("tree", tree_out(root, input.profiles.clone())))
}

fn history_recorder(ctx: &mut ProcessorContext<'_>) -> Result<Outputs, String> {
    let input = ctx.tree("input")?;
    let metrics = ctx.list("metrics")?.to_vec();
    let entities = ctx.list("entities")?.to_vec();
    let mut snapshot = Snapshot::default();
    for entity in &entities {
        let Some(node) = input.root.find(entity) else {
            ctx.warn(format!("entity `{entity}` is not in the tree; nothing recorded for it"));
            continue;
        };
        for m in &metrics {
            match node.value(m) {
                Some(v) => snapshot.records.push((entity.clone(), m.clone(), v)),
                None => ctx.warn(format!("`{m}` is MISSING on `{}`; not recorded", node.display_path())),
            }
        }
    }
    Ok(single("snapshot", Data::Snapshot(Arc::new(snapshot))))
}

fn trend_assessor(ctx: &mut ProcessorContext<'_>) -> Result<Outputs, String> {
    let snapshot = ctx.snapshot("input")?;
    let metric = ctx.str("metric")?.to_string();
    let entity = ctx.str("entity")?.to_string();
    let kind: TrendKind = ctx.str("kind")?.parse()?;
    let rule = TrendRule::new(&metric, kind, ctx.float("tolerance")?)?;
    let blocking = ctx.bool("blocking")?;

    let mut series = match &ctx.env.history_store {
        Some(store) => {
            let contents = read_store(store).map_err(|e| e.to_string())?;
            ctx.warn_all(contents.warnings.clone());
            TrendSeries::from_records(&contents.records, &metric, &entity)
        }
        None => {
            ctx.warn("no history store configured; the trend covers this run only");
            TrendSeries {
                metric: metric.clone(),
                entity: entity.clone(),
                points: Vec::new(),
            }
        }
    };
    let current = snapshot
        .records
        .iter()
        .find(|(e, m, _)| *e == entity && *m == metric)
        .map(|r| r.2);
    match current {
        Some(value) => {
            series.points.retain(|p| p.run_id != ctx.env.run_id);
            series.points.push(TrendPoint {
                run_id: ctx.env.run_id.clone(),
                timestamp: ctx.env.timestamp,
                value,
            });
            series
                .points
                .sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.run_id.cmp(&b.run_id)));
        }
        None => return Err(format!("snapshot holds no `{metric}` value for entity `{entity}`")),
    }
    let verdict = assess_trend(&series, &rule);
    let gate = Verdict {
        source: ctx.id.to_string(),
        metric: metric.clone(),
        color: verdict.assessment.color,
        blocking,
    };
    let entry = TrendEntry {
        series,
        rule,
        verdict,
        blocking,
    };
    Ok(Outputs::from([
        ("trend".to_string(), Data::Trend(Arc::new(entry))),
        ("verdict".to_string(), Data::Verdict(Arc::new(gate))),
    ]))
}

fn treemap_renderer(ctx: &mut ProcessorContext<'_>) -> Result<Outputs, String> {
    let input = ctx.tree("input")?;
    let weight = ctx.str("weight")?.to_string();
    let color = ctx.opt_str("color").map(str::to_string);
    if !input.root.files().any(|f| f.value(&weight).is_some_and(|v| v > 0.0)) {
        ctx.warn(format!("no file carries a positive `{weight}`; the tree map will be empty"));
    }
    Ok(single(
        "treemap",
        Data::Treemap(Arc::new(TreemapSpec {
            id: ctx.id.to_string(),
            weight,
            color,
        })),
    ))
}
