//! Static HTML dashboards: one index page plus one page per view.

mod chart;
mod treemap;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};

use crate::arch::{Conformance, ViolationReason, ARCH_VIOLATIONS};
use crate::assess::Color;
use crate::clones::{CloneReport, CLONE_RATIO};
use crate::config::{ConfigError, ViewDecl};
use crate::glob::Glob;
use crate::history::{TrendRule, TrendSeries, TrendVerdict};
use crate::scope::{path_depth, ResourceNode};

pub use chart::{render_trend_chart, ChartError};
pub use treemap::{layout_treemap, squarify, Rect, TreemapCell, TreemapError, TreemapLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detail {
    /// Root and one level below it.
    Overview,
    Full,
}

#[derive(Debug, Clone)]
pub struct ViewSpec {
    pub id: String,
    pub audience: String,
    pub scope: Glob,
    pub detail: Detail,
    /// `None` shows every metric present in the results.
    pub metrics: Option<Vec<String>>,
}

impl ViewSpec {
    /// The view used when a configuration declares none.
    pub fn default_view() -> Self {
        ViewSpec {
            id: "all".into(),
            audience: "all".into(),
            scope: Glob::new("**").expect("valid glob"),
            detail: Detail::Full,
            metrics: None,
        }
    }

    pub fn from_decl(decl: &ViewDecl) -> Result<Self, ConfigError> {
        let invalid = |message: String| ConfigError::InvalidView {
            id: decl.id.clone(),
            message,
            line: decl.line,
        };
        if decl.id.is_empty() || !decl.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(invalid("view ids may only contain ASCII letters, digits, `-` and `_`".into()));
        }
        let text = |key: &str| -> Result<Option<&str>, ConfigError> {
            match decl.params.get(key) {
                None => Ok(None),
                Some(v) => v
                    .value
                    .as_str()
                    .map(Some)
                    .ok_or_else(|| invalid(format!("`{key}` must be a string, found {}", v.value.type_name()))),
            }
        };
        for key in decl.params.keys() {
            if !["audience", "scope", "detail", "metrics"].contains(&key.as_str()) {
                return Err(invalid(format!("unknown view parameter `{key}`")));
            }
        }
        let audience = text("audience")?.unwrap_or(&decl.id).to_string();
        let scope = Glob::new(text("scope")?.unwrap_or("**")).map_err(|e| invalid(e.to_string()))?;
        let detail = match text("detail")?.unwrap_or("FULL") {
            "FULL" => Detail::Full,
            "OVERVIEW" => Detail::Overview,
            other => return Err(invalid(format!("detail must be OVERVIEW or FULL, found `{other}`"))),
        };
        let metrics = match decl.params.get("metrics") {
            None => None,
            Some(v) => Some(
                v.value
                    .as_list()
                    .ok_or_else(|| invalid(format!("`metrics` must be a list, found {}", v.value.type_name())))?
                    .to_vec(),
            ),
        };
        Ok(ViewSpec {
            id: decl.id.clone(),
            audience,
            scope,
            detail,
            metrics,
        })
    }

    pub fn file_name(&self) -> String {
        format!("view-{}.html", self.id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendEntry {
    pub series: TrendSeries,
    pub rule: TrendRule,
    pub verdict: TrendVerdict,
    pub blocking: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreemapSpec {
    pub id: String,
    pub weight: String,
    pub color: Option<String>,
}

/// Everything a report is rendered from.
#[derive(Debug, Clone)]
pub struct ReportData {
    pub title: String,
    pub timestamp: DateTime<Utc>,
    pub tree: ResourceNode,
    pub clones: Option<CloneReport>,
    pub architecture: Option<Conformance>,
    pub trends: Vec<TrendEntry>,
    pub treemaps: Vec<TreemapSpec>,
    /// Run-level messages shown on the index page.
    pub diagnostics: Vec<String>,
}

impl ReportData {
    pub fn new(title: impl Into<String>, timestamp: DateTime<Utc>, tree: ResourceNode) -> Self {
        ReportData {
            title: title.into(),
            timestamp,
            tree,
            clones: None,
            architecture: None,
            trends: Vec::new(),
            treemaps: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    /// Every metric id with data in these results.
    pub fn metric_ids(&self) -> BTreeSet<String> {
        let mut ids: BTreeSet<String> = BTreeSet::new();
        for n in self.tree.iter() {
            ids.extend(n.values().keys().cloned());
            ids.extend(n.assessments().keys().cloned());
        }
        if self.clones.is_some() {
            ids.insert(CLONE_RATIO.into());
        }
        if self.architecture.is_some() {
            ids.insert(ARCH_VIOLATIONS.into());
        }
        ids.extend(self.trends.iter().map(|t| t.rule.metric.clone()));
        ids
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write report to {path}: {source}")]
    OutputDirUnwritable {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("duplicate view id `{0}`")]
    DuplicateView(String),
}

/// Escapes text for XML content and attribute values.
pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c if (c as u32) < 0x20 && c != '\n' && c != '\t' => out.push('?'),
            c => out.push(c),
        }
    }
    out
}

/// Deterministic number formatting: integers without a fraction, other
/// values with up to four decimals.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v == 0.0 {
        return "0".into();
    }
    if v.fract() == 0.0 && v.abs() < 1e15 {
        return format!("{v:.0}");
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" || s.is_empty() {
        "0".into()
    } else {
        s.to_string()
    }
}

fn color_class(c: Option<Color>) -> &'static str {
    match c {
        Some(Color::Green) => "green",
        Some(Color::Yellow) => "yellow",
        Some(Color::Red) => "red",
        None => "missing",
    }
}

fn color_fill(c: Option<Color>) -> &'static str {
    match c {
        Some(Color::Green) => "#2ca02c",
        Some(Color::Yellow) => "#f2c318",
        Some(Color::Red) => "#d62728",
        None => "#bbbbbb",
    }
}

const STYLE: &str = "body{font-family:sans-serif;margin:1.5em;color:#222}\
table{border-collapse:collapse;margin:0.5em 0}\
td,th{border:1px solid #ccc;padding:2px 6px;text-align:right}\
td.entity,th.entity{text-align:left}\
.green{background:#c9eec9}.yellow{background:#fbefb0}.red{background:#f5b5b5}.missing{background:#e4e4e4;color:#777}\
.counts{font-size:80%;color:#555}";

fn page_head(title: &str) -> String {
    format!(
        "<!DOCTYPE html>\n<html xmlns=\"http://www.w3.org/1999/xhtml\" lang=\"en\">\n<head>\n\
         <meta charset=\"utf-8\"/>\n<title>{}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n",
        escape(title)
    )
}

const PAGE_END: &str = "</body>\n</html>\n";

/// Which entities a view may show.
struct Visibility<'a> {
    view: &'a ViewSpec,
    base_depth: usize,
}

impl<'a> Visibility<'a> {
    fn new(view: &'a ViewSpec, tree: &ResourceNode) -> Self {
        let base_depth = tree
            .iter()
            .filter(|n| view.scope.is_match(n.path()))
            .map(|n| n.depth())
            .min()
            .unwrap_or(0);
        Visibility { view, base_depth }
    }

    fn shows(&self, path: &str) -> bool {
        self.view.scope.is_match(path)
            && (self.view.detail == Detail::Full || path_depth(path) <= self.base_depth + 1)
    }
}

/// Writes `index.html`, one `view-<id>.html` per view and, when clone
/// results exist, `clones.txt`. Returns the written files in order.
pub fn render_report(data: &ReportData, views: &[ViewSpec], out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let default = [ViewSpec::default_view()];
    let views = if views.is_empty() { &default[..] } else { views };
    let mut ids = BTreeSet::new();
    for v in views {
        if !ids.insert(v.id.as_str()) {
            return Err(ReportError::DuplicateView(v.id.clone()));
        }
    }
    let unwritable = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReportError::OutputDirUnwritable { path, source }
    };
    fs::create_dir_all(out_dir).map_err(unwritable(out_dir))?;
    let mut files = Vec::new();
    let mut write = |name: &str, content: &str| -> Result<(), ReportError> {
        let path = out_dir.join(name);
        fs::write(&path, content).map_err(unwritable(&path))?;
        files.push(path);
        Ok(())
    };
    write("index.html", &render_index(data, views))?;
    for v in views {
        write(&v.file_name(), &render_view(data, v))?;
    }
    if let Some(clones) = &data.clones {
        write("clones.txt", &clones.listing())?;
    }
    Ok(files)
}

pub fn render_index(data: &ReportData, views: &[ViewSpec]) -> String {
    let mut s = page_head(&data.title);
    let _ = writeln!(s, "<h1>{}</h1>", escape(&data.title));
    let _ = writeln!(
        s,
        "<p>Generated {}</p>",
        data.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true)
    );
    s.push_str("<h2>Views</h2>\n<ul>\n");
    for v in views {
        let _ = writeln!(
            s,
            "<li><a href=\"{}\">{}</a> ({}; {})</li>",
            escape(&v.file_name()),
            escape(&v.id),
            escape(&v.audience),
            match v.detail {
                Detail::Overview => "overview",
                Detail::Full => "full detail",
            }
        );
    }
    s.push_str("</ul>\n");
    if !data.trends.is_empty() {
        s.push_str("<h2>Trends</h2>\n<table>\n<tr><th class=\"entity\">Metric</th><th>Delta</th><th>Verdict</th></tr>\n");
        for t in &data.trends {
            let color = t.verdict.assessment.color;
            let _ = writeln!(
                s,
                "<tr><td class=\"entity\">{}</td><td>{}</td><td class=\"{}\">{}{}</td></tr>",
                escape(&t.rule.metric),
                fmt_num(t.verdict.delta),
                color_class(Some(color)),
                color,
                if t.blocking { " (blocking)" } else { "" }
            );
        }
        s.push_str("</table>\n");
    }
    if !data.diagnostics.is_empty() {
        s.push_str("<h2>Diagnostics</h2>\n<ul>\n");
        for d in &data.diagnostics {
            let _ = writeln!(s, "<li>{}</li>", escape(d));
        }
        s.push_str("</ul>\n");
    }
    s.push_str(PAGE_END);
    s
}

pub fn render_view(data: &ReportData, view: &ViewSpec) -> String {
    let vis = Visibility::new(view, &data.tree);
    let metrics: Vec<String> = match &view.metrics {
        Some(m) => m.clone(),
        None => data.metric_ids().into_iter().collect(),
    };
    let shown = |m: &str| metrics.iter().any(|x| x == m);

    let mut s = page_head(&format!("{} - {}", data.title, view.id));
    let _ = writeln!(s, "<h1>{}</h1>", escape(&format!("{} - {}", data.title, view.id)));
    let _ = writeln!(
        s,
        "<p>Audience: {}. Scope: <code>{}</code>, {}. Generated {}. <a href=\"index.html\">All views</a></p>",
        escape(&view.audience),
        escape(view.scope.as_str()),
        match view.detail {
            Detail::Overview => "overview",
            Detail::Full => "full detail",
        },
        data.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true)
    );

    render_entity_table(&mut s, data, &vis, &metrics);
    for tm in &data.treemaps {
        if shown(&tm.weight) || tm.color.as_deref().is_some_and(shown) {
            render_treemap_section(&mut s, data, view, &vis, tm);
        }
    }
    if shown(CLONE_RATIO) {
        if let Some(c) = &data.clones {
            render_clones(&mut s, c, &vis);
        }
    }
    if shown(ARCH_VIOLATIONS) {
        if let Some(a) = &data.architecture {
            render_architecture(&mut s, a, &vis);
        }
    }
    let trends: Vec<&TrendEntry> = data
        .trends
        .iter()
        .filter(|t| shown(&t.rule.metric) && vis.shows(&t.series.entity))
        .collect();
    if !trends.is_empty() {
        s.push_str("<h2>Trends</h2>\n");
        for t in trends {
            let entity = if t.series.entity.is_empty() {
                "<root>"
            } else {
                &t.series.entity
            };
            let _ = writeln!(
                s,
                "<h3>{} of {}: <span class=\"{}\">{}</span></h3>\n<p>{} points, delta {}{}</p>",
                escape(&t.rule.metric),
                escape(entity),
                color_class(Some(t.verdict.assessment.color)),
                t.verdict.assessment.color,
                t.series.points.len(),
                fmt_num(t.verdict.delta),
                if t.blocking { ", blocking" } else { "" }
            );
            match render_trend_chart(&t.series, Some(&t.rule)) {
                Ok(svg) => {
                    s.push_str(&svg);
                    s.push('\n');
                }
                Err(e) => {
                    let _ = writeln!(s, "<p>{}</p>", escape(&e.to_string()));
                }
            }
        }
    }
    s.push_str(PAGE_END);
    s
}

fn render_entity_table(s: &mut String, data: &ReportData, vis: &Visibility<'_>, metrics: &[String]) {
    let rows: Vec<&ResourceNode> = data.tree.iter().filter(|n| vis.shows(n.path())).collect();
    s.push_str("<h2>Metrics</h2>\n");
    if rows.is_empty() {
        s.push_str("<p>No entities in scope.</p>\n");
        return;
    }
    s.push_str("<table>\n<tr><th class=\"entity\">Entity</th>");
    for m in metrics {
        let _ = write!(s, "<th>{}</th>", escape(m));
    }
    s.push_str("</tr>\n");
    for n in rows {
        let _ = write!(s, "<tr><td class=\"entity\">{}</td>", escape(n.display_path()));
        for m in metrics {
            let assessment = n.assessment(m);
            let class = match (assessment, n.value(m)) {
                (None, None) => "missing",
                (a, _) => match a {
                    Some(a) => color_class(Some(a.color)),
                    None => "plain",
                },
            };
            let text = match (n.value(m), assessment) {
                (Some(v), _) => fmt_num(v),
                (None, Some(a)) => a.color.to_string(),
                (None, None) => "n/a".into(),
            };
            let _ = write!(s, "<td class=\"{class}\">{text}");
            if let Some(c) = n.color_counts(m) {
                let _ = write!(
                    s,
                    " <span class=\"counts\">{}/{}/{}</span>",
                    c.green, c.yellow, c.red
                );
            }
            if let Some(msg) = assessment.and_then(|a| a.message.as_deref()) {
                let _ = write!(s, "<span class=\"counts\" title=\"{}\"></span>", escape(msg));
            }
            s.push_str("</td>");
        }
        s.push_str("</tr>\n");
    }
    s.push_str("</table>\n<p class=\"counts\">Counts are green/yellow/red leaves.</p>\n");
}

fn render_treemap_section(s: &mut String, data: &ReportData, view: &ViewSpec, vis: &Visibility<'_>, tm: &TreemapSpec) {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    let _ = writeln!(
        s,
        "<h2>Tree map {}: area {}{}</h2>",
        escape(&tm.id),
        escape(&tm.weight),
        tm.color
            .as_ref()
            .map(|c| format!(", color {}", escape(c)))
            .unwrap_or_default()
    );
    let projected = data.tree.filtered(&|f| view.scope.is_match(f.path()));
    let layout = match layout_treemap(&projected, &tm.weight, tm.color.as_deref(), Rect::new(0.0, 0.0, W, H)) {
        Ok(l) => l,
        Err(e) => {
            let _ = writeln!(s, "<p>{}</p>", escape(&e.to_string()));
            return;
        }
    };
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" class=\"treemap\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    for c in layout.cells.iter().filter(|c| vis.shows(&c.path)) {
        let label = if c.path.is_empty() { "<root>" } else { &c.path };
        let _ = write!(
            s,
            "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"{}\" stroke=\"#ffffff\" stroke-width=\"{}\"><title>{} ({})</title></rect>",
            c.rect.x,
            c.rect.y,
            c.rect.w,
            c.rect.h,
            color_fill(c.color),
            if c.is_leaf { 0.5 } else { 1.5 },
            escape(label),
            fmt_num(c.weight)
        );
    }
    s.push_str("</svg>\n");
}

fn render_clones(s: &mut String, c: &CloneReport, vis: &Visibility<'_>) {
    let _ = writeln!(
        s,
        "<h2>Clones</h2>\n<p>Cloning ratio {} ({} of {} source lines), {} clone classes of at least {} tokens. <a href=\"clones.txt\">Full listing</a></p>",
        fmt_num(c.ratio),
        c.cloned_lines.values().map(|l| l.len()).sum::<usize>(),
        c.total_sloc,
        c.classes.len(),
        c.min_length
    );
    let mut rows = String::new();
    for (i, class) in c.classes.iter().enumerate() {
        let occ: Vec<String> = class
            .occurrences
            .iter()
            .filter(|o| vis.shows(&o.path))
            .map(|o| format!("{}:{}-{}", escape(&o.path), o.start_line, o.end_line))
            .collect();
        if occ.is_empty() {
            continue;
        }
        let _ = writeln!(
            rows,
            "<tr><td>{}</td><td>{}</td><td>{}</td><td class=\"entity\">{}</td></tr>",
            i + 1,
            class.length,
            class.occurrences.len(),
            occ.join("<br/>")
        );
    }
    if !rows.is_empty() {
        s.push_str("<table>\n<tr><th>Class</th><th>Tokens</th><th>Instances</th><th class=\"entity\">Occurrences in view</th></tr>\n");
        s.push_str(&rows);
        s.push_str("</table>\n");
    }
}

fn render_architecture(s: &mut String, a: &Conformance, vis: &Visibility<'_>) {
    let _ = writeln!(
        s,
        "<h2>Architecture</h2>\n<p>{} violations, {} external dependencies.</p>",
        a.violations.len(),
        a.external_dependencies
    );
    if !a.component_names.is_empty() {
        s.push_str("<table>\n<tr><th class=\"entity\">from \\ to</th>");
        for c in &a.component_names {
            let _ = write!(s, "<th>{}</th>", escape(c));
        }
        s.push_str("</tr>\n");
        for from in &a.component_names {
            let _ = write!(s, "<tr><th class=\"entity\">{}</th>", escape(from));
            for to in &a.component_names {
                match a.edges.get(&(from.clone(), to.clone())) {
                    Some(e) if e.violations > 0 => {
                        let _ = write!(s, "<td class=\"red\">{} ({} forbidden)</td>", e.dependencies, e.violations);
                    }
                    Some(e) => {
                        let _ = write!(s, "<td class=\"green\">{}</td>", e.dependencies);
                    }
                    None => s.push_str("<td></td>"),
                }
            }
            s.push_str("</tr>\n");
        }
        s.push_str("</table>\n");
    }
    let shown: Vec<_> = a.violations.iter().filter(|v| vis.shows(&v.subject)).collect();
    if shown.is_empty() {
        return;
    }
    s.push_str("<table>\n<tr><th class=\"entity\">File</th><th>Line</th><th class=\"entity\">Violation</th></tr>\n");
    for v in shown {
        let other = |p: &str| if vis.shows(p) { escape(p) } else { "(outside this view)".into() };
        let detail = match v.reason {
            ViolationReason::ForbiddenEdge => format!(
                "{} -&gt; {}: imports {}",
                escape(v.from_component.as_deref().unwrap_or("?")),
                escape(v.to_component.as_deref().unwrap_or("?")),
                other(v.dependency.internal_target().unwrap_or(""))
            ),
            ViolationReason::UnmappedFile => "file belongs to no component".into(),
        };
        let _ = writeln!(
            s,
            "<tr><td class=\"entity\">{}</td><td>{}</td><td class=\"entity\">{} {}</td></tr>",
            escape(&v.subject),
            v.dependency.line,
            v.reason,
            detail
        );
    }
    s.push_str("</table>\n");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assess::Assessment;

    fn tree() -> ResourceNode {
        let mut t = ResourceNode::root();
        for (p, v) in [("src/a/x.c", 10.0), ("src/a/y.c", 5.0), ("src/b/z.c", 7.0), ("lib/q.c", 3.0)] {
            let mut f = ResourceNode::file(p, None, None);
            f.attach_value("loc", v);
            f.attach_assessment(
                "loc",
                Assessment {
                    color: if v > 6.0 { Color::Red } else { Color::Green },
                    message: None,
                },
            );
            t.insert(f);
        }
        t
    }

    fn view(id: &str, scope: &str, detail: Detail) -> ViewSpec {
        ViewSpec {
            id: id.into(),
            audience: "dev".into(),
            scope: Glob::new(scope).unwrap(),
            detail,
            metrics: Some(vec!["loc".into()]),
        }
    }

    fn data() -> ReportData {
        let mut d = ReportData::new("Demo", DateTime::from_timestamp(0, 0).unwrap(), tree());
        d.treemaps.push(TreemapSpec {
            id: "size".into(),
            weight: "loc".into(),
            color: Some("loc".into()),
        });
        d
    }

    #[test]
    fn overview_shows_two_levels() {
        let page = render_view(&data(), &view("mgr", "**", Detail::Overview));
        assert!(page.contains(">src<"));
        assert!(page.contains("lib"));
        assert!(!page.contains("src/a"));
        assert!(!page.contains("x.c"));
    }

    #[test]
    fn scope_isolates_subtree() {
        let page = render_view(&data(), &view("a", "src/a/**", Detail::Full));
        assert!(page.contains("src/a/x.c"));
        assert!(!page.contains("src/b"));
        assert!(!page.contains("lib"));
    }

    #[test]
    fn output_is_deterministic() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let views = [view("a", "**", Detail::Full), view("b", "src/**", Detail::Overview)];
        let f1 = render_report(&data(), &views, d1.path()).unwrap();
        let f2 = render_report(&data(), &views, d2.path()).unwrap();
        assert_eq!(f1.len(), 3);
        for (a, b) in f1.iter().zip(&f2) {
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
        }
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(3.0), "3");
        assert_eq!(fmt_num(0.16), "0.16");
        assert_eq!(fmt_num(1.0 / 3.0), "0.3333");
        assert_eq!(fmt_num(-0.00001), "0");
    }
}
