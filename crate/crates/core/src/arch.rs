//! File-level dependency extraction and architecture conformance checking.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::config::syntax::{parse_sections, Cursor};
use crate::config::ConfigError;
use crate::glob::Glob;
use crate::scope::{ProfileSet, ResourceNode};

pub const ARCH_VIOLATIONS: &str = "arch.violations";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArchError {
    #[error(transparent)]
    Syntax(#[from] ConfigError),
    #[error("architecture spec error: {0}")]
    Spec(String),
}

#[derive(Debug, Clone)]
pub struct Component {
    pub name: String,
    pub members: Vec<Glob>,
}

/// Components with member globs and the allowed component edges.
/// Everything not allowed is forbidden.
#[derive(Debug, Clone)]
pub struct ArchitectureSpec {
    components: Vec<Component>,
    allowed: BTreeSet<(String, String)>,
}

impl ArchitectureSpec {
    pub fn new(
        components: Vec<Component>,
        allowed: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ArchError> {
        let mut names = BTreeSet::new();
        for c in &components {
            if !names.insert(c.name.as_str()) {
                return Err(ArchError::Spec(format!("component `{}` declared twice", c.name)));
            }
        }
        let allowed: BTreeSet<(String, String)> = allowed.into_iter().collect();
        for (from, to) in &allowed {
            for end in [from, to] {
                if !names.contains(end.as_str()) {
                    return Err(ArchError::Spec(format!(
                        "edge {from} -> {to} names unknown component `{end}`"
                    )));
                }
            }
        }
        Ok(ArchitectureSpec {
            components,
            allowed,
        })
    }

    /// Parses `component <name>` sections (`match = [globs]`) and
    /// `allow <from> -> <to>` lines.
    pub fn parse(text: &str) -> Result<Self, ArchError> {
        let mut components = Vec::new();
        let mut allowed = Vec::new();
        for section in parse_sections(text)? {
            let mut cur = Cursor::new(&section.header);
            match cur.expect_word("directive")?.as_str() {
                "component" => {
                    let name = cur.expect_word("component name")?;
                    cur.expect_end()?;
                    for key in section.params.keys() {
                        if key != "match" {
                            return Err(ArchError::Spec(format!(
                                "unknown key `{key}` in component `{name}` (line {})",
                                section.line()
                            )));
                        }
                    }
                    let patterns = section
                        .params
                        .get("match")
                        .and_then(|v| v.value.as_list())
                        .ok_or_else(|| {
                            ArchError::Spec(format!(
                                "component `{name}` needs `match = [globs]` (line {})",
                                section.line()
                            ))
                        })?;
                    let members = patterns
                        .iter()
                        .map(|p| Glob::new(p).map_err(|e| ArchError::Spec(e.to_string())))
                        .collect::<Result<Vec<_>, _>>()?;
                    components.push(Component { name, members });
                }
                "allow" => {
                    let from = cur.expect_word("component name")?;
                    cur.expect_punct("->")?;
                    let to = cur.expect_word("component name")?;
                    cur.expect_end()?;
                    if let Some(p) = section.params.values().next() {
                        return Err(ArchError::Syntax(ConfigError::Syntax {
                            line: p.line,
                            column: p.column,
                            message: "`allow` takes no parameter lines".into(),
                        }));
                    }
                    allowed.push((from, to));
                }
                other => {
                    return Err(ArchError::Syntax(ConfigError::Syntax {
                        line: section.line(),
                        column: 1,
                        message: format!("unknown directive `{other}`"),
                    }))
                }
            }
        }
        Self::new(components, allowed)
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn is_allowed(&self, from: &str, to: &str) -> bool {
        from == to || self.allowed.contains(&(from.to_string(), to.to_string()))
    }

    /// The component containing `path`; membership in two is an error.
    pub fn component_of(&self, path: &str) -> Result<Option<&str>, ArchError> {
        let mut found: Option<&str> = None;
        for c in &self.components {
            if c.members.iter().any(|g| g.is_match(path)) {
                if let Some(prev) = found {
                    return Err(ArchError::Spec(format!(
                        "`{path}` belongs to both `{prev}` and `{}`",
                        c.name
                    )));
                }
                found = Some(&c.name);
            }
        }
        Ok(found)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Target {
    /// A file of the analyzed corpus.
    Internal(String),
    /// An import that maps to no corpus file.
    External(String),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Internal(p) => f.write_str(p),
            Target::External(n) => write!(f, "{n} (external)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Dependency {
    pub from: String,
    pub line: u32,
    pub to: Target,
}

impl Dependency {
    pub fn internal_target(&self) -> Option<&str> {
        match &self.to {
            Target::Internal(p) => Some(p),
            Target::External(_) => None,
        }
    }
}

/// Finds import statements with each file's profile and resolves them to
/// corpus files. Self-imports are dropped. Output is sorted.
pub fn extract_dependencies(tree: &ResourceNode, profiles: &ProfileSet) -> Vec<Dependency> {
    let files: Vec<&str> = tree.files().map(|f| f.path()).collect();
    let resolver = Resolver::new(&files);
    let mut deps = Vec::new();
    for file in tree.files() {
        let (Some(lang), Some(source)) = (file.language(), file.source()) else {
            continue;
        };
        let Some(profile) = profiles.get(lang) else {
            continue;
        };
        if profile.imports.is_empty() {
            continue;
        }
        let code: BTreeSet<u32> = source.stream.code_lines().into_iter().collect();
        for (idx, text) in source.content.lines().enumerate() {
            let line = idx as u32 + 1;
            if !code.contains(&line) {
                continue;
            }
            let Some(name) = profile
                .imports
                .iter()
                .find_map(|re| re.captures(text).and_then(|c| c.get(1)))
                .map(|m| m.as_str())
            else {
                continue;
            };
            let to = match resolver.resolve(file.path(), name, &profile.module_separator) {
                Some(target) if target == file.path() => continue,
                Some(target) => Target::Internal(target.to_string()),
                None => Target::External(name.to_string()),
            };
            deps.push(Dependency {
                from: file.path().to_string(),
                line,
                to,
            });
        }
    }
    deps.sort();
    deps
}

const PACKAGE_FILES: [&str; 3] = ["mod", "__init__", "index"];

struct Resolver<'a> {
    /// (path without extension, path)
    stems: Vec<(&'a str, &'a str)>,
}

impl<'a> Resolver<'a> {
    fn new(files: &[&'a str]) -> Self {
        let mut stems = Vec::with_capacity(files.len());
        for &p in files {
            let name_start = p.rfind('/').map_or(0, |i| i + 1);
            let stem = match p[name_start..].rfind('.') {
                Some(dot) if dot > 0 => &p[..name_start + dot],
                _ => p,
            };
            stems.push((stem, p));
            // Package files stand for their directory.
            if name_start > 0 && PACKAGE_FILES.contains(&&stem[name_start..]) {
                stems.push((&p[..name_start - 1], p));
            }
        }
        Resolver { stems }
    }

    fn pick<'b>(candidates: impl Iterator<Item = &'b str>) -> Option<&'b str> {
        candidates.min_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)))
    }

    fn resolve(&self, from: &str, name: &str, separator: &str) -> Option<&'a str> {
        let suffix_match = |candidate: &str, key: &str| {
            candidate == key
                || (candidate.len() > key.len()
                    && candidate.ends_with(key)
                    && candidate.as_bytes()[candidate.len() - key.len() - 1] == b'/')
        };
        if name.contains('/') {
            let dir = from.rfind('/').map_or("", |i| &from[..i]);
            if let Some(rel) = normalize_relative(dir, name) {
                if let Some(hit) = self.stems.iter().find(|(_, p)| *p == rel) {
                    return Some(hit.1);
                }
            }
            let key = name.trim_start_matches("./");
            return Self::pick(
                self.stems
                    .iter()
                    .filter(|(_, p)| suffix_match(p, key))
                    .map(|(_, p)| *p),
            );
        }
        let key = if separator.is_empty() {
            name.to_string()
        } else {
            name.replace(separator, "/")
        };
        Self::pick(
            self.stems
                .iter()
                .filter(|(stem, _)| suffix_match(stem, &key))
                .map(|(_, p)| *p),
        )
    }
}

/// Joins `dir` and a relative `path`, resolving `.` and `..`.
fn normalize_relative(dir: &str, path: &str) -> Option<String> {
    let mut parts: Vec<&str> = dir.split('/').filter(|s| !s.is_empty()).collect();
    for seg in path.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                parts.pop()?;
            }
            s => parts.push(s),
        }
    }
    Some(parts.join("/"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationReason {
    ForbiddenEdge,
    UnmappedFile,
}

impl fmt::Display for ViolationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationReason::ForbiddenEdge => "FORBIDDEN_EDGE",
            ViolationReason::UnmappedFile => "UNMAPPED_FILE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub dependency: Dependency,
    /// File the violation is attributed to: the importing file for forbidden
    /// edges, the unmapped file otherwise.
    pub subject: String,
    pub from_component: Option<String>,
    pub to_component: Option<String>,
    pub reason: ViolationReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EdgeStats {
    pub dependencies: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Conformance {
    pub violations: Vec<Violation>,
    /// Dependency counts per (from-component, to-component).
    pub edges: BTreeMap<(String, String), EdgeStats>,
    pub external_dependencies: usize,
    pub component_names: Vec<String>,
}

impl Conformance {
    pub fn violations_by_file(&self) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        for v in &self.violations {
            *out.entry(v.subject.as_str()).or_insert(0) += 1;
        }
        out
    }
}

pub fn check_conformance(deps: &[Dependency], spec: &ArchitectureSpec) -> Result<Conformance, ArchError> {
    let mut sorted: Vec<&Dependency> = deps.iter().collect();
    sorted.sort();
    let mut out = Conformance {
        component_names: spec.components.iter().map(|c| c.name.clone()).collect(),
        ..Default::default()
    };
    let mut reported_unmapped: BTreeSet<String> = BTreeSet::new();
    for dep in sorted {
        let Some(to) = dep.internal_target() else {
            out.external_dependencies += 1;
            continue;
        };
        let from_c = spec.component_of(&dep.from)?;
        let to_c = spec.component_of(to)?;
        let mut unmapped = |file: &str, out: &mut Conformance| {
            if reported_unmapped.insert(file.to_string()) {
                out.violations.push(Violation {
                    dependency: dep.clone(),
                    subject: file.to_string(),
                    from_component: from_c.map(str::to_string),
                    to_component: to_c.map(str::to_string),
                    reason: ViolationReason::UnmappedFile,
                });
            }
        };
        if from_c.is_none() {
            unmapped(&dep.from, &mut out);
        }
        if to_c.is_none() {
            unmapped(to, &mut out);
        }
        let (Some(fc), Some(tc)) = (from_c, to_c) else {
            continue;
        };
        let stats = out.edges.entry((fc.to_string(), tc.to_string())).or_default();
        stats.dependencies += 1;
        if !spec.is_allowed(fc, tc) {
            stats.violations += 1;
            out.violations.push(Violation {
                dependency: dep.clone(),
                subject: dep.from.clone(),
                from_component: Some(fc.to_string()),
                to_component: Some(tc.to_string()),
                reason: ViolationReason::ForbiddenEdge,
            });
        }
    }
    out.violations.sort_by(|a, b| {
        (&a.dependency, a.reason, &a.subject).cmp(&(&b.dependency, b.reason, &b.subject))
    });
    Ok(out)
}

/// Renders a spec back into its textual form.
impl fmt::Display for ArchitectureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.components {
            writeln!(f, "component {}", c.name)?;
            let globs: Vec<String> = c.members.iter().map(|g| format!("\"{g}\"")).collect();
            writeln!(f, "  match = [{}]", globs.join(", "))?;
        }
        for (a, b) in &self.allowed {
            writeln!(f, "allow {a} -> {b}")?;
        }
        Ok(())
    }
}
