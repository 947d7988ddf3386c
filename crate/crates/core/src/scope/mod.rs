//! Resource model of the analyzed system.

mod profile;
mod scan;
mod token;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::assess::{Assessment, ColorCounts};

pub use profile::{LanguageProfile, ProfileError, ProfileSet};
pub use scan::{scan, ScanError, ScanResult};
pub use token::{tokenize, Token, TokenKind, TokenStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeKind {
    Directory,
    File,
}

/// Loaded content of a FILE node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub content: String,
    pub stream: TokenStream,
}

/// A directory or file of the analyzed system.
///
/// Paths are relative and `/`-separated; the root has the empty path.
/// Children are kept sorted by name.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceNode {
    path: String,
    kind: NodeKind,
    children: Vec<ResourceNode>,
    language: Option<String>,
    source: Option<Arc<SourceFile>>,
    values: BTreeMap<String, f64>,
    assessments: BTreeMap<String, Assessment>,
    color_counts: BTreeMap<String, ColorCounts>,
}

impl ResourceNode {
    pub fn root() -> Self {
        Self::directory("")
    }

    pub fn directory(path: impl Into<String>) -> Self {
        ResourceNode {
            path: path.into(),
            kind: NodeKind::Directory,
            children: Vec::new(),
            language: None,
            source: None,
            values: BTreeMap::new(),
            assessments: BTreeMap::new(),
            color_counts: BTreeMap::new(),
        }
    }

    pub fn file(
        path: impl Into<String>,
        language: Option<String>,
        source: Option<Arc<SourceFile>>,
    ) -> Self {
        ResourceNode {
            kind: NodeKind::File,
            language,
            source,
            ..Self::directory(path)
        }
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn name(&self) -> &str {
        self.path.rsplit('/').next().unwrap_or(&self.path)
    }

    pub fn kind(&self) -> NodeKind {
        self.kind
    }

    pub fn is_file(&self) -> bool {
        self.kind == NodeKind::File
    }

    pub fn children(&self) -> &[ResourceNode] {
        &self.children
    }

    pub fn children_mut(&mut self) -> &mut [ResourceNode] {
        &mut self.children
    }

    pub fn language(&self) -> Option<&str> {
        self.language.as_deref()
    }

    pub fn source(&self) -> Option<&SourceFile> {
        self.source.as_deref()
    }

    /// Inserts `node` below this directory, creating intermediate
    /// directories. Panics if this node is a file or a path segment
    /// collides with an existing file.
    pub fn insert(&mut self, node: ResourceNode) {
        assert!(!self.is_file(), "cannot insert below file `{}`", self.path);
        let rest = if self.path.is_empty() {
            node.path.as_str()
        } else {
            node.path
                .strip_prefix(&self.path)
                .and_then(|r| r.strip_prefix('/'))
                .expect("inserted path lies below this node")
        };
        match rest.split_once('/') {
            None => {
                let idx = self.child_index(rest);
                match idx {
                    Ok(i) => self.children[i] = node,
                    Err(i) => self.children.insert(i, node),
                }
            }
            Some((head, _)) => {
                let child_path = if self.path.is_empty() {
                    head.to_string()
                } else {
                    format!("{}/{}", self.path, head)
                };
                let i = match self.child_index(head) {
                    Ok(i) => i,
                    Err(i) => {
                        self.children.insert(i, ResourceNode::directory(child_path));
                        i
                    }
                };
                self.children[i].insert(node);
            }
        }
    }

    fn child_index(&self, name: &str) -> Result<usize, usize> {
        self.children.binary_search_by(|c| c.name().cmp(name))
    }

    /// Pre-order traversal.
    pub fn iter(&self) -> impl Iterator<Item = &ResourceNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(node)
        })
    }

    pub fn files(&self) -> impl Iterator<Item = &ResourceNode> {
        self.iter().filter(|n| n.is_file())
    }

    pub fn find(&self, path: &str) -> Option<&ResourceNode> {
        if path == self.path {
            return Some(self);
        }
        self.children
            .iter()
            .find(|c| is_within(path, &c.path))
            .and_then(|c| c.find(path))
    }

    pub fn find_mut(&mut self, path: &str) -> Option<&mut ResourceNode> {
        if path == self.path {
            return Some(self);
        }
        self.children
            .iter_mut()
            .find(|c| is_within(path, &c.path))
            .and_then(|c| c.find_mut(path))
    }

    /// Visits every node bottom-up (children before parents).
    pub fn visit_post_order_mut(&mut self, f: &mut impl FnMut(&mut ResourceNode)) {
        for c in &mut self.children {
            c.visit_post_order_mut(f);
        }
        f(self);
    }

    /// Attaches a metric value. Returns a warning when an existing value
    /// is overwritten.
    pub fn attach_value(&mut self, metric: &str, value: f64) -> Option<String> {
        assert!(!metric.is_empty(), "metric id must not be empty");
        self.values.insert(metric.to_string(), value).map(|old| {
            format!(
                "value of `{metric}` on `{}` overwritten ({old} -> {value})",
                self.display_path()
            )
        })
    }

    /// `None` is the MISSING marker.
    pub fn value(&self, metric: &str) -> Option<f64> {
        self.values.get(metric).copied()
    }

    pub fn values(&self) -> &BTreeMap<String, f64> {
        &self.values
    }

    pub fn attach_assessment(&mut self, metric: &str, assessment: Assessment) -> Option<String> {
        assert!(!metric.is_empty(), "metric id must not be empty");
        self.assessments
            .insert(metric.to_string(), assessment)
            .map(|_| {
                format!(
                    "assessment of `{metric}` on `{}` overwritten",
                    self.display_path()
                )
            })
    }

    pub fn assessment(&self, metric: &str) -> Option<&Assessment> {
        self.assessments.get(metric)
    }

    pub fn assessments(&self) -> &BTreeMap<String, Assessment> {
        &self.assessments
    }

    pub fn set_color_counts(&mut self, metric: &str, counts: ColorCounts) {
        self.color_counts.insert(metric.to_string(), counts);
    }

    pub fn color_counts(&self, metric: &str) -> Option<&ColorCounts> {
        self.color_counts.get(metric)
    }

    /// Copies values and assessments from the node at the same path in
    /// `other` (later wins).
    pub fn merge_from(&mut self, other: &ResourceNode) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), *v);
        }
        for (k, v) in &other.assessments {
            self.assessments.insert(k.clone(), v.clone());
        }
        for (k, v) in &other.color_counts {
            self.color_counts.insert(k.clone(), *v);
        }
        for oc in &other.children {
            if let Ok(i) = self.child_index(oc.name()) {
                self.children[i].merge_from(oc);
            }
        }
    }

    /// Copy of this subtree that keeps only the files accepted by `keep`;
    /// directories left empty are dropped (this node itself is kept).
    pub fn filtered(&self, keep: &impl Fn(&ResourceNode) -> bool) -> ResourceNode {
        let mut out = ResourceNode {
            children: Vec::new(),
            ..self.clone_shallow()
        };
        for c in &self.children {
            if c.is_file() {
                if keep(c) {
                    out.children.push(c.clone());
                }
            } else {
                let sub = c.filtered(keep);
                if !sub.children.is_empty() {
                    out.children.push(sub);
                }
            }
        }
        out
    }

    fn clone_shallow(&self) -> ResourceNode {
        ResourceNode {
            path: self.path.clone(),
            kind: self.kind,
            children: Vec::new(),
            language: self.language.clone(),
            source: self.source.clone(),
            values: self.values.clone(),
            assessments: self.assessments.clone(),
            color_counts: self.color_counts.clone(),
        }
    }

    pub fn depth(&self) -> usize {
        path_depth(&self.path)
    }

    pub fn display_path(&self) -> &str {
        if self.path.is_empty() {
            "<root>"
        } else {
            &self.path
        }
    }

    /// Line-per-node textual serialization of structure and values.
    pub fn outline(&self) -> String {
        let mut out = String::new();
        for n in self.iter() {
            let kind = match n.kind {
                NodeKind::Directory => "D",
                NodeKind::File => "F",
            };
            let _ = write!(out, "{kind} {}", n.display_path());
            if let Some(lang) = &n.language {
                let _ = write!(out, " [{lang}]");
            }
            for (k, v) in &n.values {
                let _ = write!(out, " {k}={v}");
            }
            for (k, a) in &n.assessments {
                let _ = write!(out, " {k}:{}", a.color);
            }
            out.push('\n');
        }
        out
    }
}

/// True if `path` equals `ancestor` or lies below it.
pub fn is_within(path: &str, ancestor: &str) -> bool {
    ancestor.is_empty()
        || path == ancestor
        || (path.len() > ancestor.len()
            && path.starts_with(ancestor)
            && path.as_bytes()[ancestor.len()] == b'/')
}


/// Number of segments in `path`; the root has depth 0.
pub fn path_depth(path: &str) -> usize {
    if path.is_empty() {
        0
    } else {
        path.split('/').count()
    }
}
