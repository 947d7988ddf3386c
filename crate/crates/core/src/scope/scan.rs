use std::path::{Path, PathBuf};
use std::sync::Arc;

use walkdir::WalkDir;

use super::{tokenize, ProfileSet, ResourceNode, SourceFile};
use crate::glob::PathFilter;

const BINARY_PROBE_LEN: usize = 4096;

#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error("scan root `{}` does not exist or is not a directory", .0.display())]
    RootNotFound(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub tree: ResourceNode,
    pub warnings: Vec<String>,
}

/// Builds the resource tree below `root`. Only files accepted by `filter`
/// are kept; directories without kept files do not appear. Files whose
/// extension maps to a profile are tokenized.
pub fn scan(root: &Path, filter: &PathFilter, profiles: &ProfileSet) -> Result<ScanResult, ScanError> {
    if !root.is_dir() {
        return Err(ScanError::RootNotFound(root.to_path_buf()));
    }
    let mut tree = ResourceNode::root();
    let mut warnings = Vec::new();
    let walker = WalkDir::new(root)
        .follow_links(false)
        .sort_by(|a, b| a.file_name().cmp(b.file_name()));
    for entry in walker {
        let entry = match entry {
            Ok(e) => e,
            Err(err) => {
                warnings.push(format!("unreadable entry: {err}"));
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let Ok(rel) = entry.path().strip_prefix(root) else {
            continue;
        };
        let Some(rel) = relative_string(rel) else {
            warnings.push(format!("skipped non-UTF-8 path `{}`", rel.display()));
            continue;
        };
        if !filter.accepts(&rel) {
            continue;
        }
        let bytes = match std::fs::read(entry.path()) {
            Ok(b) => b,
            Err(err) => {
                warnings.push(format!("unreadable entry `{rel}`: {err}"));
                continue;
            }
        };
        if bytes.iter().take(BINARY_PROBE_LEN).any(|&b| b == 0) {
            warnings.push(format!("skipped binary file `{rel}`"));
            continue;
        }
        let content = match String::from_utf8(bytes) {
            Ok(s) => s,
            Err(err) => {
                warnings.push(format!("`{rel}` is not valid UTF-8; invalid bytes replaced"));
                String::from_utf8_lossy(err.as_bytes()).into_owned()
            }
        };
        let node = match profiles.for_path(&rel) {
            Some(profile) => {
                let stream = tokenize(&content, profile);
                for w in &stream.warnings {
                    warnings.push(format!("{rel}: {w}"));
                }
                ResourceNode::file(
                    rel,
                    Some(profile.name.clone()),
                    Some(Arc::new(SourceFile { content, stream })),
                )
            }
            None => ResourceNode::file(
                rel,
                None,
                Some(Arc::new(SourceFile {
                    content,
                    stream: Default::default(),
                })),
            ),
        };
        tree.insert(node);
    }
    Ok(ScanResult { tree, warnings })
}

fn relative_string(rel: &Path) -> Option<String> {
    let parts = rel
        .components()
        .map(|c| c.as_os_str().to_str())
        .collect::<Option<Vec<_>>>()?;
    Some(parts.join("/"))
}
