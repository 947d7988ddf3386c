use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;

use crate::config::syntax::{parse_sections, Cursor, Section};
use crate::config::ConfigError;

const BUILTIN_PROFILES: &str = include_str!("profiles.txt");

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error(transparent)]
    Syntax(#[from] ConfigError),
    #[error("profile `{profile}` (line {line}): {message}")]
    Invalid {
        profile: String,
        line: usize,
        message: String,
    },
    #[error("extension `{extension}` claimed by both `{first}` and `{second}`")]
    ExtensionClash {
        extension: String,
        first: String,
        second: String,
    },
}

/// Lexical and structural conventions of one language family.
#[derive(Debug, Clone)]
pub struct LanguageProfile {
    pub name: String,
    pub extensions: Vec<String>,
    pub line_comment: Option<String>,
    pub block_comment: Option<(String, String)>,
    pub string_delimiters: Vec<char>,
    pub keywords: BTreeSet<String>,
    pub branch_keywords: BTreeSet<String>,
    pub loop_keywords: BTreeSet<String>,
    /// Keywords that introduce a procedure (`def`, `function`, ...).
    pub procedure_keywords: BTreeSet<String>,
    /// Detect `name(...) {` shaped procedure definitions.
    pub procedure_calls: bool,
    pub block_open: BTreeSet<String>,
    pub block_close: BTreeSet<String>,
    /// Ends a simple statement; clears pending brace-less loop bodies.
    pub terminator: Option<String>,
    pub imports: Vec<Regex>,
    pub module_separator: String,
}

impl LanguageProfile {
    pub fn is_keyword(&self, word: &str) -> bool {
        self.keywords.contains(word)
    }
}

/// The profiles active in one run. Extension lists are disjoint.
#[derive(Debug, Clone)]
pub struct ProfileSet {
    profiles: Vec<LanguageProfile>,
    by_extension: BTreeMap<String, usize>,
}

impl ProfileSet {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_PROFILES).expect("built-in profiles are valid")
    }

    pub fn parse(text: &str) -> Result<Self, ProfileError> {
        let profiles = parse_sections(text)?
            .iter()
            .map(profile_from_section)
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_profiles(profiles)
    }

    pub fn from_profiles(profiles: Vec<LanguageProfile>) -> Result<Self, ProfileError> {
        let mut by_extension = BTreeMap::new();
        let mut names = BTreeSet::new();
        for (idx, p) in profiles.iter().enumerate() {
            if !names.insert(p.name.clone()) {
                return Err(ProfileError::Invalid {
                    profile: p.name.clone(),
                    line: 0,
                    message: "profile defined twice".into(),
                });
            }
            for ext in &p.extensions {
                if let Some(&prev) = by_extension.get(ext) {
                    let first: &LanguageProfile = &profiles[prev];
                    return Err(ProfileError::ExtensionClash {
                        extension: ext.clone(),
                        first: first.name.clone(),
                        second: p.name.clone(),
                    });
                }
                by_extension.insert(ext.clone(), idx);
            }
        }
        Ok(ProfileSet {
            profiles,
            by_extension,
        })
    }

    /// User profiles replace built-ins of the same name and are added otherwise.
    pub fn with_overrides(self, user: ProfileSet) -> Result<Self, ProfileError> {
        let mut merged: Vec<LanguageProfile> = self
            .profiles
            .into_iter()
            .filter(|b| user.get(&b.name).is_none())
            .collect();
        merged.extend(user.profiles);
        Self::from_profiles(merged)
    }

    pub fn get(&self, name: &str) -> Option<&LanguageProfile> {
        self.profiles.iter().find(|p| p.name == name)
    }

    pub fn for_path(&self, path: &str) -> Option<&LanguageProfile> {
        let file = path.rsplit('/').next().unwrap_or(path);
        let (_, ext) = file.rsplit_once('.')?;
        self.by_extension.get(ext).map(|&i| &self.profiles[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &LanguageProfile> {
        self.profiles.iter()
    }
}

fn profile_from_section(section: &Section) -> Result<LanguageProfile, ProfileError> {
    let line = section.line();
    let mut cur = Cursor::new(&section.header);
    if cur.expect_word("directive")? != "profile" {
        return Err(ProfileError::Invalid {
            profile: String::new(),
            line,
            message: "expected `profile <name>`".into(),
        });
    }
    let name = cur.expect_word("profile name")?;
    cur.expect_end()?;
    let invalid = |message: String| ProfileError::Invalid {
        profile: name.clone(),
        line,
        message,
    };
    for key in section.params.keys() {
        if !PROFILE_KEYS.contains(&key.as_str()) {
            return Err(invalid(format!("unknown key `{key}`")));
        }
    }
    let list = |key: &str| -> Result<Vec<String>, ProfileError> {
        match section.params.get(key) {
            None => Ok(Vec::new()),
            Some(v) => v
                .value
                .as_list()
                .map(<[String]>::to_vec)
                .ok_or_else(|| invalid(format!("`{key}` must be a string list"))),
        }
    };
    let string = |key: &str| -> Result<Option<String>, ProfileError> {
        match section.params.get(key) {
            None => Ok(None),
            Some(v) => v
                .value
                .as_str()
                .map(|s| Some(s.to_string()))
                .ok_or_else(|| invalid(format!("`{key}` must be a string"))),
        }
    };

    let extensions = list("extensions")?;
    if extensions.is_empty() {
        return Err(invalid("`extensions` must not be empty".into()));
    }
    let line_comment = string("line_comment")?.filter(|s| !s.is_empty());
    let block_comment = match list("block_comment")?.as_slice() {
        [] => None,
        [open, close] if !open.is_empty() && !close.is_empty() => {
            Some((open.clone(), close.clone()))
        }
        _ => return Err(invalid("`block_comment` must be [open, close]".into())),
    };
    let mut string_delimiters = Vec::new();
    for s in list("strings")? {
        let mut cs = s.chars();
        match (cs.next(), cs.next()) {
            (Some(c), None) => string_delimiters.push(c),
            _ => return Err(invalid(format!("string delimiter `{s}` must be one character"))),
        }
    }
    let imports = list("imports")?
        .iter()
        .map(|p| {
            let re = Regex::new(p).map_err(|e| invalid(format!("bad import pattern: {e}")))?;
            if re.captures_len() < 2 {
                return Err(invalid(format!("import pattern `{p}` needs a capture group")));
            }
            Ok(re)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let procedure_calls = match section.params.get("procedure_calls") {
        None => false,
        Some(v) => v
            .value
            .as_bool()
            .ok_or_else(|| invalid("`procedure_calls` must be a boolean".into()))?,
    };
    let set = |key: &str| list(key).map(|v| v.into_iter().collect::<BTreeSet<_>>());
    let mut keywords = set("keywords")?;
    let branch_keywords = set("branch_keywords")?;
    let loop_keywords = set("loop_keywords")?;
    let procedure_keywords = set("procedure_keywords")?;
    // Structural keywords are always keywords.
    for k in branch_keywords
        .iter()
        .chain(&loop_keywords)
        .chain(&procedure_keywords)
    {
        keywords.insert(k.clone());
    }
    let block_open = set("block_open")?;
    let block_close = set("block_close")?;
    for word in block_open.iter().chain(&block_close) {
        if word.chars().next().is_some_and(|c| c.is_alphabetic()) {
            keywords.insert(word.clone());
        }
    }
    Ok(LanguageProfile {
        name: name.clone(),
        extensions,
        line_comment,
        block_comment,
        string_delimiters,
        keywords,
        branch_keywords,
        loop_keywords,
        procedure_keywords,
        procedure_calls,
        block_open,
        block_close,
        terminator: string("terminator")?.filter(|s| !s.is_empty()),
        imports,
        module_separator: string("module_separator")?.unwrap_or_else(|| ".".into()),
    })
}

const PROFILE_KEYS: &[&str] = &[
    "extensions",
    "line_comment",
    "block_comment",
    "strings",
    "keywords",
    "branch_keywords",
    "loop_keywords",
    "procedure_keywords",
    "procedure_calls",
    "block_open",
    "block_close",
    "terminator",
    "imports",
    "module_separator",
];
