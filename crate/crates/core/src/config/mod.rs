//! Pipeline configuration: textual format, block library and expansion.

mod expand;
pub mod syntax;

use std::collections::BTreeMap;

pub use expand::expand_blocks;
pub use syntax::{Reference, Spanned, Value};

use syntax::{Cursor, Section};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate id `{id}` (lines {first_line} and {second_line})")]
    DuplicateId {
        id: String,
        first_line: usize,
        second_line: usize,
    },
    #[error("unknown block `{name}` (line {line})")]
    UnknownBlock { name: String, line: usize },
    #[error("recursive block instantiation: {}", chain.join(" -> "))]
    RecursiveBlock { chain: Vec<String> },
    #[error("block `{block}` expects {expected} argument(s), got {found} (line {line})")]
    ArityMismatch {
        block: String,
        expected: usize,
        found: usize,
        line: usize,
    },
    #[error("`{reference}` refers to `{id}`, which block instance `{instance}` does not export (line {line})")]
    NotExported {
        reference: String,
        id: String,
        instance: String,
        line: usize,
    },
    #[error("unknown processor kind `{kind}` for `{id}` (line {line})")]
    UnknownProcessorKind {
        id: String,
        kind: String,
        line: usize,
    },
    #[error("dangling reference `{reference}` in `{id}`: no processor `{target}` with that output (line {line})")]
    DanglingReference {
        id: String,
        reference: String,
        target: String,
        line: usize,
    },
    #[error("cycle detected: {}", path.join(" -> "))]
    CycleDetected { path: Vec<String> },
    #[error("parameter `{param}` of `{id}` expects {expected}, found {found} (line {line})")]
    ParamTypeMismatch {
        id: String,
        param: String,
        expected: String,
        found: String,
        line: usize,
    },
    #[error("missing required parameter `{param}` of `{id}` (line {line})")]
    MissingRequiredParam {
        id: String,
        param: String,
        line: usize,
    },
    #[error("unknown parameter `{param}` for `{id}` of kind `{kind}` (line {line})")]
    UnknownParam {
        id: String,
        kind: String,
        param: String,
        line: usize,
    },
    #[error("`output {id}` names no processor (line {line})")]
    UnknownOutput { id: String, line: usize },
    #[error("invalid view `{id}`: {message} (line {line})")]
    InvalidView {
        id: String,
        message: String,
        line: usize,
    },
}

impl ConfigError {
    /// Source line the error points at, when it has one.
    pub fn line(&self) -> Option<usize> {
        use ConfigError::*;
        match self {
            Syntax { line, .. }
            | UnknownBlock { line, .. }
            | ArityMismatch { line, .. }
            | NotExported { line, .. }
            | UnknownProcessorKind { line, .. }
            | DanglingReference { line, .. }
            | ParamTypeMismatch { line, .. }
            | MissingRequiredParam { line, .. }
            | UnknownParam { line, .. }
            | UnknownOutput { line, .. }
            | InvalidView { line, .. } => Some(*line),
            DuplicateId { second_line, .. } => Some(*second_line),
            RecursiveBlock { .. } | CycleDetected { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessorDecl {
    pub id: String,
    pub kind: String,
    pub params: BTreeMap<String, Spanned<Value>>,
    pub line: usize,
}

impl ProcessorDecl {
    pub fn references(&self) -> impl Iterator<Item = (&str, &Reference)> {
        self.params.iter().filter_map(|(name, v)| match &v.value {
            Value::Ref(r) => Some((name.as_str(), r)),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockInstance {
    pub id: String,
    pub block: String,
    pub args: Vec<Spanned<Value>>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Declaration {
    Processor(ProcessorDecl),
    Instance(BlockInstance),
}

impl Declaration {
    pub fn id(&self) -> &str {
        match self {
            Declaration::Processor(p) => &p.id,
            Declaration::Instance(b) => &b.id,
        }
    }

    pub fn line(&self) -> usize {
        match self {
            Declaration::Processor(p) => p.line,
            Declaration::Instance(b) => b.line,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockDef {
    pub name: String,
    pub formals: Vec<String>,
    pub body: Vec<Declaration>,
    pub exports: Vec<Spanned<String>>,
    pub outputs: Vec<Spanned<String>>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewDecl {
    pub id: String,
    pub params: BTreeMap<String, Spanned<Value>>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub declarations: Vec<Declaration>,
    pub blocks: BTreeMap<String, BlockDef>,
    /// Processor ids marked with `output`.
    pub outputs: Vec<Spanned<String>>,
    pub views: Vec<ViewDecl>,
}

impl PipelineConfig {
    pub fn is_flat(&self) -> bool {
        self.declarations
            .iter()
            .all(|d| matches!(d, Declaration::Processor(_)))
    }

    pub fn processors(&self) -> impl Iterator<Item = &ProcessorDecl> {
        self.declarations.iter().filter_map(|d| match d {
            Declaration::Processor(p) => Some(p),
            Declaration::Instance(_) => None,
        })
    }
}

struct OpenBlock {
    def: BlockDef,
    ids: BTreeMap<String, usize>,
}

/// Parses pipeline source text. Block instantiations are left unexpanded.
pub fn parse_config(text: &str) -> Result<PipelineConfig, ConfigError> {
    let sections = syntax::parse_sections(text)?;
    let mut config = PipelineConfig::default();
    let mut top_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut block_lines: BTreeMap<String, usize> = BTreeMap::new();
    let mut view_lines: BTreeMap<String, usize> = BTreeMap::new();
    let mut open: Option<OpenBlock> = None;

    for section in &sections {
        let mut cur = Cursor::new(&section.header);
        let keyword = cur.expect_word("directive")?;
        let line = section.line();
        let no_params = |s: &Section| -> Result<(), ConfigError> {
            match s.params.values().next() {
                Some(p) => Err(ConfigError::Syntax {
                    line: p.line,
                    column: p.column,
                    message: format!("`{keyword}` takes no parameter lines"),
                }),
                None => Ok(()),
            }
        };
        match keyword.as_str() {
            "processor" => {
                let id = cur.expect_ident("processor id")?;
                cur.expect_punct(":")?;
                let kind = cur.expect_word("processor kind")?;
                cur.expect_end()?;
                let formals = open.as_ref().map(|b| b.def.formals.as_slice());
                for v in section.params.values() {
                    check_words(&v.value, formals, v.line, v.column)?;
                }
                let decl = ProcessorDecl {
                    id: id.clone(),
                    kind,
                    params: section.params.clone(),
                    line,
                };
                let ids = match open.as_mut() {
                    Some(b) => &mut b.ids,
                    None => &mut top_ids,
                };
                claim_id(ids, &id, line)?;
                match open.as_mut() {
                    Some(b) => b.def.body.push(Declaration::Processor(decl)),
                    None => config.declarations.push(Declaration::Processor(decl)),
                }
            }
            "use" => {
                no_params(section)?;
                let id = cur.expect_ident("instance id")?;
                cur.expect_punct(":")?;
                let block = cur.expect_ident("block name")?;
                cur.expect_punct("(")?;
                let mut args = Vec::new();
                if !cur.eat_punct(")") {
                    loop {
                        let v = cur.value()?;
                        let formals = open.as_ref().map(|b| b.def.formals.as_slice());
                        check_words(&v.value, formals, v.line, v.column)?;
                        args.push(v);
                        if cur.eat_punct(")") {
                            break;
                        }
                        cur.expect_punct(",")?;
                    }
                }
                cur.expect_end()?;
                let inst = BlockInstance {
                    id: id.clone(),
                    block,
                    args,
                    line,
                };
                let ids = match open.as_mut() {
                    Some(b) => &mut b.ids,
                    None => &mut top_ids,
                };
                claim_id(ids, &id, line)?;
                match open.as_mut() {
                    Some(b) => b.def.body.push(Declaration::Instance(inst)),
                    None => config.declarations.push(Declaration::Instance(inst)),
                }
            }
            "block" => {
                no_params(section)?;
                if open.is_some() {
                    return Err(cur.error("block definitions cannot be nested"));
                }
                let name = cur.expect_ident("block name")?;
                cur.expect_punct("(")?;
                let mut formals: Vec<String> = Vec::new();
                if !cur.eat_punct(")") {
                    loop {
                        let col = cur.column();
                        let f = cur.expect_ident("formal parameter")?;
                        if matches!(f.as_str(), "true" | "false") || formals.contains(&f) {
                            return Err(ConfigError::Syntax {
                                line,
                                column: col,
                                message: format!("invalid or repeated formal parameter `{f}`"),
                            });
                        }
                        formals.push(f);
                        if cur.eat_punct(")") {
                            break;
                        }
                        cur.expect_punct(",")?;
                    }
                }
                cur.expect_end()?;
                if let Some(&first) = block_lines.get(&name) {
                    return Err(ConfigError::DuplicateId {
                        id: name,
                        first_line: first,
                        second_line: line,
                    });
                }
                block_lines.insert(name.clone(), line);
                open = Some(OpenBlock {
                    def: BlockDef {
                        name,
                        formals,
                        body: Vec::new(),
                        exports: Vec::new(),
                        outputs: Vec::new(),
                        line,
                    },
                    ids: BTreeMap::new(),
                });
            }
            "end" => {
                no_params(section)?;
                cur.expect_end()?;
                let Some(block) = open.take() else {
                    return Err(ConfigError::Syntax {
                        line,
                        column: 1,
                        message: "`end` without an open block".into(),
                    });
                };
                config.blocks.insert(block.def.name.clone(), block.def);
            }
            "export" => {
                no_params(section)?;
                let col = cur.column();
                let id = cur.expect_word("exported id")?;
                cur.expect_end()?;
                let Some(block) = open.as_mut() else {
                    return Err(ConfigError::Syntax {
                        line,
                        column: 1,
                        message: "`export` outside of a block".into(),
                    });
                };
                block.def.exports.push(Spanned {
                    value: id,
                    line,
                    column: col,
                });
            }
            "output" => {
                no_params(section)?;
                let col = cur.column();
                let id = cur.expect_word("processor id")?;
                cur.expect_end()?;
                let marked = Spanned {
                    value: id,
                    line,
                    column: col,
                };
                match open.as_mut() {
                    Some(b) => b.def.outputs.push(marked),
                    None => config.outputs.push(marked),
                }
            }
            "view" => {
                let id = cur.expect_ident("view id")?;
                cur.expect_end()?;
                if open.is_some() {
                    return Err(ConfigError::Syntax {
                        line,
                        column: 1,
                        message: "views cannot be declared inside a block".into(),
                    });
                }
                if let Some(&first) = view_lines.get(&id) {
                    return Err(ConfigError::DuplicateId {
                        id,
                        first_line: first,
                        second_line: line,
                    });
                }
                for v in section.params.values() {
                    check_words(&v.value, None, v.line, v.column)?;
                }
                view_lines.insert(id.clone(), line);
                config.views.push(ViewDecl {
                    id,
                    params: section.params.clone(),
                    line,
                });
            }
            other => {
                return Err(ConfigError::Syntax {
                    line,
                    column: 1,
                    message: format!("unknown directive `{other}`"),
                })
            }
        }
    }
    if let Some(block) = open {
        return Err(ConfigError::Syntax {
            line: block.def.line,
            column: 1,
            message: format!("block `{}` is missing `end`", block.def.name),
        });
    }

    let known = |name: &str| config.blocks.contains_key(name);
    let instances = config
        .declarations
        .iter()
        .chain(config.blocks.values().flat_map(|b| b.body.iter()));
    for decl in instances {
        if let Declaration::Instance(inst) = decl {
            if !known(&inst.block) {
                return Err(ConfigError::UnknownBlock {
                    name: inst.block.clone(),
                    line: inst.line,
                });
            }
        }
    }
    Ok(config)
}

fn claim_id(ids: &mut BTreeMap<String, usize>, id: &str, line: usize) -> Result<(), ConfigError> {
    if let Some(&first) = ids.get(id) {
        return Err(ConfigError::DuplicateId {
            id: id.to_string(),
            first_line: first,
            second_line: line,
        });
    }
    ids.insert(id.to_string(), line);
    Ok(())
}

fn check_words(
    value: &Value,
    formals: Option<&[String]>,
    line: usize,
    column: usize,
) -> Result<(), ConfigError> {
    let Value::Word(w) = value else {
        return Ok(());
    };
    match formals {
        Some(f) if f.iter().any(|x| x == w) => Ok(()),
        Some(_) => Err(ConfigError::Syntax {
            line,
            column,
            message: format!("`{w}` is not a formal parameter of the enclosing block"),
        }),
        None => Err(ConfigError::Syntax {
            line,
            column,
            message: format!("unquoted word `{w}`; string values must be double-quoted"),
        }),
    }
}
