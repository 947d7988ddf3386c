use std::collections::{BTreeMap, BTreeSet};

use super::{
    BlockDef, BlockInstance, ConfigError, Declaration, PipelineConfig, ProcessorDecl, Reference,
    Spanned, Value,
};

/// Result of expanding one declaration scope.
#[derive(Default)]
struct Expanded {
    processors: Vec<ProcessorDecl>,
    outputs: Vec<Spanned<String>>,
}

/// Ids visible in a scope: plain processors, and per block instance the
/// (local, unprefixed) ids it exports.
struct ScopeIds {
    processors: BTreeSet<String>,
    instances: BTreeMap<String, BTreeSet<String>>,
}

/// Replaces every block instantiation by the block body. Inner ids become
/// `<instance-id>.<inner-id>`; formal parameters are substituted by the
/// instantiation arguments. A flat config is returned unchanged.
pub fn expand_blocks(config: &PipelineConfig) -> Result<PipelineConfig, ConfigError> {
    if config.is_flat() {
        return Ok(config.clone());
    }
    let mut stack = Vec::new();
    let scope = scope_ids(&config.declarations, &config.blocks)?;
    let mut out = Expanded::default();
    expand_scope(
        &config.declarations,
        &config.outputs,
        None,
        &BTreeMap::new(),
        &scope,
        &config.blocks,
        &mut stack,
        &mut out,
    )?;
    Ok(PipelineConfig {
        declarations: out.processors.into_iter().map(Declaration::Processor).collect(),
        blocks: config.blocks.clone(),
        outputs: out.outputs,
        views: config.views.clone(),
    })
}

fn scope_ids(
    decls: &[Declaration],
    blocks: &BTreeMap<String, BlockDef>,
) -> Result<ScopeIds, ConfigError> {
    let mut ids = ScopeIds {
        processors: BTreeSet::new(),
        instances: BTreeMap::new(),
    };
    for d in decls {
        match d {
            Declaration::Processor(p) => {
                ids.processors.insert(p.id.clone());
            }
            Declaration::Instance(inst) => {
                let def = lookup(blocks, inst)?;
                let exported = def.exports.iter().map(|e| e.value.clone()).collect();
                ids.instances.insert(inst.id.clone(), exported);
            }
        }
    }
    Ok(ids)
}

fn lookup<'a>(
    blocks: &'a BTreeMap<String, BlockDef>,
    inst: &BlockInstance,
) -> Result<&'a BlockDef, ConfigError> {
    blocks.get(&inst.block).ok_or_else(|| ConfigError::UnknownBlock {
        name: inst.block.clone(),
        line: inst.line,
    })
}

fn join(prefix: Option<&str>, id: &str) -> String {
    match prefix {
        Some(p) => format!("{p}.{id}"),
        None => id.to_string(),
    }
}

/// Resolves a reference written inside a scope. Top-level references to
/// unknown ids are left for graph validation; inside a block they may only
/// name body members.
fn resolve_reference(
    r: &Reference,
    prefix: Option<&str>,
    scope: &ScopeIds,
    line: usize,
    owner: &str,
) -> Result<Reference, ConfigError> {
    let (head, rest) = match r.producer.split_once('.') {
        Some((h, rest)) => (h, Some(rest)),
        None => (r.producer.as_str(), None),
    };
    let local = match (rest, scope.instances.get(head)) {
        (None, _) if scope.processors.contains(head) => true,
        (Some(inner), Some(exported)) => {
            if !exported.contains(inner) {
                return Err(ConfigError::NotExported {
                    reference: r.to_string(),
                    id: inner.to_string(),
                    instance: head.to_string(),
                    line,
                });
            }
            true
        }
        _ => false,
    };
    if local {
        return Ok(Reference {
            producer: join(prefix, &r.producer),
            port: r.port.clone(),
        });
    }
    match prefix {
        None => Ok(r.clone()),
        Some(_) => Err(ConfigError::DanglingReference {
            id: owner.to_string(),
            reference: r.to_string(),
            target: r.producer.clone(),
            line,
        }),
    }
}

fn substitute(
    value: &Spanned<Value>,
    prefix: Option<&str>,
    formals: &BTreeMap<String, Spanned<Value>>,
    scope: &ScopeIds,
    owner: &str,
) -> Result<Spanned<Value>, ConfigError> {
    match &value.value {
        Value::Word(w) => formals.get(w).cloned().ok_or_else(|| ConfigError::Syntax {
            line: value.line,
            column: value.column,
            message: format!("`{w}` is not a formal parameter"),
        }),
        Value::Ref(r) => Ok(Spanned {
            value: Value::Ref(resolve_reference(r, prefix, scope, value.line, owner)?),
            line: value.line,
            column: value.column,
        }),
        _ => Ok(value.clone()),
    }
}

#[allow(clippy::too_many_arguments)]
fn expand_scope(
    decls: &[Declaration],
    outputs: &[Spanned<String>],
    prefix: Option<&str>,
    formals: &BTreeMap<String, Spanned<Value>>,
    scope: &ScopeIds,
    blocks: &BTreeMap<String, BlockDef>,
    stack: &mut Vec<String>,
    out: &mut Expanded,
) -> Result<(), ConfigError> {
    for decl in decls {
        match decl {
            Declaration::Processor(p) => {
                let id = join(prefix, &p.id);
                let params = p
                    .params
                    .iter()
                    .map(|(k, v)| Ok((k.clone(), substitute(v, prefix, formals, scope, &id)?)))
                    .collect::<Result<BTreeMap<_, _>, ConfigError>>()?;
                out.processors.push(ProcessorDecl {
                    id,
                    kind: p.kind.clone(),
                    params,
                    line: p.line,
                });
            }
            Declaration::Instance(inst) => {
                let def = lookup(blocks, inst)?;
                if stack.contains(&def.name) {
                    let mut chain = stack.clone();
                    chain.push(def.name.clone());
                    return Err(ConfigError::RecursiveBlock { chain });
                }
                if def.formals.len() != inst.args.len() {
                    return Err(ConfigError::ArityMismatch {
                        block: def.name.clone(),
                        expected: def.formals.len(),
                        found: inst.args.len(),
                        line: inst.line,
                    });
                }
                let inst_id = join(prefix, &inst.id);
                let args = def
                    .formals
                    .iter()
                    .zip(&inst.args)
                    .map(|(f, a)| Ok((f.clone(), substitute(a, prefix, formals, scope, &inst_id)?)))
                    .collect::<Result<BTreeMap<_, _>, ConfigError>>()?;
                let inner_scope = scope_ids(&def.body, blocks)?;
                for export in &def.exports {
                    let known = match export.value.split_once('.') {
                        None => inner_scope.processors.contains(&export.value),
                        Some((h, rest)) => inner_scope
                            .instances
                            .get(h)
                            .is_some_and(|ex| ex.contains(rest)),
                    };
                    if !known {
                        return Err(ConfigError::Syntax {
                            line: export.line,
                            column: export.column,
                            message: format!(
                                "block `{}` exports `{}`, which it does not declare",
                                def.name, export.value
                            ),
                        });
                    }
                }
                stack.push(def.name.clone());
                expand_scope(
                    &def.body,
                    &def.outputs,
                    Some(&inst_id),
                    &args,
                    &inner_scope,
                    blocks,
                    stack,
                    out,
                )?;
                stack.pop();
            }
        }
    }
    for o in outputs {
        out.outputs.push(Spanned {
            value: join(prefix, &o.value),
            line: o.line,
            column: o.column,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::parse_config;
    use super::*;

    fn ids(c: &PipelineConfig) -> Vec<String> {
        c.processors().map(|p| p.id.clone()).collect()
    }

    #[test]
    fn flat_config_is_identity() {
        let c = parse_config("processor a : k\nprocessor b : k\n  x = @a.out\noutput b\n").unwrap();
        let e = expand_blocks(&c).unwrap();
        assert_eq!(e, c);
        assert_eq!(expand_blocks(&e).unwrap(), e);
    }

    #[test]
    fn double_instantiation_yields_disjoint_ids() {
        let text = "block B()\n  processor x : k\n  processor y : k\n    in = @x.out\n  export y\nend\nuse b1 : B()\nuse b2 : B()\nprocessor z : k\n  in = @b2.y.out\n";
        let e = expand_blocks(&parse_config(text).unwrap()).unwrap();
        assert!(e.is_flat());
        assert_eq!(ids(&e), ["b1.x", "b1.y", "b2.x", "b2.y", "z"]);
        let b1y = e.processors().find(|p| p.id == "b1.y").unwrap();
        assert_eq!(b1y.params["in"].value.to_string(), "@b1.x.out");
        let z = e.processors().find(|p| p.id == "z").unwrap();
        assert_eq!(z.params["in"].value.to_string(), "@b2.y.out");
        // Expansion is idempotent.
        assert_eq!(expand_blocks(&e).unwrap(), e);
    }

    #[test]
    fn formals_are_substituted() {
        let text = "block M(src, metric)\n  processor agg : metric-aggregator\n    input = src\n    metric = metric\n  export agg\n  output agg\nend\nprocessor s : scan\nuse m : M(@s.tree, \"loc\")\n";
        let e = expand_blocks(&parse_config(text).unwrap()).unwrap();
        let agg = e.processors().find(|p| p.id == "m.agg").unwrap();
        assert_eq!(agg.params["input"].value.to_string(), "@s.tree");
        assert_eq!(agg.params["metric"].value, Value::Str("loc".into()));
        assert_eq!(e.outputs[0].value, "m.agg");
    }

    #[test]
    fn nested_blocks_prefix_transitively() {
        let text = "block Inner(v)\n  processor p : k\n    x = v\n  export p\nend\nblock Outer(v)\n  use i : Inner(v)\n  processor q : k\n    in = @i.p.out\n  export i.p\nend\nuse o : Outer(3)\nprocessor r : k\n  in = @o.i.p.out\n";
        let e = expand_blocks(&parse_config(text).unwrap()).unwrap();
        assert_eq!(ids(&e), ["o.i.p", "o.q", "r"]);
        let q = e.processors().find(|p| p.id == "o.q").unwrap();
        assert_eq!(q.params["in"].value.to_string(), "@o.i.p.out");
        let p = e.processors().find(|p| p.id == "o.i.p").unwrap();
        assert_eq!(p.params["x"].value, Value::Int(3));
    }

    #[test]
    fn recursion_is_rejected() {
        let direct = "block B()\n  use again : B()\nend\nuse b : B()\n";
        let err = expand_blocks(&parse_config(direct).unwrap()).unwrap_err();
        assert_eq!(
            err,
            ConfigError::RecursiveBlock {
                chain: vec!["B".into(), "B".into()]
            }
        );
        let mutual = "block A()\n  use b : B()\nend\nblock B()\n  use a : A()\nend\nuse x : A()\n";
        let err = expand_blocks(&parse_config(mutual).unwrap()).unwrap_err();
        assert!(matches!(err, ConfigError::RecursiveBlock { ref chain } if chain == &["A", "B", "A"]));
    }

    #[test]
    fn scoping_rules() {
        let private = "block B()\n  processor x : k\nend\nuse b : B()\nprocessor z : k\n  in = @b.x.out\n";
        let err = expand_blocks(&parse_config(private).unwrap()).unwrap_err();
        assert!(matches!(err, ConfigError::NotExported { .. }), "{err:?}");
        let escaping = "processor s : k\nblock B()\n  processor x : k\n    in = @s.out\nend\nuse b : B()\n";
        let err = expand_blocks(&parse_config(escaping).unwrap()).unwrap_err();
        assert!(matches!(err, ConfigError::DanglingReference { .. }), "{err:?}");
        let arity = "block B(a)\nend\nuse b : B()\n";
        let err = expand_blocks(&parse_config(arity).unwrap()).unwrap_err();
        assert!(matches!(err, ConfigError::ArityMismatch { expected: 1, found: 0, .. }));
    }
}
