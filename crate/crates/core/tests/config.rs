use std::collections::BTreeSet;

use conquard_core::config::{expand_blocks, parse_config, ConfigError};
use proptest::prelude::*;

const LIBRARY: &str = "\
block Inner(src)
  processor a : loc-analyzer
    input = src
  processor b : structure-analyzer
    input = @a.tree
  export b
end
block Outer(src)
  use one : Inner(src)
  use two : Inner(@one.b.tree)
  processor last : loc-analyzer
    input = @two.b.tree
  export last
end
processor scan : scope-scanner
";

fn ids(text: &str) -> Vec<String> {
    let cfg = expand_blocks(&parse_config(text).unwrap()).unwrap();
    cfg.processors().map(|p| p.id.clone()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn instances_expand_to_disjoint_prefixed_ids(names in prop::collection::btree_set("[a-z][a-z0-9_]{0,6}", 1..6)) {
        prop_assume!(!names.contains("scan"));
        let mut text = LIBRARY.to_string();
        for n in &names {
            text.push_str(&format!("use {n} : Outer(@scan.tree)\n"));
        }
        let ids = ids(&text);
        let unique: BTreeSet<&String> = ids.iter().collect();
        prop_assert_eq!(unique.len(), ids.len());
        prop_assert_eq!(ids.len(), 1 + 5 * names.len());
        for n in &names {
            for inner in ["one.a", "one.b", "two.a", "two.b", "last"] {
                let expected = format!("{n}.{inner}");
                prop_assert!(ids.contains(&expected), "missing {}", expected);
            }
        }
    }
}

#[test]
fn flat_config_is_unchanged() {
    let text = "processor s : scope-scanner\nprocessor l : loc-analyzer\n  input = @s.tree\n";
    let cfg = parse_config(text).unwrap();
    assert_eq!(expand_blocks(&cfg).unwrap(), cfg);
    assert!(parse_config("").unwrap().declarations.is_empty());
}

#[test]
fn structural_errors() {
    assert_eq!(
        parse_config("processor p : a\nprocessor p : b\n").unwrap_err(),
        ConfigError::DuplicateId {
            id: "p".into(),
            first_line: 1,
            second_line: 2
        }
    );
    let recursive = "block B(x)\n  use inner : B(x)\n  processor p : loc-analyzer\n    input = x\n  export p\nend\nprocessor s : scope-scanner\nuse b : B(@s.tree)\n";
    assert!(matches!(
        parse_config(recursive).and_then(|c| expand_blocks(&c)),
        Err(ConfigError::RecursiveBlock { .. })
    ));
    assert!(matches!(
        parse_config("use b : Nope(1)\n").and_then(|c| expand_blocks(&c)),
        Err(ConfigError::UnknownBlock { .. })
    ));
    assert!(matches!(parse_config("processor : x\n"), Err(ConfigError::Syntax { line: 1, .. })));
}
