use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use chrono::DateTime;
use conquard_core::config::{parse_config, ConfigError};
use conquard_core::engine::{
    build_graph, execute, Data, DataType, ExecEnv, NodeOutcome, Outputs, ParamSpec, ParamType, ProcessorDescriptor,
    Registry, Snapshot,
};
use conquard_core::config::Value;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INPUTS: [&str; 4] = ["in0", "in1", "in2", "in3"];

/// `n` takes up to four snapshot inputs and logs every execution.
fn registry(log: Arc<Mutex<Vec<String>>>) -> Registry {
    let mut params: Vec<ParamSpec> = INPUTS
        .iter()
        .map(|p| ParamSpec::optional(p, ParamType::Ref(DataType::Snapshot), None))
        .collect();
    params.push(ParamSpec::optional("fail", ParamType::Boolean, Some(Value::Bool(false))));
    let mut r = Registry::empty();
    r.register(ProcessorDescriptor {
        kind: "n".into(),
        description: "test node".into(),
        params,
        outputs: vec![("out".into(), DataType::Snapshot)],
        executor: Arc::new(move |ctx| {
            log.lock().unwrap().push(ctx.id.to_string());
            if ctx.bool("fail")? {
                return Err("planned failure".into());
            }
            let mut records = Vec::new();
            for p in INPUTS {
                if ctx.param(p).is_some() {
                    records.extend(ctx.snapshot(p)?.records.iter().cloned());
                }
            }
            records.push((ctx.id.to_string(), "seen".into(), records.len() as f64));
            Ok(Outputs::from([("out".into(), Data::Snapshot(Arc::new(Snapshot { records })))]))
        }),
    })
    .unwrap();
    r
}

struct Dag {
    ids: Vec<String>,
    producers: BTreeMap<String, Vec<String>>,
    failing: BTreeSet<String>,
}

fn random_dag(seed: u64) -> Dag {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n = r.gen_range(0..30);
    // Random names, then a random hidden topological order.
    let mut ids: Vec<String> = (0..n).map(|k| format!("{}{k}", ["p", "x", "b", "m"][r.gen_range(0..4)])).collect();
    ids.shuffle(&mut r);
    let mut producers = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        let mut ps: Vec<String> = Vec::new();
        if i > 0 {
            for _ in 0..r.gen_range(0..=4) {
                let p = ids[r.gen_range(0..i)].clone();
                if !ps.contains(&p) {
                    ps.push(p);
                }
            }
        }
        producers.insert(id.clone(), ps);
    }
    let failing = ids.iter().filter(|_| r.gen_bool(0.1)).cloned().collect();
    Dag { ids, producers, failing }
}

fn config_text(dag: &Dag, order: &[String]) -> String {
    let mut s = String::new();
    for id in order {
        s.push_str(&format!("processor {id} : n\n"));
        for (port, p) in INPUTS.iter().zip(&dag.producers[id]) {
            s.push_str(&format!("  {port} = @{p}.out\n"));
        }
        if dag.failing.contains(id) {
            s.push_str("  fail = true\n");
        }
    }
    s
}

/// Repeatedly takes the smallest id whose producers are all placed.
fn oracle_order(dag: &Dag) -> Vec<String> {
    let mut placed: Vec<String> = Vec::new();
    let mut left: BTreeSet<&String> = dag.ids.iter().collect();
    while let Some(next) = left
        .iter()
        .find(|id| dag.producers[**id].iter().all(|p| placed.contains(p)))
        .copied()
    {
        left.remove(next);
        placed.push(next.clone());
    }
    placed
}

fn env() -> ExecEnv {
    ExecEnv::new(".", ".", DateTime::from_timestamp(0, 0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn order_is_the_smallest_first_linearization(seed in any::<u64>()) {
        let dag = random_dag(seed);
        let log = Arc::new(Mutex::new(Vec::new()));
        let g = build_graph(&parse_config(&config_text(&dag, &dag.ids)).unwrap(), &registry(log)).unwrap();
        prop_assert_eq!(&g.order, &oracle_order(&dag));
        let pos: BTreeMap<&str, usize> = g.order.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        for (from, to) in &g.edges {
            prop_assert!(pos[from.as_str()] < pos[to.as_str()]);
        }
        let edge_count: usize = dag.producers.values().map(Vec::len).sum();
        prop_assert_eq!(g.edges.len(), edge_count);
    }

    #[test]
    fn declaration_order_does_not_matter(seed in any::<u64>(), shuffle in any::<u64>()) {
        let dag = random_dag(seed);
        let mut perm = dag.ids.clone();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        let reg = registry(Arc::new(Mutex::new(Vec::new())));
        let a = build_graph(&parse_config(&config_text(&dag, &dag.ids)).unwrap(), &reg).unwrap();
        let b = build_graph(&parse_config(&config_text(&dag, &perm)).unwrap(), &reg).unwrap();
        prop_assert_eq!(&a.order, &b.order);
        prop_assert_eq!(&a.edges, &b.edges);
    }

    #[test]
    fn each_node_runs_once_and_failures_propagate(seed in any::<u64>()) {
        let dag = random_dag(seed);
        let log = Arc::new(Mutex::new(Vec::new()));
        let reg = registry(log.clone());
        let g = build_graph(&parse_config(&config_text(&dag, &dag.ids)).unwrap(), &reg).unwrap();
        let result = execute(&g, &reg, &env());

        // Expected status per node, walking the oracle order.
        let mut ok: BTreeSet<&str> = BTreeSet::new();
        let mut expected_runs = Vec::new();
        for id in &g.order {
            let upstream_ok = dag.producers[id].iter().all(|p| ok.contains(p.as_str()));
            let status = result.get(id).unwrap().status();
            if !upstream_ok {
                prop_assert_eq!(status, "FAILED_UPSTREAM");
                continue;
            }
            expected_runs.push(id.clone());
            if dag.failing.contains(id) {
                prop_assert_eq!(status, "FAILED");
            } else {
                prop_assert_eq!(status, "OK");
                ok.insert(id);
            }
        }
        prop_assert_eq!(&*log.lock().unwrap(), &expected_runs);
        prop_assert_eq!(result.has_failures(), !dag.failing.is_empty());
        prop_assert_eq!(result.outcomes.len(), dag.ids.len());
    }

    #[test]
    fn repeated_runs_agree(seed in any::<u64>()) {
        let mut dag = random_dag(seed);
        dag.failing.clear();
        let reg = registry(Arc::new(Mutex::new(Vec::new())));
        let g = build_graph(&parse_config(&config_text(&dag, &dag.ids)).unwrap(), &reg).unwrap();
        let snapshot = |r: &conquard_core::engine::ExecutionResult| -> Vec<(String, Vec<(String, String, f64)>)> {
            r.outcomes
                .iter()
                .map(|(id, o)| match o.outputs().and_then(|out| out.get("out")) {
                    Some(Data::Snapshot(s)) => (id.clone(), s.records.clone()),
                    _ => (id.clone(), Vec::new()),
                })
                .collect()
        };
        let first = snapshot(&execute(&g, &reg, &env()));
        for _ in 0..3 {
            prop_assert_eq!(&snapshot(&execute(&g, &reg, &env())), &first);
        }
    }

    #[test]
    fn back_edges_are_cycles(seed in any::<u64>()) {
        let mut dag = random_dag(seed);
        prop_assume!(dag.ids.len() >= 2);
        // Make the first node consume the last one, closing a loop whenever
        // the last node (transitively) depends on the first.
        let (first, last) = (dag.ids[0].clone(), dag.ids[dag.ids.len() - 1].clone());
        dag.producers.get_mut(&first).unwrap().push(last.clone());
        let reg = registry(Arc::new(Mutex::new(Vec::new())));
        let built = build_graph(&parse_config(&config_text(&dag, &dag.ids)).unwrap(), &reg);
        let mut reach = BTreeSet::from([first.clone()]);
        let mut changed = true;
        while changed {
            changed = false;
            for id in &dag.ids {
                if !reach.contains(id) && dag.producers[id].iter().any(|p| reach.contains(p)) {
                    reach.insert(id.clone());
                    changed = true;
                }
            }
        }
        if reach.contains(&last) {
            match built {
                Err(ConfigError::CycleDetected { path }) => {
                    prop_assert_eq!(path.first(), path.last());
                    prop_assert!(path.len() >= 2);
                    // Each step follows a real edge: consumer -> producer or the reverse.
                    for w in path.windows(2) {
                        let edge = dag.producers[&w[1]].contains(&w[0]) || dag.producers[&w[0]].contains(&w[1]);
                        prop_assert!(edge, "{:?} is not an edge", w);
                    }
                    prop_assert_eq!(path[0].clone(), path[..path.len() - 1].iter().min().unwrap().clone());
                }
                other => prop_assert!(false, "expected a cycle, got {:?}", other.map(|g| g.order)),
            }
        } else {
            prop_assert!(built.is_ok());
        }
    }
}

#[test]
fn empty_pipeline_runs() {
    let reg = registry(Arc::new(Mutex::new(Vec::new())));
    let g = build_graph(&parse_config("").unwrap(), &reg).unwrap();
    let r = execute(&g, &reg, &env());
    assert!(r.outcomes.is_empty() && !r.has_failures());
    assert!(matches!(r.get("x"), None::<&NodeOutcome>));
}

#[test]
fn builtin_catalog_is_sorted_and_unique() {
    let reg = Registry::with_builtins();
    let kinds: Vec<&str> = reg.list().map(|d| d.kind.as_str()).collect();
    let mut sorted = kinds.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(kinds, sorted);
    assert_eq!(reg.catalog().lines().count(), reg.len());
}

#[test]
fn custom_processors_extend_the_catalog() {
    let mut reg = Registry::with_builtins();
    let before = reg.catalog().lines().count();
    reg.register(ProcessorDescriptor {
        kind: "file-counter".into(),
        description: "counts files".into(),
        params: vec![ParamSpec::required("input", ParamType::Ref(DataType::Tree))],
        outputs: vec![("snapshot".into(), DataType::Snapshot)],
        executor: Arc::new(|ctx| {
            let n = ctx.tree("input")?.root.files().count();
            let s = Snapshot { records: vec![(String::new(), "files".into(), n as f64)] };
            Ok(Outputs::from([("snapshot".into(), Data::Snapshot(Arc::new(s)))]))
        }),
    })
    .unwrap();
    assert_eq!(reg.catalog().lines().count(), before + 1);
    assert!(reg.catalog().contains("file-counter\t(input: @tree (required))\t-> snapshot: snapshot"));

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.c"), "int x;\n").unwrap();
    std::fs::write(dir.path().join("b.py"), "x = 1\n").unwrap();
    let text = "processor scan : scope-scanner\nprocessor count : file-counter\n  input = @scan.tree\n";
    let g = build_graph(&parse_config(text).unwrap(), &reg).unwrap();
    let r = execute(&g, &reg, &ExecEnv::new(dir.path(), dir.path(), DateTime::from_timestamp(0, 0).unwrap()));
    match r.get("count").and_then(NodeOutcome::outputs).and_then(|o| o.get("snapshot")) {
        Some(Data::Snapshot(s)) => assert_eq!(s.records[0].2, 2.0),
        other => panic!("unexpected {other:?}"),
    }
}
