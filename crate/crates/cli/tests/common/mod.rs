// Helpers for driving the binary from integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

pub const FIXED_TIME: &str = "2024-03-01T12:00:00Z";

pub fn conquard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conquard"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn write(path: &Path, text: &str) {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p).unwrap();
    }
    fs::write(path, text).unwrap();
}

const KEYWORDS: &[&str] = &[
    "abstract", "break", "case", "catch", "class", "const", "continue", "default", "delete", "do", "else", "enum",
    "extends", "final", "finally", "for", "foreach", "func", "function", "goto", "if", "implements", "import",
    "interface", "namespace", "new", "package", "private", "protected", "public", "return", "static", "struct",
    "super", "switch", "this", "throw", "throws", "try", "typedef", "union", "using", "var", "virtual", "void",
    "volatile", "while",
];

/// Line `k` of a family of pairwise distinct three-token lines
/// (`keyword keyword ;`). Because `;` only ever closes a line, any token
/// repeat longer than five tokens is made of repeated whole lines.
pub fn distinct_line(k: usize) -> String {
    let n = KEYWORDS.len();
    assert!(k < n * n);
    format!("{} {} ;", KEYWORDS[k % n], KEYWORDS[k / n])
}

/// Two 50-line files sharing their first `shared` lines and nothing else:
/// 100 source lines, `2 * shared` of them cloned.
pub fn write_shared_block_project(dir: &Path, shared: usize) {
    let block: Vec<String> = (0..shared).map(distinct_line).collect();
    for (f, offset) in [("a.java", 100), ("b.java", 200)] {
        let mut lines = block.clone();
        lines.extend((0..50 - shared).map(|k| distinct_line(offset + k)));
        write(&dir.join(f), &(lines.join("\n") + "\n"));
    }
}

/// A small multi-language project with two components.
pub fn write_small_project(dir: &Path) {
    write(
        &dir.join("src/ui/View.java"),
        "package ui;\nimport data.Store;\n\n// Renders things.\npublic class View {\n  int draw(int n) {\n    for (int i = 0; i < n; i++) {\n      if (i > 2) { n--; }\n    }\n    return n;\n  }\n}\n",
    );
    write(
        &dir.join("src/data/Store.java"),
        "package data;\n\npublic class Store {\n  /* storage */\n  int get(int k) {\n    while (k > 0) { k--; }\n    return k;\n  }\n}\n",
    );
    write(&dir.join("scripts/build.sh"), "# build\nfor f in *.java; do\n  echo \"$f\"\ndone\n");
}

pub const SMALL_ARCH: &str = "component ui\n  match = [\"src/ui/**\"]\ncomponent data\n  match = [\"src/data/**\"]\nallow ui -> data\n";
