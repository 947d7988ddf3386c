// Generators and brute-force oracles shared by the integration tests and
// the acceptance target. Each test binary uses a different subset.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use conquard_core::arch::{Dependency, Target};
use conquard_core::assess::{AggregationOp, Color};
use conquard_core::clones::CloneClass;
use conquard_core::report::{Rect, TreemapLayout};
use conquard_core::scope::{ResourceNode, Token, TokenKind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- clones

const KEYWORDS: &[&str] = &["if", "while", "for", "return", "else", "new"];
const OPERATORS: &[&str] = &["+", "=", "(", ")", ";", "{", "}", ",", "*", "<"];

fn random_token(rng: &mut ChaCha8Rng, vocab: usize) -> (TokenKind, String) {
    match rng.gen_range(0..vocab + 2) {
        0 => (TokenKind::Identifier, format!("v{}", rng.gen_range(0..50))),
        1 => (TokenKind::Literal, rng.gen_range(0..100).to_string()),
        k => {
            let k = k - 2;
            if k < KEYWORDS.len() {
                (TokenKind::Keyword, KEYWORDS[k].to_string())
            } else {
                (TokenKind::Operator, OPERATORS[(k - KEYWORDS.len()) % OPERATORS.len()].to_string())
            }
        }
    }
}

/// Files of raw tokens (line numbers attached later). Planted duplicates
/// are copies of earlier stretches, with identifiers and literals renamed
/// so only the normalized form repeats.
pub fn random_clone_corpus(rng: &mut ChaCha8Rng, max_tokens: usize) -> Vec<(String, Vec<Token>)> {
    let total = rng.gen_range(max_tokens / 10..=max_tokens);
    let vocab = rng.gen_range(2..=KEYWORDS.len() + OPERATORS.len());
    let n_files = rng.gen_range(1..=8);
    let mut raw: Vec<Vec<(TokenKind, String)>> = vec![Vec::new(); n_files];
    let mut produced = 0;
    while produced < total {
        let f = rng.gen_range(0..n_files);
        let planted = produced > 50 && rng.gen_bool(0.3);
        if planted {
            let src = rng.gen_range(0..n_files);
            if raw[src].len() > 10 {
                let len = rng.gen_range(5..=raw[src].len().min(150)).min(total - produced);
                let start = rng.gen_range(0..=raw[src].len() - len);
                let copy: Vec<(TokenKind, String)> = raw[src][start..start + len]
                    .iter()
                    .map(|(k, t)| match k {
                        TokenKind::Identifier => (*k, format!("w{}", rng.gen_range(0..50))),
                        TokenKind::Literal => (*k, format!("\"s{}\"", rng.gen_range(0..9))),
                        _ => (*k, t.clone()),
                    })
                    .collect();
                produced += copy.len();
                raw[f].extend(copy);
                continue;
            }
        }
        let run = rng.gen_range(1..=40).min(total - produced);
        for _ in 0..run {
            raw[f].push(random_token(rng, vocab));
        }
        produced += run;
    }
    let mut out: Vec<(String, Vec<Token>)> = raw
        .into_iter()
        .enumerate()
        .filter(|(_, r)| !r.is_empty())
        .map(|(i, r)| {
            let mut line = 1;
            let tokens = r
                .into_iter()
                .map(|(kind, text)| {
                    if rng.gen_bool(0.25) {
                        line += rng.gen_range(1..=2);
                    }
                    let end_line = if kind == TokenKind::Literal && rng.gen_bool(0.05) { line + 1 } else { line };
                    let t = Token {
                        kind,
                        text,
                        line,
                        end_line,
                    };
                    line = end_line;
                    t
                })
                .collect();
            (format!("src/f{i}.x"), tokens)
        })
        .collect();
    out.shuffle(rng);
    out
}

/// (length, sorted (path, start token)) per clone class.
pub type CloneShape = BTreeSet<(usize, Vec<(String, usize)>)>;

pub fn clone_shape(classes: &[CloneClass]) -> CloneShape {
    classes
        .iter()
        .map(|c| {
            let mut occ: Vec<(String, usize)> = c.occurrences.iter().map(|o| (o.path.clone(), o.start)).collect();
            occ.sort();
            (c.length, occ)
        })
        .collect()
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum Left<'a> {
    FileStart(usize),
    Tok(&'a str),
}

/// Maximal repeats by exhaustive pairwise comparison. A sequence is a
/// maximal repeat iff it is the longest common extension of two positions
/// whose preceding symbols differ (a file start differs from everything).
pub fn oracle_clones(files: &[(String, Vec<Token>)], min_length: usize) -> CloneShape {
    let norm: Vec<Vec<&str>> = files
        .iter()
        .map(|(_, ts)| {
            ts.iter()
                .map(|t| match t.kind {
                    TokenKind::Identifier => "ID",
                    TokenKind::Literal => "LIT",
                    _ => t.text.as_str(),
                })
                .collect()
        })
        .collect();
    let positions: Vec<(usize, usize)> = norm
        .iter()
        .enumerate()
        .flat_map(|(f, s)| (0..s.len()).map(move |i| (f, i)))
        .collect();
    let left = |(f, i): (usize, usize)| if i == 0 { Left::FileStart(f) } else { Left::Tok(norm[f][i - 1]) };
    let mut candidates: HashSet<&[&str]> = HashSet::new();
    for (a, &pa) in positions.iter().enumerate() {
        for &pb in &positions[a + 1..] {
            if left(pa) == left(pb) {
                continue;
            }
            let (sa, sb) = (&norm[pa.0][pa.1..], &norm[pb.0][pb.1..]);
            let l = sa.iter().zip(sb).take_while(|(x, y)| x == y).count();
            if l >= min_length {
                candidates.insert(&sa[..l]);
            }
        }
    }
    candidates
        .into_iter()
        .map(|cand| {
            let mut occ = Vec::new();
            for (f, s) in norm.iter().enumerate() {
                for i in 0..s.len() {
                    if s[i..].starts_with(cand) {
                        occ.push((files[f].0.clone(), i));
                    }
                }
            }
            occ.sort();
            (cand.len(), occ)
        })
        .collect()
}

/// Cloned-line count by marking every line of every occurrence.
pub fn oracle_cloned_lines(files: &[(String, Vec<Token>)], shape: &CloneShape) -> (usize, usize) {
    let by_path: BTreeMap<&str, &Vec<Token>> = files.iter().map(|(p, t)| (p.as_str(), t)).collect();
    let mut marked: BTreeSet<(&str, u32)> = BTreeSet::new();
    for (len, occs) in shape {
        for (p, start) in occs {
            for t in &by_path[p.as_str()][*start..start + len] {
                for l in t.line..=t.end_line {
                    marked.insert((p.as_str(), l));
                }
            }
        }
    }
    let mut all: BTreeSet<(&str, u32)> = BTreeSet::new();
    for (p, ts) in files {
        for t in ts {
            for l in t.line..=t.end_line {
                all.insert((p.as_str(), l));
            }
        }
    }
    (marked.len(), all.len())
}

// ----------------------------------------------------------- trees

/// A random directory tree with up to `max_leaves` files. Each file gets
/// metric `m` (integral, so sums are exact) with probability `p_value`.
pub fn random_tree(rng: &mut ChaCha8Rng, max_leaves: usize, p_value: f64) -> ResourceNode {
    let mut root = ResourceNode::root();
    let leaves = rng.gen_range(1..=max_leaves);
    let mut dirs: Vec<String> = vec![String::new()];
    for k in 0..leaves {
        if rng.gen_bool(0.3) {
            let parent = dirs.choose(rng).expect("non-empty").clone();
            let d = if parent.is_empty() { format!("d{k}") } else { format!("{parent}/d{k}") };
            dirs.push(d);
        }
        let parent = dirs.choose(rng).expect("non-empty");
        let path = if parent.is_empty() { format!("f{k}.x") } else { format!("{parent}/f{k}.x") };
        let mut file = ResourceNode::file(path, None, None);
        if rng.gen_bool(p_value) {
            file.attach_value("m", f64::from(rng.gen_range(-1000i32..=1000)));
        }
        root.insert(file);
    }
    root
}

/// Values of all files below `node`.
pub fn leaf_values(node: &ResourceNode, metric: &str) -> Vec<f64> {
    node.files().filter_map(|f| f.value(metric)).collect()
}

pub fn flat_aggregate(values: &[f64], op: AggregationOp) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut acc = values[0];
    for &v in &values[1..] {
        acc = match op {
            AggregationOp::Sum => acc + v,
            AggregationOp::Max => if v > acc { v } else { acc },
            AggregationOp::Min => if v < acc { v } else { acc },
            _ => unreachable!("flat oracle covers SUM/MAX/MIN"),
        };
    }
    Some(acc)
}

pub fn worst_leaf_color(node: &ResourceNode, metric: &str) -> Option<Color> {
    node.files().filter_map(|f| f.assessment(metric)).map(|a| a.color).max()
}

/// Random tree with positive integral `loc` weights on most leaves.
pub fn random_weighted_tree(rng: &mut ChaCha8Rng, max_leaves: usize) -> ResourceNode {
    let mut t = random_tree(rng, max_leaves, 0.0);
    let paths: Vec<String> = t.files().map(|f| f.path().to_string()).collect();
    for p in paths {
        let w = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(1..10_000) as f64 };
        t.find_mut(&p).expect("file exists").attach_value("loc", w);
    }
    // Guarantee a positive total.
    let first = t.files().next().expect("at least one leaf").path().to_string();
    t.find_mut(&first).expect("file exists").attach_value("loc", 7.0);
    t
}

/// Checks tiling and proportionality; returns the worst relative
/// proportionality error or a description of the first broken invariant.
pub fn check_treemap(layout: &TreemapLayout, bounds: Rect) -> Result<f64, String> {
    let cells = &layout.cells;
    let close = |a: f64, b: f64, scale: f64| (a - b).abs() <= 1e-9 * scale.max(1.0);
    let root = cells.first().ok_or("empty layout")?;
    if root.rect != bounds {
        return Err(format!("root rect {:?} != bounds", root.rect));
    }
    let scale = bounds.w.max(bounds.h);
    for (i, parent) in cells.iter().enumerate() {
        if parent.is_leaf {
            continue;
        }
        // Direct children follow in pre-order at depth + 1 until the
        // subtree ends.
        let kids: Vec<_> = cells[i + 1..]
            .iter()
            .take_while(|c| c.depth > parent.depth)
            .filter(|c| c.depth == parent.depth + 1)
            .collect();
        if kids.is_empty() {
            return Err(format!("inner cell `{}` has no children", parent.path));
        }
        let p = parent.rect;
        let area: f64 = kids.iter().map(|c| c.rect.area()).sum();
        if !close(area, p.area(), p.area()) {
            return Err(format!("children of `{}` cover {area}, parent {}", parent.path, p.area()));
        }
        let weight: f64 = kids.iter().map(|c| c.weight).sum();
        if weight != parent.weight {
            return Err(format!("weights of `{}` do not add up", parent.path));
        }
        for c in &kids {
            let r = c.rect;
            if r.w < 0.0
                || r.h < 0.0
                || r.x < p.x - 1e-9 * scale
                || r.y < p.y - 1e-9 * scale
                || r.x + r.w > p.x + p.w + 1e-9 * scale
                || r.y + r.h > p.y + p.h + 1e-9 * scale
            {
                return Err(format!("`{}` {:?} leaves parent {:?}", c.path, r, p));
            }
        }
        for (a, ca) in kids.iter().enumerate() {
            for cb in &kids[a + 1..] {
                let (ra, rb) = (ca.rect, cb.rect);
                let ox = (ra.x + ra.w).min(rb.x + rb.w) - ra.x.max(rb.x);
                let oy = (ra.y + ra.h).min(rb.y + rb.h) - ra.y.max(rb.y);
                if ox > 1e-9 * scale && oy > 1e-9 * scale {
                    return Err(format!("`{}` overlaps `{}`", ca.path, cb.path));
                }
            }
        }
    }
    let total = root.weight;
    let mut worst: f64 = 0.0;
    for c in cells.iter().filter(|c| c.is_leaf) {
        let expected = bounds.area() * c.weight / total;
        worst = worst.max((c.rect.area() - expected).abs() / expected);
    }
    Ok(worst)
}

// --------------------------------------------------------- architecture

/// Component name plus the directory prefixes it owns.
pub type Components = Vec<(String, Vec<String>)>;

pub struct ArchCase {
    pub components: Components,
    pub allowed: BTreeSet<(String, String)>,
    pub deps: Vec<Dependency>,
}

pub fn random_arch_case(rng: &mut ChaCha8Rng) -> ArchCase {
    let n = rng.gen_range(1..=6);
    let mut components: Components = (0..n).map(|i| (format!("c{i}"), vec![format!("c{i}")])).collect();
    // Some components also own a nested directory elsewhere.
    for (i, c) in components.iter_mut().enumerate() {
        if rng.gen_bool(0.3) {
            c.1.push(format!("shared/s{i}"));
        }
    }
    let mut dirs: Vec<String> = components.iter().flat_map(|c| c.1.clone()).collect();
    dirs.push("misc".into());
    dirs.push("shared".into());
    let files: Vec<String> = (0..rng.gen_range(1..40))
        .map(|k| {
            let d = dirs.choose(rng).expect("non-empty");
            if rng.gen_bool(0.3) {
                format!("{d}/sub/f{k}.x")
            } else {
                format!("{d}/f{k}.x")
            }
        })
        .collect();
    let mut allowed = BTreeSet::new();
    for a in 0..n {
        for b in 0..n {
            if rng.gen_bool(0.35) {
                allowed.insert((format!("c{a}"), format!("c{b}")));
            }
        }
    }
    let deps = (0..rng.gen_range(0..120))
        .map(|_| {
            let from = files.choose(rng).expect("non-empty").clone();
            let to = if rng.gen_bool(0.15) {
                Target::External(format!("lib{}", rng.gen_range(0..5)))
            } else {
                Target::Internal(files.choose(rng).expect("non-empty").clone())
            };
            Dependency {
                from,
                line: rng.gen_range(1..50),
                to,
            }
        })
        .collect();
    ArchCase {
        components,
        allowed,
        deps,
    }
}

pub fn oracle_component<'a>(components: &'a Components, file: &str) -> Option<&'a str> {
    components
        .iter()
        .find(|(_, prefixes)| prefixes.iter().any(|p| file.starts_with(&format!("{p}/"))))
        .map(|(n, _)| n.as_str())
}

#[derive(Debug, PartialEq, Eq, Default)]
pub struct ArchOracle {
    /// (from, line, to, from-component, to-component) per forbidden edge.
    pub forbidden: BTreeSet<(String, u32, String, String, String)>,
    pub unmapped: BTreeSet<String>,
    pub edges: BTreeMap<(String, String), (usize, usize)>,
    pub external: usize,
}

/// Judges each dependency on its own: an edge is legal iff both ends map
/// and the components are equal or the pair is allowed.
pub fn oracle_conformance(case: &ArchCase) -> ArchOracle {
    let mut out = ArchOracle::default();
    for d in &case.deps {
        let Target::Internal(to) = &d.to else {
            out.external += 1;
            continue;
        };
        let fc = oracle_component(&case.components, &d.from);
        let tc = oracle_component(&case.components, to);
        if fc.is_none() {
            out.unmapped.insert(d.from.clone());
        }
        if tc.is_none() {
            out.unmapped.insert(to.clone());
        }
        if let (Some(fc), Some(tc)) = (fc, tc) {
            let legal = fc == tc || case.allowed.contains(&(fc.to_string(), tc.to_string()));
            let e = out.edges.entry((fc.to_string(), tc.to_string())).or_default();
            e.0 += 1;
            if !legal {
                e.1 += 1;
                out.forbidden
                    .insert((d.from.clone(), d.line, to.clone(), fc.to_string(), tc.to_string()));
            }
        }
    }
    out
}

// ------------------------------------------------------ synthetic project

/// Writes a Java-like project of roughly `target_loc` lines below `dir`:
/// packages `p0..`, files importing each other, comments, loops and some
/// copied methods. Returns the number of lines written.
pub fn write_synthetic_project(dir: &Path, target_loc: usize, rng: &mut ChaCha8Rng) -> usize {
    let packages = 10;
    let per_file = 400;
    let n_files = target_loc.div_ceil(per_file);
    let mut shared_methods: Vec<String> = Vec::new();
    let mut written = 0;
    for f in 0..n_files {
        let pkg = f % packages;
        let pdir = dir.join(format!("p{pkg}"));
        fs::create_dir_all(&pdir).expect("create package dir");
        let mut src = String::new();
        let mut lines = 0;
        let push = |s: &str, src: &mut String, lines: &mut usize| {
            src.push_str(s);
            src.push('\n');
            *lines += 1;
        };
        push(&format!("package p{pkg};"), &mut src, &mut lines);
        for _ in 0..rng.gen_range(1..5) {
            let other = rng.gen_range(0..n_files);
            push(&format!("import p{}.F{other};", other % packages), &mut src, &mut lines);
        }
        push("import java.util.List;", &mut src, &mut lines);
        push(&format!("/* File {f}.\n * Generated for benchmarking.\n */"), &mut src, &mut lines);
        lines += 2;
        push(&format!("public class F{f} {{"), &mut src, &mut lines);
        let mut m = 0;
        while lines < per_file - 2 {
            if !shared_methods.is_empty() && rng.gen_bool(0.1) {
                let body = shared_methods.choose(rng).expect("non-empty").clone();
                lines += body.lines().count();
                src.push_str(&body);
                continue;
            }
            let mut body = String::new();
            let _ = writeln!(body, "  // method {m}");
            let _ = writeln!(body, "  public int m{m}_{f}(int a{m}, int b) {{");
            let _ = writeln!(body, "    int acc = {};", rng.gen_range(0..100));
            for s in 0..rng.gen_range(3..15) {
                match rng.gen_range(0..5) {
                    0 => {
                        let _ = writeln!(body, "    for (int i{s} = 0; i{s} < a{m}; i{s}++) {{");
                        let _ = writeln!(body, "      acc += i{s} * {};", rng.gen_range(1..9));
                        let _ = writeln!(body, "    }}");
                    }
                    1 => {
                        let _ = writeln!(body, "    if (acc > {}) {{", rng.gen_range(0..1000));
                        let _ = writeln!(body, "      acc -= b; // shrink");
                        let _ = writeln!(body, "    }} else {{");
                        let _ = writeln!(body, "      acc += \"x{s}\".length();");
                        let _ = writeln!(body, "    }}");
                    }
                    2 => {
                        let _ = writeln!(body, "    while (acc < b{}) {{ acc++; }}", s % 3);
                    }
                    _ => {
                        let _ = writeln!(body, "    acc = acc * {} + call{s}(acc, b);", rng.gen_range(2..7));
                    }
                }
            }
            let _ = writeln!(body, "    return acc;");
            let _ = writeln!(body, "  }}");
            if rng.gen_bool(0.05) {
                shared_methods.push(body.clone());
            }
            lines += body.lines().count();
            src.push_str(&body);
            m += 1;
        }
        push("}", &mut src, &mut lines);
        written += src.lines().count();
        fs::write(pdir.join(format!("F{f}.java")), src).expect("write source");
    }
    written
}

// ----------------------------------------------------------------- html

/// Parses `page` as XML and checks that every element is closed in order.
/// Returns the number of elements.
pub fn check_well_formed(page: &str) -> Result<usize, String> {
    use quick_xml::events::Event;
    let body = page.strip_prefix("<!DOCTYPE html>").ok_or("missing doctype")?;
    let mut reader = quick_xml::Reader::from_str(body);
    let mut stack: Vec<Vec<u8>> = Vec::new();
    let mut elements = 0;
    loop {
        match reader.read_event() {
            Ok(Event::Start(e)) => {
                elements += 1;
                stack.push(e.name().as_ref().to_vec());
            }
            Ok(Event::Empty(_)) => elements += 1,
            Ok(Event::End(e)) => {
                if stack.pop().as_deref() != Some(e.name().as_ref()) {
                    return Err(format!("unbalanced </{}>", String::from_utf8_lossy(e.name().as_ref())));
                }
            }
            Ok(Event::Text(t)) => {
                t.unescape().map_err(|e| format!("bad text at {}: {e}", reader.buffer_position()))?;
            }
            Ok(Event::Eof) => break,
            Ok(_) => {}
            Err(e) => return Err(format!("at byte {}: {e}", reader.buffer_position())),
        }
    }
    if let Some(open) = stack.pop() {
        return Err(format!("<{}> never closed", String::from_utf8_lossy(&open)));
    }
    Ok(elements)
}
