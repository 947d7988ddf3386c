//! Squarified tree-map layout.

use crate::assess::Color;
use crate::scope::ResourceNode;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Rect { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreemapCell {
    pub path: String,
    pub depth: usize,
    pub is_leaf: bool,
    pub weight: f64,
    pub rect: Rect,
    /// `None` renders as MISSING.
    pub color: Option<Color>,
}

/// Cells in pre-order; children are laid out inside their parent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TreemapLayout {
    pub cells: Vec<TreemapCell>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TreemapError {
    #[error("tree-map weight `{metric}` sums to zero")]
    ZeroTotalWeight { metric: String },
    #[error("negative tree-map weight {value} on `{path}`")]
    NegativeWeight { path: String, value: f64 },
}

struct Weighted<'a> {
    node: &'a ResourceNode,
    weight: f64,
    children: Vec<Weighted<'a>>,
}

fn weigh<'a>(node: &'a ResourceNode, metric: &str) -> Result<Weighted<'a>, TreemapError> {
    if node.is_file() || node.children().is_empty() {
        let weight = node.value(metric).unwrap_or(0.0);
        if weight < 0.0 || weight.is_nan() {
            return Err(TreemapError::NegativeWeight {
                path: node.path().to_string(),
                value: weight,
            });
        }
        return Ok(Weighted {
            node,
            weight,
            children: Vec::new(),
        });
    }
    let mut children = node
        .children()
        .iter()
        .map(|c| weigh(c, metric))
        .collect::<Result<Vec<_>, _>>()?;
    children.retain(|c| c.weight > 0.0);
    children.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then_with(|| a.node.name().cmp(b.node.name()))
    });
    let weight = children.iter().map(|c| c.weight).sum();
    Ok(Weighted {
        node,
        weight,
        children,
    })
}

/// Lays out `tree` into `bounds`. A node's weight is the sum of its leaf
/// weights (leaf value of `weight_metric`, MISSING = 0); zero-weight nodes
/// are omitted. Cells are colored by the assessment of `color_metric`.
pub fn layout_treemap(
    tree: &ResourceNode,
    weight_metric: &str,
    color_metric: Option<&str>,
    bounds: Rect,
) -> Result<TreemapLayout, TreemapError> {
    let root = weigh(tree, weight_metric)?;
    if root.weight <= 0.0 {
        return Err(TreemapError::ZeroTotalWeight {
            metric: weight_metric.to_string(),
        });
    }
    let mut layout = TreemapLayout::default();
    place(&root, bounds, 0, color_metric, &mut layout.cells);
    Ok(layout)
}

fn place(w: &Weighted<'_>, rect: Rect, depth: usize, color_metric: Option<&str>, out: &mut Vec<TreemapCell>) {
    out.push(TreemapCell {
        path: w.node.path().to_string(),
        depth,
        is_leaf: w.children.is_empty(),
        weight: w.weight,
        rect,
        color: color_metric.and_then(|m| w.node.assessment(m)).map(|a| a.color),
    });
    if w.children.is_empty() {
        return;
    }
    let weights: Vec<f64> = w.children.iter().map(|c| c.weight).collect();
    for (child, r) in w.children.iter().zip(squarify(&weights, rect)) {
        place(child, r, depth + 1, color_metric, out);
    }
}

/// Highest aspect ratio of a row of `areas` laid along a side of length `side`.
fn worst(areas: &[f64], side: f64) -> f64 {
    let sum: f64 = areas.iter().sum();
    let s2 = side * side;
    areas
        .iter()
        .map(|&a| (s2 * a / (sum * sum)).max(sum * sum / (s2 * a)))
        .fold(0.0, f64::max)
}

/// Splits `rect` into one rectangle per weight (weights sorted descending,
/// all positive). The last row fills the remaining space and the last
/// rectangle of each row fills the row, so the tiling is exact.
pub fn squarify(weights: &[f64], rect: Rect) -> Vec<Rect> {
    let total: f64 = weights.iter().sum();
    let scale = rect.area() / total;
    let areas: Vec<f64> = weights.iter().map(|w| w * scale).collect();
    let mut out = Vec::with_capacity(areas.len());
    let mut r = rect;
    let mut i = 0;
    while i < areas.len() {
        let side = r.w.min(r.h);
        let mut j = i + 1;
        let mut best = worst(&areas[i..j], side);
        while j < areas.len() {
            let cand = worst(&areas[i..=j], side);
            if cand >= best {
                break;
            }
            best = cand;
            j += 1;
        }
        let row = &areas[i..j];
        let row_sum: f64 = row.iter().sum();
        let last_row = j == areas.len();
        if r.w >= r.h {
            // Column on the left, stacked top to bottom.
            let thick = if last_row { r.w } else { (row_sum / r.h).min(r.w) };
            let mut y = r.y;
            for (k, a) in row.iter().enumerate() {
                let h = if k + 1 == row.len() { r.y + r.h - y } else { a / thick };
                out.push(Rect::new(r.x, y, thick, h));
                y += h;
            }
            r = Rect::new(r.x + thick, r.y, r.w - thick, r.h);
        } else {
            // Row on top, left to right.
            let thick = if last_row { r.h } else { (row_sum / r.w).min(r.h) };
            let mut x = r.x;
            for (k, a) in row.iter().enumerate() {
                let w = if k + 1 == row.len() { r.x + r.w - x } else { a / thick };
                out.push(Rect::new(x, r.y, w, thick));
                x += w;
            }
            r = Rect::new(r.x, r.y + thick, r.w, r.h - thick);
        }
        i = j;
    }
    out
}
