//! Threshold-based traffic-light assessment and aggregation along the
//! resource tree.

use std::fmt;
use std::str::FromStr;

use crate::scope::ResourceNode;

/// Traffic-light color, ordered from best to worst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Color {
    Green,
    Yellow,
    Red,
}

impl Color {
    pub fn as_str(self) -> &'static str {
        match self {
            Color::Green => "GREEN",
            Color::Yellow => "YELLOW",
            Color::Red => "RED",
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assessment {
    pub color: Color,
    pub message: Option<String>,
}

impl Assessment {
    pub fn new(color: Color) -> Self {
        Assessment {
            color,
            message: None,
        }
    }

    pub fn with_message(color: Color, message: impl Into<String>) -> Self {
        Assessment {
            color,
            message: Some(message.into()),
        }
    }
}

/// Histogram of leaf colors below a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ColorCounts {
    pub green: usize,
    pub yellow: usize,
    pub red: usize,
}

impl ColorCounts {
    pub fn of(color: Color) -> Self {
        let mut c = ColorCounts::default();
        c.add(color);
        c
    }

    pub fn add(&mut self, color: Color) {
        match color {
            Color::Green => self.green += 1,
            Color::Yellow => self.yellow += 1,
            Color::Red => self.red += 1,
        }
    }

    pub fn merge(&mut self, other: &ColorCounts) {
        self.green += other.green;
        self.yellow += other.yellow;
        self.red += other.red;
    }

    pub fn total(&self) -> usize {
        self.green + self.yellow + self.red
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    HigherIsWorse,
    LowerIsWorse,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct AssessError(pub String);

impl FromStr for Direction {
    type Err = AssessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "HIGHER_IS_WORSE" => Ok(Direction::HigherIsWorse),
            "LOWER_IS_WORSE" => Ok(Direction::LowerIsWorse),
            _ => Err(AssessError(format!("unknown direction `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRule {
    pub metric: String,
    pub direction: Direction,
    pub yellow: f64,
    pub red: f64,
}

impl ThresholdRule {
    pub fn new(
        metric: impl Into<String>,
        direction: Direction,
        yellow: f64,
        red: f64,
    ) -> Result<Self, AssessError> {
        let rule = ThresholdRule {
            metric: metric.into(),
            direction,
            yellow,
            red,
        };
        if !yellow.is_finite() || !red.is_finite() {
            return Err(AssessError("threshold bounds must be finite".into()));
        }
        let consistent = match direction {
            Direction::HigherIsWorse => yellow <= red,
            Direction::LowerIsWorse => yellow >= red,
        };
        if !consistent {
            return Err(AssessError(format!(
                "yellow bound {yellow} is more severe than red bound {red} for `{}`",
                rule.metric
            )));
        }
        Ok(rule)
    }
}

/// Classifies `value`; values on a bound belong to the worse class.
pub fn assess(value: f64, rule: &ThresholdRule) -> Assessment {
    let color = match rule.direction {
        Direction::HigherIsWorse if value >= rule.red => Color::Red,
        Direction::HigherIsWorse if value >= rule.yellow => Color::Yellow,
        Direction::HigherIsWorse => Color::Green,
        Direction::LowerIsWorse if value <= rule.red => Color::Red,
        Direction::LowerIsWorse if value <= rule.yellow => Color::Yellow,
        Direction::LowerIsWorse => Color::Green,
    };
    Assessment::new(color)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationOp {
    Sum,
    Max,
    Min,
    /// Unweighted mean over direct children.
    Avg,
    /// Lower median over direct children.
    Median,
    /// Mean over all leaves below the node.
    AvgLeaves,
}

impl FromStr for AggregationOp {
    type Err = AssessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "SUM" => AggregationOp::Sum,
            "MAX" => AggregationOp::Max,
            "MIN" => AggregationOp::Min,
            "AVG" => AggregationOp::Avg,
            "MEDIAN" => AggregationOp::Median,
            "AVG_LEAVES" => AggregationOp::AvgLeaves,
            _ => return Err(AssessError(format!("unknown aggregation operator `{s}`"))),
        })
    }
}

impl AggregationOp {
    pub const NAMES: &'static [&'static str] = &["SUM", "MAX", "MIN", "AVG", "MEDIAN", "AVG_LEAVES"];

    /// Applies the operator to a non-empty slice.
    pub fn apply(self, values: &[f64]) -> f64 {
        debug_assert!(!values.is_empty());
        match self {
            AggregationOp::Sum => values.iter().sum(),
            AggregationOp::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            AggregationOp::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            AggregationOp::Avg | AggregationOp::AvgLeaves => {
                values.iter().sum::<f64>() / values.len() as f64
            }
            AggregationOp::Median => {
                let mut sorted = values.to_vec();
                sorted.sort_by(f64::total_cmp);
                sorted[(sorted.len() - 1) / 2]
            }
        }
    }
}

/// Fills inner nodes with `op` over their children's values, bottom-up.
/// Nodes without any descendant value stay MISSING.
pub fn aggregate_values(tree: &mut ResourceNode, metric: &str, op: AggregationOp) -> Vec<String> {
    let mut warnings = Vec::new();
    aggregate_node(tree, metric, op, &mut warnings);
    warnings
}

/// Returns the leaf values below `node` (for AVG_LEAVES).
fn aggregate_node(
    node: &mut ResourceNode,
    metric: &str,
    op: AggregationOp,
    warnings: &mut Vec<String>,
) -> Vec<f64> {
    if node.is_file() || node.children().is_empty() {
        return node.value(metric).into_iter().collect();
    }
    let mut child_values = Vec::new();
    let mut leaves = Vec::new();
    for child in node.children_mut() {
        let below = aggregate_node(child, metric, op, warnings);
        if let Some(v) = child.value(metric) {
            child_values.push(v);
        }
        if op == AggregationOp::AvgLeaves {
            leaves.extend(below);
        }
    }
    let result = match op {
        AggregationOp::AvgLeaves if !leaves.is_empty() => Some(op.apply(&leaves)),
        AggregationOp::AvgLeaves => None,
        _ if !child_values.is_empty() => Some(op.apply(&child_values)),
        _ => None,
    };
    if let Some(v) = result {
        warnings.extend(node.attach_value(metric, v));
    }
    leaves
}

/// Propagates the worst child color upward and attaches leaf color
/// histograms to every inner node.
pub fn aggregate_assessments(tree: &mut ResourceNode, metric: &str) -> Vec<String> {
    let mut warnings = Vec::new();
    aggregate_colors(tree, metric, &mut warnings);
    warnings
}

fn aggregate_colors(
    node: &mut ResourceNode,
    metric: &str,
    warnings: &mut Vec<String>,
) -> Option<ColorCounts> {
    if node.is_file() || node.children().is_empty() {
        let counts = node.assessment(metric).map(|a| ColorCounts::of(a.color));
        if let Some(c) = counts {
            node.set_color_counts(metric, c);
        }
        return counts;
    }
    let mut counts: Option<ColorCounts> = None;
    let mut worst: Option<Color> = None;
    for child in node.children_mut() {
        if let Some(c) = aggregate_colors(child, metric, warnings) {
            counts.get_or_insert_with(ColorCounts::default).merge(&c);
        }
        if let Some(a) = child.assessment(metric) {
            worst = worst.max(Some(a.color));
        }
    }
    if let Some(color) = worst {
        warnings.extend(node.attach_assessment(metric, Assessment::new(color)));
    }
    if let Some(c) = counts {
        node.set_color_counts(metric, c);
    }
    counts
}
