mod support;

use conquard_core::assess::{aggregate_assessments, aggregate_values, assess, AggregationOp, Direction, ThresholdRule};
use proptest::prelude::*;
use support::{flat_aggregate, leaf_values, random_tree, rng, worst_leaf_color};

const EXACT_OPS: [AggregationOp; 3] = [AggregationOp::Sum, AggregationOp::Max, AggregationOp::Min];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn tree_aggregation_equals_flat_computation(seed in any::<u64>(), p_value in 0.2f64..=1.0) {
        let base = random_tree(&mut rng(seed), 500, p_value);
        for op in EXACT_OPS {
            let mut tree = base.clone();
            aggregate_values(&mut tree, "m", op);
            for node in tree.iter().filter(|n| !n.is_file()) {
                prop_assert_eq!(node.value("m"), flat_aggregate(&leaf_values(node, "m"), op), "{:?} at `{}`", op, node.path());
            }
            // Leaves are untouched.
            for (a, b) in tree.files().zip(base.files()) {
                prop_assert_eq!(a.value("m"), b.value("m"));
            }
        }
    }

    #[test]
    fn avg_leaves_is_the_leaf_mean(seed in any::<u64>()) {
        let mut tree = random_tree(&mut rng(seed), 300, 0.8);
        aggregate_values(&mut tree, "m", AggregationOp::AvgLeaves);
        for node in tree.iter().filter(|n| !n.is_file()) {
            let leaves = leaf_values(node, "m");
            match node.value("m") {
                None => prop_assert!(leaves.is_empty()),
                Some(v) => {
                    let mean = leaves.iter().sum::<f64>() / leaves.len() as f64;
                    prop_assert!((v - mean).abs() <= 1e-9 * mean.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn worst_color_wins(seed in any::<u64>(), yellow in -500.0f64..500.0, gap in 0.0f64..500.0) {
        let mut tree = random_tree(&mut rng(seed), 500, 0.7);
        let rule = ThresholdRule::new("m", Direction::HigherIsWorse, yellow, yellow + gap).unwrap();
        let files: Vec<(String, f64)> = tree.files().filter_map(|f| f.value("m").map(|v| (f.path().to_string(), v))).collect();
        for (p, v) in files {
            tree.find_mut(&p).unwrap().attach_assessment("m", assess(v, &rule));
        }
        aggregate_assessments(&mut tree, "m");
        for node in tree.iter().filter(|n| !n.is_file()) {
            prop_assert_eq!(node.assessment("m").map(|a| a.color), worst_leaf_color(node, "m"));
            let leaf_colors: Vec<_> = node.files().filter_map(|f| f.assessment("m")).collect();
            match node.color_counts("m") {
                None => prop_assert!(leaf_colors.is_empty()),
                Some(c) => {
                    prop_assert_eq!(c.total(), leaf_colors.len());
                    prop_assert_eq!(c.red, leaf_colors.iter().filter(|a| a.color == conquard_core::assess::Color::Red).count());
                }
            }
        }
    }
}

#[test]
fn boundary_values_take_the_worse_color() {
    use conquard_core::assess::Color;
    let hi = ThresholdRule::new("m", Direction::HigherIsWorse, 10.0, 20.0).unwrap();
    assert_eq!(assess(10.0, &hi).color, Color::Yellow);
    assert_eq!(assess(20.0, &hi).color, Color::Red);
    assert_eq!(assess(9.99, &hi).color, Color::Green);
    let lo = ThresholdRule::new("m", Direction::LowerIsWorse, 0.5, 0.2).unwrap();
    assert_eq!(assess(0.2, &lo).color, Color::Red);
    assert_eq!(assess(0.5, &lo).color, Color::Yellow);
    assert!(ThresholdRule::new("m", Direction::HigherIsWorse, 3.0, 1.0).is_err());
}
