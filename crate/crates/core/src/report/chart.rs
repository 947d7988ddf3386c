//! Inline SVG trend charts.

use std::fmt::Write as _;

use chrono::SecondsFormat;

use super::{escape, fmt_num};
use crate::assess::Color;
use crate::history::{assess_trend, TrendRule, TrendSeries};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChartError {
    #[error("trend series for `{metric}` is empty")]
    EmptySeries { metric: String },
}

const WIDTH: f64 = 360.0;
const HEIGHT: f64 = 140.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 12.0;
const TOP: f64 = 12.0;
const BOTTOM: f64 = 24.0;

/// One circle per point, one line per consecutive pair; the last segment is
/// marked as a violation when the rule's verdict is RED.
pub fn render_trend_chart(series: &TrendSeries, rule: Option<&TrendRule>) -> Result<String, ChartError> {
    let n = series.points.len();
    if n == 0 {
        return Err(ChartError::EmptySeries {
            metric: series.metric.clone(),
        });
    }
    let red = rule.is_some_and(|r| assess_trend(series, r).assessment.color == Color::Red);

    let (lo, hi) = series
        .points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.value), hi.max(p.value)));
    let t0 = series.points[0].timestamp.timestamp();
    let t1 = series.points[n - 1].timestamp.timestamp();
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let xs: Vec<f64> = series
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let frac = if t1 > t0 {
                (p.timestamp.timestamp() - t0) as f64 / (t1 - t0) as f64
            } else if n > 1 {
                i as f64 / (n - 1) as f64
            } else {
                0.5
            };
            LEFT + frac * plot_w
        })
        .collect();
    let ys: Vec<f64> = series
        .points
        .iter()
        .map(|p| {
            let frac = if hi > lo { (p.value - lo) / (hi - lo) } else { 0.5 };
            TOP + (1.0 - frac) * plot_h
        })
        .collect();

    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" class=\"trend\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
        w = WIDTH,
        h = HEIGHT
    );
    let _ = write!(
        s,
        "<line class=\"axis\" x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{b}\" stroke=\"#888\"/>\
         <line class=\"axis\" x1=\"{LEFT}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"#888\"/>",
        b = HEIGHT - BOTTOM,
        r = WIDTH - RIGHT
    );
    let _ = write!(
        s,
        "<text x=\"{x}\" y=\"{y1}\" font-size=\"10\" text-anchor=\"end\">{hi}</text>\
         <text x=\"{x}\" y=\"{y2}\" font-size=\"10\" text-anchor=\"end\">{lo}</text>",
        x = LEFT - 4.0,
        y1 = TOP + 8.0,
        y2 = HEIGHT - BOTTOM,
        hi = fmt_num(hi),
        lo = fmt_num(lo)
    );
    let fmt_time = |i: usize| series.points[i].timestamp.to_rfc3339_opts(SecondsFormat::Secs, true);
    let _ = write!(
        s,
        "<text x=\"{LEFT}\" y=\"{y}\" font-size=\"10\">{a}</text>\
         <text x=\"{r}\" y=\"{y}\" font-size=\"10\" text-anchor=\"end\">{b}</text>",
        y = HEIGHT - 6.0,
        r = WIDTH - RIGHT,
        a = escape(&fmt_time(0)),
        b = escape(&fmt_time(n - 1))
    );
    for i in 1..n {
        let flagged = red && i == n - 1;
        let _ = write!(
            s,
            "<line class=\"{}\" x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{}\" stroke-width=\"2\"/>",
            if flagged { "segment violation" } else { "segment" },
            xs[i - 1],
            ys[i - 1],
            xs[i],
            ys[i],
            if flagged { "#d62728" } else { "#1f77b4" }
        );
    }
    for (i, p) in series.points.iter().enumerate() {
        let _ = write!(
            s,
            "<circle class=\"marker\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f77b4\"><title>{} {}</title></circle>",
            xs[i],
            ys[i],
            escape(&p.run_id),
            fmt_num(p.value)
        );
    }
    s.push_str("</svg>");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::{TrendKind, TrendPoint};
    use chrono::{TimeZone, Utc};

    fn series(values: &[f64]) -> TrendSeries {
        TrendSeries {
            metric: "clone.ratio".into(),
            entity: String::new(),
            points: values
                .iter()
                .enumerate()
                .map(|(i, &value)| TrendPoint {
                    run_id: format!("r{i}"),
                    timestamp: Utc.timestamp_opt(86_400 * i as i64, 0).unwrap(),
                    value,
                })
                .collect(),
        }
    }

    #[test]
    fn structure() {
        let rule = TrendRule::new("clone.ratio", TrendKind::MustNotIncrease, 0.0).unwrap();
        let one = render_trend_chart(&series(&[0.1]), Some(&rule)).unwrap();
        assert_eq!(one.matches("<circle").count(), 1);
        assert_eq!(one.matches("class=\"segment").count(), 0);
        let up = render_trend_chart(&series(&[0.16, 0.18]), Some(&rule)).unwrap();
        assert_eq!(up.matches("segment violation").count(), 1);
        let many = render_trend_chart(&series(&[3.0, 2.0, 2.0, 1.0, 1.0]), Some(&rule)).unwrap();
        assert_eq!(many.matches("<circle").count(), 5);
        assert_eq!(many.matches("class=\"segment").count(), 4);
        assert_eq!(many.matches("violation").count(), 0);
        assert!(render_trend_chart(&series(&[]), None).is_err());
    }
}
