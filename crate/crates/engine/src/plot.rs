//! Minimal SVG line charts of the metrics CSV.

use std::fmt::Write as _;

use heurevo_core::metrics::MetricRow;

const W: f64 = 640.0;
const H: f64 = 360.0;
const MARGIN: f64 = 50.0;

pub const SERIES: [&str; 4] = [
    "global_best",
    "recent_best_score",
    "recent_proportion_of_change",
    "islands_reset_cumulative",
];

fn value(row: &MetricRow, series: &str) -> f64 {
    match series {
        "global_best" => row.global_best,
        "recent_best_score" => row.recent_best_score,
        "recent_proportion_of_change" => row.recent_proportion_of_change,
        "islands_reset_cumulative" => row.islands_reset_cumulative as f64,
        _ => unreachable!("unknown series"),
    }
}

/// One chart of `series` against `t`. Non-finite points are skipped.
pub fn line_chart(rows: &[MetricRow], series: &str) -> String {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.t as f64, value(r, series)))
        .filter(|p| p.1.is_finite())
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{series}</text>"#,
        W / 2.0
    );
    let (x0, y0, x1, y1) = (MARGIN, H - MARGIN, W - MARGIN / 2.0, MARGIN / 2.0 + 10.0);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" stroke="black" fill="none"/>"#
    );
    if !pts.is_empty() {
        let (tmin, tmax) = bounds(pts.iter().map(|p| p.0));
        let (vmin, vmax) = bounds(pts.iter().map(|p| p.1));
        let sx = |t: f64| x0 + (t - tmin) / (tmax - tmin) * (x1 - x0);
        let sy = |v: f64| y0 - (v - vmin) / (vmax - vmin) * (y0 - y1);
        let mut d = String::new();
        for (i, &(t, v)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, sx(t), sy(v));
        }
        let _ = writeln!(svg, r#"<path d="{}" stroke="steelblue" stroke-width="1.5" fill="none"/>"#, d.trim_end());
        let label = |svg: &mut String, x: f64, y: f64, anchor: &str, text: String| {
            let _ = writeln!(
                svg,
                r#"<text x="{x:.1}" y="{y:.1}" font-family="sans-serif" font-size="10" text-anchor="{anchor}">{text}</text>"#
            );
        };
        label(&mut svg, x0 - 4.0, y0, "end", format!("{vmin:.4}"));
        label(&mut svg, x0 - 4.0, y1 + 4.0, "end", format!("{vmax:.4}"));
        label(&mut svg, x0, y0 + 14.0, "middle", format!("{tmin}"));
        label(&mut svg, x1, y0 + 14.0, "middle", format!("{tmax}"));
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_skips_infinite_points() {
        let rows = vec![
            MetricRow {
                t: 1,
                global_best: -1.0,
                recent_best_score: f64::NEG_INFINITY,
                recent_proportion_of_change: 0.0,
                islands_reset_cumulative: 0,
            },
            MetricRow {
                t: 2,
                global_best: -0.5,
                recent_best_score: -0.5,
                recent_proportion_of_change: 0.2,
                islands_reset_cumulative: 5,
            },
        ];
        let svg = line_chart(&rows, "global_best");
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("M50.00,310.00 L"));
        let single = line_chart(&rows, "recent_best_score");
        let data = single.lines().find(|l| l.contains("steelblue")).unwrap();
        assert!(!data.contains('L'), "one finite point, no segments: {data}");
    }
}
