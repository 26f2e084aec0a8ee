use std::fmt::Write;

use super::{Algorithm, SummaryRow};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

struct Series<'a> {
    algo: Algorithm,
    points: Vec<&'a SummaryRow>,
}

/// Log-scale regret against `n`, one line per algorithm with a +-1 std band.
pub fn render_svg(summary: &[SummaryRow]) -> String {
    let mut series: Vec<Series> = Vec::new();
    for row in summary {
        match series.iter_mut().find(|s| s.algo == row.algo) {
            Some(s) => s.points.push(row),
            None => series.push(Series {
                algo: row.algo,
                points: vec![row],
            }),
        }
    }
    for s in &mut series {
        s.points.sort_by_key(|r| r.n);
    }

    let positive = summary
        .iter()
        .flat_map(|r| [r.mean, r.mean - r.std, r.mean + r.std])
        .filter(|&x| x > 0.0);
    let (lo, hi) = positive.fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(x), b.max(x)));
    let (lo, hi) = if hi > 0.0 { (lo, hi) } else { (1e-3, 1.0) };
    let y_min = 10f64.powf(lo.log10().floor());
    let y_max = 10f64.powf(hi.log10().ceil().max(y_min.log10() + 1.0));
    let n_min = summary.iter().map(|r| r.n).min().unwrap_or(0) as f64;
    let n_max = summary.iter().map(|r| r.n).max().unwrap_or(1) as f64;

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |n: f64| {
        if n_max > n_min {
            LEFT + (n - n_min) / (n_max - n_min) * plot_w
        } else {
            LEFT + plot_w / 2.0
        }
    };
    let y = |v: f64| {
        let v = v.max(y_min);
        TOP + (y_max.log10() - v.log10()) / (y_max.log10() - y_min.log10()) * plot_h
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    let mut decade = y_min;
    while decade <= y_max * 1.0001 {
        let yy = y(decade);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{decade:e}</text>"#,
            LEFT - 6.0,
            yy + 4.0
        );
        decade *= 10.0;
    }
    let mut ticks: Vec<usize> = summary.iter().map(|r| r.n).collect();
    ticks.sort_unstable();
    ticks.dedup();
    for n in ticks {
        let xx = x(n as f64);
        let _ = writeln!(
            out,
            r#"<text x="{xx:.2}" y="{:.2}" text-anchor="middle">{n}</text>"#,
            TOP + plot_h + 18.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">n</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">simple regret</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (idx, s) in series.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let upper: Vec<String> = s
            .points
            .iter()
            .map(|r| format!("{:.2},{:.2}", x(r.n as f64), y(r.mean + r.std)))
            .collect();
        let lower: Vec<String> = s
            .points
            .iter()
            .rev()
            .map(|r| format!("{:.2},{:.2}", x(r.n as f64), y(r.mean - r.std)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let line: Vec<String> = s
            .points
            .iter()
            .map(|r| format!("{:.2},{:.2}", x(r.n as f64), y(r.mean)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let ly = TOP + 20.0 * idx as f64 + 10.0;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 25.0
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 32.0, ly + 4.0, s.algo);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<SummaryRow> {
        let mut out = Vec::new();
        for algo in [Algorithm::RlLow, Algorithm::Mle] {
            for (t, n) in [50, 100, 150, 200, 250].into_iter().enumerate() {
                out.push(SummaryRow {
                    algo,
                    n,
                    reps: 10,
                    mean: 0.1 / (t + 1) as f64,
                    std: 0.02,
                    se: 0.006,
                });
            }
        }
        out
    }

    #[test]
    fn one_polyline_per_algorithm() {
        let svg = render_svg(&rows());
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains(">rl_low</text>") && svg.contains(">mle</text>"));
    }

    #[test]
    fn handles_all_zero_regret() {
        let mut r = rows();
        for row in &mut r {
            row.mean = 0.0;
            row.std = 0.0;
        }
        let svg = render_svg(&r);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
