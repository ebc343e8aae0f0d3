//! Self-contained SVG rendering of regret-vs-budget charts: log-log
//! axes, one polyline per series, vertical bars of one standard
//! deviation around each mean. No drawing dependencies; the output is a
//! few dozen SVG elements.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// One curve: a label and (budget, mean, std) triples.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64, f64)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 48.0;
const MARGIN_B: f64 = 56.0;
/// Values at or below zero cannot sit on a log axis; they are clamped
/// to this floor instead of dropped.
const LOG_FLOOR: f64 = 1e-16;

const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn log10_clamped(v: f64) -> f64 {
    v.max(LOG_FLOOR).log10()
}

/// Axis tick label like 1e-3 or 1e5.
fn decade_label(exp: i32) -> String {
    format!("1e{exp}")
}

/// Renders the chart as an SVG document.
pub fn render_loglog_svg(series: &[Series], title: &str) -> Result<String> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in series {
        for &(n, mean, std) in &s.points {
            if n.is_nan() || n <= 0.0 || !mean.is_finite() || !std.is_finite() {
                continue;
            }
            xs.push(n.log10());
            ys.push(log10_clamped(mean - std));
            ys.push(log10_clamped(mean + std));
            ys.push(log10_clamped(mean));
        }
    }
    if xs.is_empty() {
        return Err(Error::InvalidParams(
            "nothing to plot: no positive-budget points".into(),
        ));
    }

    let pad = |lo: f64, hi: f64| {
        let span = (hi - lo).max(1e-9);
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    let (x_lo, x_hi) = pad(
        xs.iter().copied().fold(f64::INFINITY, f64::min),
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let (y_lo, y_hi) = pad(
        ys.iter().copied().fold(f64::INFINITY, f64::min),
        ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );

    let px = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        xml_escape(title)
    ));

    // frame
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{}\" height=\"{}\" fill=\"none\" \
         stroke=\"black\"/>\n",
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    ));

    // decade gridlines and tick labels
    for exp in (x_lo.ceil() as i32)..=(x_hi.floor() as i32) {
        let x = px(f64::from(exp));
        svg.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{MARGIN_T}\" x2=\"{x:.1}\" y2=\"{}\" \
             stroke=\"#dddddd\"/>\n",
            HEIGHT - MARGIN_B
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"12\">{}</text>\n",
            HEIGHT - MARGIN_B + 18.0,
            decade_label(exp)
        ));
    }
    for exp in (y_lo.ceil() as i32)..=(y_hi.floor() as i32) {
        let y = py(f64::from(exp));
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" \
             stroke=\"#dddddd\"/>\n",
            WIDTH - MARGIN_R
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"12\">{}</text>\n",
            MARGIN_L - 8.0,
            y + 4.0,
            decade_label(exp)
        ));
    }

    // axis titles
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\">budget n</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"20\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\" transform=\"rotate(-90 20 {})\">regret</text>\n",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0
    ));

    for (si, s) in series.iter().enumerate() {
        let color = COLORS[si % COLORS.len()];
        let mut path_points = Vec::new();
        for &(n, mean, std) in &s.points {
            if n.is_nan() || n <= 0.0 || !mean.is_finite() || !std.is_finite() {
                continue;
            }
            let x = px(n.log10());
            let y = py(log10_clamped(mean));
            path_points.push(format!("{x:.1},{y:.1}"));

            let y_top = py(log10_clamped(mean + std));
            let y_bot = py(log10_clamped(mean - std));
            svg.push_str(&format!(
                "<line x1=\"{x:.1}\" y1=\"{y_top:.1}\" x2=\"{x:.1}\" y2=\"{y_bot:.1}\" \
                 stroke=\"{color}\"/>\n"
            ));
            for cap in [y_top, y_bot] {
                svg.push_str(&format!(
                    "<line x1=\"{:.1}\" y1=\"{cap:.1}\" x2=\"{:.1}\" y2=\"{cap:.1}\" \
                     stroke=\"{color}\"/>\n",
                    x - 4.0,
                    x + 4.0
                ));
            }
            svg.push_str(&format!(
                "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"3\" fill=\"{color}\"/>\n"
            ));
        }
        if path_points.len() >= 2 {
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                path_points.join(" ")
            ));
        }

        // legend entry
        let ly = MARGIN_T + 16.0 + 18.0 * si as f64;
        let lx = WIDTH - MARGIN_R - 180.0;
        svg.push_str(&format!(
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n",
            lx + 22.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            lx + 28.0,
            ly + 4.0,
            xml_escape(&s.label)
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders and writes the chart to a file.
pub fn write_loglog_svg(series: &[Series], title: &str, path: &Path) -> Result<()> {
    let svg = render_loglog_svg(series, title)?;
    fs::write(path, svg)?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_series() -> Vec<Series> {
        vec![
            Series {
                label: "stosoo sigma=0.1".into(),
                points: vec![
                    (1e3, 0.2, 0.05),
                    (1e4, 0.05, 0.01),
                    (1e5, 0.01, 0.002),
                ],
            },
            Series {
                label: "stodoo <L=144>".into(),
                points: vec![(1e3, 0.3, 0.1), (1e4, 0.08, 0.02), (1e5, 0.02, 0.01)],
            },
        ]
    }

    #[test]
    fn chart_contains_curves_bars_and_labels() {
        let svg = render_loglog_svg(&demo_series(), "regret vs budget").unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        // 3 points per series: marker circles
        assert_eq!(svg.matches("<circle").count(), 6);
        assert!(svg.contains("regret vs budget"));
        assert!(svg.contains("1e3"));
        // escaped label
        assert!(svg.contains("stodoo &lt;L=144&gt;"));
        assert!(!svg.contains("<L=144>"));
    }

    #[test]
    fn zero_means_are_clamped_not_dropped() {
        let series = vec![Series {
            label: "exact".into(),
            points: vec![(1e3, 0.0, 0.0), (1e4, 0.0, 0.0)],
        }];
        let svg = render_loglog_svg(&series, "t").unwrap();
        assert!(svg.contains("<polyline"));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(render_loglog_svg(&[], "t").is_err());
        let no_points = vec![Series {
            label: "hollow".into(),
            points: vec![],
        }];
        assert!(render_loglog_svg(&no_points, "t").is_err());
    }

    #[test]
    fn chart_writes_to_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chart.svg");
        write_loglog_svg(&demo_series(), "demo", &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("</svg>"));
    }
}
