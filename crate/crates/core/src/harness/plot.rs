//! Learning curves as a standalone SVG: mean line with a +-1 SD band per series.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::metrics::{curve_points, load_metrics, CurvePoint, Metric};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Loads each metrics file and renders one series per file, labelled by the
/// file stem. Every file must carry the same metric column.
pub fn emit_curves(paths: &[impl AsRef<Path>], out: impl AsRef<Path>) -> Result<Vec<Series>> {
    let (series, metric) = load_series(paths)?;
    std::fs::write(out, render_svg(&series, metric.label()))?;
    Ok(series)
}

pub fn load_series(paths: &[impl AsRef<Path>]) -> Result<(Vec<Series>, Metric)> {
    if paths.is_empty() {
        return Err(Error::Config("plot needs at least one metrics file".into()));
    }
    let loaded = paths
        .iter()
        .map(|p| {
            let p = p.as_ref();
            let label = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string());
            load_metrics(p).map(|r| (label, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let metric = if loaded
        .iter()
        .all(|(_, r)| Metric::natural(r) == Metric::FinalMass)
    {
        Metric::FinalMass
    } else {
        Metric::EpisodeReturn
    };
    let series = loaded
        .into_iter()
        .map(|(label, records)| {
            Ok(Series {
                label,
                points: curve_points(&records, metric)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((series, metric))
}

fn y_range(series: &[Series]) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in series.iter().flat_map(|s| &s.points) {
        lo = lo.min(p.mean - p.sd);
        hi = hi.max(p.mean + p.sd);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.1;
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

/// Renders the chart. Each data point carries `data-pct`, `data-mean` and
/// `data-sd` attributes holding the exact values drawn.
pub fn render_svg(series: &[Series], y_label: &str) -> String {
    let (lo, hi) = y_range(series);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |pct: f64| LEFT + pct / 100.0 * plot_w;
    let y = |v: f64| TOP + (hi - v) / (hi - lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
    );
    for i in 0..=5 {
        let pct = i as f64 * 20.0;
        let px = x(pct);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#444"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{pct}</text>"##,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 18.0
        );
        let v = lo + (hi - lo) * i as f64 / 5.0;
        let py = y(v);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="#444"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            tick_label(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">training progress (%)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + plot_h / 2.0,
        escape(y_label)
    );

    for (i, series) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts = &series.points;
        if !pts.is_empty() {
            let mut band = String::new();
            for p in pts {
                let _ = write!(
                    band,
                    "{:.3},{:.3} ",
                    x(p.checkpoint_pct as f64),
                    y(p.mean + p.sd)
                );
            }
            for p in pts.iter().rev() {
                let _ = write!(
                    band,
                    "{:.3},{:.3} ",
                    x(p.checkpoint_pct as f64),
                    y(p.mean - p.sd)
                );
            }
            let _ = writeln!(
                s,
                r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                band.trim_end()
            );
            let line: Vec<String> = pts
                .iter()
                .map(|p| format!("{:.3},{:.3}", x(p.checkpoint_pct as f64), y(p.mean)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline class="mean" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                line.join(" ")
            );
            for p in pts {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.3}" cy="{:.3}" r="2.5" fill="{color}" data-series="{}" data-pct="{}" data-mean="{}" data-sd="{}"/>"#,
                    x(p.checkpoint_pct as f64),
                    y(p.mean),
                    escape(&series.label),
                    p.checkpoint_pct,
                    p.mean,
                    p.sd
                );
            }
        }
        let runs = pts.iter().map(|p| p.runs).max().unwrap_or(0);
        let note = if runs < 2 {
            " (1 run, SD undefined)".to_string()
        } else {
            format!(" ({runs} runs, +-1 SD)")
        };
        let ly = TOP + 10.0 + i as f64 * 20.0;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<g class="legend"><rect x="{lx}" y="{:.2}" width="14" height="10" fill="{color}"/><text x="{:.2}" y="{:.2}">{}{}</text></g>"#,
            ly - 9.0,
            lx + 20.0,
            ly,
            escape(&series.label),
            note
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Pulls `(pct, mean, sd)` back out of the data attributes of a rendered
/// chart, for the named series.
pub fn read_plotted_points(svg: &str, label: &str) -> Vec<(u32, f64, f64)> {
    let tag = format!(r#"data-series="{}""#, escape(label));
    svg.lines()
        .filter(|l| l.starts_with("<circle") && l.contains(&tag))
        .filter_map(|l| {
            let attr = |name: &str| {
                let key = format!(r#"{name}=""#);
                let start = l.find(&key)? + key.len();
                let end = start + l[start..].find('"')?;
                Some(l[start..end].to_string())
            };
            Some((
                attr("data-pct")?.parse().ok()?,
                attr("data-mean")?.parse().ok()?,
                attr("data-sd")?.parse().ok()?,
            ))
        })
        .collect()
}
