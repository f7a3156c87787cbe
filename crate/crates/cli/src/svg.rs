//! Minimal SVG plots of planar point sets.

use std::fmt::Write;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    /// One dot per point.
    Scatter,
    /// A closed polyline through the points in order.
    Loop,
}

pub struct Series<'a> {
    pub name: &'a str,
    pub points: &'a [[f64; 2]],
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Axes, one series per color, a legend and optional caption lines.
pub fn plot(series: &[Series], style: Style, labels: [&str; 2], caption: &[String]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
    }
    let pad = |a: f64, b: f64| {
        let w = (b - a).max(1e-9);
        (a - 0.05 * w, b + 0.05 * w)
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    let span = SIZE - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * span;
    let sy = |y: f64| SIZE - MARGIN - (y - y0) / (y1 - y0) * span;

    let mut out = String::new();
    let height = SIZE + 16.0 * caption.len() as f64;
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{height}" viewBox="0 0 {SIZE} {height}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    let (l, r, t, b) = (MARGIN, SIZE - MARGIN, MARGIN, SIZE - MARGIN);
    writeln!(out, r#"<path d="M{l},{t} L{l},{b} L{r},{b}" fill="none" stroke="black"/>"#).unwrap();
    for (v, x, y, anchor) in [(x0, l, b + 14.0, "start"), (x1, r, b + 14.0, "end")] {
        writeln!(out, r#"<text x="{x}" y="{y}" font-size="10" text-anchor="{anchor}">{v:.3}</text>"#).unwrap();
    }
    for (v, y) in [(y0, b), (y1, t + 10.0)] {
        writeln!(out, r#"<text x="{}" y="{y}" font-size="10" text-anchor="end">{v:.3}</text>"#, l - 4.0).unwrap();
    }
    writeln!(out, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#, SIZE / 2.0, b + 30.0, escape(labels[0])).unwrap();
    writeln!(
        out,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        SIZE / 2.0,
        SIZE / 2.0,
        escape(labels[1])
    )
    .unwrap();

    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        match style {
            Style::Scatter => {
                for p in s.points {
                    writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="{color}"/>"#, sx(p[0]), sy(p[1])).unwrap();
                }
            }
            Style::Loop => {
                let pts: Vec<String> = s.points.iter().map(|p| format!("{:.2},{:.2}", sx(p[0]), sy(p[1]))).collect();
                writeln!(out, r#"<polygon points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" ")).unwrap();
            }
        }
        let ly = t + 14.0 * k as f64;
        writeln!(out, r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#, r - 110.0, ly - 9.0).unwrap();
        writeln!(out, r#"<text x="{}" y="{ly}" font-size="11">{}</text>"#, r - 96.0, escape(s.name)).unwrap();
    }
    for (i, line) in caption.iter().enumerate() {
        writeln!(out, r#"<text x="{l}" y="{}" font-size="11">{}</text>"#, SIZE + 16.0 * i as f64, escape(line)).unwrap();
    }
    out.push_str("</svg>\n");
    out
}
