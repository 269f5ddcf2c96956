//! Minimal static SVG charts. Output depends only on the data, so reruns
//! produce identical files.

use std::fmt::Write as _;

const PALETTE: [&str; 9] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
}

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Padded `(lo, hi)` of the values, never degenerate.
fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn header(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-size="16" text-anchor="middle">{}</text>"#,
        w / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        f.left, f.top, f.width, f.height
    );
    for i in 0..=4 {
        let fx = f.x.0 + (f.x.1 - f.x.0) * i as f64 / 4.0;
        let fy = f.y.0 + (f.y.1 - f.y.0) * i as f64 / 4.0;
        let (px, py) = (f.px(fx), f.py(fy));
        let bottom = f.top + f.height;
        let _ = writeln!(
            out,
            r#"<text x="{px:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
            bottom + 14.0,
            label(fx)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
            f.left - 4.0,
            py + 3.0,
            label(fy)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        f.left + f.width / 2.0,
        f.top + f.height + 32.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        f.top + f.height / 2.0,
        f.top + f.height / 2.0,
        escape(ylabel)
    );
}

/// Lines and marker series on shared axes, with a legend.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let (w, h) = (760.0, 460.0);
    let all = || series.iter().flat_map(|s| s.points.iter());
    let f = Frame {
        left: 90.0,
        top: 40.0,
        width: 520.0,
        height: 360.0,
        x: extent(all().map(|p| p.0)),
        y: extent(all().map(|p| p.1)),
    };
    let mut out = String::new();
    header(&mut out, w, h, title);
    axes(&mut out, &f, xlabel, ylabel);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, r#"<g class="series" data-name="{}">"#, escape(s.name));
        match s.style {
            Style::Line => {
                let pts: Vec<String> = s
                    .points
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
                    .collect();
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    pts.join(" ")
                );
            }
            Style::Markers => {
                for &(x, y) in &s.points {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                        f.px(x),
                        f.py(y)
                    );
                }
            }
        }
        let _ = writeln!(out, "</g>");
        let ly = f.top + 12.0 + 18.0 * i as f64;
        let lx = f.left + f.width + 16.0;
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.1}" y="{:.1}" width="12" height="12" fill="{color}"/><text x="{:.1}" y="{ly:.1}" font-size="12">{}</text>"#,
            ly - 10.0,
            lx + 18.0,
            escape(s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One histogram panel per column, sharing the bin edges.
pub fn histogram_grid(title: &str, names: &[String], columns: &[Vec<f64>], bins: usize) -> String {
    let cols = 3usize.min(names.len().max(1));
    let rows = names.len().div_ceil(cols).max(1);
    let (pw, ph) = (260.0, 190.0);
    let (w, h) = (pw * cols as f64 + 20.0, ph * rows as f64 + 50.0);
    let (lo, hi) = extent(columns.iter().flatten().copied());
    let width = (hi - lo) / bins as f64;
    let mut out = String::new();
    header(&mut out, w, h, title);
    for (k, (name, data)) in names.iter().zip(columns).enumerate() {
        let mut counts = vec![0usize; bins];
        for &v in data.iter().filter(|v| v.is_finite()) {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let peak = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
        let f = Frame {
            left: 20.0 + pw * (k % cols) as f64 + 40.0,
            top: 40.0 + ph * (k / cols) as f64 + 20.0,
            width: pw - 60.0,
            height: ph - 60.0,
            x: (lo, hi),
            y: (0.0, peak),
        };
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(out, r#"<g class="panel" data-name="{}">"#, escape(name));
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
            f.left + f.width / 2.0,
            f.top - 6.0,
            escape(name)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            f.left, f.top, f.width, f.height
        );
        for (b, &c) in counts.iter().enumerate() {
            let x0 = f.px(lo + b as f64 * width);
            let x1 = f.px(lo + (b + 1) as f64 * width);
            let y = f.py(c as f64);
            let _ = writeln!(
                out,
                r#"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                (x1 - x0).max(0.0),
                f.top + f.height - y
            );
        }
        for (x, anchor) in [(lo, "start"), (hi, "end")] {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="9" text-anchor="{anchor}">{}</text>"#,
                f.px(x),
                f.top + f.height + 12.0,
                label(x)
            );
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    out
}

/// Square matrix of values in `[-1, 1]`, blue for negative, red for positive.
pub fn heatmap(title: &str, labels: &[String], values: &[Vec<f64>]) -> String {
    let n = labels.len();
    let cell = 60.0;
    let margin = 80.0;
    let (w, h) = (margin + cell * n as f64 + 20.0, margin + cell * n as f64 + 20.0);
    let mut out = String::new();
    header(&mut out, w, h, title);
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let t = v.clamp(-1.0, 1.0);
            let fade = (255.0 * (1.0 - t.abs())).round() as u8;
            let color = if t >= 0.0 {
                format!("#ff{fade:02x}{fade:02x}")
            } else {
                format!("#{fade:02x}{fade:02x}ff")
            };
            let (x, y) = (margin + cell * j as f64, margin + cell * i as f64);
            let _ = writeln!(
                out,
                r#"<rect class="cell" x="{x:.1}" y="{y:.1}" width="{cell}" height="{cell}" fill="{color}" stroke="white"/>"#
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{v:.2}</text>"#,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    for (k, l) in labels.iter().enumerate() {
        let c = margin + cell * k as f64 + cell / 2.0;
        let _ = writeln!(
            out,
            r#"<text x="{c:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            margin - 8.0,
            escape(l)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#,
            margin - 8.0,
            c + 4.0,
            escape(l)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_has_one_group_per_series() {
        let s = line_chart(
            "t",
            "x",
            "y",
            &[
                Series {
                    name: "a",
                    points: vec![(0.0, 1.0), (1.0, 2.0)],
                    style: Style::Line,
                },
                Series {
                    name: "b<c",
                    points: vec![(0.5, 1.5)],
                    style: Style::Markers,
                },
            ],
        );
        assert_eq!(s.matches(r#"<g class="series""#).count(), 2);
        assert!(s.contains("b&lt;c"));
        assert!(s.ends_with("</svg>\n"));
    }

    #[test]
    fn degenerate_inputs_do_not_panic() {
        let s = line_chart("t", "x", "y", &[]);
        assert!(s.contains("<svg"));
        let h = histogram_grid("h", &["A".into()], &[vec![1.0; 5]], 10);
        assert_eq!(h.matches(r#"class="panel""#).count(), 1);
        let m = heatmap("c", &["A".into(), "B".into()], &[vec![1.0, -0.5], vec![-0.5, 1.0]]);
        assert_eq!(m.matches(r#"class="cell""#).count(), 4);
    }

    #[test]
    fn labels_switch_to_scientific() {
        assert_eq!(label(0.5), "0.5");
        assert_eq!(label(2.0e-5), "2.00e-5");
        assert_eq!(label(0.0), "0");
    }
}
