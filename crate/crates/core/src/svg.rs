//! Dependency-free SVG figures: scatter and line plots, and heatmaps of
//! pair matrices.

use std::fmt::Write;

use crate::netdiag::PairMatrix;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

/// Fill of cells without a value (the diagonal, empty pairs).
pub const NA_COLOR: &str = "#bdbdbd";

enum Layer {
    Points { name: String, points: Vec<(f64, f64)> },
    Line { name: String, points: Vec<(f64, f64)> },
}

/// A two-axis plot assembled from point and line layers.
pub struct Plot {
    title: String,
    x_label: String,
    y_label: String,
    layers: Vec<Layer>,
    diagonal: bool,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            layers: Vec::new(),
            diagonal: false,
        }
    }

    pub fn points(mut self, name: &str, points: &[(f64, f64)]) -> Self {
        self.layers.push(Layer::Points {
            name: name.into(),
            points: points.to_vec(),
        });
        self
    }

    pub fn line(mut self, name: &str, points: &[(f64, f64)]) -> Self {
        self.layers.push(Layer::Line {
            name: name.into(),
            points: points.to_vec(),
        });
        self
    }

    /// Adds the `y = x` reference line.
    pub fn diagonal(mut self) -> Self {
        self.diagonal = true;
        self
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let all = self.layers.iter().flat_map(|l| match l {
            Layer::Points { points, .. } | Layer::Line { points, .. } => points.iter(),
        });
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in all.filter(|(x, y)| x.is_finite() && y.is_finite()) {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        if self.diagonal {
            let lo = x0.min(y0);
            let hi = x1.max(y1);
            return widen(lo, hi, lo, hi);
        }
        widen(x0, x1, y0, y1)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        let mut s = header(WIDTH, HEIGHT, &self.title);
        frame(&mut s, &self.x_label, &self.y_label);
        ticks(&mut s, x0, x1, y0, y1);
        if self.diagonal {
            let lo = x0.max(y0);
            let hi = x1.min(y1);
            let _ = writeln!(
                s,
                r##"<line class="reference" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#444" stroke-dasharray="4 3"/>"##,
                sx(lo),
                sy(lo),
                sx(hi),
                sy(hi)
            );
        }
        let mut names: Vec<&str> = Vec::new();
        for layer in &self.layers {
            let (Layer::Points { name, .. } | Layer::Line { name, .. }) = layer;
            if !names.contains(&name.as_str()) {
                names.push(name);
            }
        }
        let color_of = |name: &str| {
            let k = names.iter().position(|n| *n == name).unwrap_or(0);
            PALETTE[k % PALETTE.len()]
        };
        for layer in &self.layers {
            match layer {
                Layer::Points { name, points } => {
                    let color = color_of(name);
                    let _ = writeln!(s, r#"<g class="points" fill="{color}" fill-opacity="0.7">"#);
                    for &(x, y) in points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5"/>"#, sx(x), sy(y));
                    }
                    s.push_str("</g>\n");
                }
                Layer::Line { name, points } => {
                    let coords: Vec<String> = points
                        .iter()
                        .filter(|(x, y)| x.is_finite() && y.is_finite())
                        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                        .collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline class="line" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                        color_of(name),
                        coords.join(" ")
                    );
                }
            }
        }
        for (k, name) in names.iter().filter(|n| !n.is_empty()).enumerate() {
            let y = MARGIN + 14.0 + 14.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<text class="legend" x="{:.2}" y="{y:.2}" font-size="11" fill="{}">{}</text>"#,
                WIDTH - MARGIN - 90.0,
                color_of(name),
                escape(name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn widen(x0: f64, x1: f64, y0: f64, y1: f64) -> (f64, f64, f64, f64) {
    let pad = |a: f64, b: f64| {
        if b > a {
            let d = 0.04 * (b - a);
            (a - d, b + d)
        } else {
            (a - 0.5, b + 0.5)
        }
    };
    let (a, b) = pad(x0, x1);
    let (c, d) = pad(y0, y1);
    (a, b, c, d)
}

fn header(width: f64, height: f64, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, "<!-- {} -->", crate::io::TOOL_VERSION);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    s
}

fn frame(s: &mut String, x_label: &str, y_label: &str) {
    let _ = writeln!(
        s,
        r#"<rect class="frame" x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
}

fn ticks(s: &mut String, x0: f64, x1: f64, y0: f64, y1: f64) {
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let x = MARGIN + f * (WIDTH - 2.0 * MARGIN);
        let y = HEIGHT - MARGIN - f * (HEIGHT - 2.0 * MARGIN);
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN + 14.0,
            tick_label(x0 + f * (x1 - x0))
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
            MARGIN - 4.0,
            y + 3.0,
            tick_label(y0 + f * (y1 - y0))
        );
    }
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Colour mapping of a heatmap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColorScale {
    /// White to dark blue over `[0, max]`.
    Sequential,
    /// Blue for negative, white at zero, red for positive, symmetric in
    /// the largest absolute value.
    Diverging,
}

/// Heatmap of a pair matrix; row `i` is labelled `labels[i]`. Cells
/// without a value are drawn in [`NA_COLOR`].
pub fn heatmap(m: &PairMatrix, labels: &[usize], scale: ColorScale, title: &str) -> String {
    let n = m.node_count();
    let cell = (320.0 / n.max(1) as f64).clamp(8.0, 40.0);
    let left = 48.0;
    let top = 40.0;
    let width = left + cell * n as f64 + 90.0;
    let height = top + cell * n as f64 + 30.0;
    let limit = (0..n)
        .flat_map(|i| (0..n).filter_map(move |j| m.cell(i, j)))
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let mut s = header(width, height, title);
    for i in 0..n {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
            left - 4.0,
            top + cell * (i as f64 + 0.5) + 3.0,
            labels[i]
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
            left + cell * (i as f64 + 0.5),
            top - 4.0,
            labels[i]
        );
    }
    for i in 0..n {
        for j in 0..n {
            let x = left + cell * j as f64;
            let y = top + cell * i as f64;
            match m.cell(i, j) {
                Some(v) => {
                    let _ = writeln!(
                        s,
                        r#"<rect class="cell" x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="{}"><title>{}</title></rect>"#,
                        color(v, limit, scale),
                        crate::io::fmt_f64(v)
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        r#"<rect class="na" x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="{NA_COLOR}"/>"#
                    );
                }
            }
        }
    }
    color_bar(&mut s, left + cell * n as f64 + 16.0, top, cell * n as f64, limit, scale);
    s.push_str("</svg>\n");
    s
}

fn color_bar(s: &mut String, x: f64, top: f64, height: f64, limit: f64, scale: ColorScale) {
    let steps = 20;
    let lo = match scale {
        ColorScale::Sequential => 0.0,
        ColorScale::Diverging => -limit,
    };
    for k in 0..steps {
        let f = k as f64 / (steps - 1) as f64;
        let v = limit - f * (limit - lo);
        let _ = writeln!(
            s,
            r#"<rect class="legend" x="{x:.2}" y="{:.2}" width="12" height="{:.2}" fill="{}"/>"#,
            top + f * height * (steps - 1) as f64 / steps as f64,
            height / steps as f64,
            color(v, limit, scale)
        );
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#, x + 16.0, top + 8.0, tick_label(limit));
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#, x + 16.0, top + height, tick_label(lo));
}

fn color(v: f64, limit: f64, scale: ColorScale) -> String {
    let f = if limit > 0.0 { (v / limit).clamp(-1.0, 1.0) } else { 0.0 };
    let mix = |a: (f64, f64, f64), t: f64| {
        let c = |x: f64| (255.0 + (x - 255.0) * t).round().clamp(0.0, 255.0) as u8;
        format!("#{:02x}{:02x}{:02x}", c(a.0), c(a.1), c(a.2))
    };
    match scale {
        ColorScale::Sequential => mix((8.0, 48.0, 107.0), f.max(0.0)),
        ColorScale::Diverging if f >= 0.0 => mix((178.0, 24.0, 43.0), f),
        ColorScale::Diverging => mix((33.0, 102.0, 172.0), -f),
    }
}
