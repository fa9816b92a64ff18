//! Minimal static SVG line and bar charts.

use std::fmt::Write;

use crate::artifacts::Meta;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555"];

#[derive(Debug, Clone)]
pub enum Layer {
    Line {
        label: String,
        points: Vec<(f64, f64)>,
        color: &'static str,
        dashed: bool,
    },
    Markers {
        label: String,
        points: Vec<(f64, f64)>,
        color: &'static str,
    },
    /// `(left edge, right edge, height)` per bar.
    Bars {
        label: String,
        bars: Vec<(f64, f64, f64)>,
        color: &'static str,
    },
}

impl Layer {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>, color: &'static str) -> Self {
        Layer::Line {
            label: label.into(),
            points,
            color,
            dashed: false,
        }
    }

    pub fn dashed(label: impl Into<String>, points: Vec<(f64, f64)>, color: &'static str) -> Self {
        Layer::Line {
            label: label.into(),
            points,
            color,
            dashed: true,
        }
    }

    fn label(&self) -> &str {
        match self {
            Layer::Line { label, .. } | Layer::Markers { label, .. } | Layer::Bars { label, .. } => label,
        }
    }

    fn color(&self) -> &'static str {
        match self {
            Layer::Line { color, .. } | Layer::Markers { color, .. } | Layer::Bars { color, .. } => color,
        }
    }

    fn extent(&self) -> Vec<(f64, f64)> {
        match self {
            Layer::Line { points, .. } | Layer::Markers { points, .. } => points.clone(),
            Layer::Bars { bars, .. } => bars
                .iter()
                .flat_map(|&(a, b, h)| [(a, 0.0), (b, h)])
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub layers: Vec<Layer>,
    /// Fixed x range; otherwise taken from the data.
    pub x_range: Option<(f64, f64)>,
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// About five round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|f| f * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(if t.abs() < 1e-12 * span { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

impl Plot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Default::default()
        }
    }

    pub fn with(mut self, layer: Layer) -> Self {
        self.layers.push(layer);
        self
    }

    fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        let pts: Vec<(f64, f64)> = self
            .layers
            .iter()
            .flat_map(Layer::extent)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        let fold = |f: fn(&(f64, f64)) -> f64| {
            pts.iter()
                .map(f)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        let widen = |(lo, hi): (f64, f64)| {
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo <= 0.0 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.04 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let x = self.x_range.unwrap_or_else(|| widen(fold(|p| p.0)));
        (x, widen(fold(|p| p.1)))
    }

    /// Renders the plot; `meta` goes into a `<metadata>` element.
    pub fn render(&self, meta: &Meta) -> String {
        let ((x0, x1), (y0, y1)) = self.bounds();
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;
        let clip_x = |x: f64| x.clamp(x0, x1);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let meta_json = serde_json::to_string(meta).expect("meta serializes");
        let _ = writeln!(s, "<metadata>{}</metadata>", escape(&meta_json));
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r##"<g stroke="#999" stroke-width="1"><line x1="{LEFT}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{b}"/></g>"##,
            b = TOP + ph,
            r = LEFT + pw
        );
        for t in ticks(x0, x1) {
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{b2}" stroke="#999"/><text x="{x:.2}" y="{ty}" text-anchor="middle">{}</text>"##,
                fmt_tick(t),
                x = sx(t),
                b = TOP + ph,
                b2 = TOP + ph + 5.0,
                ty = TOP + ph + 18.0
            );
        }
        for t in ticks(y0, y1) {
            let _ = writeln!(
                s,
                r##"<line x1="{l2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#999"/><text x="{tx}" y="{ty:.2}" text-anchor="end">{}</text>"##,
                fmt_tick(t),
                y = sy(t),
                l2 = LEFT - 5.0,
                tx = LEFT - 8.0,
                ty = sy(t) + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
            escape(&self.y_label),
            y = TOP + ph / 2.0
        );

        for layer in &self.layers {
            match layer {
                Layer::Bars { bars, color, .. } => {
                    let _ = writeln!(s, r#"<g fill="{color}" fill-opacity="0.35" stroke="{color}" stroke-width="0.5">"#);
                    for &(a, b, h) in bars {
                        let (a, b) = (clip_x(a), clip_x(b));
                        if b <= a {
                            continue;
                        }
                        let _ = writeln!(
                            s,
                            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                            sx(a),
                            sy(h),
                            sx(b) - sx(a),
                            sy(0.0) - sy(h)
                        );
                    }
                    s.push_str("</g>\n");
                }
                Layer::Line { points, color, dashed, .. } => {
                    let pts: Vec<String> = points
                        .iter()
                        .filter(|(x, y)| x.is_finite() && y.is_finite() && *x >= x0 && *x <= x1)
                        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y.clamp(y0, y1))))
                        .collect();
                    let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
                    let _ = writeln!(
                        s,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                        pts.join(" ")
                    );
                }
                Layer::Markers { points, color, .. } => {
                    let _ = writeln!(s, r#"<g fill="{color}">"#);
                    for &(x, y) in points {
                        if x.is_finite() && y.is_finite() && x >= x0 && x <= x1 {
                            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2"/>"#, sx(x), sy(y));
                        }
                    }
                    s.push_str("</g>\n");
                }
            }
        }

        for (i, layer) in self.layers.iter().enumerate() {
            let y = TOP + 12.0 + 16.0 * i as f64;
            let x = LEFT + pw - 180.0;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{}" width="14" height="4" fill="{}"/><text x="{}" y="{}">{}</text>"#,
                y - 4.0,
                layer.color(),
                x + 20.0,
                y + 1.0,
                escape(layer.label())
            );
        }
        s.push_str("</svg>\n");
        s
    }
}
