//! Minimal self-contained SVG plotter: line/scatter plots and heatmaps.
//!
//! Output is deterministic for identical input so report structure tests
//! stay stable. Colors come from a fixed palette; heatmaps use a 256-step
//! linear colormap interpolated between fixed anchors.

const WIDTH: f64 = 560.0;
const HEIGHT: f64 = 340.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 34.0;
const MARGIN_BOTTOM: f64 = 48.0;

/// Series palette; compare overlays rely on index 0 = blue, 1 = red.
pub const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeriesStyle {
    Line,
    Scatter,
    LineWithMarkers,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub color: String,
    pub style: SeriesStyle,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, color_index: usize, style: SeriesStyle) -> Self {
        Series {
            label: label.into(),
            color: PALETTE[color_index % PALETTE.len()].to_string(),
            style,
            points: Vec::new(),
        }
    }

    pub fn with_points(mut self, points: Vec<(f64, f64)>) -> Self {
        self.points = points;
        self
    }
}

fn fmt(v: f64) -> String {
    if !v.is_finite() {
        return "0".into();
    }
    let s = format!("{v:.3}");
    s
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        if s.is_empty() {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{v:.3e}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Axes {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Axes {
    fn from_points<'a>(points: impl Iterator<Item = &'a (f64, f64)>) -> Axes {
        let mut x_min = f64::INFINITY;
        let mut x_max = f64::NEG_INFINITY;
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        for &(x, y) in points {
            if x.is_finite() {
                x_min = x_min.min(x);
                x_max = x_max.max(x);
            }
            if y.is_finite() {
                y_min = y_min.min(y);
                y_max = y_max.max(y);
            }
        }
        if !x_min.is_finite() || x_min == x_max {
            let c = if x_min.is_finite() { x_min } else { 0.0 };
            x_min = c - 1.0;
            x_max = c + 1.0;
        }
        if !y_min.is_finite() || y_min == y_max {
            let c = if y_min.is_finite() { y_min } else { 0.0 };
            y_min = c - 1.0;
            y_max = c + 1.0;
        }
        let pad = 0.04 * (y_max - y_min);
        Axes {
            x_min,
            x_max,
            y_min: y_min - pad,
            y_max: y_max + pad,
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn svg_header(out: &mut String, title: &str) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         width=\"{WIDTH}\" height=\"{HEIGHT}\" role=\"img\">"
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-size=\"14\" font-family=\"sans-serif\" \
         text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    ));
}

fn draw_frame(out: &mut String, axes: &Axes, x_label: &str, y_label: &str) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = MARGIN_TOP;
    let y1 = HEIGHT - MARGIN_BOTTOM;
    out.push_str(&format!(
        "<rect x=\"{x0}\" y=\"{y0}\" width=\"{}\" height=\"{}\" fill=\"none\" \
         stroke=\"#444444\" stroke-width=\"1\"/>",
        x1 - x0,
        y1 - y0
    ));
    for i in 0..5 {
        let t = i as f64 / 4.0;
        let xv = axes.x_min + t * (axes.x_max - axes.x_min);
        let yv = axes.y_min + t * (axes.y_max - axes.y_min);
        let px = axes.px(xv);
        let py = axes.py(yv);
        out.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{y1}\" x2=\"{px}\" y2=\"{}\" stroke=\"#444444\"/>",
            y1 + 4.0
        ));
        out.push_str(&format!(
            "<text x=\"{px}\" y=\"{}\" font-size=\"10\" font-family=\"sans-serif\" \
             text-anchor=\"middle\">{}</text>",
            y1 + 16.0,
            fmt_tick(xv)
        ));
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{py}\" x2=\"{x0}\" y2=\"{py}\" stroke=\"#444444\"/>",
            x0 - 4.0
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" font-family=\"sans-serif\" \
             text-anchor=\"end\">{}</text>",
            x0 - 7.0,
            py + 3.0,
            fmt_tick(yv)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" font-family=\"sans-serif\" \
         text-anchor=\"middle\">{}</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"12\" font-family=\"sans-serif\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    ));
}

/// Render an XY figure with one or more series.
pub fn xy_figure(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut out = String::new();
    svg_header(&mut out, title);
    let axes = Axes::from_points(series.iter().flat_map(|s| s.points.iter()));
    draw_frame(&mut out, &axes, x_label, y_label);
    for s in series {
        let draw_line = matches!(s.style, SeriesStyle::Line | SeriesStyle::LineWithMarkers);
        let draw_marks = matches!(s.style, SeriesStyle::Scatter | SeriesStyle::LineWithMarkers);
        if draw_line && s.points.len() > 1 {
            let mut path = String::from("<polyline fill=\"none\" stroke=\"");
            path.push_str(&s.color);
            path.push_str("\" stroke-width=\"1.5\" points=\"");
            for (x, y) in &s.points {
                path.push_str(&format!("{},{} ", fmt(axes.px(*x)), fmt(axes.py(*y))));
            }
            path.push_str("\"/>");
            out.push_str(&path);
        }
        if draw_marks {
            for (x, y) in &s.points {
                out.push_str(&format!(
                    "<circle cx=\"{}\" cy=\"{}\" r=\"2.2\" fill=\"{}\"/>",
                    fmt(axes.px(*x)),
                    fmt(axes.py(*y)),
                    s.color
                ));
            }
        }
    }
    // Legend.
    let mut ly = MARGIN_TOP + 12.0;
    for s in series {
        if s.label.is_empty() {
            continue;
        }
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>",
            WIDTH - MARGIN_RIGHT - 150.0,
            ly - 9.0,
            s.color
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" font-family=\"sans-serif\">{}</text>",
            WIDTH - MARGIN_RIGHT - 136.0,
            ly,
            escape(&s.label)
        ));
        ly += 14.0;
    }
    out.push_str("</svg>");
    out
}

/// 256-step linear colormap between fixed anchors (dark blue to yellow).
pub fn colormap(t: f64) -> String {
    const ANCHORS: [(f64, f64, f64); 5] = [
        (0.050, 0.030, 0.330),
        (0.230, 0.300, 0.755),
        (0.130, 0.565, 0.550),
        (0.370, 0.785, 0.380),
        (0.990, 0.905, 0.145),
    ];
    let t = t.clamp(0.0, 1.0);
    let step = (t * 255.0).round() / 255.0;
    let scaled = step * (ANCHORS.len() - 1) as f64;
    let idx = (scaled.floor() as usize).min(ANCHORS.len() - 2);
    let frac = scaled - idx as f64;
    let (r0, g0, b0) = ANCHORS[idx];
    let (r1, g1, b1) = ANCHORS[idx + 1];
    let r = ((r0 + frac * (r1 - r0)) * 255.0).round() as u8;
    let g = ((g0 + frac * (g1 - g0)) * 255.0).round() as u8;
    let b = ((b0 + frac * (b1 - b0)) * 255.0).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Render a row-major heatmap with x varying along columns.
pub fn heatmap_figure(
    title: &str,
    x_label: &str,
    y_label: &str,
    x: &[f64],
    y: &[f64],
    values: &[f64],
) -> String {
    assert_eq!(values.len(), x.len() * y.len(), "heatmap shape mismatch");
    let mut out = String::new();
    svg_header(&mut out, title);
    let corners = [
        (x.first().copied().unwrap_or(0.0), y.first().copied().unwrap_or(0.0)),
        (x.last().copied().unwrap_or(1.0), y.last().copied().unwrap_or(1.0)),
    ];
    let axes = Axes::from_points(corners.iter());
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let nx = x.len();
    for (row, &yv) in y.iter().enumerate() {
        for (col, &xv) in x.iter().enumerate() {
            let v = values[row * nx + col];
            let t = (v - lo) / span;
            // Cell extents from midpoints to neighbors.
            let x_lo = if col == 0 { xv } else { (xv + x[col - 1]) / 2.0 };
            let x_hi = if col + 1 == nx { xv } else { (xv + x[col + 1]) / 2.0 };
            let y_lo = if row == 0 { yv } else { (yv + y[row - 1]) / 2.0 };
            let y_hi = if row + 1 == y.len() { yv } else { (yv + y[row + 1]) / 2.0 };
            let px = axes.px(x_lo);
            let pw = (axes.px(x_hi) - px).abs().max(1.0);
            let py = axes.py(y_hi);
            let ph = (axes.py(y_lo) - py).abs().max(1.0);
            out.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
                fmt(px),
                fmt(py),
                fmt(pw),
                fmt(ph),
                colormap(t)
            ));
        }
    }
    draw_frame(&mut out, &axes, x_label, y_label);
    out.push_str("</svg>");
    out
}

/// Scatter two IQ clouds (used by the classification section).
pub fn iq_figure(title: &str, shots0: &[(f64, f64)], shots1: &[(f64, f64)]) -> String {
    let s0 = Series::new("state 0", 0, SeriesStyle::Scatter).with_points(shots0.to_vec());
    let s1 = Series::new("state 1", 1, SeriesStyle::Scatter).with_points(shots1.to_vec());
    xy_figure(title, "I (V)", "Q (V)", &[s0, s1])
}
