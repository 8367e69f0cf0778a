//! Minimal self-contained SVG charts for reports.

use std::fmt::Write as _;

use nalgebra::Vector2;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

/// Colours cycled through by successive series.
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round tick spacing covering `span` with about five ticks.
fn tick_step(span: f64) -> f64 {
    if !(span > 0.0) {
        return 1.0;
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let n = raw / mag;
    let nice = if n < 1.5 {
        1.0
    } else if n < 3.5 {
        2.0
    } else if n < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64), left: f64, top: f64, width: f64, height: f64) -> Self {
        let pad = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        let (x0, x1) = pad(x);
        let (y0, y1) = pad(y);
        Self { x0, x1, y0, y1, left, top, width, height }
    }

    fn sx(&self, x: f64) -> f64 {
        self.left + (x - self.x0) / (self.x1 - self.x0) * self.width
    }

    fn sy(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y0) / (self.y1 - self.y0) * self.height
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (l, t, w, h) = (self.left, self.top, self.width, self.height);
        let _ = writeln!(
            out,
            r##"<rect x="{l:.1}" y="{t:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#333"/>"##
        );
        for (lo, hi, horizontal) in [(self.x0, self.x1, true), (self.y0, self.y1, false)] {
            let step = tick_step(hi - lo);
            let mut v = (lo / step).ceil() * step;
            while v <= hi + 1e-9 * step {
                let label = format!("{}", (v / step).round() * step);
                if horizontal {
                    let x = self.sx(v);
                    let _ = writeln!(
                        out,
                        r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#333"/><text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{label}</text>"##,
                        t + h,
                        t + h + 5.0,
                        t + h + 18.0
                    );
                } else {
                    let y = self.sy(v);
                    let _ = writeln!(
                        out,
                        r##"<line x1="{:.1}" y1="{y:.1}" x2="{l:.1}" y2="{y:.1}" stroke="#333"/><text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{label}</text>"##,
                        l - 5.0,
                        l - 8.0,
                        y + 4.0
                    );
                }
                v += step;
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#,
            l + w / 2.0,
            t + h + 40.0,
            escape(xlabel)
        );
        let _ = writeln!(
            out,
            r#"<text transform="translate({:.1},{:.1}) rotate(-90)" font-size="13" text-anchor="middle">{}</text>"#,
            l - 50.0,
            t + h / 2.0,
            escape(ylabel)
        );
    }
}

fn document(width: f64, height: f64, title: &str, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n{body}</svg>\n",
        width / 2.0,
        escape(title)
    )
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

fn legend(out: &mut String, labels: &[&str], x: f64, y: f64) {
    for (i, label) in labels.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let yy = y + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{c}"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            yy - 9.0,
            x + 14.0,
            yy,
            escape(label)
        );
    }
}

/// Polylines with markers, one per series.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (xmin, xmax) = extent(all().map(|p| p.0));
    let (ymin, ymax) = extent(all().map(|p| p.1));
    let (xmin, xmax) = if xmin.is_finite() { (xmin, xmax) } else { (0.0, 1.0) };
    let (ymin, ymax) = if ymin.is_finite() { (ymin.min(0.0), ymax * 1.05) } else { (0.0, 1.0) };
    let frame = Frame::new(
        (xmin, xmax),
        (ymin, ymax),
        MARGIN_LEFT,
        MARGIN_TOP,
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
    );
    let mut body = String::new();
    frame.axes(&mut body, xlabel, ylabel);
    for (i, s) in series.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|p| format!("{:.2},{:.2}", frame.sx(p.0), frame.sy(p.1)))
            .collect();
        let _ = writeln!(
            body,
            r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        for p in &pts {
            let (x, y) = p.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(body, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{c}"/>"#);
        }
    }
    let labels: Vec<&str> = series.iter().map(|s| s.label).collect();
    legend(&mut body, &labels, WIDTH - MARGIN_RIGHT - 150.0, MARGIN_TOP + 16.0);
    document(WIDTH, HEIGHT, title, &body)
}

/// Bars of `counts` over bins of `bin_width` starting at zero.
pub fn histogram_chart(title: &str, xlabel: &str, bin_width: f64, counts: &[usize]) -> String {
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let frame = Frame::new(
        (0.0, (counts.len().max(1)) as f64 * bin_width),
        (0.0, top * 1.05),
        MARGIN_LEFT,
        MARGIN_TOP,
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
    );
    let mut body = String::new();
    frame.axes(&mut body, xlabel, "count");
    for (i, c) in counts.iter().enumerate() {
        let x0 = frame.sx(i as f64 * bin_width);
        let x1 = frame.sx((i + 1) as f64 * bin_width);
        let y = frame.sy(*c as f64);
        let _ = writeln!(
            body,
            r#"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}" stroke="white" stroke-width="0.5"/>"#,
            (x1 - x0).max(0.5),
            frame.sy(0.0) - y,
            PALETTE[0]
        );
    }
    document(WIDTH, HEIGHT, title, &body)
}

/// Side-by-side scatter panels sharing one metric scale, for comparing
/// point sets such as raw and corrected keypoints.
pub fn scatter_panels(title: &str, panels: &[(&str, Vec<Vector2<f64>>)]) -> String {
    let (xmin, xmax) = extent(panels.iter().flat_map(|p| p.1.iter().map(|v| v.x)));
    let (ymin, ymax) = extent(panels.iter().flat_map(|p| p.1.iter().map(|v| v.y)));
    let (xmin, xmax, ymin, ymax) = if xmin.is_finite() {
        (xmin, xmax, ymin, ymax)
    } else {
        (-1.0, 1.0, -1.0, 1.0)
    };
    // Equal aspect: square panels over the larger half-span.
    let half = ((xmax - xmin).max(ymax - ymin) / 2.0).max(1.0) * 1.05;
    let (cx, cy) = ((xmin + xmax) / 2.0, (ymin + ymax) / 2.0);
    let side = 360.0;
    let n = panels.len().max(1) as f64;
    let width = MARGIN_LEFT + n * (side + MARGIN_LEFT) ;
    let height = MARGIN_TOP + side + MARGIN_BOTTOM + 10.0;
    let mut body = String::new();
    for (k, (label, pts)) in panels.iter().enumerate() {
        let left = MARGIN_LEFT + k as f64 * (side + MARGIN_LEFT);
        let frame = Frame::new((cx - half, cx + half), (cy - half, cy + half), left, MARGIN_TOP + 10.0, side, side);
        frame.axes(&mut body, "x (m)", "y (m)");
        let _ = writeln!(
            body,
            r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#,
            left + side / 2.0,
            MARGIN_TOP + 4.0,
            escape(label)
        );
        for p in pts {
            let _ = writeln!(
                body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="1.3" fill="{}"/>"#,
                frame.sx(p.x),
                frame.sy(p.y),
                PALETTE[k % PALETTE.len()]
            );
        }
    }
    document(width, height, title, &body)
}
