//! Minimal SVG writers for 2D ellipsoids and per-step line charts.

use std::fmt::Write;

use ellbound::ellipsoid::Ellipsoid;
use ellbound::error::{Error, Result};
use ellbound::linalg::SymMatrix;
use nalgebra::DVector;

pub const BOUNDARY_POINTS: usize = 256;
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;
pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Projection onto the first two coordinates.
pub fn project_2d(e: &Ellipsoid) -> Result<Ellipsoid> {
    match e.dim() {
        2 => Ok(e.clone()),
        n if n > 2 => {
            let c = DVector::from_column_slice(&e.center().as_slice()[..2]);
            let p = e.shape().as_matrix().view((0, 0), (2, 2)).into_owned();
            Ellipsoid::new(c, SymMatrix::symmetrized(&p)?)
        }
        n => Err(Error::DimensionMismatch { expected: 2, found: n }),
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(points: impl Iterator<Item = [f64; 2]>) -> Frame {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        for [a, b] in points {
            x = (x.0.min(a), x.1.max(a));
            y = (y.0.min(b), y.1.max(b));
        }
        let pad = |r: (f64, f64)| {
            let span = (r.1 - r.0).max(1e-9);
            (r.0 - 0.05 * span, r.1 + 0.05 * span)
        };
        Frame { x: pad(x), y: pad(y) }
    }

    fn px(&self, p: [f64; 2]) -> (f64, f64) {
        let u = (p[0] - self.x.0) / (self.x.1 - self.x.0);
        let v = (p[1] - self.y.0) / (self.y.1 - self.y.0);
        (MARGIN + u * (WIDTH - 2.0 * MARGIN), HEIGHT - MARGIN - v * (HEIGHT - 2.0 * MARGIN))
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str) {
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(
            out,
            r##"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            r - l,
            b - t
        );
        for (x, y, anchor, text) in [
            (l, b + 16.0, "start", format!("{:.3}", self.x.0)),
            (r, b + 16.0, "end", format!("{:.3}", self.x.1)),
            ((l + r) / 2.0, b + 32.0, "middle", x_label.to_string()),
            (l - 4.0, b, "end", format!("{:.3}", self.y.0)),
            (l - 4.0, t + 4.0, "end", format!("{:.3}", self.y.1)),
            (l, t - 8.0, "start", y_label.to_string()),
        ] {
            let _ = writeln!(
                out,
                r#"<text x="{x:.2}" y="{y:.2}" font-size="11" text-anchor="{anchor}">{}</text>"#,
                escape(&text)
            );
        }
    }
}

fn header(title: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <title>{}</title>\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        escape(title)
    )
}

fn polyline(out: &mut String, frame: &Frame, pts: &[[f64; 2]], color: &str, closed: bool) {
    let coords: Vec<String> = pts
        .iter()
        .map(|p| {
            let (x, y) = frame.px(*p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let tag = if closed { "polygon" } else { "polyline" };
    let _ = writeln!(
        out,
        r#"<{tag} points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
        coords.join(" ")
    );
}

fn legend(out: &mut String, labels: &[(&str, &str)]) {
    for (k, (label, color)) in labels.iter().enumerate() {
        let y = MARGIN + 14.0 + 14.0 * k as f64;
        let x = WIDTH - MARGIN - 120.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#,
            y - 4.0,
            x + 16.0,
            y - 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{y:.2}" font-size="11">{}</text>"#,
            x + 20.0,
            escape(label)
        );
    }
}

/// Closed boundary polylines of labelled ellipsoids, projected onto the
/// first two coordinates.
pub fn ellipses(title: &str, items: &[(&Ellipsoid, &str)]) -> Result<String> {
    let mut curves = Vec::with_capacity(items.len());
    for (e, _) in items {
        curves.push(project_2d(e)?.boundary_2d(BOUNDARY_POINTS)?);
    }
    let frame = Frame::fit(curves.iter().flatten().copied());
    let mut out = header(title);
    frame.axes(&mut out, "x1", "x2");
    let mut labels = Vec::new();
    for (k, ((_, label), pts)) in items.iter().zip(&curves).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        polyline(&mut out, &frame, pts, color, true);
        labels.push((*label, color));
    }
    legend(&mut out, &labels);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Per-step line chart; series values are plotted against steps `1..=len`.
pub fn line_chart(title: &str, y_label: &str, series: &[(&str, Vec<f64>)]) -> String {
    let to_points = |v: &[f64]| -> Vec<[f64; 2]> {
        v.iter().enumerate().map(|(k, y)| [(k + 1) as f64, *y]).collect()
    };
    let curves: Vec<Vec<[f64; 2]>> = series.iter().map(|(_, v)| to_points(v)).collect();
    let frame = Frame::fit(curves.iter().flatten().copied().filter(|p| p[1].is_finite()));
    let mut out = header(title);
    frame.axes(&mut out, "step", y_label);
    let mut labels = Vec::new();
    for (k, ((label, _), pts)) in series.iter().zip(&curves).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        polyline(&mut out, &frame, pts, color, false);
        labels.push((*label, color));
    }
    legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}
