//! CSV tables and SVG figures. CSV carries the data (17-digit floats); SVG is
//! presentation only.

use std::fmt::Write as _;

use cusp_atlas::atlas::{JointSliceCurve, WorkspaceContour};
use cusp_atlas::export::format_f64;
use cusp_atlas::motion::TraceResult;

fn table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(header).expect("in-memory CSV");
    for r in rows {
        w.write_record(&r).expect("in-memory CSV");
    }
    w.into_inner().expect("in-memory CSV")
}

/// `polyline_id, alpha, theta1` per workspace contour vertex.
pub fn contour_csv(wc: &WorkspaceContour) -> Vec<u8> {
    table(
        &["polyline_id", "alpha", "theta1"],
        wc.polylines.iter().enumerate().flat_map(|(i, p)| p.vertices.iter().map(move |v| vec![i.to_string(), format_f64(v[0]), format_f64(v[1])])),
    )
}

/// `polyline_id, rho2, rho3` per joint-plane curve vertex.
pub fn joint_curves_csv(jc: &JointSliceCurve) -> Vec<u8> {
    table(
        &["polyline_id", "rho2", "rho3"],
        jc.polylines.iter().enumerate().flat_map(|(i, p)| p.points.iter().map(move |v| vec![i.to_string(), format_f64(v[0]), format_f64(v[1])])),
    )
}

pub fn trace_csv(r: &TraceResult) -> Vec<u8> {
    table(
        &["s", "rho2", "rho3", "theta1", "alpha", "singularity"],
        r.samples.iter().map(|x| [x.s, x.rho2, x.rho3, x.theta1, x.alpha, x.singularity].iter().map(|v| format_f64(*v)).collect()),
    )
}

#[derive(Debug, Clone)]
pub struct Series {
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
    pub color: &'static str,
    pub width: f64,
}

#[derive(Debug, Clone)]
pub struct Marker {
    pub at: [f64; 2],
    pub color: &'static str,
    pub label: String,
}

/// A plain 2-D line plot with fixed data bounds `[[x0, x1], [y0, y1]]`.
#[derive(Debug, Clone)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub bounds: [[f64; 2]; 2],
    pub series: Vec<Series>,
    pub markers: Vec<Marker>,
}

const W: f64 = 640.0;
const H: f64 = 640.0;
const PAD: f64 = 56.0;

impl Figure {
    pub fn new(title: &str, x_label: &str, y_label: &str, bounds: [[f64; 2]; 2]) -> Self {
        Figure { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), bounds, series: vec![], markers: vec![] }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let [[x0, x1], [y0, y1]] = self.bounds;
        (PAD + (p[0] - x0) / (x1 - x0) * (W - 2.0 * PAD), H - PAD - (p[1] - y0) / (y1 - y0) * (H - 2.0 * PAD))
    }

    /// Splits a polyline where it jumps by more than half the plot, which is
    /// how wrapped angle coordinates show up.
    fn runs(&self, s: &Series) -> Vec<Vec<(f64, f64)>> {
        let [[x0, x1], [y0, y1]] = self.bounds;
        let mut pts = s.points.clone();
        if s.closed && !pts.is_empty() {
            pts.push(pts[0]);
        }
        let mut out: Vec<Vec<(f64, f64)>> = vec![];
        let mut prev: Option<[f64; 2]> = None;
        for p in pts {
            let jump = prev.is_some_and(|q| (p[0] - q[0]).abs() > 0.5 * (x1 - x0) || (p[1] - q[1]).abs() > 0.5 * (y1 - y0));
            if prev.is_none() || jump {
                out.push(vec![]);
            }
            out.last_mut().unwrap().push(self.map(p));
            prev = Some(p);
        }
        out
    }

    pub fn svg(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#, W - 2.0 * PAD, H - 2.0 * PAD);
        let [[x0, x1], [y0, y1]] = self.bounds;
        for k in 0..=4 {
            let u = k as f64 / 4.0;
            let (xv, yv) = (x0 + u * (x1 - x0), y0 + u * (y1 - y0));
            let (px, _) = self.map([xv, y0]);
            let (_, py) = self.map([x0, yv]);
            let _ = writeln!(s, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{xv:.2}</text>"#, H - PAD + 16.0);
            let _ = writeln!(s, r#"<text x="{:.1}" y="{py:.1}" text-anchor="end">{yv:.2}</text>"#, PAD - 6.0);
        }
        let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(&self.x_label));
        let _ = writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#, H / 2.0, H / 2.0, escape(&self.y_label));
        for series in &self.series {
            for run in self.runs(series) {
                let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="{}" points="{}"/>"#, series.color, series.width, pts.join(" "));
            }
        }
        for m in &self.markers {
            let (x, y) = self.map(m.at);
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="none" stroke="{}" stroke-width="2"/>"#, m.color);
            if !m.label.is_empty() {
                let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 7.0, y - 7.0, escape(&m.label));
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
