//! Static SVG overlays of the chart square.
//!
//! The square `[0, 2π)²` is drawn with `v` pointing up. Lifted polygons are
//! defined once and placed with `<use>` at the lattice translates that can
//! intersect the square, so each polygon is a single `<polyline>`.

use std::f64::consts::TAU;
use std::fmt::Write;

use crate::chart::ChartPoint;

const SIZE: f64 = 512.0;
const MARGIN: f64 = 16.0;

#[derive(Debug, Clone, Default)]
pub struct Overlay {
    pub title: String,
    pub sample: Vec<ChartPoint>,
    /// Closed polygons in lifted chart coordinates.
    pub polygons: Vec<Vec<[f64; 2]>>,
    pub sep: Vec<ChartPoint>,
    pub source: Option<ChartPoint>,
}

fn sx(u: f64) -> f64 {
    MARGIN + u / TAU * SIZE
}

fn sy(v: f64) -> f64 {
    MARGIN + (1.0 - v / TAU) * SIZE
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Overlay {
    pub fn render(&self) -> String {
        let full = SIZE + 2.0 * MARGIN;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" width="{full}" height="{full}" viewBox="0 0 {full} {full}">"#
        );
        let _ = writeln!(out, "<title>{}</title>", escape(&self.title));
        let _ = writeln!(out, r#"<defs><clipPath id="chart"><rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}"/></clipPath>"#);
        for (k, poly) in self.polygons.iter().enumerate() {
            let mut pts = String::new();
            for x in poly.iter().chain(poly.first()) {
                let _ = write!(pts, "{:.3},{:.3} ", sx(x[0]) - MARGIN, sy(x[1]) - MARGIN - SIZE);
            }
            let _ = writeln!(
                out,
                r##"<polyline id="polygon{k}" points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##,
                pts.trim_end()
            );
        }
        let _ = writeln!(out, "</defs>");
        let _ = writeln!(
            out,
            r##"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="white" stroke="#444"/>"##
        );
        let _ = writeln!(out, r#"<g clip-path="url(#chart)">"#);
        for (k, poly) in self.polygons.iter().enumerate() {
            for (a, b) in translates(poly) {
                let _ = writeln!(
                    out,
                    r##"<use xlink:href="#polygon{k}" href="#polygon{k}" transform="translate({:.3},{:.3})"/>"##,
                    MARGIN + a * SIZE / TAU,
                    MARGIN + SIZE - b * SIZE / TAU
                );
            }
        }
        for q in &self.sep {
            let _ = writeln!(
                out,
                r##"<rect class="sep" x="{:.3}" y="{:.3}" width="2" height="2" fill="#ff7f0e"/>"##,
                sx(q.u()) - 1.0,
                sy(q.v()) - 1.0
            );
        }
        for q in &self.sample {
            let _ = writeln!(
                out,
                r##"<circle cx="{:.3}" cy="{:.3}" r="1.5" fill="#d62728"/>"##,
                sx(q.u()),
                sy(q.v())
            );
        }
        if let Some(p) = self.source {
            let _ = writeln!(
                out,
                r##"<path class="source" d="M{:.3},{:.3}m-5,0h10m-5,-5v10" stroke="black" stroke-width="1.5"/>"##,
                sx(p.u()),
                sy(p.v())
            );
        }
        let _ = writeln!(out, "</g>\n</svg>");
        out
    }
}

/// Lattice offsets (in chart units) under which the polygon meets the square.
fn translates(poly: &[[f64; 2]]) -> Vec<(f64, f64)> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for x in poly {
        for c in 0..2 {
            lo[c] = lo[c].min(x[c]);
            hi[c] = hi[c].max(x[c]);
        }
    }
    let range = |c: usize| {
        let a = (-hi[c] / TAU).floor() as i64;
        let b = ((TAU - lo[c]) / TAU).ceil() as i64;
        a..=b
    };
    let mut out = Vec::new();
    for i in range(0) {
        for j in range(1) {
            let (a, b) = (i as f64 * TAU, j as f64 * TAU);
            if hi[0] + a >= 0.0 && lo[0] + a <= TAU && hi[1] + b >= 0.0 && lo[1] + b <= TAU {
                out.push((a, b));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn square() -> Vec<[f64; 2]> {
        vec![[-PI, -PI], [PI, -PI], [PI, PI], [-PI, PI]]
    }

    #[test]
    fn counts_elements() {
        let o = Overlay {
            title: "flat <test>".into(),
            sample: vec![ChartPoint::new(PI, 0.5), ChartPoint::new(1.0, PI), ChartPoint::new(PI, PI)],
            polygons: vec![square()],
            sep: vec![ChartPoint::new(PI, 2.0)],
            source: Some(ChartPoint::origin()),
        };
        let s = o.render();
        assert_eq!(s.matches("<polyline").count(), 1);
        assert_eq!(s.matches("<circle").count(), 3);
        assert_eq!(s.matches(r#"class="sep""#).count(), 1);
        assert!(s.contains("flat &lt;test&gt;"));
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn square_cell_needs_four_translates() {
        // the cell around the origin covers the four corners of the chart
        assert_eq!(translates(&square()).len(), 4);
        let inner = vec![[1.0, 1.0], [2.0, 1.0], [2.0, 2.0]];
        assert_eq!(translates(&inner), vec![(0.0, 0.0)]);
    }

    #[test]
    fn deterministic() {
        let o = Overlay {
            polygons: vec![square()],
            ..Default::default()
        };
        assert_eq!(o.render(), o.render());
    }
}
