//! Text artifacts for a traced scene: an SVG drawing, the per-hit metrics
//! table, and a JSON summary. The CLI writes these to files and the
//! service returns the same strings.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point2, Shape};
use crate::metrics::DesignMetrics;
use crate::scene::{SensorScene, SurfaceKind, Terminal, TraceResult};

/// Drawing units per millimeter in emitted SVG.
pub const SVG_SCALE: f64 = 4.0;
const SVG_MARGIN_MM: f64 = 5.0;
/// Length (mm) drawn past the last vertex of rays that do not land on the skin.
const STUB_MM: f64 = 10.0;

pub const METRICS_HEADER: &str = "pixel_index\tarc_position_mm\timaging_angle_deg\tpx_per_mm";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub pixel_count: usize,
    pub skin_hits: usize,
    pub coverage: f64,
    pub min_imaging_angle_deg: f64,
    pub skin_length_mm: f64,
    /// Mean px/mm over the first and last 10% of the skin, when defined.
    pub bottom_px_per_mm: Option<f64>,
    pub tip_px_per_mm: Option<f64>,
}

/// Everything `trace` produces for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceReport {
    pub traces: Vec<TraceResult>,
    pub metrics: DesignMetrics,
    pub summary: TraceSummary,
}

impl TraceReport {
    pub fn new(scene: &SensorScene, traces: Vec<TraceResult>) -> Self {
        let metrics = DesignMetrics::compute(&traces, scene.skin(), 1.0);
        let ends = metrics.end_resolutions(0.1);
        let summary = TraceSummary {
            pixel_count: traces.len(),
            skin_hits: metrics.skin_hits,
            coverage: metrics.coverage,
            min_imaging_angle_deg: metrics.min_imaging_angle,
            skin_length_mm: metrics.skin_length,
            bottom_px_per_mm: ends.map(|e| e.0),
            tip_px_per_mm: ends.map(|e| e.1),
        };
        Self { traces, metrics, summary }
    }

    /// One row per skin hit in pixel order; `nan` where px/mm is undefined.
    pub fn metrics_tsv(&self) -> String {
        let px: HashMap<usize, f64> =
            self.metrics.resolution_profile.iter().map(|p| (p.pixel_index, p.value)).collect();
        let mut out = format!("{METRICS_HEADER}\n");
        for a in &self.metrics.imaging_angle_profile {
            let r = px.get(&a.pixel_index).map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"));
            let _ = writeln!(out, "{}\t{:.6}\t{:.6}\t{r}", a.pixel_index, a.arc_mm, a.value);
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        s.push('\n');
        s
    }

    /// Ray polylines (mm), one per pixel, as drawn in the SVG.
    pub fn ray_polylines(&self) -> Vec<Vec<Point2>> {
        self.traces.iter().map(ray_points).collect()
    }

    pub fn svg(&self, scene: &SensorScene) -> String {
        render_svg(scene, &self.traces)
    }
}

fn ray_points(t: &TraceResult) -> Vec<Point2> {
    let mut pts: Vec<Point2> = t.path.iter().map(|v| v.point).collect();
    if !matches!(t.terminal, Terminal::SkinHit { .. }) {
        let last = t.path.last().expect("path is never empty");
        pts.push(last.point + last.direction * STUB_MM);
    }
    pts
}

/// CSS class of a ray in the SVG, also used as its terminal label.
pub fn terminal_class(t: &Terminal) -> &'static str {
    match t {
        Terminal::SkinHit { .. } => "skin-hit",
        Terminal::Escaped => "escaped",
        Terminal::Absorbed { .. } => "absorbed",
        Terminal::Tir => "tir",
        Terminal::MaxBounces => "max-bounces",
    }
}

fn render_svg(scene: &SensorScene, traces: &[TraceResult]) -> String {
    let curves: Vec<(String, &'static str, Vec<Point2>)> = scene
        .surfaces()
        .iter()
        .map(|s| {
            let class = match s.kind {
                SurfaceKind::Reflective => "surface mirror",
                SurfaceKind::Refractive { .. } => "surface interface",
                SurfaceKind::Absorbing => "surface absorber",
            };
            (s.name.clone(), class, s.shape.sample(200))
        })
        .chain(std::iter::once(("skin".to_string(), "skin", Shape::Spline(scene.skin().clone()).sample(400))))
        .collect();
    let rays: Vec<Vec<Point2>> = traces.iter().map(ray_points).collect();

    let mut lo = scene.camera().pinhole;
    let mut hi = lo;
    for p in curves.iter().flat_map(|c| c.2.iter()) {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    lo = lo - Point2::new(SVG_MARGIN_MM, SVG_MARGIN_MM);
    hi = hi + Point2::new(SVG_MARGIN_MM, SVG_MARGIN_MM);
    let map = |p: &Point2| ((p.x - lo.x) * SVG_SCALE, (hi.y - p.y) * SVG_SCALE);
    let points = |pts: &[Point2]| {
        pts.iter()
            .map(|p| {
                let (x, y) = map(p);
                format!("{x:.3},{y:.3}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    let (w, h) = ((hi.x - lo.x) * SVG_SCALE, (hi.y - lo.y) * SVG_SCALE);

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.3}" height="{h:.3}" viewBox="0 0 {w:.3} {h:.3}" data-mm-scale="{SVG_SCALE}">"#
    );
    let _ = writeln!(
        out,
        "<desc>Units: {SVG_SCALE} drawing units per millimeter. Origin offset ({:.3}, {:.3}) mm, y up.</desc>",
        lo.x, hi.y
    );
    let _ = writeln!(out, "<style>.ray{{fill:none;stroke-width:0.3}} .skin-hit{{stroke:#d62728}} .escaped,.absorbed,.tir,.max-bounces{{stroke:#999999}} .surface{{fill:none;stroke:#17becf;stroke-width:1.2}} .skin{{fill:none;stroke:#000000;stroke-width:1.6}}</style>");
    let _ = writeln!(out, r#"<g id="rays">"#);
    for (t, pts) in traces.iter().zip(&rays) {
        let _ = writeln!(
            out,
            r#"<polyline class="ray {}" data-pixel="{}" points="{}"/>"#,
            terminal_class(&t.terminal),
            t.pixel_index,
            points(pts)
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<g id="surfaces">"#);
    for (name, class, pts) in &curves {
        let _ =
            writeln!(out, r#"<polyline class="{class}" data-name="{}" points="{}"/>"#, xml_escape(name), points(pts));
    }
    let (cx, cy) = map(&scene.camera().pinhole);
    let _ = writeln!(out, r#"<circle class="pinhole" cx="{cx:.3}" cy="{cy:.3}" r="2"/>"#);
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
