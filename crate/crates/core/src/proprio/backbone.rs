//! Small-deflection backbone model and the synthetic LED-strip renderer.

use serde::{Deserialize, Serialize};

use super::ProprioError;
use crate::imaging::ChannelImage;

/// Euler–Bernoulli backbone with two LED strips at lateral offsets ±h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneModel {
    /// mm
    pub length: f64,
    /// Bending stiffness, N·mm².
    pub ei: f64,
    /// Torsional stiffness, N·mm² per radian.
    pub gj: f64,
    /// Lateral offset of each strip from the axis, mm.
    pub half_spacing: f64,
    /// LED stations per strip.
    pub stations: usize,
    /// Image pixels per mm of displacement.
    pub k_px: f64,
    /// Largest |torque| (N·mm) inside the small-deflection regime.
    pub max_bending: f64,
    pub max_twisting: f64,
}

impl Default for BackboneModel {
    fn default() -> Self {
        Self {
            length: 60.0,
            ei: 81_000.0,
            gj: 20_000.0,
            half_spacing: 8.0,
            stations: 18,
            k_px: 1.25,
            max_bending: 200.0,
            max_twisting: 200.0,
        }
    }
}

/// Per-station image displacements (dx, dy) in pixels for both strips.
#[derive(Debug, Clone, PartialEq)]
pub struct LedDisplacements {
    pub stations: Vec<f64>,
    pub strip_a: Vec<(f64, f64)>,
    pub strip_b: Vec<(f64, f64)>,
}

impl LedDisplacements {
    pub fn zero(n: usize) -> Self {
        Self { stations: vec![0.0; n], strip_a: vec![(0.0, 0.0); n], strip_b: vec![(0.0, 0.0); n] }
    }

    /// Every station of both strips moved by the same offset.
    pub fn uniform(n: usize, dx: f64, dy: f64) -> Self {
        Self { stations: vec![0.0; n], strip_a: vec![(dx, dy); n], strip_b: vec![(dx, dy); n] }
    }
}

impl BackboneModel {
    pub fn validate(&self) -> Result<(), ProprioError> {
        let positive =
            [self.length, self.ei, self.gj, self.half_spacing, self.k_px, self.max_bending, self.max_twisting];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.stations == 0 {
            return Err(ProprioError::InvalidModel("all parameters must be positive and finite".into()));
        }
        Ok(())
    }

    /// Station arc positions s_j = L·(j+1)/m, j = 0..m.
    pub fn station_positions(&self) -> Vec<f64> {
        (0..self.stations).map(|j| self.length * (j + 1) as f64 / self.stations as f64).collect()
    }

    /// Vertical δ(s) = M·s²/(2·EI)·k_px on both strips; lateral
    /// λ(s) = (T·s/GJ)·h·k_px, +λ on strip A and −λ on strip B.
    pub fn deflect_leds(&self, bending: f64, twisting: f64) -> Result<LedDisplacements, ProprioError> {
        self.validate()?;
        if !(bending.abs() <= self.max_bending) {
            return Err(ProprioError::OutOfRange { name: "bending", value: bending, limit: self.max_bending });
        }
        if !(twisting.abs() <= self.max_twisting) {
            return Err(ProprioError::OutOfRange { name: "twisting", value: twisting, limit: self.max_twisting });
        }
        let stations = self.station_positions();
        let mut strip_a = Vec::with_capacity(stations.len());
        let mut strip_b = Vec::with_capacity(stations.len());
        for &s in &stations {
            let delta = bending * s * s / (2.0 * self.ei) * self.k_px;
            let lambda = twisting * s / self.gj * self.half_spacing * self.k_px;
            strip_a.push((lambda, delta));
            strip_b.push((-lambda, delta));
        }
        Ok(LedDisplacements { stations, strip_a, strip_b })
    }
}

/// Layout of the rendered LED-region image. Strip A goes to channel 0
/// (red LEDs), strip B to channel 1 (green LEDs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    /// Column of the first station at rest.
    pub first_column: f64,
    /// Column spacing between stations at rest.
    pub pitch: f64,
    /// Row of both strips at rest.
    pub row: f64,
    /// Gaussian spot radius, px.
    pub spot_sigma: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { width: 52, height: 24, first_column: 8.0, pitch: 2.0, row: 12.0, spot_sigma: 1.0 }
    }
}

/// Draw each strip as a chain of equal-weight Gaussian spots, one per
/// station, at its displaced position.
pub fn render_synthetic_frame(cfg: &RenderConfig, d: &LedDisplacements) -> ChannelImage {
    let mut img = ChannelImage::zeros(cfg.width, cfg.height, 2);
    let inv = 1.0 / (2.0 * cfg.spot_sigma * cfg.spot_sigma);
    let (w, h) = (cfg.width, cfg.height);
    let mut gx = vec![0.0; w];
    let mut gy = vec![0.0; h];
    for (c, strip) in [&d.strip_a, &d.strip_b].into_iter().enumerate() {
        let plane = img.plane_mut(c);
        for (j, &(dx, dy)) in strip.iter().enumerate() {
            let u = cfg.first_column + cfg.pitch * j as f64 + dx;
            let v = cfg.row + dy;
            for (x, g) in gx.iter_mut().enumerate() {
                *g = (-(x as f64 - u).powi(2) * inv).exp();
            }
            for (y, g) in gy.iter_mut().enumerate() {
                *g = (-(y as f64 - v).powi(2) * inv).exp();
            }
            for y in 0..h {
                let row = &mut plane[y * w..(y + 1) * w];
                for x in 0..w {
                    row[x] += gy[y] * gx[x];
                }
            }
        }
    }
    img
}

/// Recover (bending, twisting) from a rendered frame by inverting the
/// mean station displacement measured from intensity centroids relative
/// to the zero-torque `reference`.
///
/// Centroids are taken inside a window around the rest strip that is
/// wide enough for the model's full torque range.
pub fn readback_torques(
    model: &BackboneModel,
    cfg: &RenderConfig,
    frame: &ChannelImage,
    reference: &ChannelImage,
) -> (f64, f64) {
    let stations = model.station_positions();
    let m = stations.len() as f64;
    let mean_s = stations.iter().sum::<f64>() / m;
    let mean_s2 = stations.iter().map(|s| s * s).sum::<f64>() / m;
    let max_dy = model.max_bending * model.length.powi(2) / (2.0 * model.ei) * model.k_px;
    let max_dx = model.max_twisting * model.length / model.gj * model.half_spacing * model.k_px;
    let pad = 3.0 * cfg.spot_sigma;
    let last = cfg.first_column + cfg.pitch * (stations.len() - 1) as f64;
    let window = (
        (cfg.first_column - max_dx - pad).floor().max(0.0) as usize,
        ((last + max_dx + pad).ceil() as usize).min(cfg.width - 1),
        (cfg.row - max_dy - pad).floor().max(0.0) as usize,
        ((cfg.row + max_dy + pad).ceil() as usize).min(cfg.height - 1),
    );
    let centroid = |img: &ChannelImage, c: usize| {
        let (x0, x1, y0, y1) = window;
        let (mut s, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let v = img.at(c, x, y);
                s += v;
                sx += v * x as f64;
                sy += v * y as f64;
            }
        }
        (sx / s, sy / s)
    };
    let shift = |c: usize| {
        let (fx, fy) = centroid(frame, c);
        let (rx, ry) = centroid(reference, c);
        (fx - rx, fy - ry)
    };
    let (ax, ay) = shift(0);
    let (bx, by) = shift(1);
    let delta = 0.5 * (ay + by);
    let lambda = 0.5 * (ax - bx);
    let bending = delta * 2.0 * model.ei / (model.k_px * mean_s2);
    let twisting = lambda * model.gj / (model.k_px * model.half_spacing * mean_s);
    (bending, twisting)
}
