//! Design scores for a traced scene: skin coverage, imaging angles, and
//! spatial resolution along the skin.
//!
//! Positions along the skin are arc lengths (mm) measured from the skin's
//! first control point, which by convention sits at the finger base.

use serde::{Deserialize, Serialize};

use crate::geometry::BSplineCurve;
use crate::scene::TraceResult;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("resolution needs at least 2 skin hits, got {0}")]
    TooFewHits(usize),
}

/// One skin hit with its arc position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkinSample {
    pub pixel_index: usize,
    pub t_skin: f64,
    pub arc_mm: f64,
    pub imaging_angle_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub pixel_index: usize,
    pub arc_mm: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMetrics {
    pub coverage: f64,
    pub imaging_angle_profile: Vec<ProfilePoint>,
    pub resolution_profile: Vec<ProfilePoint>,
    pub min_imaging_angle: f64,
    pub skin_length: f64,
    pub skin_hits: usize,
}

/// Skin hits in pixel order with arc positions.
///
/// Arc lengths are integrated incrementally between hits sorted by
/// parameter, so the cost is one pass over the skin.
pub fn skin_samples(traces: &[TraceResult], skin: &BSplineCurve) -> Vec<SkinSample> {
    let mut samples: Vec<SkinSample> = traces
        .iter()
        .filter_map(|tr| {
            tr.skin_hit().map(|(t, angle)| SkinSample {
                pixel_index: tr.pixel_index,
                t_skin: t,
                arc_mm: 0.0,
                imaging_angle_deg: angle.to_degrees(),
            })
        })
        .collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].t_skin.total_cmp(&samples[b].t_skin));
    let (lo, _) = skin.domain();
    let (mut prev_t, mut acc) = (lo, 0.0);
    for i in order {
        let t = samples[i].t_skin;
        acc += skin.arc_length(prev_t, t).expect("hit parameters lie in the skin domain");
        prev_t = t;
        samples[i].arc_mm = acc;
    }
    samples
}

/// Fraction of skin arc length swept by the ray fan between neighbouring
/// pixels that both hit the skin.
///
/// A pixel pair whose arc separation exceeds 3× the smaller separation of
/// its neighbouring pairs is a fold jump, not a sweep, and covers nothing.
/// Refining the fan only subdivides sweeps, so coverage does not drop when
/// pixels are added between existing ones.
pub fn coverage_from_samples(samples: &[SkinSample], skin_length: f64) -> f64 {
    if samples.len() < 2 || skin_length <= 0.0 {
        return 0.0;
    }
    let pairs: Vec<Option<(f64, f64)>> = samples
        .windows(2)
        .map(|w| (w[0].pixel_index + 1 == w[1].pixel_index).then(|| (w[0].arc_mm, w[1].arc_mm)))
        .collect();
    let gap = |k: usize| pairs.get(k).copied().flatten().map(|(a, b)| (b - a).abs());
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for (k, pair) in pairs.iter().enumerate() {
        let Some((a, b)) = *pair else { continue };
        let g = (b - a).abs();
        let prev = k.checked_sub(1).and_then(gap);
        let next = gap(k + 1);
        let local = match (prev, next) {
            (Some(p), Some(n)) => Some(p.min(n)),
            (p, n) => p.or(n),
        };
        if local.is_none_or(|l| g <= 3.0 * l) {
            intervals.push((a.min(b), a.max(b)));
        }
    }
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut covered = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for (lo, hi) in intervals {
        match current {
            Some((clo, chi)) if lo <= chi => current = Some((clo, chi.max(hi))),
            _ => {
                if let Some((clo, chi)) = current {
                    covered += chi - clo;
                }
                current = Some((lo, hi));
            }
        }
    }
    if let Some((clo, chi)) = current {
        covered += chi - clo;
    }
    (covered / skin_length).clamp(0.0, 1.0)
}

pub fn coverage(traces: &[TraceResult], skin: &BSplineCurve) -> f64 {
    coverage_from_samples(&skin_samples(traces, skin), skin.total_length())
}

/// Imaging angle (degrees, against the skin tangent) at every skin hit.
pub fn imaging_angles(traces: &[TraceResult], skin: &BSplineCurve) -> Vec<ProfilePoint> {
    angles_from_samples(&skin_samples(traces, skin))
}

fn angles_from_samples(samples: &[SkinSample]) -> Vec<ProfilePoint> {
    samples
        .iter()
        .map(|s| ProfilePoint { pixel_index: s.pixel_index, arc_mm: s.arc_mm, value: s.imaging_angle_deg })
        .collect()
}

/// Pixels per millimetre of skin at each hit that has a pixel-order
/// neighbour on the skin.
///
/// Central differences are used unless the two one-sided spacings differ
/// by more than 3×, which marks a fold discontinuity; then the shorter
/// side is used alone.
pub fn resolution_profile(
    traces: &[TraceResult],
    skin: &BSplineCurve,
    pixels_per_ray: f64,
) -> Result<Vec<ProfilePoint>, MetricsError> {
    resolution_from_samples(&skin_samples(traces, skin), pixels_per_ray)
}

fn resolution_from_samples(samples: &[SkinSample], pixels_per_ray: f64) -> Result<Vec<ProfilePoint>, MetricsError> {
    if samples.len() < 2 {
        return Err(MetricsError::TooFewHits(samples.len()));
    }
    let mut out = Vec::with_capacity(samples.len());
    for k in 0..samples.len() {
        let s = samples[k];
        let prev = (k > 0 && samples[k - 1].pixel_index + 1 == s.pixel_index)
            .then(|| (s.arc_mm - samples[k - 1].arc_mm).abs());
        let next = (k + 1 < samples.len() && samples[k + 1].pixel_index == s.pixel_index + 1)
            .then(|| (samples[k + 1].arc_mm - s.arc_mm).abs());
        let (pixels, mm) = match (prev, next) {
            (Some(a), Some(b)) if a.max(b) <= 3.0 * a.min(b) => (2.0, a + b),
            (Some(a), Some(b)) => (1.0, a.min(b)),
            (Some(a), None) | (None, Some(a)) => (1.0, a),
            (None, None) => continue,
        };
        if mm > 0.0 {
            out.push(ProfilePoint {
                pixel_index: s.pixel_index,
                arc_mm: s.arc_mm,
                value: pixels * pixels_per_ray / mm,
            });
        }
    }
    Ok(out)
}

impl DesignMetrics {
    pub fn compute(traces: &[TraceResult], skin: &BSplineCurve, pixels_per_ray: f64) -> Self {
        let samples = skin_samples(traces, skin);
        let skin_length = skin.total_length();
        let imaging_angle_profile = angles_from_samples(&samples);
        let min_imaging_angle = imaging_angle_profile.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
        Self {
            coverage: coverage_from_samples(&samples, skin_length),
            resolution_profile: resolution_from_samples(&samples, pixels_per_ray).unwrap_or_default(),
            min_imaging_angle: if min_imaging_angle.is_finite() { min_imaging_angle } else { 0.0 },
            imaging_angle_profile,
            skin_length,
            skin_hits: samples.len(),
        }
    }

    /// Mean px/mm over the first and last `fraction` of the skin length
    /// (finger base, fingertip).
    pub fn end_resolutions(&self, fraction: f64) -> Option<(f64, f64)> {
        let mean = |pred: &dyn Fn(f64) -> bool| {
            let v: Vec<f64> = self.resolution_profile.iter().filter(|p| pred(p.arc_mm)).map(|p| p.value).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let cut = fraction * self.skin_length;
        let bottom = mean(&|a| a <= cut)?;
        let tip = mean(&|a| a >= self.skin_length - cut)?;
        Some((bottom, tip))
    }
}
