//! Derivative-free shape optimization of the curved mirror and skin.
//!
//! A [`DesignVector`] flattens the control points of every reflective
//! spline surface plus the skin into one coordinate list. [`score`] decodes
//! it against a base scene, traces, and combines the metrics into a single
//! number to maximize; [`optimize`] drives a Nelder–Mead simplex over it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{
    GeometryConfig, SceneConfig, SurfaceKindConfig, FINGER_LENGTH_MM, FINGER_THICKNESS_MM, FINGER_WIDTH_MM,
};
use crate::metrics::DesignMetrics;

/// Score given to designs that fail to decode or trace.
pub const UNDECODABLE_SCORE: f64 = -1.0e6;

const SAMPLES_PER_CURVE: usize = 256;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DesignError {
    #[error("base scene has no reflective spline surface to optimize")]
    NoMirror,
    #[error("design layout does not match the base scene")]
    LayoutMismatch,
    #[error("fixed mask length {mask} does not match {coords} coordinates")]
    MaskLength { mask: usize, coords: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DesignTarget {
    /// Index into `SceneConfig::surfaces`.
    Surface(usize),
    Skin,
}

/// Movable control-point coordinates in (x, y) pairs, block by block.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignVector {
    coords: Vec<f64>,
    fixed: Vec<bool>,
    layout: Vec<(DesignTarget, usize)>,
}

impl DesignVector {
    /// Mirrors first (in surface order), then the skin. The default mask
    /// fixes both skin endpoints.
    pub fn from_config(config: &SceneConfig) -> Result<Self, DesignError> {
        let mut coords = Vec::new();
        let mut layout = Vec::new();
        for (i, s) in config.surfaces.iter().enumerate() {
            if let (SurfaceKindConfig::Reflective, GeometryConfig::Spline(sp)) = (s.kind, &s.geometry) {
                layout.push((DesignTarget::Surface(i), sp.control_points.len()));
                coords.extend(sp.control_points.iter().flatten());
            }
        }
        if layout.is_empty() {
            return Err(DesignError::NoMirror);
        }
        let n_skin = config.skin.control_points.len();
        layout.push((DesignTarget::Skin, n_skin));
        coords.extend(config.skin.control_points.iter().flatten());

        let mut fixed = vec![false; coords.len()];
        let skin_start = coords.len() - 2 * n_skin;
        for k in [skin_start, skin_start + 1, coords.len() - 2, coords.len() - 1] {
            fixed[k] = true;
        }
        Ok(Self { coords, fixed, layout })
    }

    pub fn with_mask(mut self, fixed: Vec<bool>) -> Result<Self, DesignError> {
        if fixed.len() != self.coords.len() {
            return Err(DesignError::MaskLength { mask: fixed.len(), coords: self.coords.len() });
        }
        self.fixed = fixed;
        Ok(self)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn fixed_mask(&self) -> &[bool] {
        &self.fixed
    }

    pub fn layout(&self) -> &[(DesignTarget, usize)] {
        &self.layout
    }

    pub fn free_count(&self) -> usize {
        self.fixed.iter().filter(|&&f| !f).count()
    }

    pub fn free_coords(&self) -> Vec<f64> {
        self.coords.iter().zip(&self.fixed).filter(|(_, &f)| !f).map(|(&c, _)| c).collect()
    }

    /// Copy with the free coordinates replaced, in order.
    pub fn with_free(&self, free: &[f64]) -> Self {
        debug_assert_eq!(free.len(), self.free_count());
        let mut out = self.clone();
        let mut it = free.iter();
        for (c, &f) in out.coords.iter_mut().zip(&self.fixed) {
            if !f {
                *c = *it.next().expect("free length checked");
            }
        }
        out
    }

    /// Write the control points back into a copy of `base`.
    pub fn apply(&self, base: &SceneConfig) -> Result<SceneConfig, DesignError> {
        let mut cfg = base.clone();
        let mut chunks = self.coords.chunks_exact(2).map(|c| [c[0], c[1]]);
        for &(target, n) in &self.layout {
            let points = match target {
                DesignTarget::Surface(i) => match cfg.surfaces.get_mut(i).map(|s| &mut s.geometry) {
                    Some(GeometryConfig::Spline(sp)) => &mut sp.control_points,
                    _ => return Err(DesignError::LayoutMismatch),
                },
                DesignTarget::Skin => &mut cfg.skin.control_points,
            };
            if points.len() != n {
                return Err(DesignError::LayoutMismatch);
            }
            for p in points.iter_mut() {
                *p = chunks.next().ok_or(DesignError::LayoutMismatch)?;
            }
        }
        Ok(cfg)
    }
}

/// Weights and the finger envelope for [`score`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignObjective {
    pub w_angle: f64,
    pub w_coverage: f64,
    pub w_envelope: f64,
    pub max_length: f64,
    /// Carried for reporting; the lateral width has no extent in the plane.
    pub max_width: f64,
    pub max_thickness: f64,
    /// Trace at this many pixels instead of the scene's own count.
    pub pixel_count: Option<usize>,
}

impl Default for DesignObjective {
    fn default() -> Self {
        Self {
            w_angle: 1.0,
            w_coverage: 100.0,
            w_envelope: 100.0,
            max_length: FINGER_LENGTH_MM,
            max_width: FINGER_WIDTH_MM,
            max_thickness: FINGER_THICKNESS_MM,
            pixel_count: None,
        }
    }
}

impl DesignObjective {
    /// Combine already-computed terms.
    pub fn combine(&self, min_angle_deg: f64, coverage: f64, envelope_violation: f64) -> f64 {
        self.w_angle * min_angle_deg
            - self.w_coverage * (1.0 - coverage).powi(2)
            - self.w_envelope * envelope_violation.powi(2)
    }

    /// Millimeters by which the scene's bounding box exceeds the
    /// length (x) and thickness (y) limits, summed.
    pub fn envelope_violation(&self, config: &SceneConfig) -> f64 {
        let Ok(scene) = config.build() else {
            return f64::INFINITY;
        };
        let mut lo = scene.camera().pinhole;
        let mut hi = lo;
        let shapes = scene.surfaces().iter().map(|s| s.shape.sample(SAMPLES_PER_CURVE));
        let skin = crate::geometry::Shape::Spline(scene.skin().clone()).sample(SAMPLES_PER_CURVE);
        for p in shapes.flatten().chain(skin) {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (hi.x - lo.x - self.max_length).max(0.0) + (hi.y - lo.y - self.max_thickness).max(0.0)
    }
}

/// Everything learned from one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub score: f64,
    pub coverage: Option<f64>,
    pub min_imaging_angle: Option<f64>,
    pub envelope_violation: Option<f64>,
}

impl Evaluation {
    fn undecodable() -> Self {
        Self { score: UNDECODABLE_SCORE, coverage: None, min_imaging_angle: None, envelope_violation: None }
    }
}

pub fn evaluate(design: &DesignVector, base: &SceneConfig, objective: &DesignObjective) -> Evaluation {
    let Ok(mut cfg) = design.apply(base) else {
        return Evaluation::undecodable();
    };
    if let Some(n) = objective.pixel_count {
        cfg.camera.pixel_count = n;
    }
    let Ok(scene) = cfg.build() else {
        return Evaluation::undecodable();
    };
    let Ok(traces) = scene.trace_all() else {
        return Evaluation::undecodable();
    };
    let m = DesignMetrics::compute(&traces, scene.skin(), 1.0);
    let violation = objective.envelope_violation(&cfg);
    let score = objective.combine(m.min_imaging_angle, m.coverage, violation);
    if !score.is_finite() {
        return Evaluation::undecodable();
    }
    Evaluation {
        score,
        coverage: Some(m.coverage),
        min_imaging_angle: Some(m.min_imaging_angle),
        envelope_violation: Some(violation),
    }
}

pub fn score(design: &DesignVector, base: &SceneConfig, objective: &DesignObjective) -> f64 {
    evaluate(design, base, objective).score
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryRow {
    pub evaluation: usize,
    #[serde(flatten)]
    pub result: Evaluation,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub best: DesignVector,
    pub best_score: f64,
    pub history: Vec<HistoryRow>,
    pub restarted: bool,
}

impl OptimizeResult {
    /// Tab-separated history with a header line.
    pub fn history_tsv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"));
        let mut out = String::from("evaluation\tscore\tbest_so_far\tcoverage\tmin_imaging_angle_deg\n");
        for r in &self.history {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{}\t{}\n",
                r.evaluation,
                r.result.score,
                r.best_so_far,
                opt(r.result.coverage),
                opt(r.result.min_imaging_angle)
            ));
        }
        out
    }
}

/// Maximize [`score`] starting from `initial`.
///
/// The initial simplex edge is 5% of the envelope diagonal in the sagittal
/// plane. `seed` drives the jitter of the single restart.
pub fn optimize(
    initial: &DesignVector,
    base: &SceneConfig,
    objective: &DesignObjective,
    budget: usize,
    seed: u64,
) -> OptimizeResult {
    optimize_observed(initial, base, objective, budget, seed, |_| {})
}

/// [`optimize`], calling `observe` after every evaluation.
pub fn optimize_observed(
    initial: &DesignVector,
    base: &SceneConfig,
    objective: &DesignObjective,
    budget: usize,
    seed: u64,
    mut observe: impl FnMut(&HistoryRow),
) -> OptimizeResult {
    let step = 0.05 * objective.max_length.hypot(objective.max_thickness);
    let mut history: Vec<HistoryRow> = Vec::new();
    let nm = nelder_mead(
        |free| {
            let r = evaluate(&initial.with_free(free), base, objective);
            let best_so_far = history.last().map_or(r.score, |h| h.best_so_far.max(r.score));
            let row = HistoryRow { evaluation: history.len() + 1, result: r, best_so_far };
            observe(&row);
            history.push(row);
            r.score
        },
        &initial.free_coords(),
        step,
        budget,
        seed,
    );
    OptimizeResult { best: initial.with_free(&nm.best), best_score: nm.best_score, history, restarted: nm.restarted }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub best: Vec<f64>,
    pub best_score: f64,
    pub evaluations: usize,
    pub restarted: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Budget-bounded Nelder–Mead maximizer.
///
/// When the simplex collapses before the budget runs out it is rebuilt
/// once around the best point with randomly scaled edges.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    budget: usize,
    seed: u64,
) -> NelderMeadResult {
    let n = x0.len();
    let mut used = 0usize;
    let mut best = (x0.to_vec(), f64::NEG_INFINITY);
    // Minimize g = -f; None once the budget is spent.
    let mut eval = |x: &[f64]| -> Option<f64> {
        if used >= budget {
            return None;
        }
        used += 1;
        let s = f(x);
        let s = if s.is_nan() { f64::NEG_INFINITY } else { s };
        if s > best.1 {
            best = (x.to_vec(), s);
        }
        Some(-s)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut restarted = false;
    let mut center = x0.to_vec();
    let mut edges = vec![step; n];

    'outer: loop {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let mut x = center.clone();
            if i > 0 {
                x[i - 1] += edges[i - 1];
            }
            let Some(g) = eval(&x) else { break 'outer };
            simplex.push((x, g));
        }
        if n == 0 {
            break;
        }

        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if converged(&simplex, step) {
                if restarted {
                    break 'outer;
                }
                restarted = true;
                center = simplex[0].0.clone();
                edges = (0..n).map(|_| step * rng.random_range(0.5..1.5)).collect();
                continue 'outer;
            }
            let worst = simplex[n].clone();
            let centroid: Vec<f64> =
                (0..n).map(|k| simplex[..n].iter().map(|v| v.0[k]).sum::<f64>() / n as f64).collect();
            let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (worst.0[k] - centroid[k])).collect() };

            let xr = along(-REFLECT);
            let Some(gr) = eval(&xr) else { break 'outer };
            if gr < simplex[0].1 {
                let xe = along(-EXPAND);
                let Some(ge) = eval(&xe) else { break 'outer };
                simplex[n] = if ge < gr { (xe, ge) } else { (xr, gr) };
                continue;
            }
            if gr < simplex[n - 1].1 {
                simplex[n] = (xr, gr);
                continue;
            }
            let (xc, bound) = if gr < worst.1 { (along(-CONTRACT), gr) } else { (along(CONTRACT), worst.1) };
            let Some(gc) = eval(&xc) else { break 'outer };
            if gc <= bound {
                simplex[n] = (xc, gc);
                continue;
            }
            let anchor = simplex[0].0.clone();
            for v in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = (0..n).map(|k| anchor[k] + SHRINK * (v.0[k] - anchor[k])).collect();
                let Some(g) = eval(&x) else { break 'outer };
                *v = (x, g);
            }
        }
    }
    NelderMeadResult { best: best.0, best_score: best.1, evaluations: used, restarted }
}

fn converged(simplex: &[(Vec<f64>, f64)], step: f64) -> bool {
    let (lo, hi) = (simplex[0].1, simplex[simplex.len() - 1].1);
    let spread = if lo.is_finite() && hi.is_finite() { hi - lo } else { f64::INFINITY };
    let diameter = simplex[1..]
        .iter()
        .map(|v| v.0.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    spread <= 1e-12 * (1.0 + lo.abs()) && diameter <= 1e-9 * step.max(1.0)
}
