//! Scene configuration: a strict TOML dialect with a canonical emitter.
//!
//! Unknown keys are rejected. Optional fields and their defaults:
//!
//! | field                | default                     |
//! |----------------------|-----------------------------|
//! | `units`              | `"mm"` (the only accepted value) |
//! | `camera.fov_deg`     | 120                         |
//! | `camera.pixel_count` | 1080                        |
//! | `gel.refractive_index` | 1.41                      |
//! | `gel.dome_center`    | the camera pinhole          |
//! | `gel.dome_radius`    | 3.5                         |
//! | `envelope`           | 83.5 × 22.7                 |
//! | spline `knots`       | clamped uniform on [0, 1]   |
//!
//! The canonical form written by [`SceneConfig::to_canonical_string`]
//! spells every field out except spline knots that were omitted.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::{BSplineCurve, CircularArc, Dir2, LineSegment, Point2, Shape};
use crate::scene::{Camera, Envelope, OpticalSurface, SensorScene, SurfaceKind};

pub const DEFAULT_FOV_DEG: f64 = 120.0;
pub const DEFAULT_PIXEL_COUNT: usize = 1080;
pub const DEFAULT_GEL_INDEX: f64 = 1.41;
/// Half of the 7 mm ball used to mould the air-gel dome.
pub const DEFAULT_DOME_RADIUS: f64 = 3.5;
pub const FINGER_LENGTH_MM: f64 = 83.5;
pub const FINGER_WIDTH_MM: f64 = 22.7;
pub const FINGER_THICKNESS_MM: f64 = 18.8;

/// Reference design shipped with the crate.
pub const REFERENCE_SCENE: &str = include_str!("../data/reference_scene.toml");

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigErrorKind {
    Syntax,
    UnknownKey,
    Invalid,
}

/// Parse or validation failure, located in the source text when possible.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{}: {message}", location(*line, *column), field.as_deref().map(|f| format!(" [{f}]")).unwrap_or_default())]
pub struct ConfigError {
    pub kind: ConfigErrorKind,
    /// Dotted path of the offending field, e.g. `camera.fov_deg`.
    pub field: Option<String>,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

fn location(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!("line {l}, column {c}"),
        (Some(l), None) => format!("line {l}"),
        _ => "scene config".to_string(),
    }
}

impl ConfigError {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind: ConfigErrorKind::Invalid,
            field: Some(field.into()),
            line: None,
            column: None,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default = "default_units")]
    pub units: String,
    pub camera: CameraConfig,
    #[serde(default)]
    pub gel: GelConfig,
    #[serde(default)]
    pub surfaces: Vec<SurfaceConfig>,
    pub skin: SplineConfig,
    #[serde(default)]
    pub envelope: EnvelopeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub pinhole: [f64; 2],
    pub boresight: [f64; 2],
    #[serde(default = "default_fov")]
    pub fov_deg: f64,
    #[serde(default = "default_pixel_count")]
    pub pixel_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GelConfig {
    #[serde(default = "default_gel_index")]
    pub refractive_index: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dome_center: Option<[f64; 2]>,
    #[serde(default = "default_dome_radius")]
    pub dome_radius: f64,
}

impl Default for GelConfig {
    fn default() -> Self {
        Self { refractive_index: DEFAULT_GEL_INDEX, dome_center: None, dome_radius: DEFAULT_DOME_RADIUS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKindConfig {
    Reflective,
    Refractive,
    Absorbing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub name: String,
    pub kind: SurfaceKindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_inside: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_outside: Option<f64>,
    pub geometry: GeometryConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryConfig {
    Spline(SplineConfig),
    Arc { center: [f64; 2], radius: f64, start_deg: f64, span_deg: f64 },
    Segment { from: [f64; 2], to: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplineConfig {
    pub degree: usize,
    pub control_points: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub length: f64,
    pub width: f64,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self { length: FINGER_LENGTH_MM, width: FINGER_WIDTH_MM }
    }
}

fn default_units() -> String {
    "mm".into()
}
fn default_fov() -> f64 {
    DEFAULT_FOV_DEG
}
fn default_pixel_count() -> usize {
    DEFAULT_PIXEL_COUNT
}
fn default_gel_index() -> f64 {
    DEFAULT_GEL_INDEX
}
fn default_dome_radius() -> f64 {
    DEFAULT_DOME_RADIUS
}

fn pt(p: [f64; 2]) -> Point2 {
    Point2::new(p[0], p[1])
}

impl SplineConfig {
    pub fn build(&self, field: &str) -> Result<BSplineCurve, ConfigError> {
        let cps: Vec<Point2> = self.control_points.iter().copied().map(pt).collect();
        let curve = match &self.knots {
            Some(k) => BSplineCurve::new(self.degree, cps, k.clone()),
            None => BSplineCurve::clamped_uniform(self.degree, cps),
        };
        curve.map_err(|e| ConfigError::invalid(field, e.to_string()))
    }
}

impl SceneConfig {
    /// Strict parse; does not validate geometry (see [`SceneConfig::build`]).
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str::<SceneConfig>(text).map_err(|e| {
            let (line, column) = e.span().map(|s| line_col(text, s.start)).unzip();
            let message = e.message().to_string();
            let kind =
                if message.contains("unknown field") { ConfigErrorKind::UnknownKey } else { ConfigErrorKind::Syntax };
            ConfigError { kind, field: None, line, column, message }
        })
    }

    pub fn reference() -> Self {
        Self::parse(REFERENCE_SCENE).expect("reference scene parses")
    }

    /// Dome arc centered on `gel.dome_center`, opening along the boresight.
    fn dome_surface(&self, boresight: Dir2) -> Result<OpticalSurface, ConfigError> {
        let center = self.gel.dome_center.unwrap_or(self.camera.pinhole);
        let arc = CircularArc::new(pt(center), self.gel.dome_radius, boresight.angle() - FRAC_PI_2, 2.0 * FRAC_PI_2)
            .map_err(|e| ConfigError::invalid("gel.dome_radius", e.to_string()))?;
        Ok(OpticalSurface {
            name: "dome".into(),
            shape: Shape::Arc(arc),
            kind: SurfaceKind::Refractive { n_inside: 1.0, n_outside: self.gel.refractive_index },
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.build().map(|_| ())
    }

    /// Build the scene, reporting the first invalid field.
    pub fn build(&self) -> Result<SensorScene, ConfigError> {
        if self.units != "mm" {
            return Err(ConfigError::invalid("units", format!("only \"mm\" is supported, got {:?}", self.units)));
        }
        let c = &self.camera;
        if !(c.fov_deg > 0.0 && c.fov_deg < 180.0) {
            return Err(ConfigError::invalid("camera.fov_deg", format!("must be in (0, 180), got {}", c.fov_deg)));
        }
        if c.pixel_count < 2 {
            return Err(ConfigError::invalid(
                "camera.pixel_count",
                format!("must be at least 2, got {}", c.pixel_count),
            ));
        }
        if !pt(c.pinhole).is_finite() {
            return Err(ConfigError::invalid("camera.pinhole", "must be finite"));
        }
        let boresight = Dir2::new(c.boresight[0], c.boresight[1])
            .ok_or_else(|| ConfigError::invalid("camera.boresight", "must be a non-zero finite vector"))?;
        let n_gel = self.gel.refractive_index;
        if !(n_gel >= 1.0 && n_gel.is_finite()) {
            return Err(ConfigError::invalid("gel.refractive_index", format!("must be at least 1, got {n_gel}")));
        }
        if !(self.gel.dome_radius > 0.0) {
            return Err(ConfigError::invalid(
                "gel.dome_radius",
                format!("must be positive, got {}", self.gel.dome_radius),
            ));
        }
        let e = &self.envelope;
        if !(e.length > 0.0 && e.length.is_finite()) {
            return Err(ConfigError::invalid("envelope.length", "must be positive"));
        }
        if !(e.width > 0.0 && e.width.is_finite()) {
            return Err(ConfigError::invalid("envelope.width", "must be positive"));
        }
        let camera = Camera::new(pt(c.pinhole), boresight, c.fov_deg, c.pixel_count)
            .map_err(|err| ConfigError::invalid("camera", err.to_string()))?;

        let mut surfaces = vec![self.dome_surface(boresight)?];
        for (i, s) in self.surfaces.iter().enumerate() {
            let field = |f: &str| format!("surfaces[{i}].{f}");
            let kind = match (s.kind, s.n_inside, s.n_outside) {
                (SurfaceKindConfig::Refractive, Some(a), Some(b)) => {
                    if !(a >= 1.0 && b >= 1.0) {
                        return Err(ConfigError::invalid(field("n_inside"), "refractive indices must be at least 1"));
                    }
                    SurfaceKind::Refractive { n_inside: a, n_outside: b }
                }
                (SurfaceKindConfig::Refractive, _, _) => {
                    return Err(ConfigError::invalid(field("kind"), "refractive surfaces need n_inside and n_outside"));
                }
                (_, Some(_), _) | (_, _, Some(_)) => {
                    return Err(ConfigError::invalid(field("kind"), "only refractive surfaces take indices"));
                }
                (SurfaceKindConfig::Reflective, None, None) => SurfaceKind::Reflective,
                (SurfaceKindConfig::Absorbing, None, None) => SurfaceKind::Absorbing,
            };
            let shape = match &s.geometry {
                GeometryConfig::Spline(sp) => Shape::Spline(sp.build(&field("geometry"))?),
                GeometryConfig::Arc { center, radius, start_deg, span_deg } => Shape::Arc(
                    CircularArc::new(pt(*center), *radius, start_deg.to_radians(), span_deg.to_radians())
                        .map_err(|err| ConfigError::invalid(field("geometry"), err.to_string()))?,
                ),
                GeometryConfig::Segment { from, to } => Shape::Segment(
                    LineSegment::new(pt(*from), pt(*to))
                        .map_err(|err| ConfigError::invalid(field("geometry"), err.to_string()))?,
                ),
            };
            surfaces.push(OpticalSurface { name: s.name.clone(), shape, kind });
        }
        let skin = self.skin.build("skin")?;
        SensorScene::new(camera, surfaces, skin, Envelope { length: e.length, width: e.width })
            .map_err(|err| ConfigError::invalid("scene", err.to_string()))
    }

    /// Canonical text: fixed key order, every defaultable field written out.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "units = {}", quote(&self.units));
        let c = &self.camera;
        let _ = writeln!(w, "\n[camera]");
        let _ = writeln!(w, "pinhole = {}", fmt_pair(c.pinhole));
        let _ = writeln!(w, "boresight = {}", fmt_pair(c.boresight));
        let _ = writeln!(w, "fov_deg = {}", fmt_f64(c.fov_deg));
        let _ = writeln!(w, "pixel_count = {}", c.pixel_count);
        let _ = writeln!(w, "\n[gel]");
        let _ = writeln!(w, "refractive_index = {}", fmt_f64(self.gel.refractive_index));
        if let Some(dc) = self.gel.dome_center {
            let _ = writeln!(w, "dome_center = {}", fmt_pair(dc));
        }
        let _ = writeln!(w, "dome_radius = {}", fmt_f64(self.gel.dome_radius));
        let _ = writeln!(w, "\n[envelope]");
        let _ = writeln!(w, "length = {}", fmt_f64(self.envelope.length));
        let _ = writeln!(w, "width = {}", fmt_f64(self.envelope.width));
        let _ = writeln!(w, "\n[skin]");
        write_spline(w, &self.skin);
        for s in &self.surfaces {
            let _ = writeln!(w, "\n[[surfaces]]");
            let _ = writeln!(w, "name = {}", quote(&s.name));
            let kind = match s.kind {
                SurfaceKindConfig::Reflective => "reflective",
                SurfaceKindConfig::Refractive => "refractive",
                SurfaceKindConfig::Absorbing => "absorbing",
            };
            let _ = writeln!(w, "kind = {}", quote(kind));
            if let Some(n) = s.n_inside {
                let _ = writeln!(w, "n_inside = {}", fmt_f64(n));
            }
            if let Some(n) = s.n_outside {
                let _ = writeln!(w, "n_outside = {}", fmt_f64(n));
            }
            let _ = writeln!(w, "\n[surfaces.geometry]");
            match &s.geometry {
                GeometryConfig::Spline(sp) => {
                    let _ = writeln!(w, "type = \"spline\"");
                    write_spline(w, sp);
                }
                GeometryConfig::Arc { center, radius, start_deg, span_deg } => {
                    let _ = writeln!(w, "type = \"arc\"");
                    let _ = writeln!(w, "center = {}", fmt_pair(*center));
                    let _ = writeln!(w, "radius = {}", fmt_f64(*radius));
                    let _ = writeln!(w, "start_deg = {}", fmt_f64(*start_deg));
                    let _ = writeln!(w, "span_deg = {}", fmt_f64(*span_deg));
                }
                GeometryConfig::Segment { from, to } => {
                    let _ = writeln!(w, "type = \"segment\"");
                    let _ = writeln!(w, "from = {}", fmt_pair(*from));
                    let _ = writeln!(w, "to = {}", fmt_pair(*to));
                }
            }
        }
        out
    }
}

/// Parse and build in one step.
pub fn parse_scene(text: &str) -> Result<SensorScene, ConfigError> {
    let config = SceneConfig::parse(text)?;
    config.build().map_err(|e| locate(e, text))
}

/// Attach a source location to a validation error by finding its key.
pub fn locate(mut err: ConfigError, text: &str) -> ConfigError {
    if err.line.is_some() {
        return err;
    }
    if let Some(field) = &err.field {
        if let Some(line) = find_field_line(text, field) {
            err.line = Some(line);
            err.column = Some(1);
        }
    }
    err
}

fn find_field_line(text: &str, field: &str) -> Option<usize> {
    // "surfaces[2].geometry" → table "surfaces" (third occurrence), key "geometry"
    let mut parts: Vec<&str> = field.split('.').collect();
    let key = parts.pop()?;
    let (table, nth) = match parts.first() {
        Some(t) => match t.split_once('[') {
            Some((name, idx)) => (name.to_string(), idx.trim_end_matches(']').parse::<usize>().ok()?),
            None => (t.to_string(), 0),
        },
        None => (String::new(), 0),
    };
    let mut seen = 0usize;
    let mut in_table = table.is_empty();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            let name = line.trim_matches(|c| c == '[' || c == ']').trim();
            if name == table {
                in_table = seen == nth;
                seen += 1;
            } else if !name.starts_with(&format!("{table}.")) || table.is_empty() {
                in_table = false;
            }
            continue;
        }
        if in_table {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn write_spline(w: &mut String, sp: &SplineConfig) {
    let _ = writeln!(w, "degree = {}", sp.degree);
    let _ = writeln!(w, "control_points = [");
    for p in &sp.control_points {
        let _ = writeln!(w, "    {},", fmt_pair(*p));
    }
    let _ = writeln!(w, "]");
    if let Some(k) = &sp.knots {
        let items: Vec<String> = k.iter().map(|&v| fmt_f64(v)).collect();
        let _ = writeln!(w, "knots = [{}]", items.join(", "));
    }
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

/// Shortest round-trip decimal, always with a fractional part so TOML
/// reads it back as a float.
pub(crate) fn fmt_f64(v: f64) -> String {
    let s = format!("{v}");
    if s.contains(['.', 'e', 'E', 'n', 'i']) {
        s
    } else {
        format!("{s}.0")
    }
}

fn fmt_pair(p: [f64; 2]) -> String {
    format!("[{}, {}]", fmt_f64(p[0]), fmt_f64(p[1]))
}
