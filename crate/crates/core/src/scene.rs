//! The folded optical path: a pinhole camera inside an air pocket, a gel dome,
//! mirrors, and the sensing skin. Rays are traced forward from each camera
//! pixel until they land on the skin or leave the scene.

use crate::geometry::{reflect, refract, BSplineCurve, Dir2, GeometryError, Hit, Point2, Ray, Refraction, Shape};

/// Interactions allowed per ray before tracing gives up.
pub const MAX_BOUNCES: usize = 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("pixel index {index} out of range for {count} pixels")]
    PixelIndex { index: usize, count: usize },
    #[error("invalid camera: {0}")]
    Camera(String),
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("every outer pixel ray is totally internally reflected")]
    AllTir,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Pinhole camera; pixel rays fan uniformly in angle across the field of view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub pinhole: Point2,
    pub boresight: Dir2,
    pub fov_deg: f64,
    pub pixel_count: usize,
    /// Refractive index of the medium around the pinhole.
    pub medium_index: f64,
}

impl Camera {
    pub fn new(pinhole: Point2, boresight: Dir2, fov_deg: f64, pixel_count: usize) -> Result<Self, SceneError> {
        let cam = Self { pinhole, boresight, fov_deg, pixel_count, medium_index: 1.0 };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(SceneError::Camera(format!("fov_deg must be in (0, 180), got {}", self.fov_deg)));
        }
        if self.pixel_count < 2 {
            return Err(SceneError::Camera(format!("pixel_count must be at least 2, got {}", self.pixel_count)));
        }
        if !self.pinhole.is_finite() {
            return Err(SceneError::Camera("pinhole must be finite".into()));
        }
        if !(self.medium_index >= 1.0) {
            return Err(SceneError::Camera("medium index must be at least 1".into()));
        }
        Ok(())
    }

    /// Fan angle of a pixel relative to the boresight, radians. Pixel 0 is
    /// the clockwise-most ray.
    pub fn pixel_angle(&self, index: usize) -> f64 {
        let fov = self.fov_deg.to_radians();
        -0.5 * fov + fov * index as f64 / (self.pixel_count - 1) as f64
    }

    pub fn pixel_ray(&self, index: usize) -> Result<Ray, SceneError> {
        if index >= self.pixel_count {
            return Err(SceneError::PixelIndex { index, count: self.pixel_count });
        }
        Ok(Ray::new(self.pinhole, self.boresight.rotated(self.pixel_angle(index)), self.medium_index))
    }
}

/// How a surface acts on a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceKind {
    Reflective,
    /// Indices on the side the surface normal points to (`inside`) and the
    /// other side.
    Refractive {
        n_inside: f64,
        n_outside: f64,
    },
    Absorbing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpticalSurface {
    pub name: String,
    pub shape: Shape,
    pub kind: SurfaceKind,
}

/// Axis-aligned finger outline in the simulation plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorScene {
    camera: Camera,
    surfaces: Vec<OpticalSurface>,
    skin: BSplineCurve,
    envelope: Envelope,
}

/// One vertex of a traced path: where the ray is, where it heads next, and
/// the medium it travels through on that leg. The final vertex of a skin
/// hit keeps the arriving direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathVertex {
    pub point: Point2,
    pub direction: Dir2,
    pub medium_index: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terminal {
    /// Landed on the skin; `imaging_angle` (radians) is measured between
    /// the arriving ray and the skin tangent, in (0, π/2].
    SkinHit {
        t_skin: f64,
        imaging_angle: f64,
    },
    Escaped,
    /// Stopped by an absorbing surface other than the skin.
    Absorbed {
        surface: usize,
    },
    /// Bounce cap reached right after a total internal reflection.
    Tir,
    MaxBounces,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceResult {
    pub pixel_index: usize,
    pub path: Vec<PathVertex>,
    pub terminal: Terminal,
}

impl TraceResult {
    pub fn skin_hit(&self) -> Option<(f64, f64)> {
        match self.terminal {
            Terminal::SkinHit { t_skin, imaging_angle } => Some((t_skin, imaging_angle)),
            _ => None,
        }
    }

    /// Incoming direction at the last path vertex.
    pub fn final_direction(&self) -> Dir2 {
        self.path.last().expect("path is never empty").direction
    }
}

enum Target {
    Surface(usize),
    Skin,
}

impl SensorScene {
    pub fn new(
        camera: Camera,
        surfaces: Vec<OpticalSurface>,
        skin: BSplineCurve,
        envelope: Envelope,
    ) -> Result<Self, SceneError> {
        camera.validate()?;
        if !(envelope.length > 0.0 && envelope.width > 0.0) {
            return Err(SceneError::Invalid("envelope length and width must be positive".into()));
        }
        for s in &surfaces {
            if let SurfaceKind::Refractive { n_inside, n_outside } = s.kind {
                if !(n_inside >= 1.0 && n_outside >= 1.0) {
                    return Err(SceneError::Invalid(format!(
                        "surface {}: refractive indices must be at least 1",
                        s.name
                    )));
                }
            }
        }
        Ok(Self { camera, surfaces, skin, envelope })
    }

    pub fn camera(&self) -> &Camera {
        &self.camera
    }

    pub fn surfaces(&self) -> &[OpticalSurface] {
        &self.surfaces
    }

    pub fn skin(&self) -> &BSplineCurve {
        &self.skin
    }

    pub fn envelope(&self) -> Envelope {
        self.envelope
    }

    fn nearest_hit(&self, ray: &Ray) -> Result<Option<(Target, Hit)>, GeometryError> {
        let mut best: Option<(Target, Hit)> = None;
        let mut consider = |target: Target, hit: Option<Hit>| {
            if let Some(h) = hit {
                if best.as_ref().is_none_or(|(_, b)| h.t_ray < b.t_ray) {
                    best = Some((target, h));
                }
            }
        };
        for (i, s) in self.surfaces.iter().enumerate() {
            consider(Target::Surface(i), s.shape.intersect(ray)?);
        }
        consider(Target::Skin, self.skin.intersect(ray)?);
        Ok(best)
    }

    /// Follow `ray` through the scene for at most `max_events` interactions.
    pub fn trace_ray(&self, ray: Ray, max_events: usize) -> Result<(Vec<PathVertex>, Terminal), SceneError> {
        let mut path = vec![PathVertex { point: ray.origin, direction: ray.direction, medium_index: ray.medium_index }];
        let mut ray = ray;
        let mut last_was_tir = false;
        for _ in 0..max_events {
            let Some((target, hit)) = self.nearest_hit(&ray)? else {
                return Ok((path, Terminal::Escaped));
            };
            let d = ray.direction;
            match target {
                Target::Skin => {
                    let (tangent, _) = self.skin.tangent_normal(hit.t_surface)?;
                    let imaging_angle = d.dot(tangent).abs().min(1.0).acos();
                    path.push(PathVertex { point: hit.point, direction: d, medium_index: ray.medium_index });
                    return Ok((path, Terminal::SkinHit { t_skin: hit.t_surface, imaging_angle }));
                }
                Target::Surface(i) => {
                    let surface = &self.surfaces[i];
                    let (_, normal) = surface.shape.tangent_normal(hit.t_surface)?;
                    let (next, medium) = match surface.kind {
                        SurfaceKind::Absorbing => {
                            path.push(PathVertex { point: hit.point, direction: d, medium_index: ray.medium_index });
                            return Ok((path, Terminal::Absorbed { surface: i }));
                        }
                        SurfaceKind::Reflective => {
                            last_was_tir = false;
                            (reflect(d, normal), ray.medium_index)
                        }
                        SurfaceKind::Refractive { n_inside, n_outside } => {
                            let entering = d.dot(normal) > 0.0;
                            let (n_from, n_to) = if entering { (n_outside, n_inside) } else { (n_inside, n_outside) };
                            match refract(d, normal, n_from, n_to) {
                                Refraction::Transmitted(t) => {
                                    last_was_tir = false;
                                    (t, n_to)
                                }
                                Refraction::TotalInternalReflection => {
                                    last_was_tir = true;
                                    (reflect(d, normal), n_from)
                                }
                            }
                        }
                    };
                    path.push(PathVertex { point: hit.point, direction: next, medium_index: medium });
                    ray = Ray::new(hit.point, next, medium);
                }
            }
        }
        Ok((path, if last_was_tir { Terminal::Tir } else { Terminal::MaxBounces }))
    }

    pub fn trace_pixel(&self, pixel_index: usize) -> Result<TraceResult, SceneError> {
        let ray = self.camera.pixel_ray(pixel_index)?;
        let (path, terminal) = self.trace_ray(ray, MAX_BOUNCES)?;
        Ok(TraceResult { pixel_index, path, terminal })
    }

    pub fn trace_all(&self) -> Result<Vec<TraceResult>, SceneError> {
        (0..self.camera.pixel_count).map(|i| self.trace_pixel(i)).collect()
    }

    /// Retrace a skin-hit path backwards from the skin.
    ///
    /// Returns the reversed interaction points, ending with the point of the
    /// last reversed leg closest to the pinhole.
    pub fn retrace_reversed(&self, trace: &TraceResult) -> Result<Vec<Point2>, SceneError> {
        let last = trace.path.last().expect("path is never empty");
        let ray = Ray::new(last.point, -last.direction, last.medium_index);
        let events = trace.path.len() - 2;
        let (path, _) = self.trace_ray(ray, events)?;
        let mut points: Vec<Point2> = path.iter().map(|v| v.point).collect();
        let tail = path.last().expect("path is never empty");
        let along = (self.camera.pinhole - tail.point).dot(tail.direction.as_vec());
        points.push(tail.point + tail.direction * along);
        Ok(points)
    }

    /// Angular width, after the first refractive interface, between the
    /// outermost pixel rays that get through it. Degrees.
    pub fn effective_fov(&self) -> Result<f64, SceneError> {
        let n = self.camera.pixel_count;
        let exit_dir = |i: usize| -> Result<Option<Dir2>, SceneError> {
            let ray = self.camera.pixel_ray(i)?;
            let Some((Target::Surface(s), hit)) = self.nearest_hit(&ray)? else {
                return Ok(None);
            };
            let surface = &self.surfaces[s];
            let SurfaceKind::Refractive { n_inside, n_outside } = surface.kind else {
                return Ok(None);
            };
            let (_, normal) = surface.shape.tangent_normal(hit.t_surface)?;
            let entering = ray.direction.dot(normal) > 0.0;
            let (n_from, n_to) = if entering { (n_outside, n_inside) } else { (n_inside, n_outside) };
            Ok(match refract(ray.direction, normal, n_from, n_to) {
                Refraction::Transmitted(t) => Some(t),
                Refraction::TotalInternalReflection => None,
            })
        };
        let mut first = None;
        for i in 0..n {
            if let Some(d) = exit_dir(i)? {
                first = Some((i, d));
                break;
            }
        }
        let (lo, d_lo) = first.ok_or(SceneError::AllTir)?;
        let mut d_hi = d_lo;
        for i in (lo..n).rev() {
            if let Some(d) = exit_dir(i)? {
                d_hi = d;
                break;
            }
        }
        Ok(d_lo.angle_to(d_hi).abs().to_degrees())
    }
}
