use super::{Dir2, GeometryError, Hit, Point2, Ray, MIN_RAY_T};

/// Straight segment; parameter 0 at `start`, 1 at `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSegment {
    start: Point2,
    end: Point2,
    tangent: Dir2,
}

impl LineSegment {
    pub fn new(start: Point2, end: Point2) -> Result<Self, GeometryError> {
        let tangent =
            Dir2::from_vec(end - start).ok_or_else(|| GeometryError::Degenerate("zero-length segment".into()))?;
        Ok(Self { start, end, tangent })
    }

    pub fn start(&self) -> Point2 {
        self.start
    }

    pub fn end(&self) -> Point2 {
        self.end
    }

    pub fn point_at(&self, t: f64) -> Point2 {
        self.start.lerp(self.end, t)
    }

    pub fn tangent_normal(&self) -> (Dir2, Dir2) {
        (self.tangent, self.tangent.perp())
    }

    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        let e = self.end - self.start;
        let d = ray.direction.as_vec();
        let denom = d.cross(e);
        if denom == 0.0 {
            return None;
        }
        let w = self.start - ray.origin;
        let t_ray = w.cross(e) / denom;
        let u = w.cross(d) / denom;
        if t_ray > MIN_RAY_T && (0.0..=1.0).contains(&u) {
            Some(Hit { t_ray, t_surface: u, point: self.point_at(u) })
        } else {
            None
        }
    }
}
