//! Independent reference computations for the integration tests, plus
//! sweeps that compare the library against them. The oracles themselves
//! only share plain data types with the library.
#![allow(dead_code)]

use catafinger::geometry::{BSplineCurve, CircularArc, Dir2, LineSegment, Point2, Ray, Shape};
use catafinger::proprio::TorqueRegressor;
use catafinger::scene::{Camera, Envelope, OpticalSurface, SensorScene, SurfaceKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cox–de Boor basis N_{i,p}(t) by direct recursion, 0/0 := 0. At the right
/// end of the domain the last non-empty span is treated as closed.
pub fn basis(i: usize, p: usize, knots: &[f64], t: f64) -> f64 {
    if p == 0 {
        let (a, b) = (knots[i], knots[i + 1]);
        let end = *knots.last().unwrap();
        let last_span = b == end && a < b;
        return if (a <= t && t < b) || (last_span && t == end) { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = knots[i + p] - knots[i];
    if d1 > 0.0 {
        v += (t - knots[i]) / d1 * basis(i, p - 1, knots, t);
    }
    let d2 = knots[i + p + 1] - knots[i + 1];
    if d2 > 0.0 {
        v += (knots[i + p + 1] - t) / d2 * basis(i + 1, p - 1, knots, t);
    }
    v
}

pub fn cox_de_boor_point(degree: usize, knots: &[f64], cps: &[Point2], t: f64) -> Point2 {
    let mut p = Point2::new(0.0, 0.0);
    for (i, c) in cps.iter().enumerate() {
        let b = basis(i, degree, knots, t);
        p = Point2::new(p.x + b * c.x, p.y + b * c.y);
    }
    p
}

pub fn basis_sum(degree: usize, knots: &[f64], n: usize, t: f64) -> f64 {
    (0..n).map(|i| basis(i, degree, knots, t)).sum()
}

/// Clamped knot vector on [0, 1] with sorted random interior knots.
pub fn random_clamped_knots<R: Rng>(rng: &mut R, degree: usize, n: usize) -> Vec<f64> {
    let mut interior: Vec<f64> = (0..n - degree - 1).map(|_| rng.random_range(0.05..0.95)).collect();
    interior.sort_by(f64::total_cmp);
    let mut k = vec![0.0; degree + 1];
    k.extend(interior);
    k.extend(vec![1.0; degree + 1]);
    k
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, half: f64) -> Vec<Point2> {
    (0..n).map(|_| Point2::new(rng.random_range(-half..half), rng.random_range(-half..half))).collect()
}

/// Dense polyline of a curve, sampled uniformly in its parameter.
pub fn dense_samples(curve: &BSplineCurve, n: usize) -> Vec<Point2> {
    let (lo, hi) = curve.domain();
    (0..n).map(|i| curve.evaluate(lo + (hi - lo) * i as f64 / (n - 1) as f64).unwrap()).collect()
}

/// Nearest forward crossing of `ray` with a polyline, found from sign
/// changes of the signed offset to the ray line.
pub fn polyline_nearest_hit(points: &[Point2], ray: &Ray, min_t: f64) -> Option<(f64, Point2)> {
    let d = ray.direction.as_vec();
    let side = |p: Point2| d.x * (p.y - ray.origin.y) - d.y * (p.x - ray.origin.x);
    let mut best: Option<(f64, Point2)> = None;
    for w in points.windows(2) {
        let (s0, s1) = (side(w[0]), side(w[1]));
        if s0 == 0.0 && s1 == 0.0 || (s0 > 0.0) == (s1 > 0.0) && s0 != 0.0 && s1 != 0.0 {
            continue;
        }
        let u = s0 / (s0 - s1);
        let p = Point2::new(w[0].x + u * (w[1].x - w[0].x), w[0].y + u * (w[1].y - w[0].y));
        let t = (p.x - ray.origin.x) * d.x + (p.y - ray.origin.y) * d.y;
        if t > min_t && best.is_none_or(|b| t < b.0) {
            best = Some((t, p));
        }
    }
    best
}

/// Angle of refraction from scalar Snell's law; `None` past the critical angle.
pub fn snell(theta_i: f64, n1: f64, n2: f64) -> Option<f64> {
    let s = n1 / n2 * theta_i.sin();
    (s.abs() <= 1.0).then(|| s.asin())
}

pub fn critical_angle(n_dense: f64, n_rare: f64) -> f64 {
    (n_rare / n_dense).asin()
}

/// Unsigned angle between two directions, via atan2 so it stays accurate
/// near 0 and π.
pub fn angle_between(a: Dir2, b: Dir2) -> f64 {
    let cross = a.x() * b.y() - a.y() * b.x();
    let dot = a.x() * b.x() + a.y() * b.y();
    cross.abs().atan2(dot)
}

/// Tip deflection of a cantilever under a pure end moment.
pub fn end_moment_deflection(moment: f64, s: f64, ei: f64) -> f64 {
    moment * s * s / (2.0 * ei)
}

/// Intensity-weighted centroid of one plane.
pub fn centroid(plane: &[f64], width: usize) -> (f64, f64) {
    let (mut s, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for (i, v) in plane.iter().enumerate() {
        s += v;
        sx += v * (i % width) as f64;
        sy += v * (i / width) as f64;
    }
    (sx / s, sy / s)
}

/// Worst relative gap between the analytic loss gradient and a central
/// difference (step 1e-5) over the `picks` parameters, on three random
/// inputs. Entries where both are below 1e-7 are skipped.
pub fn gradient_check_error(model: &TorqueRegressor, picks: &[usize], seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = model.shape().input_len();
    let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let ts: Vec<[f64; 2]> = (0..3).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
    let inputs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    let (_, grad) = model.loss_gradient(&inputs, &ts);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    for &i in picks {
        let mut p = model.params().to_vec();
        p[i] += h;
        probe.set_params(p.clone());
        let up = probe.loss_gradient(&inputs, &ts).0;
        p[i] -= 2.0 * h;
        probe.set_params(p);
        let down = probe.loss_gradient(&inputs, &ts).0;
        let numeric = (up - down) / (2.0 * h);
        let scale = numeric.abs().max(grad[i].abs());
        if scale > 1e-7 {
            worst = worst.max((numeric - grad[i]).abs() / scale);
        }
    }
    worst
}

fn wide_skin(x: f64) -> BSplineCurve {
    BSplineCurve::clamped_uniform(1, vec![Point2::new(x, -500.0), Point2::new(x, 500.0)]).unwrap()
}

fn envelope() -> Envelope {
    Envelope { length: 83.5, width: 22.7 }
}

/// Camera at the origin looking along +x through a flat air→gel interface
/// one millimeter ahead.
pub fn flat_interface_scene(fov_deg: f64, n_gel: f64, pixels: usize) -> SensorScene {
    let camera = Camera::new(Point2::new(0.0, 0.0), Dir2::X, fov_deg, pixels).unwrap();
    // Tangent +y, so the left normal (−x) faces the camera: air is inside.
    let interface = LineSegment::new(Point2::new(1.0, -200.0), Point2::new(1.0, 200.0)).unwrap();
    let surface = OpticalSurface {
        name: "flat".into(),
        shape: Shape::Segment(interface),
        kind: SurfaceKind::Refractive { n_inside: 1.0, n_outside: n_gel },
    };
    SensorScene::new(camera, vec![surface], wide_skin(50.0), envelope()).unwrap()
}

/// Same camera with a dome concentric with the pinhole.
pub fn dome_scene(fov_deg: f64, n_gel: f64, radius: f64, pixels: usize) -> SensorScene {
    let camera = Camera::new(Point2::new(0.0, 0.0), Dir2::X, fov_deg, pixels).unwrap();
    let arc =
        CircularArc::new(Point2::new(0.0, 0.0), radius, -std::f64::consts::FRAC_PI_2, std::f64::consts::PI).unwrap();
    let surface = OpticalSurface {
        name: "dome".into(),
        shape: Shape::Arc(arc),
        kind: SurfaceKind::Refractive { n_inside: 1.0, n_outside: n_gel },
    };
    SensorScene::new(camera, vec![surface], wide_skin(50.0), envelope()).unwrap()
}

// Sweeps: each returns the worst deviation seen so callers can both
// assert and report it.

/// Worst |de Boor − Cox–de Boor| over random clamped splines of mixed degree.
pub fn de_boor_sweep(seed: u64, splines: usize, samples: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..splines {
        // Every fourth spline is the cubic with six control points.
        let degree = if k % 4 == 0 { 3 } else { rng.random_range(1..=5) };
        let n = if k % 4 == 0 { 6 } else { rng.random_range(degree + 1..=degree + 8) };
        let knots = random_clamped_knots(&mut rng, degree, n);
        let cps = random_points(&mut rng, n, 50.0);
        let curve = BSplineCurve::new(degree, cps.clone(), knots.clone()).unwrap();
        for j in 0..samples {
            let t = if j == 0 {
                0.0
            } else if j == 1 {
                1.0
            } else {
                rng.random_range(0.0..1.0)
            };
            let a = curve.evaluate(t).unwrap();
            let b = cox_de_boor_point(degree, &knots, &cps, t);
            worst = worst.max(a.distance(b));
        }
    }
    worst
}

/// Worst |Σ N_i − 1| from the recursion, and worst deviation of a spline
/// whose control points all share x = 1 from x = 1.
pub fn partition_of_unity_sweep(seed: u64, splines: usize, samples: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut basis_err, mut curve_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..splines {
        let degree = rng.random_range(1..=5);
        let n = rng.random_range(degree + 1..=degree + 8);
        let knots = random_clamped_knots(&mut rng, degree, n);
        let cps: Vec<Point2> = (0..n).map(|i| Point2::new(1.0, i as f64 + rng.random_range(0.0..0.5))).collect();
        let curve = BSplineCurve::new(degree, cps, knots.clone()).unwrap();
        for j in 0..samples {
            let t = if j == 0 { 1.0 } else { rng.random_range(0.0..1.0) };
            basis_err = basis_err.max((basis_sum(degree, &knots, n, t) - 1.0).abs());
            curve_err = curve_err.max((curve.evaluate(t).unwrap().x - 1.0).abs());
        }
    }
    (basis_err, curve_err)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IntersectionSweep {
    pub cases: usize,
    pub hits: usize,
    /// Cases where exactly one of library and oracle reported a hit.
    pub disagreements: usize,
    /// Worst distance between library and oracle hit points, mm.
    pub max_error: f64,
}

/// Random rays against random quadratic splines, checked against a
/// 10⁵-point dense polyline of each curve.
pub fn intersection_sweep(seed: u64, curves: usize, rays_per_curve: usize) -> IntersectionSweep {
    const SAMPLES: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = IntersectionSweep::default();
    for _ in 0..curves {
        let n = rng.random_range(3..=6);
        let knots = random_clamped_knots(&mut rng, 2, n);
        let cps = random_points(&mut rng, n, 20.0);
        let curve = BSplineCurve::new(2, cps, knots).unwrap();
        let dense = dense_samples(&curve, SAMPLES);
        for r in 0..rays_per_curve {
            let origin = Point2::new(rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0));
            // Most rays aim at a point of the curve, the rest anywhere.
            let direction = if r % 4 != 3 {
                let target = curve.evaluate(rng.random_range(0.0..1.0)).unwrap();
                Dir2::new(target.x - origin.x, target.y - origin.y).unwrap()
            } else {
                Dir2::from_angle(rng.random_range(0.0..std::f64::consts::TAU))
            };
            let ray = Ray::new(origin, direction, 1.0);
            out.cases += 1;
            let lib = curve.intersect(&ray).unwrap();
            let oracle = polyline_nearest_hit(&dense, &ray, catafinger::geometry::MIN_RAY_T);
            match (lib, oracle) {
                (Some(h), Some((_, p))) => {
                    out.hits += 1;
                    out.max_error = out.max_error.max(h.point.distance(p));
                }
                (None, None) => {}
                _ => out.disagreements += 1,
            }
        }
    }
    out
}
