mod oracles;

use catafinger::geometry::{reflect, refract, BSplineCurve, Dir2, Point2, Ray, Refraction};
use oracles::*;
use proptest::prelude::*;

#[test]
fn de_boor_agrees_with_basis_recursion() {
    let worst = de_boor_sweep(1, 100, 100);
    assert!(worst < 1e-9, "max error {worst:e}");
}

#[test]
fn basis_partition_of_unity() {
    let (basis, curve) = partition_of_unity_sweep(2, 100, 50);
    assert!(basis < 1e-12, "{basis:e}");
    assert!(curve < 1e-12, "{curve:e}");
}

#[test]
fn intersections_match_dense_sampling() {
    let s = intersection_sweep(3, 100, 10);
    assert_eq!(s.cases, 1000);
    assert_eq!(s.disagreements, 0, "{s:?}");
    assert!(s.hits > 700, "{s:?}");
    assert!(s.max_error < 1e-4, "{s:?}");
}

#[test]
fn tangent_matches_finite_differences() {
    let cps = vec![
        Point2::new(0.0, 0.0),
        Point2::new(3.0, 7.0),
        Point2::new(9.0, -2.0),
        Point2::new(12.0, 5.0),
        Point2::new(15.0, 1.0),
    ];
    let curve = BSplineCurve::clamped_uniform(3, cps).unwrap();
    let (tangent, normal) = curve.tangent_normal(0.37).unwrap();
    let h = 1e-6;
    let (a, b) = (curve.evaluate(0.37 - h).unwrap(), curve.evaluate(0.37 + h).unwrap());
    let fd = Dir2::new(b.x - a.x, b.y - a.y).unwrap();
    assert!(angle_between(tangent, fd) < 1e-6);
    assert!((normal.x() + tangent.y()).abs() < 1e-15 && (normal.y() - tangent.x()).abs() < 1e-15);
}

#[test]
fn snell_at_sixty_degrees_into_gel() {
    let theta = 60f64.to_radians();
    let incoming = Dir2::from_angle(-std::f64::consts::FRAC_PI_2 + theta);
    let Refraction::Transmitted(t) = refract(incoming, Dir2::Y, 1.0, 1.41) else { panic!("no TIR entering gel") };
    let expected = snell(theta, 1.0, 1.41).unwrap();
    assert!((angle_between(t, -Dir2::Y) - expected).abs() < 1e-12);
    assert!((expected.to_degrees() - 37.89).abs() < 0.01);
}

#[test]
fn total_internal_reflection_at_the_critical_angle() {
    let critical = critical_angle(1.41, 1.0);
    assert!((critical.to_degrees() - 45.17).abs() < 0.005);
    let at = |deg: f64| refract(Dir2::from_angle(-std::f64::consts::FRAC_PI_2 + deg.to_radians()), Dir2::Y, 1.41, 1.0);
    assert!(matches!(at(critical.to_degrees() - 1e-6), Refraction::Transmitted(_)));
    assert!(matches!(at(critical.to_degrees() + 1e-6), Refraction::TotalInternalReflection));
    assert!(matches!(at(50.0), Refraction::TotalInternalReflection));
}

fn dir() -> impl Strategy<Value = Dir2> {
    (0.0..std::f64::consts::TAU).prop_map(Dir2::from_angle)
}

proptest! {
    #[test]
    fn reflection_preserves_the_angle_to_the_normal(d in dir(), n in dir()) {
        let r = reflect(d, n);
        let a_in = angle_between(-d, n);
        let a_out = angle_between(r, n);
        prop_assert!((a_in - a_out).abs() < 1e-12, "{a_in} vs {a_out}");
    }

    #[test]
    fn reflecting_twice_is_identity(d in dir(), n in dir()) {
        let back = reflect(reflect(d, n), n);
        prop_assert!((back.x() - d.x()).abs() < 1e-12 && (back.y() - d.y()).abs() < 1e-12);
    }

    #[test]
    fn refraction_is_reversible(theta in -1.5f64..1.5, n1 in 1.0f64..2.0, n2 in 1.0f64..2.0, flip in any::<bool>()) {
        let normal = if flip { Dir2::Y } else { -Dir2::Y };
        let incoming = Dir2::from_angle(-std::f64::consts::FRAC_PI_2 + theta);
        if let Refraction::Transmitted(t) = refract(incoming, normal, n1, n2) {
            let Refraction::Transmitted(back) = refract(-t, normal, n2, n1) else {
                return Err(TestCaseError::fail("reverse path hit TIR"));
            };
            prop_assert!((back.x() + incoming.x()).abs() < 1e-9 && (back.y() + incoming.y()).abs() < 1e-9);
        } else {
            prop_assert!(snell(theta.abs(), n1, n2).is_none());
        }
    }

    #[test]
    fn evaluate_stays_in_the_convex_hull(
        pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 4..9),
        t in 0.0f64..=1.0,
    ) {
        let cps: Vec<Point2> = pts.iter().map(|&(x, y)| Point2::new(x, y)).collect();
        let Ok(curve) = BSplineCurve::clamped_uniform(3, cps.clone()) else { return Ok(()) };
        let p = curve.evaluate(t).unwrap();
        let hull = convex_hull(&cps);
        for w in 0..hull.len() {
            let (a, b) = (hull[w], hull[(w + 1) % hull.len()]);
            let side = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
            prop_assert!(side >= -1e-9 * (1.0 + a.distance(b)), "outside edge {a:?}->{b:?}");
        }
    }

    #[test]
    fn intersection_lies_on_ray_and_curve(
        pts in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 3..7),
        ox in -40.0f64..40.0, oy in -40.0f64..40.0, u in 0.0f64..1.0,
    ) {
        let cps: Vec<Point2> = pts.iter().map(|&(x, y)| Point2::new(x, y)).collect();
        let Ok(curve) = BSplineCurve::clamped_uniform(2, cps) else { return Ok(()) };
        let target = curve.evaluate(u).unwrap();
        let origin = Point2::new(ox, oy);
        let Some(direction) = Dir2::new(target.x - ox, target.y - oy) else { return Ok(()) };
        let ray = Ray::new(origin, direction, 1.0);
        if let Some(hit) = curve.intersect(&ray).unwrap() {
            prop_assert!(hit.point.distance(ray.at(hit.t_ray)) < 1e-7);
            prop_assert!(hit.point.distance(curve.evaluate(hit.t_surface).unwrap()) < 1e-7);
            prop_assert!(hit.t_ray <= origin.distance(target) + 1e-7);
        }
    }
}

/// Counter-clockwise hull by monotone chain.
fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let cross = |o: Point2, a: Point2, b: Point2| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut lower: Vec<Point2> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}
