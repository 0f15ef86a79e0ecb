use super::{Dir2, GeometryError, Hit, Point2, Ray, INTERSECT_TOL, MAX_SUBDIVISION_DEPTH, MIN_RAY_T};

/// Clamped planar B-spline.
///
/// The curve is decomposed into Bézier pieces once at construction; ray
/// intersection works on those pieces so the convex-hull test is tight.
#[derive(Debug, Clone)]
pub struct BSplineCurve {
    degree: usize,
    control_points: Vec<Point2>,
    knots: Vec<f64>,
    pieces: Vec<BezierPiece>,
}

impl PartialEq for BSplineCurve {
    fn eq(&self, other: &Self) -> bool {
        self.degree == other.degree && self.control_points == other.control_points && self.knots == other.knots
    }
}

#[derive(Debug, Clone)]
struct BezierPiece {
    t0: f64,
    t1: f64,
    control_points: Vec<Point2>,
}

impl BSplineCurve {
    pub fn new(degree: usize, control_points: Vec<Point2>, knots: Vec<f64>) -> Result<Self, GeometryError> {
        let invalid = |msg: String| Err(GeometryError::InvalidCurve(msg));
        if degree == 0 {
            return invalid("degree must be at least 1".into());
        }
        let n = control_points.len();
        if n < degree + 1 {
            return invalid(format!("degree {degree} needs at least {} control points, got {n}", degree + 1));
        }
        if control_points.iter().any(|p| !p.is_finite()) {
            return invalid("control points must be finite".into());
        }
        if knots.len() != n + degree + 1 {
            return invalid(format!("expected {} knots, got {}", n + degree + 1, knots.len()));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return invalid("knots must be finite".into());
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return invalid("knot vector must be non-decreasing".into());
        }
        let first = knots[0];
        let last = knots[knots.len() - 1];
        if knots[..=degree].iter().any(|&k| k != first) || knots[n..].iter().any(|&k| k != last) {
            return invalid("knot vector must be clamped".into());
        }
        if knots[degree] >= knots[n] {
            return invalid("empty parameter domain".into());
        }
        let mut run = 1;
        for w in knots[degree..=n].windows(2) {
            run = if w[0] == w[1] { run + 1 } else { 1 };
            if run > degree && w[1] != last {
                return invalid("interior knot multiplicity exceeds degree".into());
            }
        }
        let mut curve = Self { degree, control_points, knots, pieces: Vec::new() };
        curve.pieces = curve.bezier_decomposition();
        Ok(curve)
    }

    /// Clamped curve with uniformly spaced interior knots on [0, 1].
    pub fn clamped_uniform(degree: usize, control_points: Vec<Point2>) -> Result<Self, GeometryError> {
        let knots = clamped_uniform_knots(degree, control_points.len());
        Self::new(degree, control_points, knots)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn control_points(&self) -> &[Point2] {
        &self.control_points
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[self.degree], self.knots[self.control_points.len()])
    }

    fn check_domain(&self, t: f64) -> Result<(), GeometryError> {
        let (lo, hi) = self.domain();
        if t.is_finite() && t >= lo && t <= hi {
            Ok(())
        } else {
            Err(GeometryError::Domain { t, lo, hi })
        }
    }

    /// Point on the curve at `t` (de Boor).
    pub fn evaluate(&self, t: f64) -> Result<Point2, GeometryError> {
        self.check_domain(t)?;
        Ok(de_boor(self.degree, &self.control_points, &self.knots, t))
    }

    /// First derivative dC/dt.
    pub fn derivative(&self, t: f64) -> Result<Point2, GeometryError> {
        self.check_domain(t)?;
        let (cps, knots) = derivative_polygon(self.degree, &self.control_points, &self.knots);
        Ok(de_boor(self.degree - 1, &cps, &knots, t))
    }

    /// Unit tangent and its +90° rotation.
    pub fn tangent_normal(&self, t: f64) -> Result<(Dir2, Dir2), GeometryError> {
        let d = self.derivative(t)?;
        if d.norm() < 1e-12 {
            return Err(GeometryError::Degenerate(format!("zero derivative at t = {t}")));
        }
        let tangent =
            Dir2::from_vec(d).ok_or_else(|| GeometryError::Degenerate(format!("non-finite derivative at t = {t}")))?;
        Ok((tangent, tangent.perp()))
    }

    /// Arc length between two parameters (signed when `b < a`).
    pub fn arc_length(&self, a: f64, b: f64) -> Result<f64, GeometryError> {
        self.check_domain(a)?;
        self.check_domain(b)?;
        if b < a {
            return Ok(-self.arc_length(b, a)?);
        }
        let (cps, knots) = derivative_polygon(self.degree, &self.control_points, &self.knots);
        let speed = |t: f64| de_boor(self.degree - 1, &cps, &knots, t).norm();
        // Integrate span by span so the integrand is smooth on each piece.
        let mut total = 0.0;
        let mut lo = a;
        for piece in &self.pieces {
            if piece.t1 <= lo || piece.t0 >= b {
                continue;
            }
            let s = lo.max(piece.t0);
            let e = b.min(piece.t1);
            if e > s {
                total += adaptive_gauss(&speed, s, e, 1e-9, 0);
            }
            lo = e;
        }
        Ok(total)
    }

    pub fn total_length(&self) -> f64 {
        let (lo, hi) = self.domain();
        self.arc_length(lo, hi).expect("domain endpoints are valid")
    }

    /// Nearest forward intersection with a ray.
    ///
    /// Each Bézier piece is subdivided while its control polygon straddles
    /// the ray line; once a piece is flat the crossing is bracketed and
    /// refined on the exact curve.
    pub fn intersect(&self, ray: &Ray) -> Result<Option<Hit>, GeometryError> {
        let mut best: Option<Hit> = None;
        for piece in &self.pieces {
            let local: Vec<(f64, f64)> = piece.control_points.iter().map(|&p| ray.local(p)).collect();
            let mut best_t = best.map_or(f64::INFINITY, |h| h.t_ray);
            let mut roots = Vec::new();
            subdivide(&local, 0.0, 1.0, 0, best_t, &mut roots)?;
            for (u0, u1) in roots {
                let Some(u) = refine_root(&piece.control_points, ray, u0, u1) else {
                    continue;
                };
                let t = piece.t0 + (piece.t1 - piece.t0) * u;
                let point = de_boor(self.degree, &self.control_points, &self.knots, t);
                let t_ray = ray.local(point).0;
                if t_ray > MIN_RAY_T && t_ray < best_t {
                    best_t = t_ray;
                    best = Some(Hit { t_ray, t_surface: t, point });
                }
            }
        }
        Ok(best)
    }

    /// Split the curve into Bézier pieces by raising every interior knot to
    /// full multiplicity (Boehm insertion).
    fn bezier_decomposition(&self) -> Vec<BezierPiece> {
        let p = self.degree;
        let mut cps = self.control_points.clone();
        let mut knots = self.knots.clone();
        let (lo, hi) = self.domain();
        let mut breaks: Vec<f64> = Vec::new();
        for &k in &self.knots[p + 1..self.control_points.len()] {
            if k > lo && k < hi && breaks.last() != Some(&k) {
                breaks.push(k);
            }
        }
        for &b in &breaks {
            let mult = knots.iter().filter(|&&k| k == b).count();
            for _ in mult..p {
                insert_knot(p, &mut cps, &mut knots, b);
            }
        }
        let mut edges = vec![lo];
        edges.extend(breaks);
        edges.push(hi);
        edges
            .windows(2)
            .enumerate()
            .map(|(i, w)| BezierPiece { t0: w[0], t1: w[1], control_points: cps[i * p..=i * p + p].to_vec() })
            .collect()
    }
}

pub(crate) fn clamped_uniform_knots(degree: usize, n_control: usize) -> Vec<f64> {
    let interior = n_control.saturating_sub(degree + 1);
    let mut knots = vec![0.0; degree + 1];
    for i in 1..=interior {
        knots.push(i as f64 / (interior + 1) as f64);
    }
    knots.extend(std::iter::repeat_n(1.0, degree + 1));
    knots
}

/// Index `k` with `knots[k] <= t < knots[k + 1]`, clamped to the last
/// non-empty span at the right end of the domain.
fn find_span(degree: usize, n_control: usize, knots: &[f64], t: f64) -> usize {
    if t >= knots[n_control] {
        let mut k = n_control - 1;
        while k > degree && knots[k] >= knots[k + 1] {
            k -= 1;
        }
        return k;
    }
    if t <= knots[degree] {
        let mut k = degree;
        while knots[k + 1] <= t {
            k += 1;
        }
        return k;
    }
    // Largest k in [degree, n-1] with knots[k] <= t.
    let (mut lo, mut hi) = (degree, n_control);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if knots[mid] <= t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn de_boor(degree: usize, cps: &[Point2], knots: &[f64], t: f64) -> Point2 {
    if degree == 0 {
        let k = find_span(0, cps.len(), knots, t);
        return cps[k];
    }
    let k = find_span(degree, cps.len(), knots, t);
    let mut d: Vec<Point2> = (0..=degree).map(|j| cps[j + k - degree]).collect();
    for r in 1..=degree {
        for j in (r..=degree).rev() {
            let i = j + k - degree;
            let denom = knots[i + degree + 1 - r] - knots[i];
            let alpha = if denom > 0.0 { (t - knots[i]) / denom } else { 0.0 };
            d[j] = d[j - 1] * (1.0 - alpha) + d[j] * alpha;
        }
    }
    d[degree]
}

fn derivative_polygon(degree: usize, cps: &[Point2], knots: &[f64]) -> (Vec<Point2>, Vec<f64>) {
    let p = degree as f64;
    let q: Vec<Point2> = (0..cps.len() - 1)
        .map(|i| {
            let denom = knots[i + degree + 1] - knots[i + 1];
            if denom > 0.0 {
                (cps[i + 1] - cps[i]) * (p / denom)
            } else {
                Point2::default()
            }
        })
        .collect();
    (q, knots[1..knots.len() - 1].to_vec())
}

fn insert_knot(degree: usize, cps: &mut Vec<Point2>, knots: &mut Vec<f64>, u: f64) {
    let k = find_span(degree, cps.len(), knots, u);
    let mut out = Vec::with_capacity(cps.len() + 1);
    for i in 0..=cps.len() {
        if i + degree <= k {
            out.push(cps[i]);
        } else if i > k {
            out.push(cps[i - 1]);
        } else {
            let denom = knots[i + degree] - knots[i];
            let a = if denom > 0.0 { (u - knots[i]) / denom } else { 0.0 };
            out.push(cps[i - 1] * (1.0 - a) + cps[i] * a);
        }
    }
    knots.insert(k + 1, u);
    *cps = out;
}

// 7-point Gauss–Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 7] = [
    0.0,
    0.405_845_151_377_397_2,
    -0.405_845_151_377_397_2,
    0.741_531_185_599_394_4,
    -0.741_531_185_599_394_4,
    0.949_107_912_342_758_5,
    -0.949_107_912_342_758_5,
];
const GL_WEIGHTS: [f64; 7] = [
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_9,
    0.381_830_050_505_118_9,
    0.279_705_391_489_276_7,
    0.279_705_391_489_276_7,
    0.129_484_966_168_869_7,
    0.129_484_966_168_869_7,
];

fn gauss7(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GL_NODES.iter().zip(GL_WEIGHTS).map(|(&x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

fn adaptive_gauss(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let whole = gauss7(f, a, b);
    let m = 0.5 * (a + b);
    let split = gauss7(f, a, m) + gauss7(f, m, b);
    if (whole - split).abs() <= tol || depth >= 40 {
        split
    } else {
        adaptive_gauss(f, a, m, 0.5 * tol, depth + 1) + adaptive_gauss(f, m, b, 0.5 * tol, depth + 1)
    }
}

/// Parameter intervals (in the piece's local [0, 1]) of flat sub-pieces
/// that the ray line crosses.
fn subdivide(
    local: &[(f64, f64)],
    u0: f64,
    u1: f64,
    depth: usize,
    best_t: f64,
    out: &mut Vec<(f64, f64)>,
) -> Result<(), GeometryError> {
    let (mut dmin, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut smin, mut smax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(s, d) in local {
        dmin = dmin.min(d);
        dmax = dmax.max(d);
        smin = smin.min(s);
        smax = smax.max(s);
    }
    // Convex hull misses the ray line, lies behind the origin, or lies
    // beyond the best hit found so far.
    if dmin > 0.0 || dmax < 0.0 || smax <= MIN_RAY_T || smin >= best_t {
        return Ok(());
    }
    if !(dmin.is_finite() && dmax.is_finite()) {
        return Err(GeometryError::Degenerate("non-finite control polygon".into()));
    }
    if is_flat(local) {
        out.push((u0, u1));
        return Ok(());
    }
    if depth >= MAX_SUBDIVISION_DEPTH {
        return Err(GeometryError::Degenerate(format!(
            "spline intersection exceeded subdivision depth {MAX_SUBDIVISION_DEPTH}"
        )));
    }
    let (left, right) = split_half(local);
    let um = 0.5 * (u0 + u1);
    subdivide(&left, u0, um, depth + 1, best_t, out)?;
    subdivide(&right, um, u1, depth + 1, best_t, out)
}

/// Control polygon within 1e-7 mm of its chord.
fn is_flat(local: &[(f64, f64)]) -> bool {
    let (a, b) = (local[0], local[local.len() - 1]);
    let (cx, cy) = (b.0 - a.0, b.1 - a.1);
    let len = cx.hypot(cy);
    local[1..local.len() - 1].iter().all(|&(s, d)| {
        let (vx, vy) = (s - a.0, d - a.1);
        let dev = if len > 0.0 { (cx * vy - cy * vx).abs() / len } else { vx.hypot(vy) };
        dev <= 1e-7
    })
}

/// Control polygon of a ray-local Bézier piece, as (along, across) pairs.
type LocalPolygon = Vec<(f64, f64)>;

fn split_half(cps: &[(f64, f64)]) -> (LocalPolygon, LocalPolygon) {
    let n = cps.len();
    let mut work = cps.to_vec();
    let mut left = Vec::with_capacity(n);
    let mut right = vec![(0.0, 0.0); n];
    left.push(work[0]);
    right[n - 1] = work[n - 1];
    for r in 1..n {
        for j in 0..n - r {
            work[j] = (0.5 * (work[j].0 + work[j + 1].0), 0.5 * (work[j].1 + work[j + 1].1));
        }
        left.push(work[0]);
        right[n - 1 - r] = work[n - 1 - r];
    }
    (left, right)
}

fn de_casteljau(cps: &[Point2], u: f64) -> Point2 {
    let mut work = cps.to_vec();
    let n = work.len();
    for r in 1..n {
        for j in 0..n - r {
            work[j] = work[j].lerp(work[j + 1], u);
        }
    }
    work[0]
}

/// Bracketed root of the signed ray offset on `[u0, u1]` (Illinois method).
fn refine_root(cps: &[Point2], ray: &Ray, u0: f64, u1: f64) -> Option<f64> {
    let f = |u: f64| ray.local(de_casteljau(cps, u)).1;
    let (mut a, mut b) = (u0, u1);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        // Flat piece touching the line without crossing it: accept only a
        // genuine graze.
        let m = 0.5 * (a + b);
        return (f(m).abs() < INTERSECT_TOL).then_some(m);
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c > a && c < b { c } else { 0.5 * (a + b) };
        let fc = f(c);
        if fc.abs() < 1e-13 || (b - a) < 1e-16 {
            return Some(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    let c = 0.5 * (a + b);
    (f(c).abs() < INTERSECT_TOL).then_some(c)
}
