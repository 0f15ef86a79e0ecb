use super::Dir2;

/// Outcome of Snell refraction at an interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Refraction {
    Transmitted(Dir2),
    TotalInternalReflection,
}

/// Mirror `incoming` about the line with unit normal `normal`: d − 2(d·n)n.
pub fn reflect(incoming: Dir2, normal: Dir2) -> Dir2 {
    let d = incoming.as_vec();
    let n = normal.as_vec();
    Dir2::from_vec(d - n * (2.0 * d.dot(n))).expect("reflection of a unit vector is unit")
}

/// Vector Snell's law. `normal` may face either side of the interface.
pub fn refract(incoming: Dir2, normal: Dir2, n_from: f64, n_to: f64) -> Refraction {
    debug_assert!(n_from >= 1.0 && n_to >= 1.0);
    // Orient the normal against the incoming ray.
    let n = if incoming.dot(normal) > 0.0 { -normal } else { normal };
    let cos_i = -incoming.dot(n);
    let eta = n_from / n_to;
    let k = 1.0 - eta * eta * (1.0 - cos_i * cos_i);
    if k < 0.0 {
        return Refraction::TotalInternalReflection;
    }
    let t = incoming.as_vec() * eta + n.as_vec() * (eta * cos_i - k.sqrt());
    Refraction::Transmitted(Dir2::from_vec(t).expect("refracted direction is non-zero"))
}
