use nalgebra::Point3;

/// Capsule in world coordinates: a segment swept by a sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Capsule {
    pub a: Point3<f64>,
    pub b: Point3<f64>,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Point3<f64>, b: Point3<f64>, radius: f64) -> Self {
        Capsule { a, b, radius }
    }

    fn key(&self) -> [f64; 7] {
        [self.a.x, self.a.y, self.a.z, self.b.x, self.b.y, self.b.z, self.radius]
    }
}

/// Signed surface distance between two capsules; negative when they overlap.
///
/// The arguments are put in a canonical order first so that
/// `capsule_distance(a, b) == capsule_distance(b, a)` bit for bit.
pub fn capsule_distance(a: &Capsule, b: &Capsule) -> f64 {
    let (first, second) = if a.key().partial_cmp(&b.key()) == Some(std::cmp::Ordering::Greater) {
        (b, a)
    } else {
        (a, b)
    };
    let (s, t) = closest_points_between_segments(&first.a, &first.b, &second.a, &second.b);
    let p = first.a + (first.b - first.a) * s;
    let q = second.a + (second.b - second.a) * t;
    (p - q).norm() - first.radius - second.radius
}

/// Parameters `(s, t)` in `[0, 1]` of the closest points on segments
/// `p1 p2` and `q1 q2`.
pub fn closest_points_between_segments(
    p1: &Point3<f64>,
    p2: &Point3<f64>,
    q1: &Point3<f64>,
    q2: &Point3<f64>,
) -> (f64, f64) {
    const EPS: f64 = 1e-14;
    let d1 = p2 - p1;
    let d2 = q2 - q1;
    let r = p1 - q1;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);

    if a <= EPS && e <= EPS {
        return (0.0, 0.0);
    }
    if a <= EPS {
        return (0.0, (f / e).clamp(0.0, 1.0));
    }
    let c = d1.dot(&r);
    if e <= EPS {
        return ((-c / a).clamp(0.0, 1.0), 0.0);
    }

    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    // Parallel segments: any s works, pick 0 and let the clamps below fix t.
    let mut s = if denom > EPS * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    (s, t)
}
