//! Planar geometry kernel: vectors, rigid poses and the convex shape family
//! used for object footprints (circles, convex polygons and unions of them).
//!
//! All quantities are in meters and radians, double precision. Boundary
//! membership uses a fixed tolerance of [`BOUNDARY_TOL`].

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Tolerance for "on the boundary" decisions and unit-norm checks.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn normalize_angle(angle: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut a = (angle + PI).rem_euclid(two_pi) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if a >= PI {
        a -= two_pi;
    }
    a
}

/// Rigid planar pose. The yaw is kept normalized into `[-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2 {
    position: Vec2,
    yaw: f64,
}

impl Pose2 {
    pub fn new(position: Vec2, yaw: f64) -> Self {
        Self {
            position,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn position(&self) -> Vec2 {
        self.position
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    /// Local point to world.
    pub fn transform_point(&self, p: Vec2) -> Vec2 {
        self.position + p.rotated(self.yaw)
    }

    pub fn transform_vector(&self, v: Vec2) -> Vec2 {
        v.rotated(self.yaw)
    }

    /// World point to local.
    pub fn inverse_transform_point(&self, p: Vec2) -> Vec2 {
        (p - self.position).rotated(-self.yaw)
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        Pose2::new(self.transform_point(other.position), self.yaw + other.yaw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub contact_point: Vec2,
    pub outward_normal: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub min: f64,
    pub max: f64,
}

impl Extent {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    fn merge(self, other: Extent) -> Extent {
        Extent {
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

/// Strictly convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
}

impl ConvexPolygon {
    /// Validates vertex count, finiteness, CCW order and strict convexity.
    /// Collinear runs are rejected rather than repaired.
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::invalid(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("polygon vertex is not finite"));
        }
        let n = vertices.len();
        let scale = vertices
            .iter()
            .map(|v| v.x.abs().max(v.y.abs()))
            .fold(1e-3, f64::max);
        let tol = 1e-12 * scale * scale;
        let mut turn_sum = 0.0;
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let turn = (b - a).cross(c - b);
            if turn <= tol {
                return Err(Error::invalid(format!(
                    "polygon is not strictly convex counter-clockwise at vertex {}",
                    (i + 1) % n
                )));
            }
            let ab = b - a;
            let bc = c - b;
            turn_sum += ab.cross(bc).atan2(ab.dot(bc));
        }
        // A star polygon turns left everywhere but winds more than once.
        if (turn_sum - 2.0 * PI).abs() > 1e-6 {
            return Err(Error::invalid("polygon winds more than once"));
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle of size `w × h` centred on `center`, rotated by `angle`.
    pub fn rectangle(center: Vec2, w: f64, h: f64, angle: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) {
            return Err(Error::invalid("rectangle sides must be positive"));
        }
        let (hw, hh) = (w / 2.0, h / 2.0);
        let corners = [
            Vec2::new(-hw, -hh),
            Vec2::new(hw, -hh),
            Vec2::new(hw, hh),
            Vec2::new(-hw, hh),
        ];
        Self::new(corners.iter().map(|c| center + c.rotated(angle)).collect())
    }

    /// Rectangle with corners replaced by quarter-circle arcs of `radius`,
    /// each approximated by `segments` chords.
    pub fn rounded_rectangle(
        center: Vec2,
        w: f64,
        h: f64,
        radius: f64,
        segments: usize,
    ) -> Result<Self> {
        if !(radius > 0.0) || 2.0 * radius >= w.min(h) || segments == 0 {
            return Err(Error::invalid(
                "rounded rectangle radius must be positive and below half the short side",
            ));
        }
        let (hw, hh) = (w / 2.0 - radius, h / 2.0 - radius);
        let corner_centres = [
            (Vec2::new(hw, -hh), -PI / 2.0),
            (Vec2::new(hw, hh), 0.0),
            (Vec2::new(-hw, hh), PI / 2.0),
            (Vec2::new(-hw, -hh), PI),
        ];
        let mut vertices = Vec::with_capacity(4 * (segments + 1));
        for (c, start) in corner_centres {
            for k in 0..=segments {
                let a = start + (PI / 2.0) * k as f64 / segments as f64;
                vertices.push(center + c + Vec2::from_angle(a) * radius);
            }
        }
        Self::new(vertices)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    fn outward_normal(a: Vec2, b: Vec2) -> Vec2 {
        let e = b - a;
        Vec2::new(e.y, -e.x).normalized()
    }

    pub fn area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    fn contains(&self, p: Vec2) -> bool {
        self.edges().all(|(a, b)| {
            let n = Self::outward_normal(a, b);
            n.dot(p - a) <= BOUNDARY_TOL
        })
    }

    /// Cyrus–Beck clipping of the ray against the edge half-planes.
    fn ray_cast(&self, origin: Vec2, dir: Vec2) -> Option<RayHit> {
        let mut t_enter = f64::NEG_INFINITY;
        let mut t_exit = f64::INFINITY;
        let mut enter_normal = None;
        for (a, b) in self.edges() {
            let n = Self::outward_normal(a, b);
            let dist = n.dot(origin - a);
            let rate = n.dot(dir);
            if rate.abs() < 1e-15 {
                if dist > 0.0 {
                    return None;
                }
                continue;
            }
            let t = -dist / rate;
            if rate < 0.0 {
                if t > t_enter {
                    t_enter = t;
                    enter_normal = Some(n);
                }
            } else if t < t_exit {
                t_exit = t;
            }
        }
        let normal = enter_normal?;
        if t_enter > t_exit || t_enter < 0.0 {
            return None;
        }
        Some(RayHit {
            t: t_enter,
            contact_point: origin + dir * t_enter,
            outward_normal: normal,
        })
    }

    fn extent(&self, dir: Vec2) -> Extent {
        let mut e = Extent {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        for v in &self.vertices {
            let d = v.dot(dir);
            e.min = e.min.min(d);
            e.max = e.max.max(d);
        }
        e
    }

    fn distance_to_point(&self, p: Vec2) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        self.edges()
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    fn separated_along_own_normals(&self, other: &ConvexPolygon) -> bool {
        self.edges().any(|(a, b)| {
            let n = Self::outward_normal(a, b);
            let mine = self.extent(n);
            let theirs = other.extent(n);
            theirs.min > mine.max + BOUNDARY_TOL || theirs.max < mine.min - BOUNDARY_TOL
        })
    }

    fn intersects(&self, other: &ConvexPolygon) -> bool {
        !self.separated_along_own_normals(other) && !other.separated_along_own_normals(self)
    }
}

fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let s = if len2 > 0.0 {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(a + ab * s)
}

/// Object footprint. Non-convex outlines are unions of convex parts.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Circle { center: Vec2, radius: f64 },
    ConvexPolygon(ConvexPolygon),
    Union(Vec<Shape>),
}

impl Shape {
    pub fn circle(center: Vec2, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() || !center.is_finite() {
            return Err(Error::invalid(format!(
                "circle radius must be positive, got {radius}"
            )));
        }
        Ok(Shape::Circle { center, radius })
    }

    pub fn polygon(vertices: Vec<Vec2>) -> Result<Self> {
        ConvexPolygon::new(vertices).map(Shape::ConvexPolygon)
    }

    pub fn rectangle(center: Vec2, w: f64, h: f64, angle: f64) -> Result<Self> {
        ConvexPolygon::rectangle(center, w, h, angle).map(Shape::ConvexPolygon)
    }

    pub fn union(parts: Vec<Shape>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::invalid("union needs at least one part"));
        }
        Ok(Shape::Union(parts))
    }

    /// Visits every convex leaf.
    fn for_each_part<'a>(&'a self, f: &mut dyn FnMut(&'a Shape)) {
        match self {
            Shape::Union(parts) => parts.iter().for_each(|p| p.for_each_part(f)),
            leaf => f(leaf),
        }
    }

    fn parts(&self) -> Vec<&Shape> {
        let mut out = Vec::new();
        self.for_each_part(&mut |p| out.push(p));
        out
    }

    /// Nearest entry point of the ray `origin + t·direction`, `t ≥ 0`.
    ///
    /// A convex part that already contains `origin` reports no entry.
    pub fn ray_cast(&self, origin: Vec2, direction: Vec2) -> Result<Option<RayHit>> {
        if (direction.norm() - 1.0).abs() > BOUNDARY_TOL || !origin.is_finite() {
            return Err(Error::invalid(format!(
                "ray direction must have unit norm, got {}",
                direction.norm()
            )));
        }
        Ok(self.ray_cast_unchecked(origin, direction))
    }

    fn ray_cast_unchecked(&self, origin: Vec2, dir: Vec2) -> Option<RayHit> {
        match self {
            Shape::Circle { center, radius } => {
                let oc = origin - *center;
                let b = oc.dot(dir);
                let c = oc.norm_squared() - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let t = -b - disc.sqrt();
                if t < 0.0 {
                    return None;
                }
                let point = origin + dir * t;
                Some(RayHit {
                    t,
                    contact_point: point,
                    outward_normal: (point - *center).normalized(),
                })
            }
            Shape::ConvexPolygon(poly) => poly.ray_cast(origin, dir),
            Shape::Union(parts) => parts
                .iter()
                .filter_map(|p| p.ray_cast_unchecked(origin, dir))
                .min_by(|a, b| a.t.total_cmp(&b.t)),
        }
    }

    /// Range of `dot(p, direction)` over the shape.
    pub fn extent(&self, direction: Vec2) -> Extent {
        match self {
            Shape::Circle { center, radius } => {
                let c = center.dot(direction);
                Extent {
                    min: c - radius,
                    max: c + radius,
                }
            }
            Shape::ConvexPolygon(poly) => poly.extent(direction),
            Shape::Union(parts) => parts
                .iter()
                .map(|p| p.extent(direction))
                .reduce(Extent::merge)
                .expect("union is non-empty"),
        }
    }

    pub fn contains(&self, point: Vec2) -> bool {
        match self {
            Shape::Circle { center, radius } => point.distance(*center) <= radius + BOUNDARY_TOL,
            Shape::ConvexPolygon(poly) => poly.contains(point),
            Shape::Union(parts) => parts.iter().any(|p| p.contains(point)),
        }
    }

    /// Euclidean distance from `point` to the shape; zero inside.
    pub fn distance_to_point(&self, point: Vec2) -> f64 {
        match self {
            Shape::Circle { center, radius } => (point.distance(*center) - radius).max(0.0),
            Shape::ConvexPolygon(poly) => poly.distance_to_point(point),
            Shape::Union(parts) => parts
                .iter()
                .map(|p| p.distance_to_point(point))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Boundary-to-boundary clearance between two shapes; zero when they touch or overlap.
    pub fn distance(&self, other: &Shape) -> f64 {
        let mine = self.parts();
        let theirs = other.parts();
        let mut best = f64::INFINITY;
        for a in &mine {
            for b in &theirs {
                best = best.min(leaf_distance(a, b));
                if best == 0.0 {
                    return 0.0;
                }
            }
        }
        best
    }

    pub fn intersects(&self, other: &Shape) -> bool {
        self.distance(other) <= BOUNDARY_TOL
    }

    /// Sum of part areas. Unions are assumed to have non-overlapping parts.
    pub fn area(&self) -> f64 {
        match self {
            Shape::Circle { radius, .. } => PI * radius * radius,
            Shape::ConvexPolygon(poly) => poly.area(),
            Shape::Union(parts) => parts.iter().map(Shape::area).sum(),
        }
    }

    /// Largest distance from `reference` to any point of the shape.
    pub fn bounding_radius(&self, reference: Vec2) -> f64 {
        match self {
            Shape::Circle { center, radius } => center.distance(reference) + radius,
            Shape::ConvexPolygon(poly) => poly
                .vertices()
                .iter()
                .map(|v| v.distance(reference))
                .fold(0.0, f64::max),
            Shape::Union(parts) => parts
                .iter()
                .map(|p| p.bounding_radius(reference))
                .fold(0.0, f64::max),
        }
    }

    pub fn aabb(&self) -> Aabb {
        let x = self.extent(Vec2::new(1.0, 0.0));
        let y = self.extent(Vec2::new(0.0, 1.0));
        Aabb {
            min: Vec2::new(x.min, y.min),
            max: Vec2::new(x.max, y.max),
        }
    }

    /// The shape moved from its local frame into the frame given by `pose`.
    pub fn transformed(&self, pose: &Pose2) -> Shape {
        match self {
            Shape::Circle { center, radius } => Shape::Circle {
                center: pose.transform_point(*center),
                radius: *radius,
            },
            Shape::ConvexPolygon(poly) => Shape::ConvexPolygon(ConvexPolygon {
                vertices: poly
                    .vertices
                    .iter()
                    .map(|v| pose.transform_point(*v))
                    .collect(),
            }),
            Shape::Union(parts) => {
                Shape::Union(parts.iter().map(|p| p.transformed(pose)).collect())
            }
        }
    }

    pub fn translated(&self, offset: Vec2) -> Shape {
        self.transformed(&Pose2::new(offset, 0.0))
    }
}

fn leaf_distance(a: &Shape, b: &Shape) -> f64 {
    match (a, b) {
        (
            Shape::Circle {
                center: c1,
                radius: r1,
            },
            Shape::Circle {
                center: c2,
                radius: r2,
            },
        ) => (c1.distance(*c2) - r1 - r2).max(0.0),
        (Shape::Circle { center, radius }, Shape::ConvexPolygon(p))
        | (Shape::ConvexPolygon(p), Shape::Circle { center, radius }) => {
            (p.distance_to_point(*center) - radius).max(0.0)
        }
        (Shape::ConvexPolygon(p), Shape::ConvexPolygon(q)) => {
            if p.intersects(q) {
                return 0.0;
            }
            let one_way = |p: &ConvexPolygon, q: &ConvexPolygon| {
                p.vertices
                    .iter()
                    .map(|v| {
                        q.edges()
                            .map(|(a, b)| segment_distance(*v, a, b))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .fold(f64::INFINITY, f64::min)
            };
            one_way(p, q).min(one_way(q, p))
        }
        _ => unreachable!("leaf_distance called with a union"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit_square() -> Shape {
        Shape::rectangle(Vec2::ZERO, 2.0, 2.0, 0.0).unwrap()
    }

    #[test]
    fn ray_hits_circle_face_on() {
        let c = Shape::circle(Vec2::ZERO, 1.0).unwrap();
        let hit = c
            .ray_cast(Vec2::new(-3.0, 0.0), Vec2::new(1.0, 0.0))
            .unwrap()
            .unwrap();
        assert_abs_diff_eq!(hit.t, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hit.contact_point.x, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hit.outward_normal.x, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hit.outward_normal.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ray_hits_square_face() {
        let hit = unit_square()
            .ray_cast(Vec2::new(0.0, -5.0), Vec2::new(0.0, 1.0))
            .unwrap()
            .unwrap();
        assert_abs_diff_eq!(hit.t, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hit.contact_point.y, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hit.outward_normal.y, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn ray_misses_circle() {
        let c = Shape::circle(Vec2::ZERO, 1.0).unwrap();
        assert!(c
            .ray_cast(Vec2::new(-3.0, 2.0), Vec2::new(1.0, 0.0))
            .unwrap()
            .is_none());
    }

    #[test]
    fn ray_rejects_non_unit_direction() {
        let c = Shape::circle(Vec2::ZERO, 1.0).unwrap();
        assert!(matches!(
            c.ray_cast(Vec2::ZERO, Vec2::new(2.0, 0.0)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn ray_behind_origin_is_not_reported() {
        let c = Shape::circle(Vec2::ZERO, 1.0).unwrap();
        assert!(c
            .ray_cast(Vec2::new(3.0, 0.0), Vec2::new(1.0, 0.0))
            .unwrap()
            .is_none());
    }

    #[test]
    fn union_ray_takes_nearest_part() {
        let u = Shape::union(vec![
            Shape::circle(Vec2::new(3.0, 0.0), 1.0).unwrap(),
            Shape::circle(Vec2::ZERO, 1.0).unwrap(),
        ])
        .unwrap();
        let hit = u
            .ray_cast(Vec2::new(-5.0, 0.0), Vec2::new(1.0, 0.0))
            .unwrap()
            .unwrap();
        assert_abs_diff_eq!(hit.t, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn extents() {
        let c = Shape::circle(Vec2::new(1.0, 0.0), 0.5).unwrap();
        let e = c.extent(Vec2::new(1.0, 0.0));
        assert_abs_diff_eq!(e.min, 0.5);
        assert_abs_diff_eq!(e.max, 1.5);

        let d = Vec2::from_angle(PI / 4.0);
        let e = unit_square().extent(d);
        assert_abs_diff_eq!(e.min, -2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(e.max, 2f64.sqrt(), epsilon = 1e-12);

        let u = Shape::union(vec![
            Shape::circle(Vec2::ZERO, 1.0).unwrap(),
            Shape::circle(Vec2::new(3.0, 0.0), 1.0).unwrap(),
        ])
        .unwrap();
        let e = u.extent(Vec2::new(1.0, 0.0));
        assert_abs_diff_eq!(e.min, -1.0);
        assert_abs_diff_eq!(e.max, 4.0);
    }

    #[test]
    fn containment() {
        let c = Shape::circle(Vec2::ZERO, 1.0).unwrap();
        assert!(c.contains(Vec2::new(0.5, 0.0)));
        assert!(c.contains(Vec2::new(1.0, 0.0)));
        assert!(!unit_square().contains(Vec2::new(2.0, 0.0)));
        assert!(unit_square().contains(Vec2::new(1.0, 1.0)));
    }

    #[test]
    fn degenerate_shapes_are_rejected() {
        assert!(Shape::circle(Vec2::ZERO, 0.0).is_err());
        assert!(Shape::polygon(vec![Vec2::ZERO, Vec2::new(1.0, 0.0)]).is_err());
        // collinear middle vertex
        assert!(Shape::polygon(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(1.0, 1.0),
        ])
        .is_err());
        // clockwise
        assert!(Shape::polygon(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 0.0),
        ])
        .is_err());
        assert!(Shape::union(vec![]).is_err());
    }

    #[test]
    fn shape_distances() {
        let a = Shape::circle(Vec2::ZERO, 1.0).unwrap();
        let b = Shape::circle(Vec2::new(3.0, 0.0), 1.0).unwrap();
        assert_abs_diff_eq!(a.distance(&b), 1.0, epsilon = 1e-12);
        let sq = Shape::rectangle(Vec2::new(4.0, 0.0), 2.0, 2.0, 0.0).unwrap();
        assert_abs_diff_eq!(a.distance(&sq), 2.0, epsilon = 1e-12);
        let sq2 = Shape::rectangle(Vec2::new(0.0, 3.5), 2.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(sq2.distance(&unit_square()), 2.0, epsilon = 1e-12);
        assert_eq!(unit_square().distance(&a), 0.0);
    }

    #[test]
    fn rounded_rectangle_is_convex_and_bounded() {
        let r = ConvexPolygon::rounded_rectangle(Vec2::ZERO, 0.1, 0.06, 0.01, 4).unwrap();
        let s = Shape::ConvexPolygon(r);
        let e = s.extent(Vec2::new(1.0, 0.0));
        assert_abs_diff_eq!(e.max, 0.05, epsilon = 1e-12);
        assert!(s.area() < 0.1 * 0.06);
    }

    #[test]
    fn normalize_angle_range() {
        assert_abs_diff_eq!(normalize_angle(PI), -PI);
        assert_abs_diff_eq!(normalize_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert!(normalize_angle(-1e-300) < PI);
    }

    fn random_convex_polygon() -> impl Strategy<Value = Shape> {
        (
            -1.0f64..1.0,
            -1.0f64..1.0,
            0.2f64..1.5,
            prop::collection::vec(0.0f64..1.0, 3..9),
        )
            .prop_map(|(cx, cy, r, fracs)| {
                // sorted angles on a circle give a strictly convex polygon
                let mut angles: Vec<f64> = fracs.iter().map(|f| f * 2.0 * PI).collect();
                angles.sort_by(f64::total_cmp);
                angles.dedup_by(|a, b| (*a - *b).abs() < 0.05);
                if angles.len() < 3 || 2.0 * PI - (angles[angles.len() - 1] - angles[0]) < 0.05 {
                    angles = vec![0.0, 2.0, 4.0];
                }
                let c = Vec2::new(cx, cy);
                Shape::polygon(angles.iter().map(|a| c + Vec2::from_angle(*a) * r).collect())
                    .unwrap()
            })
    }

    proptest! {
        #[test]
        fn ray_cast_returns_first_entry(
            shape in random_convex_polygon(),
            ox in -4.0f64..4.0, oy in -4.0f64..4.0,
            tx in -0.5f64..0.5, ty in -0.5f64..0.5,
        ) {
            let origin = Vec2::new(ox, oy);
            prop_assume!(!shape.contains(origin));
            let dir = (Vec2::new(tx, ty) - origin).normalized();
            if let Some(hit) = shape.ray_cast(origin, dir).unwrap() {
                prop_assert!(hit.t >= 0.0);
                prop_assert!((hit.outward_normal.norm() - 1.0).abs() < 1e-12);
                prop_assert!(shape.distance_to_point(hit.contact_point) < 1e-9);
                prop_assert!(!shape.contains(origin + dir * (hit.t - 1e-6)));
            }
        }

        #[test]
        fn extent_translation(
            shape in random_convex_polygon(),
            angle in 0.0f64..(2.0 * PI),
            along in -2.0f64..2.0,
            across in -2.0f64..2.0,
        ) {
            let d = Vec2::from_angle(angle);
            let base = shape.extent(d);
            let perp = shape.translated(d.perp() * across).extent(d);
            prop_assert!((perp.min - base.min).abs() < 1e-12);
            prop_assert!((perp.max - base.max).abs() < 1e-12);
            let moved = shape.translated(d * along).extent(d);
            prop_assert!((moved.min - base.min - along).abs() < 1e-12);
            prop_assert!((moved.max - base.max - along).abs() < 1e-12);
            prop_assert!(base.max >= base.min);
        }

        #[test]
        fn ray_distance_is_continuous(
            shape in random_convex_polygon(),
            offset in -0.2f64..0.2,
        ) {
            // a family of parallel rays aimed at the polygon's vertex centroid
            let vs = match &shape { Shape::ConvexPolygon(p) => p.vertices().to_vec(), _ => unreachable!() };
            let centroid = vs.iter().fold(Vec2::ZERO, |a, v| a + *v) * (1.0 / vs.len() as f64);
            let dir = Vec2::new(1.0, 0.0);
            let t_at = |dy: f64| shape
                .ray_cast(centroid + Vec2::new(-10.0, dy), dir)
                .unwrap()
                .map(|h| h.t);
            let h = 1e-7;
            if let (Some(a), Some(b)) = (t_at(offset * 0.1), t_at(offset * 0.1 + h)) {
                // bounded slope: a convex polygon edge never runs parallel to the ray
                // at an interior crossing, so small origin moves give small t moves
                prop_assert!((a - b).abs() < 1e-3);
            }
        }
    }
}
