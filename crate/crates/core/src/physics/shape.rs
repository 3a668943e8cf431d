use serde::{Deserialize, Serialize};

use crate::math::{Aabb, Transform, Vec2};
use crate::physics::PhysicsError;

/// Geometry of a body in its local frame. Polygons are centred on their
/// centroid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Circle {
        radius: f64,
    },
    Box {
        half_w: f64,
        half_h: f64,
    },
    /// Counter-clockwise, centroid at the origin.
    Triangle {
        vertices: [Vec2; 3],
    },
}

/// Up to four vertices with outward edge normals, counter-clockwise.
#[derive(Clone, Copy, Debug)]
pub struct Polygon {
    pub vertices: [Vec2; 4],
    pub normals: [Vec2; 4],
    pub count: usize,
}

impl Polygon {
    fn from_vertices(vs: &[Vec2]) -> Polygon {
        let mut vertices = [Vec2::ZERO; 4];
        let mut normals = [Vec2::ZERO; 4];
        let count = vs.len();
        for i in 0..count {
            vertices[i] = vs[i];
        }
        for i in 0..count {
            let e = vs[(i + 1) % count] - vs[i];
            normals[i] = Vec2::new(e.y, -e.x).normalized();
        }
        Polygon { vertices, normals, count }
    }

    pub fn verts(&self) -> &[Vec2] {
        &self.vertices[..self.count]
    }

    pub fn transformed(&self, xf: &Transform) -> Polygon {
        let mut out = *self;
        for i in 0..self.count {
            out.vertices[i] = xf.apply(self.vertices[i]);
            out.normals[i] = xf.q.apply(self.normals[i]);
        }
        out
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (0..self.count).all(|i| self.normals[i].dot(p - self.vertices[i]) <= 0.0)
    }
}

fn signed_area(vs: &[Vec2; 3]) -> f64 {
    0.5 * (vs[1] - vs[0]).cross(vs[2] - vs[0])
}

impl Shape {
    pub fn circle(radius: f64) -> Result<Shape, PhysicsError> {
        if radius.is_finite() && radius > 0.0 {
            Ok(Shape::Circle { radius })
        } else {
            Err(PhysicsError::InvalidShape("circle radius must be positive"))
        }
    }

    pub fn rect(half_w: f64, half_h: f64) -> Result<Shape, PhysicsError> {
        if half_w.is_finite() && half_h.is_finite() && half_w > 0.0 && half_h > 0.0 {
            Ok(Shape::Box { half_w, half_h })
        } else {
            Err(PhysicsError::InvalidShape("box half extents must be positive"))
        }
    }

    /// Builds a triangle from world-space vertices in any winding. Returns the
    /// shape (re-centred) and the centroid where the body must be placed.
    pub fn triangle(vertices: [Vec2; 3]) -> Result<(Shape, Vec2), PhysicsError> {
        let mut vs = vertices;
        let area = signed_area(&vs);
        if !(area.abs() > 1e-9) {
            return Err(PhysicsError::InvalidShape("degenerate triangle"));
        }
        if area < 0.0 {
            vs.swap(1, 2);
        }
        let c = (vs[0] + vs[1] + vs[2]) / 3.0;
        Ok((Shape::Triangle { vertices: [vs[0] - c, vs[1] - c, vs[2] - c] }, c))
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        match *self {
            Shape::Circle { radius } => Shape::circle(radius).map(|_| ()),
            Shape::Box { half_w, half_h } => Shape::rect(half_w, half_h).map(|_| ()),
            Shape::Triangle { vertices } => {
                let a = signed_area(&vertices);
                if a > 1e-9 {
                    Ok(())
                } else {
                    Err(PhysicsError::InvalidShape("triangle must be counter-clockwise and non-degenerate"))
                }
            }
        }
    }

    pub fn is_round(&self) -> bool {
        matches!(self, Shape::Circle { .. })
    }

    pub fn area(&self) -> f64 {
        match *self {
            Shape::Circle { radius } => core::f64::consts::PI * radius * radius,
            Shape::Box { half_w, half_h } => 4.0 * half_w * half_h,
            Shape::Triangle { vertices } => signed_area(&vertices).abs(),
        }
    }

    /// Mass and rotational inertia about the centroid.
    pub fn mass_properties(&self, density: f64) -> (f64, f64) {
        let m = density * self.area();
        let i = match *self {
            Shape::Circle { radius } => 0.5 * m * radius * radius,
            Shape::Box { half_w, half_h } => m * (4.0 * half_w * half_w + 4.0 * half_h * half_h) / 12.0,
            Shape::Triangle { vertices } => {
                // Polar moment about the centroid: m/36 * sum of squared edge lengths.
                let [a, b, c] = vertices;
                let sum = (b - a).length_squared() + (c - b).length_squared() + (a - c).length_squared();
                m * sum / 36.0
            }
        };
        (m, i)
    }

    /// Polygon view in the local frame; `None` for circles.
    pub fn polygon(&self) -> Option<Polygon> {
        match *self {
            Shape::Circle { .. } => None,
            Shape::Box { half_w, half_h } => Some(Polygon::from_vertices(&[
                Vec2::new(-half_w, -half_h),
                Vec2::new(half_w, -half_h),
                Vec2::new(half_w, half_h),
                Vec2::new(-half_w, half_h),
            ])),
            Shape::Triangle { vertices } => Some(Polygon::from_vertices(&vertices)),
        }
    }

    /// Largest distance from the centroid to the boundary.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Circle { radius } => radius,
            Shape::Box { half_w, half_h } => Vec2::new(half_w, half_h).length(),
            Shape::Triangle { vertices } => vertices.iter().map(|v| v.length()).fold(0.0, f64::max),
        }
    }

    pub fn aabb(&self, xf: &Transform) -> Aabb {
        match self.polygon() {
            None => {
                let r = self.bounding_radius();
                Aabb::new(xf.p - Vec2::new(r, r), xf.p + Vec2::new(r, r))
            }
            Some(poly) => {
                let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
                let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
                for v in poly.verts() {
                    let w = xf.apply(*v);
                    min = Vec2::new(min.x.min(w.x), min.y.min(w.y));
                    max = Vec2::new(max.x.max(w.x), max.y.max(w.y));
                }
                Aabb::new(min, max)
            }
        }
    }

    /// Point containment in world space.
    pub fn contains(&self, xf: &Transform, p: Vec2) -> bool {
        match *self {
            Shape::Circle { radius } => (p - xf.p).length_squared() <= radius * radius,
            _ => self.polygon().map(|poly| poly.contains(xf.apply_inv(p))).unwrap_or(false),
        }
    }

    /// Distance from `p` to the shape (zero inside).
    pub fn distance(&self, xf: &Transform, p: Vec2) -> f64 {
        match *self {
            Shape::Circle { radius } => ((p - xf.p).length() - radius).max(0.0),
            _ => {
                let poly = self.polygon().expect("polygonal shape");
                let local = xf.apply_inv(p);
                if poly.contains(local) {
                    return 0.0;
                }
                let vs = poly.verts();
                let mut best = f64::INFINITY;
                for i in 0..vs.len() {
                    let a = vs[i];
                    let b = vs[(i + 1) % vs.len()];
                    best = best.min(segment_distance(local, a, b));
                }
                best
            }
        }
    }

    /// World-space outline: polygon vertices, or `segments` points around a circle.
    pub fn outline(&self, xf: &Transform, segments: usize) -> alloc::vec::Vec<Vec2> {
        match *self {
            Shape::Circle { radius } => (0..segments)
                .map(|k| {
                    let a = core::f64::consts::TAU * k as f64 / segments as f64;
                    xf.apply(Vec2::from_angle(a) * radius)
                })
                .collect(),
            _ => self.polygon().map(|p| p.verts().iter().map(|v| xf.apply(*v)).collect()).unwrap_or_default(),
        }
    }
}

pub fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.length_squared();
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).length()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_shapes() {
        assert!(Shape::circle(0.0).is_err());
        assert!(Shape::rect(1.0, -1.0).is_err());
        assert!(Shape::triangle([Vec2::ZERO, Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)]).is_err());
    }

    #[test]
    fn triangle_is_recentred_and_ccw() {
        let (s, c) = Shape::triangle([Vec2::new(0.0, 0.0), Vec2::new(0.0, 3.0), Vec2::new(3.0, 0.0)]).unwrap();
        assert!((c - Vec2::new(1.0, 1.0)).length() < 1e-12);
        s.validate().unwrap();
        assert!((s.area() - 4.5).abs() < 1e-12);
    }

    #[test]
    fn triangle_inertia_matches_polygon_integral() {
        // Right triangle legs 3: I about centroid = m (a^2 + b^2) / 18 for legs a, b.
        let (s, _) = Shape::triangle([Vec2::new(0.0, 0.0), Vec2::new(3.0, 0.0), Vec2::new(0.0, 3.0)]).unwrap();
        let (m, i) = s.mass_properties(1.0);
        assert!((i - m * 18.0 / 18.0).abs() < 1e-9, "{i} vs {m}");
    }

    #[test]
    fn box_contains_and_distance() {
        let s = Shape::rect(1.0, 0.5).unwrap();
        let xf = Transform::new(Vec2::new(2.0, 0.0), 0.0);
        assert!(s.contains(&xf, Vec2::new(2.9, 0.4)));
        assert!(!s.contains(&xf, Vec2::new(3.1, 0.0)));
        assert!((s.distance(&xf, Vec2::new(4.0, 0.0)) - 1.0).abs() < 1e-12);
    }
}
