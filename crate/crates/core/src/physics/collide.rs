//! Narrow-phase contact generation: closed form for circles, separating-axis
//! test plus reference-face clipping for polygon pairs.

use crate::math::{Transform, Vec2};
use crate::physics::shape::{Polygon, Shape};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ManifoldPoint {
    /// Deepest point of A's surface along the normal, world space.
    pub point_a: Vec2,
    /// Deepest point of B's surface along the normal, world space.
    pub point_b: Vec2,
    /// Negative when penetrating.
    pub separation: f64,
    /// Feature key, stable across ticks while the same features touch.
    pub id: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Manifold {
    /// Unit normal pointing from A towards B.
    pub normal: Vec2,
    pub points: [ManifoldPoint; 2],
    pub count: usize,
}

impl Manifold {
    pub fn points(&self) -> &[ManifoldPoint] {
        &self.points[..self.count]
    }

    fn flipped(mut self) -> Manifold {
        self.normal = -self.normal;
        for p in self.points[..self.count].iter_mut() {
            core::mem::swap(&mut p.point_a, &mut p.point_b);
            p.id |= 1 << 20;
        }
        self
    }

    fn sort(&mut self) {
        if self.count == 2 && self.points[1].id < self.points[0].id {
            self.points.swap(0, 1);
        }
    }
}

/// Contacts between two shapes, keeping features within `margin` of touching.
pub fn collide(sa: &Shape, xa: &Transform, sb: &Shape, xb: &Transform, margin: f64) -> Option<Manifold> {
    let mut m = match (sa.polygon(), sb.polygon()) {
        (None, None) => circles(radius(sa), xa.p, radius(sb), xb.p, margin),
        (Some(pa), None) => polygon_circle(&pa.transformed(xa), xb.p, radius(sb), margin),
        (None, Some(pb)) => polygon_circle(&pb.transformed(xb), xa.p, radius(sa), margin).map(Manifold::flipped),
        (Some(pa), Some(pb)) => polygons(&pa.transformed(xa), &pb.transformed(xb), margin),
    }?;
    m.sort();
    Some(m)
}

fn radius(s: &Shape) -> f64 {
    match *s {
        Shape::Circle { radius } => radius,
        _ => 0.0,
    }
}

fn circles(ra: f64, ca: Vec2, rb: f64, cb: Vec2, margin: f64) -> Option<Manifold> {
    let d = cb - ca;
    let dist = d.length();
    let separation = dist - ra - rb;
    if separation > margin {
        return None;
    }
    let normal = if dist > 1e-12 { d / dist } else { Vec2::new(0.0, 1.0) };
    let mut m = Manifold { normal, count: 1, ..Default::default() };
    m.points[0] = ManifoldPoint { point_a: ca + normal * ra, point_b: cb - normal * rb, separation, id: 0 };
    Some(m)
}

/// Polygon (already in world space) as A, circle as B.
fn polygon_circle(poly: &Polygon, center: Vec2, r: f64, margin: f64) -> Option<Manifold> {
    let vs = poly.verts();
    let n = vs.len();
    let mut face = 0;
    let mut s_max = f64::NEG_INFINITY;
    for i in 0..n {
        let s = poly.normals[i].dot(center - vs[i]);
        if s > s_max {
            s_max = s;
            face = i;
        }
    }
    if s_max > r + margin {
        return None;
    }
    let v1 = vs[face];
    let v2 = vs[(face + 1) % n];
    let face_normal = poly.normals[face];

    let (normal, point_a, separation, id) = if s_max < 1e-12 {
        (face_normal, center - face_normal * s_max, s_max - r, face as u32)
    } else {
        let u1 = (center - v1).dot(v2 - v1);
        let u2 = (center - v2).dot(v1 - v2);
        if u1 <= 0.0 || u2 <= 0.0 {
            let (v, vid) = if u1 <= 0.0 { (v1, face) } else { (v2, (face + 1) % n) };
            let d = center - v;
            let dist = d.length();
            if dist - r > margin {
                return None;
            }
            let normal = if dist > 1e-12 { d / dist } else { face_normal };
            (normal, v, dist - r, 16 + vid as u32)
        } else {
            (face_normal, center - face_normal * s_max, s_max - r, face as u32)
        }
    };
    let mut m = Manifold { normal, count: 1, ..Default::default() };
    m.points[0] = ManifoldPoint { point_a, point_b: center - normal * r, separation, id };
    Some(m)
}

fn max_separation(p1: &Polygon, p2: &Polygon) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..p1.count {
        let n = p1.normals[i];
        let v = p1.vertices[i];
        let s = p2.verts().iter().map(|w| n.dot(*w - v)).fold(f64::INFINITY, f64::min);
        if s > best.1 {
            best = (i, s);
        }
    }
    best
}

#[derive(Clone, Copy)]
struct ClipVertex {
    v: Vec2,
    id: u32,
}

/// Keeps the part of segment `vin` with `normal . p - offset <= 0`.
fn clip_segment(vin: [ClipVertex; 2], normal: Vec2, offset: f64, clip_id: u32) -> Option<[ClipVertex; 2]> {
    let d0 = normal.dot(vin[0].v) - offset;
    let d1 = normal.dot(vin[1].v) - offset;
    let mut out = [vin[0]; 2];
    let mut k = 0;
    if d0 <= 0.0 {
        out[k] = vin[0];
        k += 1;
    }
    if d1 <= 0.0 {
        out[k] = vin[1];
        k += 1;
    }
    if d0 * d1 < 0.0 {
        let t = d0 / (d0 - d1);
        out[k] = ClipVertex {
            v: vin[0].v + (vin[1].v - vin[0].v) * t,
            id: (if d0 > 0.0 { vin[0].id } else { vin[1].id }) | clip_id,
        };
        k += 1;
    }
    if k == 2 {
        Some(out)
    } else {
        None
    }
}

fn polygons(pa: &Polygon, pb: &Polygon, margin: f64) -> Option<Manifold> {
    let (edge_a, sep_a) = max_separation(pa, pb);
    if sep_a > margin {
        return None;
    }
    let (edge_b, sep_b) = max_separation(pb, pa);
    if sep_b > margin {
        return None;
    }
    let (p1, p2, edge1, flip) = if sep_b > sep_a + 5e-4 { (pb, pa, edge_b, true) } else { (pa, pb, edge_a, false) };

    let n1 = p1.normals[edge1];
    let mut inc = 0;
    let mut min_dot = f64::INFINITY;
    for j in 0..p2.count {
        let d = n1.dot(p2.normals[j]);
        if d < min_dot {
            min_dot = d;
            inc = j;
        }
    }
    let inc2 = (inc + 1) % p2.count;
    let incident = [
        ClipVertex { v: p2.vertices[inc], id: (inc as u32) << 4 },
        ClipVertex { v: p2.vertices[inc2], id: (inc2 as u32) << 4 },
    ];

    let v11 = p1.vertices[edge1];
    let v12 = p1.vertices[(edge1 + 1) % p1.count];
    let tangent = (v12 - v11).normalized();
    let clipped = clip_segment(incident, -tangent, -tangent.dot(v11), 1)?;
    let clipped = clip_segment(clipped, tangent, tangent.dot(v12), 2)?;

    let front = n1.dot(v11);
    let mut m = Manifold { normal: if flip { -n1 } else { n1 }, ..Default::default() };
    for cv in clipped.iter() {
        let separation = n1.dot(cv.v) - front;
        if separation > margin {
            continue;
        }
        let on_ref = cv.v - n1 * separation;
        let id = ((edge1 as u32) << 8) | cv.id | if flip { 1 << 12 } else { 0 };
        let (point_a, point_b) = if flip { (cv.v, on_ref) } else { (on_ref, cv.v) };
        m.points[m.count] = ManifoldPoint { point_a, point_b, separation, id };
        m.count += 1;
    }
    if m.count == 0 {
        None
    } else {
        Some(m)
    }
}
