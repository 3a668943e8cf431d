//! Observation encoders: a flat-shaded screenshot, a symbolic polygon frame
//! with colour maps, and a per-class occupancy tensor.
//!
//! Screen coordinates are pixels with the origin at the top-left corner. A
//! world point `p` maps to `((p.x - min.x) * 7.5, 480 - (p.y - min.y) * 7.5)`
//! where `min` is the bottom-left corner of the level bounds.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::catalog::ObjectClass;
use crate::math::{floor, Aabb, Vec2};
use crate::physics::{BodyId, Shape, World};

pub const SCREEN_WIDTH: usize = 640;
pub const SCREEN_HEIGHT: usize = 480;
pub const PX_PER_UNIT: f64 = 7.5;
pub const TENSOR_H: usize = 120;
pub const TENSOR_W: usize = 160;
pub const TENSOR_CELL: usize = 4;
/// Vertex count used for circles in symbolic frames.
pub const CIRCLE_VERTICES: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PerceptionError {
    #[error("unknown object class `{0}`")]
    UnknownClass(String),
}

/// World to screen mapping for a level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScreenMap {
    pub origin: Vec2,
}

impl ScreenMap {
    pub fn new(bounds: &Aabb) -> ScreenMap {
        ScreenMap { origin: bounds.min }
    }

    pub fn to_screen(&self, p: Vec2) -> Vec2 {
        Vec2::new((p.x - self.origin.x) * PX_PER_UNIT, SCREEN_HEIGHT as f64 - (p.y - self.origin.y) * PX_PER_UNIT)
    }

    pub fn to_world(&self, s: Vec2) -> Vec2 {
        Vec2::new(s.x / PX_PER_UNIT + self.origin.x, (SCREEN_HEIGHT as f64 - s.y) / PX_PER_UNIT + self.origin.y)
    }
}

/// 3-3-2 palette entry: three bits red, three bits green, two bits blue.
const fn rgb332(r: u8, g: u8, b: u8) -> [u8; 3] {
    [((r as u16 * 255 + 3) / 7) as u8, ((g as u16 * 255 + 3) / 7) as u8, b * 85]
}

pub const BACKGROUND: [u8; 3] = rgb332(4, 6, 3);

/// Flat colour of every class.
pub fn class_color(class: ObjectClass) -> [u8; 3] {
    match class {
        ObjectClass::RedBird => rgb332(7, 0, 0),
        ObjectClass::YellowBird => rgb332(7, 7, 0),
        ObjectClass::BlueBird => rgb332(1, 3, 3),
        ObjectClass::WhiteBird => rgb332(7, 7, 3),
        ObjectClass::BlackBird => rgb332(0, 0, 0),
        ObjectClass::Pig => rgb332(2, 7, 0),
        ObjectClass::Wood => rgb332(6, 4, 1),
        ObjectClass::Ice => rgb332(3, 6, 3),
        ObjectClass::Stone => rgb332(4, 4, 2),
        ObjectClass::Platform => rgb332(3, 2, 0),
        ObjectClass::Tnt => rgb332(7, 2, 0),
        ObjectClass::Slingshot => rgb332(5, 3, 0),
    }
}

/// Quantises an RGB8 colour to its 8-bit 3-3-2 code.
pub fn quantize(rgb: [u8; 3]) -> u8 {
    (rgb[0] & 0xe0) | ((rgb[1] >> 5) << 2) | (rgb[2] >> 6)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Screenshot {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB8.
    pub pixels: Vec<u8>,
}

impl Screenshot {
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// Flat-shaded rasterisation; bodies are painted in id order, a pixel being
/// covered when its centre lies inside the body.
pub fn render(world: &World, map: &ScreenMap) -> Screenshot {
    render_layers(world, map).0
}

fn render_layers(world: &World, map: &ScreenMap) -> (Screenshot, Vec<u8>) {
    let mut pixels = Vec::with_capacity(SCREEN_WIDTH * SCREEN_HEIGHT * 3);
    for _ in 0..SCREEN_WIDTH * SCREEN_HEIGHT {
        pixels.extend_from_slice(&BACKGROUND);
    }
    let mut shot = Screenshot { width: SCREEN_WIDTH, height: SCREEN_HEIGHT, pixels };
    for b in world.bodies() {
        let color = class_color(b.class);
        let xf = b.transform();
        fill_pixels(
            &b.shape.aabb(&xf),
            map,
            |p| b.shape.contains(&xf, p),
            |x, y| {
                let i = (y * SCREEN_WIDTH + x) * 3;
                shot.pixels[i..i + 3].copy_from_slice(&color);
            },
        );
    }
    let codes = shot.pixels.chunks_exact(3).map(|c| quantize([c[0], c[1], c[2]])).collect();
    (shot, codes)
}

/// Visits every on-screen pixel whose centre is inside `inside`, limited to
/// the pixels overlapping `bounds`.
fn fill_pixels(bounds: &Aabb, map: &ScreenMap, inside: impl Fn(Vec2) -> bool, mut visit: impl FnMut(usize, usize)) {
    let a = map.to_screen(Vec2::new(bounds.min.x, bounds.max.y));
    let b = map.to_screen(Vec2::new(bounds.max.x, bounds.min.y));
    let x0 = floor(a.x).max(0.0) as usize;
    let y0 = floor(a.y).max(0.0) as usize;
    let x1 = (floor(b.x) + 1.0).clamp(0.0, SCREEN_WIDTH as f64) as usize;
    let y1 = (floor(b.y) + 1.0).clamp(0.0, SCREEN_HEIGHT as f64) as usize;
    for y in y0..y1 {
        for x in x0..x1 {
            let centre = map.to_world(Vec2::new(x as f64 + 0.5, y as f64 + 0.5));
            if inside(centre) {
                visit(x, y);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorShare {
    /// 3-3-2 colour code.
    pub color: u8,
    /// Share of the object's pixels, in percent.
    pub percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolicObject {
    pub id: BodyId,
    /// Class name from the catalog, e.g. `"pig"` or `"red_bird"`.
    pub object_class: String,
    /// Screen-space vertices in drawing order.
    pub polygon: Vec<Vec2>,
    pub color_map: Vec<ColorShare>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymbolicFrame {
    pub tick: u64,
    pub objects: Vec<SymbolicObject>,
}

impl SymbolicFrame {
    pub fn objects_of(&self, class: ObjectClass) -> impl Iterator<Item = &SymbolicObject> {
        let name = class.name();
        self.objects.iter().filter(move |o| o.object_class == name)
    }
}

impl SymbolicObject {
    pub fn class(&self) -> Option<ObjectClass> {
        ObjectClass::from_name(&self.object_class)
    }

    /// Vertex average, in screen coordinates.
    pub fn centroid(&self) -> Vec2 {
        let n = self.polygon.len().max(1) as f64;
        self.polygon.iter().fold(Vec2::ZERO, |acc, v| acc + *v) / n
    }
}

/// Polygon outline of a body's shape in world coordinates.
pub fn world_polygon(shape: &Shape, xf: &crate::math::Transform) -> Vec<Vec2> {
    shape.outline(xf, CIRCLE_VERTICES)
}

/// One object per body, in id order. Colour maps are the quantised colours
/// of the rendered pixels inside the object's polygon; an object with no
/// pixel on screen reports its class colour at 100%.
pub fn symbolize(world: &World, map: &ScreenMap) -> SymbolicFrame {
    let (_, codes) = render_layers(world, map);
    let mut objects = Vec::with_capacity(world.bodies().len());
    for b in world.bodies() {
        let xf = b.transform();
        let polygon: Vec<Vec2> = world_polygon(&b.shape, &xf).into_iter().map(|p| map.to_screen(p)).collect();
        let mut counts: BTreeMap<u8, u32> = BTreeMap::new();
        let mut total = 0u32;
        fill_pixels(
            &b.shape.aabb(&xf),
            map,
            |p| point_in_polygon(&polygon, map.to_screen(p)),
            |x, y| {
                *counts.entry(codes[y * SCREEN_WIDTH + x]).or_default() += 1;
                total += 1;
            },
        );
        let color_map = if total == 0 {
            alloc::vec![ColorShare { color: quantize(class_color(b.class)), percent: 100.0 }]
        } else {
            counts
                .into_iter()
                .map(|(color, n)| ColorShare { color, percent: 100.0 * n as f64 / total as f64 })
                .collect()
        };
        objects.push(SymbolicObject { id: b.id, object_class: b.class.name().to_string(), polygon, color_map });
    }
    SymbolicFrame { tick: world.tick(), objects }
}

/// Even-odd test against the polygon's edges, half-open in y.
pub fn point_in_polygon(poly: &[Vec2], p: Vec2) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) && p.x < crossing_x(a, b, p.y) {
            inside = !inside;
        }
    }
    inside
}

fn crossing_x(a: Vec2, b: Vec2, y: f64) -> f64 {
    a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y)
}

/// Binary occupancy, `TENSOR_H x TENSOR_W` cells per class channel.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TensorObs {
    bits: Vec<u64>,
}

impl Default for TensorObs {
    fn default() -> Self {
        TensorObs::new()
    }
}

impl TensorObs {
    pub const LEN: usize = TENSOR_H * TENSOR_W * ObjectClass::COUNT;

    pub fn new() -> TensorObs {
        TensorObs { bits: alloc::vec![0; Self::LEN.div_ceil(64)] }
    }

    fn index(r: usize, c: usize, k: usize) -> usize {
        (k * TENSOR_H + r) * TENSOR_W + c
    }

    pub fn get(&self, r: usize, c: usize, k: usize) -> bool {
        let i = Self::index(r, c, k);
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, k: usize) {
        let i = Self::index(r, c, k);
        self.bits[i / 64] |= 1 << (i % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn channel_count(&self, k: usize) -> usize {
        (0..TENSOR_H).map(|r| (0..TENSOR_W).filter(|&c| self.get(r, c, k)).count()).sum()
    }

    /// Little-endian packing, channel-major then row-major, one bit per cell.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.bits.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(Self::LEN / 8);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<TensorObs> {
        if bytes.len() != Self::LEN / 8 {
            return None;
        }
        let mut t = TensorObs::new();
        for (i, chunk) in bytes.chunks(8).enumerate() {
            let mut w = [0u8; 8];
            w[..chunk.len()].copy_from_slice(chunk);
            t.bits[i] = u64::from_le_bytes(w);
        }
        Some(t)
    }

    /// Fraction of set cells per pooled block, `rows x cols` blocks per
    /// channel, flattened channel-major.
    pub fn pooled(&self, rows: usize, cols: usize) -> Vec<f64> {
        let bh = TENSOR_H / rows;
        let bw = TENSOR_W / cols;
        let mut out = alloc::vec![0.0; rows * cols * ObjectClass::COUNT];
        for k in 0..ObjectClass::COUNT {
            for r in 0..TENSOR_H {
                for c in 0..TENSOR_W {
                    if self.get(r, c, k) {
                        out[(k * rows + r / bh) * cols + c / bw] += 1.0;
                    }
                }
            }
        }
        let area = (bh * bw) as f64;
        out.iter_mut().for_each(|v| *v /= area);
        out
    }
}

/// Scan-converts every polygon into its class channel. A cell is set when
/// its centre pixel coordinate lies inside the polygon.
pub fn encode_tensor(frame: &SymbolicFrame) -> Result<TensorObs, PerceptionError> {
    let mut t = TensorObs::new();
    let mut xs = Vec::new();
    for o in &frame.objects {
        let k = o.class().ok_or_else(|| PerceptionError::UnknownClass(o.object_class.clone()))?.channel();
        let poly = &o.polygon;
        if poly.len() < 3 {
            continue;
        }
        let (lo, hi) = poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.y), hi.max(v.y)));
        let cell = TENSOR_CELL as f64;
        let r0 = floor((lo - cell / 2.0) / cell).max(0.0) as usize;
        let r1 = ((floor((hi - cell / 2.0) / cell) + 1.0).max(0.0) as usize).min(TENSOR_H);
        for r in r0..r1 {
            let y = r as f64 * cell + cell / 2.0;
            xs.clear();
            for i in 0..poly.len() {
                let a = poly[i];
                let b = poly[(i + 1) % poly.len()];
                if (a.y > y) != (b.y > y) {
                    xs.push(crossing_x(a, b, y));
                }
            }
            xs.sort_by(f64::total_cmp);
            for c in 0..TENSOR_W {
                let x = c as f64 * cell + cell / 2.0;
                if xs.iter().filter(|&&xi| x < xi).count() % 2 == 1 {
                    t.set(r, c, k);
                }
            }
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_codes_are_distinct_and_exact() {
        let mut codes: Vec<u8> = ObjectClass::ALL.iter().map(|c| quantize(class_color(*c))).collect();
        codes.push(quantize(BACKGROUND));
        let n = codes.len();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), n);
    }

    #[test]
    fn screen_map_round_trips() {
        let m = ScreenMap::new(&Aabb::new(Vec2::new(0.0, 0.0), Vec2::new(84.0, 48.0)));
        assert_eq!(m.to_screen(Vec2::ZERO), Vec2::new(0.0, 480.0));
        let p = Vec2::new(12.25, 7.5);
        assert!((m.to_world(m.to_screen(p)) - p).length() < 1e-12);
    }

    #[test]
    fn point_in_square() {
        let sq = [Vec2::new(0.0, 0.0), Vec2::new(4.0, 0.0), Vec2::new(4.0, 4.0), Vec2::new(0.0, 4.0)];
        assert!(point_in_polygon(&sq, Vec2::new(2.0, 2.0)));
        assert!(!point_in_polygon(&sq, Vec2::new(5.0, 2.0)));
    }

    #[test]
    fn tensor_bytes_round_trip() {
        let mut t = TensorObs::new();
        t.set(0, 0, 0);
        t.set(119, 159, 11);
        t.set(60, 3, 5);
        let back = TensorObs::from_bytes(&t.to_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.count_ones(), 3);
    }
}
