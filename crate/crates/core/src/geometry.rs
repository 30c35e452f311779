//! Planar geometry primitives: points, headings, cardinal directions, turns,
//! poses and the reflection law used by every reflective element.
//!
//! Lengths are millimetres. Headings are radians measured counter-clockwise
//! from +x and kept in `[0, 2π)`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One inch in millimetres.
pub const INCH: f64 = 25.4;

/// Headings closer than this to a multiple of π/4 snap onto it.
const SNAP_TOLERANCE: f64 = 1e-12;

const EIGHTHS: [f64; 8] = [
    0.0,
    FRAC_PI_4,
    FRAC_PI_2,
    3.0 * FRAC_PI_4,
    PI,
    5.0 * FRAC_PI_4,
    3.0 * FRAC_PI_2,
    7.0 * FRAC_PI_4,
];

const EIGHTH_VECTORS: [(f64, f64); 8] = [
    (1.0, 0.0),
    (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    (0.0, 1.0),
    (-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    (-1.0, 0.0),
    (-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    (0.0, -1.0),
    (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("turn {from}-{to} is not a perpendicular turn")]
    NotPerpendicular { from: Cardinal, to: Cardinal },
    #[error("unknown direction `{0}`")]
    UnknownDirection(String),
    #[error("malformed turn `{0}` (expected e.g. `up-right`)")]
    MalformedTurn(String),
    #[error("ray is parallel to the target axis")]
    ParallelToAxis,
    #[error("target axis lies behind the ray origin (t = {t})")]
    BehindOrigin { t: f64 },
}

/// A 2D vector, also used as a point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

/// Points and vectors share one representation.
pub type Point2 = Vec2;

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Rotated a quarter turn counter-clockwise.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> Heading {
        Heading::new(self.y.atan2(self.x))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.4}, {:.4})", self.x, self.y)
    }
}

/// Direction of travel or facing, normalised to `[0, 2π)`.
///
/// Values within 1e-12 rad of a multiple of π/4 are stored as that exact
/// multiple, so cardinal and diagonal headings compare exactly.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Heading(f64);

impl Heading {
    pub const RIGHT: Heading = Heading(0.0);
    pub const UP: Heading = Heading(FRAC_PI_2);
    pub const LEFT: Heading = Heading(PI);
    pub const DOWN: Heading = Heading(3.0 * FRAC_PI_2);

    pub fn new(radians: f64) -> Self {
        let mut a = radians.rem_euclid(TAU);
        if a >= TAU {
            a = 0.0;
        }
        let k = (a / FRAC_PI_4).round();
        if (a - k * FRAC_PI_4).abs() < SNAP_TOLERANCE {
            a = EIGHTHS[(k as usize) % 8];
        }
        Heading(a)
    }

    pub fn from_degrees(deg: f64) -> Self {
        Heading::new(deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    fn eighth(self) -> Option<usize> {
        EIGHTHS.iter().position(|&e| e == self.0)
    }

    /// Unit vector; exact for multiples of π/4.
    pub fn unit(self) -> Vec2 {
        match self.eighth() {
            Some(k) => Vec2::new(EIGHTH_VECTORS[k].0, EIGHTH_VECTORS[k].1),
            None => Vec2::new(self.0.cos(), self.0.sin()),
        }
    }

    pub fn rotated(self, radians: f64) -> Heading {
        Heading::new(self.0 + radians)
    }

    pub fn reversed(self) -> Heading {
        self.rotated(PI)
    }

    pub fn cardinal(self) -> Option<Cardinal> {
        match self.eighth() {
            Some(0) => Some(Cardinal::Right),
            Some(2) => Some(Cardinal::Up),
            Some(4) => Some(Cardinal::Left),
            Some(6) => Some(Cardinal::Down),
            _ => None,
        }
    }

    /// True when within `tol` radians of a cardinal direction.
    pub fn is_cardinal_within(self, tol: f64) -> bool {
        let k = (self.0 / FRAC_PI_2).round();
        (self.0 - k * FRAC_PI_2).abs() <= tol
    }

    /// Smallest signed angle taking `self` to `other`, in `(-π, π]`.
    pub fn delta_to(self, other: Heading) -> f64 {
        let mut d = (other.0 - self.0).rem_euclid(TAU);
        if d > PI {
            d -= TAU;
        }
        d
    }
}

impl fmt::Display for Heading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} rad", self.0)
    }
}

/// The four grid directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cardinal {
    Right,
    Up,
    Left,
    Down,
}

impl Cardinal {
    pub const ALL: [Cardinal; 4] = [Cardinal::Right, Cardinal::Up, Cardinal::Left, Cardinal::Down];

    fn quarter(self) -> u8 {
        match self {
            Cardinal::Right => 0,
            Cardinal::Up => 1,
            Cardinal::Left => 2,
            Cardinal::Down => 3,
        }
    }

    fn from_quarter(q: u8) -> Cardinal {
        Cardinal::ALL[(q % 4) as usize]
    }

    pub fn heading(self) -> Heading {
        Heading(EIGHTHS[2 * self.quarter() as usize])
    }

    pub fn reversed(self) -> Cardinal {
        Cardinal::from_quarter(self.quarter() + 2)
    }

    /// Quarter turn counter-clockwise.
    pub fn rot90(self) -> Cardinal {
        Cardinal::from_quarter(self.quarter() + 1)
    }

    pub fn name(self) -> &'static str {
        match self {
            Cardinal::Right => "right",
            Cardinal::Up => "up",
            Cardinal::Left => "left",
            Cardinal::Down => "down",
        }
    }
}

impl fmt::Display for Cardinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Cardinal {
    type Err = GeometryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "right" => Ok(Cardinal::Right),
            "up" => Ok(Cardinal::Up),
            "left" => Ok(Cardinal::Left),
            "down" => Ok(Cardinal::Down),
            other => Err(GeometryError::UnknownDirection(other.to_string())),
        }
    }
}

/// A perpendicular fold: the beam arrives travelling `from` and leaves
/// travelling `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub from: Cardinal,
    pub to: Cardinal,
}

impl Turn {
    pub fn new(from: Cardinal, to: Cardinal) -> Result<Turn, GeometryError> {
        mirror_normal_for_turn(from, to)?;
        Ok(Turn { from, to })
    }

    pub fn normal(self) -> Heading {
        mirror_normal_for_turn(self.from, self.to).expect("validated on construction")
    }
}

impl fmt::Display for Turn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.from, self.to)
    }
}

impl FromStr for Turn {
    type Err = GeometryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| GeometryError::MalformedTurn(s.to_string()))?;
        Turn::new(a.parse()?, b.parse()?)
    }
}

/// Normal of a mirror that folds a beam travelling `incoming` into
/// `outgoing`. The normal bisects the reversed incoming direction and the
/// outgoing direction, so it points into the half-plane the beam arrives from.
pub fn mirror_normal_for_turn(incoming: Cardinal, outgoing: Cardinal) -> Result<Heading, GeometryError> {
    let rev = incoming.reversed().quarter() as i32;
    let out = outgoing.quarter() as i32;
    let delta = match (out - rev).rem_euclid(4) {
        1 => 1,
        3 => -1,
        _ => {
            return Err(GeometryError::NotPerpendicular {
                from: incoming,
                to: outgoing,
            })
        }
    };
    let octant = (2 * rev + delta).rem_euclid(8) as usize;
    Ok(Heading(EIGHTHS[octant]))
}

/// Reflects a direction of travel off a surface with the given normal.
/// The sign of the normal does not matter.
pub fn reflect_direction(incoming: Heading, normal: Heading) -> Heading {
    Heading::new(PI + 2.0 * normal.radians() - incoming.radians())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// Intersects a ray with the line `axis = value`. Returns the hit point and
/// the distance travelled.
pub fn intersect_ray_axis(
    origin: Point2,
    heading: Heading,
    axis: Axis,
    value: f64,
) -> Result<(Point2, f64), GeometryError> {
    let d = heading.unit();
    let (o, dd) = match axis {
        Axis::X => (origin.x, d.x),
        Axis::Y => (origin.y, d.y),
    };
    if dd.abs() < 1e-12 {
        return Err(GeometryError::ParallelToAxis);
    }
    let t = (value - o) / dd;
    if t <= 0.0 {
        return Err(GeometryError::BehindOrigin { t });
    }
    let mut p = origin + d * t;
    match axis {
        Axis::X => p.x = value,
        Axis::Y => p.y = value,
    }
    Ok((p, t))
}

/// Position plus orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Point2,
    pub heading: Heading,
}

impl Pose {
    pub fn new(position: Point2, heading: Heading) -> Self {
        Pose { position, heading }
    }

    pub fn identity() -> Self {
        Pose::new(Vec2::ZERO, Heading::RIGHT)
    }

    /// Maps a point from this pose's local frame to the parent frame.
    pub fn apply(&self, local: Point2) -> Point2 {
        let u = self.heading.unit();
        let v = u.perp();
        self.position + u * local.x + v * local.y
    }

    /// Maps a parent-frame point into the local frame.
    pub fn inverse_apply(&self, p: Point2) -> Point2 {
        let u = self.heading.unit();
        let d = p - self.position;
        Vec2::new(d.dot(u), d.dot(u.perp()))
    }

    pub fn apply_heading(&self, h: Heading) -> Heading {
        Heading::new(h.radians() + self.heading.radians())
    }

    /// `self ∘ inner`: a pose expressed in `self`'s frame lifted to the parent.
    pub fn compose(&self, inner: &Pose) -> Pose {
        Pose::new(self.apply(inner.position), self.apply_heading(inner.heading))
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn new(min: Point2, max: Point2) -> Self {
        Rect { min, max }
    }

    pub fn from_size(width: f64, height: f64) -> Self {
        Rect::new(Vec2::ZERO, Vec2::new(width, height))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        p.x >= self.min.x - tol && p.x <= self.max.x + tol && p.y >= self.min.y - tol && p.y <= self.max.y + tol
    }

    pub fn inset(&self, d: f64) -> Rect {
        Rect::new(self.min + Vec2::new(d, d), self.max - Vec2::new(d, d))
    }

    pub fn corners(&self) -> [Point2; 4] {
        [
            self.min,
            Vec2::new(self.max.x, self.min.y),
            self.max,
            Vec2::new(self.min.x, self.max.y),
        ]
    }

    pub fn overlaps(&self, o: &Rect) -> bool {
        self.min.x < o.max.x && o.min.x < self.max.x && self.min.y < o.max.y && o.min.y < self.max.y
    }

    pub fn union(&self, o: &Rect) -> Rect {
        Rect::new(
            Vec2::new(self.min.x.min(o.min.x), self.min.y.min(o.min.y)),
            Vec2::new(self.max.x.max(o.max.x), self.max.y.max(o.max.y)),
        )
    }

    pub fn bounding(points: &[Point2]) -> Rect {
        let mut r = Rect::new(
            Vec2::new(f64::INFINITY, f64::INFINITY),
            Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for p in points {
            r.min.x = r.min.x.min(p.x);
            r.min.y = r.min.y.min(p.y);
            r.max.x = r.max.x.max(p.x);
            r.max.y = r.max.y.max(p.y);
        }
        r
    }

    /// Distance along a ray from an interior point to the boundary.
    pub fn exit_distance(&self, origin: Point2, heading: Heading) -> f64 {
        let d = heading.unit();
        let mut t = f64::INFINITY;
        if d.x > 1e-15 {
            t = t.min((self.max.x - origin.x) / d.x);
        } else if d.x < -1e-15 {
            t = t.min((self.min.x - origin.x) / d.x);
        }
        if d.y > 1e-15 {
            t = t.min((self.max.y - origin.y) / d.y);
        } else if d.y < -1e-15 {
            t = t.min((self.min.y - origin.y) / d.y);
        }
        t.max(0.0)
    }
}

/// Intersection of a ray with a finite segment `a`–`b`. Returns the ray
/// parameter and the segment parameter in `[0, 1]`.
pub fn ray_segment_intersection(origin: Point2, dir: Vec2, a: Point2, b: Point2, tol: f64) -> Option<(f64, f64)> {
    let e = b - a;
    let denom = dir.cross(e);
    if denom.abs() < 1e-15 {
        return None;
    }
    let w = a - origin;
    let t = w.cross(e) / denom;
    let u = w.cross(dir) / denom;
    let ut = tol / e.norm().max(1e-300);
    if u < -ut || u > 1.0 + ut {
        return None;
    }
    Some((t, u.clamp(0.0, 1.0)))
}

/// Shortest distance from `p` to the segment `a`–`b`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let e = b - a;
    let l2 = e.dot(e);
    if l2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(e) / l2).clamp(0.0, 1.0);
    p.distance(a + e * t)
}

/// Twice the signed area of a polygon (positive when counter-clockwise).
pub fn signed_area2(poly: &[Point2]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i].cross(poly[(i + 1) % n])).sum()
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: Point2, poly: &[Point2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Regular polygon approximating a circle, counter-clockwise.
pub fn circle_polygon(center: Point2, radius: f64, segments: usize) -> Vec<Point2> {
    (0..segments)
        .map(|i| {
            let a = TAU * i as f64 / segments as f64;
            center + Vec2::new(radius * a.cos(), radius * a.sin())
        })
        .collect()
}
