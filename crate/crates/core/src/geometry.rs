//! Planar primitives and exact predicates.
//!
//! All lengths are meters. Predicates use an absolute tolerance of
//! [`EPS`], which is well below any physically meaningful distance at
//! meter scale while staying far above double-precision round-off.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Absolute geometric tolerance in meters.
pub const EPS: f64 = 1e-9;

/// A point or displacement in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

/// Velocities and displacements share the point representation.
pub type Vec2 = Point2;

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Point2 { x: c, y: s }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Point2> {
        let n = self.norm();
        (n > EPS).then(|| self * (1.0 / n))
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Polar angle in `[0, 2π)`.
    pub fn angle(self) -> f64 {
        let a = self.y.atan2(self.x);
        if a < 0.0 {
            a + std::f64::consts::TAU
        } else {
            a
        }
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        self + (other - self) * t
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Point2 { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, o: Point2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Point2 {
    fn sub_assign(&mut self, o: Point2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// A straight wall piece with nonzero length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[Point2; 2]", into = "[Point2; 2]")]
pub struct Segment {
    pub p0: Point2,
    pub p1: Point2,
}

impl From<[Point2; 2]> for Segment {
    fn from([p0, p1]: [Point2; 2]) -> Self {
        Segment { p0, p1 }
    }
}

impl From<Segment> for [Point2; 2] {
    fn from(s: Segment) -> Self {
        [s.p0, s.p1]
    }
}

impl Segment {
    pub const fn new(p0: Point2, p1: Point2) -> Self {
        Segment { p0, p1 }
    }

    pub fn from_coords(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Segment::new(Point2::new(x0, y0), Point2::new(x1, y1))
    }

    pub fn direction(&self) -> Point2 {
        self.p1 - self.p0
    }

    pub fn length(&self) -> f64 {
        self.direction().norm()
    }

    pub fn midpoint(&self) -> Point2 {
        self.p0.lerp(self.p1, 0.5)
    }

    pub fn is_degenerate(&self) -> bool {
        self.length() <= EPS
    }

    /// Parameter in `[0, 1]` of the point on the segment nearest to `p`.
    pub fn project_param(&self, p: Point2) -> f64 {
        let d = self.direction();
        let len_sq = d.norm_sq();
        if len_sq == 0.0 {
            return 0.0;
        }
        ((p - self.p0).dot(d) / len_sq).clamp(0.0, 1.0)
    }

    pub fn closest_point(&self, p: Point2) -> Point2 {
        self.p0.lerp(self.p1, self.project_param(p))
    }

    pub fn distance_to(&self, p: Point2) -> f64 {
        self.closest_point(p).distance(p)
    }

    /// Whether `p` lies on the closed segment within [`EPS`].
    pub fn contains_point(&self, p: Point2) -> bool {
        self.distance_to(p) <= EPS
    }

    /// Whether `other` lies on the same line and inside this segment.
    pub fn contains_segment(&self, other: &Segment) -> bool {
        self.contains_point(other.p0) && self.contains_point(other.p1)
    }

    /// Parameter along `self` of the first point shared with `other`, treating
    /// both segments as closed. Collinear overlaps report the overlap point
    /// nearest to `self.p0`.
    pub fn intersect_param(&self, other: &Segment) -> Option<f64> {
        let r = self.direction();
        let s = other.direction();
        let r_len = r.norm();
        let s_len = s.norm();
        if r_len <= EPS {
            return other.contains_point(self.p0).then_some(0.0);
        }
        if s_len <= EPS {
            return self
                .contains_point(other.p0)
                .then(|| self.project_param(other.p0));
        }
        let qp = other.p0 - self.p0;
        let denom = r.cross(s);
        if denom.abs() > EPS * r_len * s_len {
            let t = qp.cross(s) / denom;
            let u = qp.cross(r) / denom;
            let tol_t = EPS / r_len;
            let tol_u = EPS / s_len;
            if (-tol_t..=1.0 + tol_t).contains(&t) && (-tol_u..=1.0 + tol_u).contains(&u) {
                return Some(t.clamp(0.0, 1.0));
            }
            return None;
        }
        // Parallel: only collinear segments can share points.
        if qp.cross(r).abs() > EPS * r_len {
            return None;
        }
        let r_sq = r_len * r_len;
        let t0 = qp.dot(r) / r_sq;
        let t1 = (other.p1 - self.p0).dot(r) / r_sq;
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        let tol_t = EPS / r_len;
        if hi < -tol_t || lo > 1.0 + tol_t {
            return None;
        }
        Some(lo.max(0.0))
    }
}

/// Axis-aligned rectangle `[xmin, ymin, xmax, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl From<[f64; 4]> for Rect {
    fn from([xmin, ymin, xmax, ymax]: [f64; 4]) -> Self {
        Rect {
            xmin,
            ymin,
            xmax,
            ymax,
        }
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.xmin, r.ymin, r.xmax, r.ymax]
    }
}

impl Rect {
    pub const fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Rect {
            xmin,
            ymin,
            xmax,
            ymax,
        }
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn is_valid(&self) -> bool {
        self.xmin.is_finite()
            && self.ymin.is_finite()
            && self.xmax.is_finite()
            && self.ymax.is_finite()
            && self.xmax > self.xmin
            && self.ymax > self.ymin
    }

    /// Closed containment.
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.xmin >= self.xmin - EPS
            && other.xmax <= self.xmax + EPS
            && other.ymin >= self.ymin - EPS
            && other.ymax <= self.ymax + EPS
    }

    pub fn center(&self) -> Point2 {
        Point2::new(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))
    }

    pub fn bounding(points: &[Point2]) -> Option<Rect> {
        let first = points.first()?;
        let mut r = Rect::new(first.x, first.y, first.x, first.y);
        for p in &points[1..] {
            r.xmin = r.xmin.min(p.x);
            r.ymin = r.ymin.min(p.y);
            r.xmax = r.xmax.max(p.x);
            r.ymax = r.ymax.max(p.y);
        }
        Some(r)
    }
}

/// Nearest wall hit along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub point: Point2,
    pub distance: f64,
    /// Index into the wall slice that was cast against.
    pub wall: usize,
}

/// Distance along the unit ray `origin + t·dir`, `t ≥ 0`, to the first point
/// of `wall`. Endpoints are inclusive; a collinear overlap reports its nearest
/// point.
fn ray_segment_distance(origin: Point2, dir: Point2, wall: &Segment) -> Option<f64> {
    let s = wall.direction();
    let s_len = s.norm();
    if s_len <= EPS {
        let t = (wall.p0 - origin).dot(dir);
        let off = (wall.p0 - origin).cross(dir).abs();
        return (t >= -EPS && off <= EPS).then(|| t.max(0.0));
    }
    let qp = wall.p0 - origin;
    let denom = dir.cross(s);
    if denom.abs() > EPS * s_len {
        let t = qp.cross(s) / denom;
        let u = qp.cross(dir) / denom;
        let tol_u = EPS / s_len;
        if t >= -EPS && (-tol_u..=1.0 + tol_u).contains(&u) {
            return Some(t.max(0.0));
        }
        return None;
    }
    if qp.cross(dir).abs() > EPS {
        return None;
    }
    let t0 = qp.dot(dir);
    let t1 = (wall.p1 - origin).dot(dir);
    let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    (hi >= -EPS).then(|| lo.max(0.0))
}

/// Casts a ray from `origin` at `angle` (radians from the +x axis) and returns
/// the nearest wall intersection, if any.
pub fn ray_cast(origin: Point2, angle: f64, walls: &[Segment]) -> Option<RayHit> {
    let dir = Point2::from_angle(angle);
    let mut best: Option<(f64, usize)> = None;
    for (i, wall) in walls.iter().enumerate() {
        if let Some(t) = ray_segment_distance(origin, dir, wall) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, i));
            }
        }
    }
    best.map(|(distance, wall)| RayHit {
        point: origin + dir * distance,
        distance,
        wall,
    })
}

/// The wall nearest to `p_from` that the displacement `[p_from, p_to]` touches
/// or crosses, with its index. A step that ends exactly on a wall counts as a
/// crossing.
pub fn first_crossing(p_from: Point2, p_to: Point2, walls: &[Segment]) -> Option<(usize, f64)> {
    let step = Segment::new(p_from, p_to);
    let mut best: Option<(usize, f64)> = None;
    for (i, wall) in walls.iter().enumerate() {
        if let Some(t) = step.intersect_param(wall) {
            if best.is_none_or(|(_, bt)| t < bt) {
                best = Some((i, t));
            }
        }
    }
    best
}

/// First wall segment the displacement `[p_from, p_to]` intersects.
pub fn segment_crossing(p_from: Point2, p_to: Point2, walls: &[Segment]) -> Option<Segment> {
    first_crossing(p_from, p_to, walls).map(|(i, _)| walls[i])
}

/// Even-odd containment, with points on the boundary (within [`EPS`])
/// counted as inside.
pub fn polygon_contains(polygon: &[Point2], p: Point2) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    if polygon_boundary_distance(polygon, p) <= EPS {
        return true;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[j];
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn polygon_edges(polygon: &[Point2]) -> impl Iterator<Item = Segment> + '_ {
    let n = polygon.len();
    (0..n).map(move |i| Segment::new(polygon[i], polygon[(i + 1) % n]))
}

pub fn polygon_boundary_distance(polygon: &[Point2], p: Point2) -> f64 {
    polygon_edges(polygon)
        .map(|e| e.distance_to(p))
        .fold(f64::INFINITY, f64::min)
}

pub fn polygon_centroid(polygon: &[Point2]) -> Point2 {
    let mut a2 = 0.0;
    let mut c = Point2::ZERO;
    for e in polygon_edges(polygon) {
        let k = e.p0.cross(e.p1);
        a2 += k;
        c += (e.p0 + e.p1) * k;
    }
    if a2.abs() <= EPS {
        let n = polygon.len().max(1) as f64;
        return polygon.iter().fold(Point2::ZERO, |acc, &p| acc + p) * (1.0 / n);
    }
    c * (1.0 / (3.0 * a2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn wall_x5() -> Vec<Segment> {
        vec![Segment::from_coords(5.0, -1.0, 5.0, 1.0)]
    }

    #[test]
    fn ray_hits_axis_aligned_wall() {
        let hit = ray_cast(Point2::ZERO, 0.0, &wall_x5()).unwrap();
        assert!((hit.point.x - 5.0).abs() < 1e-12 && hit.point.y.abs() < 1e-12);
        assert!((hit.distance - 5.0).abs() < 1e-12);
    }

    #[test]
    fn ray_misses_wall() {
        assert!(ray_cast(Point2::ZERO, FRAC_PI_2, &wall_x5()).is_none());
        assert!(ray_cast(Point2::ZERO, 0.0, &[]).is_none());
    }

    #[test]
    fn ray_hits_endpoint_inclusively() {
        let walls = [Segment::from_coords(2.0, 0.0, 2.0, 3.0)];
        let hit = ray_cast(Point2::ZERO, 0.0, &walls).unwrap();
        assert!((hit.distance - 2.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_overlap_returns_nearest_point() {
        let walls = [Segment::from_coords(4.0, 0.0, 1.5, 0.0)];
        let hit = ray_cast(Point2::ZERO, 0.0, &walls).unwrap();
        assert!((hit.distance - 1.5).abs() < 1e-12);
        // origin inside the overlap
        let hit = ray_cast(Point2::new(2.0, 0.0), 0.0, &walls).unwrap();
        assert_eq!(hit.distance, 0.0);
        // wall behind the origin
        assert!(ray_cast(Point2::new(5.0, 0.0), 0.0, &walls).is_none());
    }

    #[test]
    fn nearest_of_several_walls() {
        let walls = [
            Segment::from_coords(5.0, -1.0, 5.0, 1.0),
            Segment::from_coords(3.0, -1.0, 3.0, 1.0),
            Segment::from_coords(-1.0, -1.0, -1.0, 1.0),
        ];
        let hit = ray_cast(Point2::ZERO, 0.0, &walls).unwrap();
        assert_eq!(hit.wall, 1);
    }

    #[test]
    fn crossing_detection() {
        let walls = [Segment::from_coords(0.0, -1.0, 0.0, 1.0)];
        let w = segment_crossing(Point2::new(-0.1, 0.0), Point2::new(0.1, 0.0), &walls);
        assert_eq!(w, Some(walls[0]));
        assert!(segment_crossing(Point2::new(-0.5, 0.0), Point2::new(-0.2, 0.3), &walls).is_none());
        // inclusive endpoint
        assert!(segment_crossing(Point2::new(-0.1, 0.0), Point2::new(0.0, 0.5), &walls).is_some());
    }

    #[test]
    fn first_crossing_is_nearest_along_step() {
        let walls = [
            Segment::from_coords(2.0, -1.0, 2.0, 1.0),
            Segment::from_coords(1.0, -1.0, 1.0, 1.0),
        ];
        let (i, t) = first_crossing(Point2::ZERO, Point2::new(3.0, 0.0), &walls).unwrap();
        assert_eq!(i, 1);
        assert!((t - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn polygon_even_odd_with_boundary() {
        let sq = [
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.0, 2.0),
            Point2::new(0.0, 2.0),
        ];
        assert!(polygon_contains(&sq, Point2::new(1.0, 1.0)));
        assert!(polygon_contains(&sq, Point2::new(2.0, 1.0)));
        assert!(polygon_contains(&sq, Point2::new(0.0, 0.0)));
        assert!(!polygon_contains(&sq, Point2::new(2.1, 1.0)));
        let c = polygon_centroid(&sq);
        assert!((c.x - 1.0).abs() < 1e-12 && (c.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l_shape_concavity() {
        let l = [
            Point2::new(0.0, 0.0),
            Point2::new(4.0, 0.0),
            Point2::new(4.0, 4.0),
            Point2::new(2.0, 4.0),
            Point2::new(2.0, 2.0),
            Point2::new(0.0, 2.0),
        ];
        assert!(polygon_contains(&l, Point2::new(1.0, 1.0)));
        assert!(polygon_contains(&l, Point2::new(3.0, 3.0)));
        assert!(!polygon_contains(&l, Point2::new(1.0, 3.0)));
    }
}
