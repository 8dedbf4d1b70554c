//! Brute-force oracles and random scene generators shared by the
//! integration tests.
#![allow(dead_code)]

use std::f64::consts::TAU;

use ivid::features::{ExtractionParams, Kinematics};
use ivid::geometry::{Point2, Segment, Vec2};
use ivid::rng;
use rand::Rng as _;

pub struct RandomScene {
    pub walls: Vec<Segment>,
    pub subject: Point2,
    pub others: Vec<Kinematics>,
}

/// A few random segments and pedestrians scattered around a subject.
pub fn random_scene(seed: u64, k: u64) -> RandomScene {
    let mut r = rng::indexed_stream(seed, "random-scene", &[k]);
    let pt = |r: &mut rng::Rng, s: f64| Point2::new(r.random_range(-s..s), r.random_range(-s..s));
    let n_walls = r.random_range(1..8);
    let walls = (0..n_walls)
        .map(|_| {
            let a = pt(&mut r, 3.0);
            let b = pt(&mut r, 3.0);
            Segment::new(a, b)
        })
        .filter(|s| s.length() > 1e-3)
        .collect();
    let subject = pt(&mut r, 1.0);
    let others = (0..r.random_range(0..10))
        .map(|_| {
            let p = subject + pt(&mut r, 1.6);
            Kinematics::new(p, Vec2::new(r.random_range(-1.5..1.5), r.random_range(-1.5..1.5)))
        })
        .filter(|o| o.position.distance(subject) > 1e-6)
        .collect();
    RandomScene { walls, subject, others }
}

/// Ray-cast oracle: marches along the ray in fixed steps watching every
/// wall's side-of-line sign, then bisects the first sign change whose
/// crossing lies on the segment. Returns the hit distance.
pub fn march_ray(origin: Point2, angle: f64, walls: &[Segment], max_dist: f64) -> Option<f64> {
    let dir = Point2::from_angle(angle);
    let step = 1e-3;
    let side = |w: &Segment, t: f64| w.direction().cross(origin + dir * t - w.p0);
    let on_segment = |w: &Segment, t: f64| {
        let p = origin + dir * t;
        let d = w.direction();
        let u = (p - w.p0).dot(d) / d.norm_sq();
        (-1e-9..=1.0 + 1e-9).contains(&u)
    };
    let n = (max_dist / step).ceil() as usize;
    let mut prev: Vec<f64> = walls.iter().map(|w| side(w, 0.0)).collect();
    for k in 1..=n {
        let t1 = k as f64 * step;
        let mut best: Option<f64> = None;
        for (i, w) in walls.iter().enumerate() {
            let s1 = side(w, t1);
            let s0 = prev[i];
            prev[i] = s1;
            if s0 == 0.0 && k == 1 && on_segment(w, 0.0) {
                return Some(0.0);
            }
            if (s0 < 0.0) == (s1 < 0.0) && s1 != 0.0 {
                continue;
            }
            let (mut lo, mut hi) = (t1 - step, t1);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if (side(w, mid) < 0.0) == (s0 < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = 0.5 * (lo + hi);
            if on_segment(w, t) && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
        if best.is_some() {
            return best;
        }
    }
    None
}

/// Independent sector index: `floor(angle / α)` with the angle in `[0, 2π)`.
pub fn oracle_sector(d: Vec2, params: &ExtractionParams) -> usize {
    let mut a = d.y.atan2(d.x);
    if a < 0.0 {
        a += TAU;
    }
    let n = (360.0 / params.alpha_deg).round() as usize;
    ((a / params.alpha_deg.to_radians()).floor() as usize).min(n - 1)
}

/// Distance of the nearest point of `w` on the ray, analytic line
/// intersection (used only for the wedge edges).
fn edge_hit(origin: Point2, angle: f64, w: &Segment) -> Option<f64> {
    let d = Point2::from_angle(angle);
    let e = w.direction();
    let denom = d.cross(e);
    if denom.abs() < 1e-15 {
        return None;
    }
    let q = w.p0 - origin;
    let t = q.cross(e) / denom;
    let u = q.cross(d) / denom;
    (t >= 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
}

/// What the oracle expects in one sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SectorPick {
    Empty,
    Pedestrian(f64),
    Wall(f64),
}

impl SectorPick {
    pub fn distance(&self) -> Option<f64> {
        match self {
            SectorPick::Empty => None,
            SectorPick::Pedestrian(d) | SectorPick::Wall(d) => Some(*d),
        }
    }
}

/// Radar-NN oracle. Wall candidates are dense samples along every segment,
/// its endpoints and foot point, and the hits of each wedge's two edge rays.
pub fn radar_oracle(scene: &RandomScene, params: &ExtractionParams) -> Vec<SectorPick> {
    let n = (360.0 / params.alpha_deg).round() as usize;
    let r = params.radius;
    let s = scene.subject;
    let mut walls_best = vec![f64::INFINITY; n];
    let consider = |sector: usize, d: f64, best: &mut Vec<f64>| {
        if d <= r && d < best[sector] {
            best[sector] = d;
        }
    };
    for w in &scene.walls {
        let len = w.length();
        let m = (len / 2e-4).ceil() as usize;
        let mut pts: Vec<Point2> = (0..=m).map(|k| w.p0.lerp(w.p1, k as f64 / m as f64)).collect();
        pts.push(w.closest_point(s));
        for p in pts {
            let d = p - s;
            if d.norm() > 1e-12 {
                consider(oracle_sector(d, params), d.norm(), &mut walls_best);
            }
        }
    }
    let span = params.alpha_deg.to_radians();
    for j in 0..n {
        let start = j as f64 * span;
        for a in [start, start + span - 1e-9] {
            for w in &scene.walls {
                if let Some(t) = edge_hit(s, a, w) {
                    consider(j, t, &mut walls_best);
                }
            }
        }
    }
    let mut peds_best = vec![f64::INFINITY; n];
    for o in &scene.others {
        let d = o.position - s;
        consider(oracle_sector(d, params), d.norm(), &mut peds_best);
    }
    (0..n)
        .map(|j| match (peds_best[j], walls_best[j]) {
            (p, w) if p.is_infinite() && w.is_infinite() => SectorPick::Empty,
            (p, w) if p <= w => SectorPick::Pedestrian(p),
            (_, w) => SectorPick::Wall(w),
        })
        .collect()
}
