//! Per-step feature extraction.
//!
//! A step feature concatenates, in this order and row-major:
//!
//! * the subject's velocity (2 values),
//! * the social block: one row `[dx, dy, dvx, dvy]` per angular sector of the
//!   interaction disk (`360 / alpha` rows),
//! * the visual block: one row `[dx, dy]` per ray (`360 / beta` rows),
//! * the exit block: the two exit endpoints relative to the subject.
//!
//! Sectors and rays are anchored at the +x axis and run counter-clockwise.
//! All relative quantities are `entity - subject`. Static entities (wall
//! points, empty-sector arc midpoints) have zero absolute velocity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ray_cast, Point2, Segment, Vec2};
use crate::scene::{ordered_endpoints, Scene};

/// Extraction hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionParams {
    /// Interaction radius of the social disk, meters.
    pub radius: f64,
    /// Central angle of each social sector, degrees.
    pub alpha_deg: f64,
    /// Angular spacing of visual rays, degrees.
    pub beta_deg: f64,
    /// Distance of the virtual visual point for rays that hit no wall, meters.
    pub exit_distance: f64,
    /// Lookback window, in steps.
    pub window: usize,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        ExtractionParams {
            radius: 1.2,
            alpha_deg: 18.0,
            beta_deg: 5.0,
            exit_distance: 100.0,
            window: 8,
        }
    }
}

fn divides_circle(deg: f64) -> Option<usize> {
    if !(deg.is_finite() && deg > 0.0 && deg <= 360.0) {
        return None;
    }
    let n = 360.0 / deg;
    let r = n.round();
    ((n - r).abs() < 1e-9).then_some(r as usize)
}

impl ExtractionParams {
    pub fn validate(&self) -> Result<()> {
        if divides_circle(self.alpha_deg).is_none() {
            return Err(Error::InvalidParams(format!(
                "alpha = {}° does not divide 360°",
                self.alpha_deg
            )));
        }
        if divides_circle(self.beta_deg).is_none() {
            return Err(Error::InvalidParams(format!(
                "beta = {}° does not divide 360°",
                self.beta_deg
            )));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidParams("radius must be positive".into()));
        }
        if !(self.exit_distance.is_finite() && self.exit_distance > 0.0) {
            return Err(Error::InvalidParams("exit distance must be positive".into()));
        }
        if self.window == 0 {
            return Err(Error::InvalidParams("window must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of social sectors.
    pub fn sector_count(&self) -> usize {
        divides_circle(self.alpha_deg).unwrap_or(0)
    }

    /// Number of visual rays.
    pub fn ray_count(&self) -> usize {
        divides_circle(self.beta_deg).unwrap_or(0)
    }

    /// Length of one step feature: `2 + 4·sectors + 2·rays + 4`.
    pub fn step_dim(&self) -> usize {
        2 + 4 * self.sector_count() + 2 * self.ray_count() + 4
    }

    fn sector_start(&self, j: usize) -> f64 {
        (j as f64 * self.alpha_deg).to_radians()
    }

    fn ray_angle(&self, k: usize) -> f64 {
        (k as f64 * self.beta_deg).to_radians()
    }

    /// Sector holding a displacement; bins are half-open `[start, start+alpha)`.
    pub fn sector_of(&self, d: Vec2) -> usize {
        let n = self.sector_count();
        let deg = d.angle().to_degrees();
        // snap angles that are a rounding error below a bin edge onto the edge
        let k = (deg / self.alpha_deg + 1e-12).floor() as usize;
        k % n
    }
}

/// Position and velocity of a pedestrian.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Kinematics {
    pub position: Point2,
    pub velocity: Vec2,
}

impl Kinematics {
    pub fn new(position: Point2, velocity: Vec2) -> Self {
        Kinematics { position, velocity }
    }
}

/// One `[dx, dy, dvx, dvy]` row per sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialFeature(pub Vec<[f64; 4]>);

/// One `[dx, dy]` row per ray.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualFeature {
    pub rows: Vec<[f64; 2]>,
    /// Rays that hit no wall and were given the virtual exit point.
    pub misses: usize,
}

impl VisualFeature {
    pub fn miss_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.misses as f64 / self.rows.len() as f64
        }
    }
}

/// The two exit endpoints relative to the subject.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitFeature(pub [[f64; 2]; 2]);

/// Nearest wall point found inside a social sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallPoint {
    pub sector: usize,
    pub point: Point2,
    pub distance: f64,
}

/// Nearest point to `origin` of `wall ∩ wedge`, where the wedge spans
/// `[start, start + span]` radians counter-clockwise (closed).
fn nearest_in_wedge(origin: Point2, wall: &Segment, start: f64, span: f64) -> Option<Point2> {
    if span > std::f64::consts::PI + 1e-12 {
        let half = 0.5 * span;
        let a = nearest_in_wedge(origin, wall, start, half);
        let b = nearest_in_wedge(origin, wall, start + half, half);
        return match (a, b) {
            (Some(a), Some(b)) => Some(if a.distance(origin) <= b.distance(origin) { a } else { b }),
            (a, b) => a.or(b),
        };
    }
    let d0 = Point2::from_angle(start);
    let d1 = Point2::from_angle(start + span);
    let q0 = wall.p0 - origin;
    let e = wall.direction();
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    // keep c + t·k ≥ 0 on [lo, hi]
    let mut clip = |c: f64, k: f64| -> bool {
        const TOL: f64 = 1e-12;
        if k.abs() <= f64::EPSILON * (c.abs() + 1.0) {
            return c >= -TOL;
        }
        let t = -c / k;
        if k > 0.0 {
            lo = lo.max(t);
        } else {
            hi = hi.min(t);
        }
        lo <= hi + TOL
    };
    // left of the start ray, right of the end ray
    if !clip(d0.cross(q0), d0.cross(e)) || !clip(q0.cross(d1), e.cross(d1)) {
        return None;
    }
    let hi = hi.max(lo);
    let t = wall.project_param(origin).clamp(lo, hi);
    Some(wall.p0 + e * t)
}

/// For each sector of the disk of radius `params.radius` around `subject`,
/// the nearest point of any wall that lies inside the sector.
pub fn wall_points_in_disk(subject: Point2, walls: &[Segment], params: &ExtractionParams) -> Vec<WallPoint> {
    let span = params.alpha_deg.to_radians();
    let mut out = Vec::new();
    for j in 0..params.sector_count() {
        let start = params.sector_start(j);
        let mut best: Option<(f64, Point2)> = None;
        for wall in walls {
            if wall.distance_to(subject) > params.radius {
                continue;
            }
            if let Some(q) = nearest_in_wedge(subject, wall, start, span) {
                let d = q.distance(subject);
                if d <= params.radius && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, q));
                }
            }
        }
        if let Some((distance, point)) = best {
            out.push(WallPoint {
                sector: j,
                point,
                distance,
            });
        }
    }
    out
}

/// Radar-style nearest-neighbour social block.
///
/// In each sector the nearest entity, pedestrian (centre distance) or wall
/// point, within the radius is selected; an empty sector falls back to the
/// midpoint of its arc. `others` must not contain the subject itself.
pub fn extract_social(
    subject: Kinematics,
    others: &[Kinematics],
    walls: &[Segment],
    params: &ExtractionParams,
) -> SocialFeature {
    let n = params.sector_count();
    // (distance, relative position, absolute velocity)
    let mut best: Vec<Option<(f64, Vec2, Vec2)>> = vec![None; n];
    for other in others {
        let d = other.position - subject.position;
        let dist = d.norm();
        if dist > params.radius {
            continue;
        }
        let j = params.sector_of(d);
        if best[j].is_none_or(|(bd, _, _)| dist < bd) {
            best[j] = Some((dist, d, other.velocity));
        }
    }
    for wp in wall_points_in_disk(subject.position, walls, params) {
        if best[wp.sector].is_none_or(|(bd, _, _)| wp.distance < bd) {
            best[wp.sector] = Some((wp.distance, wp.point - subject.position, Vec2::ZERO));
        }
    }
    let half = 0.5 * params.alpha_deg;
    let rows = best
        .into_iter()
        .enumerate()
        .map(|(j, sel)| {
            let (d, v) = match sel {
                Some((_, d, v)) => (d, v),
                None => {
                    let mid = (j as f64 * params.alpha_deg + half).to_radians();
                    (Point2::from_angle(mid) * params.radius, Vec2::ZERO)
                }
            };
            let dv = v - subject.velocity;
            [d.x, d.y, dv.x, dv.y]
        })
        .collect();
    SocialFeature(rows)
}

/// Full-circle visual block: ray `k` leaves at `k·beta` from +x; its visual
/// point is the nearest wall hit, or the point at `exit_distance` when the ray
/// escapes through an opening.
pub fn extract_visual(subject: Point2, walls: &[Segment], params: &ExtractionParams) -> VisualFeature {
    let mut misses = 0;
    let rows = (0..params.ray_count())
        .map(|k| {
            let angle = params.ray_angle(k);
            let d = match ray_cast(subject, angle, walls) {
                Some(hit) => hit.point - subject,
                None => {
                    misses += 1;
                    Point2::from_angle(angle) * params.exit_distance
                }
            };
            [d.x, d.y]
        })
        .collect();
    VisualFeature { rows, misses }
}

pub fn extract_exit(subject: Point2, exit: (Point2, Point2)) -> ExitFeature {
    let (a, b) = ordered_endpoints(Segment::new(exit.0, exit.1));
    let (ra, rb) = (a - subject, b - subject);
    ExitFeature([[ra.x, ra.y], [rb.x, rb.y]])
}

/// Flat step feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFeature(pub Vec<f64>);

impl StepFeature {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Inverse of [`assemble_step`].
    pub fn split(
        &self,
        params: &ExtractionParams,
    ) -> Result<(Vec2, SocialFeature, Vec<[f64; 2]>, ExitFeature)> {
        if self.len() != params.step_dim() {
            return Err(Error::Shape {
                expected: format!("step feature of length {}", params.step_dim()),
                actual: format!("length {}", self.len()),
            });
        }
        let x = &self.0;
        let v = Vec2::new(x[0], x[1]);
        let mut at = 2;
        let social = (0..params.sector_count())
            .map(|_| {
                let r = [x[at], x[at + 1], x[at + 2], x[at + 3]];
                at += 4;
                r
            })
            .collect();
        let visual = (0..params.ray_count())
            .map(|_| {
                let r = [x[at], x[at + 1]];
                at += 2;
                r
            })
            .collect();
        let exit = ExitFeature([[x[at], x[at + 1]], [x[at + 2], x[at + 3]]]);
        Ok((v, SocialFeature(social), visual, exit))
    }
}

/// Concatenates `(v, S, G, E)` row-major.
pub fn assemble_step(
    params: &ExtractionParams,
    velocity: Vec2,
    social: &SocialFeature,
    visual: &[[f64; 2]],
    exit: &ExitFeature,
) -> Result<StepFeature> {
    if social.0.len() != params.sector_count() {
        return Err(Error::Shape {
            expected: format!("{} social rows", params.sector_count()),
            actual: format!("{} rows", social.0.len()),
        });
    }
    if visual.len() != params.ray_count() {
        return Err(Error::Shape {
            expected: format!("{} visual rows", params.ray_count()),
            actual: format!("{} rows", visual.len()),
        });
    }
    let mut out = Vec::with_capacity(params.step_dim());
    out.extend([velocity.x, velocity.y]);
    out.extend(social.0.iter().flatten());
    out.extend(visual.iter().flatten());
    out.extend(exit.0.iter().flatten());
    Ok(StepFeature(out))
}

/// `rows × dim` lookback window, oldest row first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFeature {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl WindowFeature {
    pub fn from_steps<'a>(steps: impl IntoIterator<Item = &'a StepFeature>) -> Result<Self> {
        let mut data = Vec::new();
        let mut rows = 0;
        let mut dim = None;
        for s in steps {
            match dim {
                None => dim = Some(s.len()),
                Some(d) if d != s.len() => {
                    return Err(Error::Shape {
                        expected: format!("rows of length {d}"),
                        actual: format!("row of length {}", s.len()),
                    })
                }
                _ => {}
            }
            data.extend_from_slice(s.as_slice());
            rows += 1;
        }
        Ok(WindowFeature {
            rows,
            dim: dim.unwrap_or(0),
            data,
        })
    }

    pub fn from_raw(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::Shape {
                expected: format!("{rows}×{dim} = {} values", rows * dim),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(WindowFeature { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.dim)
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Module-aware extraction against a scene.
#[derive(Debug, Clone, Copy)]
pub struct FeatureExtractor<'a> {
    pub scene: &'a Scene,
    pub params: ExtractionParams,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(scene: &'a Scene, params: ExtractionParams) -> Result<Self> {
        params.validate()?;
        Ok(FeatureExtractor { scene, params })
    }

    /// Step feature of `subject` standing in `module_id`; only that module's
    /// walls and exit are perceived, while `others` may be anywhere.
    pub fn step(&self, subject: Kinematics, module_id: &str, others: &[Kinematics]) -> Result<StepFeature> {
        Ok(self.step_with_visual(subject, module_id, others)?.0)
    }

    pub(crate) fn step_with_visual(
        &self,
        subject: Kinematics,
        module_id: &str,
        others: &[Kinematics],
    ) -> Result<(StepFeature, f64)> {
        let module = self.scene.module(module_id)?;
        let walls = module.active_walls();
        let social = extract_social(subject, others, &walls, &self.params);
        let visual = extract_visual(subject.position, &walls, &self.params);
        let exit = extract_exit(subject.position, module.exit_endpoints());
        let step = assemble_step(&self.params, subject.velocity, &social, &visual.rows, &exit)?;
        Ok((step, visual.miss_fraction()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ExtractionParams {
        ExtractionParams::default()
    }

    #[test]
    fn feature_lengths_follow_sector_and_ray_counts() {
        let p = params();
        assert_eq!(p.sector_count(), 20);
        assert_eq!(p.ray_count(), 72);
        assert_eq!(p.step_dim(), 230);
        let p18 = ExtractionParams { beta_deg: 18.0, ..p };
        assert_eq!(p18.step_dim(), 126);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = params();
        assert!(ExtractionParams { alpha_deg: 7.0, ..p }.validate().is_err());
        assert!(ExtractionParams { beta_deg: 0.0, ..p }.validate().is_err());
        assert!(ExtractionParams { radius: -1.0, ..p }.validate().is_err());
        assert!(ExtractionParams { window: 0, ..p }.validate().is_err());
        assert!(p.validate().is_ok());
    }

    #[test]
    fn empty_surroundings_give_arc_midpoints() {
        let v = Vec2::new(0.3, -0.2);
        let s = extract_social(Kinematics::new(Point2::ZERO, v), &[], &[], &params());
        assert_eq!(s.0.len(), 20);
        let r = s.0[0];
        assert!((r[0] - 1.185_226_009).abs() < 1e-6, "{}", r[0]);
        assert!((r[1] - 0.187_721_358).abs() < 1e-6, "{}", r[1]);
        assert_eq!([r[2], r[3]], [-0.3, 0.2]);
    }

    #[test]
    fn nearest_pedestrian_in_sector_wins() {
        let sub = Kinematics::new(Point2::ZERO, Vec2::ZERO);
        let a = Kinematics::new(Point2::from_angle(0.1) * 0.9, Vec2::new(1.0, 0.0));
        let b = Kinematics::new(Point2::from_angle(0.1) * 0.5, Vec2::new(0.5, 0.0));
        let s = extract_social(sub, &[a, b], &[], &params());
        assert!((s.0[0][0] - b.position.x).abs() < 1e-12);
        assert_eq!(s.0[0][2], 0.5);
    }

    #[test]
    fn wall_point_closer_than_pedestrian_wins() {
        let sub = Kinematics::new(Point2::ZERO, Vec2::new(1.0, 0.0));
        let ped = Kinematics::new(Point2::new(0.7, 0.05), Vec2::new(1.0, 0.0));
        let wall = Segment::from_coords(0.3, -2.0, 0.3, 2.0);
        let s = extract_social(sub, &[ped], &[wall], &params());
        assert!((s.0[0][0] - 0.3).abs() < 1e-12 && s.0[0][1].abs() < 1e-12);
        // static wall: relative velocity is minus the subject's
        assert_eq!([s.0[0][2], s.0[0][3]], [-1.0, 0.0]);
    }

    #[test]
    fn wall_point_in_first_sector() {
        let wall = Segment::from_coords(1.0, -5.0, 1.0, 5.0);
        let pts = wall_points_in_disk(Point2::ZERO, &[wall], &params());
        let first = pts.iter().find(|w| w.sector == 0).unwrap();
        assert!((first.point.x - 1.0).abs() < 1e-12 && first.point.y.abs() < 1e-12);
        assert!((first.distance - 1.0).abs() < 1e-12);
        // a sector whose wedge meets the wall only beyond R has no point
        assert!(pts.iter().all(|w| w.distance <= 1.2));
    }

    #[test]
    fn far_wall_gives_no_points() {
        let wall = Segment::from_coords(3.0, -5.0, 3.0, 5.0);
        assert!(wall_points_in_disk(Point2::ZERO, &[wall], &params()).is_empty());
    }

    #[test]
    fn pedestrian_on_sector_edge_goes_to_upper_bin() {
        let p = params();
        assert_eq!(p.sector_of(Point2::from_angle(18f64.to_radians())), 1);
        assert_eq!(p.sector_of(Point2::new(1.0, 0.0)), 0);
        assert_eq!(p.sector_of(Point2::new(1.0, -1e-12)), 19);
    }

    #[test]
    fn square_room_visual_points() {
        let walls = [
            Segment::from_coords(-2.0, -2.0, 2.0, -2.0),
            Segment::from_coords(2.0, -2.0, 2.0, 2.0),
            Segment::from_coords(2.0, 2.0, -2.0, 2.0),
            Segment::from_coords(-2.0, 2.0, -2.0, -2.0),
        ];
        let p = ExtractionParams { beta_deg: 90.0, ..params() };
        let g = extract_visual(Point2::ZERO, &walls, &p);
        let expect = [[2.0, 0.0], [0.0, 2.0], [-2.0, 0.0], [0.0, -2.0]];
        for (r, e) in g.rows.iter().zip(expect) {
            assert!((r[0] - e[0]).abs() < 1e-12 && (r[1] - e[1]).abs() < 1e-12, "{r:?}");
        }
        assert_eq!(g.misses, 0);
        // open the +x side around the 0° ray
        let open = [
            walls[0],
            Segment::from_coords(2.0, -2.0, 2.0, -0.5),
            Segment::from_coords(2.0, 0.5, 2.0, 2.0),
            walls[2],
            walls[3],
        ];
        let p = ExtractionParams {
            exit_distance: 100.0,
            ..p
        };
        let g = extract_visual(Point2::ZERO, &open, &p);
        assert_eq!(g.rows[0], [100.0, 0.0]);
        assert_eq!(g.misses, 1);
        assert_eq!(extract_visual(Point2::ZERO, &walls, &params()).rows.len(), 72);
    }

    #[test]
    fn exit_rows_are_relative_and_ordered() {
        let e = extract_exit(Point2::ZERO, (Point2::new(5.0, 0.6), Point2::new(5.0, -0.6)));
        assert_eq!(e.0, [[5.0, -0.6], [5.0, 0.6]]);
        let at = extract_exit(Point2::new(5.0, -0.6), (Point2::new(5.0, -0.6), Point2::new(5.0, 0.6)));
        assert_eq!(at.0[0], [0.0, 0.0]);
    }

    #[test]
    fn assemble_rejects_wrong_shapes() {
        let p = params();
        let s = SocialFeature(vec![[0.0; 4]; 19]);
        let e = ExitFeature([[0.0; 2]; 2]);
        assert!(assemble_step(&p, Vec2::ZERO, &s, &vec![[0.0; 2]; 72], &e).is_err());
        let s = SocialFeature(vec![[0.0; 4]; 20]);
        assert!(assemble_step(&p, Vec2::ZERO, &s, &vec![[0.0; 2]; 71], &e).is_err());
        let z = assemble_step(&p, Vec2::ZERO, &s, &vec![[0.0; 2]; 72], &e).unwrap();
        assert_eq!(z.len(), 230);
        assert!(z.0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn window_rows_in_time_order() {
        let a = StepFeature(vec![1.0, 2.0]);
        let b = StepFeature(vec![3.0, 4.0]);
        let w = WindowFeature::from_steps([&a, &b]).unwrap();
        assert_eq!(w.shape(), (2, 2));
        assert_eq!(w.row(1), &[3.0, 4.0]);
        assert!(WindowFeature::from_steps([&a, &StepFeature(vec![1.0])]).is_err());
    }
}
