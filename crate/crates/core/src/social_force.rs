//! Social force baseline: driving term, exponential and contact repulsion
//! between pedestrians and from walls.
//!
//! Runs on the same [`SimulationRun`] as the data-driven simulator and
//! produces the same [`SimulationOutput`], so both can be evaluated and
//! written identically.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{first_crossing, polygon_boundary_distance, Point2, Segment, Vec2, EPS};
use crate::rng;
use crate::scene::ModuleRegion;
use crate::simulator::{self, SimTrajectory, SimulationOutput, SimulationRun};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfParams {
    /// Relaxation time, s.
    pub tau: f64,
    /// Interaction strength, N.
    pub a: f64,
    /// Interaction range, m.
    pub b: f64,
    /// Body force constant, kg/s².
    pub k: f64,
    /// Sliding friction constant, kg/(m·s).
    pub kappa: f64,
    pub mass: f64,
    pub radius: f64,
    pub desired_speed_mean: f64,
    /// Standard deviation of the desired speed.
    pub desired_speed_sd: f64,
    pub desired_speed_min: f64,
    pub desired_speed_max: f64,
    /// Speeds are capped at this multiple of the desired speed.
    pub max_speed_factor: f64,
}

impl Default for SfParams {
    fn default() -> Self {
        SfParams {
            tau: 0.5,
            a: 2000.0,
            b: 0.08,
            k: 1.2e5,
            kappa: 2.4e5,
            mass: 80.0,
            radius: 0.3,
            desired_speed_mean: 1.4,
            desired_speed_sd: 0.2,
            desired_speed_min: 0.5,
            desired_speed_max: 2.5,
            max_speed_factor: 1.3,
        }
    }
}

impl SfParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.tau,
            self.a,
            self.b,
            self.k,
            self.kappa,
            self.mass,
            self.radius,
            self.desired_speed_min,
            self.max_speed_factor,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParams("social force constants must be positive".into()));
        }
        if !(self.desired_speed_sd >= 0.0) || self.desired_speed_max < self.desired_speed_min {
            return Err(Error::InvalidParams("invalid desired speed distribution".into()));
        }
        Ok(())
    }

    /// Desired speed of `ped_id` drawn from its own random stream.
    pub fn desired_speed(&self, seed: u64, ped_id: i64) -> f64 {
        let mut r = rng::indexed_stream(seed, "sf-desired-speed", &[ped_id as u64]);
        let v = Normal::new(self.desired_speed_mean, self.desired_speed_sd)
            .map(|n| n.sample(&mut r))
            .unwrap_or(self.desired_speed_mean);
        v.clamp(self.desired_speed_min, self.desired_speed_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfAgent {
    pub position: Point2,
    pub velocity: Vec2,
    pub desired_speed: f64,
    /// Unit desired direction.
    pub direction: Vec2,
}

fn contact(x: f64) -> f64 {
    x.max(0.0)
}

fn unit_or_fallback(d: Vec2, what: &str) -> Vec2 {
    d.normalized().unwrap_or_else(|| {
        log::warn!("{what}: coincident positions, repelling along +x");
        Vec2::new(1.0, 0.0)
    })
}

/// Force exerted by `other` on `me`, N.
pub fn pedestrian_force(me: &SfAgent, other: &SfAgent, p: &SfParams) -> Vec2 {
    let diff = me.position - other.position;
    let d = diff.norm();
    let n = unit_or_fallback(diff, "pedestrian repulsion");
    let t = n.perp();
    let overlap = 2.0 * p.radius - d;
    let dv_t = (other.velocity - me.velocity).dot(t);
    n * (p.a * (overlap / p.b).exp() + p.k * contact(overlap)) + t * (p.kappa * contact(overlap) * dv_t)
}

/// Force exerted by `wall` on `me`, N.
pub fn wall_force(me: &SfAgent, wall: &Segment, p: &SfParams) -> Vec2 {
    let diff = me.position - wall.closest_point(me.position);
    let d = diff.norm();
    let n = unit_or_fallback(diff, "wall repulsion");
    let t = n.perp();
    let overlap = p.radius - d;
    n * (p.a * (overlap / p.b).exp() + p.k * contact(overlap)) - t * (p.kappa * contact(overlap) * me.velocity.dot(t))
}

/// Non-driving acceleration of agent `i`: pedestrian and wall forces over
/// mass.
fn interaction_acceleration(i: usize, agents: &[SfAgent], walls: &[Segment], p: &SfParams) -> Vec2 {
    let me = &agents[i];
    let mut f = Vec2::ZERO;
    for (j, other) in agents.iter().enumerate() {
        if j != i {
            f += pedestrian_force(me, other, p);
        }
    }
    for w in walls {
        f += wall_force(me, w, p);
    }
    f * (1.0 / p.mass)
}

/// Total acceleration of agent `i`, m/s².
pub fn sf_acceleration(i: usize, agents: &[SfAgent], walls: &[Segment], p: &SfParams) -> Vec2 {
    let me = &agents[i];
    let drive = (me.direction * me.desired_speed - me.velocity) * (1.0 / p.tau);
    drive + interaction_acceleration(i, agents, walls, p)
}

/// New velocity after `dt`: the relaxation toward the desired velocity is
/// integrated exactly, the interaction forces explicitly, and the result is
/// capped at `max_speed_factor · v_d`.
fn advance_velocity(a: &SfAgent, interaction: Vec2, dt: f64, p: &SfParams) -> Vec2 {
    let target = a.direction * a.desired_speed;
    let decay = (-dt / p.tau).exp();
    let v = target + (a.velocity - target) * decay + interaction * dt;
    let cap = p.max_speed_factor * a.desired_speed;
    let s = v.norm();
    if s > cap {
        v * (cap / s)
    } else {
        v
    }
}

/// One synchronous semi-implicit Euler step of free agents among `walls`:
/// velocities first, then positions with the new velocities.
pub fn sf_step(agents: &mut [SfAgent], walls: &[Segment], dt: f64, p: &SfParams) {
    let snapshot = agents.to_vec();
    let acc: Vec<Vec2> = (0..snapshot.len())
        .into_par_iter()
        .map(|i| interaction_acceleration(i, &snapshot, walls, p))
        .collect();
    for (a, f) in agents.iter_mut().zip(acc) {
        a.velocity = advance_velocity(a, f, dt, p);
        a.position += a.velocity * dt;
    }
}

/// Side of `wall` on which the module's walkable area lies, as a unit normal.
pub(crate) fn inward_normal(module: &ModuleRegion, wall: &Segment) -> Option<Vec2> {
    let n = wall.direction().perp().normalized()?;
    let probe = wall.midpoint() + n * 1e-6;
    Some(if module.contains(probe) { n } else { -n })
}

/// Exit segment with both ends pulled in by `r` (never past its midpoint).
fn shrunk_exit(module: &ModuleRegion, r: f64) -> Segment {
    let e = module.exit;
    let len = e.length();
    let s = (r / len).min(0.5);
    Segment::new(e.p0.lerp(e.p1, s), e.p0.lerp(e.p1, 1.0 - s))
}

/// Reflex wall corners (where the walkable area wraps around a vertex shared
/// by two walls) and their detour points, pushed `r` along both walls'
/// inward normals.
fn reflex_corners(module: &ModuleRegion, r: f64) -> Vec<(Point2, Point2)> {
    let walls = &module.walls;
    let mut out = Vec::new();
    // direction along `w` continuing past its endpoint `v`
    let beyond = |w: &Segment, v: Point2| if w.p1.distance(v) < 1e-9 { w.direction() } else { -w.direction() };
    for (i, a) in walls.iter().enumerate() {
        for b in &walls[i + 1..] {
            for va in [a.p0, a.p1] {
                if ![b.p0, b.p1].iter().any(|vb| vb.distance(va) < 1e-9) {
                    continue;
                }
                if a.direction().cross(b.direction()).abs() < 1e-12 {
                    continue;
                }
                let (Some(da), Some(db)) = (beyond(a, va).normalized(), beyond(b, va).normalized()) else {
                    continue;
                };
                let inside = |q: Point2| module.contains(q) && polygon_boundary_distance(&module.boundary, q) > 1e-9;
                if !(inside(va + da * 1e-6) && inside(va + db * 1e-6)) {
                    continue;
                }
                if let (Some(na), Some(nb)) = (inward_normal(module, a), inward_normal(module, b)) {
                    let c = va + (na + nb) * r;
                    if module.contains(c) {
                        out.push((va, c));
                    }
                }
            }
        }
    }
    out
}

/// Point the pedestrian heads for: the nearest point of the shrunk exit if
/// the straight path to it neither crosses a wall nor cuts a reflex corner
/// closer than `r`, otherwise the corner detour giving the shortest two-leg
/// path.
pub fn route_target(p: Point2, module: &ModuleRegion, r: f64) -> Point2 {
    let exit = shrunk_exit(module, r);
    let walls = module.active_walls();
    let corners = reflex_corners(module, r);
    let visible = |a: Point2, b: Point2| first_crossing(a, b, &walls).is_none();
    let clear = |a: Point2, b: Point2| {
        let path = Segment::new(a, b);
        visible(a, b)
            && corners
                .iter()
                .all(|(v, _)| path.distance_to(*v) >= r.min(a.distance(*v)) - 1e-9)
    };
    let direct = exit.closest_point(p);
    if clear(p, direct) {
        return direct;
    }
    corners
        .iter()
        .map(|(_, c)| *c)
        .filter(|&c| visible(p, c) && visible(c, exit.closest_point(c)))
        .min_by(|a, b| {
            let la = p.distance(*a) + a.distance(exit.closest_point(*a));
            let lb = p.distance(*b) + b.distance(exit.closest_point(*b));
            la.total_cmp(&lb)
        })
        .unwrap_or(direct)
}

/// Unit desired direction at `p`; `previous` is kept when `p` already sits on
/// the target.
pub fn desired_direction(p: Point2, module: &ModuleRegion, r: f64, previous: Vec2) -> Vec2 {
    let t = route_target(p, module, r);
    if p.distance(t) <= EPS {
        return previous;
    }
    (t - p).normalized().unwrap_or(previous)
}

/// Runs the social force model on `run`. Pedestrians replay their seeded
/// positions like in the data-driven simulator, then start from the velocity
/// of their last seeded step. Steps that would cross a barrier are rejected:
/// the pedestrian stops in place and the step is flagged as a reset.
pub fn simulate_sf(run: &SimulationRun, params: &SfParams, seed: u64) -> Result<SimulationOutput> {
    params.validate()?;
    let w = run.params.window.max(2);
    run.validate(w)?;
    let scene = &run.scene;
    let dt = run.dt;

    struct State {
        traj: SimTrajectory,
        seed: Vec<Point2>,
        agent: SfAgent,
        active: bool,
    }
    let mut seeds = run.seeds.clone();
    seeds.sort_by_key(|s| s.ped_id);
    let mut states: Vec<State> = seeds
        .into_iter()
        .map(|s| State {
            traj: SimTrajectory {
                ped_id: s.ped_id,
                entry_step: s.entry_step,
                positions: Vec::new(),
                modules: Vec::new(),
                reset: Vec::new(),
                exited: false,
            },
            agent: SfAgent {
                position: s.positions[0],
                velocity: Vec2::ZERO,
                desired_speed: params.desired_speed(seed, s.ped_id),
                direction: Vec2::new(1.0, 0.0),
            },
            seed: s.positions[..w].to_vec(),
            active: false,
        })
        .collect();
    let first = states.iter().map(|s| s.traj.entry_step).min().unwrap_or(0);
    let mut step = first;
    let mut steps_done = 0;
    let pending = |states: &[State]| states.iter().any(|s| s.active || s.traj.positions.is_empty());
    let mut truncated = false;
    while pending(&states) {
        if steps_done >= run.max_steps {
            truncated = true;
            log::warn!("social force run `{}` truncated after {steps_done} steps", run.name);
            break;
        }
        for s in &mut states {
            if s.traj.entry_step == step && s.traj.positions.is_empty() {
                let p = s.seed[0];
                s.traj.positions.push(p);
                s.traj.modules.push(simulator::module_of(scene, p).expect("validated seed"));
                s.traj.reset.push(false);
                s.active = true;
            }
        }
        let active: Vec<usize> = (0..states.len()).filter(|&i| states[i].active).collect();
        // refresh desired directions against the frozen state
        let mut agents: Vec<SfAgent> = active
            .iter()
            .map(|&i| {
                let s = &states[i];
                let module = &scene.modules()[*s.traj.modules.last().expect("active")];
                let mut a = s.agent;
                a.direction = desired_direction(a.position, module, params.radius, a.direction);
                a
            })
            .collect();
        let forces: Vec<Vec2> = (0..agents.len())
            .into_par_iter()
            .map(|j| {
                let s = &states[active[j]];
                let walls = scene.modules()[*s.traj.modules.last().expect("active")].active_walls();
                interaction_acceleration(j, &agents, &walls, params)
            })
            .collect();
        for (j, &i) in active.iter().enumerate() {
            let s = &mut states[i];
            let k = s.traj.positions.len() - 1;
            let cur = s.traj.positions[k];
            let module = s.traj.modules[k];
            let a = &mut agents[j];
            if k + 1 < s.seed.len() {
                let next = s.seed[k + 1];
                a.velocity = (next - cur) * (1.0 / dt);
                a.position = next;
                s.traj.positions.push(next);
                s.traj.modules.push(simulator::module_of(scene, next).expect("validated seed"));
                s.traj.reset.push(false);
                s.agent = *a;
                continue;
            }
            a.velocity = advance_velocity(a, forces[j], dt, params);
            let next = cur + a.velocity * dt;
            let blocked = first_crossing(cur, next, &simulator::barriers(scene, module)).is_some();
            if !blocked && simulator::crosses_terminal_exit(scene, module, cur, next) {
                s.traj.positions.push(next);
                s.traj.modules.push(module);
                s.traj.reset.push(false);
                s.traj.exited = true;
                s.active = false;
                continue;
            }
            match (blocked, simulator::module_of(scene, next)) {
                (false, Some(m)) => {
                    a.position = next;
                    s.traj.positions.push(next);
                    s.traj.modules.push(m);
                    s.traj.reset.push(false);
                }
                _ => {
                    a.velocity = Vec2::ZERO;
                    s.traj.positions.push(cur);
                    s.traj.modules.push(module);
                    s.traj.reset.push(true);
                }
            }
            s.agent = *a;
        }
        step += 1;
        steps_done += 1;
    }
    Ok(SimulationOutput {
        run: run.name.clone(),
        dt,
        first_step: first,
        steps: steps_done,
        truncated,
        trajectories: states
            .into_iter()
            .filter(|s| !s.traj.positions.is_empty())
            .map(|s| s.traj)
            .collect(),
    })
}

/// Desired speeds used for every seeded pedestrian of `run`.
pub fn desired_speeds(run: &SimulationRun, params: &SfParams, seed: u64) -> BTreeMap<i64, f64> {
    run.seeds
        .iter()
        .map(|s| (s.ped_id, params.desired_speed(seed, s.ped_id)))
        .collect()
}
