//! Rolling-forecast simulation.
//!
//! Every step, each active pedestrian's step feature is extracted against a
//! frozen snapshot of the current positions, the model predicts the next
//! velocity for everyone with a full window, and all moves are committed
//! together. Pedestrians enter by replaying their seeded positions, one per
//! step, and leave when they cross the exit of the terminal module.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ExtractionParams, FeatureExtractor, Kinematics, StepFeature, WindowFeature};
use crate::geometry::{first_crossing, Point2, Segment, Vec2};
use crate::scene::{ModuleKind, Scene};
use crate::trajectory::Trajectory;
use crate::vpnn::Network;

/// Pedestrians within this distance of a module are classified to it.
pub const MODULE_SNAP: f64 = 0.02;
/// Guided positions after a reset keep at least this distance from the wall.
pub const RESET_CLEARANCE: f64 = 0.05;
/// Lower bound on the guided speed after a reset, m/s.
pub const RESET_MIN_SPEED: f64 = 0.1;

/// Predicts next-step velocities from lookback windows.
pub trait VelocityModel: Sync {
    fn predict(&self, windows: &[&WindowFeature]) -> Result<Vec<Vec2>>;
}

impl VelocityModel for Network {
    fn predict(&self, windows: &[&WindowFeature]) -> Result<Vec<Vec2>> {
        self.predict_batch(windows)
    }
}

/// Adapts a per-window closure into a [`VelocityModel`].
pub struct FnModel<F>(pub F);

impl<F: Fn(&WindowFeature) -> Vec2 + Sync> VelocityModel for FnModel<F> {
    fn predict(&self, windows: &[&WindowFeature]) -> Result<Vec<Vec2>> {
        Ok(windows.iter().map(|w| (self.0)(w)).collect())
    }
}

/// Initial state of one simulated pedestrian: the positions it replays from
/// `entry_step` on before the model takes over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianSeed {
    pub ped_id: i64,
    pub entry_step: i64,
    pub positions: Vec<Point2>,
}

impl PedestrianSeed {
    /// First `window` positions of an observed trajectory.
    pub fn from_trajectory(t: &Trajectory, window: usize) -> Option<Self> {
        (t.len() >= window.max(2)).then(|| PedestrianSeed {
            ped_id: t.ped_id,
            entry_step: t.t0,
            positions: t.positions[..window.max(2)].to_vec(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub name: String,
    pub scene: Scene,
    pub dt: f64,
    pub seeds: Vec<PedestrianSeed>,
    pub params: ExtractionParams,
    /// Steps after the first entry before the run is cut off.
    pub max_steps: usize,
}

impl SimulationRun {
    pub fn validate(&self, min_seed_len: usize) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams("dt must be positive".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for s in &self.seeds {
            if !ids.insert(s.ped_id) {
                return Err(Error::Precondition(format!("duplicate pedestrian id {}", s.ped_id)));
            }
            if s.positions.len() < min_seed_len {
                return Err(Error::Precondition(format!(
                    "pedestrian {} has {} seed positions, {} needed",
                    s.ped_id,
                    s.positions.len(),
                    min_seed_len
                )));
            }
            if let Some(p) = s.positions.iter().find(|p| self.scene.classify(**p, MODULE_SNAP).is_none()) {
                return Err(Error::Precondition(format!(
                    "seed position ({}, {}) of pedestrian {} lies outside the scene",
                    p.x, p.y, s.ped_id
                )));
            }
        }
        Ok(())
    }
}

/// Output trajectory of one pedestrian; index `k` is step `entry_step + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrajectory {
    pub ped_id: i64,
    pub entry_step: i64,
    pub positions: Vec<Point2>,
    /// Module index per position.
    pub modules: Vec<usize>,
    pub reset: Vec<bool>,
    /// Whether the last position lies past the terminal exit.
    pub exited: bool,
}

impl SimTrajectory {
    pub fn to_trajectory(&self, dt: f64) -> Trajectory {
        Trajectory::new(self.ped_id, self.entry_step, dt, self.positions.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub run: String,
    pub dt: f64,
    pub first_step: i64,
    pub steps: usize,
    pub truncated: bool,
    pub trajectories: Vec<SimTrajectory>,
}

impl SimulationOutput {
    pub fn to_trajectories(&self) -> Vec<Trajectory> {
        self.trajectories.iter().map(|t| t.to_trajectory(self.dt)).collect()
    }

    pub fn reset_count(&self) -> usize {
        self.trajectories.iter().map(|t| t.reset.iter().filter(|r| **r).count()).sum()
    }
}

#[derive(Debug, Clone)]
struct Ped {
    seed: PedestrianSeed,
    traj: SimTrajectory,
    /// Step features of the most recent steps, oldest first.
    features: VecDeque<(i64, StepFeature)>,
    active: bool,
}

impl Ped {
    fn index(&self, step: i64) -> Option<usize> {
        usize::try_from(step - self.traj.entry_step)
            .ok()
            .filter(|&k| k < self.traj.positions.len())
    }

    /// Present in the scene at `step` (positions past the exit excluded).
    fn present_at(&self, step: i64) -> bool {
        match self.index(step) {
            Some(k) => !(self.traj.exited && k + 1 == self.traj.positions.len()),
            None => false,
        }
    }

    fn velocity_at(positions: &[Point2], k: usize, dt: f64) -> Vec2 {
        if positions.len() < 2 {
            return Vec2::ZERO;
        }
        let k = k.max(1);
        (positions[k] - positions[k - 1]) * (1.0 / dt)
    }

    fn kinematics_at(&self, step: i64, dt: f64) -> Option<Kinematics> {
        let k = self.index(step)?;
        let p = &self.traj.positions;
        // a pedestrian seen at its first step moves like its second step
        let v = if k == 0 {
            if p.len() > 1 {
                Self::velocity_at(p, 1, dt)
            } else {
                Self::velocity_at(&self.seed.positions, 1, dt)
            }
        } else {
            Self::velocity_at(p, k, dt)
        };
        Some(Kinematics::new(p[k], v))
    }
}

/// What happens to one pedestrian during a step, computed against the frozen
/// state.
#[derive(Debug)]
enum Update {
    /// Append a position (seed replay or prediction).
    Move {
        next: Point2,
        module: usize,
        exited: bool,
    },
    /// Overwrite positions from index `from` on and append the rest.
    Reset {
        from: usize,
        positions: Vec<Point2>,
        modules: Vec<usize>,
        exited: bool,
    },
}

/// Stepper over one [`SimulationRun`].
pub struct Simulator<'a, M: VelocityModel + ?Sized> {
    run: &'a SimulationRun,
    model: &'a M,
    extractor: FeatureExtractor<'a>,
    peds: Vec<Ped>,
    step: i64,
    first_step: i64,
    steps_done: usize,
}

impl<'a, M: VelocityModel + ?Sized> Simulator<'a, M> {
    pub fn new(run: &'a SimulationRun, model: &'a M) -> Result<Self> {
        run.validate(run.params.window.max(2))?;
        let extractor = FeatureExtractor::new(&run.scene, run.params)?;
        let mut seeds = run.seeds.clone();
        seeds.sort_by_key(|s| s.ped_id);
        let peds = seeds
            .into_iter()
            .map(|mut s| {
                s.positions.truncate(run.params.window.max(2));
                Ped {
                    traj: SimTrajectory {
                        ped_id: s.ped_id,
                        entry_step: s.entry_step,
                        positions: Vec::new(),
                        modules: Vec::new(),
                        reset: Vec::new(),
                        exited: false,
                    },
                    seed: s,
                    features: VecDeque::new(),
                    active: false,
                }
            })
            .collect::<Vec<_>>();
        let first = peds.iter().map(|p| p.seed.entry_step).min().unwrap_or(0);
        Ok(Simulator {
            run,
            model,
            extractor,
            peds,
            step: first,
            first_step: first,
            steps_done: 0,
        })
    }

    pub fn current_step(&self) -> i64 {
        self.step
    }

    /// Pedestrians that are active or have yet to enter.
    pub fn pending(&self) -> bool {
        self.peds.iter().any(|p| p.active || p.traj.positions.is_empty())
    }

    /// Current positions of active pedestrians, by id.
    pub fn positions(&self) -> BTreeMap<i64, Point2> {
        self.peds
            .iter()
            .filter(|p| p.active)
            .map(|p| (p.seed.ped_id, *p.traj.positions.last().expect("active pedestrians have positions")))
            .collect()
    }

    fn module_of(&self, p: Point2) -> Option<usize> {
        module_of(&self.run.scene, p)
    }

    fn others_at(&self, step: i64, except: i64) -> Vec<Kinematics> {
        self.peds
            .iter()
            .filter(|p| p.seed.ped_id != except && p.present_at(step))
            .filter_map(|p| p.kinematics_at(step, self.run.dt))
            .collect()
    }

    fn barriers(&self, module: usize) -> Vec<Segment> {
        barriers(&self.run.scene, module)
    }

    fn crosses_terminal_exit(&self, module: usize, a: Point2, b: Point2) -> bool {
        crosses_terminal_exit(&self.run.scene, module, a, b)
    }

    /// Advances one step, processing pedestrians in id order.
    pub fn step(&mut self) -> Result<()> {
        self.step_ordered(None)
    }

    /// Advances one step, computing pedestrian updates in the given order of
    /// ids (unlisted pedestrians follow in id order). All updates read the
    /// same frozen state, so the order cannot change the result.
    pub fn step_ordered(&mut self, order: Option<&[i64]>) -> Result<()> {
        let t = self.step;
        let dt = self.run.dt;
        // entries
        for p in &mut self.peds {
            if p.seed.entry_step == t && p.traj.positions.is_empty() {
                let pos = p.seed.positions[0];
                let id = self.run.scene.classify(pos, MODULE_SNAP).expect("validated seed");
                let module = self.run.scene.index_of(id)?;
                p.traj.positions.push(pos);
                p.traj.modules.push(module);
                p.traj.reset.push(false);
                p.active = true;
            }
        }

        let mut idx: Vec<usize> = (0..self.peds.len()).filter(|&i| self.peds[i].active).collect();
        if let Some(order) = order {
            let rank: BTreeMap<i64, usize> = order.iter().enumerate().map(|(r, id)| (*id, r)).collect();
            idx.sort_by_key(|&i| (rank.get(&self.peds[i].seed.ped_id).copied().unwrap_or(usize::MAX), self.peds[i].seed.ped_id));
        }

        // features at step t
        let features: Vec<Result<StepFeature>> = idx
            .par_iter()
            .map(|&i| {
                let p = &self.peds[i];
                let kin = p.kinematics_at(t, dt).expect("active pedestrian has a position at t");
                let module = *p.traj.modules.last().expect("active");
                let others = self.others_at(t, p.seed.ped_id);
                self.extractor.step(kin, &self.run.scene.modules()[module].id, &others)
            })
            .collect();
        let mut windows: Vec<(usize, WindowFeature)> = Vec::new();
        let mut new_features = Vec::with_capacity(idx.len());
        for (&i, f) in idx.iter().zip(features) {
            let f = f?;
            let p = &self.peds[i];
            let k = p.index(t).expect("active");
            if k + 1 >= p.seed.positions.len() {
                let w = self.run.params.window;
                let hist: Vec<&StepFeature> = p
                    .features
                    .iter()
                    .skip((p.features.len() + 1).saturating_sub(w))
                    .map(|(_, s)| s)
                    .chain(std::iter::once(&f))
                    .collect();
                if hist.len() == w {
                    windows.push((i, WindowFeature::from_steps(hist)?));
                }
            }
            new_features.push((i, f));
        }
        let refs: Vec<&WindowFeature> = windows.iter().map(|(_, w)| w).collect();
        let predictions = self.model.predict(&refs)?;
        if predictions.len() != refs.len() {
            return Err(Error::Shape {
                expected: format!("{} predictions", refs.len()),
                actual: format!("{}", predictions.len()),
            });
        }
        let predicted: BTreeMap<usize, Vec2> = windows.iter().map(|(i, _)| *i).zip(predictions).collect();

        // proposals and resets against the frozen state
        let updates: Vec<(usize, Update)> = idx
            .iter()
            .map(|&i| Ok((i, self.plan(i, t, predicted.get(&i).copied())?)))
            .collect::<Result<_>>()?;
        let mut refreshed: Vec<(usize, Vec<(i64, StepFeature)>)> = Vec::new();
        for (i, u) in &updates {
            if let Update::Reset { from, positions, .. } = u {
                refreshed.push((*i, self.reextract(*i, *from, positions)?));
            }
        }

        // commit
        let w = self.run.params.window;
        for (i, f) in new_features {
            let p = &mut self.peds[i];
            p.features.push_back((t, f));
            while p.features.len() > w {
                p.features.pop_front();
            }
        }
        for (i, u) in updates {
            let p = &mut self.peds[i];
            match u {
                Update::Move { next, module, exited } => {
                    p.traj.positions.push(next);
                    p.traj.modules.push(module);
                    p.traj.reset.push(false);
                    if exited {
                        p.traj.exited = true;
                        p.active = false;
                    }
                }
                Update::Reset {
                    from,
                    positions,
                    modules,
                    exited,
                } => {
                    p.traj.positions.truncate(from);
                    p.traj.modules.truncate(from);
                    p.traj.reset.truncate(from);
                    for (q, m) in positions.into_iter().zip(modules) {
                        p.traj.positions.push(q);
                        p.traj.modules.push(m);
                        p.traj.reset.push(true);
                    }
                    if exited {
                        p.traj.exited = true;
                        p.active = false;
                    }
                }
            }
        }
        for (i, feats) in refreshed {
            let p = &mut self.peds[i];
            for (s, f) in feats {
                if let Some(slot) = p.features.iter_mut().find(|(fs, _)| *fs == s) {
                    slot.1 = f;
                }
            }
        }
        self.step += 1;
        self.steps_done += 1;
        Ok(())
    }

    /// Next position of pedestrian `i` (seed replay or prediction), or a
    /// reset of its recent history when the move breaks through a wall.
    fn plan(&self, i: usize, t: i64, v: Option<Vec2>) -> Result<Update> {
        let p = &self.peds[i];
        let k = p.index(t).expect("active");
        let cur = p.traj.positions[k];
        let module = p.traj.modules[k];
        if k + 1 < p.seed.positions.len() {
            let next = p.seed.positions[k + 1];
            let m = self.module_of(next).expect("validated seed");
            return Ok(Update::Move {
                next,
                module: m,
                exited: false,
            });
        }
        let Some(v) = v else {
            // window not yet full: hold position
            return Ok(Update::Move {
                next: cur,
                module,
                exited: false,
            });
        };
        let next = cur + v * self.run.dt;
        if !next.is_finite() {
            return Err(Error::Precondition(format!(
                "non-finite prediction for pedestrian {} at step {t}",
                p.seed.ped_id
            )));
        }
        let barriers = self.barriers(module);
        let hit = first_crossing(cur, next, &barriers).map(|(w, _)| barriers[w]);
        if hit.is_none() && self.crosses_terminal_exit(module, cur, next) {
            return Ok(Update::Move {
                next,
                module,
                exited: true,
            });
        }
        match (hit, self.module_of(next)) {
            (None, Some(m)) => Ok(Update::Move {
                next,
                module: m,
                exited: false,
            }),
            (hit, _) => {
                let wall = hit.unwrap_or_else(|| nearest_segment(&barriers, next));
                self.reset(i, next, module, wall)
            }
        }
    }

    /// Rewrites up to the last `w` positions (never the seeded prefix) as a
    /// guided straight-line walk.
    fn reset(&self, i: usize, proposed: Point2, module: usize, wall: Segment) -> Result<Update> {
        let p = &self.peds[i];
        let w = self.run.params.window;
        let dt = self.run.dt;
        let mut old = p.traj.positions.clone();
        old.push(proposed);
        let n = old.len() - 1;
        let anchor_idx = n.saturating_sub(w).max(p.seed.positions.len() - 1);
        let anchor = old[anchor_idx];
        let steps = n - anchor_idx;
        let mean_speed =
            (anchor_idx + 1..=n).map(|k| old[k].distance(old[k - 1]) / dt).sum::<f64>() / steps as f64;
        let speed = if mean_speed.is_finite() {
            mean_speed.max(RESET_MIN_SPEED)
        } else {
            RESET_MIN_SPEED
        };

        let m = &self.run.scene.modules()[module];
        let exit_mid = m.exit.midpoint();
        let dir = match m.kind {
            ModuleKind::Bottleneck => (exit_mid - anchor).normalized(),
            _ => wall.direction().normalized().map(|d| {
                if d.dot(exit_mid - anchor) < 0.0 {
                    -d
                } else {
                    d
                }
            }),
        }
        .unwrap_or(Vec2::ZERO);

        // unit normal of the wall pointing to the anchor's side
        let normal = wall.direction().perp().normalized().map(|nrm| {
            let side = (anchor - wall.p0).dot(nrm);
            if side < 0.0 {
                -nrm
            } else {
                nrm
            }
        });
        let clamp = |q: Point2| -> Point2 {
            let Some(nrm) = normal else { return q };
            let c = wall.closest_point(q);
            let d = q.distance(c);
            let sd = (q - wall.p0).dot(nrm);
            if d < RESET_CLEARANCE && sd < RESET_CLEARANCE {
                q + nrm * (RESET_CLEARANCE - sd)
            } else {
                q
            }
        };
        let guided: Vec<Point2> = (1..=steps).map(|j| clamp(anchor + dir * (speed * dt * j as f64))).collect();
        if let Some((positions, modules, exited)) = self.validate_path(anchor, module, &guided) {
            return Ok(Update::Reset {
                from: anchor_idx + 1,
                positions,
                modules,
                exited,
            });
        }
        let hold = vec![anchor; steps];
        let anchor_module = p.traj.modules[anchor_idx];
        Ok(Update::Reset {
            from: anchor_idx + 1,
            positions: hold,
            modules: vec![anchor_module; steps],
            exited: false,
        })
    }

    /// Modules along a guided path, or `None` if it breaks through a barrier
    /// or leaves the scene.
    fn validate_path(&self, start: Point2, module: usize, path: &[Point2]) -> Option<(Vec<Point2>, Vec<usize>, bool)> {
        let mut prev = start;
        let mut cur_module = module;
        let mut out = Vec::with_capacity(path.len());
        let mut modules = Vec::with_capacity(path.len());
        for &q in path {
            if first_crossing(prev, q, &self.barriers(cur_module)).is_some() {
                return None;
            }
            if self.crosses_terminal_exit(cur_module, prev, q) {
                out.push(q);
                modules.push(cur_module);
                return Some((out, modules, true));
            }
            cur_module = self.module_of(q)?;
            out.push(q);
            modules.push(cur_module);
            prev = q;
        }
        Some((out, modules, false))
    }

    /// Step features for the rewritten steps that are still in the window.
    fn reextract(&self, i: usize, from: usize, new_positions: &[Point2]) -> Result<Vec<(i64, StepFeature)>> {
        let p = &self.peds[i];
        let mut positions = p.traj.positions[..from].to_vec();
        positions.extend_from_slice(new_positions);
        let dt = self.run.dt;
        // the feature at the current step is pushed during this commit too
        let steps: Vec<i64> = p.features.iter().map(|(s, _)| *s).chain(std::iter::once(self.step)).collect();
        let mut feats = Vec::new();
        for s in steps {
            let k = (s - p.traj.entry_step) as usize;
            if k < from || k >= positions.len() {
                continue;
            }
            let pos = positions[k];
            let v = Ped::velocity_at(&positions, k, dt);
            let Some(module) = self.module_of(pos) else {
                continue;
            };
            let others = self.others_at(s, p.seed.ped_id);
            let f = self
                .extractor
                .step(Kinematics::new(pos, v), &self.run.scene.modules()[module].id, &others)?;
            feats.push((s, f));
        }
        Ok(feats)
    }

    /// Runs until everyone has left or `max_steps` is reached.
    pub fn run(mut self) -> Result<SimulationOutput> {
        while self.pending() {
            if self.steps_done >= self.run.max_steps {
                log::warn!(
                    "run `{}` truncated after {} steps with {} pedestrians active",
                    self.run.name,
                    self.steps_done,
                    self.peds.iter().filter(|p| p.active).count()
                );
                return Ok(self.finish(true));
            }
            self.step()?;
        }
        Ok(self.finish(false))
    }

    pub fn finish(self, truncated: bool) -> SimulationOutput {
        SimulationOutput {
            run: self.run.name.clone(),
            dt: self.run.dt,
            first_step: self.first_step,
            steps: self.steps_done,
            truncated,
            trajectories: self
                .peds
                .into_iter()
                .filter(|p| !p.traj.positions.is_empty())
                .map(|p| p.traj)
                .collect(),
        }
    }

}

pub(crate) fn module_of(scene: &Scene, p: Point2) -> Option<usize> {
    let id = scene.classify(p, MODULE_SNAP)?;
    scene.index_of(id).ok()
}

/// Segments a pedestrian in `module` may not step through: the module's walls,
/// virtual walls and entries, plus every other module's walls.
pub(crate) fn barriers(scene: &Scene, module: usize) -> Vec<Segment> {
    let m = &scene.modules()[module];
    let mut b = m.active_walls();
    b.extend(m.entries.iter().copied());
    b.extend(
        scene
            .modules()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != module)
            .flat_map(|(_, m)| m.walls.iter().copied()),
    );
    b
}

pub(crate) fn crosses_terminal_exit(scene: &Scene, module: usize, a: Point2, b: Point2) -> bool {
    let m = &scene.modules()[module];
    scene.is_terminal(&m.id).unwrap_or(false) && first_crossing(a, b, &[m.exit]).is_some()
}

pub(crate) fn nearest_segment(segments: &[Segment], p: Point2) -> Segment {
    *segments
        .iter()
        .min_by(|a, b| a.distance_to(p).total_cmp(&b.distance_to(p)))
        .expect("modules have walls")
}

/// Runs `run` with `model` to completion.
pub fn simulate<M: VelocityModel + ?Sized>(run: &SimulationRun, model: &M) -> Result<SimulationOutput> {
    Simulator::new(run, model)?.run()
}

/// Writes `run,ped_id,step,time_s,x_m,y_m,module_id,reset_flag` rows.
pub fn write_trajectories_csv(
    path: impl AsRef<Path>,
    scene: &Scene,
    outputs: &[SimulationOutput],
    comments: &[String],
) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for c in comments {
        writeln!(buf, "# {c}").map_err(|e| Error::io(path, e))?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["run", "ped_id", "step", "time_s", "x_m", "y_m", "module_id", "reset_flag"])?;
        for out in outputs {
            for t in &out.trajectories {
                for (k, p) in t.positions.iter().enumerate() {
                    let step = t.entry_step + k as i64;
                    w.write_record([
                        out.run.clone(),
                        t.ped_id.to_string(),
                        step.to_string(),
                        format!("{}", step as f64 * out.dt),
                        format!("{}", p.x),
                        format!("{}", p.y),
                        scene.modules()[t.modules[k]].id.clone(),
                        u8::from(t.reset[k]).to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// One row of a simulated-trajectory CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TrajectoryRow {
    pub run: String,
    pub ped_id: i64,
    pub step: i64,
    pub time_s: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub module_id: String,
    pub reset_flag: u8,
}

/// Reads a CSV written by [`write_trajectories_csv`] back into trajectories,
/// grouped by run.
pub fn read_trajectories_csv(path: impl AsRef<Path>, dt: f64) -> Result<BTreeMap<String, Vec<Trajectory>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let mut runs: BTreeMap<String, BTreeMap<i64, Vec<(i64, Point2)>>> = BTreeMap::new();
    for row in r.deserialize() {
        let row: TrajectoryRow = row?;
        runs.entry(row.run)
            .or_default()
            .entry(row.ped_id)
            .or_default()
            .push((row.step, Point2::new(row.x_m, row.y_m)));
    }
    let mut out = BTreeMap::new();
    for (run, peds) in runs {
        let mut trajs = Vec::new();
        for (id, mut rows) in peds {
            rows.sort_by_key(|r| r.0);
            for w in rows.windows(2) {
                if w[1].0 != w[0].0 + 1 {
                    return Err(Error::Precondition(format!(
                        "{}: pedestrian {id} of run `{run}` skips from step {} to {}",
                        path.display(),
                        w[0].0,
                        w[1].0
                    )));
                }
            }
            trajs.push(Trajectory::new(id, rows[0].0, dt, rows.iter().map(|r| r.1).collect()));
        }
        out.insert(run, trajs);
    }
    Ok(out)
}
