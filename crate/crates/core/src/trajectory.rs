//! Experiment trajectories: parsing, focus-area clipping, training samples.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ExtractionParams, FeatureExtractor, Kinematics, StepFeature, WindowFeature};
use crate::geometry::{Point2, Rect, Vec2};
use crate::rng;
use crate::scene::Scene;

/// Pedestrians with a longer run of missing frames are dropped when parsing.
pub const MAX_FILLED_GAP: i64 = 5;

/// Uniformly sampled positions of one pedestrian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub ped_id: i64,
    /// Frame index of `positions[0]`.
    pub t0: i64,
    /// Seconds per frame.
    pub dt: f64,
    pub positions: Vec<Point2>,
}

impl Trajectory {
    pub fn new(ped_id: i64, t0: i64, dt: f64, positions: Vec<Point2>) -> Self {
        Trajectory {
            ped_id,
            t0,
            dt,
            positions,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Frame of the last sample.
    pub fn last_frame(&self) -> i64 {
        self.t0 + self.positions.len() as i64 - 1
    }

    pub fn frames(&self) -> std::ops::RangeInclusive<i64> {
        self.t0..=self.last_frame()
    }

    pub fn position_at(&self, frame: i64) -> Option<Point2> {
        let i = usize::try_from(frame - self.t0).ok()?;
        self.positions.get(i).copied()
    }

    /// Backward-difference velocity `(p[t] - p[t-1]) / dt`; undefined at the
    /// first frame.
    pub fn velocity_at(&self, frame: i64) -> Option<Vec2> {
        let i = usize::try_from(frame - self.t0).ok()?;
        if i == 0 || i >= self.positions.len() {
            return None;
        }
        Some((self.positions[i] - self.positions[i - 1]) * (1.0 / self.dt))
    }

    /// Velocity as seen by others: the backward difference, with the first
    /// frame borrowing the second frame's value.
    pub fn observed_velocity_at(&self, frame: i64) -> Option<Vec2> {
        if frame == self.t0 {
            return Some(self.velocity_at(frame + 1).unwrap_or(Vec2::ZERO));
        }
        self.velocity_at(frame)
    }

    pub fn kinematics_at(&self, frame: i64) -> Option<Kinematics> {
        Some(Kinematics::new(
            self.position_at(frame)?,
            self.observed_velocity_at(frame)?,
        ))
    }

    /// Sub-series covering `range` (indices into `positions`).
    pub fn slice(&self, range: std::ops::Range<usize>) -> Trajectory {
        Trajectory {
            ped_id: self.ped_id,
            t0: self.t0 + range.start as i64,
            dt: self.dt,
            positions: self.positions[range].to_vec(),
        }
    }
}

fn parse_int(field: &str) -> Option<i64> {
    if let Ok(v) = field.parse::<i64>() {
        return Some(v);
    }
    let f = field.parse::<f64>().ok()?;
    (f.fract() == 0.0 && f.abs() < 9.0e15).then_some(f as i64)
}

/// Parses rows `ped_id frame x y [ignored...]` separated by whitespace and/or
/// commas. Coordinates are multiplied by `unit_scale`; frames are sampled at
/// `fps`. Gaps of up to [`MAX_FILLED_GAP`] frames are filled linearly,
/// pedestrians with longer gaps are dropped. Output is sorted by `ped_id`.
pub fn parse_trajectories_str(
    text: &str,
    source: &Path,
    unit_scale: f64,
    fps: f64,
) -> Result<Vec<Trajectory>> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::InvalidParams("fps must be positive".into()));
    }
    let dt = 1.0 / fps;
    let mut rows: BTreeMap<i64, Vec<(i64, Point2)>> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let err = |message: String| Error::Parse {
            path: source.to_path_buf(),
            line: lineno + 1,
            message,
        };
        if fields.len() < 4 {
            return Err(err(format!("expected at least 4 columns, found {}", fields.len())));
        }
        let ped = parse_int(fields[0]).ok_or_else(|| err(format!("bad pedestrian id `{}`", fields[0])))?;
        let frame = parse_int(fields[1]).ok_or_else(|| err(format!("bad frame `{}`", fields[1])))?;
        let x: f64 = fields[2]
            .parse()
            .map_err(|_| err(format!("bad x coordinate `{}`", fields[2])))?;
        let y: f64 = fields[3]
            .parse()
            .map_err(|_| err(format!("bad y coordinate `{}`", fields[3])))?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(err("non-finite coordinate".into()));
        }
        let series = rows.entry(ped).or_default();
        if let Some(&(prev, _)) = series.last() {
            if frame <= prev {
                return Err(Error::NonMonotonicFrames {
                    ped_id: ped,
                    previous: prev,
                    frame,
                });
            }
        }
        series.push((frame, Point2::new(x * unit_scale, y * unit_scale)));
    }

    let mut out = Vec::with_capacity(rows.len());
    'peds: for (ped_id, series) in rows {
        let t0 = series[0].0;
        let mut positions = Vec::with_capacity(series.len());
        positions.push(series[0].1);
        for pair in series.windows(2) {
            let ((f0, p0), (f1, p1)) = (pair[0], pair[1]);
            let gap = f1 - f0;
            if gap - 1 > MAX_FILLED_GAP {
                log::warn!("dropping pedestrian {ped_id}: {} consecutive missing frames", gap - 1);
                continue 'peds;
            }
            for k in 1..gap {
                positions.push(p0.lerp(p1, k as f64 / gap as f64));
            }
            positions.push(p1);
        }
        if positions.len() < 2 {
            log::warn!("dropping pedestrian {ped_id}: single sample");
            continue;
        }
        out.push(Trajectory::new(ped_id, t0, dt, positions));
    }
    Ok(out)
}

pub fn parse_trajectories(path: impl AsRef<Path>, unit_scale: f64, fps: f64) -> Result<Vec<Trajectory>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectories_str(&text, path, unit_scale, fps)
}

/// Writes rows `ped_id frame x y` with coordinates divided by `unit_scale`,
/// the inverse of [`parse_trajectories`].
pub fn write_raw_trajectories(
    path: impl AsRef<Path>,
    trajs: &[Trajectory],
    unit_scale: f64,
    comments: &[String],
) -> Result<()> {
    use std::fmt::Write as _;
    let path = path.as_ref();
    let mut text = String::new();
    for c in comments {
        let _ = writeln!(text, "# {c}");
    }
    for t in trajs {
        for (k, p) in t.positions.iter().enumerate() {
            let _ = writeln!(
                text,
                "{} {} {} {}",
                t.ped_id,
                t.t0 + k as i64,
                p.x / unit_scale,
                p.y / unit_scale
            );
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Linearly resamples onto the grid `k * dt`; frames falling outside the
/// original time span are dropped. `None` when fewer than two remain.
pub fn resample(t: &Trajectory, dt: f64) -> Option<Trajectory> {
    let tol = 1e-9;
    let start = t.t0 as f64 * t.dt;
    let end = t.last_frame() as f64 * t.dt;
    let k0 = (start / dt - tol).ceil() as i64;
    let k1 = (end / dt + tol).floor() as i64;
    if k1 <= k0 {
        return None;
    }
    let positions = (k0..=k1)
        .map(|k| {
            let u = ((k as f64 * dt - start) / t.dt).clamp(0.0, (t.len() - 1) as f64);
            let i = (u.floor() as usize).min(t.len() - 2);
            t.positions[i].lerp(t.positions[i + 1], u - i as f64)
        })
        .collect();
    Some(Trajectory::new(t.ped_id, k0, dt, positions))
}

/// Rotation about the origin followed by a translation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidTransform {
    #[serde(default)]
    pub rotate_deg: f64,
    #[serde(default)]
    pub translate: [f64; 2],
}

impl RigidTransform {
    pub fn apply(&self, p: Point2) -> Point2 {
        let (s, c) = self.rotate_deg.to_radians().sin_cos();
        Point2::new(
            c * p.x - s * p.y + self.translate[0],
            s * p.x + c * p.y + self.translate[1],
        )
    }

    pub fn apply_traj(&self, t: &Trajectory) -> Trajectory {
        Trajectory {
            positions: t.positions.iter().map(|p| self.apply(*p)).collect(),
            ..t.clone()
        }
    }
}

/// Keeps each trajectory's longest contiguous run of frames satisfying
/// `inside` (earliest run on ties); runs shorter than `min_len` are dropped.
pub fn clip_to_region(
    trajs: &[Trajectory],
    inside: impl Fn(Point2) -> bool,
    min_len: usize,
) -> Vec<Trajectory> {
    trajs
        .iter()
        .filter_map(|t| {
            let mut best = 0..0;
            let mut start = None;
            for (i, &p) in t.positions.iter().enumerate() {
                match (inside(p), start) {
                    (true, None) => start = Some(i),
                    (false, Some(s)) => {
                        if i - s > best.len() {
                            best = s..i;
                        }
                        start = None;
                    }
                    _ => {}
                }
            }
            if let Some(s) = start {
                if t.len() - s > best.len() {
                    best = s..t.len();
                }
            }
            (!best.is_empty() && best.len() >= min_len.max(1)).then(|| t.slice(best))
        })
        .collect()
}

pub fn clip_to_focus(trajs: &[Trajectory], area: &Rect, min_len: usize) -> Vec<Trajectory> {
    clip_to_region(trajs, |p| area.contains(p), min_len)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetRole {
    TrainVal,
    Test,
}

/// Runs recorded in one geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub scene: Scene,
    pub role: DatasetRole,
    pub dt: f64,
    pub runs: BTreeMap<String, Vec<Trajectory>>,
}

impl Dataset {
    /// Assembles a dataset, clipping every run to the scene's focus areas and
    /// dropping trajectories shorter than `window + 1` frames.
    pub fn new(
        scene: Scene,
        role: DatasetRole,
        dt: f64,
        runs: impl IntoIterator<Item = (String, Vec<Trajectory>)>,
        window: usize,
    ) -> Result<Self> {
        let mut clipped = BTreeMap::new();
        for (name, trajs) in runs {
            if let Some(t) = trajs.iter().find(|t| (t.dt - dt).abs() > 1e-12) {
                return Err(Error::Precondition(format!(
                    "run `{name}`: pedestrian {} has dt {} but the dataset uses {dt}",
                    t.ped_id, t.dt
                )));
            }
            let kept = clip_to_region(&trajs, |p| scene.in_focus(p), window + 1);
            clipped.insert(name, kept);
        }
        Ok(Dataset {
            scene,
            role,
            dt,
            runs: clipped,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn trajectory_count(&self) -> usize {
        self.runs.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub run: String,
    pub ped_id: i64,
    /// Frame of the newest window row.
    pub frame: i64,
}

/// Lookback window and the velocity that followed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: WindowFeature,
    pub target: Vec2,
    pub meta: SampleMeta,
}

/// Frame-indexed view of one run, used to look up neighbours.
pub(crate) struct FrameIndex<'a> {
    by_frame: HashMap<i64, Vec<&'a Trajectory>>,
}

impl<'a> FrameIndex<'a> {
    pub(crate) fn new(trajs: &'a [Trajectory]) -> Self {
        let mut by_frame: HashMap<i64, Vec<&Trajectory>> = HashMap::new();
        for t in trajs {
            for f in t.frames() {
                by_frame.entry(f).or_default().push(t);
            }
        }
        FrameIndex { by_frame }
    }

    /// Everyone present at `frame` except `ped_id`.
    pub(crate) fn others(&self, frame: i64, ped_id: i64) -> Vec<Kinematics> {
        self.by_frame
            .get(&frame)
            .map(|v| {
                v.iter()
                    .filter(|t| t.ped_id != ped_id)
                    .filter_map(|t| t.kinematics_at(frame))
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// Frames `t` for which a full window ending at `t` and the target velocity
/// at `t + 1` both exist.
pub fn window_end_frames(traj: &Trajectory, window: usize) -> std::ops::RangeInclusive<i64> {
    // velocities exist from t0+1; the first full window ends at t0+window and
    // the last target is at the final frame
    traj.t0 + window as i64..=traj.last_frame() - 1
}

/// Builds every (window, next-velocity) pair of a training dataset. Windows
/// with a frame outside all modules are skipped.
pub fn build_samples(dataset: &Dataset, params: &ExtractionParams) -> Result<Vec<Sample>> {
    if dataset.role != DatasetRole::TrainVal {
        return Err(Error::Precondition("samples are built from training-validation datasets".into()));
    }
    let extractor = FeatureExtractor::new(&dataset.scene, *params)?;
    let w = params.window;
    let mut out = Vec::new();
    for (run, trajs) in &dataset.runs {
        let index = FrameIndex::new(trajs);
        let per_ped: Vec<Result<Vec<Sample>>> = trajs
            .par_iter()
            .map(|traj| {
                let ends = window_end_frames(traj, w);
                if ends.is_empty() {
                    return Ok(Vec::new());
                }
                // step features for frames t0+1 ..= last-1
                let first = traj.t0 + 1;
                let steps: Vec<Option<StepFeature>> = (first..=*ends.end())
                    .map(|f| {
                        let pos = traj.position_at(f).expect("frame in range");
                        let vel = traj.velocity_at(f).expect("frame after t0");
                        let Some(module) = dataset.scene.point_in_module(pos) else {
                            return Ok(None);
                        };
                        let others = index.others(f, traj.ped_id);
                        extractor
                            .step(Kinematics::new(pos, vel), module, &others)
                            .map(Some)
                    })
                    .collect::<Result<_>>()?;
                let mut samples = Vec::new();
                for t in ends {
                    let lo = (t - w as i64 + 1 - first) as usize;
                    let rows = &steps[lo..lo + w];
                    if rows.iter().any(Option::is_none) {
                        continue;
                    }
                    let x = WindowFeature::from_steps(rows.iter().flatten())?;
                    let target = traj.velocity_at(t + 1).expect("target frame in range");
                    samples.push(Sample {
                        x,
                        target,
                        meta: SampleMeta {
                            run: run.clone(),
                            ped_id: traj.ped_id,
                            frame: t,
                        },
                    });
                }
                Ok(samples)
            })
            .collect();
        for r in per_ped {
            out.extend(r?);
        }
    }
    Ok(out)
}

/// Uniform random disjoint split with `ratio.0 : ratio.1` train to validation.
pub fn split_train_val<T>(samples: Vec<T>, ratio: (usize, usize), seed: u64) -> (Vec<T>, Vec<T>) {
    let n = samples.len();
    let parts = ratio.0 + ratio.1;
    let n_train = if parts == 0 {
        n
    } else {
        (n * ratio.0 + parts / 2) / parts
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "split"));
    let mut is_train = vec![false; n];
    for &i in &order[..n_train] {
        is_train[i] = true;
    }
    let mut train = Vec::with_capacity(n_train);
    let mut val = Vec::with_capacity(n - n_train);
    for (s, t) in samples.into_iter().zip(is_train) {
        if t {
            train.push(s);
        } else {
            val.push(s);
        }
    }
    (train, val)
}
