//! Synthetic data: a linear-map regression task for the network and
//! social-force crowds for end-to-end fixtures.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ExtractionParams, WindowFeature};
use crate::geometry::{Point2, Vec2};
use crate::rng;
use crate::scene::Scene;
use crate::simulator::{PedestrianSeed, SimulationRun};
use crate::social_force::{inward_normal, simulate_sf, SfParams};
use crate::trajectory::{Sample, SampleMeta, Trajectory};

/// Matrix of the linear-map task: `target = LINEAR_MAP · v`.
pub const LINEAR_MAP: [[f64; 2]; 2] = [[0.8, -0.3], [0.2, 1.1]];

/// Windows filled with uniform noise in `[-noise, noise]` except the first
/// two columns of the newest row, which hold a velocity `v` drawn from
/// `[-1.5, 1.5]²`. The target is `LINEAR_MAP · v`.
pub fn linear_map_samples(n: usize, window: usize, dim: usize, noise: f64, seed: u64) -> Vec<Sample> {
    assert!(dim >= 2 && window >= 1, "window must hold a velocity");
    let mut r = rng::stream(seed, "linear-map");
    let m = LINEAR_MAP;
    (0..n)
        .map(|k| {
            let mut data: Vec<f64> = (0..window * dim).map(|_| r.random_range(-1.0..1.0) * noise).collect();
            let v = Vec2::new(r.random_range(-1.5..1.5), r.random_range(-1.5..1.5));
            let last = (window - 1) * dim;
            data[last] = v.x;
            data[last + 1] = v.y;
            Sample {
                x: WindowFeature::from_raw(window, dim, data).expect("consistent shape"),
                target: Vec2::new(m[0][0] * v.x + m[0][1] * v.y, m[1][0] * v.x + m[1][1] * v.y),
                meta: SampleMeta {
                    run: "linear-map".into(),
                    ped_id: k as i64,
                    frame: 0,
                },
            }
        })
        .collect()
}

/// Social-force crowd fed through the scene's outer entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrowdSpec {
    pub pedestrians: usize,
    /// Steps between consecutive entries.
    pub spawn_interval: usize,
    pub dt: f64,
    /// Speed of the straight seeded approach, m/s.
    pub entry_speed: f64,
    /// Seeded steps before the force model takes over.
    pub window: usize,
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for CrowdSpec {
    fn default() -> Self {
        CrowdSpec {
            pedestrians: 20,
            spawn_interval: 10,
            dt: 0.0625,
            entry_speed: 1.0,
            window: 8,
            max_steps: 2000,
            seed: 7,
        }
    }
}

/// Seeds entering through every entry that is not sealed by a virtual wall,
/// in round-robin order.
pub fn entry_seeds(scene: &Scene, spec: &CrowdSpec) -> Result<Vec<PedestrianSeed>> {
    let entries: Vec<_> = scene
        .modules()
        .iter()
        .flat_map(|m| {
            m.entries
                .iter()
                .filter(|e| !m.virtual_walls.contains(e))
                .filter_map(move |e| inward_normal(m, e).map(|n| (m, *e, n)))
        })
        .collect();
    if entries.is_empty() {
        return Err(Error::InvalidScene("scene has no open entry".into()));
    }
    let mut r = rng::stream(spec.seed, "crowd-entry");
    let step = spec.entry_speed * spec.dt;
    let mut seeds = Vec::with_capacity(spec.pedestrians);
    for k in 0..spec.pedestrians {
        let (module, entry, n) = entries[k % entries.len()];
        let margin = (0.3 / entry.length()).min(0.45);
        let start = entry.p0.lerp(entry.p1, r.random_range(margin..1.0 - margin)) + n * 0.3;
        let positions: Vec<Point2> = (0..spec.window.max(2)).map(|j| start + n * (step * j as f64)).collect();
        if let Some(p) = positions.iter().find(|p| !module.contains(**p)) {
            return Err(Error::Precondition(format!(
                "entry approach leaves module `{}` at ({}, {})",
                module.id, p.x, p.y
            )));
        }
        seeds.push(PedestrianSeed {
            ped_id: k as i64 + 1,
            entry_step: (k * spec.spawn_interval) as i64,
            positions,
        });
    }
    Ok(seeds)
}

/// Runs the social-force model and returns complete trajectories (seeded
/// approach included).
pub fn sf_crowd(scene: &Scene, spec: &CrowdSpec, sf: &SfParams) -> Result<Vec<Trajectory>> {
    let run = SimulationRun {
        name: "synthetic".into(),
        scene: scene.clone(),
        dt: spec.dt,
        seeds: entry_seeds(scene, spec)?,
        params: ExtractionParams {
            window: spec.window,
            ..Default::default()
        },
        max_steps: spec.max_steps,
    };
    let out = simulate_sf(&run, sf, spec.seed)?;
    if out.truncated {
        log::warn!("synthetic crowd truncated after {} steps", out.steps);
    }
    Ok(out.to_trajectories())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layouts;

    #[test]
    fn linear_map_target_matches_velocity() {
        let s = linear_map_samples(5, 8, 10, 0.2, 1);
        for x in &s {
            let row = x.x.row(7);
            let t = Vec2::new(0.8 * row[0] - 0.3 * row[1], 0.2 * row[0] + 1.1 * row[1]);
            assert!((t - x.target).norm() < 1e-12);
            assert!(x.x.row(0).iter().all(|v| v.abs() <= 0.2));
        }
        assert_eq!(s, linear_map_samples(5, 8, 10, 0.2, 1));
    }

    #[test]
    fn corridor_crowd_leaves() {
        let scene = layouts::corridor_scene(3.0);
        let spec = CrowdSpec {
            pedestrians: 4,
            ..Default::default()
        };
        let trajs = sf_crowd(&scene, &spec, &SfParams::default()).unwrap();
        assert_eq!(trajs.len(), 4);
        for t in &trajs {
            assert!(t.positions.last().unwrap().x > 7.0, "ped {} stuck", t.ped_id);
        }
    }
}
