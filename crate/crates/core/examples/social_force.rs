//! Social-force baseline on a bottleneck: a stream of pedestrians from the
//! entry, simulated until everyone has left.
//!
//!     cargo run --release --example social_force

use ivid::features::ExtractionParams;
use ivid::layouts;
use ivid::simulator::SimulationRun;
use ivid::social_force::{simulate_sf, SfParams};
use ivid::synthetic::{entry_seeds, CrowdSpec};

fn main() -> ivid::Result<()> {
    let scene = layouts::bottleneck_scene(1.2);
    let spec = CrowdSpec { pedestrians: 30, spawn_interval: 6, ..Default::default() };
    let run = SimulationRun {
        name: "bottleneck".into(),
        scene: scene.clone(),
        dt: spec.dt,
        seeds: entry_seeds(&scene, &spec)?,
        params: ExtractionParams::default(),
        max_steps: 4000,
    };
    let out = simulate_sf(&run, &SfParams::default(), 1)?;
    let exited = out.trajectories.iter().filter(|t| t.exited).count();
    let last = out.trajectories.iter().map(|t| t.entry_step + t.positions.len() as i64).max().unwrap_or(0);
    println!("{exited}/{} pedestrians left within {:.1} s", out.trajectories.len(), last as f64 * run.dt);
    Ok(())
}
