//! Rolling forecast with a hand-written velocity model: every pedestrian
//! heads for the middle of its module's exit at 1.2 m/s. Shows the
//! simulator loop without a trained network.
//!
//!     cargo run --example rolling_simulation

use ivid::features::{ExtractionParams, WindowFeature};
use ivid::geometry::Vec2;
use ivid::layouts;
use ivid::simulator::{simulate, FnModel, SimulationRun};
use ivid::synthetic::{entry_seeds, CrowdSpec};

fn main() -> ivid::Result<()> {
    let scene = layouts::corner_scene(3.0);
    let params = ExtractionParams::default();
    let spec = CrowdSpec { pedestrians: 10, ..Default::default() };
    let run = SimulationRun {
        name: "corner".into(),
        scene: scene.clone(),
        dt: spec.dt,
        seeds: entry_seeds(&scene, &spec)?,
        params,
        max_steps: 1500,
    };
    let dim = params.step_dim();
    // the last four columns of the newest row are the exit endpoints
    let model = FnModel(|x: &WindowFeature| {
        let row = x.row(x.rows() - 1);
        let mid = Vec2::new(row[dim - 4] + row[dim - 2], row[dim - 3] + row[dim - 1]) * 0.5;
        mid.normalized().unwrap_or(Vec2::ZERO) * 1.2
    });
    let out = simulate(&run, &model)?;
    println!("{} steps, truncated: {}, resets: {}", out.steps, out.truncated, out.reset_count());
    for t in &out.trajectories {
        println!("ped {:2}: {:4} positions, exited {}", t.ped_id, t.positions.len(), t.exited);
    }
    Ok(())
}
