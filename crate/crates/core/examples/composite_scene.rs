//! Composes a bottleneck, corridor, corner and T-junction into one scene
//! and walks a crowd through it with the social-force model, reporting
//! the order of modules each pedestrian visited.
//!
//!     cargo run --release --example composite_scene

use ivid::features::ExtractionParams;
use ivid::layouts;
use ivid::simulator::SimulationRun;
use ivid::social_force::{simulate_sf, SfParams};
use ivid::synthetic::{entry_seeds, CrowdSpec};

fn main() -> ivid::Result<()> {
    let scene = layouts::composite(1.6, 0.8);
    for (i, m) in scene.modules().iter().enumerate() {
        println!("module {i} `{}`: {} walls, exit {:?}", m.id, m.walls.len(), m.exit);
    }
    let spec = CrowdSpec { pedestrians: 8, ..Default::default() };
    let run = SimulationRun {
        name: "composite".into(),
        scene: scene.clone(),
        dt: spec.dt,
        seeds: entry_seeds(&scene, &spec)?,
        params: ExtractionParams::default(),
        max_steps: 3000,
    };
    let out = simulate_sf(&run, &SfParams::default(), 2)?;
    for t in &out.trajectories {
        let mut route: Vec<&str> = Vec::new();
        for &m in &t.modules {
            let id = scene.modules()[m].id.as_str();
            if route.last() != Some(&id) {
                route.push(id);
            }
        }
        println!("ped {}: {}", t.ped_id, route.join(" -> "));
    }
    Ok(())
}
