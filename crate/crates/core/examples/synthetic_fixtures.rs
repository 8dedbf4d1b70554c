//! Generates the bundled synthetic experiment files with the social-force
//! model. Rows are `ped_id frame x y` in centimeters.
//!
//!     cargo run --release --example synthetic_fixtures -- crates/core/fixtures

use std::path::PathBuf;

use ivid::layouts;
use ivid::social_force::SfParams;
use ivid::synthetic::{sf_crowd, CrowdSpec};
use ivid::trajectory::write_raw_trajectories;

fn main() -> ivid::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    std::fs::create_dir_all(&dir).map_err(|e| ivid::Error::io(&dir, e))?;
    let sf = SfParams::default();
    let jobs = [
        ("bottleneck_W120", layouts::bottleneck_scene(1.2), 25.0, 11),
        ("bottleneck_W160", layouts::bottleneck_scene(1.6), 25.0, 12),
        ("corridor_E080-C300", layouts::corridor_scene(3.0), 16.0, 13),
        ("corridor_E080-C300_test", layouts::corridor_scene(3.0), 16.0, 14),
        ("corner_C300", layouts::corner_scene(3.0), 16.0, 15),
        ("t_junction_E080-C300", layouts::t_junction_scene(3.0), 16.0, 16),
    ];
    for (name, scene, fps, seed) in jobs {
        let spec = CrowdSpec {
            pedestrians: 12,
            spawn_interval: (0.6 * fps) as usize,
            dt: 1.0 / fps,
            seed,
            max_steps: 4000,
            ..Default::default()
        };
        let trajs = sf_crowd(&scene, &spec, &sf)?;
        let path = dir.join(format!("{name}.txt"));
        let comments = [
            format!("synthetic social-force crowd in {}", scene.name.as_deref().unwrap_or("scene")),
            format!("columns: ped_id frame x_cm y_cm; fps={fps}; seed={seed}"),
        ];
        write_raw_trajectories(&path, &trajs, 0.01, &comments)?;
        let frames: usize = trajs.iter().map(|t| t.len()).sum();
        println!("{}: {} pedestrians, {frames} rows", path.display(), trajs.len());
    }
    Ok(())
}
