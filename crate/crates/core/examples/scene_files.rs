//! Writes the bundled scene files: the four single geometries and the
//! composite scenario for each bottleneck / T-junction width pair.
//!
//!     cargo run --example scene_files -- crates/core/scenes

use std::path::PathBuf;

use ivid::layouts;
use ivid::Scene;

fn bundled() -> Vec<(String, Scene)> {
    let mut v = vec![
        ("bottleneck-W120".to_string(), layouts::bottleneck_scene(1.2)),
        ("bottleneck-W160".to_string(), layouts::bottleneck_scene(1.6)),
        ("corridor-C300".to_string(), layouts::corridor_scene(3.0)),
        ("corner-C300".to_string(), layouts::corner_scene(3.0)),
        ("t_junction-C300".to_string(), layouts::t_junction_scene(3.0)),
    ];
    for (bw, bin) in [(1.2, 0.5), (1.6, 0.8), (1.6, 1.2), (2.2, 1.5)] {
        let s = layouts::composite(bw, bin);
        v.push((s.name.clone().expect("composite scenes are named"), s));
    }
    v
}

fn main() -> ivid::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenes".into()));
    std::fs::create_dir_all(&dir).map_err(|e| ivid::Error::io(&dir, e))?;
    for (name, scene) in bundled() {
        let path = dir.join(format!("{name}.json"));
        scene.save(&path)?;
        let ids: Vec<&str> = scene.modules().iter().map(|m| m.id.as_str()).collect();
        println!("{}: modules {:?}", path.display(), ids);
    }
    Ok(())
}
