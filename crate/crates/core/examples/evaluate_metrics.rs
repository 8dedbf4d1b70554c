//! ADE, FDE, TTE and the fundamental diagram, comparing a social-force
//! rerun of a bundled corridor experiment against the recording.
//!
//!     cargo run --release --example evaluate_metrics

use std::path::Path;

use ivid::evaluation::{evaluate_run, fundamental_diagram};
use ivid::features::ExtractionParams;
use ivid::layouts;
use ivid::pipeline::run_from_observed;
use ivid::social_force::{simulate_sf, SfParams};
use ivid::trajectory::{clip_to_region, parse_trajectories};

fn main() -> ivid::Result<()> {
    let scene = layouts::corridor_scene(3.0);
    let file = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corridor_E080-C300_test.txt");
    let params = ExtractionParams::default();
    let exp = clip_to_region(&parse_trajectories(file, 0.01, 16.0)?, |p| scene.in_focus(p), params.window + 1);
    let run = run_from_observed("corridor", &scene, &exp, 1.0 / 16.0, params, None);
    let sim = simulate_sf(&run, &SfParams::default(), 7)?.to_trajectories();

    let report = evaluate_run("corridor", "sf", &sim, &exp, &|p| scene.in_focus(p));
    for m in &report.pedestrians {
        println!("ped {:3}  ADE {:.3} m  FDE {:.3} m  TTE {:.3} s", m.ped_id, m.ade, m.fde, m.tte);
    }
    println!("mean     ADE {:.3} m  FDE {:.3} m  TTE {:.3} s", report.mean_ade, report.mean_fde, report.mean_tte);

    let area = &scene.modules()[0].measurement_area;
    let fd = fundamental_diagram(&exp, area, run.dt)?;
    let peak = fd.iter().fold(0.0f64, |m, p| m.max(p.density));
    println!("{} FD points in the measurement area, peak density {peak:.2} 1/m²", fd.len());
    Ok(())
}
