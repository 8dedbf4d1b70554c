//! Sensitivity of the metrics to the virtual exit distance and the visual
//! ray interval, on the bundled corridor experiment. Training is cut short
//! so the example finishes quickly.
//!
//!     cargo run --release --example sensitivity_grid

use std::path::Path;

use ivid::features::ExtractionParams;
use ivid::layouts;
use ivid::pipeline::{sensitivity_grid, SENSITIVITY_BETA, SENSITIVITY_DE};
use ivid::trajectory::{parse_trajectories, Dataset, DatasetRole};
use ivid::vpnn::TrainingConfig;

fn dataset(file: &str, role: DatasetRole) -> ivid::Result<Dataset> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(file);
    let trajs = parse_trajectories(path, 0.01, 16.0)?;
    Dataset::new(layouts::corridor_scene(3.0), role, 1.0 / 16.0, [("E080".to_string(), trajs)], 8)
}

fn main() -> ivid::Result<()> {
    let train = dataset("corridor_E080-C300.txt", DatasetRole::TrainVal)?;
    let test = dataset("corridor_E080-C300_test.txt", DatasetRole::Test)?;
    let cfg = TrainingConfig { iterations: 60, batch_size: 64, log_every: 20, eval_cap: 256, ..Default::default() };
    let res = sensitivity_grid(&[train], &test, &ExtractionParams::default(), &SENSITIVITY_DE, &SENSITIVITY_BETA, 0.2, &cfg)?;
    println!("  D_e   beta    ADE     FDE     TTE");
    for r in &res.summary.rows {
        println!("{:5.0} {:6.0} {:7.3} {:7.3} {:7.3}", r.exit_distance, r.beta_deg, r.mean_ade, r.mean_fde, r.mean_tte);
    }
    let s = &res.summary;
    println!("spread {:>11.3} {:7.3} {:7.3}", s.spread_ade, s.spread_fde, s.spread_tte);
    Ok(())
}
