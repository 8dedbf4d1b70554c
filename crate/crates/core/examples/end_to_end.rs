//! The whole pipeline in one process: ingest the bundled corridor
//! experiments, train a small model, simulate the test run with it and
//! with the social-force baseline, and compare both against the recording.
//!
//!     cargo run --release --example end_to_end

use std::path::Path;

use ivid::evaluation::evaluate_run;
use ivid::features::ExtractionParams;
use ivid::layouts;
use ivid::manifest::{ModelKind, RunManifest};
use ivid::pipeline::{network_for, run_from_observed, simulate_model, train_on_datasets};
use ivid::social_force::SfParams;
use ivid::trajectory::{parse_trajectories, Dataset, DatasetRole};
use ivid::vpnn::{Checkpoint, TrainingConfig};

fn main() -> ivid::Result<()> {
    let scene = layouts::corridor_scene(3.0);
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let params = ExtractionParams::default();
    let load = |file: &str, role| -> ivid::Result<Dataset> {
        let trajs = parse_trajectories(fixtures.join(file), 0.01, 16.0)?;
        Dataset::new(scene.clone(), role, 1.0 / 16.0, [("E080".to_string(), trajs)], params.window)
    };
    let train = load("corridor_E080-C300.txt", DatasetRole::TrainVal)?;
    let test = load("corridor_E080-C300_test.txt", DatasetRole::Test)?;

    let cfg = TrainingConfig { iterations: 300, batch_size: 128, log_every: 100, ..Default::default() };
    let mut manifest = RunManifest::new("end_to_end", cfg.seed, "memory");
    manifest.extraction = Some(params);
    manifest.training = Some(cfg.clone());
    let model = train_on_datasets(&[train], &params, network_for(&params), &cfg)?;
    println!(
        "trained on {} samples, best validation at iteration {} (manifest {})",
        model.train_samples,
        model.outcome.best_iteration,
        &manifest.sha256()[..12]
    );
    let ck = Checkpoint::new(&model.outcome.network, params)?;

    for (name, exp) in &test.runs {
        let run = run_from_observed(name, &scene, exp, test.dt, params, None);
        for kind in [ModelKind::Ivid, ModelKind::Sf] {
            let out = simulate_model(&run, kind, Some(&ck), &SfParams::default(), 1)?;
            let r = evaluate_run(name, &kind.to_string(), &out.to_trajectories(), exp, &|p| scene.in_focus(p));
            println!(
                "{name} {kind:>4}: ADE {:.3} m  FDE {:.3} m  TTE {:.3} s  ({} steps, {} resets)",
                r.mean_ade,
                r.mean_fde,
                r.mean_tte,
                out.steps,
                out.reset_count()
            );
        }
    }
    Ok(())
}
