//! Trains the standard network on windows whose target is a fixed linear
//! map of the newest velocity, then checks it against the map.
//!
//!     cargo run --release --example train_linear_map

use ivid::synthetic::{linear_map_samples, LINEAR_MAP};
use ivid::vpnn::{train, NetworkConfig, TrainingConfig};

fn main() -> ivid::Result<()> {
    let train_set = linear_map_samples(2000, 8, 64, 0.2, 1);
    let val_set = linear_map_samples(200, 8, 64, 0.2, 2);
    let net = NetworkConfig { dropout: 0.0, ..NetworkConfig::standard(64) };
    let cfg = TrainingConfig { iterations: 400, batch_size: 64, log_every: 100, seed: 3, ..Default::default() };
    let out = train(&train_set, &val_set, net, &cfg)?;
    for r in &out.history {
        println!("iter {:4}  train {:.4}  val {:?}", r.iteration, r.train_loss, r.val_loss);
    }
    println!("best validation at iteration {}", out.best_iteration);

    println!("map {LINEAR_MAP:?}");
    for probe in &val_set[..4] {
        println!("target {:?}  predicted {:?}", probe.target, out.network.forward(&probe.x)?);
    }
    Ok(())
}
