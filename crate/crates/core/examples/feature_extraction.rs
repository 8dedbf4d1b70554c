//! Step feature of one pedestrian in a corridor: velocity, the social
//! radar, the visual rays and the exit endpoints.
//!
//!     cargo run --example feature_extraction

use ivid::features::{ExtractionParams, FeatureExtractor, Kinematics, WindowFeature};
use ivid::geometry::{Point2, Vec2};
use ivid::layouts;

fn main() -> ivid::Result<()> {
    let scene = layouts::corridor_scene(3.0);
    let params = ExtractionParams::default();
    let fx = FeatureExtractor::new(&scene, params)?;

    let me = Kinematics::new(Point2::new(5.0, 0.9), Vec2::new(1.1, 0.1));
    let others = [
        Kinematics::new(Point2::new(5.6, 1.4), Vec2::new(1.0, 0.0)),
        Kinematics::new(Point2::new(4.5, 1.6), Vec2::new(0.9, 0.2)),
    ];
    let step = fx.step(me, "corridor", &others)?;
    let (v, social, visual, exit) = step.split(&params)?;
    println!("step feature: {} values ({} sectors, {} rays)", step.len(), params.sector_count(), params.ray_count());
    println!("velocity      {:?}", v);
    for (j, row) in social.0.iter().enumerate().filter(|(_, r)| Vec2::new(r[0], r[1]).norm() < params.radius - 1e-9) {
        println!("sector {j:2}     d = ({:.2}, {:.2})  dv = ({:.2}, {:.2})", row[0], row[1], row[2], row[3]);
    }
    let nearest = visual.iter().map(|r| Vec2::new(r[0], r[1]).norm()).fold(f64::INFINITY, f64::min);
    println!("nearest wall along a ray: {nearest:.2} m");
    println!("exit endpoints {:?}", exit.0);

    let window = WindowFeature::from_steps(std::iter::repeat_n(&step, params.window))?;
    println!("window shape {:?}", window.shape());
    Ok(())
}
