use std::collections::BTreeSet;

use ivid::evaluation::{ade, fundamental_diagram};
use ivid::features::{extract_social, ExtractionParams, Kinematics, WindowFeature};
use ivid::geometry::{ray_cast, Point2, Rect, Segment, Vec2};
use ivid::layouts;
use ivid::trajectory::{resample, split_train_val, Trajectory};
use ivid::vpnn::{Network, NetworkConfig};
use proptest::prelude::*;

fn point(s: f64) -> impl Strategy<Value = Point2> {
    (-s..s, -s..s).prop_map(|(x, y)| Point2::new(x, y))
}

fn segment() -> impl Strategy<Value = Segment> {
    (point(4.0), point(4.0))
        .prop_filter("non-degenerate", |(a, b)| a.distance(*b) > 1e-3)
        .prop_map(|(a, b)| Segment::new(a, b))
}

fn walk(max_len: usize) -> impl Strategy<Value = Trajectory> {
    (0i64..40, point(3.0), prop::collection::vec(point(0.2), 2..max_len)).prop_map(|(t0, start, steps)| {
        let mut p = start;
        let pts = steps
            .into_iter()
            .map(|d| {
                p += d;
                p
            })
            .collect();
        Trajectory::new(1, t0, 0.04, pts)
    })
}

fn tiny_net() -> Network {
    let cfg = NetworkConfig {
        input_dim: 4,
        window: 8,
        channels: vec![3, 5],
        kernel_size: 3,
        dilations: vec![1, 2],
        dropout: 0.2,
        output_dim: 2,
    };
    let mut net = Network::init(cfg, 17).unwrap();
    for (i, p) in net.params_mut().iter_mut().enumerate() {
        *p += 0.01 * ((i * 7919 % 13) as f64 - 6.0);
    }
    net
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ray_hit_lies_on_the_wall_it_names(origin in point(1.0), angle in 0.0..std::f64::consts::TAU,
                                        walls in prop::collection::vec(segment(), 1..6)) {
        if let Some(hit) = ray_cast(origin, angle, &walls) {
            prop_assert!(walls[hit.wall].distance_to(hit.point) < 1e-9);
            prop_assert!((hit.point.distance(origin) - hit.distance).abs() < 1e-9);
            let dir = Point2::from_angle(angle);
            prop_assert!((hit.point - origin).cross(dir).abs() < 1e-9);
            // nothing nearer along the same ray
            for w in &walls {
                if let Some(h) = ray_cast(origin, angle, std::slice::from_ref(w)) {
                    prop_assert!(h.distance >= hit.distance - 1e-12);
                }
            }
        }
    }

    #[test]
    fn social_rows_stay_within_radius(subject in point(1.0), others in prop::collection::vec(point(2.0), 0..8),
                                      walls in prop::collection::vec(segment(), 0..5)) {
        let params = ExtractionParams::default();
        let others: Vec<Kinematics> = others.into_iter().map(|p| Kinematics::new(p, Vec2::new(0.5, 0.0))).collect();
        let f = extract_social(Kinematics::new(subject, Vec2::ZERO), &others, &walls, &params);
        prop_assert_eq!(f.0.len(), params.sector_count());
        for row in &f.0 {
            prop_assert!(Vec2::new(row[0], row[1]).norm() <= params.radius + 1e-9);
        }
    }

    #[test]
    fn resampling_onto_the_same_grid_is_identity(t in walk(30)) {
        let r = resample(&t, t.dt).unwrap();
        prop_assert_eq!(r.t0, t.t0);
        prop_assert_eq!(r.positions.len(), t.positions.len());
        for (a, b) in r.positions.iter().zip(&t.positions) {
            prop_assert!(a.distance(*b) < 1e-12);
        }
    }

    #[test]
    fn resampled_frames_stay_inside_the_span(t in walk(40), dt in 0.02..0.2f64) {
        if let Some(r) = resample(&t, dt) {
            let (start, end) = (t.t0 as f64 * t.dt, t.last_frame() as f64 * t.dt);
            prop_assert!(r.t0 as f64 * dt >= start - 1e-9);
            prop_assert!(r.last_frame() as f64 * dt <= end + 1e-9);
        }
    }

    #[test]
    fn split_is_a_partition(n in 0usize..300, seed in any::<u64>()) {
        let (tr, va) = split_train_val((0..n).collect::<Vec<_>>(), (4, 1), seed);
        prop_assert_eq!(tr.len() + va.len(), n);
        let all: BTreeSet<usize> = tr.iter().chain(&va).copied().collect();
        prop_assert_eq!(all.len(), n);
        let again = split_train_val((0..n).collect::<Vec<_>>(), (4, 1), seed);
        prop_assert_eq!((tr, va), again);
    }

    #[test]
    fn ade_is_symmetric_and_offset_exact(t in walk(30), dx in -1.0..1.0f64, dy in -1.0..1.0f64) {
        let off = Vec2::new(dx, dy);
        let u = Trajectory::new(t.ped_id, t.t0, t.dt, t.positions.iter().map(|p| *p + off).collect());
        let a = ade(&u, &t).unwrap();
        prop_assert!((a - off.norm()).abs() < 1e-9);
        prop_assert_eq!(a.to_bits(), ade(&t, &u).unwrap().to_bits());
    }

    #[test]
    fn fd_flow_is_density_times_speed(ts in prop::collection::vec(walk(25), 1..6)) {
        let ts: Vec<Trajectory> = ts.into_iter().enumerate()
            .map(|(i, t)| Trajectory::new(i as i64, t.t0, t.dt, t.positions)).collect();
        for p in fundamental_diagram(&ts, &Rect::new(-2.0, -2.0, 2.0, 2.0), 0.04).unwrap() {
            prop_assert_eq!(p.flow, p.density * p.speed);
            prop_assert!(p.density > 0.0);
        }
    }

    #[test]
    fn output_ignores_direction_scale(c in 0.1..10.0f64, xs in prop::collection::vec(-1.0..1.0f64, 32)) {
        let net = tiny_net();
        let x = WindowFeature::from_raw(8, 4, xs).unwrap();
        let mut scaled = net.clone();
        for t in net.tensors().to_vec() {
            if t.name.ends_with(".v") {
                for v in scaled.tensor_mut(&t.name).unwrap() {
                    *v *= c;
                }
            }
        }
        let (a, b) = (net.forward(&x).unwrap(), scaled.forward(&x).unwrap());
        prop_assert!((a - b).norm() < 1e-12, "{:?} vs {:?}", a, b);
        let again = net.forward(&x).unwrap();
        prop_assert_eq!((a.x.to_bits(), a.y.to_bits()), (again.x.to_bits(), again.y.to_bits()));
    }

    #[test]
    fn no_activation_sees_the_future(t in 0usize..8, xs in prop::collection::vec(-1.0..1.0f64, 32), bump in 0.01..2.0f64) {
        let net = tiny_net();
        let x = WindowFeature::from_raw(8, 4, xs.clone()).unwrap();
        let mut ys = xs;
        for v in &mut ys[t * 4..(t + 1) * 4] {
            *v += bump;
        }
        let y = WindowFeature::from_raw(8, 4, ys).unwrap();
        let (a, b) = (net.activations(&x).unwrap(), net.activations(&y).unwrap());
        for ((name, ch, da), (_, _, db)) in a.layers.iter().zip(&b.layers) {
            prop_assert_eq!(da.len(), 8 * ch);
            prop_assert!(da[..t * ch] == db[..t * ch], "{} row < {} changed", name, t);
        }
    }
}

#[test]
fn bundled_scene_files_match_the_layouts() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes");
    let mut expected = vec![
        ("bottleneck-W120".to_string(), layouts::bottleneck_scene(1.2)),
        ("bottleneck-W160".to_string(), layouts::bottleneck_scene(1.6)),
        ("corridor-C300".to_string(), layouts::corridor_scene(3.0)),
        ("corner-C300".to_string(), layouts::corner_scene(3.0)),
        ("t_junction-C300".to_string(), layouts::t_junction_scene(3.0)),
    ];
    for (bw, bin) in [(1.2, 0.5), (1.6, 0.8), (1.6, 1.2), (2.2, 1.5)] {
        let s = layouts::composite(bw, bin);
        expected.push((s.name.clone().unwrap(), s));
    }
    let files = std::fs::read_dir(&dir).unwrap().count();
    assert_eq!(files, expected.len());
    for (name, scene) in expected {
        let loaded = ivid::Scene::load(dir.join(format!("{name}.json"))).unwrap();
        assert_eq!(
            serde_json::to_value(&loaded).unwrap(),
            serde_json::to_value(&scene).unwrap(),
            "{name} is stale; rerun the scene_files example"
        );
    }
}
