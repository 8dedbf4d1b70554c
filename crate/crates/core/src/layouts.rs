//! Parameterized builders for the four basic geometries and the composite
//! bottleneck → corner → T-junction → corridor scenario.
//!
//! Widths follow the run naming of the experiments: `b_w` is the bottleneck
//! exit width, `b_cor` the corridor width and `b_in` an entrance width, all in
//! meters here. Metric dimensions of the surrounding rooms are choices made
//! for these layouts and can be edited in the emitted scene files.

use crate::geometry::{Point2, Rect, Segment};
use crate::scene::{ModuleKind, ModuleRegion, Scene};

/// Depth of the waiting room in front of a bottleneck, in meters.
pub const BOTTLENECK_ROOM_DEPTH: f64 = 5.0;
/// Width of the waiting room in front of a bottleneck, in meters.
pub const BOTTLENECK_ROOM_WIDTH: f64 = 6.0;
/// Corridor width of the composite scenario (the `C300` experiments).
pub const COMPOSITE_CORRIDOR_WIDTH: f64 = 3.0;

fn p(x: f64, y: f64) -> Point2 {
    Point2::new(x, y)
}

fn seg(x0: f64, y0: f64, x1: f64, y1: f64) -> Segment {
    Segment::from_coords(x0, y0, x1, y1)
}

/// Splits an entry line into a centred opening of `gap` width plus the wall
/// pieces left over on either side.
fn gated_entry(line: Segment, gap: Option<f64>) -> (Segment, Vec<Segment>) {
    let len = line.length();
    match gap {
        Some(g) if g > 0.0 && g < len - 1e-9 => {
            let a = 0.5 * (1.0 - g / len);
            let b = 1.0 - a;
            let q0 = line.p0.lerp(line.p1, a);
            let q1 = line.p0.lerp(line.p1, b);
            (
                Segment::new(q0, q1),
                vec![Segment::new(line.p0, q0), Segment::new(q1, line.p1)],
            )
        }
        _ => (line, Vec::new()),
    }
}

/// Straight corridor running along +x from `origin` (its lower-left corner).
pub fn corridor_module(
    id: &str,
    origin: Point2,
    width: f64,
    length: f64,
    entry_width: Option<f64>,
) -> ModuleRegion {
    let (x0, y0) = (origin.x, origin.y);
    let (x1, y1) = (x0 + length, y0 + width);
    let (entry, mut walls) = gated_entry(seg(x0, y0, x0, y1), entry_width);
    walls.extend([seg(x0, y0, x1, y0), seg(x0, y1, x1, y1)]);
    let mid = x0 + 0.5 * length;
    let half = 1.0_f64.min(0.25 * length);
    ModuleRegion {
        id: id.to_string(),
        kind: ModuleKind::Corridor,
        boundary: vec![p(x0, y0), p(x1, y0), p(x1, y1), p(x0, y1)],
        walls,
        exit: seg(x1, y0, x1, y1),
        entries: vec![entry],
        virtual_walls: Vec::new(),
        measurement_area: Rect::new(mid - half, y0, mid + half, y1),
        focus_area: Rect::new(x0, y0, x1, y1),
    }
}

/// Waiting room `x ∈ [-depth, 0]`, `y ∈ [-width/2, width/2]` with the
/// bottleneck opening of width `b_w` centred in the wall at `x = 0`.
pub fn bottleneck_module(id: &str, b_w: f64, depth: f64, width: f64) -> ModuleRegion {
    let (h, g) = (0.5 * width, 0.5 * b_w);
    ModuleRegion {
        id: id.to_string(),
        kind: ModuleKind::Bottleneck,
        boundary: vec![p(-depth, -h), p(0.0, -h), p(0.0, h), p(-depth, h)],
        walls: vec![
            seg(-depth, -h, 0.0, -h),
            seg(-depth, h, 0.0, h),
            seg(0.0, -h, 0.0, -g),
            seg(0.0, g, 0.0, h),
        ],
        exit: seg(0.0, -g, 0.0, g),
        entries: vec![seg(-depth, -h, -depth, h)],
        virtual_walls: Vec::new(),
        measurement_area: Rect::new(-2.0_f64.max(-depth), -g.max(0.5), -0.5, g.max(0.5)),
        focus_area: Rect::new(-depth, -h, 0.0, h),
    }
}

/// Left-turning corner: enters along +x at `origin` (lower-left), turns to +y
/// after `leg_in` meters and leaves through the top of a second leg whose
/// outer wall is `leg_out` meters long.
pub fn corner_module(id: &str, origin: Point2, width: f64, leg_in: f64, leg_out: f64) -> ModuleRegion {
    let (x0, y0) = (origin.x, origin.y);
    let (xo, yt) = (x0 + leg_in, y0 + leg_out);
    let xi = xo - width;
    let yi = y0 + width;
    ModuleRegion {
        id: id.to_string(),
        kind: ModuleKind::Corner,
        boundary: vec![p(x0, y0), p(xo, y0), p(xo, yt), p(xi, yt), p(xi, yi), p(x0, yi)],
        walls: vec![
            seg(x0, y0, xo, y0),
            seg(xo, y0, xo, yt),
            seg(xi, yi, xi, yt),
            seg(x0, yi, xi, yi),
        ],
        exit: seg(xi, yt, xo, yt),
        entries: vec![seg(x0, y0, x0, yi)],
        virtual_walls: Vec::new(),
        measurement_area: Rect::new(xi, y0, xo, yi),
        focus_area: Rect::new(x0, y0, xo, yt),
    }
}

/// T-junction with two vertical arms of width `width` feeding a stem that
/// leaves along +x. `origin` is the lower-left corner of the lower arm.
/// `top_entry_width` narrows the entrance at the end of the upper arm.
pub fn t_junction_module(
    id: &str,
    origin: Point2,
    width: f64,
    arm: f64,
    stem: f64,
    top_entry_width: Option<f64>,
) -> ModuleRegion {
    let (x0, y0) = (origin.x, origin.y);
    let x1 = x0 + width;
    let xs = x1 + stem;
    let (ya, yb) = (y0 + arm, y0 + arm + width);
    let yt = yb + arm;
    let (top_entry, mut walls) = gated_entry(seg(x0, yt, x1, yt), top_entry_width);
    walls.extend([
        seg(x0, y0, x0, yt),
        seg(x1, y0, x1, ya),
        seg(x1, ya, xs, ya),
        seg(x1, yb, xs, yb),
        seg(x1, yb, x1, yt),
    ]);
    let m0 = x1 + 0.5_f64.min(0.25 * stem);
    let m1 = x1 + (m0 - x1 + 2.0).min(stem);
    ModuleRegion {
        id: id.to_string(),
        kind: ModuleKind::TJunction,
        boundary: vec![
            p(x0, y0),
            p(x1, y0),
            p(x1, ya),
            p(xs, ya),
            p(xs, yb),
            p(x1, yb),
            p(x1, yt),
            p(x0, yt),
        ],
        walls,
        exit: seg(xs, ya, xs, yb),
        entries: vec![seg(x0, y0, x1, y0), top_entry],
        virtual_walls: Vec::new(),
        measurement_area: Rect::new(m0, ya, m1, yb),
        focus_area: Rect::new(x0, y0, xs, yt),
    }
}

pub fn bottleneck_scene(b_w: f64) -> Scene {
    let name = format!("W{:03.0}", b_w * 100.0);
    Scene::single(bottleneck_module(
        "bottleneck",
        b_w,
        BOTTLENECK_ROOM_DEPTH,
        BOTTLENECK_ROOM_WIDTH,
    ))
    .expect("bottleneck layout is valid")
    .with_name(format!("bottleneck-{name}"))
    .with_expected_fps(25.0)
}

pub fn corridor_scene(b_cor: f64) -> Scene {
    Scene::single(corridor_module("corridor", Point2::ZERO, b_cor, 8.0, None))
        .expect("corridor layout is valid")
        .with_name(format!("corridor-C{:03.0}", b_cor * 100.0))
        .with_expected_fps(16.0)
}

pub fn corner_scene(b_cor: f64) -> Scene {
    Scene::single(corner_module("corner", Point2::ZERO, b_cor, 5.0, 5.0))
        .expect("corner layout is valid")
        .with_name(format!("corner-C{:03.0}", b_cor * 100.0))
        .with_expected_fps(16.0)
}

pub fn t_junction_scene(b_cor: f64) -> Scene {
    Scene::single(t_junction_module("t_junction", Point2::ZERO, b_cor, 4.0, 4.0, None))
        .expect("T-junction layout is valid")
        .with_name(format!("t_junction-C{:03.0}", b_cor * 100.0))
        .with_expected_fps(16.0)
}

/// Composite scenario: bottleneck (exit width `b_w`) → corner → T-junction
/// (outer entrance width `b_in`) → corridor. Each downstream module seals its
/// junction with the upstream module with a virtual wall.
pub fn composite(b_w: f64, b_in: f64) -> Scene {
    let w = COMPOSITE_CORRIDOR_WIDTH;
    let h = 0.5 * w;
    let bottleneck = bottleneck_module("bottleneck", b_w, BOTTLENECK_ROOM_DEPTH, BOTTLENECK_ROOM_WIDTH);

    let mut corner = corner_module("corner", p(0.0, -h), w, 4.5, 6.0);
    corner.virtual_walls = vec![corner.entries[0]];

    let corner_top = -h + 6.0;
    let mut tj = t_junction_module("t_junction", p(4.5 - w, corner_top), w, 3.0, 4.0, Some(b_in));
    tj.virtual_walls = vec![tj.entries[0]];

    let stem_y = corner_top + 3.0;
    let mut corridor = corridor_module("corridor", p(4.5 + 4.0, stem_y), w, 8.0, None);
    corridor.virtual_walls = vec![corridor.entries[0]];

    Scene::new(
        vec![bottleneck, corner, tj, corridor],
        vec![Some(1), Some(2), Some(3), None],
    )
    .expect("composite layout is valid")
    .with_name(format!("composite-W{:03.0}-E{:03.0}", b_w * 100.0, b_in * 100.0))
}
