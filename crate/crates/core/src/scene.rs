//! Composable walkable-space geometry.
//!
//! A [`Scene`] is an ordered list of [`ModuleRegion`]s joined by a successor
//! map. A pedestrian standing in a module perceives only that module's walls
//! (plus its virtual walls, which seal junctions to neighbouring modules) and
//! heads for that module's exit.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    polygon_boundary_distance, polygon_contains, Point2, Rect, Segment, EPS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleKind {
    Bottleneck,
    Corridor,
    Corner,
    TJunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleRegion {
    pub id: String,
    pub kind: ModuleKind,
    pub boundary: Vec<Point2>,
    pub walls: Vec<Segment>,
    pub exit: Segment,
    #[serde(default)]
    pub entries: Vec<Segment>,
    #[serde(default)]
    pub virtual_walls: Vec<Segment>,
    pub measurement_area: Rect,
    pub focus_area: Rect,
}

impl ModuleRegion {
    pub fn contains(&self, p: Point2) -> bool {
        polygon_contains(&self.boundary, p)
    }

    pub fn bounding_box(&self) -> Rect {
        Rect::bounding(&self.boundary).expect("validated boundary is nonempty")
    }

    /// Walls and virtual walls together.
    pub fn active_walls(&self) -> Vec<Segment> {
        self.walls
            .iter()
            .chain(self.virtual_walls.iter())
            .copied()
            .collect()
    }

    /// Exit endpoints in lexicographic `(x, y)` order.
    pub fn exit_endpoints(&self) -> (Point2, Point2) {
        ordered_endpoints(self.exit)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScene(format!("module `{}`: {msg}", self.id)));
        if self.boundary.len() < 3 {
            return bad("boundary needs at least three vertices".into());
        }
        if !self.boundary.iter().all(|p| p.is_finite()) {
            return bad("boundary has non-finite coordinates".into());
        }
        for (i, w) in self
            .walls
            .iter()
            .chain(&self.virtual_walls)
            .chain(&self.entries)
            .chain(std::iter::once(&self.exit))
            .enumerate()
        {
            if !(w.p0.is_finite() && w.p1.is_finite()) || w.is_degenerate() {
                return bad(format!("segment #{i} is degenerate or non-finite"));
            }
        }
        for p in [self.exit.p0, self.exit.p1, self.exit.midpoint()] {
            if polygon_boundary_distance(&self.boundary, p) > 1e-6 {
                return bad(format!("exit point ({}, {}) is not on the boundary", p.x, p.y));
            }
        }
        let len = self.exit.length();
        for w in &self.walls {
            if let Some(t) = self.exit.intersect_param(w) {
                let interior = t * len > 1e-6 && (1.0 - t) * len > 1e-6;
                // a collinear wall starting at an exit endpoint reports t = 0 or 1
                if interior {
                    return bad("a wall crosses the exit interior".into());
                }
                if self.exit.contains_point(w.midpoint()) {
                    return bad("a wall overlaps the exit".into());
                }
            }
        }
        let bbox = self.bounding_box();
        if !self.measurement_area.is_valid() || !bbox.contains_rect(&self.measurement_area) {
            return bad("measurement area must be a valid rectangle inside the boundary box".into());
        }
        if !self.focus_area.is_valid() {
            return bad("focus area must be a valid rectangle".into());
        }
        Ok(())
    }
}

pub(crate) fn ordered_endpoints(s: Segment) -> (Point2, Point2) {
    let key = |p: Point2| (p.x, p.y);
    if key(s.p0) <= key(s.p1) {
        (s.p0, s.p1)
    } else {
        (s.p1, s.p0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expected_fps: Option<f64>,
    modules: Vec<ModuleRegion>,
    #[serde(default)]
    successor: BTreeMap<String, Option<String>>,
}

/// Immutable, validated scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneFile", into = "SceneFile")]
pub struct Scene {
    pub name: Option<String>,
    /// Frame rate of the experiments recorded in this geometry, if known.
    pub expected_fps: Option<f64>,
    modules: Vec<ModuleRegion>,
    successor: Vec<Option<usize>>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl TryFrom<SceneFile> for Scene {
    type Error = Error;

    fn try_from(f: SceneFile) -> Result<Self> {
        let mut succ = Vec::with_capacity(f.modules.len());
        let ids: Vec<String> = f.modules.iter().map(|m| m.id.clone()).collect();
        for m in &f.modules {
            let next = match f.successor.get(&m.id) {
                Some(Some(next)) => Some(
                    ids.iter()
                        .position(|id| id == next)
                        .ok_or_else(|| Error::InvalidScene(format!("unknown successor `{next}`")))?,
                ),
                _ => None,
            };
            succ.push(next);
        }
        for key in f.successor.keys() {
            if !ids.contains(key) {
                return Err(Error::InvalidScene(format!("successor entry for unknown module `{key}`")));
            }
        }
        let mut scene = Scene::new(f.modules, succ)?;
        scene.name = f.name;
        scene.expected_fps = f.expected_fps;
        Ok(scene)
    }
}

impl From<Scene> for SceneFile {
    fn from(s: Scene) -> Self {
        let successor = s
            .modules
            .iter()
            .zip(&s.successor)
            .map(|(m, next)| (m.id.clone(), next.map(|i| s.modules[i].id.clone())))
            .collect();
        SceneFile {
            name: s.name,
            expected_fps: s.expected_fps,
            modules: s.modules,
            successor,
        }
    }
}

impl Scene {
    /// Builds and validates a scene; `successor[i]` is the index of the module
    /// that follows module `i`, or `None` when `i` is terminal.
    pub fn new(modules: Vec<ModuleRegion>, successor: Vec<Option<usize>>) -> Result<Self> {
        if modules.is_empty() {
            return Err(Error::InvalidScene("scene has no modules".into()));
        }
        if successor.len() != modules.len() {
            return Err(Error::InvalidScene("successor list length differs from module count".into()));
        }
        let mut index = HashMap::new();
        for (i, m) in modules.iter().enumerate() {
            m.validate()?;
            if index.insert(m.id.clone(), i).is_some() {
                return Err(Error::InvalidScene(format!("duplicate module id `{}`", m.id)));
            }
        }
        for (i, next) in successor.iter().enumerate() {
            let Some(j) = *next else { continue };
            if j >= modules.len() {
                return Err(Error::InvalidScene(format!("successor index {j} out of range")));
            }
            let exit = modules[i].exit;
            let abuts = modules[j].entries.iter().any(|e| e.contains_segment(&exit));
            if !abuts {
                return Err(Error::InvalidScene(format!(
                    "exit of `{}` does not abut an entry of `{}`",
                    modules[i].id, modules[j].id
                )));
            }
        }
        // acyclic: following successors from any module must terminate
        for start in 0..modules.len() {
            let mut cur = Some(start);
            let mut steps = 0;
            while let Some(c) = cur {
                steps += 1;
                if steps > modules.len() {
                    return Err(Error::InvalidScene("successor chain contains a cycle".into()));
                }
                cur = successor[c];
            }
        }
        Ok(Scene {
            name: None,
            expected_fps: None,
            modules,
            successor,
            index,
        })
    }

    pub fn single(module: ModuleRegion) -> Result<Self> {
        Scene::new(vec![module], vec![None])
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn with_expected_fps(mut self, fps: f64) -> Self {
        self.expected_fps = Some(fps);
        self
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scene::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn modules(&self) -> &[ModuleRegion] {
        &self.modules
    }

    pub fn module(&self, id: &str) -> Result<&ModuleRegion> {
        self.index_of(id).map(|i| &self.modules[i])
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownModule(id.to_string()))
    }

    pub fn successor_of(&self, id: &str) -> Result<Option<&ModuleRegion>> {
        Ok(self.successor[self.index_of(id)?].map(|j| &self.modules[j]))
    }

    pub fn is_terminal(&self, id: &str) -> Result<bool> {
        Ok(self.successor[self.index_of(id)?].is_none())
    }

    /// Module whose boundary contains `p`; boundary ties go to the module
    /// listed first.
    pub fn point_in_module(&self, p: Point2) -> Option<&str> {
        self.modules
            .iter()
            .find(|m| m.contains(p))
            .map(|m| m.id.as_str())
    }

    /// Like [`Scene::point_in_module`], but points within `snap` meters of a
    /// module boundary are assigned to the nearest such module.
    pub fn classify(&self, p: Point2, snap: f64) -> Option<&str> {
        if let Some(id) = self.point_in_module(p) {
            return Some(id);
        }
        let mut best: Option<(f64, &str)> = None;
        for m in &self.modules {
            let d = polygon_boundary_distance(&m.boundary, p);
            if d <= snap && best.is_none_or(|(bd, _)| d < bd - EPS) {
                best = Some((d, m.id.as_str()));
            }
        }
        best.map(|(_, id)| id)
    }

    pub fn active_walls(&self, module_id: &str) -> Result<Vec<Segment>> {
        Ok(self.module(module_id)?.active_walls())
    }

    pub fn active_exit(&self, module_id: &str) -> Result<(Point2, Point2)> {
        Ok(self.module(module_id)?.exit_endpoints())
    }

    /// Every wall (not virtual) of every module.
    pub fn all_walls(&self) -> Vec<Segment> {
        self.modules.iter().flat_map(|m| m.walls.iter().copied()).collect()
    }

    /// Union of the modules' focus areas, as a membership test.
    pub fn in_focus(&self, p: Point2) -> bool {
        self.modules.iter().any(|m| m.focus_area.contains(p))
    }

    pub fn bounding_box(&self) -> Rect {
        let pts: Vec<Point2> = self
            .modules
            .iter()
            .flat_map(|m| m.boundary.iter().copied())
            .collect();
        Rect::bounding(&pts).expect("scene has modules")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layouts;

    fn composite() -> Scene {
        layouts::composite(1.6, 0.8)
    }

    #[test]
    fn centroid_of_first_module_maps_to_it() {
        let scene = composite();
        let first = &scene.modules()[0];
        let c = crate::geometry::polygon_centroid(&first.boundary);
        assert_eq!(scene.point_in_module(c), Some(first.id.as_str()));
    }

    #[test]
    fn interior_point_of_each_module_maps_to_itself() {
        let scene = composite();
        for m in scene.modules() {
            let bbox = m.bounding_box();
            // focus-area centre is inside every layout module
            let c = m.measurement_area.center();
            assert!(bbox.contains(c));
            assert_eq!(scene.point_in_module(c), Some(m.id.as_str()));
        }
    }

    #[test]
    fn outside_point_has_no_module() {
        let scene = composite();
        assert_eq!(scene.point_in_module(Point2::new(-100.0, 0.0)), None);
    }

    #[test]
    fn junction_tie_goes_to_first_module() {
        let scene = composite();
        let ids: Vec<&str> = scene.modules().iter().map(|m| m.id.as_str()).collect();
        let exit = scene.modules()[0].exit;
        assert_eq!(scene.point_in_module(exit.midpoint()), Some(ids[0]));
    }

    #[test]
    fn active_walls_are_module_local() {
        let scene = composite();
        for (i, m) in scene.modules().iter().enumerate() {
            let active = scene.active_walls(&m.id).unwrap();
            assert_eq!(active.len(), m.walls.len() + m.virtual_walls.len());
            for (j, other) in scene.modules().iter().enumerate() {
                if i == j {
                    continue;
                }
                for w in &other.walls {
                    assert!(!active.contains(w), "{} sees a wall of {}", m.id, other.id);
                }
            }
        }
    }

    #[test]
    fn corner_after_bottleneck_sees_virtual_wall_and_own_exit() {
        let scene = composite();
        let corner = &scene.modules()[1];
        assert_eq!(corner.kind, ModuleKind::Corner);
        let walls = scene.active_walls(&corner.id).unwrap();
        assert!(walls.contains(&corner.virtual_walls[0]));
        let bottleneck = &scene.modules()[0];
        for w in &bottleneck.walls {
            assert!(!walls.contains(w));
        }
        assert_eq!(scene.active_exit(&corner.id).unwrap(), corner.exit_endpoints());
        assert_ne!(
            scene.active_exit(&corner.id).unwrap(),
            scene.active_exit(&bottleneck.id).unwrap()
        );
    }

    #[test]
    fn module_without_virtual_walls_returns_walls() {
        let scene = layouts::corridor_scene(3.0);
        let m = &scene.modules()[0];
        assert!(m.virtual_walls.is_empty());
        assert_eq!(scene.active_walls(&m.id).unwrap(), m.walls);
    }

    #[test]
    fn unknown_module_is_an_error() {
        let scene = composite();
        assert!(matches!(scene.active_walls("nope"), Err(Error::UnknownModule(_))));
        assert!(matches!(scene.active_exit("nope"), Err(Error::UnknownModule(_))));
    }

    #[test]
    fn bottleneck_exit_endpoints() {
        let scene = layouts::bottleneck_scene(1.2);
        let id = &scene.modules()[0].id;
        let (a, b) = scene.active_exit(id).unwrap();
        assert_eq!(a, Point2::new(0.0, -0.6));
        assert_eq!(b, Point2::new(0.0, 0.6));
    }

    #[test]
    fn json_round_trip() {
        let scene = composite();
        let text = scene.to_json_string().unwrap();
        let back = Scene::from_json_str(&text).unwrap();
        assert_eq!(back.modules(), scene.modules());
        assert_eq!(back.successor, scene.successor);
    }

    #[test]
    fn cyclic_successor_rejected() {
        let a = layouts::corridor_module("a", Point2::new(0.0, 0.0), 2.0, 4.0, None);
        let b = layouts::corridor_module("b", Point2::new(4.0, 0.0), 2.0, 4.0, None);
        let a_exit_ok = Scene::new(vec![a.clone(), b.clone()], vec![Some(1), None]);
        assert!(a_exit_ok.is_ok());
        let mut b2 = b.clone();
        b2.entries.push(b2.exit);
        let mut a2 = a.clone();
        a2.entries.push(b2.exit);
        let err = Scene::new(vec![a2, b2], vec![Some(1), Some(0)]);
        assert!(err.is_err());
    }

    #[test]
    fn wall_across_exit_rejected() {
        let mut m = layouts::corridor_module("c", Point2::ZERO, 2.0, 4.0, None);
        m.walls.push(Segment::from_coords(3.0, 1.0, 5.0, 1.0));
        assert!(Scene::single(m).is_err());
    }
}
