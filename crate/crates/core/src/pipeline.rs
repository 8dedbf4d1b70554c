//! End-to-end workflows shared by the command line and the examples:
//! dataset archives, run configs, training on several datasets, model
//! dispatch and the sensitivity grid.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{
    evaluate_run, fundamental_diagram, parameter_sensitivity, pool_reports, FdPoint, MetricReport, SensitivityRow,
    SensitivitySummary,
};
use crate::features::ExtractionParams;
use crate::geometry::{Rect, Vec2};
use crate::manifest::{ModelKind, RunManifest};
use crate::scene::Scene;
use crate::simulator::{read_trajectories_csv, simulate, PedestrianSeed, SimulationOutput, SimulationRun, MODULE_SNAP};
use crate::social_force::{simulate_sf, SfParams};
use crate::trajectory::{
    build_samples, clip_to_region, parse_trajectories, resample, split_train_val, Dataset, DatasetRole,
    RigidTransform, Trajectory,
};
use crate::vpnn::{train, Checkpoint, NetworkConfig, TrainingConfig, TrainingOutcome};

pub const ARCHIVE_FORMAT: &str = "ivid-dataset";
pub const ARCHIVE_VERSION: u32 = 1;

/// Train/validation ratio of the combined sample pool.
pub const SPLIT_RATIO: (usize, usize) = (4, 1);

/// Clipped trajectories of one geometry plus their per-frame velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetArchive {
    pub format: String,
    pub version: u32,
    pub manifest_sha256: String,
    pub dataset: Dataset,
    /// run → pedestrian → velocity per frame (the first frame repeats the
    /// second), m/s.
    pub velocities: BTreeMap<String, BTreeMap<i64, Vec<Vec2>>>,
}

impl DatasetArchive {
    pub fn new(dataset: Dataset, manifest_sha256: String) -> Self {
        let velocities = dataset
            .runs
            .iter()
            .map(|(name, trajs)| {
                let per_ped = trajs
                    .iter()
                    .map(|t| {
                        let v = t.frames().map(|f| t.observed_velocity_at(f).unwrap_or_default()).collect();
                        (t.ped_id, v)
                    })
                    .collect();
                (name.clone(), per_ped)
            })
            .collect();
        DatasetArchive {
            format: ARCHIVE_FORMAT.into(),
            version: ARCHIVE_VERSION,
            manifest_sha256,
            dataset,
            velocities,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let a: DatasetArchive = serde_json::from_str(&text)?;
        if a.format != ARCHIVE_FORMAT || a.version != ARCHIVE_VERSION {
            return Err(Error::Precondition(format!(
                "{}: not an {ARCHIVE_FORMAT} v{ARCHIVE_VERSION} archive",
                path.display()
            )));
        }
        Ok(a)
    }
}

/// Splits `NAME=PATH`; a bare path is named after its file stem.
pub fn parse_named_input(s: &str) -> (String, PathBuf) {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !name.contains(['/', '\\']) => (name.to_string(), PathBuf::from(path)),
        _ => {
            let p = PathBuf::from(s);
            let stem = p.file_stem().map_or_else(|| s.to_string(), |x| x.to_string_lossy().into_owned());
            (stem, p)
        }
    }
}

/// Reads observed trajectories from a raw experiment file, a trajectory CSV
/// or a dataset archive, grouped by run name.
pub fn load_observed(path: &Path, name: &str, unit_scale: f64, fps: f64) -> Result<BTreeMap<String, Vec<Trajectory>>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Ok(DatasetArchive::load(path)?.dataset.runs),
        Some("csv") => read_trajectories_csv(path, 1.0 / fps),
        _ => Ok(BTreeMap::from([(name.to_string(), parse_trajectories(path, unit_scale, fps)?)])),
    }
}

/// Parses raw experiment files into a clipped dataset archive. A frame rate
/// differing from the scene's expectation is recorded as a manifest warning.
pub fn ingest(
    scene: Scene,
    role: DatasetRole,
    inputs: &[(String, PathBuf)],
    unit_scale: f64,
    fps: f64,
    window: usize,
    manifest: &mut RunManifest,
) -> Result<DatasetArchive> {
    if !(unit_scale.is_finite() && unit_scale > 0.0) {
        return Err(Error::InvalidParams("unit scale must be positive".into()));
    }
    if let Some(expected) = scene.expected_fps {
        if (expected - fps).abs() > 1e-6 * expected {
            manifest.warn(format!("fps {fps} differs from the scene's expected {expected}"));
        }
    }
    let mut names = BTreeSet::new();
    let mut runs = Vec::with_capacity(inputs.len());
    for (name, path) in inputs {
        if !names.insert(name.clone()) {
            return Err(Error::Precondition(format!("run `{name}` given twice")));
        }
        runs.push((name.clone(), parse_trajectories(path, unit_scale, fps)?));
    }
    let dataset = Dataset::new(scene, role, 1.0 / fps, runs, window)?;
    for (name, t) in &dataset.runs {
        log::info!("run `{name}`: {} trajectories after clipping", t.len());
    }
    Ok(DatasetArchive::new(dataset, manifest.sha256()))
}

/// Network of the standard shape for the given extraction settings.
pub fn network_for(params: &ExtractionParams) -> NetworkConfig {
    NetworkConfig {
        window: params.window,
        ..NetworkConfig::standard(params.step_dim())
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub outcome: TrainingOutcome,
    pub train_samples: usize,
    pub val_samples: usize,
}

/// Builds samples from every dataset, pools them, splits 4:1 with the
/// training seed and trains.
pub fn train_on_datasets(
    datasets: &[Dataset],
    params: &ExtractionParams,
    network: NetworkConfig,
    cfg: &TrainingConfig,
) -> Result<TrainedModel> {
    params.validate()?;
    let mut samples = Vec::new();
    for d in datasets {
        samples.extend(build_samples(d, params)?);
    }
    if samples.len() < 2 {
        return Err(Error::Precondition(format!(
            "{} training samples; at least two are needed",
            samples.len()
        )));
    }
    let (tr, va) = split_train_val(samples, SPLIT_RATIO, cfg.seed);
    log::info!("{} training and {} validation samples", tr.len(), va.len());
    let outcome = train(&tr, &va, network, cfg)?;
    Ok(TrainedModel {
        outcome,
        train_samples: tr.len(),
        val_samples: va.len(),
    })
}

fn one() -> f64 {
    1.0
}

/// Where the initial states of one group of pedestrians come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSource {
    /// Raw experiment file, trajectory CSV or dataset archive.
    pub trajectories: PathBuf,
    /// Run to take from a CSV or archive holding several.
    #[serde(default)]
    pub run: Option<String>,
    #[serde(default = "one")]
    pub unit_scale: f64,
    /// Frame rate of a raw file; defaults to `1 / dt` of the run.
    #[serde(default)]
    pub fps: Option<f64>,
    /// Maps experiment coordinates into the scene.
    #[serde(default)]
    pub transform: Option<RigidTransform>,
    /// Keeps pedestrians whose first (transformed) position lies inside.
    #[serde(default)]
    pub region: Option<Rect>,
    #[serde(default)]
    pub id_offset: i64,
    #[serde(default)]
    pub frame_offset: i64,
}

/// Structured description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub scene: PathBuf,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    pub dt: f64,
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub sources: Vec<SeedSource>,
}

impl RunConfig {
    /// Loads a config; relative paths are resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.scene);
        cfg.checkpoint.as_mut().map(fix);
        cfg.output.as_mut().map(fix);
        for s in &mut cfg.sources {
            fix(&mut s.trajectories);
        }
        Ok(cfg)
    }

    /// Observed trajectories of all sources, mapped into the scene's frame
    /// and time grid, clipped to its focus areas.
    pub fn observed(&self, scene: &Scene, window: usize) -> Result<Vec<Trajectory>> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams("dt must be positive".into()));
        }
        let mut out: Vec<Trajectory> = Vec::new();
        let mut ids = BTreeSet::new();
        for src in &self.sources {
            let fps = src.fps.unwrap_or(1.0 / self.dt);
            let stem = src
                .trajectories
                .file_stem()
                .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            let mut runs = load_observed(&src.trajectories, &stem, src.unit_scale, fps)?;
            let trajs = match &src.run {
                Some(r) => runs
                    .remove(r)
                    .ok_or_else(|| Error::Precondition(format!("run `{r}` not found in {}", src.trajectories.display())))?,
                None if runs.len() == 1 => runs.into_values().next().expect("one run"),
                None => {
                    return Err(Error::Precondition(format!(
                        "{} holds {} runs; name one with `run`",
                        src.trajectories.display(),
                        runs.len()
                    )))
                }
            };
            let mut mapped = Vec::new();
            for t in trajs {
                let t = match &src.transform {
                    Some(tr) => tr.apply_traj(&t),
                    None => t,
                };
                let mut t = if (t.dt - self.dt).abs() > 1e-12 {
                    match resample(&t, self.dt) {
                        Some(r) => r,
                        None => continue,
                    }
                } else {
                    t
                };
                t.ped_id += src.id_offset;
                t.t0 += src.frame_offset;
                if src.region.is_some_and(|r| !r.contains(t.positions[0])) {
                    continue;
                }
                mapped.push(t);
            }
            for t in clip_to_region(&mapped, |p| scene.in_focus(p), window + 1) {
                if !ids.insert(t.ped_id) {
                    return Err(Error::Precondition(format!(
                        "pedestrian id {} appears in two sources; set id_offset",
                        t.ped_id
                    )));
                }
                out.push(t);
            }
        }
        out.sort_by_key(|t| t.ped_id);
        Ok(out)
    }
}

/// Four times the observed duration, in steps.
pub fn default_max_steps(observed: &[Trajectory]) -> usize {
    let lo = observed.iter().map(|t| t.t0).min().unwrap_or(0);
    let hi = observed.iter().map(|t| t.last_frame()).max().unwrap_or(0);
    (4 * (hi - lo).max(1)) as usize
}

/// Simulation seeded with the first `window` positions of each observed
/// trajectory. Pedestrians whose seed lies outside every module are skipped.
pub fn run_from_observed(
    name: &str,
    scene: &Scene,
    observed: &[Trajectory],
    dt: f64,
    params: ExtractionParams,
    max_steps: Option<usize>,
) -> SimulationRun {
    let seeds: Vec<PedestrianSeed> = observed
        .iter()
        .filter_map(|t| PedestrianSeed::from_trajectory(t, params.window))
        .filter(|s| {
            let ok = s.positions.iter().all(|p| scene.classify(*p, MODULE_SNAP).is_some());
            if !ok {
                log::warn!("run `{name}`: pedestrian {} starts outside the scene; skipped", s.ped_id);
            }
            ok
        })
        .collect();
    SimulationRun {
        name: name.to_string(),
        scene: scene.clone(),
        dt,
        seeds,
        params,
        max_steps: max_steps.unwrap_or_else(|| default_max_steps(observed)),
    }
}

/// Runs the data-driven model (which needs a checkpoint) or the
/// social-force baseline.
pub fn simulate_model(
    run: &SimulationRun,
    model: ModelKind,
    checkpoint: Option<&Checkpoint>,
    sf: &SfParams,
    seed: u64,
) -> Result<SimulationOutput> {
    match model {
        ModelKind::Ivid => {
            let ck = checkpoint.ok_or_else(|| Error::Precondition("the ivid model needs a checkpoint".into()))?;
            ck.check_extraction(&run.params)?;
            simulate(run, &ck.network()?)
        }
        ModelKind::Sf => simulate_sf(run, sf, seed),
    }
}

/// Fundamental diagram over every module's measurement area.
pub fn fd_by_module(scene: &Scene, trajs: &[Trajectory], dt: f64) -> Result<Vec<(String, Vec<FdPoint>)>> {
    scene
        .modules()
        .iter()
        .map(|m| Ok((m.id.clone(), fundamental_diagram(trajs, &m.measurement_area, dt)?)))
        .collect()
}

/// D_e and β values examined by the sensitivity study.
pub const SENSITIVITY_DE: [f64; 2] = [20.0, 100.0];
pub const SENSITIVITY_BETA: [f64; 4] = [5.0, 10.0, 15.0, 18.0];

#[derive(Debug, Clone)]
pub struct SensitivityResult {
    pub summary: SensitivitySummary,
    /// Pooled report per combination, in row order.
    pub reports: Vec<MetricReport>,
}

/// Trains one model per (D_e, β) combination, simulates every run of the
/// test dataset with it and summarises the pooled metrics.
pub fn sensitivity_grid(
    train_sets: &[Dataset],
    test: &Dataset,
    base: &ExtractionParams,
    grid_de: &[f64],
    grid_beta: &[f64],
    dropout: f64,
    cfg: &TrainingConfig,
) -> Result<SensitivityResult> {
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &de in grid_de {
        for &beta in grid_beta {
            let params = ExtractionParams {
                exit_distance: de,
                beta_deg: beta,
                ..*base
            };
            let net = NetworkConfig {
                dropout,
                ..network_for(&params)
            };
            let model = train_on_datasets(train_sets, &params, net, cfg)?;
            let network = &model.outcome.network;
            let label = format!("de{de}-beta{beta}");
            let mut per_run = Vec::new();
            for (name, observed) in &test.runs {
                let run = run_from_observed(name, &test.scene, observed, test.dt, params, None);
                let out = simulate(&run, network)?;
                per_run.push(evaluate_run(name, &label, &out.to_trajectories(), observed, &|p| {
                    test.scene.in_focus(p)
                }));
            }
            let pooled = pool_reports("all", &label, &per_run);
            log::info!(
                "D_e={de} beta={beta}: ADE {:.3} FDE {:.3} TTE {:.3}",
                pooled.mean_ade,
                pooled.mean_fde,
                pooled.mean_tte
            );
            rows.push(SensitivityRow {
                exit_distance: de,
                beta_deg: beta,
                mean_ade: pooled.mean_ade,
                mean_fde: pooled.mean_fde,
                mean_tte: pooled.mean_tte,
            });
            reports.push(pooled);
        }
    }
    Ok(SensitivityResult {
        summary: parameter_sensitivity(rows)?,
        reports,
    })
}
