use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ivid::evaluation::{
    evaluate_run, fd_svg, write_fd_csv, write_metric_reports, write_metric_summary, write_sensitivity_csv,
    MetricReport,
};
use ivid::features::ExtractionParams;
use ivid::manifest::{ModelKind, RunManifest};
use ivid::pipeline::{
    fd_by_module, ingest, load_observed, network_for, parse_named_input, run_from_observed, sensitivity_grid,
    simulate_model, train_on_datasets, DatasetArchive, RunConfig, SENSITIVITY_BETA, SENSITIVITY_DE,
};
use ivid::simulator::{read_trajectories_csv, write_trajectories_csv};
use ivid::social_force::SfParams;
use ivid::trajectory::{DatasetRole, Trajectory};
use ivid::vpnn::{write_loss_history, Checkpoint, NetworkConfig, TrainingConfig};
use ivid::{Error, Result, Scene};

/// Data-driven crowd simulation: ingest, train, simulate, evaluate.
#[derive(Parser)]
#[command(name = "ivid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw experiment files into a clipped dataset archive.
    Ingest(IngestArgs),
    /// Train the velocity network on one or more dataset archives.
    Train(TrainArgs),
    /// Run a simulation with the trained network or the social-force model.
    Simulate(SimulateArgs),
    /// Compare simulated with experimental trajectories.
    Evaluate(EvaluateArgs),
    /// Fundamental diagrams over every module's measurement area.
    Fd(FdArgs),
    /// Train, simulate and evaluate over a D_e × β grid.
    Sensitivity(SensitivityArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Scene description (JSON).
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Input data, `NAME=PATH` or `PATH` (repeatable).
    #[arg(long)]
    data: Vec<String>,
    /// Frame rate of raw trajectory files.
    #[arg(long)]
    fps: Option<f64>,
    /// Factor converting file coordinates to meters.
    #[arg(long, default_value_t = 1.0)]
    unit_scale: f64,
    /// Visual ray interval, degrees.
    #[arg(long)]
    beta: Option<f64>,
    /// Virtual exit distance, meters.
    #[arg(long)]
    de: Option<f64>,
    /// Social sector angle, degrees.
    #[arg(long)]
    alpha: Option<f64>,
    /// Social interaction radius, meters.
    #[arg(long)]
    radius: Option<f64>,
    /// Lookback window, steps.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value = "ivid")]
    model: ModelKind,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory.
    #[arg(long, env = "IVID_OUT", default_value = "ivid-out")]
    out: PathBuf,
}

impl Common {
    fn extraction(&self) -> ExtractionParams {
        let d = ExtractionParams::default();
        ExtractionParams {
            radius: self.radius.unwrap_or(d.radius),
            alpha_deg: self.alpha.unwrap_or(d.alpha_deg),
            beta_deg: self.beta.unwrap_or(d.beta_deg),
            exit_distance: self.de.unwrap_or(d.exit_distance),
            window: self.window.unwrap_or(d.window),
        }
    }

    /// Checkpoint settings, overridden flags must agree with them.
    fn extraction_from(&self, ck: &Checkpoint) -> Result<ExtractionParams> {
        let e = ck.extraction;
        let p = ExtractionParams {
            radius: self.radius.unwrap_or(e.radius),
            alpha_deg: self.alpha.unwrap_or(e.alpha_deg),
            beta_deg: self.beta.unwrap_or(e.beta_deg),
            exit_distance: self.de.unwrap_or(e.exit_distance),
            window: self.window.unwrap_or(e.window),
        };
        ck.check_extraction(&p)?;
        Ok(p)
    }

    fn scene(&self) -> Result<(PathBuf, Scene)> {
        let path = self
            .scene
            .clone()
            .ok_or_else(|| Error::Precondition("--scene is required".into()))?;
        let scene = Scene::load(&path)?;
        Ok((path, scene))
    }

    fn manifest(&self, command: &str) -> RunManifest {
        let mut m = RunManifest::new(command, self.seed, &self.out);
        m.scene = self.scene.clone();
        m.data = self.data.iter().map(|d| parse_named_input(d).1).collect();
        m.setting("unit_scale", self.unit_scale);
        if let Some(f) = self.fps {
            m.setting("fps", f);
        }
        m
    }
}

#[derive(Args)]
struct TrainingFlags {
    #[arg(long, default_value_t = 3000)]
    iterations: usize,
    #[arg(long, default_value_t = 512)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    #[arg(long, default_value_t = 50)]
    log_every: usize,
}

impl TrainingFlags {
    fn config(&self, seed: u64) -> TrainingConfig {
        TrainingConfig {
            learning_rate: self.lr,
            iterations: self.iterations,
            batch_size: self.batch_size,
            seed,
            log_every: self.log_every,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "train-val")]
    role: Role,
    /// Archive name; defaults to the scene file stem.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Role {
    TrainVal,
    Test,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    training: TrainingFlags,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Run-config file; otherwise seeds come from --scene and --data.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    /// Simulated trajectory CSV.
    #[arg(long)]
    sim: PathBuf,
    /// Also write SVG fundamental diagrams.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct FdArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct SensitivityArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    training: TrainingFlags,
    /// Test-role dataset archive supplying seeds and reference trajectories.
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_delimiter = ',')]
    de_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    beta_grid: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: kind=usage msg={first}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Train(a) => cmd_train(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Fd(a) => cmd_fd(a),
        Command::Sensitivity(a) => cmd_sensitivity(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: kind={} msg={msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn require_fps(c: &Common, scene: Option<&Scene>) -> Result<f64> {
    c.fps
        .or_else(|| scene.and_then(|s| s.expected_fps))
        .ok_or_else(|| Error::Precondition("--fps is required (the scene declares no frame rate)".into()))
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let c = &a.common;
    let (scene_path, scene) = c.scene()?;
    if c.data.is_empty() {
        return Err(Error::Precondition("--data is required".into()));
    }
    let fps = c.fps.ok_or_else(|| Error::Precondition("--fps is required".into()))?;
    let params = c.extraction();
    params.validate()?;
    let role = match a.role {
        Role::TrainVal => DatasetRole::TrainVal,
        Role::Test => DatasetRole::Test,
    };
    let name = a
        .name
        .clone()
        .unwrap_or_else(|| scene_path.file_stem().map_or("dataset".into(), |s| s.to_string_lossy().into_owned()));
    let mut m = c.manifest("ingest");
    m.extraction = Some(params);
    m.setting("role", format!("{role:?}"));
    m.check_paths()?;
    let inputs: Vec<(String, PathBuf)> = c.data.iter().map(|d| parse_named_input(d)).collect();
    let archive = ingest(scene, role, &inputs, c.unit_scale, fps, params.window, &mut m)?;
    prepare_out(&c.out)?;
    archive.save(c.out.join(format!("{name}.dataset.json")))?;
    m.save(c.out.join(format!("{name}.manifest.json")))?;
    log::info!(
        "archived {} runs, {} trajectories",
        archive.dataset.runs.len(),
        archive.dataset.trajectory_count()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let c = &a.common;
    if c.data.is_empty() {
        return Err(Error::Precondition("--data needs at least one dataset archive".into()));
    }
    let params = c.extraction();
    params.validate()?;
    let net = NetworkConfig {
        dropout: a.training.dropout,
        ..network_for(&params)
    };
    let cfg = a.training.config(c.seed);
    let mut m = c.manifest("train");
    m.extraction = Some(params);
    m.network = Some(net.clone());
    m.training = Some(cfg.clone());
    m.check_paths()?;
    let datasets = c
        .data
        .iter()
        .map(|d| Ok(DatasetArchive::load(parse_named_input(d).1)?.dataset))
        .collect::<Result<Vec<_>>>()?;
    let model = train_on_datasets(&datasets, &params, net, &cfg)?;
    prepare_out(&c.out)?;
    let header = m.header_lines();
    let mut ck = Checkpoint::new(&model.outcome.network, params)?;
    ck.meta.insert("manifest_sha256".into(), m.sha256());
    ck.meta.insert("seed".into(), c.seed.to_string());
    ck.meta.insert("best_iteration".into(), model.outcome.best_iteration.to_string());
    ck.meta.insert("train_samples".into(), model.train_samples.to_string());
    ck.meta.insert("val_samples".into(), model.val_samples.to_string());
    ck.save(c.out.join("checkpoint.json"))?;
    write_loss_history(c.out.join("loss_history.csv"), &model.outcome.history, &header)?;
    m.save(c.out.join("train.manifest.json"))?;
    log::info!("checkpoint sha256 {}", ck.sha256()?);
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let c = &a.common;
    let cfg = a.config.as_ref().map(RunConfig::load).transpose()?;
    let scene_path = match (&cfg, &c.scene) {
        (_, Some(s)) => s.clone(),
        (Some(cfg), None) => cfg.scene.clone(),
        (None, None) => return Err(Error::Precondition("--scene or --config is required".into())),
    };
    let scene = Scene::load(&scene_path)?;
    let ck_path = c.checkpoint.clone().or_else(|| cfg.as_ref().and_then(|r| r.checkpoint.clone()));
    let checkpoint = match (c.model, &ck_path) {
        (ModelKind::Ivid, Some(p)) => Some(Checkpoint::load(p)?),
        (ModelKind::Ivid, None) => return Err(Error::Precondition("--checkpoint is required for the ivid model".into())),
        (ModelKind::Sf, _) => None,
    };
    let params = match &checkpoint {
        Some(ck) => c.extraction_from(ck)?,
        None => c.extraction(),
    };
    params.validate()?;

    let mut m = c.manifest("simulate");
    m.scene = Some(scene_path);
    m.model = Some(c.model);
    m.extraction = Some(params);
    if let Some(p) = &ck_path {
        m.setting("checkpoint", p.display());
    }
    if let Some(p) = &a.config {
        m.setting("config", p.display());
    }
    m.check_paths()?;

    let (name, observed, dt) = match &cfg {
        Some(cfg) => (cfg.name.clone(), cfg.observed(&scene, params.window)?, cfg.dt),
        None => {
            let spec = c
                .data
                .first()
                .ok_or_else(|| Error::Precondition("--data or --config is required".into()))?;
            let (name, path) = parse_named_input(spec);
            let fps = require_fps(c, Some(&scene))?;
            let runs = load_observed(&path, &name, c.unit_scale, fps)?;
            let (name, trajs) = runs
                .into_iter()
                .next()
                .ok_or_else(|| Error::Precondition(format!("{} holds no runs", path.display())))?;
            let dt = trajs.first().map_or(1.0 / fps, |t| t.dt);
            let clipped = ivid::trajectory::clip_to_region(&trajs, |p| scene.in_focus(p), params.window + 1);
            (name, clipped, dt)
        }
    };
    let max_steps = a.max_steps.or(cfg.as_ref().and_then(|r| r.max_steps));
    let run = run_from_observed(&name, &scene, &observed, dt, params, max_steps);
    let out = simulate_model(&run, c.model, checkpoint.as_ref(), &SfParams::default(), c.seed)?;
    if out.truncated {
        m.warn(format!("run truncated after {} steps", out.steps));
    }
    let dest = cfg
        .as_ref()
        .and_then(|r| r.output.clone())
        .unwrap_or_else(|| c.out.join("trajectories.csv"));
    if let Some(parent) = dest.parent() {
        prepare_out(parent)?;
    }
    prepare_out(&c.out)?;
    write_trajectories_csv(&dest, &scene, &[out.clone()], &m.header_lines())?;
    m.save(c.out.join("simulate.manifest.json"))?;
    log::info!(
        "{} pedestrians, {} steps, {} resets -> {}",
        out.trajectories.len(),
        out.steps,
        out.reset_count(),
        dest.display()
    );
    Ok(())
}

/// Observed runs from every `--data` entry.
fn observed_runs(c: &Common, fps: f64) -> Result<BTreeMap<String, Vec<Trajectory>>> {
    let mut all = BTreeMap::new();
    for spec in &c.data {
        let (name, path) = parse_named_input(spec);
        all.extend(load_observed(&path, &name, c.unit_scale, fps)?);
    }
    Ok(all)
}

fn write_fd(
    out: &Path,
    scene: &Scene,
    series: &[(String, Vec<Trajectory>)],
    dt: f64,
    svg: bool,
    header: &[String],
) -> Result<()> {
    let mut by_module: BTreeMap<String, Vec<(String, Vec<ivid::evaluation::FdPoint>)>> = BTreeMap::new();
    for (label, trajs) in series {
        for (module, pts) in fd_by_module(scene, trajs, dt)? {
            write_fd_csv(out.join(format!("fd_{label}_{module}.csv")), &pts, header)?;
            by_module.entry(module).or_default().push((label.clone(), pts));
        }
    }
    if svg {
        for (module, s) in &by_module {
            let refs: Vec<(&str, &[ivid::evaluation::FdPoint])> =
                s.iter().map(|(l, p)| (l.as_str(), p.as_slice())).collect();
            let mut text = format!("<!-- {} -->\n", header.join("; "));
            text.push_str(&fd_svg(&refs));
            let path = out.join(format!("fd_{module}.svg"));
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let c = &a.common;
    let (_, scene) = c.scene()?;
    let fps = require_fps(c, Some(&scene))?;
    let mut m = c.manifest("evaluate");
    m.model = Some(c.model);
    m.data.push(a.sim.clone());
    m.check_paths()?;
    let exp = observed_runs(c, fps)?;
    let sim = read_trajectories_csv(&a.sim, 1.0 / fps)?;
    let pairs: Vec<(&String, &Vec<Trajectory>, &Vec<Trajectory>)> = if exp.len() == 1 && sim.len() == 1 {
        let (en, e) = exp.iter().next().expect("one run");
        let (_, s) = sim.iter().next().expect("one run");
        vec![(en, s, e)]
    } else {
        sim.iter()
            .filter_map(|(name, s)| match exp.get(name) {
                Some(e) => Some((name, s, e)),
                None => {
                    m.warn(format!("simulated run `{name}` has no experimental counterpart"));
                    None
                }
            })
            .collect()
    };
    let model = c.model.to_string();
    let reports: Vec<MetricReport> = pairs
        .iter()
        .map(|(name, s, e)| evaluate_run(name, &model, s, e, &|p| scene.in_focus(p)))
        .collect();
    for r in &reports {
        if !r.excluded.is_empty() {
            m.warn(format!("run `{}`: excluded pedestrians {:?}", r.run, r.excluded));
        }
    }
    prepare_out(&c.out)?;
    let header = m.header_lines();
    write_metric_reports(c.out.join("metrics.csv"), &reports, &header)?;
    write_metric_summary(c.out.join("metrics_summary.csv"), &reports, &header)?;
    for (name, s, e) in &pairs {
        let series = vec![
            (format!("{name}_exp"), (*e).clone()),
            (format!("{name}_{model}"), (*s).clone()),
        ];
        write_fd(&c.out, &scene, &series, 1.0 / fps, a.svg, &header)?;
    }
    m.save(c.out.join("evaluate.manifest.json"))?;
    for r in &reports {
        log::info!(
            "{}: ADE {:.3} m, FDE {:.3} m, TTE {:.3} s over {} pedestrians",
            r.run,
            r.mean_ade,
            r.mean_fde,
            r.mean_tte,
            r.pedestrians.len()
        );
    }
    Ok(())
}

fn cmd_fd(a: FdArgs) -> Result<()> {
    let c = &a.common;
    let (_, scene) = c.scene()?;
    let fps = require_fps(c, Some(&scene))?;
    let m = c.manifest("fd");
    m.check_paths()?;
    let runs = observed_runs(c, fps)?;
    prepare_out(&c.out)?;
    let series: Vec<(String, Vec<Trajectory>)> = runs.into_iter().collect();
    write_fd(&c.out, &scene, &series, 1.0 / fps, a.svg, &m.header_lines())?;
    m.save(c.out.join("fd.manifest.json"))
}

fn cmd_sensitivity(a: SensitivityArgs) -> Result<()> {
    let c = &a.common;
    if c.data.is_empty() {
        return Err(Error::Precondition("--data needs at least one training archive".into()));
    }
    let base = c.extraction();
    let grid_de = a.de_grid.clone().unwrap_or(SENSITIVITY_DE.to_vec());
    let grid_beta = a.beta_grid.clone().unwrap_or(SENSITIVITY_BETA.to_vec());
    let cfg = a.training.config(c.seed);
    let mut m = c.manifest("sensitivity");
    m.extraction = Some(base);
    m.training = Some(cfg.clone());
    m.data.push(a.test.clone());
    m.setting("de_grid", format!("{grid_de:?}"));
    m.setting("beta_grid", format!("{grid_beta:?}"));
    m.setting("dropout", a.training.dropout);
    m.check_paths()?;
    let train_sets = c
        .data
        .iter()
        .map(|d| Ok(DatasetArchive::load(parse_named_input(d).1)?.dataset))
        .collect::<Result<Vec<_>>>()?;
    let test = DatasetArchive::load(&a.test)?.dataset;
    let res = sensitivity_grid(&train_sets, &test, &base, &grid_de, &grid_beta, a.training.dropout, &cfg)?;
    prepare_out(&c.out)?;
    let header = m.header_lines();
    write_sensitivity_csv(c.out.join("sensitivity.csv"), &res.summary, &header)?;
    write_metric_summary(c.out.join("sensitivity_metrics.csv"), &res.reports, &header)?;
    m.save(c.out.join("sensitivity.manifest.json"))
}
