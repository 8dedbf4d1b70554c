//! Trajectory metrics (ADE, FDE, TTE), fundamental diagrams and the
//! parameter-sensitivity summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Rect};
use crate::trajectory::Trajectory;

/// Mean distance between positions at the same absolute frame, over the
/// frames both trajectories cover.
pub fn ade(sim: &Trajectory, exp: &Trajectory) -> Result<f64> {
    let lo = sim.t0.max(exp.t0);
    let hi = sim.last_frame().min(exp.last_frame());
    if hi < lo {
        return Err(Error::NoOverlap);
    }
    let sum: f64 = (lo..=hi)
        .map(|f| {
            sim.position_at(f)
                .expect("frame in range")
                .distance(exp.position_at(f).expect("frame in range"))
        })
        .sum();
    Ok(sum / (hi - lo + 1) as f64)
}

fn in_focus_span(t: &Trajectory, in_focus: &dyn Fn(Point2) -> bool) -> Option<(usize, usize)> {
    let first = t.positions.iter().position(|p| in_focus(*p))?;
    let last = t.positions.iter().rposition(|p| in_focus(*p))?;
    Some((first, last))
}

/// Distance between the last in-focus positions (the last positions when a
/// trajectory never enters the focus area).
pub fn fde(sim: &Trajectory, exp: &Trajectory, in_focus: &dyn Fn(Point2) -> bool) -> f64 {
    let last = |t: &Trajectory| {
        in_focus_span(t, in_focus)
            .map(|(_, l)| t.positions[l])
            .or_else(|| t.positions.last().copied())
            .unwrap_or(Point2::ZERO)
    };
    last(sim).distance(last(exp))
}

/// Time spent in the focus area, s.
pub fn travel_time(t: &Trajectory, in_focus: &dyn Fn(Point2) -> bool) -> f64 {
    in_focus_span(t, in_focus).map_or(0.0, |(a, b)| (b - a) as f64 * t.dt)
}

/// Absolute difference of in-focus travel times, s.
pub fn tte(sim: &Trajectory, exp: &Trajectory, in_focus: &dyn Fn(Point2) -> bool) -> f64 {
    (travel_time(sim, in_focus) - travel_time(exp, in_focus)).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedMetrics {
    pub ped_id: i64,
    pub ade: f64,
    pub fde: f64,
    pub tte: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub run: String,
    pub model: String,
    pub pedestrians: Vec<PedMetrics>,
    pub mean_ade: f64,
    pub mean_fde: f64,
    pub mean_tte: f64,
    /// Pedestrians present in only one of the inputs or without overlap.
    pub excluded: Vec<i64>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Compares simulated and experimental trajectories matched by pedestrian id.
pub fn evaluate_run(
    run: &str,
    model: &str,
    sim: &[Trajectory],
    exp: &[Trajectory],
    in_focus: &(dyn Fn(Point2) -> bool + Sync),
) -> MetricReport {
    let sim_by: BTreeMap<i64, &Trajectory> = sim.iter().map(|t| (t.ped_id, t)).collect();
    let exp_by: BTreeMap<i64, &Trajectory> = exp.iter().map(|t| (t.ped_id, t)).collect();
    let mut excluded: Vec<i64> = sim_by
        .keys()
        .filter(|k| !exp_by.contains_key(k))
        .chain(exp_by.keys().filter(|k| !sim_by.contains_key(k)))
        .copied()
        .collect();
    let matched: Vec<(i64, &Trajectory, &Trajectory)> = sim_by
        .iter()
        .filter_map(|(id, s)| exp_by.get(id).map(|e| (*id, *s, *e)))
        .collect();
    let results: Vec<(i64, Option<PedMetrics>)> = matched
        .par_iter()
        .map(|(id, s, e)| {
            let m = ade(s, e).ok().map(|a| PedMetrics {
                ped_id: *id,
                ade: a,
                fde: fde(s, e, &|p| in_focus(p)),
                tte: tte(s, e, &|p| in_focus(p)),
            });
            (*id, m)
        })
        .collect();
    let mut pedestrians = Vec::new();
    for (id, m) in results {
        match m {
            Some(m) => pedestrians.push(m),
            None => excluded.push(id),
        }
    }
    excluded.sort_unstable();
    if !excluded.is_empty() {
        log::warn!(
            "run `{run}`: {} pedestrians excluded (unmatched or without overlap): {:?}",
            excluded.len(),
            excluded
        );
    }
    MetricReport {
        run: run.to_string(),
        model: model.to_string(),
        mean_ade: mean(pedestrians.iter().map(|m| m.ade)),
        mean_fde: mean(pedestrians.iter().map(|m| m.fde)),
        mean_tte: mean(pedestrians.iter().map(|m| m.tte)),
        pedestrians,
        excluded,
    }
}

/// Pools several reports into one with means over every matched pedestrian.
pub fn pool_reports(run: &str, model: &str, reports: &[MetricReport]) -> MetricReport {
    let pedestrians: Vec<PedMetrics> = reports.iter().flat_map(|r| r.pedestrians.iter().copied()).collect();
    MetricReport {
        run: run.into(),
        model: model.into(),
        mean_ade: mean(pedestrians.iter().map(|m| m.ade)),
        mean_fde: mean(pedestrians.iter().map(|m| m.fde)),
        mean_tte: mean(pedestrians.iter().map(|m| m.tte)),
        pedestrians,
        excluded: reports.iter().flat_map(|r| r.excluded.iter().copied()).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdPoint {
    pub time: f64,
    pub density: f64,
    pub speed: f64,
    pub flow: f64,
}

/// Classical measurement-area fundamental diagram: one point per frame with
/// at least one pedestrian inside `area`.
pub fn fundamental_diagram(trajs: &[Trajectory], area: &Rect, dt: f64) -> Result<Vec<FdPoint>> {
    let a = area.area();
    if !(a > 0.0) {
        return Err(Error::InvalidParams("measurement area must have positive size".into()));
    }
    let mut frames: BTreeMap<i64, (usize, f64)> = BTreeMap::new();
    for t in trajs {
        for f in t.frames() {
            let p = t.position_at(f).expect("frame in range");
            if !area.contains(p) {
                continue;
            }
            let v = t.observed_velocity_at(f).unwrap_or_default();
            let e = frames.entry(f).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += v.norm();
        }
    }
    Ok(frames
        .into_iter()
        .map(|(f, (n, speed_sum))| {
            let density = n as f64 / a;
            let speed = speed_sum / n as f64;
            FdPoint {
                time: f as f64 * dt,
                density,
                speed,
                flow: density * speed,
            }
        })
        .collect())
}

/// Mean metrics of one (D_e, β) combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub exit_distance: f64,
    pub beta_deg: f64,
    pub mean_ade: f64,
    pub mean_fde: f64,
    pub mean_tte: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySummary {
    pub rows: Vec<SensitivityRow>,
    /// Max minus min over the rows.
    pub spread_ade: f64,
    pub spread_fde: f64,
    pub spread_tte: f64,
}

pub fn parameter_sensitivity(rows: Vec<SensitivityRow>) -> Result<SensitivitySummary> {
    if rows.len() < 2 {
        return Err(Error::Precondition(
            "sensitivity analysis needs at least two parameter combinations".into(),
        ));
    }
    let spread = |f: fn(&SensitivityRow) -> f64| {
        let (lo, hi) = rows
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        hi - lo
    };
    Ok(SensitivitySummary {
        spread_ade: spread(|r| r.mean_ade),
        spread_fde: spread(|r| r.mean_fde),
        spread_tte: spread(|r| r.mean_tte),
        rows,
    })
}

fn write_text(path: &Path, comments: &[String], body: String) -> Result<()> {
    let mut text = String::new();
    for c in comments {
        text.push_str(&format!("# {c}\n"));
    }
    text.push_str(&body);
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Precondition(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Per-pedestrian rows: `run,model,ped_id,ade_m,fde_m,tte_s`.
pub fn write_metric_reports(path: impl AsRef<Path>, reports: &[MetricReport], comments: &[String]) -> Result<()> {
    let rows = reports.iter().flat_map(|r| {
        r.pedestrians.iter().map(move |m| {
            vec![
                r.run.clone(),
                r.model.clone(),
                m.ped_id.to_string(),
                m.ade.to_string(),
                m.fde.to_string(),
                m.tte.to_string(),
            ]
        })
    });
    let body = csv_string(&["run", "model", "ped_id", "ade_m", "fde_m", "tte_s"], rows)?;
    write_text(path.as_ref(), comments, body)
}

/// One row per report: `run,model,pedestrians,mean_ade_m,mean_fde_m,mean_tte_s`.
pub fn write_metric_summary(path: impl AsRef<Path>, reports: &[MetricReport], comments: &[String]) -> Result<()> {
    let rows = reports.iter().map(|r| {
        vec![
            r.run.clone(),
            r.model.clone(),
            r.pedestrians.len().to_string(),
            r.mean_ade.to_string(),
            r.mean_fde.to_string(),
            r.mean_tte.to_string(),
        ]
    });
    let body = csv_string(
        &["run", "model", "pedestrians", "mean_ade_m", "mean_fde_m", "mean_tte_s"],
        rows,
    )?;
    write_text(path.as_ref(), comments, body)
}

/// `time_s,density,speed,flow` rows.
pub fn write_fd_csv(path: impl AsRef<Path>, points: &[FdPoint], comments: &[String]) -> Result<()> {
    let rows = points.iter().map(|p| {
        vec![
            p.time.to_string(),
            p.density.to_string(),
            p.speed.to_string(),
            p.flow.to_string(),
        ]
    });
    let body = csv_string(&["time_s", "density", "speed", "flow"], rows)?;
    write_text(path.as_ref(), comments, body)
}

/// Combination rows followed by a `spread` row.
pub fn write_sensitivity_csv(path: impl AsRef<Path>, summary: &SensitivitySummary, comments: &[String]) -> Result<()> {
    let mut rows: Vec<Vec<String>> = summary
        .rows
        .iter()
        .map(|r| {
            vec![
                r.exit_distance.to_string(),
                r.beta_deg.to_string(),
                r.mean_ade.to_string(),
                r.mean_fde.to_string(),
                r.mean_tte.to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        "spread".into(),
        "spread".into(),
        summary.spread_ade.to_string(),
        summary.spread_fde.to_string(),
        summary.spread_tte.to_string(),
    ]);
    let body = csv_string(&["de_m", "beta_deg", "mean_ade_m", "mean_fde_m", "mean_tte_s"], rows)?;
    write_text(path.as_ref(), comments, body)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Two-panel scatter (density–speed, density–flow) of labelled series.
pub fn fd_svg(series: &[(&str, &[FdPoint])]) -> String {
    let (w, h, pad) = (360.0, 280.0, 40.0);
    let all = || series.iter().flat_map(|(_, p)| p.iter());
    let max = |f: fn(&FdPoint) -> f64| all().map(f).fold(0.0_f64, f64::max).max(1e-9) * 1.05;
    let (dmax, smax, fmax) = (max(|p| p.density), max(|p| p.speed), max(|p| p.flow));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="11">"#,
        2.0 * w,
        h + 20.0 * series.len() as f64
    );
    for (panel, (ylabel, ymax, getter)) in [
        ("speed (m/s)", smax, (|p: &FdPoint| p.speed) as fn(&FdPoint) -> f64),
        ("flow (1/(m·s))", fmax, |p: &FdPoint| p.flow),
    ]
    .into_iter()
    .enumerate()
    {
        let x0 = panel as f64 * w;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            x0 + pad,
            10.0,
            w - 1.5 * pad,
            h - pad - 10.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">density (1/m²), max {:.2}</text>"#,
            x0 + w / 2.0,
            h - 12.0,
            dmax
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" transform="rotate(-90 {} {})" text-anchor="middle">{ylabel}, max {:.2}</text>"#,
            x0 + 14.0,
            h / 2.0,
            x0 + 14.0,
            h / 2.0,
            ymax
        );
        for (k, (_, pts)) in series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            for p in pts.iter() {
                let px = x0 + pad + (p.density / dmax) * (w - 1.5 * pad);
                let py = h - pad - (getter(p) / ymax) * (h - pad - 10.0);
                let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="2" fill="{color}" fill-opacity="0.6"/>"#);
            }
        }
    }
    for (k, (label, _)) in series.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{}">{}</text>"#,
            pad,
            h + 14.0 + 20.0 * k as f64,
            PALETTE[k % PALETTE.len()],
            label
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(id: i64, t0: i64, pts: &[(f64, f64)], dt: f64) -> Trajectory {
        Trajectory::new(id, t0, dt, pts.iter().map(|&(x, y)| Point2::new(x, y)).collect())
    }

    fn everywhere(_: Point2) -> bool {
        true
    }

    #[test]
    fn ade_examples() {
        let a = traj(1, 0, &[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], 0.1);
        assert_eq!(ade(&a, &a).unwrap(), 0.0);
        let b = traj(1, 0, &[(0.1, 0.0), (1.1, 0.0), (2.1, 0.0), (9.0, 9.0)], 0.1);
        assert!((ade(&b, &a).unwrap() - 0.1).abs() < 1e-12);
        let c = traj(1, 10, &[(0.0, 0.0)], 0.1);
        assert!(matches!(ade(&a, &c), Err(Error::NoOverlap)));
    }

    #[test]
    fn fde_and_tte_examples() {
        let a = traj(1, 0, &[(4.0, 0.0), (5.0, 0.0)], 0.0625);
        let b = traj(1, 0, &[(4.0, 0.3), (5.0, 0.3)], 0.0625);
        assert!((fde(&a, &b, &everywhere) - 0.3).abs() < 1e-12);
        let exp = traj(1, 0, &[(0.0, 0.0); 10], 0.0625);
        let sim = traj(1, 0, &[(0.0, 0.0); 12], 0.0625);
        assert!((tte(&sim, &exp, &everywhere) - 0.125).abs() < 1e-12);
        assert_eq!(tte(&exp, &exp, &everywhere), 0.0);
    }

    #[test]
    fn fd_examples() {
        let t = traj(1, 0, &[(0.0, 0.0), (1.0, 0.0)], 1.0);
        let area = Rect::new(-1.0, -1.0, 1.0 + 1e-12, 1.0);
        let pts = fundamental_diagram(std::slice::from_ref(&t), &Rect::new(0.5, -1.0, 2.5, 1.0), 1.0).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!((pts[0].density, pts[0].speed, pts[0].flow), (0.25, 1.0, 0.25));
        let pts2 = fundamental_diagram(std::slice::from_ref(&t), &Rect::new(0.5, -1.0, 4.5, 1.0), 1.0).unwrap();
        assert_eq!((pts2[0].density, pts2[0].speed, pts2[0].flow), (0.125, 1.0, 0.125));
        assert_eq!(fundamental_diagram(&[t], &area, 1.0).unwrap().len(), 2);
        assert!(fundamental_diagram(&[], &Rect::new(0.0, 0.0, 0.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn sensitivity_needs_two_rows() {
        let r = SensitivityRow {
            exit_distance: 20.0,
            beta_deg: 5.0,
            mean_ade: 0.1,
            mean_fde: 0.2,
            mean_tte: 0.3,
        };
        assert!(parameter_sensitivity(vec![r]).is_err());
        let s = parameter_sensitivity(vec![r, r]).unwrap();
        assert_eq!((s.spread_ade, s.spread_fde, s.spread_tte), (0.0, 0.0, 0.0));
    }

    #[test]
    fn unmatched_ids_excluded() {
        let a = traj(1, 0, &[(0.0, 0.0), (1.0, 0.0)], 0.1);
        let b = traj(2, 0, &[(0.0, 0.0), (1.0, 0.0)], 0.1);
        let r = evaluate_run("r", "m", &[a.clone(), b], std::slice::from_ref(&a), &everywhere);
        assert_eq!(r.excluded, vec![2]);
        assert_eq!(r.pedestrians.len(), 1);
        assert_eq!(r.mean_ade, 0.0);
    }
}
