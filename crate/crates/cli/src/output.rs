//! Artifact schemas and writers. Every JSON artifact deserializes back into
//! the struct that wrote it; unknown keys are rejected on the way in.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use thrustlayout::nalgebra::DMatrix;
use thrustlayout::optimizer::{Evaluation, RestartRecord};
use thrustlayout::sim::{ComparisonRow, Rmse, ScenarioKind, SimReport};
use thrustlayout::{OptimizationResult64, Problem64};

use crate::{io_err, CliError, CliResult};

pub const STATE_NAMES: [&str; 12] = ["x", "y", "z", "vx", "vy", "vz", "roll", "pitch", "yaw", "wx", "wy", "wz"];

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |e| CliError::Io { path: path.to_path_buf(), source: std::io::Error::other(e) }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutFile {
    pub payload: String,
    #[serde(rename = "N")]
    pub n_modules: usize,
    /// Sorted, in `[0, 360)`.
    pub theta_deg: Vec<f64>,
    pub theta_rad: Vec<f64>,
    /// Module centers relative to the payload centroid, m.
    pub attachment_points: Vec<[f64; 2]>,
    pub rod_length: f64,
    pub d_min: f64,
    pub active_component: usize,
    pub active_bound: String,
    pub j_star: f64,
    /// Hover thrust per motor, N.
    pub feedforward: Vec<f64>,
    pub seed: u64,
    pub total_cost_evaluations: usize,
}

impl LayoutFile {
    pub fn from_result(problem: &Problem64, seed: u64, res: &OptimizationResult64) -> Self {
        let l = &res.best_layout;
        Self {
            payload: problem.payload.name.clone(),
            n_modules: l.len(),
            theta_deg: l.degrees(),
            theta_rad: l.theta.clone(),
            attachment_points: res.model.mass_props.attachment_points.iter().map(|p| [p.x, p.y]).collect(),
            rod_length: l.rod_length,
            d_min: res.best_score.d_min,
            active_component: res.best_score.active_component,
            active_bound: res.best_score.active_bound.as_str().to_string(),
            j_star: res.controller.j_star,
            feedforward: res.model.u_bar.iter().copied().collect(),
            seed,
            total_cost_evaluations: res.total_cost_evaluations,
        }
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        read_json(path)
    }
}

/// `K*` with one row per motor input and one column per state.
pub fn write_gains(path: &Path, k: &DMatrix<f64>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header = vec!["input".to_string()];
    header.extend(STATE_NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(csv_err(path))?;
    for i in 0..k.nrows() {
        let mut row = vec![format!("u{i}")];
        row.extend(k.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn join_deg(theta: &[f64]) -> String {
    theta.iter().map(|t| t.to_degrees().to_string()).collect::<Vec<_>>().join(";")
}

pub fn write_history(path: &Path, history: &[RestartRecord<f64>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record([
        "restart",
        "initial_theta_deg",
        "final_theta_deg",
        "initial_cost",
        "final_cost",
        "iterations",
        "evaluations",
        "converged",
        "best_so_far",
    ])
    .map_err(csv_err(path))?;
    for r in history {
        w.write_record([
            r.restart.to_string(),
            join_deg(&r.initial_theta),
            join_deg(&r.final_theta),
            r.initial_cost.to_string(),
            r.final_cost.to_string(),
            r.iterations.to_string(),
            r.evaluations.to_string(),
            r.converged.to_string(),
            r.best_so_far.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// One row per sample: `t`, the 12 states, commanded and saturated thrusts, `d_M`.
pub fn write_sim_csv(path: &Path, r: &SimReport, stride: usize) -> CliResult<()> {
    let n_in = r.thrust_cmd.first().map_or(0, |u| u.len());
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header = vec!["t".to_string()];
    header.extend(STATE_NAMES.iter().map(|s| s.to_string()));
    header.extend((0..n_in).map(|i| format!("u{i}")));
    header.extend((0..n_in).map(|i| format!("u_sat{i}")));
    header.push("d_M".into());
    w.write_record(&header).map_err(csv_err(path))?;
    let mut row = Vec::with_capacity(header.len());
    for k in (0..r.len()).step_by(stride.max(1)) {
        row.clear();
        row.push(r.time[k].to_string());
        row.extend(r.states[k].iter().map(|v| v.to_string()));
        row.extend(r.thrust_cmd[k].iter().map(|v| v.to_string()));
        row.extend(r.thrust_sat[k].iter().map(|v| v.to_string()));
        row.push(r.mahalanobis[k].to_string());
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub scenario: String,
    pub kind: String,
    /// `primary` or `baseline`.
    pub layout: String,
    pub samples: usize,
    pub rmse_x: f64,
    pub rmse_y: f64,
    pub rmse_z: f64,
    pub rmse_yaw: f64,
    pub rmse_pitch: f64,
    pub rmse_roll: f64,
    pub saturation_events: usize,
    pub diverged: bool,
    pub overshoot: Option<f64>,
    pub settling_time: Option<f64>,
    pub peak_attitude: f64,
    pub mean_mahalanobis: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl RunSummary {
    fn from_report(r: &SimReport, layout: &str) -> Self {
        let Rmse { x, y, z, yaw, pitch, roll } = r.rmse;
        Self {
            scenario: r.scenario.clone(),
            kind: r.kind.as_str().to_string(),
            layout: layout.to_string(),
            samples: r.len(),
            rmse_x: x,
            rmse_y: y,
            rmse_z: z,
            rmse_yaw: yaw,
            rmse_pitch: pitch,
            rmse_roll: roll,
            saturation_events: r.saturation_events,
            diverged: r.diverged,
            overshoot: r.overshoot,
            settling_time: r.settling_time,
            peak_attitude: r.peak_attitude,
            mean_mahalanobis: r.mean_mahalanobis,
            note: (r.kind == ScenarioKind::Wind)
                .then(|| "wind modeled as a constant world-frame force (stand-in for a measured wind speed)".to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonEntry {
    pub scenario: String,
    pub metric: String,
    pub suboptimal: f64,
    pub optimal: f64,
    /// Absent when the baseline value is zero.
    pub improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryFile {
    pub primary_theta_deg: Vec<f64>,
    pub primary_d_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_theta_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_d_min: Option<f64>,
    pub runs: Vec<RunSummary>,
    #[serde(default)]
    pub comparison: Vec<ComparisonEntry>,
}

impl SummaryFile {
    pub fn comparison(
        primary: &Evaluation<f64>,
        baseline: Option<&Evaluation<f64>>,
        primary_runs: &[SimReport],
        baseline_runs: Option<&[SimReport]>,
        rows: &[ComparisonRow],
    ) -> Self {
        let mut runs: Vec<RunSummary> = primary_runs.iter().map(|r| RunSummary::from_report(r, "primary")).collect();
        if let Some(b) = baseline_runs {
            runs.extend(b.iter().map(|r| RunSummary::from_report(r, "baseline")));
        }
        Self {
            primary_theta_deg: primary.layout.degrees(),
            primary_d_min: primary.score.d_min,
            baseline_theta_deg: baseline.map(|b| b.layout.degrees()),
            baseline_d_min: baseline.map(|b| b.score.d_min),
            runs,
            comparison: rows
                .iter()
                .map(|r| ComparisonEntry {
                    scenario: r.scenario.clone(),
                    metric: r.metric.clone(),
                    suboptimal: r.suboptimal,
                    optimal: r.optimal,
                    improvement_pct: finite(r.improvement_pct),
                })
                .collect(),
        }
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        read_json(path)
    }
}

fn opt_str(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `summary.json` plus `summary.csv`: the paired table when a baseline was
/// run, otherwise one row per scenario metric.
pub fn write_summary(dir: &Path, s: &SummaryFile) -> CliResult<()> {
    write_json(&dir.join("summary.json"), s)?;
    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    if s.comparison.is_empty() {
        w.write_record(["scenario", "metric", "value"]).map_err(csv_err(&path))?;
        for r in &s.runs {
            let metrics = [
                ("rmse_x", Some(r.rmse_x)),
                ("rmse_y", Some(r.rmse_y)),
                ("rmse_z", Some(r.rmse_z)),
                ("rmse_yaw", Some(r.rmse_yaw)),
                ("rmse_pitch", Some(r.rmse_pitch)),
                ("rmse_roll", Some(r.rmse_roll)),
                ("saturation_events", Some(r.saturation_events as f64)),
                ("peak_attitude", Some(r.peak_attitude)),
                ("mean_mahalanobis", Some(r.mean_mahalanobis)),
                ("overshoot", r.overshoot),
                ("settling_time", r.settling_time),
            ];
            for (name, v) in metrics {
                w.write_record([r.scenario.as_str(), name, &opt_str(v)]).map_err(csv_err(&path))?;
            }
        }
    } else {
        w.write_record(["scenario", "metric", "suboptimal", "optimal", "improvement_pct"])
            .map_err(csv_err(&path))?;
        for c in &s.comparison {
            w.write_record([
                c.scenario.clone(),
                c.metric.clone(),
                c.suboptimal.to_string(),
                c.optimal.to_string(),
                opt_str(c.improvement_pct),
            ])
            .map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(io_err(&path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub name: String,
    pub payload: String,
    #[serde(rename = "N")]
    pub n_modules: usize,
    /// `ok` or `failed`.
    pub status: String,
    pub layout_file: Option<String>,
    pub theta_deg: Option<Vec<f64>>,
    pub d_min: Option<f64>,
    pub error: Option<String>,
}

pub fn write_index(dir: &Path, entries: &[IndexEntry]) -> CliResult<()> {
    write_json(&dir.join("index.json"), &entries)?;
    let path = dir.join("index.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["name", "payload", "N", "status", "layout_file", "theta_deg", "d_min", "error"])
        .map_err(csv_err(&path))?;
    for e in entries {
        let theta = e
            .theta_deg
            .as_ref()
            .map(|t| t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        w.write_record([
            e.name.clone(),
            e.payload.clone(),
            e.n_modules.to_string(),
            e.status.clone(),
            e.layout_file.clone().unwrap_or_default(),
            theta,
            opt_str(e.d_min),
            e.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))
}

pub fn read_index(path: &Path) -> CliResult<Vec<IndexEntry>> {
    read_json(path)
}
