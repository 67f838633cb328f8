//! Command implementations behind the `thrustlayout` binary.
//!
//! Every command reads one JSON config, writes its artifacts under the
//! output directory and maps failures onto a stable exit code: 0 success,
//! 1 usage or config error, 2 infeasible layout or diverged simulation.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use thrustlayout::config::{ProblemConfig, SweepCase};
use thrustlayout::optimizer::{self, Evaluation};
use thrustlayout::sim::{self, Scenario, SimReport, Vehicle};
use thrustlayout::{Error as CoreError, OptimizationResult64, Problem64};

pub mod output;

use output::{
    write_gains, write_history, write_index, write_sim_csv, write_summary, IndexEntry, LayoutFile, SummaryFile,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Diverged(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Infeasible(_) | CliError::Diverged(_) => EXIT_INFEASIBLE,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(_)
            | CoreError::InvalidPayload(_)
            | CoreError::InvalidQuad(_)
            | CoreError::Dimension(_) => CliError::Config(e.to_string()),
            _ => CliError::Infeasible(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Options shared by every command.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Write every `stride`-th simulation sample.
    pub stride: Option<usize>,
}

/// Bundled example configurations, by name.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "square_4quads" => Some(include_str!("../configs/square_4quads.json")),
        "concave_3quads" => Some(include_str!("../configs/concave_3quads.json")),
        "shapes_sweep" => Some(include_str!("../configs/shapes_sweep.json")),
        _ => None,
    }
}

/// Reads a config from `source`: a file path, or a bundled name when no such file exists.
pub fn load_config(source: &str, opts: &RunOptions) -> CliResult<ProblemConfig> {
    let path = Path::new(source);
    let text = if path.exists() {
        fs::read_to_string(path).map_err(io_err(path))?
    } else if let Some(t) = bundled(source) {
        t.to_string()
    } else {
        return Err(CliError::Config(format!("config '{source}' not found")));
    };
    let mut cfg = ProblemConfig::from_json(&text).map_err(|e| CliError::Config(format!("{source}: {e}")))?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn run_optimizer(problem: &Problem64, cfg: &ProblemConfig) -> CliResult<OptimizationResult64> {
    let opt = cfg.optimization_config()?;
    optimizer::optimize(problem, &opt).map_err(|e| match e {
        CoreError::NoFeasibleLayout { .. } => CliError::Infeasible(e.to_string()),
        other => other.into(),
    })
}

fn write_optimization(dir: &Path, problem: &Problem64, cfg: &ProblemConfig, res: &OptimizationResult64) -> CliResult<LayoutFile> {
    ensure_dir(dir)?;
    let layout = LayoutFile::from_result(problem, cfg.seed, res);
    layout.write(&dir.join("layout.json"))?;
    write_gains(&dir.join("gains.csv"), &res.controller.k_star)?;
    write_history(&dir.join("history.csv"), &res.restart_history)?;
    Ok(layout)
}

/// `optimize <config>`: writes `layout.json`, `gains.csv` and `history.csv`.
pub fn cmd_optimize(source: &str, opts: &RunOptions) -> CliResult<LayoutFile> {
    let cfg = load_config(source, opts)?;
    let problem = cfg.problem()?;
    let res = run_optimizer(&problem, &cfg)?;
    log::info!(
        "best layout {:?} deg, d_min {:.6}",
        res.best_layout.degrees(),
        res.best_score.d_min
    );
    write_optimization(&cfg.output_dir, &problem, &cfg, &res)
}

/// Parses a comma-separated list of angles in degrees.
pub fn parse_theta_list(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Config(format!("invalid angle '{s}' in --theta")))
        })
        .collect()
}

fn evaluate_degrees(problem: &Problem64, deg: &[f64], what: &str) -> CliResult<Evaluation<f64>> {
    if deg.len() != problem.n_modules {
        return Err(CliError::Config(format!(
            "{what} layout has {} angles, N = {}",
            deg.len(),
            problem.n_modules
        )));
    }
    let theta: Vec<f64> = deg.iter().map(|d| d.to_radians()).collect();
    problem
        .evaluate(&theta)
        .map_err(|e| CliError::Infeasible(format!("{what} layout {deg:?}: {e}")))
}

fn vehicle(e: &Evaluation<f64>) -> Vehicle<'_> {
    Vehicle { layout: &e.layout, controller: &e.controller, model: &e.model }
}

/// `simulate <config> [--theta <list>]...`: the first layout is simulated on
/// every scenario; a second one (from a repeated `--theta` or the config's
/// baseline) is run with matched seeds and compared.
pub fn cmd_simulate(source: &str, thetas: &[Vec<f64>], opts: &RunOptions) -> CliResult<SummaryFile> {
    let cfg = load_config(source, opts)?;
    if thetas.len() > 2 {
        return Err(CliError::Config("at most two --theta layouts (primary, baseline)".into()));
    }
    let scenarios = cfg.scenarios()?;
    if scenarios.is_empty() {
        return Err(CliError::Config("config lists no scenarios".into()));
    }
    let problem = cfg.problem()?;

    let primary = match thetas.first().or(cfg.layouts.primary.as_ref()) {
        Some(deg) => evaluate_degrees(&problem, deg, "primary")?,
        None => {
            let res = run_optimizer(&problem, &cfg)?;
            evaluate_degrees(&problem, &res.best_layout.degrees(), "optimized")?
        }
    };
    let baseline = match thetas.get(1).or(cfg.layouts.baseline.as_ref()) {
        Some(deg) => Some(evaluate_degrees(&problem, deg, "baseline")?),
        None => None,
    };

    let out = &cfg.output_dir;
    ensure_dir(out)?;
    let stride = opts.stride.unwrap_or(1).max(1);
    let summary = match &baseline {
        Some(b) => {
            let cmp = sim::compare_layouts(&vehicle(&primary), &vehicle(b), &scenarios)?;
            for (o, s) in cmp.optimal.iter().zip(&cmp.suboptimal) {
                write_sim_csv(&out.join(format!("{}_primary.csv", o.scenario)), o, stride)?;
                write_sim_csv(&out.join(format!("{}_baseline.csv", s.scenario)), s, stride)?;
            }
            SummaryFile::comparison(&primary, Some(b), &cmp.optimal, Some(&cmp.suboptimal), &cmp.rows)
        }
        None => {
            let reports: Vec<SimReport> = scenarios
                .par_iter()
                .map(|sc: &Scenario| sim::simulate(&primary.layout, &primary.controller, &primary.model, sc))
                .collect::<thrustlayout::Result<_>>()?;
            for r in &reports {
                write_sim_csv(&out.join(format!("{}_primary.csv", r.scenario)), r, stride)?;
            }
            SummaryFile::comparison(&primary, None, &reports, None, &[])
        }
    };
    write_summary(out, &summary)?;

    let diverged: Vec<String> = summary.runs.iter().filter(|r| r.diverged).map(|r| format!("{}/{}", r.scenario, r.layout)).collect();
    if !diverged.is_empty() {
        return Err(CliError::Diverged(format!("diverged: {}", diverged.join(", "))));
    }
    Ok(summary)
}

fn check_case_names(cases: &[SweepCase]) -> CliResult<()> {
    for (i, c) in cases.iter().enumerate() {
        if c.name.is_empty() || c.name.contains(['/', '\\']) || c.name == "." || c.name == ".." {
            return Err(CliError::Config(format!("sweep[{i}]: invalid case name '{}'", c.name)));
        }
        if cases[..i].iter().any(|o| o.name == c.name) {
            return Err(CliError::Config(format!("sweep: duplicate case name '{}' collides with an earlier case", c.name)));
        }
    }
    Ok(())
}

/// `sweep <config>`: optimizes every case into `<out>/<name>/` and writes `index.json`/`index.csv`.
/// Returns the index and the worst per-case exit code.
pub fn cmd_sweep(source: &str, opts: &RunOptions) -> CliResult<(Vec<IndexEntry>, i32)> {
    let cfg = load_config(source, opts)?;
    let cases = cfg.sweep.clone().unwrap_or_default();
    if cases.is_empty() {
        return Err(CliError::Config("sweep list is empty".into()));
    }
    check_case_names(&cases)?;
    let out = &cfg.output_dir;
    ensure_dir(out)?;

    // cases run one after another; restarts inside each case are parallel
    let mut index = Vec::with_capacity(cases.len());
    let mut worst = EXIT_OK;
    for case in &cases {
        let dir = out.join(&case.name);
        let result = cfg
            .case_problem(case)
            .map_err(CliError::from)
            .and_then(|p| run_optimizer(&p, &cfg).map(|r| (p, r)))
            .and_then(|(p, r)| write_optimization(&dir, &p, &cfg, &r));
        let entry = match result {
            Ok(layout) => IndexEntry {
                name: case.name.clone(),
                payload: case.payload.label(),
                n_modules: case.n_modules,
                status: "ok".into(),
                layout_file: Some(format!("{}/layout.json", case.name)),
                theta_deg: Some(layout.theta_deg.clone()),
                d_min: Some(layout.d_min),
                error: None,
            },
            Err(e) => {
                log::warn!("case {}: {e}", case.name);
                worst = worst.max(e.exit_code());
                IndexEntry {
                    name: case.name.clone(),
                    payload: case.payload.label(),
                    n_modules: case.n_modules,
                    status: "failed".into(),
                    layout_file: None,
                    theta_deg: None,
                    d_min: None,
                    error: Some(e.to_string()),
                }
            }
        };
        index.push(entry);
    }
    write_index(out, &index)?;
    Ok((index, worst))
}
