//! Benchmark manifests, suite execution and report files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{prepare, run_prepared, Application, BenchContext, BenchmarkConfig, Metrics, MetricsReport, Scene};
use crate::bundled;
use crate::error::{Error, Result};
use crate::objective::{Mode, TaskConfig};
use crate::robot::RobotModel;
use crate::solver::SolverOptions;

/// A grid of benchmark runs.
///
/// ```toml
/// robots = ["ur5", "sawyer"]        # bundled names or description files
/// applications = ["writing", "spraying", "wiping", "filling"]
/// modes = ["ranged", "relaxed", "trac"]
/// seeds = [0, 1, 2]
/// frames = 2000
/// rate = 30.0
/// tasks = "my_tasks.toml"           # optional
///
/// [scene]
/// board_distance = 0.5
///
/// [solver]
/// max_iterations = 100
/// ```
///
/// Relative paths are resolved against the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchManifest {
    pub robots: Vec<String>,
    #[serde(default = "all_applications")]
    pub applications: Vec<Application>,
    #[serde(default = "all_modes")]
    pub modes: Vec<Mode>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "super::default_frames")]
    pub frames: usize,
    #[serde(default = "super::default_rate")]
    pub rate: f64,
    #[serde(default)]
    pub tasks: Option<PathBuf>,
    #[serde(default)]
    pub scene: Scene,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn all_applications() -> Vec<Application> {
    Application::ALL.to_vec()
}

fn all_modes() -> Vec<Mode> {
    Mode::ALL.to_vec()
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

impl BenchManifest {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let manifest: BenchManifest =
            toml::from_str(text).map_err(|e| Error::config(format!("benchmark manifest: {e}")))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let load_error = |message: String| Error::Load { path: path.to_path_buf(), message };
        let text = std::fs::read_to_string(path).map_err(|e| load_error(e.to_string()))?;
        Self::from_toml_str(&text).map_err(|e| load_error(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.robots.is_empty() || self.applications.is_empty() || self.modes.is_empty() || self.seeds.is_empty() {
            return Err(Error::config("robots, applications, modes and seeds must be non-empty"));
        }
        self.scene.validate()?;
        self.solver.validate()?;
        BenchmarkConfig { application: Application::Writing, robot: String::new(), mode: Mode::Ranged, seed: 0, frames: self.frames, rate: self.rate }
            .validate()
    }

    /// Every run, robots outermost and seeds innermost.
    pub fn runs(&self) -> Vec<BenchmarkConfig> {
        let mut out = Vec::new();
        for robot in &self.robots {
            for &application in &self.applications {
                for &mode in &self.modes {
                    for &seed in &self.seeds {
                        out.push(BenchmarkConfig {
                            application,
                            robot: robot.clone(),
                            mode,
                            seed,
                            frames: self.frames,
                            rate: self.rate,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Bundled robot by name, or a description file relative to `base`.
pub fn resolve_robot(spec: &str, base: &Path) -> Result<RobotModel> {
    match bundled::by_name(spec) {
        Some(model) => Ok(model),
        None => RobotModel::load(base.join(spec)),
    }
}

/// Outcome of one run of a suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub robot: String,
    pub application: Application,
    pub mode: Mode,
    pub seed: u64,
    pub frames: usize,
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
    pub converged_fraction: f64,
    pub mean_solve_time: f64,
    pub p95_solve_time: f64,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Runs every entry of `manifest` on `jobs` threads. Configuration problems
/// (unknown robot, bad task file) fail the whole suite; a failing run is
/// recorded and the rest continue. Records come back in [`BenchManifest::runs`]
/// order regardless of `jobs`.
pub fn run_suite(manifest: &BenchManifest, base: &Path, jobs: usize) -> Result<Vec<RunRecord>> {
    manifest.validate()?;
    let tasks = match &manifest.tasks {
        Some(p) => TaskConfig::load(base.join(p))?,
        None => TaskConfig::default(),
    };
    let mut robots = BTreeMap::new();
    for name in &manifest.robots {
        robots.insert(name.clone(), resolve_robot(name, base)?);
    }
    let ctx = BenchContext { tasks, scene: manifest.scene, solver: manifest.solver };
    let runs = manifest.runs();

    let mut keys: Vec<(&str, Application, u64)> =
        runs.iter().map(|c| (c.robot.as_str(), c.application, c.seed)).collect();
    keys.sort();
    keys.dedup();
    let prepared = parallel_map(&keys, jobs, |&(robot, application, seed)| {
        let config = runs
            .iter()
            .find(|c| c.robot == robot && c.application == application && c.seed == seed)
            .expect("key taken from the runs");
        prepare(&robots[robot], &ctx, config).map_err(|e| e.to_string())
    });
    let prepared: BTreeMap<_, _> = keys.into_iter().zip(prepared).collect();

    Ok(parallel_map(&runs, jobs, |config| {
        let mut record = RunRecord {
            robot: config.robot.clone(),
            application: config.application,
            mode: config.mode,
            seed: config.seed,
            frames: config.frames,
            metrics: None,
            error: None,
            converged_fraction: 0.0,
            mean_solve_time: 0.0,
            p95_solve_time: 0.0,
        };
        let outcome = match &prepared[&(config.robot.as_str(), config.application, config.seed)] {
            Ok(p) => run_prepared(&robots[&config.robot], &ctx, config, p).map_err(|e| e.to_string()),
            Err(e) => Err(e.clone()),
        };
        match outcome {
            Ok(out) => {
                record.metrics = Some(out.metrics);
                record.converged_fraction = out.converged_fraction;
                record.mean_solve_time = out.mean_solve_time;
                record.p95_solve_time = out.p95_solve_time;
            }
            Err(e) => record.error = Some(e),
        }
        record
    }))
}

/// `f` over `items` on `jobs` threads, results in input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(item) = items.get(i) else { break };
        let r = f(item);
        *slots[i].lock().expect("no panics while holding the lock") = Some(r);
    };
    std::thread::scope(|s| {
        for _ in 1..jobs.max(1) {
            s.spawn(worker);
        }
        worker();
    });
    slots.into_iter().map(|s| s.into_inner().expect("lock").expect("every item processed")).collect()
}

/// Columns after the metrics that depend on wall-clock time.
pub const TIMING_COLUMNS: [&str; 2] = ["mean_solve_time", "p95_solve_time"];

/// One CSV row per run; the timing columns sit just before the error message.
pub fn write_csv(records: &[RunRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["robot", "application", "mode", "seed", "frames", "status"];
    header.extend(Metrics::FIELDS);
    header.push("converged_fraction");
    header.extend(TIMING_COLUMNS);
    header.push("error");
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.robot.clone(),
            r.application.to_string(),
            r.mode.to_string(),
            r.seed.to_string(),
            r.frames.to_string(),
            if r.failed() { "failed" } else { "ok" }.to_string(),
        ];
        match &r.metrics {
            Some(m) => row.extend(m.values().iter().map(|v| v.to_string())),
            None => row.extend(Metrics::FIELDS.iter().map(|_| String::new())),
        }
        row.push(r.converged_fraction.to_string());
        row.push(r.mean_solve_time.to_string());
        row.push(r.p95_solve_time.to_string());
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregate of the successful runs sharing a key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub robot: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub application: Option<Application>,
    pub mode: Mode,
    pub failed_runs: usize,
    pub report: MetricsReport,
    pub mean_solve_time: f64,
    /// Largest per-run 95th percentile in the group.
    pub worst_p95_solve_time: f64,
}

/// Results grouped per (robot, mode) over all applications and seeds, and
/// per (robot, application, mode).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub failed_runs: usize,
    pub by_robot_mode: Vec<GroupSummary>,
    pub by_application: Vec<GroupSummary>,
}

impl Summary {
    pub fn new(records: &[RunRecord]) -> Self {
        let group = |with_app: bool| {
            let mut groups: BTreeMap<(String, Option<Application>, Mode), Vec<&RunRecord>> = BTreeMap::new();
            for r in records {
                let app = with_app.then_some(r.application);
                groups.entry((r.robot.clone(), app, r.mode)).or_default().push(r);
            }
            groups
                .into_iter()
                .map(|((robot, application, mode), rs)| {
                    let ok: Vec<&RunRecord> = rs.iter().copied().filter(|r| !r.failed()).collect();
                    let metrics: Vec<Metrics> = ok.iter().filter_map(|r| r.metrics).collect();
                    let n = ok.len().max(1) as f64;
                    GroupSummary {
                        robot,
                        application,
                        mode,
                        failed_runs: rs.len() - ok.len(),
                        report: MetricsReport::aggregate(&metrics),
                        mean_solve_time: ok.iter().map(|r| r.mean_solve_time).sum::<f64>() / n,
                        worst_p95_solve_time: ok.iter().map(|r| r.p95_solve_time).fold(0.0, f64::max),
                    }
                })
                .collect()
        };
        Summary {
            runs: records.len(),
            failed_runs: records.iter().filter(|r| r.failed()).count(),
            by_robot_mode: group(false),
            by_application: group(true),
        }
    }

    pub fn find(&self, robot: &str, mode: Mode) -> Option<&GroupSummary> {
        self.by_robot_mode.iter().find(|g| g.robot == robot && g.mode == mode)
    }
}

/// Writes `runs.csv` and `summary.json` into `dir`, creating it if needed.
pub fn write_reports(records: &[RunRecord], dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("runs.csv");
    write_csv(records, std::fs::File::create(&csv_path)?)?;
    let json_path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&Summary::new(records))?;
    std::fs::write(&json_path, text + "\n")?;
    Ok((csv_path, json_path))
}
