//! `motiongen` command-line front end.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (`solve`: converged with the pose inside its tolerances) |
//! | 1 | configuration or usage error |
//! | 2 | `solve` did not converge or missed the goal; the best iterate is still printed |
//! | 3 | `bench` finished but at least one run failed |

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use motiongen::bench::{self, BenchManifest, Summary};
use motiongen::loss::{self, GoalRange, LossKind, LossParams};
use motiongen::objective::{GoalUpdate, Mode, TaskConfig};
use motiongen::solver::{MotionGenerator, SolverOptions};
use motiongen::{Pose, RobotModel};

const EXIT_CONFIG: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_RUN_FAILED: u8 = 3;
/// Allowed overshoot of a goal tolerance when judging `solve` success, in metres and radians.
const POSITION_SLACK: f64 = 1e-3;
const ROTATION_SLACK: f64 = 1e-2;
/// Largest per-joint step, in radians, at which a held goal counts as settled.
const SETTLED_MOVEMENT: f64 = 1e-5;

#[derive(Parser, Debug)]
#[command(name = "motiongen", version, about = "Inverse kinematics with ranged-goal tasks")]
struct Cli {
    /// Print progress to standard error.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hold one goal pose until the motion settles and print the result as a JSON line.
    Solve(SolveArgs),
    /// Run a benchmark manifest and write runs.csv and summary.json.
    Bench(BenchArgs),
    /// Sample a loss function and print `x,f,df` as CSV.
    DumpLoss(DumpLossArgs),
}

/// Settings shared by `solve` runs, loadable from a TOML file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunManifest {
    robot: Option<String>,
    tasks: Option<PathBuf>,
    mode: Option<Mode>,
    #[serde(default)]
    solver: SolverOptions,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Run manifest with `robot`, `tasks`, `mode` and a `[solver]` table.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Bundled robot name (ur5, sawyer, planar_2r) or a description file.
    #[arg(long)]
    robot: Option<String>,
    /// Task configuration file.
    #[arg(long)]
    tasks: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Goal position in metres.
    #[arg(long, num_args = 3, allow_negative_numbers = true, value_names = ["X", "Y", "Z"])]
    position: Vec<f64>,
    /// Goal orientation as a scaled axis in radians.
    #[arg(long, num_args = 3, allow_negative_numbers = true, value_names = ["RX", "RY", "RZ"])]
    rotation: Option<Vec<f64>>,
    /// Symmetric tolerances `x y z rx ry rz`; `inf` leaves a DoF free.
    #[arg(long, num_args = 6, value_names = ["X", "Y", "Z", "RX", "RY", "RZ"])]
    tolerance: Option<Vec<f64>>,
    /// Seed configuration; defaults to the robot's home.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    start: Option<Vec<f64>>,
    /// Frames to hold the goal while the motion settles; 1 gives a single solve.
    #[arg(long, default_value_t = 100)]
    frames: usize,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Time budget in seconds.
    #[arg(long)]
    time_budget: Option<f64>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    /// Replace the manifest's robots.
    #[arg(long)]
    robot: Option<String>,
    /// Task configuration file, replacing the manifest's.
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// Run only this mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Run only this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct DumpLossArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Preferred or specific goal.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    goal: f64,
    /// Interval bounds for swamp, swamp_groove and wall.
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    lower: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    upper: f64,
    /// Sampled span.
    #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
    from: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    to: f64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0.2)]
    c: f64,
    #[arg(long, default_value_t = 10.0)]
    a1: f64,
    #[arg(long, default_value_t = 1.0)]
    a2: f64,
    #[arg(long, default_value_t = 2)]
    m: u32,
    #[arg(long, default_value_t = 4)]
    n: u32,
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Ranged,
    Relaxed,
    Trac,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Ranged => Mode::Ranged,
            ModeArg::Relaxed => Mode::Relaxed,
            ModeArg::Trac => Mode::Trac,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum KindArg {
    Gaussian,
    Wall,
    Polynomial,
    Groove,
    Swamp,
    SwampGroove,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args, cli.verbose),
        Command::Bench(args) => cmd_bench(args, cli.verbose),
        Command::DumpLoss(args) => cmd_dump_loss(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn load_robot(spec: &str) -> motiongen::Result<RobotModel> {
    bench::resolve_robot(spec, Path::new("."))
}

fn cmd_solve(args: SolveArgs, verbose: u8) -> motiongen::Result<u8> {
    let manifest = match &args.manifest {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| motiongen::Error::Load { path: path.clone(), message: e.to_string() })?;
            toml::from_str::<RunManifest>(&text)
                .map_err(|e| motiongen::Error::Load { path: path.clone(), message: e.to_string() })?
        }
        None => RunManifest::default(),
    };
    let base = args.manifest.as_deref().and_then(Path::parent).unwrap_or(Path::new("."));
    let robot = args.robot.clone().or(manifest.robot.clone()).unwrap_or_else(|| "ur5".into());
    let model = if args.robot.is_some() { load_robot(&robot)? } else { bench::resolve_robot(&robot, base)? };
    let tasks = match (&args.tasks, &manifest.tasks) {
        (Some(p), _) => TaskConfig::load(p)?,
        (None, Some(p)) => TaskConfig::load(base.join(p))?,
        (None, None) => TaskConfig::default(),
    };
    let mode = args.mode.map(Mode::from).or(manifest.mode).unwrap_or(Mode::Ranged);
    let mut options = manifest.solver;
    if let Some(k) = args.max_iterations {
        options.max_iterations = k;
    }
    if let Some(t) = args.time_budget {
        options.max_time_budget = t;
    }

    if args.position.len() != 3 {
        return Err(motiongen::Error::Config("--position needs three values".into()));
    }
    let rotation = args.rotation.as_deref().unwrap_or(&[0.0, 0.0, 0.0]);
    let target = Pose::new(
        Vector3::new(args.position[0], args.position[1], args.position[2]),
        Rotation3::new(Vector3::new(rotation[0], rotation[1], rotation[2])),
    );
    let mut goal = GoalUpdate::exact(0.0, target);
    if let Some(tol) = &args.tolerance {
        for (slot, &t) in goal.tolerances.iter_mut().zip(tol) {
            let t = t.abs();
            *slot = if t == 0.0 { GoalRange::exact(0.0) } else { GoalRange::new(-t, t)? };
        }
    }
    let start = args.start.clone().unwrap_or_else(|| model.home().to_vec());
    model.check_dof(&start)?;
    let task_list = tasks.assemble(&model, &goal, mode)?;
    if verbose > 0 {
        eprintln!("solving for {} with {} tasks in {mode} mode", model.name, task_list.len());
    }
    if args.frames == 0 {
        return Err(motiongen::Error::Config("--frames must be at least 1".into()));
    }
    let mut generator = MotionGenerator::new(&model, &tasks, mode, &start, 1.0 / bench::DEFAULT_RATE, options)?;
    let mut previous = generator.state().q_prev.clone();
    let (mut frames, mut iterations, mut wall_time) = (0, 0, 0.0);
    let result = loop {
        let result = generator.step(&goal)?;
        frames += 1;
        iterations += result.iterations;
        wall_time += result.wall_time;
        let movement = result.q_star.iter().zip(&previous).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if movement <= SETTLED_MOVEMENT || frames == args.frames {
            break result;
        }
        previous = result.q_star.clone();
    };
    let errors = bench::pose_errors(&model, &result.q_star, &goal)?;
    let reached = errors.iter().zip(&goal.tolerances).enumerate().all(|(k, (e, t))| {
        let slack = if k < 3 { POSITION_SLACK } else { ROTATION_SLACK };
        t.lower - slack <= *e && *e <= t.upper + slack
    });
    let converged = result.converged && reached;
    let line = serde_json::json!({
        "robot": model.name,
        "mode": mode,
        "q_star": result.q_star,
        "objective_value": result.objective_value,
        "frames": frames,
        "iterations": iterations,
        "converged": converged,
        "solver_converged": result.converged,
        "reached": reached,
        "wall_time": wall_time,
        "pose_error": errors,
    });
    println!("{line}");
    Ok(if converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn cmd_bench(args: BenchArgs, verbose: u8) -> motiongen::Result<u8> {
    let mut manifest = BenchManifest::load(&args.manifest)?;
    let base = args.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    if let Some(r) = &args.robot {
        let resolved = match motiongen::bundled::by_name(r) {
            Some(_) => r.clone(),
            None => std::path::absolute(r)?.display().to_string(),
        };
        manifest.robots = vec![resolved];
    }
    if let Some(m) = args.mode {
        manifest.modes = vec![m.into()];
    }
    if let Some(s) = args.seed {
        manifest.seeds = vec![s];
    }
    if let Some(t) = &args.tasks {
        manifest.tasks = Some(std::path::absolute(t)?);
    }
    if verbose > 0 {
        eprintln!("running {} benchmark runs on {} thread(s)", manifest.runs().len(), args.jobs.max(1));
    }
    let records = bench::run_suite(&manifest, &base, args.jobs)?;
    let (csv, json) = bench::write_reports(&records, &args.out)?;
    let summary = Summary::new(&records);
    if verbose > 0 {
        for g in &summary.by_robot_mode {
            let m = &g.report.mean;
            eprintln!(
                "{:>8} {:>8}  jerk {:>10.4}  movement {:>8.3}  manipulability {:.4}  exceed {}  mean solve {:.2} ms",
                g.robot,
                g.mode,
                m.mean_joint_jerk,
                m.mean_joint_movement,
                m.mean_manipulability,
                m.exceed_tolerance_count,
                1e3 * g.mean_solve_time
            );
        }
        for r in records.iter().filter(|r| r.failed()) {
            eprintln!("failed: {} {} {} seed {}: {}", r.robot, r.application, r.mode, r.seed, r.error.as_deref().unwrap_or(""));
        }
    }
    let line = serde_json::json!({
        "runs": summary.runs,
        "failed_runs": summary.failed_runs,
        "csv": csv,
        "summary": json,
    });
    println!("{line}");
    Ok(if summary.failed_runs > 0 { EXIT_RUN_FAILED } else { 0 })
}

fn cmd_dump_loss(args: DumpLossArgs) -> motiongen::Result<u8> {
    if args.samples < 2 || !(args.from < args.to) {
        return Err(motiongen::Error::Config("need at least 2 samples over a non-empty span".into()));
    }
    let params = LossParams::new(args.c, args.a1, args.a2, args.m, args.n)?;
    let range = GoalRange { lower: args.lower, upper: args.upper, preferred: Some(args.goal) };
    let eval = |x: f64| -> motiongen::Result<(f64, f64)> {
        Ok(match args.kind {
            KindArg::Gaussian => (loss::gaussian(x, args.goal, args.c), loss::gaussian_derivative(x, args.goal, args.c)),
            KindArg::Polynomial => (
                loss::polynomial(x, args.goal, args.a2, args.m),
                loss::polynomial_derivative(x, args.goal, args.a2, args.m),
            ),
            KindArg::Wall => (
                loss::wall(x, args.lower, args.upper, args.a1, args.n)?,
                loss::wall_derivative(x, args.lower, args.upper, args.a1, args.n)?,
            ),
            KindArg::Groove => LossKind::Groove.eval_with_derivative(x, &GoalRange::exact(args.goal), &params, 1.0)?,
            KindArg::Swamp => {
                let r = GoalRange::new(args.lower, args.upper)?;
                (loss::swamp(x, &r, &params)?, loss::swamp_derivative(x, &r, &params)?)
            }
            KindArg::SwampGroove => {
                (loss::swamp_groove(x, &range, &params)?, loss::swamp_groove_derivative(x, &range, &params)?)
            }
        })
    };

    let mut out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(out, "x,f,df")?;
    let step = (args.to - args.from) / (args.samples - 1) as f64;
    for k in 0..args.samples {
        let x = if k + 1 == args.samples { args.to } else { args.from + step * k as f64 };
        let (f, df) = eval(x)?;
        writeln!(out, "{x},{f},{df}")?;
    }
    out.flush()?;
    Ok(0)
}
