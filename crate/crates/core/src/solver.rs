//! Box-constrained minimisation of the objective, one frame at a time.
//!
//! [`solve`] runs projected gradient descent with an Armijo backtracking line
//! search. Search directions come from a limited-memory BFGS two-loop
//! recursion on the free coordinates and fall back to steepest descent
//! whenever the quasi-Newton direction is not a descent direction. Every
//! trial point is projected onto the joint limits, so iterates are always
//! feasible.
//!
//! [`MotionGenerator`] wraps the solver for a stream of goals: each frame is
//! warm-started from the previous solution and the configuration history is
//! shifted afterwards.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{GoalUpdate, GradientScheme, Mode, Objective, SolverState, TaskConfig, TaskSpec};
use crate::robot::RobotModel;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;
/// Largest joint motion, in radians, of a steepest-descent trial step.
const FIRST_STEP_RADIANS: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Stop once the projected gradient's largest component is below this.
    pub gradient_tolerance: f64,
    /// Wall-clock budget per solve, in seconds. Infinite disables the check.
    pub max_time_budget: f64,
    pub step_initial: f64,
    /// Number of correction pairs kept by the quasi-Newton direction.
    pub memory: usize,
    /// Stop once a step changes the objective by less than this relative amount.
    pub value_tolerance: f64,
    #[serde(skip)]
    pub gradient_scheme: GradientScheme,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 100,
            gradient_tolerance: 1e-5,
            max_time_budget: 0.03,
            step_initial: 1.0,
            memory: 6,
            value_tolerance: 1e-12,
            gradient_scheme: GradientScheme::Central,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0;
        if self.max_iterations == 0
            || !positive(self.gradient_tolerance)
            || !positive(self.max_time_budget)
            || !positive(self.step_initial)
            || !(self.value_tolerance >= 0.0)
        {
            return Err(Error::config(format!("solver options must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Everything one solve needs. The seed is `state.q_prev`.
#[derive(Clone, Debug)]
pub struct SolveRequest<'a> {
    pub model: &'a RobotModel,
    pub goal: &'a GoalUpdate,
    pub state: &'a SolverState,
    pub tasks: &'a [TaskSpec],
    pub options: SolverOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub q_star: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Seconds.
    pub wall_time: f64,
}

/// Clamps every coordinate into its joint limits.
pub fn project_to_limits(q: &[f64], model: &RobotModel) -> Vec<f64> {
    q.iter().zip(model.joints()).map(|(&x, j)| x.clamp(j.lower, j.upper)).collect()
}

/// Minimises the objective from the clamped seed.
pub fn solve(request: &SolveRequest<'_>) -> Result<SolveResult> {
    Solver::default().solve(request)
}

/// Solver with reusable scratch space. One instance serves one stream.
#[derive(Clone, Debug, Default)]
pub struct Solver {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    trace: Vec<f64>,
    keep_trace: bool,
}

impl Solver {
    /// A solver that records the objective value of every accepted iterate.
    pub fn with_trace() -> Self {
        Solver { keep_trace: true, ..Solver::default() }
    }

    /// Objective values of the accepted iterates of the last solve, seed first.
    /// Empty unless built with [`Solver::with_trace`].
    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn solve(&mut self, request: &SolveRequest<'_>) -> Result<SolveResult> {
        let start = Instant::now();
        let SolveRequest { model, goal, state, tasks, options } = *request;
        options.validate()?;
        let objective = Objective::new(model, goal, state, tasks)?;
        let lower = model.lower_limits();
        let upper = model.upper_limits();

        let mut x = project_to_limits(&state.q_prev, model);
        let mut f = objective.value(&x);
        if !f.is_finite() {
            return Err(Error::NonFiniteObjective(f));
        }
        self.pairs.clear();
        self.trace.clear();
        if self.keep_trace {
            self.trace.push(f);
        }

        let n = x.len();
        let mut g = vec![0.0; n];
        objective.gradient_into(&x, options.gradient_scheme, Some(f), &mut g);
        let mut d = vec![0.0; n];
        let mut x_new = vec![0.0; n];
        let mut g_new = vec![0.0; n];
        let mut free = vec![true; n];

        let mut iterations = 0;
        let mut converged = false;
        while iterations < options.max_iterations {
            if start.elapsed().as_secs_f64() > options.max_time_budget {
                break;
            }
            // Coordinates pinned at a bound with the gradient pushing outwards.
            let mut pg_max = 0.0f64;
            for i in 0..n {
                free[i] = !((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0));
                if free[i] {
                    pg_max = pg_max.max(g[i].abs());
                }
            }
            if pg_max <= options.gradient_tolerance {
                converged = true;
                break;
            }

            self.direction(&g, &free, &mut d);
            let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
            let mut t = options.step_initial;
            if self.pairs.is_empty() || !(slope < 0.0) {
                self.pairs.clear();
                for i in 0..n {
                    d[i] = if free[i] { -g[i] } else { 0.0 };
                }
                slope = -d.iter().map(|v| v * v).sum::<f64>();
                t = t.min(FIRST_STEP_RADIANS / pg_max);
            }

            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                let mut decrease = 0.0;
                for i in 0..n {
                    x_new[i] = (x[i] + t * d[i]).clamp(lower[i], upper[i]);
                    decrease += g[i] * (x_new[i] - x[i]);
                }
                // Projection can only shorten the step; fall back on the
                // unprojected slope when the projected one vanishes.
                let expected = if decrease < 0.0 { decrease } else { t * slope };
                let f_new = objective.value(&x_new);
                if f_new <= f + ARMIJO * expected {
                    accepted = Some(f_new);
                    break;
                }
                t *= 0.5;
            }
            iterations += 1;
            let Some(f_new) = accepted else {
                // No decrease at any step length: the iterate is stationary to
                // within the resolution of the finite-difference gradient.
                converged = true;
                break;
            };

            objective.gradient_into(&x_new, options.gradient_scheme, Some(f_new), &mut g_new);
            let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            if sy > 1e-12 * s.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE) {
                if self.pairs.len() == options.memory.max(1) {
                    self.pairs.pop_front();
                }
                self.pairs.push_back((s, y, 1.0 / sy));
            } else {
                self.pairs.clear();
            }

            let change = f - f_new;
            std::mem::swap(&mut x, &mut x_new);
            std::mem::swap(&mut g, &mut g_new);
            f = f_new;
            if self.keep_trace {
                self.trace.push(f);
            }
            if change <= options.value_tolerance * (1.0 + f.abs()) {
                converged = true;
                break;
            }
        }

        Ok(SolveResult {
            q_star: x,
            objective_value: f,
            iterations,
            converged,
            wall_time: start.elapsed().as_secs_f64(),
        })
    }

    /// Two-loop recursion restricted to the free coordinates.
    fn direction(&self, g: &[f64], free: &[bool], d: &mut [f64]) {
        let n = g.len();
        for i in 0..n {
            d[i] = if free[i] { g[i] } else { 0.0 };
        }
        if self.pairs.is_empty() {
            return;
        }
        let dot = |a: &[f64], b: &[f64]| -> f64 { (0..n).filter(|&i| free[i]).map(|i| a[i] * b[i]).sum() };
        let mut alpha = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, d);
            for i in 0..n {
                if free[i] {
                    d[i] -= a * y[i];
                }
            }
            alpha.push(a);
        }
        let (s, y, _) = self.pairs.back().expect("non-empty");
        let yy = dot(y, y);
        let gamma = if yy > 0.0 { dot(s, y) / yy } else { 1.0 };
        for v in d.iter_mut() {
            *v *= gamma;
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alpha.iter().rev()) {
            let b = rho * dot(y, d);
            for i in 0..n {
                if free[i] {
                    d[i] += (a - b) * s[i];
                }
            }
        }
        for v in d.iter_mut() {
            *v = -*v;
        }
    }
}

/// Warm-started solver for a stream of goals.
#[derive(Debug)]
pub struct MotionGenerator<'a> {
    model: &'a RobotModel,
    config: &'a TaskConfig,
    mode: Mode,
    options: SolverOptions,
    state: SolverState,
    solver: Solver,
    tasks: Vec<TaskSpec>,
    tasks_for: Option<[crate::loss::GoalRange; 6]>,
    frame: usize,
}

impl<'a> MotionGenerator<'a> {
    /// Starts at rest at `initial_q` (clamped into the joint limits).
    pub fn new(
        model: &'a RobotModel,
        config: &'a TaskConfig,
        mode: Mode,
        initial_q: &[f64],
        dt: f64,
        options: SolverOptions,
    ) -> Result<Self> {
        model.check_dof(initial_q)?;
        options.validate()?;
        let state = SolverState::at_rest(&project_to_limits(initial_q, model), dt);
        state.validate(model.dof())?;
        Ok(MotionGenerator {
            model,
            config,
            mode,
            options,
            state,
            solver: Solver::default(),
            tasks: Vec::new(),
            tasks_for: None,
            frame: 0,
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    /// Solves one frame and pushes the solution into the history.
    pub fn step(&mut self, goal: &GoalUpdate) -> Result<SolveResult> {
        let frame = self.frame;
        let result = self.step_inner(goal).map_err(|e| e.at_frame(frame))?;
        self.frame += 1;
        Ok(result)
    }

    fn step_inner(&mut self, goal: &GoalUpdate) -> Result<SolveResult> {
        if self.tasks_for.as_ref() != Some(&goal.tolerances) {
            self.tasks = self.config.assemble(self.model, goal, self.mode)?;
            self.tasks_for = Some(goal.tolerances);
        }
        let request = SolveRequest {
            model: self.model,
            goal,
            state: &self.state,
            tasks: &self.tasks,
            options: self.options,
        };
        let result = self.solver.solve(&request)?;
        self.state.advance(&result.q_star);
        Ok(result)
    }
}

/// Solves every goal in order, warm-starting each frame from the last.
pub fn stream_solve(
    model: &RobotModel,
    config: &TaskConfig,
    mode: Mode,
    goals: &[GoalUpdate],
    initial_q: &[f64],
    dt: f64,
    options: SolverOptions,
) -> Result<Vec<SolveResult>> {
    if goals.is_empty() {
        return Err(Error::invalid("the goal stream is empty"));
    }
    let mut generator = MotionGenerator::new(model, config, mode, initial_q, dt, options)?;
    goals.iter().map(|g| generator.step(g)).collect()
}
