//! Scalar loss kernels.
//!
//! Three basic shapes (Gaussian, wall, polynomial) are combined into the
//! three task losses:
//!
//! * [`groove`] for tasks with a single goal value,
//! * [`swamp`] for tasks whose goal is any value in an interval,
//! * [`swamp_groove`] for an interval with a preferred value inside it.
//!
//! The interval losses work on the scaled coordinate `x' = (2x - l - u) / (u - l)`
//! which maps the interval onto `[-1, 1]`. Every function here has an analytic
//! derivative next to it; the objective itself uses finite differences, the
//! derivatives exist for plotting and for checking smoothness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of the wall height reached exactly at the interval bounds.
pub const WALL_FRACTION_AT_BOUND: f64 = 0.95;

/// Parameter set shared by the parametric losses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    /// Gaussian spread, in task units.
    pub c: f64,
    /// Wall height.
    pub a1: f64,
    /// Polynomial coefficient.
    pub a2: f64,
    /// Wall location on the scaled axis; see [`wall_offset`].
    pub b: f64,
    /// Polynomial degree (even).
    pub m: u32,
    /// Wall steepness (even).
    pub n: u32,
}

impl LossParams {
    /// Builds a parameter set with `b` derived from `n`.
    pub fn new(c: f64, a1: f64, a2: f64, m: u32, n: u32) -> Result<Self> {
        if n == 0 || n % 2 != 0 {
            return Err(Error::invalid(format!("wall steepness n must be a positive even integer, got {n}")));
        }
        let params = LossParams { c, a1, a2, b: wall_offset(n), m, n };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let even = |k: u32| k > 0 && k % 2 == 0;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("Gaussian spread c must be positive, got {}", self.c)));
        }
        if !(self.a1 >= 0.0 && self.a1.is_finite()) {
            return Err(Error::invalid(format!("wall height a1 must be non-negative, got {}", self.a1)));
        }
        if !(self.a2 >= 0.0 && self.a2.is_finite()) {
            return Err(Error::invalid(format!("polynomial coefficient a2 must be non-negative, got {}", self.a2)));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::invalid(format!("wall location b must be positive, got {}", self.b)));
        }
        if !even(self.m) {
            return Err(Error::invalid(format!("polynomial degree m must be a positive even integer, got {}", self.m)));
        }
        if !even(self.n) {
            return Err(Error::invalid(format!("wall steepness n must be a positive even integer, got {}", self.n)));
        }
        Ok(())
    }
}

/// Interval of acceptable task values with an optional preferred value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalRange {
    pub lower: f64,
    pub upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preferred: Option<f64>,
}

impl GoalRange {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        let range = GoalRange { lower, upper, preferred: None };
        range.validate()?;
        Ok(range)
    }

    pub fn with_preferred(lower: f64, upper: f64, preferred: f64) -> Result<Self> {
        let range = GoalRange { lower, upper, preferred: Some(preferred) };
        range.validate()?;
        Ok(range)
    }

    /// A degenerate interval holding a single goal.
    pub fn exact(goal: f64) -> Self {
        GoalRange { lower: goal, upper: goal, preferred: Some(goal) }
    }

    pub fn unbounded() -> Self {
        GoalRange { lower: f64::NEG_INFINITY, upper: f64::INFINITY, preferred: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_nan() || self.upper.is_nan() || !(self.lower <= self.upper) {
            return Err(Error::InvalidRange { lower: self.lower, upper: self.upper });
        }
        if let Some(g) = self.preferred {
            if !g.is_finite() || g < self.lower || g > self.upper {
                return Err(Error::invalid(format!(
                    "preferred goal {g} lies outside [{}, {}]",
                    self.lower, self.upper
                )));
            }
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower == self.upper
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower == f64::NEG_INFINITY && self.upper == f64::INFINITY
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Scaled coordinate of `x` and its derivative `dx'/dx`.
    ///
    /// With both bounds finite this is [`scale_to_unit`]. With one bound
    /// infinite, the finite bound sits at `x' = -1` (or `+1`) and the scaled
    /// coordinate saturates at 0 once `x` is `width` units inside the range,
    /// so the usual two-sided losses become one-sided barriers. Returns
    /// `None` when both bounds are infinite.
    pub fn unit_coordinate(&self, x: f64, width: f64) -> Result<Option<(f64, f64)>> {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (true, true) => {
                let s = scale_to_unit(x, self.lower, self.upper)?;
                Ok(Some((s, 2.0 / (self.upper - self.lower))))
            }
            (true, false) => {
                let s = (x - self.lower) / width - 1.0;
                Ok(Some(if s < 0.0 { (s, 1.0 / width) } else { (0.0, 0.0) }))
            }
            (false, true) => {
                let s = (x - self.upper) / width + 1.0;
                Ok(Some(if s > 0.0 { (s, 1.0 / width) } else { (0.0, 0.0) }))
            }
            (false, false) => Ok(None),
        }
    }
}

/// Which parametric loss a task uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Groove,
    Swamp,
    SwampGroove,
}

impl LossKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "groove" => Ok(LossKind::Groove),
            "swamp" => Ok(LossKind::Swamp),
            "swamp_groove" | "swamp-groove" => Ok(LossKind::SwampGroove),
            other => Err(Error::invalid(format!("unknown loss kind `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Groove => "groove",
            LossKind::Swamp => "swamp",
            LossKind::SwampGroove => "swamp_groove",
        }
    }

    /// Checks that `range` carries what this loss needs.
    pub fn check_range(self, range: &GoalRange) -> Result<()> {
        range.validate()?;
        if matches!(self, LossKind::Groove | LossKind::SwampGroove) && range.preferred.is_none() && !range.is_degenerate() {
            return Err(Error::config(format!("{} loss needs a preferred goal", self.name())));
        }
        Ok(())
    }

    /// Evaluates the loss at `x`. `width` is the one-sided range width used
    /// when exactly one bound is infinite.
    pub fn eval(self, x: f64, range: &GoalRange, params: &LossParams, width: f64) -> Result<f64> {
        self.eval_with_derivative(x, range, params, width).map(|(f, _)| f)
    }

    /// Loss value and derivative with respect to `x`.
    pub fn eval_with_derivative(
        self,
        x: f64,
        range: &GoalRange,
        params: &LossParams,
        width: f64,
    ) -> Result<(f64, f64)> {
        let goal = range.preferred.unwrap_or(range.lower);
        if self == LossKind::Groove || range.is_degenerate() {
            return Ok((groove(x, goal, params), groove_derivative(x, goal, params)));
        }
        let Some((s, ds)) = range.unit_coordinate(x, width)? else {
            return Ok(match self {
                LossKind::SwampGroove => (groove(x, goal, params), groove_derivative(x, goal, params)),
                _ => (-1.0, 0.0),
            });
        };
        Ok(match self {
            LossKind::Swamp => (swamp_scaled(s, params), swamp_scaled_derivative(s, params) * ds),
            _ => {
                let g = range.preferred.expect("checked by check_range");
                (
                    groove(x, g, params) + wall_scaled(s, params.a1, params.b, params.n),
                    groove_derivative(x, g, params) + wall_scaled_derivative(s, params.a1, params.b, params.n) * ds,
                )
            }
        })
    }
}

/// Negative Gaussian centred on `g` with spread `c`.
pub fn gaussian(x: f64, g: f64, c: f64) -> f64 {
    let d = x - g;
    -(-d * d / (2.0 * c * c)).exp()
}

pub fn gaussian_derivative(x: f64, g: f64, c: f64) -> f64 {
    let d = x - g;
    let c2 = c * c;
    (-d * d / (2.0 * c2)).exp() * d / c2
}

/// Affine map sending `l` to -1 and `u` to +1.
pub fn scale_to_unit(x: f64, l: f64, u: f64) -> Result<f64> {
    if !(l < u) || !l.is_finite() || !u.is_finite() {
        return Err(Error::InvalidRange { lower: l, upper: u });
    }
    Ok((2.0 * x - l - u) / (u - l))
}

/// Wall location `b` such that the wall reaches [`WALL_FRACTION_AT_BOUND`]
/// of its height at `x' = +-1`, i.e. the root of `1 - exp(-1/b^n) = 0.95`.
pub fn wall_offset(n: u32) -> f64 {
    let ln = -(1.0 - WALL_FRACTION_AT_BOUND).ln();
    (1.0 / ln).powf(1.0 / f64::from(n))
}

/// Relaxed barrier: near zero inside `[l, u]`, rising to `0.95 a1` at the
/// bounds and saturating at `a1` outside.
pub fn wall(x: f64, l: f64, u: f64, a1: f64, n: u32) -> Result<f64> {
    let s = scale_to_unit(x, l, u)?;
    Ok(wall_scaled(s, a1, wall_offset(n), n))
}

pub fn wall_derivative(x: f64, l: f64, u: f64, a1: f64, n: u32) -> Result<f64> {
    let s = scale_to_unit(x, l, u)?;
    Ok(wall_scaled_derivative(s, a1, wall_offset(n), n) * 2.0 / (u - l))
}

fn wall_scaled(s: f64, a1: f64, b: f64, n: u32) -> f64 {
    a1 * (1.0 - barrier_exp(s, b, n))
}

fn wall_scaled_derivative(s: f64, a1: f64, b: f64, n: u32) -> f64 {
    a1 * barrier_exp(s, b, n) * barrier_exponent_derivative(s, b, n)
}

/// `exp(-(s/b)^n)`.
fn barrier_exp(s: f64, b: f64, n: u32) -> f64 {
    (-(s / b).powi(n as i32)).exp()
}

/// Derivative of `(s/b)^n` with respect to `s`.
fn barrier_exponent_derivative(s: f64, b: f64, n: u32) -> f64 {
    f64::from(n) * (s / b).powi(n as i32 - 1) / b
}

/// `a2 (x - g)^m`.
pub fn polynomial(x: f64, g: f64, a2: f64, m: u32) -> f64 {
    a2 * (x - g).powi(m as i32)
}

pub fn polynomial_derivative(x: f64, g: f64, a2: f64, m: u32) -> f64 {
    f64::from(m) * a2 * (x - g).powi(m as i32 - 1)
}

/// Loss for a specific goal `g`: Gaussian groove plus polynomial funnel.
/// Minimum value -1 at `x = g`.
pub fn groove(x: f64, g: f64, params: &LossParams) -> f64 {
    gaussian(x, g, params.c) + polynomial(x, g, params.a2, params.m)
}

pub fn groove_derivative(x: f64, g: f64, params: &LossParams) -> f64 {
    gaussian_derivative(x, g, params.c) + polynomial_derivative(x, g, params.a2, params.m)
}

/// Loss for an interval of equally valid goals: flat at -1 inside, walls at
/// the bounds, polynomial growth outside. Both bounds must be finite.
pub fn swamp(x: f64, range: &GoalRange, params: &LossParams) -> Result<f64> {
    range.validate()?;
    let s = scale_to_unit(x, range.lower, range.upper)?;
    Ok(swamp_scaled(s, params))
}

pub fn swamp_derivative(x: f64, range: &GoalRange, params: &LossParams) -> Result<f64> {
    range.validate()?;
    let s = scale_to_unit(x, range.lower, range.upper)?;
    Ok(swamp_scaled_derivative(s, params) * 2.0 / (range.upper - range.lower))
}

fn swamp_scaled(s: f64, p: &LossParams) -> f64 {
    (p.a1 + p.a2 * s.powi(p.m as i32)) * (1.0 - barrier_exp(s, p.b, p.n)) - 1.0
}

fn swamp_scaled_derivative(s: f64, p: &LossParams) -> f64 {
    let e = barrier_exp(s, p.b, p.n);
    let poly = p.a1 + p.a2 * s.powi(p.m as i32);
    let dpoly = f64::from(p.m) * p.a2 * s.powi(p.m as i32 - 1);
    dpoly * (1.0 - e) + poly * e * barrier_exponent_derivative(s, p.b, p.n)
}

/// Loss for an interval with a preferred goal, which need not be centred.
/// Both bounds must be finite and the preferred goal must lie inside them.
pub fn swamp_groove(x: f64, range: &GoalRange, params: &LossParams) -> Result<f64> {
    let g = preferred_inside(range)?;
    let s = scale_to_unit(x, range.lower, range.upper)?;
    Ok(groove(x, g, params) + wall_scaled(s, params.a1, params.b, params.n))
}

pub fn swamp_groove_derivative(x: f64, range: &GoalRange, params: &LossParams) -> Result<f64> {
    let g = preferred_inside(range)?;
    let s = scale_to_unit(x, range.lower, range.upper)?;
    let ds = 2.0 / (range.upper - range.lower);
    Ok(groove_derivative(x, g, params) + wall_scaled_derivative(s, params.a1, params.b, params.n) * ds)
}

fn preferred_inside(range: &GoalRange) -> Result<f64> {
    range.validate()?;
    range
        .preferred
        .ok_or_else(|| Error::invalid("swamp groove needs a preferred goal"))
}
