//! The recurrence `x_{n+1} = x_n (1 - hat_h_n x_n^2) + u_{n+1}`, its
//! freezing rules and limit classification.

mod engine;
mod sign_split;

pub use engine::{
    simulate, simulate_observed, simulate_summary, simulate_with, SeedInfo, Simulation, Step, Stepper,
    Summary, Trajectory,
};
pub use sign_split::{cubic_extremum, sign_split_setup, SplitCase, SplitSetup};

/// States with magnitude above this count as diverged; their square is still finite.
pub const OVERFLOW_GUARD: f64 = 1e154;

/// Signature of the one-step map, replaceable for fault-injection tests.
pub type StepFn = fn(f64, f64, f64) -> f64;

/// `x (1 - h x^2) + u`, evaluated in exactly this order.
#[inline]
pub fn step_map(x: f64, h: f64, u: f64) -> f64 {
    x * (1.0 - h * (x * x)) + u
}

/// The `N_4` trigger `x^2 h < 1`.
#[inline]
pub fn find_n4(x: f64, h: f64) -> bool {
    h * (x * x) < 1.0
}

/// How `hat_h_n` is chosen from the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum StoppingRule {
    /// `hat_h_n = h_n` throughout.
    #[default]
    None,
    /// Freeze at `h_{N_3}` once `|x_{N_3}| <= 1`.
    FreezeWhenSmall,
    /// Freeze at `h_{N_4}` once `x_{N_4}^2 h_{N_4} < 1`.
    FreezeAtN4Keep,
    /// Freeze at `1 / x_{N_4}^2` once `x_{N_4}^2 h_{N_4} < 1`, or at
    /// `h_{N_4}` when `x_{N_4} = 0`.
    FreezeAtN4Reciprocal,
}

impl StoppingRule {
    /// Whether the rule fires at a state `x` with schedule value `h`.
    pub fn triggers(self, x: f64, h: f64) -> bool {
        match self {
            StoppingRule::None => false,
            StoppingRule::FreezeWhenSmall => x.abs() <= 1.0,
            StoppingRule::FreezeAtN4Keep | StoppingRule::FreezeAtN4Reciprocal => find_n4(x, h),
        }
    }
}

/// Frozen step for a rule that has just fired at `(x, h)`.
///
/// The result is at least `f64::MIN_POSITIVE`, so a schedule value that has
/// underflowed still freezes to a positive step.
pub fn apply_freeze(rule: StoppingRule, x: f64, h: f64) -> f64 {
    let value = match rule {
        StoppingRule::FreezeAtN4Reciprocal => {
            let r = 1.0 / (x * x);
            if x != 0.0 && r.is_finite() {
                r
            } else {
                h
            }
        }
        _ => h,
    };
    value.max(f64::MIN_POSITIVE)
}

/// Finite-horizon tolerances for [`detect_limit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitCriteria {
    pub window: usize,
    pub rel_tol: f64,
    pub zero_threshold: f64,
}

impl Default for LimitCriteria {
    fn default() -> Self {
        Self { window: 50, rel_tol: 1e-12, zero_threshold: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitClass {
    ConvergedZero,
    ConvergedNonzero(f64),
    Oscillating,
    Diverged,
    Undetermined,
}

impl LimitClass {
    pub fn label(&self) -> &'static str {
        match self {
            LimitClass::ConvergedZero => "converged_zero",
            LimitClass::ConvergedNonzero(_) => "converged_nonzero",
            LimitClass::Oscillating => "oscillating",
            LimitClass::Diverged => "diverged",
            LimitClass::Undetermined => "undetermined",
        }
    }
}

/// Largest `|x_{i+1} - x_i|` over a slice.
pub fn max_increment(xs: &[f64]) -> f64 {
    xs.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
}

/// Classifies the last `window + 1` states of a run.
///
/// A run whose increments stay within `rel_tol (1 + |x_N|)` is converged,
/// to zero when `|x_N| <= zero_threshold`. A run that alternates in sign
/// with stable magnitude is oscillating.
pub fn classify_tail(tail: &[f64], criteria: &LimitCriteria) -> LimitClass {
    if criteria.window == 0 || tail.len() < criteria.window + 1 {
        return LimitClass::Undetermined;
    }
    let tail = &tail[tail.len() - criteria.window - 1..];
    let last = *tail.last().unwrap();
    let tol = criteria.rel_tol * (1.0 + last.abs());
    if max_increment(tail) <= tol {
        return if last.abs() <= criteria.zero_threshold {
            LimitClass::ConvergedZero
        } else {
            LimitClass::ConvergedNonzero(last)
        };
    }
    let alternating = tail.windows(2).all(|w| w[0] * w[1] < 0.0);
    let stable = tail.windows(2).all(|w| (w[1].abs() - w[0].abs()).abs() <= tol);
    if alternating && stable {
        LimitClass::Oscillating
    } else {
        LimitClass::Undetermined
    }
}

/// [`classify_tail`] for a completed trajectory; `Diverged` when it blew up.
pub fn detect_limit(traj: &Trajectory, criteria: &LimitCriteria) -> LimitClass {
    if traj.diverged_at.is_some() {
        LimitClass::Diverged
    } else {
        classify_tail(&traj.x, criteria)
    }
}
