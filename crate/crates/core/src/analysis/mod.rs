//! A-priori bounds on `|x_n|`, step-regime classification and checks of
//! simulated trajectories against those bounds.

mod logmag;

pub use logmag::LogMag;

use crate::dynamics::Trajectory;
use crate::error::{domain, Result};
use crate::seqcore::Schedule;

/// Relative slack, in the log domain, for bound comparisons.
pub const BOUND_SLACK: f64 = 1e-12;

/// Position of `h x^2` relative to the thresholds 1 and 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `h x^2 < 1`: the next state has the same sign.
    SignPreserving,
    /// `h x^2 = 1`: the next unperturbed state is zero.
    ZeroNext,
    /// `1 < h x^2 < 2`: the magnitude shrinks and the sign flips.
    Contracting,
    /// `h x^2 = 2`: the next unperturbed state is `-x`.
    Flip,
    /// `h x^2 > 2`: the magnitude grows.
    Outside,
}

/// Classifies by the computed product `h * (x * x)`; the equality cases are
/// exact comparisons and only occur for specially constructed inputs.
pub fn regime_classify(x: f64, h: f64) -> Regime {
    let p = h * (x * x);
    if p < 1.0 {
        Regime::SignPreserving
    } else if p == 1.0 {
        Regime::ZeroNext
    } else if p < 2.0 {
        Regime::Contracting
    } else if p == 2.0 {
        Regime::Flip
    } else {
        Regime::Outside
    }
}

fn pow3(e: u64) -> f64 {
    if e > 700 {
        f64::INFINITY
    } else {
        3f64.powi(e as i32)
    }
}

/// `|x0|^(3^n) prod_{i=0}^{n-1} h_{n-1-i}^(3^i)` in the log domain, with
/// indices counted from the schedule origin.
///
/// This bounds `|x_n|` as long as `h_m x_m^2 > 1` for every `m < n`.
pub fn bound_unperturbed(x0: f64, schedule: &Schedule, n: u64) -> Result<LogMag> {
    if n < 1 {
        return domain("bound_unperturbed needs n >= 1");
    }
    if x0 == 0.0 {
        return Ok(LogMag::ZERO);
    }
    let o = schedule.origin();
    let log = (0..n).fold(x0.abs().ln(), |b, m| schedule.log_step_at(o + m) + 3.0 * b);
    Ok(LogMag::from_log(1, log))
}

/// `Y_n`, a bound on `|x_{n+1}|^(1/3^(n+1))`, from
/// `Y_{-1} = |x0|` and `Y_m = h_m^(1/3^(m+1)) Y_{m-1} + |u_{m+1}|^(1/3^(m+1))`.
///
/// `u[i]` is the perturbation that produces `x_i` (indices from the schedule
/// origin), so `u` needs at least `n + 2` entries.
pub fn bound_perturbed(x0: f64, schedule: &Schedule, u: &[f64], n: u64) -> Result<f64> {
    if u.len() < n as usize + 2 {
        return domain(format!("bound_perturbed at n = {n} needs {} perturbation values", n + 2));
    }
    let o = schedule.origin();
    let mut y = x0.abs();
    for m in 0..=n {
        y = perturbed_step(y, -schedule.rate_at(o + m), u[m as usize + 1], m);
    }
    Ok(y)
}

/// One step of the `Y` recursion; `scaled_log_h = ln(h_m) / 3^(m+1)`.
fn perturbed_step(y: f64, scaled_log_h: f64, u: f64, m: u64) -> f64 {
    let root_u = if u == 0.0 { 0.0 } else { (u.abs().ln() / pow3(m + 1)).exp() };
    scaled_log_h.exp() * y + root_u
}

/// First index where a trajectory exceeds its a-priori bound.
///
/// The bound applies while `1 / (h_m x_m^2)` lies in `(0, 1)` at every
/// earlier step `m`; the check stops at the first step where that fails.
/// Frozen steps use the applied value `hat_h_m`, other steps the exact
/// schedule log. With all `u` zero the unperturbed bound is used, otherwise
/// the perturbed one. `u` follows the layout of [`Trajectory::u`].
pub fn verify_bound_along(traj: &Trajectory, schedule: &Schedule, u: &[f64]) -> Option<u64> {
    let o = traj.origin;
    let steps = traj.x.len() - 1;
    let log_h = |m: usize| {
        let n = o + m as u64;
        if traj.is_frozen_at(n) {
            traj.h_applied[m].ln()
        } else {
            schedule.log_step_at(n)
        }
    };
    let perturbed = u.iter().take(steps + 1).any(|&v| v != 0.0);
    let mut b = traj.x[0].abs().ln();
    let mut y = traj.x[0].abs();
    for m in 0..steps {
        let lh = log_h(m);
        let lx = traj.x[m].abs().ln();
        let c = lh + 2.0 * lx;
        if c.is_nan() || c <= 0.0 {
            return None;
        }
        let next = traj.x[m + 1].abs().ln();
        let scale = pow3(m as u64 + 1);
        let ok = if perturbed {
            let scaled =
                if traj.is_frozen_at(o + m as u64) { lh / scale } else { -schedule.rate_at(o + m as u64) };
            y = perturbed_step(y, scaled, u.get(m + 1).copied().unwrap_or(0.0), m as u64);
            let ly = y.ln();
            next / scale <= ly + BOUND_SLACK * ly.abs()
        } else {
            b = lh + 3.0 * b;
            next <= b + BOUND_SLACK * b.abs()
        };
        if !ok {
            return Some(o + m as u64 + 1);
        }
    }
    None
}

/// `x_N exp(-2 x_N^2 S)`, a same-sign lower bound on the limit when
/// `S` bounds the remaining sum `sum_{n >= N} h_n`. Requires `h_N x_N^2 < 1/2`.
pub fn limit_lower_bound(x_n: f64, h_n: f64, s: f64) -> Result<f64> {
    let p = h_n * x_n * x_n;
    if p.is_nan() || p >= 0.5 {
        return domain(format!("h x^2 = {p} is not below 1/2"));
    }
    if s.is_nan() || s < 0.0 {
        return domain(format!("remaining sum {s} must be non-negative"));
    }
    Ok(x_n * (-2.0 * x_n * x_n * s).exp())
}

/// A lower bound on the limit certified along an unfrozen trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitCertificate {
    /// First index with `h_N x_N^2 < 1/2`.
    pub index: u64,
    /// Upper bound on `sum_{n >= N} h_n`.
    pub remaining_sum: f64,
    pub bound: f64,
}

/// Applies [`limit_lower_bound`] at the first index where `h_N x_N^2 < 1/2`.
/// `None` when the schedule is not summable or the regime is never reached.
pub fn certify_limit(traj: &Trajectory, schedule: &Schedule) -> Option<LimitCertificate> {
    if !schedule.is_summable() {
        return None;
    }
    let o = traj.origin;
    let last = traj.last_index();
    let (i, &x) = traj.x.iter().enumerate().find(|&(i, x)| schedule.step_at(o + i as u64) * x * x < 0.5)?;
    let index = o + i as u64;
    let partial: f64 = (index..=last).map(|n| schedule.step_at(n)).sum();
    let remaining_sum = (partial + schedule.tail_bound(last + 1)) * (1.0 + 1e-12);
    let bound = limit_lower_bound(x, schedule.step_at(index), remaining_sum).ok()?;
    Some(LimitCertificate { index, remaining_sum, bound })
}
