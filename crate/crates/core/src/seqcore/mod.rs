//! Iterated exponentials and logarithms, timestep schedules, and the series
//! and product bounds used to classify them.
//!
//! `tower_exp(k, a)` is `exp` applied `k` times with the convention
//! `tower_exp(0, a) = 1`; `iter_log(k, b)` is `ln` applied `k` times with
//! `iter_log(0, b) = b`. The two conventions are deliberately asymmetric.

mod schedule;

pub use schedule::{HepCase, LogSeries, Schedule, ScheduleKind, Summability};

use crate::error::{domain, Error, Result};

/// Largest tower height supported for `e_[k]^1` in double precision.
pub const MAX_TOWER: u32 = 3;

/// Relative slack accepted by [`iter_log`] at the lower edge of its domain.
const DOMAIN_SLACK: f64 = 1e-9;

/// `exp` applied `k` times to `a`, with `tower_exp(0, a) = 1`.
pub fn tower_exp(k: u32, a: f64) -> Result<f64> {
    if k == 0 {
        return Ok(1.0);
    }
    let mut v = a;
    for _ in 0..k {
        v = v.exp();
    }
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Range(format!("tower_exp({k}, {a}) overflows")))
    }
}

/// `e_[k]^1`, the base offset used by the tower schedules and envelopes.
pub fn tower_base(k: u32) -> Result<f64> {
    tower_exp(k, 1.0)
}

/// `ln` applied `k` times to `b`; defined for `b >= tower_exp(k, 1)`.
pub fn iter_log(k: u32, b: f64) -> Result<f64> {
    if k == 0 {
        return Ok(b);
    }
    let v = ln_iter(k, b);
    if v.is_nan() || v < 1.0 - DOMAIN_SLACK {
        return domain(format!("iter_log({k}, {b}): argument below e_[{k}]^1"));
    }
    Ok(v)
}

/// Unchecked `ln` applied `k` times. Returns NaN or -inf outside the domain.
pub(crate) fn ln_iter(k: u32, b: f64) -> f64 {
    let mut v = b;
    for _ in 0..k {
        v = v.ln();
    }
    v
}

/// `prod_{m=0}^{k} ln_m(y)`, the denominator shared by the tower kinds.
pub(crate) fn log_tower_product(k: u32, y: f64) -> f64 {
    let mut prod = y;
    let mut v = y;
    for _ in 0..k {
        v = v.ln();
        prod *= v;
    }
    prod
}

/// Summand `1 / prod_{m=0}^{k} ln_m(i + e_[k]^1)` of the iterated-log series.
pub fn iterlog_term(k: u32, i: f64) -> Result<f64> {
    check_tower(k)?;
    Ok(1.0 / log_tower_product(k, i + tower_base(k)?))
}

/// Integral-test bounds for the iterated-log series.
///
/// Returns `(lower, upper)` with
/// `lower = ln_{k+1}(n+1+c) - ln_{k+1}(j+c) < sum_{i=j}^{n} f(i)` and
/// `sum_{i=1}^{n+1} f(i) < upper = ln_{k+1}(n+2+c)`, where `c = e_[k]^1` and
/// `f` is [`iterlog_term`]. When `j > n` the lower sum is empty and `lower = 0`.
pub fn iterlog_sum_bounds(k: u32, j: u64, n: u64) -> Result<(f64, f64)> {
    check_tower(k)?;
    if j == 0 {
        return domain("iterlog_sum_bounds requires j >= 1");
    }
    let c = tower_base(k)?;
    let upper = ln_iter(k + 1, n as f64 + 2.0 + c);
    let lower = if j > n { 0.0 } else { ln_iter(k + 1, n as f64 + 1.0 + c) - ln_iter(k + 1, j as f64 + c) };
    Ok((lower, upper))
}

/// Partial product and sum for a sequence `q_n` in `[0, 1)`.
///
/// The infinite product of `1 - q_n` has a nonzero limit exactly when the
/// series of `q_n` converges; this returns both partial values side by side.
pub fn product_vs_sum(q: &[f64]) -> Result<(f64, f64)> {
    let mut product = 1.0;
    let mut sum = 0.0;
    for (i, &v) in q.iter().enumerate() {
        if !(0.0..1.0).contains(&v) {
            return domain(format!("q[{i}] = {v} outside [0, 1)"));
        }
        product *= 1.0 - v;
        sum += v;
    }
    Ok((product, sum))
}

/// Lower estimate of the index after which `h_n x_n^2 < 1` is guaranteed for
/// the schedules of [`HepCase`], as a function of the initial value.
///
/// Case I gives `3 ln|x0|`, II gives `|x0|^3`, III gives `exp(|x0|^3)` and
/// IV(k) gives `exp` applied `k` times to `|x0|^3`. Values are clamped at 0
/// and may be `+inf` when they exceed double range.
pub fn nbar_estimate(case: HepCase, x0: f64) -> f64 {
    if x0 == 0.0 {
        return 0.0;
    }
    let cube = x0.abs().powi(3);
    let est = match case {
        HepCase::I => 3.0 * x0.abs().ln(),
        HepCase::II => cube,
        HepCase::III => cube.exp(),
        HepCase::IV { k } => (0..k).fold(cube, |v, _| v.exp()),
    };
    est.max(0.0)
}

pub(crate) fn check_tower(k: u32) -> Result<()> {
    if (1..=MAX_TOWER).contains(&k) {
        Ok(())
    } else {
        domain(format!("tower height k = {k} outside 1..={MAX_TOWER}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn tower_exp_conventions() {
        assert_eq!(tower_exp(0, 7.3).unwrap(), 1.0);
        assert!((tower_exp(1, 1.0).unwrap() - E).abs() < 1e-15);
        assert!((tower_exp(2, 1.0).unwrap() - 15.154_262_24).abs() < 1e-8);
        assert!(tower_exp(3, 1.0).unwrap() > 3.8e6);
        assert!(matches!(tower_exp(4, 1.0), Err(Error::Range(_))));
    }

    #[test]
    fn iter_log_conventions() {
        assert_eq!(iter_log(0, 5.0).unwrap(), 5.0);
        assert!((iter_log(1, E).unwrap() - 1.0).abs() < 1e-15);
        assert!((iter_log(2, 15.154_262_24).unwrap() - 1.0).abs() < 1e-9);
        assert!(matches!(iter_log(2, 3.0), Err(Error::Domain(_))));
        assert!(matches!(iter_log(1, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn tower_inversion() {
        for k in 0..=3 {
            let t = tower_exp(k, 1.0).unwrap();
            assert!((iter_log(k, t).unwrap() - 1.0).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn iterlog_bounds_small_cases() {
        // k = 1, j = n = 1: single summand 1 / ((1+e) ln(1+e)).
        let (lower, _) = iterlog_sum_bounds(1, 1, 1).unwrap();
        let s1 = 1.0 / ((1.0 + E) * (1.0 + E).ln());
        assert!(lower < s1);
        let (lower, upper) = iterlog_sum_bounds(1, 5, 4).unwrap();
        assert_eq!(lower, 0.0);
        assert!(upper > 0.0);
        assert!(iterlog_sum_bounds(1, 0, 4).is_err());
        assert!(iterlog_sum_bounds(4, 1, 4).is_err());
    }

    #[test]
    fn product_vs_sum_edges() {
        assert_eq!(product_vs_sum(&[0.0; 10]).unwrap(), (1.0, 0.0));
        assert!(product_vs_sum(&[0.5, 1.0]).is_err());
        assert!(product_vs_sum(&[-0.1]).is_err());
    }

    #[test]
    fn nbar_examples() {
        assert_eq!(nbar_estimate(HepCase::II, 2.0), 8.0);
        assert_eq!(nbar_estimate(HepCase::I, 1.0), 0.0);
        assert_eq!(nbar_estimate(HepCase::I, 0.5), 0.0);
        assert!((nbar_estimate(HepCase::III, 1.2) - 1.728f64.exp()).abs() < 1e-12);
        assert!((nbar_estimate(HepCase::III, 1.2) - 5.629).abs() < 1e-3);
        assert_eq!(nbar_estimate(HepCase::IV { k: 1 }, 1.2), nbar_estimate(HepCase::III, 1.2));
        assert_eq!(nbar_estimate(HepCase::II, 0.0), 0.0);
    }
}
