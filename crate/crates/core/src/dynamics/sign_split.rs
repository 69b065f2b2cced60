//! Initial values and perturbation tables for the zero, positive and
//! negative limit constructions with `h_n = exp(-3^(n+1))`.

use super::step_map;
use crate::perturb::{Envelope, Noise, PerturbationSpec, Sign};
use crate::seqcore::Schedule;

/// Tail parameter of the `Plain` envelope used after `u_1` in the positive and negative cases.
const TAIL_BETA: f64 = 0.5;

/// How far the root is moved, in ulps, looking for `x_1 = 0` exactly.
const ULP_SEARCH: i64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitCase {
    /// `u_1 = -e^-3`, `u_n = 0` afterwards; the limit is zero.
    Zero,
    /// `u_1 = e^-3`, positive tail; the limit is positive.
    Positive,
    /// `u_1 = -2 e^-3`, negative tail; the limit is negative.
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSetup {
    pub x0: f64,
    pub schedule: Schedule,
    pub pert: PerturbationSpec,
}

/// `(x_m, f_m)`: the maximiser of `x - e^-3 x^3` and its maximum.
pub fn cubic_extremum() -> (f64, f64) {
    let s = (3.0 * (-3f64).exp()).sqrt();
    (1.0 / s, 2.0 / (3.0 * s))
}

/// The shared initial value: the root of `x - e^-3 x^3 = e^-3` in `(0, x_m)`,
/// nudged to a neighbouring double for which the first step lands on zero
/// exactly when one exists within a few ulps.
fn root() -> f64 {
    let h0 = (-3f64).exp();
    let f = |x: f64| x - h0 * x * x * x - h0;
    let (mut lo, mut hi) = (0.0, cubic_extremum().0);
    debug_assert!(f(lo) < 0.0 && f(hi) > 0.0);
    while hi - lo > f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let first = |x: f64| step_map(x, h0, -h0);
    (-ULP_SEARCH..=ULP_SEARCH)
        .map(|d| f64::from_bits((x.to_bits() as i64 + d) as u64))
        .min_by(|a, b| {
            let ka = (first(*a).abs(), (a - x).abs());
            let kb = (first(*b).abs(), (b - x).abs());
            ka.partial_cmp(&kb).unwrap()
        })
        .unwrap()
}

pub fn sign_split_setup(case: SplitCase) -> SplitSetup {
    let e3 = (-3f64).exp();
    let tail = Some(Box::new(Envelope::Plain { beta: TAIL_BETA }));
    let (envelope, sign) = match case {
        SplitCase::Zero => (Envelope::Table { head: vec![e3], tail: None }, Sign::Minus),
        SplitCase::Positive => (Envelope::Table { head: vec![e3], tail }, Sign::Plus),
        SplitCase::Negative => (Envelope::Table { head: vec![2.0 * e3], tail }, Sign::Minus),
    };
    let pert = PerturbationSpec::new(envelope, Noise::UnitConstant(sign), 0)
        .expect("example tables are valid envelopes");
    SplitSetup { x0: root(), schedule: Schedule::super_exp_plain(), pert }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors() {
        let (x_m, f_m) = cubic_extremum();
        assert!((x_m - 2.586).abs() / 2.586 < 1e-3);
        assert!((f_m - 1.724).abs() / 1.724 < 1e-3);
        let h0 = (-3f64).exp();
        assert!((x_m - h0 * x_m.powi(3) - f_m).abs() < 1e-14);
    }

    #[test]
    fn root_solves_cubic() {
        let s = sign_split_setup(SplitCase::Zero);
        let h0 = (-3f64).exp();
        // independent Newton iteration from the left edge
        let mut x = 0.0f64;
        for _ in 0..50 {
            x -= (x - h0 * x.powi(3) - h0) / (1.0 - 3.0 * h0 * x * x);
        }
        assert!((s.x0 - x).abs() < 1e-15);
        assert!((s.x0 - 0.049_793_214_856_1).abs() < 1e-12);
        assert!(s.x0 > 0.0 && s.x0 < cubic_extremum().0);
    }
}
