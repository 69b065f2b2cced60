//! Seeded property suites over the bounds, the step lemmas and the series
//! sandwiches. Each check is counted; the first failure is kept as text.

use std::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::analysis::{certify_limit, verify_bound_along};
use crate::dynamics::{simulate_with, step_map, LimitClass, Simulation, StepFn, StoppingRule, Trajectory};
use crate::perturb::{Envelope, Noise, PerturbationSpec};
use crate::seqcore::{iterlog_sum_bounds, iterlog_term, product_vs_sum, HepCase, Schedule};

/// Pass/fail tally of one suite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteReport {
    pub name: String,
    pub passed: u64,
    pub failed: u64,
    pub first_failure: Option<String>,
}

impl SuiteReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), passed: 0, failed: 0, first_failure: None }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0
    }

    pub fn record(&mut self, pass: bool, describe: impl FnOnce() -> String) {
        if pass {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(describe());
            }
        }
    }

    pub fn merge(&mut self, other: SuiteReport) {
        self.passed += other.passed;
        self.failed += other.failed;
        if self.first_failure.is_none() {
            self.first_failure = other.first_failure.map(|f| format!("{}: {f}", other.name));
        }
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} passed, {} failed", self.name, self.passed, self.failed)?;
        if let Some(first) = &self.first_failure {
            write!(f, "; first failure: {first}")?;
        }
        Ok(())
    }
}

/// The step map with the sign of the cubic term reversed, for exercising
/// the failure path of [`verify_lemmas`].
pub fn corrupted_step_map(x: f64, h: f64, u: f64) -> f64 {
    x * (1.0 + h * (x * x)) + u
}

struct Gen(ChaCha8Rng);

impl Gen {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self(rng)
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }

    fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.uniform(lo.ln(), hi.ln()).exp()
    }

    fn below(&mut self, n: u64) -> u64 {
        self.0.next_u64() % n
    }

    fn sign(&mut self) -> f64 {
        if self.0.next_u64() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

fn run(x0: f64, s: &Schedule, p: &PerturbationSpec, horizon: u64, index: u64, f: StepFn) -> Trajectory {
    let sim = Simulation::new(x0, s, p, StoppingRule::None, horizon).trajectory(index).step_fn(f);
    simulate_with(&sim).expect("suite inputs are valid")
}

/// Number of leading steps at which `h_m x_m^2 > 1`.
fn growth_steps(t: &Trajectory, s: &Schedule) -> usize {
    (0..t.x.len() - 1)
        .take_while(|&m| s.log_step_at(t.origin + m as u64) + 2.0 * t.x[m].abs().ln() > 0.0)
        .count()
}

/// Bounds on trajectories that start in the growth regime, without perturbation.
pub fn unperturbed_bound_cases(seed: u64, cases: u64) -> SuiteReport {
    let mut report = SuiteReport::new("unperturbed bound");
    let mut g = Gen::new(seed, 1);
    let zero = PerturbationSpec::zero();
    let mut done = 0;
    while done < cases {
        let (s, x0) = match g.below(4) {
            0 => {
                let h = g.log_uniform(1e-4, 0.1);
                let p0 = g.uniform(3.0, 100.0);
                (Schedule::table(vec![h]).unwrap(), g.sign() * (p0 / h).sqrt())
            }
            1 => (Schedule::super_exp_plain(), g.sign() * g.uniform(2.0, 12.0).exp()),
            2 => {
                (Schedule::case1_tower(1 + g.below(2) as u32).unwrap(), g.sign() * g.uniform(1.0, 6.0).exp())
            }
            _ => (Schedule::power_law(g.uniform(0.5, 4.0), 1).unwrap(), g.sign() * g.uniform(2.0, 30.0)),
        };
        let t = run(x0, &s, &zero, 60, 0, step_map);
        if growth_steps(&t, &s) < 3 {
            continue;
        }
        done += 1;
        let v = verify_bound_along(&t, &s, &t.u);
        report.record(v.is_none(), || format!("x0={x0:e} schedule={s} violation at n={}", v.unwrap()));
    }
    report
}

/// Bounds on growth-regime trajectories under Case 1 and Case 2 perturbations.
pub fn perturbed_bound_cases(seed: u64, cases: u64) -> SuiteReport {
    let mut report = SuiteReport::new("perturbed bound");
    let mut g = Gen::new(seed, 2);
    let mut done = 0;
    while done < cases {
        let beta = g.uniform(0.05, 0.95);
        let (s, env, x0) = if g.below(2) == 0 {
            let k = 1 + g.below(2) as u32;
            (Schedule::case1_tower(k).unwrap(), Envelope::Case1Tower { k, beta }, g.uniform(1.0, 6.0).exp())
        } else {
            (Schedule::super_exp_plain(), Envelope::Plain { beta }, g.uniform(2.0, 12.0).exp())
        };
        let pert = PerturbationSpec::new(env, Noise::BoundedUniform, seed).unwrap();
        let x0 = g.sign() * x0;
        let t = run(x0, &s, &pert, 60, done, step_map);
        if growth_steps(&t, &s) < 3 {
            continue;
        }
        done += 1;
        let v = verify_bound_along(&t, &s, &t.u);
        report.record(v.is_none(), || {
            format!("x0={x0:e} schedule={s} envelope={} violation at n={}", pert.envelope(), v.unwrap())
        });
    }
    report
}

/// The limit certificate along summable, unperturbed trajectories.
pub fn limit_certificate_cases(seed: u64, cases: u64) -> SuiteReport {
    let mut report = SuiteReport::new("limit certificate");
    let mut g = Gen::new(seed, 3);
    let zero = PerturbationSpec::zero();
    let mut done = 0;
    while done < cases {
        let s = match g.below(3) {
            0 => Schedule::power_law(g.uniform(1.5, 12.0), g.below(2)).unwrap(),
            1 => Schedule::super_exp_plain(),
            _ => Schedule::case1_tower(1).unwrap(),
        };
        let x0 = g.uniform(-3.0, 3.0);
        let t = run(x0, &s, &zero, 400, 0, step_map);
        let Some(c) = certify_limit(&t, &s).filter(|_| t.diverged_at.is_none()) else {
            continue;
        };
        done += 1;
        let start = (c.index - t.origin) as usize;
        let bound = c.bound.abs() * (1.0 - 1e-12);
        let bad = t.x[start..].iter().position(|v| v.abs() < bound);
        report.record(bad.is_none(), || {
            format!(
                "x0={x0} schedule={s}: |x_{}| below certificate {}",
                c.index + bad.unwrap() as u64,
                c.bound
            )
        });
    }
    report
}

pub fn verify_bounds(seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("bounds");
    report.merge(unperturbed_bound_cases(seed, 200));
    report.merge(perturbed_bound_cases(seed, 200));
    report.merge(limit_certificate_cases(seed, 100));
    report
}

fn random_schedule(g: &mut Gen) -> Schedule {
    match g.below(8) {
        0 => Schedule::power_law(g.uniform(0.1, 12.0), g.below(2)).unwrap(),
        1 => Schedule::super_exp_plain(),
        2 => Schedule::case1_tower(1 + g.below(2) as u32).unwrap(),
        3 => Schedule::shifted_super_exp(1).unwrap(),
        4 => Schedule::hep_case(HepCase::I).unwrap(),
        5 => Schedule::hep_case(HepCase::II).unwrap(),
        6 => Schedule::hep_case(HepCase::III).unwrap(),
        _ => Schedule::table(vec![g.uniform(0.05, 3.0)]).unwrap(),
    }
}

fn product(s: &Schedule, t: &Trajectory, m: usize) -> f64 {
    s.step_at(t.origin + m as u64) * t.x[m] * t.x[m]
}

fn check_lemmas(report: &mut SuiteReport, t: &Trajectory, s: &Schedule, x0: f64) {
    let len = t.x.len();
    let tag = |what: &str, n: usize| format!("{what}: x0={x0} schedule={s} n={}", t.origin + n as u64);

    let first_below = |thr: f64| (0..len).find(|&m| product(s, t, m) < thr);
    if let Some(n) = first_below(2.0) {
        let bad = (n..len - 1).find(|&m| t.x[m + 1].abs() > t.x[m].abs() || product(s, t, m + 1) >= 2.0);
        report.record(bad.is_none(), || tag("monotonicity", bad.unwrap()));
    }
    if let Some(n) = first_below(1.0) {
        let sign = t.x[n].signum();
        let bad = (n..len).find(|&m| t.x[m] != 0.0 && t.x[m].signum() != sign && t.x[n] != 0.0);
        report.record(bad.is_none(), || tag("sign constancy", bad.unwrap()));
    }
    if let Some(n) = (0..len).find(|&m| {
        let p = product(s, t, m);
        p > 1.0 && p < 2.0
    }) {
        if n + 100 < len {
            let later = (n + 1..len).any(|m| product(s, t, m) <= 1.0);
            report.record(later, || tag("eventually at most one", n));
        }
    }
}

const LEMMA_TRAJECTORIES: u64 = 500;
const LEMMA_ATTEMPTS: u64 = 20 * LEMMA_TRAJECTORIES;

/// Lemma properties over randomized unperturbed trajectories plus the exact
/// zero and flip constructions, all driven through `step`.
pub fn verify_lemmas(seed: u64, step: StepFn) -> SuiteReport {
    let mut report = SuiteReport::new("lemmas");
    let mut g = Gen::new(seed, 4);
    let zero = PerturbationSpec::zero();
    let mut checked = 0;
    for _ in 0..LEMMA_ATTEMPTS {
        if checked == LEMMA_TRAJECTORIES {
            break;
        }
        let s = random_schedule(&mut g);
        let x0 = g.uniform(-3.0, 3.0);
        let t = run(x0, &s, &zero, 300, 0, step);
        if t.diverged_at.is_some() {
            continue;
        }
        checked += 1;
        check_lemmas(&mut report, &t, &s, x0);
    }
    report.record(checked == LEMMA_TRAJECTORIES, || {
        format!("only {checked} of {LEMMA_TRAJECTORIES} random trajectories stayed finite")
    });
    for k in -4..=4 {
        let x = 2f64.powi(k);
        let s = Schedule::table(vec![2f64.powi(-2 * k)]).unwrap();
        let t = run(x, &s, &zero, 60, 0, step);
        let zeroed = t.x[1..].iter().all(|&v| v == 0.0);
        report.record(zeroed, || format!("exact zero: x0={x} h={}", s.step_at(0)));
        let s = Schedule::table(vec![2f64.powi(1 - 2 * k)]).unwrap();
        let t = run(-x, &s, &zero, 60, 0, step);
        let flips = t.x.iter().enumerate().all(|(n, &v)| v == if n % 2 == 0 { -x } else { x });
        report.record(flips && t.classification == LimitClass::Oscillating, || {
            format!("flip: x0={} h={}", -x, s.step_at(0))
        });
    }
    report
}

/// Integral sandwich for `k` in `{1, 2}`, `j <= 10`, `n <= n_max`.
pub fn sandwich_grid(n_max: u64) -> SuiteReport {
    let mut report = SuiteReport::new("iterated-log sandwich");
    for k in 1..=2u32 {
        let terms: Vec<f64> = (0..=n_max + 1).map(|i| iterlog_term(k, i as f64).unwrap()).collect();
        for j in 1..=10u64 {
            let mut sum = 0.0;
            for n in j..=n_max {
                sum += terms[n as usize];
                let (lower, _) = iterlog_sum_bounds(k, j, n).unwrap();
                report.record(lower < sum, || format!("k={k} j={j} n={n}: lower {lower} >= sum {sum}"));
            }
        }
        let mut sum = terms[1];
        for n in 1..=n_max {
            sum += terms[n as usize + 1];
            let (_, upper) = iterlog_sum_bounds(k, 1, n).unwrap();
            report.record(sum < upper, || format!("k={k} n={n}: sum {sum} >= upper {upper}"));
        }
    }
    report
}

/// The telescoping products of `1 - 1/n^2` and `1 - 1/n` for `n = 2..=n_max`.
pub fn telescoping(n_max: u64) -> SuiteReport {
    let mut report = SuiteReport::new("telescoping products");
    let sq: Vec<f64> = (2..=n_max).map(|n| 1.0 / (n as f64 * n as f64)).collect();
    let (p, _) = product_vs_sum(&sq).unwrap();
    let expect = (n_max as f64 + 1.0) / (2.0 * n_max as f64);
    report.record((p - expect).abs() <= 1e-12 * expect, || format!("1-1/n^2: {p} vs {expect}"));
    let harmonic: Vec<f64> = (2..=n_max).map(|n| 1.0 / n as f64).collect();
    let (p, sum) = product_vs_sum(&harmonic).unwrap();
    let expect = 1.0 / n_max as f64;
    report.record((p - expect).abs() <= 1e-12 * expect, || format!("1-1/n: {p} vs {expect}"));
    let h = (2..=n_max).map(|n| 1.0 / n as f64).sum::<f64>();
    report.record(sum == h && sum > (n_max as f64).ln() - 1.0, || format!("harmonic sum {sum}"));
    let (p, sum) = product_vs_sum(&vec![0.0; 1000]).unwrap();
    report.record(p == 1.0 && sum == 0.0, || "zero sequence".to_string());
    report
}

pub fn verify_sums() -> SuiteReport {
    let mut report = SuiteReport::new("sums");
    report.merge(sandwich_grid(10_000));
    report.merge(telescoping(100_000));
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        assert!(unperturbed_bound_cases(1, 20).ok());
        assert!(perturbed_bound_cases(1, 20).ok());
        let r = limit_certificate_cases(1, 10);
        assert!(r.ok(), "{r}");
        assert!(sandwich_grid(200).ok());
        assert!(telescoping(1000).ok());
    }

    #[test]
    fn corrupted_map_is_caught() {
        let r = verify_lemmas(3, corrupted_step_map);
        assert!(!r.ok());
        assert!(r.first_failure.is_some());
    }

    #[test]
    fn report_merge() {
        let mut a = SuiteReport::new("a");
        a.record(true, String::new);
        let mut b = SuiteReport::new("b");
        b.record(false, || "boom".into());
        a.merge(b);
        assert_eq!((a.passed, a.failed), (1, 1));
        assert_eq!(a.first_failure.as_deref(), Some("b: boom"));
        assert!(a.to_string().contains("1 failed"));
    }
}
