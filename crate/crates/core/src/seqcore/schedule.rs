use std::fmt;

use super::{check_tower, ln_iter, log_tower_product, tower_base};
use crate::error::{config, domain, Result};

/// Natural log below which `exp` underflows to exactly zero.
pub(crate) const LOG_UNDERFLOW: f64 = -745.2;

/// Variants of the super-exponential schedules `h_n = exp(-3^n / d(n))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HepCase {
    /// `d(n) = 1`.
    I,
    /// `d(n) = n`.
    II,
    /// `d(n) = n ln n`.
    III,
    /// `d(n) = n ln n ln_2 n ... ln_k n`.
    IV { k: u32 },
}

/// Closed-form description of a non-increasing positive timestep sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    /// `h_n = (n + shift)^(-p)`.
    PowerLaw { p: f64, shift: u64 },
    /// `h_n = exp(-3^(n+1))`.
    SuperExpPlain,
    /// `h_n = exp(-3^(n+1) / prod_{m=0}^{k} ln_m(n + e_[k]^1))`.
    Case1Tower { k: u32 },
    /// `h_n = exp(-3^(n+1) / (n + e_[k]^1))`, the companion of the `CompRho`
    /// envelope used by the stochastic figures.
    ShiftedSuperExp { k: u32 },
    /// `h_n = exp(-3^n / d(n))` for the four denominators of [`HepCase`].
    HepCase(HepCase),
    /// Explicit values, constant from the last entry onward.
    Table(Vec<f64>),
}

/// A validated timestep schedule together with its first admissible index.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
    origin: u64,
}

/// Outcome of [`Schedule::summability`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Summability {
    /// The series converges. `total_bound` is the partial sum plus an
    /// analytic upper bound on the tail past the horizon.
    Summable { partial_sum: f64, total_bound: f64 },
    /// The series diverges. `constant_tail` marks tables whose constant tail
    /// makes divergence a matter of construction.
    NonSummable { partial_sum: f64, constant_tail: bool },
}

/// Partial sum of `3^(-j) ln(1/h_j)` with the analytic divergence verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSeries {
    pub sum: f64,
    pub diverges: bool,
}

fn pow3(e: u64) -> f64 {
    if e > 700 {
        f64::INFINITY
    } else {
        3f64.powi(e as i32)
    }
}

impl Schedule {
    pub fn new(kind: ScheduleKind) -> Result<Self> {
        let origin = match &kind {
            ScheduleKind::PowerLaw { p, shift } => {
                if !(p.is_finite() && *p > 0.0) {
                    return config(format!("power law exponent must be positive, got {p}"));
                }
                u64::from(*shift == 0)
            }
            ScheduleKind::SuperExpPlain => 0,
            ScheduleKind::Case1Tower { k } | ScheduleKind::ShiftedSuperExp { k } => {
                check_tower(*k)?;
                0
            }
            ScheduleKind::HepCase(case) => hep_origin(*case)?,
            ScheduleKind::Table(values) => {
                if values.is_empty() {
                    return config("table schedule needs at least one value");
                }
                for (i, v) in values.iter().enumerate() {
                    if !(v.is_finite() && *v > 0.0) {
                        return config(format!("table value {i} = {v} is not positive"));
                    }
                    if i > 0 && *v > values[i - 1] {
                        return config(format!("table value {i} = {v} increases"));
                    }
                }
                0
            }
        };
        Ok(Self { kind, origin })
    }

    pub fn power_law(p: f64, shift: u64) -> Result<Self> {
        Self::new(ScheduleKind::PowerLaw { p, shift })
    }

    pub fn super_exp_plain() -> Self {
        Self { kind: ScheduleKind::SuperExpPlain, origin: 0 }
    }

    pub fn case1_tower(k: u32) -> Result<Self> {
        Self::new(ScheduleKind::Case1Tower { k })
    }

    pub fn shifted_super_exp(k: u32) -> Result<Self> {
        Self::new(ScheduleKind::ShiftedSuperExp { k })
    }

    pub fn hep_case(case: HepCase) -> Result<Self> {
        Self::new(ScheduleKind::HepCase(case))
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        Self::new(ScheduleKind::Table(values))
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    /// First index at which the schedule is defined and non-increasing.
    pub fn origin(&self) -> u64 {
        self.origin
    }

    pub fn step(&self, n: u64) -> Result<f64> {
        self.check_index(n)?;
        Ok(self.step_at(n))
    }

    /// `ln h_n` from the closed form; finite even where `h_n` underflows.
    pub fn log_step(&self, n: u64) -> Result<f64> {
        self.check_index(n)?;
        Ok(self.log_step_at(n))
    }

    /// `-ln(h_n) / 3^(n+1)`, evaluated without forming `3^(n+1)` where the
    /// closed form allows it.
    pub fn decay_rate(&self, n: u64) -> Result<f64> {
        self.check_index(n)?;
        Ok(self.rate_at(n))
    }

    fn check_index(&self, n: u64) -> Result<()> {
        if n < self.origin {
            domain(format!("index {n} precedes schedule origin {}", self.origin))
        } else {
            Ok(())
        }
    }

    /// `(e, d)` such that `ln h_n = -3^e / d` for the super-exponential kinds.
    fn exponent_parts(&self, n: u64) -> Option<(u64, f64)> {
        let nf = n as f64;
        match &self.kind {
            ScheduleKind::SuperExpPlain => Some((n + 1, 1.0)),
            ScheduleKind::Case1Tower { k } => {
                Some((n + 1, log_tower_product(*k, nf + tower_base(*k).unwrap())))
            }
            ScheduleKind::ShiftedSuperExp { k } => Some((n + 1, nf + tower_base(*k).unwrap())),
            ScheduleKind::HepCase(case) => Some((
                n,
                match case {
                    HepCase::I => 1.0,
                    HepCase::II => nf,
                    HepCase::III => nf * nf.ln(),
                    HepCase::IV { k } => log_tower_product(*k, nf),
                },
            )),
            ScheduleKind::PowerLaw { .. } | ScheduleKind::Table(_) => None,
        }
    }

    pub(crate) fn log_step_at(&self, n: u64) -> f64 {
        match &self.kind {
            ScheduleKind::PowerLaw { p, shift } => -p * ((n + shift) as f64).ln(),
            ScheduleKind::Table(values) => values[(n as usize).min(values.len() - 1)].ln(),
            _ => {
                let (e, d) = self.exponent_parts(n).unwrap();
                -pow3(e) / d
            }
        }
    }

    pub(crate) fn step_at(&self, n: u64) -> f64 {
        match &self.kind {
            ScheduleKind::PowerLaw { p, shift } => ((n + shift) as f64).powf(-p),
            ScheduleKind::Table(values) => values[(n as usize).min(values.len() - 1)],
            _ => self.log_step_at(n).exp(),
        }
    }

    pub(crate) fn rate_at(&self, n: u64) -> f64 {
        match &self.kind {
            ScheduleKind::PowerLaw { .. } | ScheduleKind::Table(_) => -self.log_step_at(n) / pow3(n + 1),
            _ => {
                let (e, d) = self.exponent_parts(n).unwrap();
                // e is n or n + 1
                let scale = if e == n { 1.0 / 3.0 } else { 1.0 };
                scale / d
            }
        }
    }

    pub fn is_summable(&self) -> bool {
        match &self.kind {
            ScheduleKind::PowerLaw { p, .. } => *p > 1.0,
            ScheduleKind::Table(_) => false,
            _ => true,
        }
    }

    /// Whether `sum_j 3^(-j) ln(1/h_j)` diverges, decided from the closed form.
    pub fn log_series_diverges(&self) -> bool {
        !matches!(self.kind, ScheduleKind::PowerLaw { .. } | ScheduleKind::Table(_))
    }

    /// Upper bound on `sum_{n >= from} h_n`; `+inf` for non-summable kinds.
    ///
    /// Power laws use `f(M) + int_M^inf f`. The super-exponential kinds are
    /// summed term by term until the terms underflow and successive ratios
    /// fall below 1/2, so the remainder is below double resolution.
    pub fn tail_bound(&self, from: u64) -> f64 {
        let from = from.max(self.origin);
        match &self.kind {
            ScheduleKind::PowerLaw { p, shift } => {
                if *p <= 1.0 {
                    return f64::INFINITY;
                }
                let m = (from + shift) as f64;
                m.powf(-p) + m.powf(1.0 - p) / (p - 1.0)
            }
            ScheduleKind::Table(_) => f64::INFINITY,
            _ => {
                let mut total = 0.0;
                let mut n = from;
                loop {
                    let l = self.log_step_at(n);
                    if l < LOG_UNDERFLOW {
                        let gap = self.log_step_at(n + 1) - l;
                        if gap.is_nan() || gap <= -std::f64::consts::LN_2 {
                            break;
                        }
                    }
                    total += l.exp();
                    n += 1;
                }
                // absorbs rounding in the explicit terms
                total * (1.0 + 1e-14)
            }
        }
    }

    /// Partial sum `sum_{n=origin}^{horizon} h_n` with the analytic verdict.
    pub fn summability(&self, horizon: u64) -> Summability {
        let partial_sum: f64 = (self.origin..=horizon).map(|n| self.step_at(n)).sum();
        if self.is_summable() {
            Summability::Summable { partial_sum, total_bound: partial_sum + self.tail_bound(horizon + 1) }
        } else {
            Summability::NonSummable {
                partial_sum,
                constant_tail: matches!(self.kind, ScheduleKind::Table(_)),
            }
        }
    }

    /// `sum_{j=origin}^{n} 3^(-j) ln(1/h_j)`, computed from [`Self::decay_rate`]
    /// so each term is `3 * rate` and never forms `3^j` explicitly.
    pub fn log_series_partial(&self, n: u64) -> LogSeries {
        let sum = (self.origin..=n).map(|j| 3.0 * self.rate_at(j)).sum();
        LogSeries { sum, diverges: self.log_series_diverges() }
    }
}

fn hep_origin(case: HepCase) -> Result<u64> {
    Ok(match case {
        HepCase::I => 0,
        HepCase::II => 1,
        HepCase::III => 2,
        HepCase::IV { k } => {
            check_tower(k)?;
            let probe = Schedule { kind: ScheduleKind::HepCase(case), origin: 0 };
            let mut n = 2u64;
            while ln_iter(k, n as f64).is_nan() || ln_iter(k, n as f64) <= 0.0 {
                n += 1;
            }
            // near the domain edge ln_k n is tiny and h_n rises before it falls
            while probe.log_step_at(n + 1) > probe.log_step_at(n) {
                n += 1;
            }
            n
        }
    })
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ScheduleKind::PowerLaw { p, shift } => write!(f, "power_law(p={p},shift={shift})"),
            ScheduleKind::SuperExpPlain => write!(f, "super_exp_plain"),
            ScheduleKind::Case1Tower { k } => write!(f, "case1_tower(k={k})"),
            ScheduleKind::ShiftedSuperExp { k } => write!(f, "shifted_super_exp(k={k})"),
            ScheduleKind::HepCase(case) => match case {
                HepCase::IV { k } => write!(f, "hep_case(iv,k={k})"),
                other => write!(f, "hep_case({})", format!("{other:?}").to_lowercase()),
            },
            ScheduleKind::Table(values) => write!(f, "table(len={})", values.len()),
        }
    }
}
