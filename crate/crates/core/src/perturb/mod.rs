//! Perturbation envelopes `rho_n`, noise `xi_n`, and the terms `u_n = rho_n xi_n`.
//!
//! The power-form envelopes are `rho_n = b(n)^(3^n)` for a base `b(n)` that
//! is non-increasing in `n`, and are always handled through `ln rho_n =
//! 3^n ln b(n)` so that values far below double range still compare
//! correctly. `rho_0` is zero; perturbations start at `u_1`.

mod noise;

pub use noise::{lil_running_ratio, LilTrace, Noise, NoiseStream, Sign};

use std::f64::consts::E;
use std::fmt;

use crate::error::{config, Result};
use crate::seqcore::{check_tower, log_tower_product, tower_base, Schedule, ScheduleKind};

/// `rho_n` for the supported envelope families.
#[derive(Debug, Clone, PartialEq)]
pub enum Envelope {
    Zero,
    /// `(beta / prod_{m=0}^{k} ln_m(n + e_[k]^1))^(3^n)`, `beta` in `(0, 1)`.
    Case1Tower {
        k: u32,
        beta: f64,
    },
    /// `(beta (e - 1) / e)^(3^n)`, `beta` in `(0, 1)`.
    Plain {
        beta: f64,
    },
    /// `(beta / (n + e_[k]^1))^(3^n)`, `beta > 0`.
    CompRho {
        k: u32,
        beta: f64,
    },
    /// `rho_n = head[n - 1]` for `1 <= n <= head.len()`, then `tail` (or zero).
    Table {
        head: Vec<f64>,
        tail: Option<Box<Envelope>>,
    },
}

impl Envelope {
    pub fn validate(&self) -> Result<()> {
        match self {
            Envelope::Zero => Ok(()),
            Envelope::Case1Tower { k, beta } => {
                check_tower(*k)?;
                unit_beta(*beta)
            }
            Envelope::Plain { beta } => unit_beta(*beta),
            Envelope::CompRho { k, beta } => {
                check_tower(*k)?;
                if beta.is_finite() && *beta > 0.0 {
                    Ok(())
                } else {
                    config(format!("beta must be positive, got {beta}"))
                }
            }
            Envelope::Table { head, tail } => {
                if let Some(v) = head.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return config(format!("table envelope value {v} is not non-negative"));
                }
                tail.as_deref().map_or(Ok(()), Envelope::validate)
            }
        }
    }

    /// `ln b(n)` for the power-form kinds.
    fn log_base(&self, n: u64) -> Option<f64> {
        let nf = n as f64;
        match self {
            Envelope::Case1Tower { k, beta } => {
                Some(beta.ln() - log_tower_product(*k, nf + tower_base(*k).unwrap()).ln())
            }
            Envelope::Plain { beta } => Some((beta * (E - 1.0) / E).ln()),
            Envelope::CompRho { k, beta } => Some(beta.ln() - (nf + tower_base(*k).unwrap()).ln()),
            Envelope::Zero | Envelope::Table { .. } => None,
        }
    }

    /// `ln rho_n`; `-inf` where `rho_n = 0`.
    pub fn log_envelope(&self, n: u64) -> f64 {
        if n == 0 {
            return f64::NEG_INFINITY;
        }
        match self {
            Envelope::Zero => f64::NEG_INFINITY,
            Envelope::Table { head, tail } => match head.get((n - 1) as usize) {
                Some(v) => v.ln(),
                None => tail.as_ref().map_or(f64::NEG_INFINITY, |t| t.log_envelope(n)),
            },
            _ => {
                let lb = self.log_base(n).unwrap();
                if lb == 0.0 {
                    0.0
                } else {
                    pow3(n) * lb
                }
            }
        }
    }

    pub fn envelope(&self, n: u64) -> f64 {
        match self {
            Envelope::Table { head, tail } if n >= 1 => match head.get((n - 1) as usize) {
                Some(v) => *v,
                None => tail.as_ref().map_or(0.0, |t| t.envelope(n)),
            },
            _ => self.log_envelope(n).exp(),
        }
    }

    /// True when `rho_m = 0` in double precision for every `m >= n`.
    pub fn vanishes_from(&self, n: u64) -> bool {
        match self {
            Envelope::Zero => true,
            Envelope::Table { head, tail } => {
                n > head.len() as u64 && tail.as_ref().is_none_or(|t| t.vanishes_from(n))
            }
            _ => {
                // b(n) is non-increasing, so once ln b < 0 the logs only fall
                n > 0 && self.log_base(n).unwrap() < 0.0 && self.log_envelope(n).exp() == 0.0
            }
        }
    }
}

fn unit_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        config(format!("beta must lie in (0, 1), got {beta}"))
    }
}

fn pow3(n: u64) -> f64 {
    if n > 700 {
        f64::INFINITY
    } else {
        3f64.powi(n as i32)
    }
}

impl fmt::Display for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Envelope::Zero => write!(f, "zero"),
            Envelope::Case1Tower { k, beta } => write!(f, "case1_tower(k={k},beta={beta})"),
            Envelope::Plain { beta } => write!(f, "plain(beta={beta})"),
            Envelope::CompRho { k, beta } => write!(f, "comp_rho(k={k},beta={beta})"),
            Envelope::Table { head, tail } => match tail {
                Some(t) => write!(f, "table(len={},tail={t})", head.len()),
                None => write!(f, "table(len={})", head.len()),
            },
        }
    }
}

/// Envelope, noise distribution and root seed of a perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    envelope: Envelope,
    noise: Noise,
    seed: u64,
}

impl PerturbationSpec {
    pub fn new(envelope: Envelope, noise: Noise, seed: u64) -> Result<Self> {
        envelope.validate()?;
        Ok(Self { envelope, noise, seed })
    }

    pub fn zero() -> Self {
        Self { envelope: Envelope::Zero, noise: Noise::UnitConstant(Sign::Plus), seed: 0 }
    }

    pub fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    pub fn noise(&self) -> Noise {
        self.noise
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn is_zero(&self) -> bool {
        self.envelope.vanishes_from(1)
    }

    pub fn stream(&self, trajectory_index: u64) -> NoiseStream {
        NoiseStream::new(self.noise, self.seed, trajectory_index)
    }

    /// `xi_n` for trajectory `trajectory_index`.
    pub fn sample_xi(&self, trajectory_index: u64, n: u64) -> f64 {
        self.stream(trajectory_index).xi(n)
    }

    /// `u_n = rho_n xi_n`, with `u_0 = 0`.
    pub fn perturbation_term(&self, trajectory_index: u64, n: u64) -> f64 {
        let rho = self.envelope.envelope(n);
        if rho == 0.0 {
            0.0
        } else {
            rho * self.sample_xi(trajectory_index, n)
        }
    }
}

/// A sequence that can be compared with an envelope in the log domain.
pub trait LogSequence {
    /// `ln a_n`, or `None` past the end of the sequence.
    fn log_at(&self, n: u64) -> Option<f64>;
}

impl LogSequence for Envelope {
    fn log_at(&self, n: u64) -> Option<f64> {
        Some(self.log_envelope(n))
    }
}

/// Explicit `rho` values indexed from `n = 0`.
impl LogSequence for [f64] {
    fn log_at(&self, n: u64) -> Option<f64> {
        self.get(n as usize).map(|v| v.abs().ln())
    }
}

impl LogSequence for Vec<f64> {
    fn log_at(&self, n: u64) -> Option<f64> {
        self.as_slice().log_at(n)
    }
}

/// Smallest `n` in `1..=n_max` with `rho_n > envelope(n)`.
pub fn check_envelope_compliance<S: LogSequence + ?Sized>(
    rho: &S,
    envelope: &Envelope,
    n_max: u64,
) -> Option<u64> {
    (1..=n_max)
        .map_while(|n| rho.log_at(n).map(|l| (n, l)))
        .find(|&(n, l)| l > envelope.log_envelope(n))
        .map(|(n, _)| n)
}

/// Smallest `n` in `1..=n_max` with `rho_{n+1} > h_n`.
///
/// The pairings are Case 1 (`Case1Tower` envelope with the `Case1Tower`
/// schedule of the same `k`), Case 2 (`Plain` with `SuperExpPlain`) and the
/// figure pairing (`CompRho` with `ShiftedSuperExp` of the same `k`). The
/// comparison uses `Q(n) = ln b(n+1) + decay_rate(n)`, whose sign equals that
/// of `ln rho_{n+1} - ln h_n = 3^(n+1) Q(n)`.
pub fn check_u_le_h(envelope: &Envelope, schedule: &Schedule, n_max: u64) -> Result<Option<u64>> {
    let matched = match (envelope, schedule.kind()) {
        (Envelope::Case1Tower { k, .. }, ScheduleKind::Case1Tower { k: ks }) => k == ks,
        (Envelope::Plain { .. }, ScheduleKind::SuperExpPlain) => true,
        (Envelope::CompRho { k, .. }, ScheduleKind::ShiftedSuperExp { k: ks }) => k == ks,
        _ => false,
    };
    if !matched {
        return config(format!("envelope {envelope} does not pair with schedule {schedule}"));
    }
    let start = schedule.origin().max(1);
    Ok((start..=n_max).find(|&n| {
        let q = envelope.log_base(n + 1).unwrap() + schedule.decay_rate(n).unwrap();
        q > 0.0
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_examples() {
        let plain = Envelope::Plain { beta: 0.999_999 };
        let v = plain.envelope(4);
        assert!(v < (-1f64).exp());
        let direct = ((E - 1.0) / E).powi(81);
        assert!((v - direct).abs() / direct < 1e-4);
        assert_eq!(Envelope::Zero.envelope(3), 0.0);
        let comp = Envelope::CompRho { k: 1, beta: 0.5 };
        assert!((comp.envelope(1) - (0.5 / (1.0 + E)).powi(3)).abs() < 1e-17);
        assert!((comp.envelope(1) - 0.002423).abs() < 1e-5);
        assert_eq!(comp.envelope(0), 0.0);
    }

    #[test]
    fn log_envelope_matches_direct_power() {
        let envs = [
            Envelope::Case1Tower { k: 1, beta: 0.5 },
            Envelope::Case1Tower { k: 2, beta: 0.9 },
            Envelope::Plain { beta: 0.3 },
            Envelope::CompRho { k: 1, beta: 0.5 },
            Envelope::CompRho { k: 1, beta: 5.0 },
        ];
        for env in &envs {
            for n in 1..=6u64 {
                let base = env.log_base(n).unwrap().exp();
                let direct = base.powi(3i32.pow(n as u32));
                let via_log = env.log_envelope(n).exp();
                if direct > 1e-300 && direct.is_finite() {
                    assert!((via_log - direct).abs() / direct < 1e-10, "{env} n={n}");
                }
            }
        }
    }

    #[test]
    fn validation_rejects_bad_beta() {
        assert!(Envelope::Plain { beta: 1.0 }.validate().is_err());
        assert!(Envelope::Case1Tower { k: 1, beta: 0.0 }.validate().is_err());
        assert!(Envelope::CompRho { k: 1, beta: 5.0 }.validate().is_ok());
        assert!(Envelope::CompRho { k: 0, beta: 0.5 }.validate().is_err());
        let t = Envelope::Table { head: vec![0.1, -0.2], tail: None };
        assert!(t.validate().is_err());
    }

    #[test]
    fn table_with_tail() {
        let env = Envelope::Table { head: vec![0.25], tail: Some(Box::new(Envelope::Plain { beta: 0.5 })) };
        assert_eq!(env.envelope(1), 0.25);
        assert_eq!(env.envelope(2), Envelope::Plain { beta: 0.5 }.envelope(2));
        assert!(!env.vanishes_from(2));
        let bare = Envelope::Table { head: vec![0.25], tail: None };
        assert_eq!(bare.envelope(2), 0.0);
        assert!(bare.vanishes_from(2));
        assert!(!bare.vanishes_from(1));
    }

    #[test]
    fn vanishing_is_permanent() {
        let env = Envelope::CompRho { k: 1, beta: 5.0 };
        let first = (1..100).find(|&n| env.vanishes_from(n)).unwrap();
        assert!((first..first + 50).all(|n| env.envelope(n) == 0.0));
        assert!(env.envelope(2) > 1.0);
    }

    #[test]
    fn perturbation_terms() {
        let spec = PerturbationSpec::zero();
        assert_eq!(spec.perturbation_term(0, 5), 0.0);
        let plain =
            PerturbationSpec::new(Envelope::Plain { beta: 0.5 }, Noise::UnitConstant(Sign::Plus), 0).unwrap();
        for n in 1..5 {
            assert_eq!(plain.perturbation_term(0, n), plain.envelope().envelope(n));
        }
        assert_eq!(plain.perturbation_term(0, 0), 0.0);
        let c1 = PerturbationSpec::new(Envelope::Case1Tower { k: 1, beta: 0.5 }, Noise::BoundedUniform, 11)
            .unwrap();
        let bound = c1.envelope().envelope(3);
        for traj in 0..10_000 {
            assert!(c1.perturbation_term(traj, 3).abs() <= bound);
        }
    }

    #[test]
    fn compliance_examples() {
        let c1 = Envelope::Case1Tower { k: 1, beta: 0.5 };
        assert_eq!(check_envelope_compliance(&c1, &c1, 50), None);
        for beta in [0.1, 0.5, 0.9, 0.999] {
            let reference = Envelope::Case1Tower { k: 1, beta };
            let comp = Envelope::CompRho { k: 1, beta: 0.5 };
            assert!(check_envelope_compliance(&comp, &reference, 50).is_some(), "beta {beta}");
        }
        let doubled: Vec<f64> = (0..20).map(|n| 2.0 * c1.envelope(n)).collect();
        assert_eq!(check_envelope_compliance(&doubled, &c1, 19), Some(1));
        let exact: Vec<f64> = (0..20).map(|n| c1.envelope(n)).collect();
        assert_eq!(check_envelope_compliance(exact.as_slice(), &c1, 19), None);
    }

    #[test]
    fn u_le_h_examples() {
        let plain_sched = Schedule::super_exp_plain();
        let ok = Envelope::Plain { beta: 0.5 };
        assert_eq!(check_u_le_h(&ok, &plain_sched, 200).unwrap(), None);
        let bad = Envelope::Plain { beta: 0.9 };
        assert_eq!(check_u_le_h(&bad, &plain_sched, 200).unwrap(), Some(1));
        let c1 = Envelope::Case1Tower { k: 1, beta: 0.5 };
        let c1_sched = Schedule::case1_tower(1).unwrap();
        assert_eq!(check_u_le_h(&c1, &c1_sched, 500).unwrap(), None);
        let fig = Schedule::shifted_super_exp(1).unwrap();
        let comp = Envelope::CompRho { k: 1, beta: 0.5 };
        assert_eq!(check_u_le_h(&comp, &fig, 500).unwrap(), None);
        assert!(check_u_le_h(&c1, &plain_sched, 10).is_err());
        let c2 = Schedule::case1_tower(2).unwrap();
        assert!(check_u_le_h(&c1, &c2, 10).is_err());
    }
}
