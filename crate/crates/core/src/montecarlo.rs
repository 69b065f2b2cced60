//! Ensembles of independent trajectories.
//!
//! Path `i` of a batch reads stream `i` of the root seed, so results do not
//! depend on how the paths are scheduled across threads.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::dynamics::{simulate_summary, LimitClass, LimitCriteria, Simulation, StoppingRule, Summary};
use crate::error::{domain, Result};
use crate::perturb::{lil_running_ratio, Noise, PerturbationSpec};
use crate::seqcore::Schedule;

/// Inputs of a batch.
#[derive(Debug, Clone)]
pub struct BatchSpec {
    pub x0: f64,
    pub schedule: Schedule,
    pub pert: PerturbationSpec,
    pub rule: StoppingRule,
    pub horizon: u64,
    pub paths: u64,
    pub root_seed: u64,
    pub criteria: LimitCriteria,
    /// First index included in each path's tail supremum.
    pub tail_start: u64,
}

impl BatchSpec {
    pub fn new(
        x0: f64,
        schedule: Schedule,
        pert: PerturbationSpec,
        rule: StoppingRule,
        horizon: u64,
        paths: u64,
        root_seed: u64,
    ) -> Self {
        Self {
            x0,
            schedule,
            pert,
            rule,
            horizon,
            paths,
            root_seed,
            criteria: LimitCriteria::default(),
            tail_start: horizon / 2,
        }
    }
}

/// Per-path summaries in trajectory order.
pub fn run_paths(spec: &BatchSpec) -> Result<Vec<Summary>> {
    if spec.paths < 1 {
        return domain("a batch needs at least one path");
    }
    if spec.tail_start >= spec.horizon {
        return domain(format!("tail start {} must precede horizon {}", spec.tail_start, spec.horizon));
    }
    let pert = spec.pert.with_seed(spec.root_seed);
    (0..spec.paths)
        .into_par_iter()
        .map(|i| {
            let sim = Simulation::new(spec.x0, &spec.schedule, &pert, spec.rule, spec.horizon)
                .trajectory(i)
                .criteria(spec.criteria);
            simulate_summary(&sim, spec.tail_start)
        })
        .collect()
}

/// `(q50, q90, q99, max)` of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantiles {
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub max: f64,
}

impl Quantiles {
    /// Nearest-rank quantiles; all `NaN` for an empty sample.
    pub fn from_sample(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| {
            if v.is_empty() {
                f64::NAN
            } else {
                let rank = (q * v.len() as f64).ceil() as usize;
                v[rank.clamp(1, v.len()) - 1]
            }
        };
        Self { q50: at(0.5), q90: at(0.9), q99: at(0.99), max: at(1.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub paths: u64,
    pub fraction_converged_zero: f64,
    pub fraction_converged_nonzero: f64,
    pub fraction_diverged: f64,
    /// Quantiles of `|x_horizon|` over paths that did not diverge.
    pub terminal_abs_quantiles: Quantiles,
    pub freeze_index_histogram: BTreeMap<u64, u64>,
    /// Terminal values of the paths classified as converging to a nonzero limit.
    pub limit_samples: Vec<f64>,
    /// Per-path `sup_{n >= tail_start} |x_n|`.
    pub tail_sups: Vec<f64>,
}

impl EnsembleStats {
    pub fn from_paths(paths: &[Summary]) -> Self {
        let m = paths.len() as f64;
        let frac = |f: &dyn Fn(&LimitClass) -> bool| {
            paths.iter().filter(|p| f(&p.classification)).count() as f64 / m
        };
        let mut freeze_index_histogram = BTreeMap::new();
        for idx in paths.iter().filter_map(|p| p.freeze_index) {
            *freeze_index_histogram.entry(idx).or_insert(0) += 1;
        }
        let terminals: Vec<f64> =
            paths.iter().filter(|p| p.diverged_at.is_none()).map(|p| p.terminal.abs()).collect();
        Self {
            paths: paths.len() as u64,
            fraction_converged_zero: frac(&|c| *c == LimitClass::ConvergedZero),
            fraction_converged_nonzero: frac(&|c| matches!(c, LimitClass::ConvergedNonzero(_))),
            fraction_diverged: frac(&|c| *c == LimitClass::Diverged),
            terminal_abs_quantiles: Quantiles::from_sample(&terminals),
            freeze_index_histogram,
            limit_samples: paths
                .iter()
                .filter_map(|p| match p.classification {
                    LimitClass::ConvergedNonzero(l) => Some(l),
                    _ => None,
                })
                .collect(),
            tail_sups: paths.iter().map(|p| p.tail_sup).collect(),
        }
    }
}

pub fn run_batch(spec: &BatchSpec) -> Result<EnsembleStats> {
    Ok(EnsembleStats::from_paths(&run_paths(spec)?))
}

/// Fraction of paths whose tail supremum is below `eps`.
pub fn empirical_as_convergence(stats: &EnsembleStats, eps: f64) -> f64 {
    if stats.tail_sups.is_empty() {
        return 0.0;
    }
    stats.tail_sups.iter().filter(|&&s| s < eps).count() as f64 / stats.tail_sups.len() as f64
}

/// Running maxima of `xi_n / sqrt(2 ln n)` at `n = N` across an ensemble.
///
/// The ratio's lim sup is 1, but the approach is only logarithmic in `N`,
/// so finite-`N` maxima scatter around values somewhat below or above 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LilSummary {
    pub final_max: Vec<f64>,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

pub fn lil_diagnostic(paths: u64, n_max: u64, root_seed: u64) -> Result<LilSummary> {
    if paths < 1 {
        return domain("the LIL diagnostic needs at least one path");
    }
    let final_max = (0..paths)
        .into_par_iter()
        .map(|i| lil_running_ratio(Noise::GaussianStd, root_seed, i, n_max).map(|t| t.final_max()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(lil_summary(final_max))
}

/// Summarises per-path running maxima computed elsewhere.
pub fn lil_summary(final_max: Vec<f64>) -> LilSummary {
    let mut sorted = final_max.clone();
    sorted.sort_by(f64::total_cmp);
    let len = sorted.len();
    let median = if len % 2 == 1 { sorted[len / 2] } else { 0.5 * (sorted[len / 2 - 1] + sorted[len / 2]) };
    LilSummary { median, min: sorted[0], max: sorted[len - 1], final_max }
}
