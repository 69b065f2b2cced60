//! Fixed workloads shared by the benchmarks.

use cubic_core::{BatchSpec, Envelope, Noise, PerturbationSpec, Schedule, StoppingRule};

/// The two-schedule deterministic workload of the first figure.
pub fn power_law_schedules() -> [Schedule; 2] {
    [Schedule::power_law(10.0, 0).unwrap(), Schedule::power_law(0.1, 0).unwrap()]
}

/// A stochastic batch on the figure schedule with the `CompRho` envelope.
pub fn figure_batch(beta: f64, rule: StoppingRule, horizon: u64, paths: u64) -> BatchSpec {
    let pert = PerturbationSpec::new(Envelope::CompRho { k: 1, beta }, Noise::GaussianStd, 0).unwrap();
    BatchSpec::new(2.5, Schedule::shifted_super_exp(1).unwrap(), pert, rule, horizon, paths, 1729)
}
