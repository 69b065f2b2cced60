//! Simulation and bound checking for the cubic recurrence
//! `x_{n+1} = x_n (1 - h_n x_n^2) + u_{n+1}` with decreasing timesteps `h_n`
//! and super-exponentially fading perturbations `u_n`.
//!
//! - [`seqcore`]: timestep schedules, iterated logarithms and series bounds.
//! - [`perturb`]: envelopes, seeded noise streams and compatibility checks.
//! - [`dynamics`]: the recurrence engine, freezing rules and limit classes.
//! - [`analysis`]: log-domain arithmetic and the a-priori bounds.
//! - [`montecarlo`]: ensembles and the iterated-logarithm diagnostic.
//! - [`verify`]: seeded property suites.

pub mod analysis;
pub mod dynamics;
mod error;
pub mod montecarlo;
pub mod perturb;
pub mod seqcore;
pub mod verify;

pub use analysis::LogMag;
pub use dynamics::{LimitClass, LimitCriteria, StoppingRule, Trajectory};
pub use error::{Error, Result};
pub use montecarlo::{BatchSpec, EnsembleStats};
pub use perturb::{Envelope, Noise, PerturbationSpec, Sign};
pub use seqcore::{HepCase, Schedule, ScheduleKind};
