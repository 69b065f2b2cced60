use std::collections::VecDeque;

use super::{
    apply_freeze, classify_tail, find_n4, max_increment, step_map, LimitClass, LimitCriteria, StepFn,
    StoppingRule, OVERFLOW_GUARD,
};
use crate::error::{domain, Result};
use crate::perturb::{NoiseStream, PerturbationSpec};
use crate::seqcore::Schedule;

/// Root seed and stream index a trajectory was drawn with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedInfo {
    pub seed: u64,
    pub trajectory_index: u64,
}

/// Inputs of one run.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    pub x0: f64,
    pub schedule: &'a Schedule,
    pub pert: &'a PerturbationSpec,
    pub rule: StoppingRule,
    /// Index of the last state computed.
    pub horizon: u64,
    pub trajectory_index: u64,
    pub criteria: LimitCriteria,
    pub step_fn: StepFn,
}

impl<'a> Simulation<'a> {
    pub fn new(
        x0: f64,
        schedule: &'a Schedule,
        pert: &'a PerturbationSpec,
        rule: StoppingRule,
        horizon: u64,
    ) -> Self {
        Self {
            x0,
            schedule,
            pert,
            rule,
            horizon,
            trajectory_index: 0,
            criteria: LimitCriteria::default(),
            step_fn: step_map,
        }
    }

    pub fn trajectory(mut self, index: u64) -> Self {
        self.trajectory_index = index;
        self
    }

    pub fn criteria(mut self, criteria: LimitCriteria) -> Self {
        self.criteria = criteria;
        self
    }

    pub fn step_fn(mut self, f: StepFn) -> Self {
        self.step_fn = f;
        self
    }

    pub fn seed_info(&self) -> SeedInfo {
        SeedInfo { seed: self.pert.seed(), trajectory_index: self.trajectory_index }
    }

    pub fn stepper(&self) -> Result<Stepper<'a>> {
        if self.horizon < 1 {
            return domain("horizon must be at least 1");
        }
        if self.horizon < self.schedule.origin() {
            return domain(format!(
                "horizon {} precedes schedule origin {}",
                self.horizon,
                self.schedule.origin()
            ));
        }
        if !self.x0.is_finite() {
            return domain(format!("initial value {} is not finite", self.x0));
        }
        let origin = self.schedule.origin();
        let blown = self.x0.abs() > OVERFLOW_GUARD;
        Ok(Stepper {
            schedule: self.schedule,
            pert: self.pert,
            rule: self.rule,
            horizon: self.horizon,
            step_fn: self.step_fn,
            stream: self.pert.stream(self.trajectory_index),
            n: origin,
            x: self.x0,
            h_zero: false,
            noise_gone: self.pert.is_zero(),
            frozen: None,
            freeze_index: None,
            first_small_step_index: None,
            diverged_at: blown.then_some(origin),
            done: blown,
        })
    }
}

/// One completed step: the new state `x_n` and what produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub n: u64,
    pub x: f64,
    /// `hat_h_{n-1}`.
    pub h_applied: f64,
    /// `u_n`.
    pub u: f64,
    /// Whether `hat_h_{n-1}` was a frozen value.
    pub frozen: bool,
}

/// Streaming iterator over the steps of a run.
///
/// The iterator ends at the horizon or at the first state that is not finite
/// or exceeds [`OVERFLOW_GUARD`]; that state is not yielded and its index is
/// reported by [`Stepper::diverged_at`].
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    schedule: &'a Schedule,
    pert: &'a PerturbationSpec,
    rule: StoppingRule,
    horizon: u64,
    step_fn: StepFn,
    stream: NoiseStream,
    n: u64,
    x: f64,
    h_zero: bool,
    noise_gone: bool,
    frozen: Option<f64>,
    freeze_index: Option<u64>,
    first_small_step_index: Option<u64>,
    diverged_at: Option<u64>,
    done: bool,
}

impl Stepper<'_> {
    pub fn freeze_index(&self) -> Option<u64> {
        self.freeze_index
    }

    pub fn first_small_step_index(&self) -> Option<u64> {
        self.first_small_step_index
    }

    pub fn diverged_at(&self) -> Option<u64> {
        self.diverged_at
    }

    /// Index and value of the current state.
    pub fn state(&self) -> (u64, f64) {
        (self.n, self.x)
    }

    fn schedule_step(&mut self, n: u64) -> f64 {
        if self.h_zero {
            return 0.0;
        }
        // non-increasing, so zero stays zero
        let h = self.schedule.step_at(n);
        self.h_zero = h == 0.0;
        h
    }

    fn perturbation(&mut self, n: u64) -> f64 {
        if self.noise_gone {
            return 0.0;
        }
        let env = self.pert.envelope();
        if env.vanishes_from(n) {
            self.noise_gone = true;
            return 0.0;
        }
        let rho = env.envelope(n);
        if rho == 0.0 {
            0.0
        } else {
            rho * self.stream.xi(n)
        }
    }

    fn note_small(&mut self, n: u64, x: f64, h: f64) {
        if self.first_small_step_index.is_none() && find_n4(x, h) {
            self.first_small_step_index = Some(n);
        }
    }
}

impl Iterator for Stepper<'_> {
    type Item = Step;

    fn next(&mut self) -> Option<Step> {
        if self.done {
            return None;
        }
        let (n, x) = (self.n, self.x);
        let h = self.schedule_step(n);
        self.note_small(n, x, h);
        if n >= self.horizon {
            self.done = true;
            return None;
        }
        let mut exact = false;
        if self.frozen.is_none() && self.rule.triggers(x, h) {
            self.frozen = Some(apply_freeze(self.rule, x, h));
            self.freeze_index = Some(n);
            exact = self.rule == StoppingRule::FreezeAtN4Reciprocal;
        }
        let h_applied = self.frozen.unwrap_or(h);
        let u = self.perturbation(n + 1);
        // hat_h x^2 = 1 at the reciprocal freeze, so only u survives
        let next = if exact { u } else { (self.step_fn)(x, h_applied, u) };
        if !next.is_finite() || next.abs() > OVERFLOW_GUARD {
            self.diverged_at = Some(n + 1);
            self.done = true;
            return None;
        }
        self.n = n + 1;
        self.x = next;
        Some(Step { n: n + 1, x: next, h_applied, u, frozen: self.frozen.is_some() })
    }
}

/// A fully recorded run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Index of `x[0]`.
    pub origin: u64,
    pub x: Vec<f64>,
    /// `h_applied[i]` carries `x[i]` to `x[i + 1]`.
    pub h_applied: Vec<f64>,
    /// `u[i]` was added to produce `x[i]`; `u[0] = 0`.
    pub u: Vec<f64>,
    pub freeze_index: Option<u64>,
    pub first_small_step_index: Option<u64>,
    pub diverged_at: Option<u64>,
    pub classification: LimitClass,
    pub seed_info: SeedInfo,
}

impl Trajectory {
    pub fn last_index(&self) -> u64 {
        self.origin + self.x.len() as u64 - 1
    }

    pub fn terminal(&self) -> f64 {
        *self.x.last().unwrap()
    }

    /// `x_n` if it was recorded.
    pub fn x_at(&self, n: u64) -> Option<f64> {
        n.checked_sub(self.origin).and_then(|i| self.x.get(i as usize).copied())
    }

    /// Whether the step leaving index `n` used a frozen value.
    pub fn is_frozen_at(&self, n: u64) -> bool {
        self.freeze_index.is_some_and(|f| n >= f)
    }

    /// Largest increment over the last `window` steps.
    pub fn tail_increment(&self, window: usize) -> f64 {
        let start = self.x.len().saturating_sub(window + 1);
        max_increment(&self.x[start..])
    }
}

/// Terminal statistics of a run recorded without storing the path.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub origin: u64,
    pub last_index: u64,
    pub terminal: f64,
    /// The last `window + 1` states, oldest first.
    pub tail: Vec<f64>,
    /// `sup |x_n|` over recorded `n >= tail_start`; `inf` after divergence.
    pub tail_sup: f64,
    pub freeze_index: Option<u64>,
    pub first_small_step_index: Option<u64>,
    pub diverged_at: Option<u64>,
    pub classification: LimitClass,
    pub seed_info: SeedInfo,
}

impl Summary {
    pub fn tail_increment(&self) -> f64 {
        max_increment(&self.tail)
    }
}

pub fn simulate(
    x0: f64,
    schedule: &Schedule,
    pert: &PerturbationSpec,
    rule: StoppingRule,
    horizon: u64,
    trajectory_index: u64,
) -> Result<Trajectory> {
    simulate_with(&Simulation::new(x0, schedule, pert, rule, horizon).trajectory(trajectory_index))
}

pub fn simulate_with(sim: &Simulation<'_>) -> Result<Trajectory> {
    let mut stepper = sim.stepper()?;
    let cap = (sim.horizon - sim.schedule.origin()) as usize + 1;
    let mut x = Vec::with_capacity(cap);
    let mut h_applied = Vec::with_capacity(cap);
    let mut u = Vec::with_capacity(cap);
    x.push(sim.x0);
    u.push(0.0);
    for step in stepper.by_ref() {
        x.push(step.x);
        h_applied.push(step.h_applied);
        u.push(step.u);
    }
    let mut traj = Trajectory {
        origin: sim.schedule.origin(),
        x,
        h_applied,
        u,
        freeze_index: stepper.freeze_index(),
        first_small_step_index: stepper.first_small_step_index(),
        diverged_at: stepper.diverged_at(),
        classification: LimitClass::Undetermined,
        seed_info: sim.seed_info(),
    };
    traj.classification = super::detect_limit(&traj, &sim.criteria);
    Ok(traj)
}

/// Runs to the horizon keeping only the tail window and running statistics.
pub fn simulate_summary(sim: &Simulation<'_>, tail_start: u64) -> Result<Summary> {
    simulate_observed(sim, tail_start, |_| {})
}

/// [`simulate_summary`] that also hands every step to `observe` as it is made.
pub fn simulate_observed(
    sim: &Simulation<'_>,
    tail_start: u64,
    mut observe: impl FnMut(&Step),
) -> Result<Summary> {
    let mut stepper = sim.stepper()?;
    let keep = sim.criteria.window + 1;
    let mut tail = VecDeque::with_capacity(keep + 1);
    let origin = sim.schedule.origin();
    tail.push_back(sim.x0);
    let mut tail_sup: f64 = if origin >= tail_start { sim.x0.abs() } else { 0.0 };
    let mut last_index = origin;
    for step in stepper.by_ref() {
        observe(&step);
        if tail.len() == keep {
            tail.pop_front();
        }
        tail.push_back(step.x);
        if step.n >= tail_start {
            tail_sup = tail_sup.max(step.x.abs());
        }
        last_index = step.n;
    }
    let tail: Vec<f64> = tail.into();
    let diverged_at = stepper.diverged_at();
    let classification = if diverged_at.is_some() {
        tail_sup = f64::INFINITY;
        LimitClass::Diverged
    } else {
        classify_tail(&tail, &sim.criteria)
    };
    Ok(Summary {
        origin,
        last_index,
        terminal: *tail.last().unwrap(),
        tail,
        tail_sup,
        freeze_index: stepper.freeze_index(),
        first_small_step_index: stepper.first_small_step_index(),
        diverged_at,
        classification,
        seed_info: sim.seed_info(),
    })
}
