//! Noise sources and their reproducible streams.
//!
//! Every `(seed, trajectory_index)` pair owns a ChaCha8 stream: the 64-bit
//! seed is expanded with `SeedableRng::seed_from_u64` and the trajectory
//! index selects the ChaCha stream id. The draw for index `n` always occupies
//! 32-bit words `4n..4n+4` of that stream (two `u64`s), so `xi_n` can be
//! computed directly from `(seed, trajectory_index, n)` and a sequential
//! sweep produces the same values as random access.
//!
//! Uniform draws use the top 53 bits of the first `u64`. Gaussian draws use
//! the cosine branch of Box-Muller on both `u64`s.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{domain, Result};

const WORDS_PER_DRAW: u128 = 4;
const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Distribution of `xi_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Noise {
    /// `xi_n = +1` or `-1` for every `n`.
    UnitConstant(Sign),
    /// Uniform on `[-1, 1)`.
    BoundedUniform,
    /// Standard normal.
    GaussianStd,
}

impl Noise {
    pub fn is_bounded(self) -> bool {
        !matches!(self, Noise::GaussianStd)
    }
}

/// Sequential access to `xi_n` for one trajectory.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    noise: Noise,
    rng: ChaCha8Rng,
    next_n: u64,
}

impl NoiseStream {
    pub fn new(noise: Noise, seed: u64, trajectory_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trajectory_index);
        Self { noise, rng, next_n: 0 }
    }

    /// `xi_n`. Consecutive indices read the stream sequentially; any other
    /// index repositions it first.
    pub fn xi(&mut self, n: u64) -> f64 {
        if let Noise::UnitConstant(sign) = self.noise {
            return sign.value();
        }
        if n != self.next_n {
            self.rng.set_word_pos(u128::from(n) * WORDS_PER_DRAW);
        }
        self.next_n = n + 1;
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        match self.noise {
            Noise::BoundedUniform => 2.0 * unit_interval(a) - 1.0,
            Noise::GaussianStd => {
                // 1 - u lies in (0, 1], so the log is finite
                let r = (-2.0 * (1.0 - unit_interval(a)).ln()).sqrt();
                r * (std::f64::consts::TAU * unit_interval(b)).cos()
            }
            Noise::UnitConstant(_) => unreachable!(),
        }
    }
}

fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * TWO_POW_M53
}

/// `xi_n / sqrt(2 ln n)` for `n >= 2` with its running maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct LilTrace {
    /// `ratios[i]` belongs to index `n = i + 2`.
    pub ratios: Vec<f64>,
    pub running_max: Vec<f64>,
}

impl LilTrace {
    /// Builds the trace from `xi_2, xi_3, ...`.
    pub fn from_draws(draws: impl IntoIterator<Item = f64>) -> Self {
        let mut ratios = Vec::new();
        let mut running_max = Vec::new();
        let mut best = f64::NEG_INFINITY;
        for (i, xi) in draws.into_iter().enumerate() {
            let n = (i + 2) as f64;
            let r = xi / (2.0 * n.ln()).sqrt();
            best = best.max(r);
            ratios.push(r);
            running_max.push(best);
        }
        Self { ratios, running_max }
    }

    pub fn final_max(&self) -> f64 {
        self.running_max.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

/// The LIL diagnostic for one Gaussian trajectory, `n = 2..=n_max`.
pub fn lil_running_ratio(noise: Noise, seed: u64, trajectory_index: u64, n_max: u64) -> Result<LilTrace> {
    if noise != Noise::GaussianStd {
        return domain("the LIL diagnostic needs standard Gaussian noise");
    }
    if n_max < 2 {
        return domain("the LIL diagnostic needs n_max >= 2");
    }
    let mut stream = NoiseStream::new(noise, seed, trajectory_index);
    Ok(LilTrace::from_draws((2..=n_max).map(|n| stream.xi(n))))
}
