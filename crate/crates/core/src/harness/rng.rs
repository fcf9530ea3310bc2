//! Pinned pseudo-random source for reproducible initial data.
//!
//! 64-bit LCG `state <- state * 6364136223846793005 + 1442695040888963407 (mod 2^64)`;
//! a uniform draw on `[0, 1)` is the top 53 bits of the updated state times `2^-53`.

use crate::error::Result;
use crate::measure::{ParticleQuantiles, StepCdf};

pub const LCG_MULTIPLIER: u64 = 6_364_136_223_846_793_005;
pub const LCG_INCREMENT: u64 = 1_442_695_040_888_963_407;

#[derive(Debug, Clone)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(LCG_MULTIPLIER)
            .wrapping_add(LCG_INCREMENT);
        self.state
    }

    /// Uniform on `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform index below `n` (`n > 0`).
    pub fn index(&mut self, n: usize) -> usize {
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }
}

/// Parameters of the random initial datum: half the mass uniform on `[lo, hi]`, half
/// split evenly (in expectation) over `atoms` point masses placed uniformly in
/// `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSpec {
    pub seed: u64,
    pub lo: f64,
    pub hi: f64,
    pub atoms: usize,
}

impl RandomSpec {
    pub const DEFAULT_LO: f64 = -2.0;
    pub const DEFAULT_HI: f64 = 2.0;
    pub const DEFAULT_ATOMS: usize = 4;

    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            lo: Self::DEFAULT_LO,
            hi: Self::DEFAULT_HI,
            atoms: Self::DEFAULT_ATOMS,
        }
    }

    /// Draw order: the atom positions first, then per particle one draw choosing the
    /// component (`< 0.5` is the uniform part, or always uniform when there are no
    /// atoms) and one draw for the position or the atom index. The result is sorted.
    pub fn sample(&self, n: usize) -> Result<ParticleQuantiles> {
        let mut rng = Lcg64::new(self.seed);
        let atoms: Vec<f64> = (0..self.atoms).map(|_| rng.uniform(self.lo, self.hi)).collect();
        let positions = (0..n)
            .map(|_| {
                let pick = rng.next_f64();
                if atoms.is_empty() || pick < 0.5 {
                    rng.uniform(self.lo, self.hi)
                } else {
                    atoms[rng.index(atoms.len())]
                }
            })
            .collect();
        ParticleQuantiles::from_unsorted(positions)
    }
}

/// Step CDF with `atoms` jumps at uniform positions in `[lo, hi)` and uniform random
/// masses (normalized).
pub fn random_step_cdf(rng: &mut Lcg64, atoms: usize, lo: f64, hi: f64) -> Result<StepCdf> {
    let mut points: Vec<f64> = (0..atoms.max(1)).map(|_| rng.uniform(lo, hi)).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let masses: Vec<f64> = points.iter().map(|_| 0.05 + rng.next_f64()).collect();
    let total: f64 = masses.iter().sum();
    let mut acc = 0.0;
    let mut values: Vec<f64> = masses
        .iter()
        .map(|m| {
            acc += m;
            (acc / total).min(1.0)
        })
        .collect();
    *values.last_mut().expect("at least one atom") = 1.0;
    StepCdf::new(points, values)
}
