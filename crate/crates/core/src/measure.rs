//! CDFs and equal-mass particle systems, and the exact maps between them.

use std::borrow::Cow;

use crate::error::{Error, Result};

/// Midpoint quantile node `(i + 1/2) / n` carried by particle `i` (zero based).
#[inline]
pub fn quantile_node(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64
}

fn check_level(w: f64) -> Result<()> {
    if w > 0.0 && w < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("w", w, "(0, 1)"))
    }
}

/// Anything that can be viewed as a right-continuous step CDF.
pub trait Cdf {
    fn eval(&self, x: f64) -> f64;

    fn step_cdf(&self) -> Cow<'_, StepCdf>;
}

/// Right-continuous nondecreasing step function with limits 0 and 1.
///
/// Takes the value `values[k]` on `[breakpoints[k], breakpoints[k + 1])`, zero to the
/// left of the first breakpoint and exactly one from the last breakpoint on.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCdf {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepCdf {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::InvalidCdf("no breakpoints".into()));
        }
        if breakpoints.len() != values.len() {
            return Err(Error::InvalidCdf(format!(
                "{} breakpoints but {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if let Some(x) = breakpoints.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidCdf(format!("non-finite breakpoint {x}")));
        }
        if let Some(k) = breakpoints.windows(2).position(|p| p[0] >= p[1]) {
            return Err(Error::InvalidCdf(format!(
                "breakpoints not strictly ascending at index {}",
                k + 1
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidCdf(format!("value {v} outside [0, 1]")));
        }
        if let Some(k) = values.windows(2).position(|p| p[0] > p[1]) {
            return Err(Error::InvalidCdf(format!(
                "values decrease at index {}",
                k + 1
            )));
        }
        if values[values.len() - 1] != 1.0 {
            return Err(Error::InvalidCdf("last value must be exactly 1".into()));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    /// CDF of a unit point mass.
    pub fn heaviside(at: f64) -> Self {
        Self {
            breakpoints: vec![at],
            values: vec![1.0],
        }
    }

    /// Uniform distribution on `[a, b]` resolved by `resolution` equal atoms placed at
    /// the midpoints of `resolution` equal cells.
    pub fn uniform(a: f64, b: f64, resolution: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidCdf(format!("bad uniform support [{a}, {b}]")));
        }
        let m = resolution.max(1);
        let (breakpoints, values) = (0..m)
            .map(|k| {
                let x = a + (b - a) * quantile_node(k, m);
                let v = if k + 1 == m { 1.0 } else { (k + 1) as f64 / m as f64 };
                (x, v)
            })
            .unzip();
        Self::new(breakpoints, values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    /// `inf { x : F(x) > w }` for `w` in `(0, 1)`.
    pub fn generalized_inverse(&self, w: f64) -> Result<f64> {
        check_level(w)?;
        Ok(self.quantile_unchecked(w))
    }

    pub(crate) fn quantile_unchecked(&self, w: f64) -> f64 {
        // first level strictly above w; exists because the last value is 1 > w
        let k = self.values.partition_point(|&v| v <= w);
        self.breakpoints[k.min(self.breakpoints.len() - 1)]
    }

    /// Pieces `(level_start, level_end, position)` of the quantile function: on
    /// `[level_start, level_end)` the generalized inverse equals `position`.
    /// Breakpoints without a jump produce no piece.
    pub(crate) fn quantile_pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let mut prev = 0.0;
        self.breakpoints
            .iter()
            .zip(&self.values)
            .filter_map(move |(&x, &v)| {
                let lo = prev;
                prev = v;
                (v > lo).then_some((lo, v, x))
            })
    }
}

impl Cdf for StepCdf {
    fn eval(&self, x: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= x);
        if k == 0 {
            0.0
        } else {
            self.values[k - 1]
        }
    }

    fn step_cdf(&self) -> Cow<'_, StepCdf> {
        Cow::Borrowed(self)
    }
}

/// Equal-mass particle system stored as its sorted quantile samples.
///
/// Particle `i` has mass `1/N` and sits at the value of the quantile function at the
/// midpoint node `w_i = (i + 1/2)/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleQuantiles {
    positions: Vec<f64>,
}

impl ParticleQuantiles {
    /// Validates that `positions` is nonempty, finite and nondecreasing.
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParticles("no particles".into()));
        }
        if let Some(x) = positions.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidParticles(format!("non-finite position {x}")));
        }
        if let Some(k) = positions.windows(2).position(|p| p[0] > p[1]) {
            return Err(Error::InvalidParticles(format!(
                "positions decrease at index {}",
                k + 1
            )));
        }
        Ok(Self { positions })
    }

    /// Sorts (stably) and validates.
    pub fn from_unsorted(mut positions: Vec<f64>) -> Result<Self> {
        positions.sort_by(f64::total_cmp);
        Self::new(positions)
    }

    /// Caller guarantees the invariants.
    pub(crate) fn from_sorted_unchecked(positions: Vec<f64>) -> Self {
        debug_assert!(!positions.is_empty());
        debug_assert!(positions.windows(2).all(|p| p[0] <= p[1]));
        Self { positions }
    }

    /// `n` particles at `at`.
    pub fn dirac(at: f64, n: usize) -> Result<Self> {
        Self::new(vec![at; n])
    }

    /// Midpoint quantile samples `a + (b - a) w_i` of the uniform law on `[a, b]`.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a <= b) {
            return Err(Error::InvalidParticles(format!("bad uniform support [{a}, {b}]")));
        }
        Self::new((0..n).map(|i| a + (b - a) * quantile_node(i, n)).collect())
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn into_positions(self) -> Vec<f64> {
        self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.positions[0]
    }

    pub fn max(&self) -> f64 {
        self.positions[self.positions.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.positions.iter().sum::<f64>() / self.len() as f64
    }

    pub fn shifted(&self, by: f64) -> Self {
        Self::from_sorted_unchecked(self.positions.iter().map(|x| x + by).collect())
    }

    pub fn to_step_cdf(&self) -> StepCdf {
        cdf_from_particles(self)
    }

    pub fn moment(&self, p: f64) -> f64 {
        moment(self, p)
    }

    pub fn tail_moment(&self, p: f64, radius: f64) -> f64 {
        tail_moment(self, p, radius)
    }
}

impl Cdf for ParticleQuantiles {
    fn eval(&self, x: f64) -> f64 {
        self.positions.partition_point(|&y| y <= x) as f64 / self.len() as f64
    }

    fn step_cdf(&self) -> Cow<'_, StepCdf> {
        Cow::Owned(cdf_from_particles(self))
    }
}

/// Step CDF with a jump of `multiplicity / N` at each distinct particle position.
pub fn cdf_from_particles(pq: &ParticleQuantiles) -> StepCdf {
    let n = pq.len();
    let mut breakpoints = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let xs = pq.positions();
    let mut i = 0;
    while i < n {
        let x = xs[i];
        while i < n && xs[i] == x {
            i += 1;
        }
        breakpoints.push(x);
        values.push(i as f64 / n as f64);
    }
    StepCdf {
        breakpoints,
        values,
    }
}

/// Samples the generalized inverse of `cdf` at the `n` midpoint nodes.
pub fn particles_from_cdf(cdf: &StepCdf, n: usize) -> Result<ParticleQuantiles> {
    if n == 0 {
        return Err(Error::InvalidParticles("no particles".into()));
    }
    let positions = (0..n)
        .map(|i| cdf.quantile_unchecked(quantile_node(i, n)))
        .collect();
    Ok(ParticleQuantiles::from_sorted_unchecked(positions))
}

/// `(1/N) sum |x_i|^p`.
pub fn moment(pq: &ParticleQuantiles, p: f64) -> f64 {
    pq.positions.iter().fold(0.0, |acc, x| acc + x.abs().powf(p)) / pq.len() as f64
}

/// `(1/N) sum_{|x_i| >= R} |x_i|^p`.
pub fn tail_moment(pq: &ParticleQuantiles, p: f64, radius: f64) -> f64 {
    pq.positions
        .iter()
        .filter(|x| x.abs() >= radius)
        .fold(0.0, |acc, x| acc + x.abs().powf(p))
        / pq.len() as f64
}

/// `(1 - s) F_low + s F_high`: the CDF of the scheme between two grid times.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureState {
    low: ParticleQuantiles,
    high: ParticleQuantiles,
    s: f64,
}

impl MixtureState {
    pub fn new(low: ParticleQuantiles, high: ParticleQuantiles, s: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&s) {
            return Err(Error::domain("s", s, "[0, 1)"));
        }
        if low.len() != high.len() {
            return Err(Error::SizeMismatch {
                left: low.len(),
                right: high.len(),
            });
        }
        Ok(Self { low, high, s })
    }

    /// The plain particle system as a (trivial) mixture.
    pub fn pure(pq: ParticleQuantiles) -> Self {
        Self {
            low: pq.clone(),
            high: pq,
            s: 0.0,
        }
    }

    pub fn low(&self) -> &ParticleQuantiles {
        &self.low
    }

    pub fn high(&self) -> &ParticleQuantiles {
        &self.high
    }

    pub fn weight(&self) -> f64 {
        self.s
    }

    /// Exact generalized inverse of the mixture CDF.
    pub fn quantile(&self, w: f64) -> Result<f64> {
        mixture_quantile(self, w)
    }

    /// Merged step structure over the union of both particle sets.
    pub fn to_step_cdf(&self) -> StepCdf {
        let n = self.low.len();
        let (lo, hi) = (self.low.positions(), self.high.positions());
        let (a, b) = (1.0 - self.s, self.s);
        let mut breakpoints = Vec::with_capacity(2 * n);
        let mut values = Vec::with_capacity(2 * n);
        let (mut i, mut j) = (0, 0);
        while i < n || j < n {
            let x = match (lo.get(i), hi.get(j)) {
                (Some(&u), Some(&v)) => u.min(v),
                (Some(&u), None) => u,
                (None, Some(&v)) => v,
                (None, None) => unreachable!(),
            };
            while i < n && lo[i] == x {
                i += 1;
            }
            while j < n && hi[j] == x {
                j += 1;
            }
            let v = a * (i as f64 / n as f64) + b * (j as f64 / n as f64);
            breakpoints.push(x);
            values.push(v.min(1.0));
        }
        *values.last_mut().expect("nonempty") = 1.0;
        StepCdf {
            breakpoints,
            values,
        }
    }
}

impl Cdf for MixtureState {
    fn eval(&self, x: f64) -> f64 {
        let fl = self.low.eval(x);
        let fh = self.high.eval(x);
        ((1.0 - self.s) * fl + self.s * fh).min(1.0)
    }

    fn step_cdf(&self) -> Cow<'_, StepCdf> {
        Cow::Owned(self.to_step_cdf())
    }
}

pub fn eval_cdf<C: Cdf + ?Sized>(cdf: &C, x: f64) -> f64 {
    cdf.eval(x)
}

pub fn generalized_inverse(cdf: &StepCdf, w: f64) -> Result<f64> {
    cdf.generalized_inverse(w)
}

pub fn mixture_quantile(ms: &MixtureState, w: f64) -> Result<f64> {
    check_level(w)?;
    if ms.s == 0.0 {
        return Ok(ms.low.to_step_cdf().quantile_unchecked(w));
    }
    Ok(ms.to_step_cdf().quantile_unchecked(w))
}
