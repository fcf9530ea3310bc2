//! Viscous variant: a transport-collapse step followed by heat-kernel smoothing.
//!
//! The heat kernel for diffusion time `nu h` is a centered Gaussian of variance
//! `2 nu h`. Smoothing a particle system gives a continuous, strictly increasing CDF
//! whose midpoint quantiles are the new particle system.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::measure::{quantile_node, ParticleQuantiles};
use crate::transport::{check_step, th_step, SchemeState, Stepper, Trajectory};

mod grid;

use grid::TaylorGrid;

pub const DEFAULT_TOL: f64 = 1e-10;

/// Iteration cap of the bracketing solver.
pub const MAX_ITERATIONS: usize = 200;

const MAX_WIDENINGS: usize = 128;

// Kernel terms further than this many standard deviations away are exactly 0 or 1 at
// the precision the inversion works to (Phi(-8.5) < 1e-17).
const CUTOFF: f64 = 8.5;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

#[inline]
fn std_normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

fn std_normal_quantile(w: f64) -> f64 {
    Normal::standard().inverse_cdf(w)
}

/// Kernel standard deviation for one step of length `h` at diffusivity `nu`.
pub fn kernel_sigma(nu: f64, h: f64) -> f64 {
    (2.0 * nu * h).sqrt()
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("tol", tol, "(0, inf)"))
    }
}

/// `F(x) = (1/N) sum_j Phi((x - x_j) / sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedCdf {
    centers: ParticleQuantiles,
    sigma: f64,
}

impl SmoothedCdf {
    pub fn new(centers: ParticleQuantiles, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain("sigma", sigma, "(0, inf)"));
        }
        Ok(Self { centers, sigma })
    }

    pub fn centers(&self) -> &ParticleQuantiles {
        &self.centers
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn window(&self, x: f64) -> (usize, usize) {
        let xs = self.centers.positions();
        let reach = CUTOFF * self.sigma;
        let below = xs.partition_point(|&c| c < x - reach);
        let end = below + xs[below..].partition_point(|&c| c <= x + reach);
        (below, end)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let xs = self.centers.positions();
        let (below, end) = self.window(x);
        let inv = 1.0 / self.sigma;
        let near: f64 = xs[below..end]
            .iter()
            .map(|&c| std_normal_cdf((x - c) * inv))
            .sum();
        (below as f64 + near) / xs.len() as f64
    }

    /// `(F(x), F'(x))`.
    pub fn eval_with_density(&self, x: f64) -> (f64, f64) {
        let xs = self.centers.positions();
        let (below, end) = self.window(x);
        let inv = 1.0 / self.sigma;
        let (mut cdf, mut pdf) = (below as f64, 0.0);
        for &c in &xs[below..end] {
            let z = (x - c) * inv;
            cdf += std_normal_cdf(z);
            pdf += std_normal_pdf(z);
        }
        let n = xs.len() as f64;
        (cdf / n, pdf * inv / n)
    }

    /// The `x` with `F(x) = w`, to within a bracket of width `tol`.
    pub fn quantile(&self, w: f64, tol: f64) -> Result<f64> {
        check_tol(tol)?;
        if !(w > 0.0 && w < 1.0) {
            return Err(Error::domain("w", w, "(0, 1)"));
        }
        let guess = self.centers.positions()[((w * self.centers.len() as f64) as usize)
            .min(self.centers.len() - 1)];
        self.solve(&|x| self.eval_with_density(x), w, tol, f64::NEG_INFINITY, guess)
            .map(|(x, _)| x)
    }

    fn initial_bracket(&self, w: f64) -> (f64, f64) {
        // Phi((x - max)/sigma) <= F(x) <= Phi((x - min)/sigma); away from the extreme
        // levels the cutoff already brackets and the inverse normal is not needed
        let (zlo, zhi) = if w > 1e-12 && w < 1.0 - 1e-12 {
            (-CUTOFF, CUTOFF)
        } else {
            let z = std_normal_quantile(w);
            (z, z)
        };
        (
            self.centers.min() + self.sigma * zlo - 1.0,
            self.centers.max() + self.sigma * zhi + 1.0,
        )
    }

    fn widen<E>(&self, ev: &E, w: f64, mut lo: f64, mut hi: f64) -> Result<(f64, f64)>
    where
        E: Fn(f64) -> (f64, f64),
    {
        let mut step = (hi - lo).max(1.0);
        let mut ok = false;
        for _ in 0..MAX_WIDENINGS {
            let (flo, fhi) = (ev(lo).0, ev(hi).0);
            if flo < w && fhi >= w {
                ok = true;
                break;
            }
            if !(flo < w) {
                lo -= step;
            }
            if !(fhi >= w) {
                hi += step;
            }
            step *= 2.0;
        }
        if ok && lo.is_finite() && hi.is_finite() {
            Ok((lo, hi))
        } else {
            Err(Error::BracketFailure {
                w,
                widenings: MAX_WIDENINGS,
            })
        }
    }

    // Newton steps safeguarded by a bracket that every evaluation tightens; stops once
    // the bracket is no wider than tol and returns its midpoint.
    // Also returns the density at the last evaluation (NaN after a bisection fallback).
    fn solve<E>(&self, ev: &E, w: f64, tol: f64, floor: f64, guess: f64) -> Result<(f64, f64)>
    where
        E: Fn(f64) -> (f64, f64),
    {
        let (mut lo, mut hi) = self.initial_bracket(w);
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::BracketFailure { w, widenings: 0 });
        }
        lo = lo.max(floor);
        let (mut seen_below, mut seen_above) = (false, false);
        let mut x = if guess > lo && guess < hi {
            guess
        } else {
            0.5 * (lo + hi)
        };
        for _ in 0..MAX_ITERATIONS {
            let (fx, dens) = ev(x);
            if fx.is_nan() {
                return Err(Error::BracketFailure { w, widenings: 0 });
            }
            if fx < w {
                lo = x;
                seen_below = true;
            } else {
                hi = x;
                seen_above = true;
            }
            if hi - lo <= tol {
                if seen_below && seen_above {
                    return Ok((0.5 * (lo + hi), dens));
                }
                // an endpoint was never confirmed: fall back to a checked bracket
                let (l, h) = self.widen(ev, w, lo - tol, hi + tol)?;
                return Ok((self.bisect(ev, w, tol, l, h)?, f64::NAN));
            }
            let mut next = if dens > 0.0 { x - (fx - w) / dens } else { f64::NAN };
            if (next - x).abs() < 0.25 * tol {
                next = if fx < w { x + 0.5 * tol } else { x - 0.5 * tol };
            }
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            x = next;
        }
        Err(Error::BracketFailure { w, widenings: 0 })
    }

    fn bisect<E>(&self, ev: &E, w: f64, tol: f64, mut lo: f64, mut hi: f64) -> Result<f64>
    where
        E: Fn(f64) -> (f64, f64),
    {
        for _ in 0..MAX_ITERATIONS {
            if hi - lo <= tol {
                return Ok(0.5 * (lo + hi));
            }
            let mid = 0.5 * (lo + hi);
            if ev(mid).0 < w {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::BracketFailure { w, widenings: 0 })
    }

    /// Quantiles at all `n` midpoint nodes.
    pub fn resample(&self, n: usize, tol: f64) -> Result<ParticleQuantiles> {
        check_tol(tol)?;
        if n == 0 {
            return Err(Error::InvalidParticles("no particles".into()));
        }
        let m = self.centers.len();
        let xs = self.centers.positions();
        let grid = TaylorGrid::build(xs, self.sigma);
        let ev = |x: f64| match grid.as_ref().and_then(|g| g.eval_with_density(x)) {
            Some(v) => v,
            None => self.eval_with_density(x),
        };
        let mut out: Vec<f64> = Vec::with_capacity(n);
        let mut prev: Option<(f64, f64, f64)> = None;
        for i in 0..n {
            let w = quantile_node(i, n);
            let anchor = xs[((w * m as f64) as usize).min(m - 1)];
            let (floor, guess) = match prev {
                // F(prev - tol) <= w_{i-1} < w_i
                Some((root, w_prev, dens)) => {
                    let predicted = if dens > 0.0 { root + (w - w_prev) / dens } else { anchor };
                    (root - tol, predicted)
                }
                None => (f64::NEG_INFINITY, anchor),
            };
            let (root, dens) = self.solve(&ev, w, tol, floor, guess)?;
            out.push(root);
            prev = Some((root, w, dens));
        }
        // midpoints of tol-brackets may tie-break out of order by less than tol
        for i in 1..out.len() {
            if out[i] < out[i - 1] {
                out[i] = out[i - 1];
            }
        }
        ParticleQuantiles::new(out)
    }
}

pub fn smoothed_cdf_eval(sc: &SmoothedCdf, x: f64) -> f64 {
    sc.eval(x)
}

pub fn smoothed_quantile(sc: &SmoothedCdf, w: f64, tol: f64) -> Result<f64> {
    sc.quantile(w, tol)
}

/// Midpoint quantiles of the particle system convolved with `N(0, sigma^2)`.
pub fn heat_resample(pq: &ParticleQuantiles, sigma: f64, tol: f64) -> Result<ParticleQuantiles> {
    SmoothedCdf::new(pq.clone(), sigma)?.resample(pq.len(), tol)
}

pub fn viscous_step(
    pq: &ParticleQuantiles,
    flux: &FluxModel,
    h: f64,
    nu: f64,
    tol: f64,
) -> Result<ParticleQuantiles> {
    check_step(h)?;
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::domain("nu", nu, "(0, inf)"));
    }
    heat_resample(&th_step(pq, flux, h), kernel_sigma(nu, h), tol)
}

/// Transport-collapse followed by heat smoothing over diffusion time `nu h`.
#[derive(Debug, Clone)]
pub struct ViscousTransportCollapse {
    flux: FluxModel,
    h: f64,
    nu: f64,
    tol: f64,
}

impl ViscousTransportCollapse {
    pub fn new(flux: FluxModel, h: f64, nu: f64, tol: f64) -> Result<Self> {
        check_step(h)?;
        check_tol(tol)?;
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::domain("nu", nu, "(0, inf)"));
        }
        Ok(Self { flux, h, nu, tol })
    }

    pub fn sigma(&self) -> f64 {
        kernel_sigma(self.nu, self.h)
    }
}

impl Stepper for ViscousTransportCollapse {
    fn step(&self, pq: &ParticleQuantiles) -> Result<ParticleQuantiles> {
        heat_resample(&th_step(pq, &self.flux, self.h), self.sigma(), self.tol)
    }

    fn step_size(&self) -> f64 {
        self.h
    }

    fn flux(&self) -> &FluxModel {
        &self.flux
    }
}

pub fn evolve_viscous(
    pq0: &ParticleQuantiles,
    flux: &FluxModel,
    h: f64,
    nu: f64,
    t: f64,
    tol: f64,
) -> Result<SchemeState> {
    let stepper = ViscousTransportCollapse::new(flux.clone(), h, nu, tol)?;
    Trajectory::new(stepper, pq0.clone())?.state_at(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wasserstein::{wp_particles, OrderP};

    // tabulated standard normal values
    const PHI_1: f64 = 0.841_344_746_068_542_9;
    const Z_075: f64 = 0.674_489_750_196_081_7;

    fn dirac(n: usize) -> ParticleQuantiles {
        ParticleQuantiles::dirac(0.0, n).unwrap()
    }

    #[test]
    fn cdf_examples() {
        let sc = SmoothedCdf::new(dirac(5), 1.0).unwrap();
        assert_eq!(sc.eval(0.0), 0.5);
        assert_eq!(sc.eval(-1e3), 0.0);
        assert!((sc.eval(1.0) - PHI_1).abs() < 1e-14);
        assert!(SmoothedCdf::new(dirac(2), 0.0).is_err());
    }

    #[test]
    fn cdf_is_strictly_increasing_near_the_mass() {
        let pq = ParticleQuantiles::new(vec![-1.0, 0.0, 0.0, 2.5]).unwrap();
        let sc = SmoothedCdf::new(pq, 0.3).unwrap();
        let vals: Vec<f64> = (0..200).map(|k| sc.eval(-2.0 + k as f64 * 0.03)).collect();
        assert!(vals.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn quantile_examples() {
        let tol = 1e-10;
        let sc = SmoothedCdf::new(dirac(3), 1.0).unwrap();
        assert!(sc.quantile(0.5, tol).unwrap().abs() <= tol);
        assert!((sc.quantile(0.75, tol).unwrap() - Z_075).abs() <= tol);
        assert!(sc.quantile(0.5, 0.0).is_err());
        assert!(sc.quantile(1.0, tol).is_err());
    }

    #[test]
    fn quantile_translation_equivariance() {
        let tol = 1e-11;
        let pq = ParticleQuantiles::new(vec![-0.4, 0.0, 0.1, 0.1, 1.3]).unwrap();
        let c = 3.25;
        let a = SmoothedCdf::new(pq.clone(), 0.2).unwrap();
        let b = SmoothedCdf::new(pq.shifted(c), 0.2).unwrap();
        for w in [0.01, 0.2, 0.5, 0.77, 0.999] {
            let qa = a.quantile(w, tol).unwrap();
            let qb = b.quantile(w, tol).unwrap();
            assert!((qb - qa - c).abs() <= 2.0 * tol);
        }
    }

    #[test]
    fn resample_examples() {
        let tol = 1e-10;
        let r = heat_resample(&dirac(2), 1.0, tol).unwrap();
        assert!((r.positions()[0] + Z_075).abs() <= tol);
        assert!((r.positions()[1] - Z_075).abs() <= tol);

        let pq = ParticleQuantiles::new(vec![-0.5, 0.0, 0.25, 1.0]).unwrap();
        let r = heat_resample(&pq, 1e-8, tol).unwrap();
        for (x, y) in r.positions().iter().zip(pq.positions()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn step_examples() {
        let tol = 1e-10;
        let pq = ParticleQuantiles::new(vec![-0.5, 0.0, 0.25, 1.0]).unwrap();
        let cq = FluxModel::concave_quadratic();
        let h = 0.1;
        let v = viscous_step(&pq, &cq, h, 1e-12, tol).unwrap();
        let inviscid = th_step(&pq, &cq, h);
        for (x, y) in v.positions().iter().zip(inviscid.positions()) {
            assert!((x - y).abs() < 1e-6);
        }

        let lin = FluxModel::linear(2.0).unwrap();
        let nu = 0.5;
        let v = viscous_step(&dirac(4), &lin, h, nu, tol).unwrap();
        let sigma = kernel_sigma(nu, h);
        for (i, x) in v.positions().iter().enumerate() {
            let z = std_normal_quantile(quantile_node(i, 4));
            assert!((x - (2.0 * h + sigma * z)).abs() <= 2.0 * tol);
        }

        assert!(viscous_step(&pq, &cq, 0.0, 1.0, tol).is_err());
        assert!(viscous_step(&pq, &cq, 0.1, 0.0, tol).is_err());
    }

    #[test]
    fn two_steps_follow_the_heat_semigroup() {
        let n = 256;
        let (h, nu, tol) = (0.05, 1.0, 1e-10);
        let zero = FluxModel::linear(0.0).unwrap();
        let st = evolve_viscous(&dirac(n), &zero, h, nu, 2.0 * h, tol).unwrap();
        let sd = (2.0 * 2.0 * nu * h).sqrt();
        let exact = ParticleQuantiles::new(
            (0..n).map(|i| sd * std_normal_quantile(quantile_node(i, n))).collect(),
        )
        .unwrap();
        let gap = wp_particles(&st.base, &exact, OrderP::new(2.0).unwrap()).unwrap();
        assert!(gap <= sd / n as f64, "gap {gap}");
    }

    #[test]
    fn evolve_at_zero_is_identity() {
        let pq = ParticleQuantiles::new(vec![-0.5, 0.0, 0.25, 1.0]).unwrap();
        let st = evolve_viscous(&pq, &FluxModel::burgers(), 0.1, 0.3, 0.0, 1e-10).unwrap();
        assert_eq!(st.base, pq);
        let st = evolve_viscous(&pq, &FluxModel::burgers(), 0.1, 0.3, 0.3, 1e-10).unwrap();
        assert_eq!(st.steps_taken, 3);
        let mut x = pq.clone();
        for _ in 0..3 {
            x = viscous_step(&x, &FluxModel::burgers(), 0.1, 0.3, 1e-10).unwrap();
        }
        assert_eq!(st.base, x);
    }

    #[test]
    fn mean_drift_under_linear_flux() {
        let tol = 1e-10;
        let pq = ParticleQuantiles::new(vec![-0.5, 0.0, 0.0, 0.25, 1.0, 1.1]).unwrap();
        let (c, h, nu) = (-0.75, 0.2, 0.4);
        let lin = FluxModel::linear(c).unwrap();
        let mut x = pq.clone();
        for k in 1..=4 {
            x = viscous_step(&x, &lin, h, nu, tol).unwrap();
            let drift = x.mean() - pq.mean();
            // quantile sampling of a smooth law preserves the mean only to O(1/N^2)
            assert!((drift - c * h * k as f64).abs() < 5e-2, "step {k}: {drift}");
        }
    }

    #[test]
    fn mean_drift_is_exact_on_symmetric_data() {
        let tol = 1e-10;
        let pq = ParticleQuantiles::new(vec![-1.0, -0.4, -0.1, 0.1, 0.4, 1.0]).unwrap();
        let n = pq.len() as f64;
        let (c, h, nu) = (0.6, 0.1, 0.5);
        let lin = FluxModel::linear(c).unwrap();
        let mut x = pq.clone();
        for k in 1..=5 {
            x = viscous_step(&x, &lin, h, nu, tol).unwrap();
            let drift = x.mean() - pq.mean();
            assert!((drift - c * h * k as f64).abs() <= tol * n * k as f64, "step {k}: {drift}");
        }
    }
}
