//! Kružkov entropy-inequality screening of a sequence of CDF snapshots.
//!
//! For `E(u) = |u - k|`, `F(u) = sign(u - k)(f(u) - f(k))` and a nonnegative test
//! function `phi`, an entropy solution satisfies
//! `-int int (E(u) phi_t + F(u) phi_x) dx dt - int E(u0) phi(0, x) dx <= 0`.
//! The left side is evaluated for tensor-product bumps `B(t) B(x)` with
//! `B(s) = (1 - s^2)^2` on `[-1, 1]`. Snapshots are step functions in `x`, so the
//! space integrals are exact; time integrals use the trapezoid rule.

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::measure::{Cdf, StepCdf};

#[inline]
fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let q = 1.0 - s * s;
        q * q
    }
}

#[inline]
fn bump_slope(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        -4.0 * s * (1.0 - s * s)
    }
}

// antiderivative of the bump, constant outside [-1, 1]
#[inline]
fn bump_integral(s: f64) -> f64 {
    let s = s.clamp(-1.0, 1.0);
    let s2 = s * s;
    s * (1.0 - s2 * (2.0 / 3.0 - s2 / 5.0))
}

/// Centers and half-widths of the test functions, in time and in space.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpFamily {
    pub t_centers: Vec<f64>,
    pub t_half: f64,
    pub x_centers: Vec<f64>,
    pub x_half: f64,
}

impl BumpFamily {
    /// Time bumps of half-width `T/4` centered at `0, T/8, ..., 3T/4` (so that every
    /// one vanishes at the final time), space bumps of half-width an eighth of the
    /// occupied range at half-width/2 spacing, covering it with one half-width margin.
    pub fn covering<C: Cdf>(states: &[(f64, C)]) -> Result<Self> {
        check_times(states)?;
        let t0 = states[0].0;
        let duration = states[states.len() - 1].0 - t0;
        let t_half = duration / 4.0;
        let t_centers = (0..=6).map(|j| t0 + j as f64 * t_half / 2.0).collect();

        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (_, s) in states {
            let cdf = s.step_cdf();
            let b = cdf.breakpoints();
            lo = lo.min(b[0]);
            hi = hi.max(b[b.len() - 1]);
        }
        let x_half = ((hi - lo) / 8.0).max(t_half).max(1e-3);
        let first = lo - x_half;
        let count = ((hi + x_half - first) / (0.5 * x_half)).ceil() as usize;
        let x_centers = (0..=count).map(|i| first + i as f64 * 0.5 * x_half).collect();
        Ok(Self {
            t_centers,
            t_half,
            x_centers,
            x_half,
        })
    }
}

fn check_times<C>(states: &[(f64, C)]) -> Result<()> {
    if states.len() < 3 {
        return Err(Error::TooFewSnapshots(states.len()));
    }
    let dt = states[1].0 - states[0].0;
    let uniform = dt > 0.0
        && states
            .windows(2)
            .all(|w| ((w[1].0 - w[0].0) - dt).abs() <= 1e-9 * dt.max(1.0));
    if uniform {
        Ok(())
    } else {
        Err(Error::NonUniformSnapshots)
    }
}

/// `(int E(u) B_x dx, int F(u) d/dx B_x dx)` for every space bump.
fn space_integrals(
    cdf: &StepCdf,
    entropy: impl Fn(f64) -> (f64, f64),
    family: &BumpFamily,
) -> Vec<(f64, f64)> {
    let (b, v) = (cdf.breakpoints(), cdf.values());
    let xi = family.x_half;
    family
        .x_centers
        .iter()
        .map(|&xc| {
            let (lo, hi) = (xc - xi, xc + xi);
            // piece j covers [b[j-1], b[j]) with value v[j-1] (0 for j = 0)
            let mut j = b.partition_point(|&x| x <= lo);
            let mut left = lo;
            let (mut ie, mut iff) = (0.0, 0.0);
            loop {
                let right = b.get(j).map_or(hi, |&x| x.min(hi));
                if right > left {
                    let u = if j == 0 { 0.0 } else { v[j - 1] };
                    let (e, f) = entropy(u);
                    let (sa, sb) = ((left - xc) / xi, (right - xc) / xi);
                    ie += e * xi * (bump_integral(sb) - bump_integral(sa));
                    iff += f * (bump(sb) - bump(sa));
                }
                if right >= hi || j >= b.len() {
                    break;
                }
                left = right;
                j += 1;
            }
            (ie, iff)
        })
        .collect()
}

/// Largest entropy-inequality residual over the bump family for the level `k`.
/// Nonpositive (up to quadrature error) for entropy solutions.
pub fn entropy_residual<C: Cdf>(
    states: &[(f64, C)],
    flux: &FluxModel,
    k: f64,
    family: &BumpFamily,
) -> Result<f64> {
    check_times(states)?;
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::domain("k", k, "[0, 1]"));
    }
    let fk = flux.f(k);
    let entropy = |u: f64| {
        let d = u - k;
        let flux_gap = flux.f(u) - fk;
        (d.abs(), if d > 0.0 { flux_gap } else if d < 0.0 { -flux_gap } else { 0.0 })
    };
    let per_state: Vec<Vec<(f64, f64)>> = states
        .iter()
        .map(|(_, s)| space_integrals(&s.step_cdf(), entropy, family))
        .collect();

    let t0 = states[0].0;
    let dt = states[1].0 - t0;
    let last = states.len() - 1;
    let tau = family.t_half;
    let mut worst = f64::NEG_INFINITY;
    for &tc in &family.t_centers {
        let time_weights: Vec<(f64, f64)> = states
            .iter()
            .enumerate()
            .map(|(j, (t, _))| {
                let w = if j == 0 || j == last { 0.5 * dt } else { dt };
                let s = (t - tc) / tau;
                (w * bump_slope(s) / tau, w * bump(s))
            })
            .collect();
        let initial = bump((t0 - tc) / tau);
        for xi in 0..family.x_centers.len() {
            let mut integral = 0.0;
            for (row, &(wt, w)) in per_state.iter().zip(&time_weights) {
                let (ie, iff) = row[xi];
                integral += wt * ie + w * iff;
            }
            let residual = -integral - initial * per_state[0][xi].0;
            worst = worst.max(residual);
        }
    }
    Ok(worst)
}

/// `entropy_residual` with the default family for these states.
pub fn entropy_residual_default<C: Cdf>(
    states: &[(f64, C)],
    flux: &FluxModel,
    k: f64,
) -> Result<f64> {
    let family = BumpFamily::covering(states)?;
    entropy_residual(states, flux, k, &family)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::exact_shock_cdf;

    fn shock_states(reverse: bool, count: usize) -> Vec<(f64, StepCdf)> {
        let flux = FluxModel::concave_quadratic();
        (0..count)
            .map(|j| {
                let t = j as f64 / (count - 1) as f64;
                let at = if reverse { 1.0 - t } else { t };
                (t, exact_shock_cdf(&flux, at).unwrap())
            })
            .collect()
    }

    #[test]
    fn bump_pieces_are_consistent() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(1.0), 0.0);
        assert!((bump_integral(1.0) - bump_integral(-1.0) - 16.0 / 15.0).abs() < 1e-15);
        let e = 1e-6;
        for s in [-0.8, -0.1, 0.3, 0.95] {
            let fd = (bump(s + e) - bump(s - e)) / (2.0 * e);
            assert!((fd - bump_slope(s)).abs() < 1e-8);
            let fd = (bump_integral(s + e) - bump_integral(s - e)) / (2.0 * e);
            assert!((fd - bump(s)).abs() < 1e-8);
        }
    }

    #[test]
    fn needs_uniform_snapshots() {
        let s = shock_states(false, 2);
        let flux = FluxModel::concave_quadratic();
        assert!(matches!(
            entropy_residual_default(&s, &flux, 0.5),
            Err(Error::TooFewSnapshots(2))
        ));
        let mut s = shock_states(false, 5);
        s[2].0 += 0.01;
        assert!(matches!(
            entropy_residual_default(&s, &flux, 0.5),
            Err(Error::NonUniformSnapshots)
        ));
    }

    #[test]
    fn stationary_state_is_exact() {
        // a resting jump is a steady solution for a flux with f(0) = f(1)
        let flux = FluxModel::linear(0.0).unwrap();
        let s: Vec<_> = (0..9).map(|j| (j as f64 / 8.0, StepCdf::heaviside(0.3))).collect();
        for k in [0.0, 0.25, 0.5, 1.0] {
            let r = entropy_residual_default(&s, &flux, k).unwrap();
            assert!(r.abs() < 1e-14, "k = {k}: {r}");
        }
    }

    #[test]
    fn shock_passes_and_reversal_fails() {
        let flux = FluxModel::concave_quadratic();
        let fwd = shock_states(false, 65);
        let back = shock_states(true, 65);
        let mut worst_back = f64::NEG_INFINITY;
        for i in 0..=10 {
            let k = i as f64 / 10.0;
            assert!(entropy_residual_default(&fwd, &flux, k).unwrap() <= 1e-3);
            worst_back = worst_back.max(entropy_residual_default(&back, &flux, k).unwrap());
        }
        assert!(worst_back > 0.01, "{worst_back}");
    }
}
