//! Quick invariant suites behind `claw selftest`.

use itertools::Itertools;

use crate::error::Result;
use crate::flux::FluxModel;
use crate::harness::config::parse_config;
use crate::harness::entropy::entropy_residual_default;
use crate::harness::experiment::{moment_bound, run_experiment, sample_times, tail_bound};
use crate::harness::rng::{random_step_cdf, Lcg64, RandomSpec};
use crate::harness::table::emit_csv;
use crate::measure::{ParticleQuantiles, StepCdf};
use crate::transport::{exact_shock_cdf, th_step, Stepper, Trajectory, TransportCollapse};
use crate::viscous::heat_resample;
use crate::wasserstein::{w1_via_cdf, wp_cdf, wp_cdf_orders, wp_particles, OrderP};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

fn orders() -> Vec<OrderP> {
    [1.0, 2.0, 3.0].into_iter().map(|p| OrderP::new(p).expect("valid order")).collect()
}

pub fn fluxes() -> Vec<FluxModel> {
    vec![
        FluxModel::burgers(),
        FluxModel::concave_quadratic(),
        FluxModel::cubic(),
        FluxModel::linear(1.0).expect("finite speed"),
        FluxModel::linear(-1.0).expect("finite speed"),
    ]
}

/// Largest `W_p(t) / W_p(0)` over the sample times, for two data under one scheme.
pub fn worst_ratio<S: Stepper + Clone>(
    stepper: &S,
    a: &ParticleQuantiles,
    b: &ParticleQuantiles,
    times: &[f64],
    orders: &[OrderP],
) -> Result<f64> {
    let mut ta = Trajectory::new(stepper.clone(), a.clone())?;
    let mut tb = Trajectory::new(stepper.clone(), b.clone())?;
    let w0 = wp_cdf_orders(a, b, orders);
    let mut worst = 0.0_f64;
    for &t in times {
        let w = wp_cdf_orders(&ta.cdf_at(t)?, &tb.cdf_at(t)?, orders);
        for (wt, w0) in w.iter().zip(&w0) {
            if *w0 > 0.0 {
                worst = worst.max(wt / w0);
            }
        }
    }
    Ok(worst)
}

fn contraction() -> Result<Check> {
    let times = sample_times(1.0, 16);
    let mut worst = 0.0_f64;
    for seed in 0..6 {
        let a = RandomSpec::with_seed(2 * seed).sample(128)?;
        let b = RandomSpec::with_seed(2 * seed + 1).sample(128)?;
        for flux in fluxes() {
            let step = TransportCollapse::new(flux, 0.05)?;
            worst = worst.max(worst_ratio(&step, &a, &b, &times, &orders())?);
        }
    }
    Ok(check(
        "wp_contraction",
        worst <= 1.0 + 1e-10,
        format!("max ratio {worst:.3e}"),
    ))
}

fn constancy() -> Result<Check> {
    let a = ParticleQuantiles::uniform(0.0, 1.0, 256)?;
    let b = ParticleQuantiles::uniform(0.5, 1.5, 256)?;
    let step = TransportCollapse::new(FluxModel::burgers(), 0.01)?;
    let (mut ta, mut tb) = (Trajectory::new(step.clone(), a)?, Trajectory::new(step, b)?);
    let mut worst = 0.0_f64;
    for t in sample_times(1.0, 32) {
        for w in wp_cdf_orders(&ta.cdf_at(t)?, &tb.cdf_at(t)?, &orders()) {
            worst = worst.max((w - 0.5).abs());
        }
    }
    Ok(check(
        "classical_constancy",
        worst <= 1e-12,
        format!("max deviation {worst:.3e}"),
    ))
}

fn w1_identity() -> Result<Check> {
    let mut rng = Lcg64::new(11);
    let mut worst = 0.0_f64;
    for i in 0..50 {
        let f = random_step_cdf(&mut rng, 1 + i % 13, -3.0, 3.0)?;
        let g = random_step_cdf(&mut rng, 1 + i % 7, -1.0, 4.0)?;
        let p1 = OrderP::new(1.0)?;
        worst = worst.max((wp_cdf(&f, &g, p1) - w1_via_cdf(&f, &g)).abs());
    }
    Ok(check("w1_identity", worst <= 1e-10, format!("max gap {worst:.3e}")))
}

/// Minimum over all pairings of `(1/N) sum |a_i - b_sigma(i)|^p`, to the power `1/p`.
pub fn brute_force_wp(a: &[f64], b: &[f64], p: OrderP) -> f64 {
    let n = a.len();
    let best = (0..n)
        .permutations(n)
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| p.pow(a[i] - b[j])).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    p.root(best / n as f64)
}

fn rearrangement() -> Result<Check> {
    let mut rng = Lcg64::new(5);
    let mut worst = 0.0_f64;
    for n in 1..=6 {
        for _ in 0..4 {
            let a: Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let (pa, pb) = (
                ParticleQuantiles::from_unsorted(a.clone())?,
                ParticleQuantiles::from_unsorted(b.clone())?,
            );
            for p in orders() {
                worst = worst.max((brute_force_wp(&a, &b, p) - wp_particles(&pa, &pb, p)?).abs());
            }
        }
    }
    Ok(check("rearrangement", worst <= 1e-12, format!("max gap {worst:.3e}")))
}

fn moments() -> Result<Check> {
    let mut violations = 0;
    let (h, radius) = (0.1, 1.0);
    for seed in 0..20 {
        let v = RandomSpec::with_seed(100 + seed).sample(200)?;
        for flux in fluxes() {
            let next = th_step(&v, &flux, h);
            let m = flux.lipschitz_bound();
            for p in [1.0, 2.0, 3.0] {
                if next.moment(p) > moment_bound(v.moment(p), p, h, m) * (1.0 + 1e-12) {
                    violations += 1;
                }
                if next.tail_moment(p, radius) > tail_bound(&v, p, radius, h, m) * (1.0 + 1e-12) {
                    violations += 1;
                }
            }
        }
    }
    Ok(check(
        "moment_tail_bounds",
        violations == 0,
        format!("{violations} violations"),
    ))
}

fn heat_contraction() -> Result<Check> {
    let tol = 1e-10;
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..4 {
        let a = RandomSpec::with_seed(200 + seed).sample(128)?;
        let b = RandomSpec::with_seed(300 + seed).sample(128)?;
        for sigma in [0.1, 1.0] {
            let (ra, rb) = (heat_resample(&a, sigma, tol)?, heat_resample(&b, sigma, tol)?);
            for p in orders() {
                worst = worst.max(wp_particles(&ra, &rb, p)? - wp_particles(&a, &b, p)?);
            }
        }
    }
    Ok(check(
        "heat_contraction",
        worst <= 5.0 * tol,
        format!("max growth {worst:.3e}"),
    ))
}

fn entropy_controls() -> Result<Check> {
    let flux = FluxModel::concave_quadratic();
    let states = |reverse: bool| -> Result<Vec<(f64, StepCdf)>> {
        sample_times(1.0, 65)
            .into_iter()
            .map(|t| Ok((t, exact_shock_cdf(&flux, if reverse { 1.0 - t } else { t })?)))
            .collect()
    };
    let (fwd, back) = (states(false)?, states(true)?);
    let (mut admissible, mut reversed) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for j in 0..=10 {
        let k = j as f64 / 10.0;
        admissible = admissible.max(entropy_residual_default(&fwd, &flux, k)?);
        reversed = reversed.max(entropy_residual_default(&back, &flux, k)?);
    }
    Ok(check(
        "entropy_controls",
        admissible <= 1e-3 && reversed > 0.01,
        format!("shock {admissible:.3e}, reversed {reversed:.3e}"),
    ))
}

fn determinism() -> Result<Check> {
    let cfg = parse_config(
        "kind = contraction_sweep\nn_particles = 64\nh = 0.05\nt_final = 1\nsamples = 8\n\
         [flux]\nname = burgers\n",
    )?;
    let render = || -> Result<Vec<u8>> {
        let mut out = Vec::new();
        emit_csv(&run_experiment(&cfg)?, &mut out)?;
        Ok(out)
    };
    let same = render()? == render()?;
    Ok(check("csv_determinism", same, String::new()))
}

type Suite = (&'static str, fn() -> Result<Check>);

/// Runs every suite. An error inside a suite is reported as a failed check.
pub fn run_selftest() -> Vec<Check> {
    let suites: [Suite; 8] = [
        ("wp_contraction", contraction),
        ("classical_constancy", constancy),
        ("w1_identity", w1_identity),
        ("rearrangement", rearrangement),
        ("moment_tail_bounds", moments),
        ("heat_contraction", heat_contraction),
        ("entropy_controls", entropy_controls),
        ("csv_determinism", determinism),
    ];
    suites
        .into_iter()
        .map(|(name, suite)| suite().unwrap_or_else(|e| check(name, false, e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_matches_hand_values() {
        let p1 = OrderP::new(1.0).unwrap();
        assert_eq!(brute_force_wp(&[0.0, 1.0], &[1.0, 0.0], p1), 0.0);
        assert!((brute_force_wp(&[0.0, 2.0], &[1.0, 1.0], p1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn selftest_passes() {
        for c in run_selftest() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
