//! Exact one-dimensional Wasserstein distances.
//!
//! On the line the optimal coupling is the monotone one, so `W_p` is the `L^p(0, 1)`
//! distance between quantile functions. Every represented measure has finitely many
//! atoms, so the quantile functions are step functions and every integral below is a
//! finite sum.

use crate::error::{Error, Result};
use crate::measure::{Cdf, ParticleQuantiles, StepCdf};

/// Order `p >= 1` of a Wasserstein distance.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct OrderP(f64);

impl OrderP {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p >= 1.0 {
            Ok(Self(p))
        } else {
            Err(Error::domain("p", p, "[1, inf)"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// `|d|^p`, with exact integer powers for small integer orders.
    #[inline]
    pub fn pow(self, d: f64) -> f64 {
        let d = d.abs();
        match self.0 {
            1.0 => d,
            2.0 => d * d,
            3.0 => d * d * d,
            p if p.fract() == 0.0 && p <= 64.0 => d.powi(p as i32),
            p => d.powf(p),
        }
    }

    #[inline]
    pub fn root(self, x: f64) -> f64 {
        match self.0 {
            1.0 => x,
            2.0 => x.sqrt(),
            3.0 => x.cbrt(),
            p => x.powf(1.0 / p),
        }
    }
}

impl TryFrom<f64> for OrderP {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

/// `((1/N) sum |a_i - b_i|^p)^(1/p)` on two particle systems of equal size.
pub fn wp_particles(a: &ParticleQuantiles, b: &ParticleQuantiles, p: OrderP) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let sum: f64 = a
        .positions()
        .iter()
        .zip(b.positions())
        .map(|(x, y)| p.pow(x - y))
        .sum();
    Ok(p.root(sum / a.len() as f64))
}

/// Quantile gap as a step function of the level: `(length, |F^-1 - G^-1|)` on each
/// interval of the merged level partition of `(0, 1)`.
pub fn quantile_gap_pieces(f: &StepCdf, g: &StepCdf) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(f.len() + g.len());
    let mut fp = f.quantile_pieces().peekable();
    let mut gp = g.quantile_pieces().peekable();
    let mut level = 0.0_f64;
    while let (Some(&(_, fe, fx)), Some(&(_, ge, gx))) = (fp.peek(), gp.peek()) {
        let end = fe.min(ge);
        if end > level {
            out.push((end - level, (fx - gx).abs()));
            level = end;
        }
        if fe <= end {
            fp.next();
        }
        if ge <= end {
            gp.next();
        }
    }
    out
}

/// Exact `W_p` between two step CDFs (or anything viewable as one).
pub fn wp_cdf<F, G>(f: &F, g: &G, p: OrderP) -> f64
where
    F: Cdf + ?Sized,
    G: Cdf + ?Sized,
{
    let (f, g) = (f.step_cdf(), g.step_cdf());
    wp_from_pieces(&quantile_gap_pieces(&f, &g), p)
}

/// Several orders from one merged partition.
pub fn wp_cdf_orders<F, G>(f: &F, g: &G, orders: &[OrderP]) -> Vec<f64>
where
    F: Cdf + ?Sized,
    G: Cdf + ?Sized,
{
    let (f, g) = (f.step_cdf(), g.step_cdf());
    let pieces = quantile_gap_pieces(&f, &g);
    orders.iter().map(|&p| wp_from_pieces(&pieces, p)).collect()
}

fn wp_from_pieces(pieces: &[(f64, f64)], p: OrderP) -> f64 {
    let sum: f64 = pieces.iter().map(|&(len, gap)| len * p.pow(gap)).sum();
    p.root(sum)
}

/// `int |F(x) - G(x)| dx` over the merged breakpoint partition.
pub fn w1_via_cdf<F, G>(f: &F, g: &G) -> f64
where
    F: Cdf + ?Sized,
    G: Cdf + ?Sized,
{
    let (f, g) = (f.step_cdf(), g.step_cdf());
    let (fb, fv) = (f.breakpoints(), f.values());
    let (gb, gv) = (g.breakpoints(), g.values());
    let (mut i, mut j) = (0, 0);
    let (mut fcur, mut gcur) = (0.0_f64, 0.0_f64);
    let mut prev: Option<f64> = None;
    let mut area = 0.0;
    while i < fb.len() || j < gb.len() {
        let x = match (fb.get(i), gb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        if let Some(x0) = prev {
            area += (fcur - gcur).abs() * (x - x0);
        }
        if i < fb.len() && fb[i] == x {
            fcur = fv[i];
            i += 1;
        }
        if j < gb.len() && gb[j] == x {
            gcur = gv[j];
            j += 1;
        }
        prev = Some(x);
    }
    area
}

/// Per-element `W_p` distance to `limit` and tail moment beyond `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceGaps {
    pub distances: Vec<f64>,
    pub tail_moments: Vec<f64>,
}

/// Distances and tail moments of a sequence against a candidate limit, for checking
/// that `W_p` convergence is weak convergence plus uniformly small tails.
pub fn weak_convergence_gap(
    seq: &[ParticleQuantiles],
    limit: &ParticleQuantiles,
    p: OrderP,
    radius: f64,
) -> Result<ConvergenceGaps> {
    if seq.is_empty() {
        return Err(Error::InvalidParticles("empty sequence".into()));
    }
    let limit_cdf = limit.to_step_cdf();
    let distances = seq
        .iter()
        .map(|pq| {
            if pq.len() == limit.len() {
                wp_particles(pq, limit, p)
            } else {
                Ok(wp_cdf(pq, &limit_cdf, p))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let tail_moments = seq.iter().map(|pq| pq.tail_moment(p.get(), radius)).collect();
    Ok(ConvergenceGaps {
        distances,
        tail_moments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MixtureState;

    fn p(v: f64) -> OrderP {
        OrderP::new(v).unwrap()
    }

    #[test]
    fn order_validation() {
        assert!(OrderP::new(0.5).is_err());
        assert!(OrderP::new(f64::INFINITY).is_err());
        assert!(OrderP::new(f64::NAN).is_err());
        assert_eq!(OrderP::new(1.0).unwrap().get(), 1.0);
    }

    #[test]
    fn particles_basic() {
        let a = ParticleQuantiles::uniform(-1.0, 3.0, 17).unwrap();
        assert_eq!(wp_particles(&a, &a, p(2.0)).unwrap(), 0.0);
        let d0 = ParticleQuantiles::dirac(0.0, 10).unwrap();
        let dc = ParticleQuantiles::dirac(-2.5, 10).unwrap();
        for q in [1.0, 1.5, 2.0, 3.0, 7.0] {
            assert!((wp_particles(&d0, &dc, p(q)).unwrap() - 2.5).abs() < 1e-14);
        }
    }

    #[test]
    fn dirac_against_uniform() {
        let n = 1000;
        let d0 = ParticleQuantiles::dirac(0.0, n).unwrap();
        let u = ParticleQuantiles::uniform(0.0, 1.0, n).unwrap();
        let w2 = wp_particles(&d0, &u, p(2.0)).unwrap();
        assert!((w2 - (1.0_f64 / 3.0).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn particles_size_mismatch() {
        let a = ParticleQuantiles::dirac(0.0, 3).unwrap();
        let b = ParticleQuantiles::dirac(0.0, 4).unwrap();
        assert!(matches!(
            wp_particles(&a, &b, p(1.0)),
            Err(Error::SizeMismatch { left: 3, right: 4 })
        ));
    }

    #[test]
    fn cdf_examples() {
        let h0 = StepCdf::heaviside(0.0);
        let ha = StepCdf::heaviside(-1.75);
        assert_eq!(wp_cdf(&h0, &h0, p(2.0)), 0.0);
        for q in [1.0, 2.0, 4.5] {
            assert!((wp_cdf(&h0, &ha, p(q)) - 1.75).abs() < 1e-15);
        }
        let two = StepCdf::new(vec![0.0, 1.0], vec![0.5, 1.0]).unwrap();
        assert!((wp_cdf(&two, &h0, p(1.0)) - 0.5).abs() < 1e-15);
        // W_2: gap 1 on half the levels
        assert!((wp_cdf(&two, &h0, p(2.0)) - 0.5_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cdf_l1_examples() {
        let h0 = StepCdf::heaviside(0.0);
        assert_eq!(w1_via_cdf(&h0, &h0), 0.0);
        assert_eq!(w1_via_cdf(&h0, &StepCdf::heaviside(3.0)), 3.0);
        assert_eq!(w1_via_cdf(&StepCdf::heaviside(3.0), &h0), 3.0);
    }

    #[test]
    fn mixture_distance() {
        // mixture of Dirac(0), Dirac(1) at weight 1/2 vs Dirac(0): gap 1 on (1/2, 1)
        let a = ParticleQuantiles::dirac(0.0, 4).unwrap();
        let b = ParticleQuantiles::dirac(1.0, 4).unwrap();
        let ms = MixtureState::new(a.clone(), b, 0.5).unwrap();
        assert!((wp_cdf(&ms, &a, p(1.0)) - 0.5).abs() < 1e-15);
        assert!((w1_via_cdf(&ms, &a) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gaps_of_sequences() {
        let limit = ParticleQuantiles::dirac(0.0, 8).unwrap();
        let constant = vec![limit.clone(); 3];
        let g = weak_convergence_gap(&constant, &limit, p(2.0), 1.0).unwrap();
        assert!(g.distances.iter().all(|&d| d == 0.0));

        let seq: Vec<_> = (1..=5)
            .map(|n| ParticleQuantiles::dirac(1.0 / n as f64, 8).unwrap())
            .collect();
        let g = weak_convergence_gap(&seq, &limit, p(1.0), 1.0).unwrap();
        for (n, d) in (1..=5).zip(&g.distances) {
            assert!((d - 1.0 / n as f64).abs() < 1e-15);
        }

        let escaping: Vec<_> = (1..=5)
            .map(|n| ParticleQuantiles::dirac(n as f64, 8).unwrap())
            .collect();
        let g = weak_convergence_gap(&escaping, &limit, p(1.0), 2.0).unwrap();
        assert_eq!(g.distances, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(g.tail_moments, vec![0.0, 2.0, 3.0, 4.0, 5.0]);

        assert!(weak_convergence_gap(&[], &limit, p(1.0), 1.0).is_err());
    }
}
