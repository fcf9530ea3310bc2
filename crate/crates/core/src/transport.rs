//! One transport-collapse step and its iteration in time.
//!
//! A step moves the particle with quantile label `w` by `h f'(w)` and then sorts. The
//! sort is the collapse: the sorted vector is the quantile function of the pushforward
//! of the label measure, so no information beyond the order is discarded.

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::measure::{quantile_node, MixtureState, ParticleQuantiles, StepCdf};

/// Transported positions indexed by quantile node, not necessarily sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPositions {
    positions: Vec<f64>,
}

impl RawPositions {
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParticles("no particles".into()));
        }
        if let Some(x) = positions.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidParticles(format!("non-finite position {x}")));
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Index of the first node whose position is below its predecessor's.
    pub fn first_crossing(&self) -> Option<usize> {
        self.positions
            .windows(2)
            .position(|p| p[1] < p[0])
            .map(|k| k + 1)
    }
}

/// `x_i + h f'(w_i)`.
pub fn transport(pq: &ParticleQuantiles, flux: &FluxModel, h: f64) -> RawPositions {
    assert!(h >= 0.0, "negative transport time {h}");
    let n = pq.len();
    let positions = pq
        .positions()
        .iter()
        .enumerate()
        .map(|(i, x)| x + h * flux.f_prime(quantile_node(i, n)))
        .collect();
    RawPositions { positions }
}

/// Monotone rearrangement of transported positions.
pub fn collapse(raw: RawPositions) -> ParticleQuantiles {
    let mut positions = raw.positions;
    positions.sort_by(f64::total_cmp);
    ParticleQuantiles::from_sorted_unchecked(positions)
}

pub fn th_step(pq: &ParticleQuantiles, flux: &FluxModel, h: f64) -> ParticleQuantiles {
    collapse(transport(pq, flux, h))
}

/// Exact solution sample while characteristics do not cross.
pub fn classical_characteristics(
    pq0: &ParticleQuantiles,
    flux: &FluxModel,
    t: f64,
) -> Result<ParticleQuantiles> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain("t", t, "[0, inf)"));
    }
    let raw = transport(pq0, flux, t);
    match raw.first_crossing() {
        Some(index) => Err(Error::NonClassical { index, time: t }),
        None => Ok(ParticleQuantiles::from_sorted_unchecked(raw.positions)),
    }
}

/// One step of a particle scheme.
pub trait Stepper {
    fn step(&self, pq: &ParticleQuantiles) -> Result<ParticleQuantiles>;

    fn step_size(&self) -> f64;

    fn flux(&self) -> &FluxModel;
}

/// The inviscid operator `T_h`.
#[derive(Debug, Clone)]
pub struct TransportCollapse {
    flux: FluxModel,
    h: f64,
}

impl TransportCollapse {
    pub fn new(flux: FluxModel, h: f64) -> Result<Self> {
        check_step(h)?;
        Ok(Self { flux, h })
    }
}

impl Stepper for TransportCollapse {
    fn step(&self, pq: &ParticleQuantiles) -> Result<ParticleQuantiles> {
        Ok(th_step(pq, &self.flux, self.h))
    }

    fn step_size(&self) -> f64 {
        self.h
    }

    fn flux(&self) -> &FluxModel {
        &self.flux
    }
}

pub(crate) fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("h", h, "(0, inf)"))
    }
}

/// Splits `t = (n + s) h` with `0 <= s < 1`; a fractional part within `1e-12` of one
/// rolls over to the next step.
pub fn decompose_time(t: f64, h: f64) -> Result<(usize, f64)> {
    check_step(h)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain("t", t, "[0, inf)"));
    }
    let ratio = t / h;
    let n = ratio.floor();
    let s = ratio - n;
    if s >= 1.0 - 1e-12 {
        Ok((n as usize + 1, 0.0))
    } else {
        Ok((n as usize, s))
    }
}

/// The scheme at time `t = (steps_taken + s) h`: `(1 - s) T^n v + s T^(n+1) v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub base: ParticleQuantiles,
    pub next: ParticleQuantiles,
    pub s: f64,
    pub h: f64,
    pub steps_taken: usize,
    pub flux: FluxModel,
}

impl SchemeState {
    pub fn time(&self) -> f64 {
        (self.steps_taken as f64 + self.s) * self.h
    }

    pub fn as_cdf(&self) -> MixtureState {
        sh_as_cdf(self)
    }
}

pub fn sh_as_cdf(state: &SchemeState) -> MixtureState {
    MixtureState::new(state.base.clone(), state.next.clone(), state.s)
        .expect("scheme state invariants")
}

/// Incremental evaluation of a scheme at nondecreasing times.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    stepper: S,
    initial: ParticleQuantiles,
    base: ParticleQuantiles,
    next: ParticleQuantiles,
    steps: usize,
}

impl<S: Stepper> Trajectory<S> {
    pub fn new(stepper: S, initial: ParticleQuantiles) -> Result<Self> {
        let next = stepper.step(&initial)?;
        Ok(Self {
            stepper,
            base: initial.clone(),
            initial,
            next,
            steps: 0,
        })
    }

    pub fn stepper(&self) -> &S {
        &self.stepper
    }

    /// `T^n v` for the current step count `n`.
    pub fn current(&self) -> &ParticleQuantiles {
        &self.base
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// Advances to `T^n v`; rewinds to the initial datum if `n` is behind.
    pub fn advance_to(&mut self, n: usize) -> Result<()> {
        if n < self.steps {
            self.base = self.initial.clone();
            self.next = self.stepper.step(&self.base)?;
            self.steps = 0;
        }
        while self.steps < n {
            let after = self.stepper.step(&self.next)?;
            self.base = std::mem::replace(&mut self.next, after);
            self.steps += 1;
        }
        Ok(())
    }

    pub fn state_at(&mut self, t: f64) -> Result<SchemeState> {
        let h = self.stepper.step_size();
        let (n, s) = decompose_time(t, h)?;
        self.advance_to(n)?;
        Ok(SchemeState {
            base: self.base.clone(),
            next: self.next.clone(),
            s,
            h,
            steps_taken: n,
            flux: self.stepper.flux().clone(),
        })
    }

    pub fn cdf_at(&mut self, t: f64) -> Result<MixtureState> {
        let (n, s) = decompose_time(t, self.stepper.step_size())?;
        self.advance_to(n)?;
        MixtureState::new(self.base.clone(), self.next.clone(), s)
    }
}

/// `S_h v (t)`.
pub fn evolve_sh(
    pq0: &ParticleQuantiles,
    flux: &FluxModel,
    h: f64,
    t: f64,
) -> Result<SchemeState> {
    let stepper = TransportCollapse::new(flux.clone(), h)?;
    Trajectory::new(stepper, pq0.clone())?.state_at(t)
}

/// Entropy shock for increasing `0 -> 1` data at the origin: a jump moving with the
/// Rankine-Hugoniot speed `f(1) - f(0)`.
pub fn exact_shock_cdf(flux: &FluxModel, t: f64) -> Result<StepCdf> {
    exact_shock_cdf_from(flux, 0.0, t)
}

pub fn exact_shock_cdf_from(flux: &FluxModel, x0: f64, t: f64) -> Result<StepCdf> {
    if !flux.has_nonincreasing_speed() {
        return Err(Error::NonAdmissibleFlux(flux.name().to_string()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain("t", t, "[0, inf)"));
    }
    let speed = flux.f(1.0) - flux.f(0.0);
    Ok(StepCdf::heaviside(x0 + speed * t))
}

/// Burgers rarefaction from the uniform law on `[0, 1]`: uniform on `[0, 1 + t]`,
/// resolved by `resolution` equal atoms at cell midpoints.
pub fn exact_rarefaction_cdf(t: f64, resolution: usize) -> Result<StepCdf> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain("t", t, "[0, inf)"));
    }
    StepCdf::uniform(0.0, 1.0 + t, resolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Cdf, ParticleQuantiles};
    use crate::wasserstein::{wp_particles, OrderP};

    fn nodes(n: usize) -> Vec<f64> {
        (0..n).map(|i| quantile_node(i, n)).collect()
    }

    #[test]
    fn transport_examples() {
        let pq = ParticleQuantiles::uniform(0.0, 1.0, 8).unwrap();
        let burgers = FluxModel::burgers();
        assert_eq!(transport(&pq, &burgers, 0.0).positions(), pq.positions());

        let h = 0.25;
        let raw = transport(&pq, &burgers, h);
        for (x, w) in raw.positions().iter().zip(nodes(8)) {
            assert!((x - w * (1.0 + h)).abs() < 1e-15);
        }
        assert_eq!(raw.first_crossing(), None);

        let raw = transport(&ParticleQuantiles::dirac(0.0, 8).unwrap(), &FluxModel::concave_quadratic(), h);
        for (x, w) in raw.positions().iter().zip(nodes(8)) {
            assert_eq!(*x, h * (1.0 - w));
        }
        assert!(raw.positions().windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn collapse_sorts() {
        let c = collapse(RawPositions::new(vec![0.3, 0.1, 0.2]).unwrap());
        assert_eq!(c.positions(), &[0.1, 0.2, 0.3]);
        let sorted = vec![-1.0, 0.0, 0.0, 4.0];
        assert_eq!(collapse(RawPositions::new(sorted.clone()).unwrap()).positions(), &sorted[..]);

        let h = 0.5;
        let raw = transport(&ParticleQuantiles::dirac(0.0, 16).unwrap(), &FluxModel::concave_quadratic(), h);
        let c = collapse(raw);
        for (x, w) in c.positions().iter().zip(nodes(16)) {
            assert_eq!(*x, h * w);
        }
    }

    #[test]
    fn two_steps_form_a_shock() {
        let cq = FluxModel::concave_quadratic();
        let h = 0.125;
        let d = ParticleQuantiles::dirac(0.0, 64).unwrap();
        assert_eq!(th_step(&d, &cq, 0.0), d);
        let one = th_step(&d, &cq, h);
        for (x, w) in one.positions().iter().zip(nodes(64)) {
            assert_eq!(*x, h * w);
        }
        let two = th_step(&one, &cq, h);
        assert!(two.positions().iter().all(|&x| x == h));
    }

    #[test]
    fn monotone_step_is_characteristics() {
        let pq = ParticleQuantiles::uniform(0.0, 1.0, 32).unwrap();
        let burgers = FluxModel::burgers();
        let stepped = th_step(&pq, &burgers, 0.3);
        let exact = classical_characteristics(&pq, &burgers, 0.3).unwrap();
        assert_eq!(stepped, exact);
        let at_one = classical_characteristics(&pq, &burgers, 1.0).unwrap();
        for (x, w) in at_one.positions().iter().zip(nodes(32)) {
            assert_eq!(*x, 2.0 * w);
        }
    }

    #[test]
    fn characteristics_detect_crossing() {
        let d = ParticleQuantiles::dirac(0.0, 8).unwrap();
        let cq = FluxModel::concave_quadratic();
        assert!(matches!(
            classical_characteristics(&d, &cq, 0.1),
            Err(Error::NonClassical { index: 1, .. })
        ));
        assert_eq!(classical_characteristics(&d, &cq, 0.0).unwrap(), d);
        let lin = FluxModel::linear(-2.0).unwrap();
        let pq = ParticleQuantiles::new(vec![-1.0, 0.0, 0.0, 3.0]).unwrap();
        assert_eq!(classical_characteristics(&pq, &lin, 1.5).unwrap(), pq.shifted(-3.0));
    }

    #[test]
    fn time_decomposition() {
        assert_eq!(decompose_time(0.0, 0.1).unwrap(), (0, 0.0));
        assert_eq!(decompose_time(2.5 * 0.25, 0.25).unwrap(), (2, 0.5));
        // 0.3 / 0.1 rounds to 2.9999999999999996
        assert_eq!(decompose_time(0.3, 0.1).unwrap(), (3, 0.0));
        assert!(decompose_time(1.0, 0.0).is_err());
        assert!(decompose_time(1.0, -0.1).is_err());
        assert!(decompose_time(-1.0, 0.1).is_err());
    }

    #[test]
    fn evolve_examples() {
        let pq0 = ParticleQuantiles::new(vec![-0.5, 0.0, 0.25, 1.0]).unwrap();
        let cq = FluxModel::concave_quadratic();
        let h = 0.25;

        let st = evolve_sh(&pq0, &cq, h, 0.0).unwrap();
        assert_eq!(st.base, pq0);
        assert_eq!(st.s, 0.0);
        assert_eq!(st.next, th_step(&pq0, &cq, h));

        let st = evolve_sh(&pq0, &cq, h, 2.5 * h).unwrap();
        let t2 = th_step(&th_step(&pq0, &cq, h), &cq, h);
        assert_eq!(st.base, t2);
        assert_eq!(st.next, th_step(&t2, &cq, h));
        assert_eq!((st.steps_taken, st.s), (2, 0.5));
        assert_eq!(st.time(), 2.5 * h);

        let lin = FluxModel::linear(0.75).unwrap();
        let st = evolve_sh(&pq0, &lin, h, 6.0 * h).unwrap();
        let expect = pq0.shifted(0.75 * 6.0 * h);
        for (x, y) in st.base.positions().iter().zip(expect.positions()) {
            assert!((x - y).abs() < 1e-14);
        }

        assert!(evolve_sh(&pq0, &cq, 0.0, 1.0).is_err());
    }

    #[test]
    fn evolve_is_deterministic() {
        let pq0 = ParticleQuantiles::new(vec![-0.5, 0.0, 0.25, 1.0]).unwrap();
        let cq = FluxModel::cubic();
        let a = evolve_sh(&pq0, &cq, 0.1, 1.37).unwrap();
        let b = evolve_sh(&pq0, &cq, 0.1, 1.37).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trajectory_matches_direct_evolution() {
        let pq0 = ParticleQuantiles::new(vec![-0.5, 0.0, 0.0, 0.25, 1.0]).unwrap();
        let cq = FluxModel::concave_quadratic();
        let mut tr = Trajectory::new(TransportCollapse::new(cq.clone(), 0.2).unwrap(), pq0.clone()).unwrap();
        for t in [0.0, 0.1, 0.45, 1.0, 1.7, 0.3] {
            assert_eq!(tr.state_at(t).unwrap(), evolve_sh(&pq0, &cq, 0.2, t).unwrap());
        }
    }

    #[test]
    fn scheme_state_as_cdf() {
        let pq0 = ParticleQuantiles::new(vec![0.0, 1.0]).unwrap();
        let st = evolve_sh(&pq0, &FluxModel::burgers(), 0.5, 0.0).unwrap();
        let ms = sh_as_cdf(&st);
        assert_eq!(ms.eval(0.5), pq0.eval(0.5));
        assert_eq!(ms.eval(f64::NEG_INFINITY), 0.0);
        let st = evolve_sh(&pq0, &FluxModel::burgers(), 0.5, 0.25).unwrap();
        let ms = st.as_cdf();
        assert_eq!(ms.weight(), 0.5);
        let mid = 0.5 * st.base.eval(1.0) + 0.5 * st.next.eval(1.0);
        assert_eq!(ms.eval(1.0), mid);
    }

    #[test]
    fn shock_oracle() {
        let cq = FluxModel::concave_quadratic();
        assert_eq!(exact_shock_cdf(&cq, 2.0).unwrap(), StepCdf::heaviside(1.0));
        assert_eq!(exact_shock_cdf(&cq, 0.0).unwrap(), StepCdf::heaviside(0.0));
        let lin = FluxModel::linear(-1.0).unwrap();
        assert_eq!(exact_shock_cdf(&lin, 3.0).unwrap(), StepCdf::heaviside(-3.0));
        assert!(matches!(
            exact_shock_cdf(&FluxModel::burgers(), 1.0),
            Err(Error::NonAdmissibleFlux(_))
        ));
    }

    #[test]
    fn rarefaction_oracle() {
        let m = 4096;
        assert_eq!(exact_rarefaction_cdf(0.0, m).unwrap(), StepCdf::uniform(0.0, 1.0, m).unwrap());
        let r1 = exact_rarefaction_cdf(1.0, m).unwrap();
        assert_eq!(r1, StepCdf::uniform(0.0, 2.0, m).unwrap());
        let q = exact_rarefaction_cdf(3.0, m).unwrap().generalized_inverse(0.5).unwrap();
        assert!((q - 2.0).abs() <= 4.0 / m as f64);
    }

    #[test]
    fn one_step_contracts() {
        let a = ParticleQuantiles::new(vec![-1.0, -0.2, 0.0, 0.0, 0.4, 2.0]).unwrap();
        let b = ParticleQuantiles::new(vec![-0.3, 0.0, 0.1, 0.9, 0.9, 1.0]).unwrap();
        for flux in [FluxModel::burgers(), FluxModel::concave_quadratic(), FluxModel::cubic()] {
            for q in [1.0, 2.0, 3.0] {
                let p = OrderP::new(q).unwrap();
                let before = wp_particles(&a, &b, p).unwrap();
                let after = wp_particles(&th_step(&a, &flux, 0.7), &th_step(&b, &flux, 0.7), p).unwrap();
                assert!(after <= before + 1e-12);
            }
        }
    }
}
