//! Runs a configured experiment and tabulates it.

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::harness::config::{ExperimentConfig, ExperimentKind, InitialSpec};
use crate::harness::entropy::{entropy_residual, BumpFamily};
use crate::harness::table::{version_string, ResultTable};
use crate::measure::{cdf_from_particles, particles_from_cdf, MixtureState, ParticleQuantiles, StepCdf};
use crate::transport::{
    classical_characteristics, exact_shock_cdf_from, Stepper, Trajectory, TransportCollapse,
};
use crate::viscous::ViscousTransportCollapse;
use crate::wasserstein::{w1_via_cdf, wp_cdf, wp_cdf_orders, OrderP};

/// Levels per unit mass of the oracle discretization (rounded up to a multiple of
/// the particle count).
pub const ORACLE_RESOLUTION: usize = 1 << 16;

/// `samples` equally spaced times covering `[0, t_final]`.
pub fn sample_times(t_final: f64, samples: usize) -> Vec<f64> {
    if samples < 2 {
        return vec![0.0];
    }
    (0..samples)
        .map(|j| t_final * j as f64 / (samples - 1) as f64)
        .collect()
}

fn p_label(p: OrderP) -> String {
    format!("p{}", p.get())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let mut table = match cfg.kind {
        ExperimentKind::ContractionSweep => {
            let step = TransportCollapse::new(cfg.flux.clone(), cfg.step())?;
            contraction_table(cfg, step)?
        }
        ExperimentKind::ViscousContraction => {
            let step = ViscousTransportCollapse::new(cfg.flux.clone(), cfg.step(), cfg.nu, cfg.tol)?;
            contraction_table(cfg, step)?
        }
        ExperimentKind::ClassicalConstancy => constancy_table(cfg)?,
        ExperimentKind::ConvergenceStudy => convergence_table(cfg)?,
        ExperimentKind::MomentAudit => moment_table(cfg)?,
        ExperimentKind::EntropyResidual => entropy_table(cfg)?,
    };
    table.add_metadata("version", format!("claw {}", version_string()));
    table.add_metadata("seed", cfg.seed.to_string());
    for line in cfg.echo() {
        table.add_metadata("config", line);
    }
    Ok(table)
}

fn pair(cfg: &ExperimentConfig) -> Result<(ParticleQuantiles, ParticleQuantiles)> {
    let b = cfg
        .initial_b
        .as_ref()
        .ok_or_else(|| Error::field("initial_b", "this kind needs two initial data"))?;
    Ok((
        cfg.initial_a.particles(cfg.n_particles)?,
        b.particles(cfg.n_particles)?,
    ))
}

/// `W_p` between the two schemes at each sample time, one row per time.
fn pair_distances<S: Stepper + Clone>(
    cfg: &ExperimentConfig,
    stepper: S,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let (a, b) = pair(cfg)?;
    let mut ta = Trajectory::new(stepper.clone(), a)?;
    let mut tb = Trajectory::new(stepper, b)?;
    sample_times(cfg.t_final, cfg.samples)
        .into_iter()
        .map(|t| {
            let (ma, mb) = (ta.cdf_at(t)?, tb.cdf_at(t)?);
            Ok((t, wp_cdf_orders(&ma, &mb, &cfg.p_list)))
        })
        .collect()
}

fn contraction_table<S: Stepper + Clone>(cfg: &ExperimentConfig, stepper: S) -> Result<ResultTable> {
    let mut columns = vec!["t".to_string()];
    columns.extend(cfg.p_list.iter().map(|&p| format!("w_{}", p_label(p))));
    columns.extend(cfg.p_list.iter().map(|&p| format!("ratio_{}", p_label(p))));
    let mut table = ResultTable::new(columns);
    let rows = pair_distances(cfg, stepper)?;
    let initial = rows[0].1.clone();
    for (t, w) in rows {
        let mut row = vec![t];
        row.extend(&w);
        // equal data stay equal, so 0/0 reads as no growth
        row.extend(w.iter().zip(&initial).map(|(&wt, &w0)| {
            if w0 > 0.0 {
                wt / w0
            } else if wt == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        }));
        table.push_row(row)?;
    }
    Ok(table)
}

fn constancy_table(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let mut columns = vec!["t".to_string()];
    columns.extend(cfg.p_list.iter().map(|&p| format!("dev_{}", p_label(p))));
    let mut table = ResultTable::new(columns);
    let stepper = TransportCollapse::new(cfg.flux.clone(), cfg.step())?;
    let rows = pair_distances(cfg, stepper)?;
    let initial = rows[0].1.clone();
    for (t, w) in rows {
        let mut row = vec![t];
        row.extend(w.iter().zip(&initial).map(|(wt, w0)| (wt - w0).abs()));
        table.push_row(row)?;
    }
    Ok(table)
}

/// The exact entropy solution at time `t` from the datum `initial`, as a step CDF
/// resolved to `ORACLE_RESOLUTION` levels. Available when the characteristics of the
/// datum do not cross (classical solutions, including rarefaction fans from atoms)
/// and for a Dirac datum under a shock-admissible flux.
pub fn oracle_cdf(flux: &FluxModel, initial: &InitialSpec, n: usize, t: f64) -> Result<StepCdf> {
    let levels = ORACLE_RESOLUTION.div_ceil(n) * n;
    let fine = match *initial {
        InitialSpec::Uniform(a, b) => ParticleQuantiles::uniform(a, b, levels)?,
        ref other => particles_from_cdf(&cdf_from_particles(&other.particles(n)?), levels)?,
    };
    match classical_characteristics(&fine, flux, t) {
        Ok(moved) => return Ok(moved.to_step_cdf()),
        Err(Error::NonClassical { .. }) => {}
        Err(e) => return Err(e),
    }
    let unavailable = || Error::OracleUnavailable(format!("{initial} under {flux}"));
    match *initial {
        InitialSpec::Dirac(x0) => exact_shock_cdf_from(flux, x0, t).map_err(|e| match e {
            Error::NonAdmissibleFlux(_) => unavailable(),
            other => other,
        }),
        _ => Err(unavailable()),
    }
}

fn convergence_table(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let n = cfg.n_particles;
    let times = sample_times(cfg.t_final, cfg.samples);
    let oracles = times
        .iter()
        .map(|&t| oracle_cdf(&cfg.flux, &cfg.initial_a, n, t))
        .collect::<Result<Vec<_>>>()?;
    let final_oracle = oracle_cdf(&cfg.flux, &cfg.initial_a, n, cfg.t_final)?;

    let mut columns = vec![
        "h".to_string(),
        "n".to_string(),
        "l1_error".to_string(),
        "l1_error_sup".to_string(),
    ];
    columns.extend(cfg.p_list.iter().map(|&p| format!("w_{}", p_label(p))));
    let mut table = ResultTable::new(columns);
    let initial = cfg.initial_a.particles(n)?;
    for &h in &cfg.h {
        let mut traj = Trajectory::new(TransportCollapse::new(cfg.flux.clone(), h)?, initial.clone())?;
        let mut sup = 0.0_f64;
        for (&t, oracle) in times.iter().zip(&oracles) {
            sup = sup.max(w1_via_cdf(&traj.cdf_at(t)?, oracle));
        }
        let state = traj.cdf_at(cfg.t_final)?;
        let mut row = vec![h, n as f64, w1_via_cdf(&state, &final_oracle), sup];
        row.extend(cfg.p_list.iter().map(|&p| wp_cdf(&state, &final_oracle, p)));
        table.push_row(row)?;
    }
    Ok(table)
}

/// One-step moment bound `2^(p-1) (m_p(v) + (h M)^p)`.
pub fn moment_bound(moment: f64, p: f64, h: f64, lipschitz: f64) -> f64 {
    2f64.powf(p - 1.0) * (moment + (h * lipschitz).powf(p))
}

/// One-step tail bound `(1 + hM / (R - hM))^p` times the tail of `v` beyond `R - hM`.
pub fn tail_bound(pq: &ParticleQuantiles, p: f64, radius: f64, h: f64, lipschitz: f64) -> f64 {
    let reach = h * lipschitz;
    (1.0 + reach / (radius - reach)).powf(p) * pq.tail_moment(p, radius - reach)
}

fn moment_table(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let h = cfg.step();
    let m = cfg.flux.lipschitz_bound();
    let mut columns = vec!["t".to_string()];
    for &p in &cfg.p_list {
        let l = p_label(p);
        columns.extend([
            format!("moment_{l}"),
            format!("moment_bound_{l}"),
            format!("tail_{l}"),
            format!("tail_bound_{l}"),
        ]);
    }
    let mut table = ResultTable::new(columns);
    let stepper = TransportCollapse::new(cfg.flux.clone(), h)?;
    let (steps, _) = crate::transport::decompose_time(cfg.t_final, h)?;
    let mut prev: Option<ParticleQuantiles> = None;
    let mut current = cfg.initial_a.particles(cfg.n_particles)?;
    for n in 0..=steps {
        let mut row = vec![n as f64 * h];
        for &p in &cfg.p_list {
            let p = p.get();
            let moment = current.moment(p);
            let tail = current.tail_moment(p, cfg.radius);
            // the first row has no preceding step; its bounds are the values themselves
            let (mb, tb) = match &prev {
                Some(v) => (
                    moment_bound(v.moment(p), p, h, m),
                    tail_bound(v, p, cfg.radius, h, m),
                ),
                None => (moment, tail),
            };
            row.extend([moment, mb, tail, tb]);
        }
        table.push_row(row)?;
        if n < steps {
            let next = stepper.step(&current)?;
            prev = Some(std::mem::replace(&mut current, next));
        }
    }
    Ok(table)
}

fn entropy_table(cfg: &ExperimentConfig) -> Result<ResultTable> {
    if !(cfg.t_final > 0.0) {
        return Err(Error::field("t_final", "entropy_residual needs t_final > 0"));
    }
    let mut traj = Trajectory::new(
        TransportCollapse::new(cfg.flux.clone(), cfg.step())?,
        cfg.initial_a.particles(cfg.n_particles)?,
    )?;
    let states = sample_times(cfg.t_final, cfg.samples)
        .into_iter()
        .map(|t| Ok((t, traj.cdf_at(t)?.to_step_cdf())))
        .collect::<Result<Vec<(f64, StepCdf)>>>()?;
    let family = BumpFamily::covering(&states)?;
    let mut table = ResultTable::new(vec!["k".into(), "residual".into()]);
    for j in 0..cfg.k_count {
        let k = j as f64 / (cfg.k_count - 1) as f64;
        table.push_row(vec![k, entropy_residual(&states, &cfg.flux, k, &family)?])?;
    }
    Ok(table)
}

/// Mixture states of one scheme at the given times.
pub fn scheme_states<S: Stepper>(
    stepper: S,
    initial: ParticleQuantiles,
    times: &[f64],
) -> Result<Vec<(f64, MixtureState)>> {
    let mut traj = Trajectory::new(stepper, initial)?;
    times.iter().map(|&t| Ok((t, traj.cdf_at(t)?))).collect()
}
