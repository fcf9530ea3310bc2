//! Experiment configuration files.
//!
//! Line-oriented `key = value`; `[flux]`, `[initial_a]` and `[initial_b]` open
//! sections; `#` starts a comment. Lists are comma separated, optionally in
//! brackets, and numbers may be written as fractions (`1/16`).
//!
//! ```text
//! kind = convergence_study
//! h = 1/16, 1/32, 1/64
//! t_final = 1
//!
//! [flux]
//! name = concave_quadratic
//!
//! [initial_a]
//! preset = dirac(0)
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::harness::rng::RandomSpec;
use crate::measure::{particles_from_cdf, ParticleQuantiles, StepCdf};
use crate::wasserstein::OrderP;

pub const DEFAULT_N_PARTICLES: usize = 1024;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SAMPLES: usize = 64;
pub const DEFAULT_H: f64 = 0.01;
pub const DEFAULT_T_FINAL: f64 = 1.0;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_RADIUS: f64 = 2.0;
pub const DEFAULT_K_COUNT: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    ContractionSweep,
    ConvergenceStudy,
    ClassicalConstancy,
    ViscousContraction,
    MomentAudit,
    EntropyResidual,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        Self::ContractionSweep,
        Self::ConvergenceStudy,
        Self::ClassicalConstancy,
        Self::ViscousContraction,
        Self::MomentAudit,
        Self::EntropyResidual,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ContractionSweep => "contraction_sweep",
            Self::ConvergenceStudy => "convergence_study",
            Self::ClassicalConstancy => "classical_constancy",
            Self::ViscousContraction => "viscous_contraction",
            Self::MomentAudit => "moment_audit",
            Self::EntropyResidual => "entropy_residual",
        }
    }

    fn uses_pair(self) -> bool {
        matches!(
            self,
            Self::ContractionSweep | Self::ClassicalConstancy | Self::ViscousContraction
        )
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::field("kind", format!("unknown experiment kind `{s}`")))
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the flux was specified, kept for echoing the configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum FluxSpec {
    Builtin { name: String, speed: Option<f64> },
    Table(PathBuf),
}

impl FluxSpec {
    pub fn build(&self) -> Result<FluxModel> {
        match self {
            FluxSpec::Builtin { name, speed } => {
                let params: Vec<f64> = speed.iter().copied().collect();
                FluxModel::builtin(name, &params)
            }
            FluxSpec::Table(path) => FluxModel::read_table(path),
        }
    }
}

impl fmt::Display for FluxSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FluxSpec::Builtin { name, speed: None } => f.write_str(name),
            FluxSpec::Builtin {
                name,
                speed: Some(c),
            } => write!(f, "{name}({c})"),
            FluxSpec::Table(path) => write!(f, "tabulated({})", path.display()),
        }
    }
}

/// Named initial data.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Dirac(f64),
    Uniform(f64, f64),
    TwoAtom(f64, f64),
    Random(RandomSpec),
}

impl InitialSpec {
    /// Midpoint-quantile particle system with `n` particles.
    pub fn particles(&self, n: usize) -> Result<ParticleQuantiles> {
        match *self {
            InitialSpec::Dirac(x) => ParticleQuantiles::dirac(x, n),
            InitialSpec::Uniform(a, b) => ParticleQuantiles::uniform(a, b, n),
            InitialSpec::TwoAtom(x1, x2) => {
                let (lo, hi) = (x1.min(x2), x1.max(x2));
                if lo == hi {
                    return ParticleQuantiles::dirac(lo, n);
                }
                particles_from_cdf(&StepCdf::new(vec![lo, hi], vec![0.5, 1.0])?, n)
            }
            InitialSpec::Random(spec) => spec.sample(n),
        }
    }

    // `random()` without a seed takes the config seed (plus one for the second datum)
    fn parse(text: &str, default_seed: u64) -> std::result::Result<Self, String> {
        let text = text.trim();
        let (name, rest) = text
            .split_once('(')
            .ok_or_else(|| format!("expected `name(args)`, got `{text}`"))?;
        let args = rest
            .strip_suffix(')')
            .ok_or_else(|| format!("missing `)` in `{text}`"))?;
        let args: Vec<&str> = args
            .split(',')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .collect();
        let reals = || -> std::result::Result<Vec<f64>, String> {
            args.iter().map(|a| parse_real(a)).collect()
        };
        match name.trim() {
            "dirac" => match reals()?.as_slice() {
                [x] => Ok(Self::Dirac(*x)),
                _ => Err("dirac takes one position".into()),
            },
            "uniform" => match reals()?.as_slice() {
                [a, b] if a < b => Ok(Self::Uniform(*a, *b)),
                [_, _] => Err("uniform(a, b) needs a < b".into()),
                _ => Err("uniform takes two endpoints".into()),
            },
            "two_atom" => match reals()?.as_slice() {
                [a, b] => Ok(Self::TwoAtom(*a, *b)),
                _ => Err("two_atom takes two positions".into()),
            },
            "random" => {
                if args.len() > 4 {
                    return Err("random takes at most (seed, lo, hi, atoms)".into());
                }
                let mut spec = RandomSpec::with_seed(default_seed);
                if let Some(s) = args.first() {
                    spec.seed = s.parse().map_err(|_| format!("bad seed `{s}`"))?;
                }
                match args.len() {
                    3 | 4 => {
                        spec.lo = parse_real(args[1])?;
                        spec.hi = parse_real(args[2])?;
                        if !(spec.lo < spec.hi) {
                            return Err("random needs lo < hi".into());
                        }
                    }
                    2 => return Err("random needs both lo and hi".into()),
                    _ => {}
                }
                if let Some(a) = args.get(3) {
                    spec.atoms = a.parse().map_err(|_| format!("bad atom count `{a}`"))?;
                }
                Ok(Self::Random(spec))
            }
            other => Err(format!("unknown preset `{other}`")),
        }
    }
}

impl fmt::Display for InitialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialSpec::Dirac(x) => write!(f, "dirac({x})"),
            InitialSpec::Uniform(a, b) => write!(f, "uniform({a}, {b})"),
            InitialSpec::TwoAtom(a, b) => write!(f, "two_atom({a}, {b})"),
            InitialSpec::Random(s) => {
                write!(f, "random({}, {}, {}, {})", s.seed, s.lo, s.hi, s.atoms)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub flux_spec: FluxSpec,
    pub flux: FluxModel,
    pub n_particles: usize,
    pub h: Vec<f64>,
    pub t_final: f64,
    pub p_list: Vec<OrderP>,
    pub nu: f64,
    pub seed: u64,
    pub samples: usize,
    pub tol: f64,
    pub radius: f64,
    pub k_count: usize,
    pub initial_a: InitialSpec,
    pub initial_b: Option<InitialSpec>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// The single step size of kinds that do not sweep `h`.
    pub fn step(&self) -> f64 {
        self.h[0]
    }

    /// `key = value` lines that reproduce this configuration.
    pub fn echo(&self) -> Vec<String> {
        let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(", ");
        let mut out = vec![
            format!("kind = {}", self.kind),
            format!("flux = {}", self.flux_spec),
            format!("n_particles = {}", self.n_particles),
            format!("h = {}", join(&mut self.h.iter().map(|h| h.to_string()))),
            format!("t_final = {}", self.t_final),
            format!(
                "p_list = {}",
                join(&mut self.p_list.iter().map(|p| p.get().to_string()))
            ),
            format!("nu = {}", self.nu),
            format!("seed = {}", self.seed),
            format!("samples = {}", self.samples),
            format!("tol = {:e}", self.tol),
            format!("radius = {}", self.radius),
            format!("k_count = {}", self.k_count),
            format!("initial_a = {}", self.initial_a),
        ];
        if let Some(b) = &self.initial_b {
            out.push(format!("initial_b = {b}"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Top,
    Flux,
    InitialA,
    InitialB,
}

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Top => "",
            Section::Flux => "flux",
            Section::InitialA => "initial_a",
            Section::InitialB => "initial_b",
        }
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            Section::Top => &[
                "kind",
                "n_particles",
                "h",
                "t_final",
                "p_list",
                "nu",
                "seed",
                "samples",
                "tol",
                "radius",
                "k_count",
                "output",
            ],
            Section::Flux => &["name", "speed", "table"],
            Section::InitialA | Section::InitialB => &["preset"],
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "flux" => Some(Section::Flux),
            "initial_a" => Some(Section::InitialA),
            "initial_b" => Some(Section::InitialB),
            _ => None,
        }
    }
}

type Entries = BTreeMap<(Section, String), String>;

fn full_key(section: Section, key: &str) -> String {
    match section {
        Section::Top => key.to_string(),
        s => format!("{}.{key}", s.name()),
    }
}

fn tokenize(text: &str) -> Result<Entries> {
    let mut entries = Entries::new();
    let mut section = Section::Top;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| Error::ConfigSyntax {
                line,
                msg: "unterminated section header".into(),
            })?;
            section = Section::from_name(name.trim()).ok_or_else(|| Error::ConfigSyntax {
                line,
                msg: format!("unknown section `{}`", name.trim()),
            })?;
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigSyntax {
            line,
            msg: "expected `key = value`".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::ConfigSyntax {
                line,
                msg: "expected `key = value`".into(),
            });
        }
        if !section.keys().contains(&key) {
            return Err(Error::ConfigSyntax {
                line,
                msg: format!("unknown key `{}`", full_key(section, key)),
            });
        }
        if entries.insert((section, key.to_string()), value.to_string()).is_some() {
            return Err(Error::ConfigSyntax {
                line,
                msg: format!("duplicate key `{}`", full_key(section, key)),
            });
        }
    }
    Ok(entries)
}

fn apply_override(entries: &mut Entries, assignment: &str) -> Result<()> {
    let bad = |msg: String| Error::field(assignment.to_string(), msg);
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| bad("override must be `key=value`".into()))?;
    let (key, value) = (key.trim(), value.trim());
    let (section, key) = match key.split_once('.') {
        Some((s, k)) => (
            Section::from_name(s).ok_or_else(|| bad(format!("unknown section `{s}`")))?,
            k,
        ),
        None => (Section::Top, key),
    };
    if !section.keys().contains(&key) {
        return Err(bad(format!("unknown key `{}`", full_key(section, key))));
    }
    if value.is_empty() {
        return Err(bad("empty value".into()));
    }
    entries.insert((section, key.to_string()), value.to_string());
    Ok(())
}

fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let (num, den): (f64, f64) = (
                num.trim().parse().map_err(|_| format!("bad number `{s}`"))?,
                den.trim().parse().map_err(|_| format!("bad number `{s}`"))?,
            );
            num / den
        }
        None => s.parse().map_err(|_| format!("bad number `{s}`"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("non-finite number `{s}`"))
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    let s = s.trim();
    let inner = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .unwrap_or(s);
    inner.split(',').map(parse_real).collect()
}

struct Fields {
    entries: Entries,
}

impl Fields {
    fn raw(&self, section: Section, key: &str) -> Option<&str> {
        self.entries
            .get(&(section, key.to_string()))
            .map(String::as_str)
    }

    fn get<T>(
        &self,
        section: Section,
        key: &str,
        parse: impl FnOnce(&str) -> std::result::Result<T, String>,
    ) -> Result<Option<T>> {
        self.raw(section, key)
            .map(|v| parse(v).map_err(|msg| Error::field(full_key(section, key), msg)))
            .transpose()
    }
}

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    s.trim().parse().map_err(|_| format!("expected a count, got `{s}`"))
}

/// Parses and validates a configuration, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with_overrides(text, &[])
}

/// `parse_config` with `key=value` (or `section.key=value`) overrides applied after
/// the file is read.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut entries = tokenize(text)?;
    for o in overrides {
        apply_override(&mut entries, o)?;
    }
    build(Fields { entries })
}

pub fn read_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_with_overrides(&text, overrides)
}

fn build(fields: Fields) -> Result<ExperimentConfig> {
    use Section::*;
    let kind: ExperimentKind = fields
        .raw(Top, "kind")
        .ok_or_else(|| Error::field("kind", "missing"))?
        .parse()?;

    let flux_spec = match (
        fields.raw(Flux, "name"),
        fields.raw(Flux, "table"),
    ) {
        (Some(_), Some(_)) => {
            return Err(Error::field("flux", "give either `name` or `table`, not both"))
        }
        (None, None) => return Err(Error::field("flux", "missing [flux] name or table")),
        (None, Some(path)) => {
            if fields.raw(Flux, "speed").is_some() {
                return Err(Error::field("flux.speed", "only applies to `linear`"));
            }
            FluxSpec::Table(PathBuf::from(path))
        }
        (Some(name), None) => FluxSpec::Builtin {
            name: name.to_string(),
            speed: fields.get(Flux, "speed", parse_real)?,
        },
    };
    let flux = flux_spec.build().map_err(|e| match e {
        Error::Io { .. } => e,
        other => Error::field("flux", other.to_string()),
    })?;

    let n_particles = fields
        .get(Top, "n_particles", parse_count)?
        .unwrap_or(DEFAULT_N_PARTICLES);
    if n_particles == 0 {
        return Err(Error::field("n_particles", "must be at least 1"));
    }
    let h = fields.get(Top, "h", parse_list)?.unwrap_or(vec![DEFAULT_H]);
    if let Some(bad) = h.iter().find(|&&h| !(h > 0.0)) {
        return Err(Error::field("h", format!("must be positive, got {bad}")));
    }
    if h.len() > 1 && kind != ExperimentKind::ConvergenceStudy {
        return Err(Error::field("h", format!("{kind} takes a single step size")));
    }
    let t_final = fields
        .get(Top, "t_final", parse_real)?
        .unwrap_or(DEFAULT_T_FINAL);
    if t_final < 0.0 {
        return Err(Error::field("t_final", "must be nonnegative"));
    }
    let p_list = fields
        .get(Top, "p_list", parse_list)?
        .unwrap_or(vec![1.0, 2.0])
        .into_iter()
        .map(OrderP::new)
        .collect::<Result<Vec<_>>>()
        .map_err(|_| Error::field("p_list", "every order must be at least 1"))?;
    let nu = fields.get(Top, "nu", parse_real)?.unwrap_or(0.0);
    if nu < 0.0 {
        return Err(Error::field("nu", "must be nonnegative"));
    }
    match (kind, nu > 0.0) {
        (ExperimentKind::ViscousContraction, false) => {
            return Err(Error::field("nu", "viscous_contraction needs nu > 0"))
        }
        (k, true) if k != ExperimentKind::ViscousContraction => {
            return Err(Error::field("nu", format!("{k} is inviscid; nu must be 0")))
        }
        _ => {}
    }
    let seed = fields
        .get(Top, "seed", |s| {
            s.parse::<u64>().map_err(|_| format!("expected a 64-bit seed, got `{s}`"))
        })?
        .unwrap_or(DEFAULT_SEED);
    let samples = fields
        .get(Top, "samples", parse_count)?
        .unwrap_or(DEFAULT_SAMPLES);
    let min_samples = if kind == ExperimentKind::EntropyResidual { 3 } else { 2 };
    if samples < min_samples {
        return Err(Error::field(
            "samples",
            format!("{kind} needs at least {min_samples}"),
        ));
    }
    let tol = fields.get(Top, "tol", parse_real)?.unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0) {
        return Err(Error::field("tol", "must be positive"));
    }
    let radius = fields
        .get(Top, "radius", parse_real)?
        .unwrap_or(DEFAULT_RADIUS);
    if kind == ExperimentKind::MomentAudit {
        let reach = h[0] * flux.lipschitz_bound();
        if !(radius > reach) {
            return Err(Error::field(
                "radius",
                format!("must exceed h M = {reach} for the tail bound"),
            ));
        }
    }
    let k_count = fields
        .get(Top, "k_count", parse_count)?
        .unwrap_or(DEFAULT_K_COUNT);
    if k_count < 2 {
        return Err(Error::field("k_count", "need at least 2 levels"));
    }

    let initial_a = fields
        .get(InitialA, "preset", |s| InitialSpec::parse(s, seed))?
        .unwrap_or(InitialSpec::Random(RandomSpec::with_seed(seed)));
    let initial_b = if kind.uses_pair() {
        Some(
            fields
                .get(InitialB, "preset", |s| {
                    InitialSpec::parse(s, seed.wrapping_add(1))
                })?
                .unwrap_or(InitialSpec::Random(RandomSpec::with_seed(
                    seed.wrapping_add(1),
                ))),
        )
    } else {
        if fields.raw(InitialB, "preset").is_some() {
            return Err(Error::field(
                "initial_b.preset",
                format!("{kind} uses a single initial datum"),
            ));
        }
        None
    };
    let output = fields.raw(Top, "output").map(PathBuf::from);

    Ok(ExperimentConfig {
        kind,
        flux_spec,
        flux,
        n_particles,
        h,
        t_final,
        p_list,
        nu,
        seed,
        samples,
        tol,
        radius,
        k_count,
        initial_a,
        initial_b,
        output,
    })
}
