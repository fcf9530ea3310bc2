//! Flux functions `f` on `[0, 1]`.
//!
//! Solutions take values in `[0, 1]`, so fluxes are only defined there and evaluating
//! outside that range is a caller bug.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Linear { speed: f64 },
    Burgers,
    ConcaveQuadratic,
    Cubic,
    Tabulated { knots: Vec<f64>, values: Vec<f64>, slopes: Vec<f64> },
}

/// A flux `f`, its derivative and `M = sup |f'|` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxModel {
    name: String,
    kind: Kind,
    lipschitz: f64,
}

const DOMAIN_SLACK: f64 = 1e-12;

#[inline]
fn check_state(u: f64) {
    assert!(
        (-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&u),
        "flux evaluated at u = {u} outside [0, 1]"
    );
}

impl FluxModel {
    /// `f(u) = c u`.
    pub fn linear(speed: f64) -> Result<Self> {
        if !speed.is_finite() {
            return Err(Error::InvalidFlux(format!("non-finite speed {speed}")));
        }
        Ok(Self {
            name: format!("linear({speed})"),
            kind: Kind::Linear { speed },
            lipschitz: speed.abs(),
        })
    }

    /// `f(u) = u^2 / 2`.
    pub fn burgers() -> Self {
        Self {
            name: "burgers".into(),
            kind: Kind::Burgers,
            lipschitz: 1.0,
        }
    }

    /// `f(u) = u - u^2 / 2`.
    pub fn concave_quadratic() -> Self {
        Self {
            name: "concave_quadratic".into(),
            kind: Kind::ConcaveQuadratic,
            lipschitz: 1.0,
        }
    }

    /// `f(u) = u^3 / 3`.
    pub fn cubic() -> Self {
        Self {
            name: "cubic".into(),
            kind: Kind::Cubic,
            lipschitz: 1.0,
        }
    }

    /// Built-in flux by name; `linear` takes its speed as the single parameter.
    pub fn builtin(name: &str, params: &[f64]) -> Result<Self> {
        let no_params = |flux: FluxModel| {
            if params.is_empty() {
                Ok(flux)
            } else {
                Err(Error::InvalidFlux(format!("`{name}` takes no parameters")))
            }
        };
        match name {
            "linear" => match params {
                [c] => Self::linear(*c),
                _ => Err(Error::InvalidFlux("`linear` takes exactly one speed".into())),
            },
            "burgers" => no_params(Self::burgers()),
            "concave_quadratic" => no_params(Self::concave_quadratic()),
            "cubic" => no_params(Self::cubic()),
            other => Err(Error::UnknownFlux(other.to_string())),
        }
    }

    /// Piecewise-linear flux through `(u, f(u))` samples. The first sample must be at
    /// `u = 0`, the last at `u = 1`, and `u` must be strictly ascending.
    pub fn tabulated(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidFlux("need at least 2 samples".into()));
        }
        if samples.iter().any(|(u, f)| !u.is_finite() || !f.is_finite()) {
            return Err(Error::InvalidFlux("non-finite sample".into()));
        }
        if samples.windows(2).any(|p| p[0].0 >= p[1].0) {
            return Err(Error::InvalidFlux("u values must be strictly ascending".into()));
        }
        let (first, last) = (samples[0].0, samples[samples.len() - 1].0);
        if first != 0.0 || last != 1.0 {
            return Err(Error::InvalidFlux(format!(
                "samples must span [0, 1], got [{first}, {last}]"
            )));
        }
        let (knots, values): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
        let slopes: Vec<f64> = samples
            .windows(2)
            .map(|p| (p[1].1 - p[0].1) / (p[1].0 - p[0].0))
            .collect();
        let lipschitz = slopes.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
        Ok(Self {
            name: "tabulated".into(),
            kind: Kind::Tabulated {
                knots,
                values,
                slopes,
            },
            lipschitz,
        })
    }

    /// Two whitespace-separated columns `u f(u)` per line; `#` starts a comment.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let parsed = match cols.as_slice() {
                [u, f] => u.parse::<f64>().ok().zip(f.parse::<f64>().ok()),
                _ => None,
            };
            match parsed {
                Some(s) => samples.push(s),
                None => {
                    return Err(Error::InvalidFlux(format!(
                        "line {}: expected two numbers",
                        lineno + 1
                    )))
                }
            }
        }
        Self::tabulated(&samples)
    }

    pub fn read_table(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_table(&text)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz
    }

    pub fn f(&self, u: f64) -> f64 {
        check_state(u);
        match &self.kind {
            Kind::Linear { speed } => speed * u,
            Kind::Burgers => 0.5 * u * u,
            Kind::ConcaveQuadratic => u - 0.5 * u * u,
            Kind::Cubic => u * u * u / 3.0,
            Kind::Tabulated {
                knots,
                values,
                slopes,
            } => {
                let k = segment(knots, u);
                values[k] + slopes[k] * (u - knots[k])
            }
        }
    }

    pub fn f_prime(&self, u: f64) -> f64 {
        check_state(u);
        match &self.kind {
            Kind::Linear { speed } => *speed,
            Kind::Burgers => u,
            Kind::ConcaveQuadratic => 1.0 - u,
            Kind::Cubic => u * u,
            Kind::Tabulated { knots, slopes, .. } => slopes[segment(knots, u)],
        }
    }

    /// Whether `f'` is nonincreasing on `[0, 1]`, i.e. an increasing jump from 0 to 1
    /// is an admissible shock rather than a rarefaction.
    pub fn has_nonincreasing_speed(&self) -> bool {
        match &self.kind {
            Kind::Linear { .. } | Kind::ConcaveQuadratic => true,
            Kind::Burgers | Kind::Cubic => false,
            Kind::Tabulated { slopes, .. } => slopes.windows(2).all(|p| p[1] <= p[0]),
        }
    }

    /// Whether `f'` is nondecreasing on `[0, 1]` (convex flux).
    pub fn has_nondecreasing_speed(&self) -> bool {
        match &self.kind {
            Kind::Linear { .. } | Kind::Burgers | Kind::Cubic => true,
            Kind::ConcaveQuadratic => false,
            Kind::Tabulated { slopes, .. } => slopes.windows(2).all(|p| p[1] >= p[0]),
        }
    }
}

impl fmt::Display for FluxModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

// Right-continuous segment lookup; u = 1 belongs to the last segment.
fn segment(knots: &[f64], u: f64) -> usize {
    knots
        .partition_point(|&k| k <= u)
        .saturating_sub(1)
        .min(knots.len() - 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builtins() -> Vec<FluxModel> {
        vec![
            FluxModel::burgers(),
            FluxModel::concave_quadratic(),
            FluxModel::cubic(),
            FluxModel::linear(-1.5).unwrap(),
            FluxModel::linear(0.7).unwrap(),
        ]
    }

    fn grid(n: usize) -> impl Iterator<Item = f64> {
        (0..=n).map(move |i| i as f64 / n as f64)
    }

    // composite Simpson on f' between a and b
    fn integrate_speed(flux: &FluxModel, a: f64, b: f64) -> f64 {
        let n = 200;
        let h = (b - a) / n as f64;
        let mut s = flux.f_prime(a) + flux.f_prime(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * flux.f_prime(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn builtin_values() {
        assert_eq!(FluxModel::burgers().f_prime(0.5), 0.5);
        let cq = FluxModel::concave_quadratic();
        assert_eq!(cq.f(1.0) - cq.f(0.0), 0.5);
        let lin = FluxModel::builtin("linear", &[2.0]).unwrap();
        assert_eq!(lin.f_prime(0.3), 2.0);
        assert_eq!(lin.lipschitz_bound(), 2.0);
    }

    #[test]
    fn builtin_errors() {
        assert!(matches!(FluxModel::builtin("nope", &[]), Err(Error::UnknownFlux(_))));
        assert!(FluxModel::builtin("linear", &[]).is_err());
        assert!(FluxModel::builtin("burgers", &[1.0]).is_err());
    }

    #[test]
    fn lipschitz_bound_dominates_speed() {
        for flux in builtins() {
            for u in grid(1000) {
                assert!(flux.f_prime(u).abs() <= flux.lipschitz_bound(), "{flux} at {u}");
            }
        }
    }

    #[test]
    fn derivative_consistency() {
        for flux in builtins() {
            for (a, b) in [(0.0, 1.0), (0.13, 0.77), (0.5, 0.51), (0.9, 0.2)] {
                let lhs = flux.f(b) - flux.f(a);
                assert!((lhs - integrate_speed(&flux, a, b)).abs() < 1e-6, "{flux}");
            }
        }
    }

    #[test]
    fn speed_monotonicity() {
        for flux in [FluxModel::burgers(), FluxModel::cubic()] {
            let s: Vec<f64> = grid(200).map(|u| flux.f_prime(u)).collect();
            assert!(s.windows(2).all(|p| p[0] <= p[1]));
            assert!(flux.has_nondecreasing_speed());
            assert!(!flux.has_nonincreasing_speed());
        }
        let cq = FluxModel::concave_quadratic();
        let s: Vec<f64> = grid(200).map(|u| cq.f_prime(u)).collect();
        assert!(s.windows(2).all(|p| p[0] >= p[1]));
        assert!(cq.has_nonincreasing_speed());
    }

    #[test]
    fn tabulated_burgers() {
        let samples: Vec<(f64, f64)> = grid(100).map(|u| (u, 0.5 * u * u)).collect();
        let t = FluxModel::tabulated(&samples).unwrap();
        assert!((t.f_prime(0.5) - 0.5).abs() <= 0.005 + 1e-12);
        assert!((t.lipschitz_bound() - 1.0).abs() <= 0.01);
        assert!((t.f(0.505) - 0.5 * 0.505 * 0.505).abs() < 1e-4);
        assert!(t.has_nondecreasing_speed());
        // right-continuous at knots, last segment at u = 1
        assert_eq!(t.f_prime(0.0), t.f_prime(0.005));
        assert!((t.f_prime(1.0) - 0.995).abs() < 1e-12);
    }

    #[test]
    fn two_point_table_is_linear() {
        let t = FluxModel::tabulated(&[(0.0, 0.0), (1.0, -0.75)]).unwrap();
        let lin = FluxModel::linear(-0.75).unwrap();
        for u in grid(17) {
            assert!((t.f(u) - lin.f(u)).abs() < 1e-15);
            assert_eq!(t.f_prime(u), lin.f_prime(u));
        }
        assert_eq!(t.lipschitz_bound(), 0.75);
    }

    #[test]
    fn tabulated_errors() {
        assert!(FluxModel::tabulated(&[(0.0, 0.0)]).is_err());
        assert!(FluxModel::tabulated(&[(0.0, 0.0), (0.5, 1.0), (0.4, 1.0), (1.0, 0.0)]).is_err());
        assert!(FluxModel::tabulated(&[(0.1, 0.0), (1.0, 1.0)]).is_err());
        assert!(FluxModel::tabulated(&[(0.0, 0.0), (1.2, 1.0)]).is_err());
    }

    #[test]
    fn table_text() {
        let t = FluxModel::parse_table("# u f\n0 0\n0.5  0.25\n\n1\t0\n").unwrap();
        assert_eq!(t.f_prime(0.2), 0.5);
        assert_eq!(t.f_prime(0.5), -0.5);
        assert!(FluxModel::parse_table("0 0\n1\n").is_err());
    }

    #[test]
    #[should_panic(expected = "outside [0, 1]")]
    fn domain_is_enforced() {
        FluxModel::burgers().f(1.5);
    }
}
