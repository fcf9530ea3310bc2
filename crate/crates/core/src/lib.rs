//! Transport-collapse time stepping for one-dimensional scalar conservation laws
//! `u_t + f(u)_x = 0` whose solutions are cumulative distribution functions, plus
//! exact one-dimensional Wasserstein distances to measure the scheme.
//!
//! Measures are equal-mass particle systems stored as sorted quantile samples at the
//! midpoint nodes `w_i = (i + 1/2) / N`. In that representation one scheme step is
//! "move every particle with the characteristic speed of its label, then sort".

pub mod error;
pub mod flux;
pub mod harness;
pub mod measure;
pub mod transport;
pub mod viscous;
pub mod wasserstein;

pub use error::{Error, Result};
pub use flux::FluxModel;
pub use measure::{Cdf, MixtureState, ParticleQuantiles, StepCdf};
pub use transport::{RawPositions, SchemeState};
pub use wasserstein::OrderP;
