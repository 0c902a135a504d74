//! Generic fixed-point engine for `u(t) = U(t,0)x + int_0^t U(t,s) B(u(s),s) ds`.
//!
//! The state space is finite-dimensional (flat `Vec<f64>`) and carries a family
//! of norms indexed by the scale parameter. The evolution system `U` and the
//! perturbation `B` are supplied through the [`EvolutionSystem`] and
//! [`Perturbation`] traits together with the constants they satisfy.

mod integral;
mod monitors;
mod picard;
mod trajectory;

pub use integral::{free_evolution, integral_map, integral_map_on_grid};
pub use monitors::{
    apriori_check, contraction_check, residual_check, AprioriReport, ContractionReport,
    ResidualReport,
};
pub use picard::{picard_solve, ConvergenceReport};
pub use trajectory::{TimeGrid, TriangleSolution};

use serde::{Deserialize, Serialize};

use crate::scale::{OvcyannikovConstants, Radius, ScaleNorm};

/// A two-parameter propagator `U(t,s)` together with its generator.
///
/// Implementations must satisfy `propagate(t, t, v) == v` exactly and the
/// cocycle law `U(t,r)U(r,s) = U(t,s)` up to integrator tolerance.
pub trait EvolutionSystem: Send + Sync {
    /// `U(t,s) v` for `s <= t`.
    fn propagate(&self, t: f64, s: f64, v: &[f64]) -> Vec<f64>;
    /// `A(t) v`.
    fn generator(&self, t: f64, v: &[f64]) -> Vec<f64>;
    /// Declared `C1` in `||U(t,s)||_{alpha' -> alpha} <= C1 / (alpha - alpha')^beta`.
    fn c1(&self) -> f64;
    fn beta(&self) -> f64;
}

/// The nonlinear part `B(u, t)`.
pub trait Perturbation: Send + Sync {
    fn apply(&self, v: &[f64], t: f64) -> Vec<f64>;
    /// Declared Ovcyannikov Lipschitz constant.
    fn c2(&self) -> f64;
    /// Declared bound at the initial datum.
    fn c3(&self) -> f64;
    fn radius(&self) -> Radius;
}

/// Everything `picard_solve` needs about one problem instance.
pub struct Problem {
    pub scale: Box<dyn ScaleNorm + Send>,
    pub evolution: Box<dyn EvolutionSystem>,
    pub perturbation: Box<dyn Perturbation>,
    pub initial: Vec<f64>,
    pub constants: OvcyannikovConstants,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("dim", &self.initial.len())
            .field("constants", &self.constants)
            .finish()
    }
}

/// Which iterate the Picard loop starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialIterate {
    /// `u^(0)(t) = U(t,0) x`.
    #[default]
    Propagated,
    /// `u^(0)(t) = x` for every `t`.
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Stop once `||u^(k+1) - u^(k)||^(gamma) <= tol`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Number of uniform time steps on `[0, theta * horizon]`.
    pub steps: usize,
    /// Safety factor keeping the grid away from the degenerate horizon.
    pub theta: f64,
    /// Number of intervals of the diagnostic alpha grid.
    pub alpha_intervals: usize,
    pub start: InitialIterate,
    /// Number of `tau` samples used when evaluating `M(u)`.
    pub tau_samples: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-12,
            max_iterations: 200,
            steps: 200,
            theta: 0.9,
            alpha_intervals: 8,
            start: InitialIterate::Propagated,
            tau_samples: 5,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        if !(self.tol > 0.0) {
            return Err(Error::domain("tol must be positive"));
        }
        if self.steps < 1 {
            return Err(Error::domain("need at least one time step"));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::domain("theta must lie in (0, 1)"));
        }
        if self.max_iterations < 1 {
            return Err(Error::domain("max_iterations must be at least 1"));
        }
        if self.tau_samples < 1 {
            return Err(Error::domain("tau_samples must be at least 1"));
        }
        Ok(())
    }
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
