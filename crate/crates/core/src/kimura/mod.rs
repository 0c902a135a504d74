//! Truncated correlation hierarchy of the Kimura-Maruyama mutation-selection model
//! on a finite mutation space.
//!
//! The state is the vector of correlation values `k(eta)` over configurations
//! `eta` of at most `n_max` distinct sites. The right-hand side splits as
//! `L k = -A0 k + A1 k + B^Delta(k) k`; `-A0` generates the evolution system and
//! `B(k) = A1 k + B^Delta(k) k` is the perturbation handed to the Picard solver.

mod constants;
mod evolution;
mod hierarchy;
pub mod operators;
mod rates;
mod space;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use constants::{kappa, kappa_integral, model_constants, KimuraConstants, RateSums};
pub use evolution::{KimuraEvolution, STEP_TOLERANCE};
pub use hierarchy::{CorrelationHierarchy, HierarchyEntry, HierarchyNorm};
pub use rates::{PairRate, PairValues, Profile, RateData, RatesAt, SiteRate, SiteValues};
pub use space::{DiscreteSpace, Layout, MAX_SITES};

pub(crate) use evolution::rk4_step;
pub use hierarchy::entries_of;

use crate::error::{Error, Result};
use crate::scale::{lambda0, Lambda0, Radius, ScaleWindow};
use crate::solver::{
    picard_solve, ConvergenceReport, EvolutionSystem, Perturbation, Problem, SolverSettings,
    TriangleSolution,
};

/// Mutation space, rates and truncation level.
#[derive(Clone, Debug, PartialEq)]
pub struct KimuraModel {
    space: DiscreteSpace,
    rates: RateData,
    layout: Arc<Layout>,
    horizon: f64,
}

impl KimuraModel {
    /// `horizon` is the time `T` on which the rates are declared.
    pub fn new(space: DiscreteSpace, rates: RateData, n_max: usize, horizon: f64) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::Model(format!(
                "n_max = {n_max}: the pair term of B^Delta needs n_max >= 2"
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Model(format!("horizon T = {horizon} must be positive")));
        }
        rates.validate(space.sites())?;
        let layout = Arc::new(Layout::new(space.sites(), n_max)?);
        Ok(KimuraModel {
            space,
            rates,
            layout,
            horizon,
        })
    }

    pub fn space(&self) -> &DiscreteSpace {
        &self.space
    }

    pub fn rates(&self) -> &RateData {
        &self.rates
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn n_max(&self) -> usize {
        self.layout.n_max()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Same space and truncation with different rates.
    pub fn with_rates(&self, rates: RateData) -> Result<Self> {
        Self::new(self.space.clone(), rates, self.n_max(), self.horizon)
    }

    pub fn rates_at(&self, t: f64) -> RatesAt {
        self.rates.at(t, self.space.weights())
    }

    pub fn zeros(&self) -> CorrelationHierarchy {
        CorrelationHierarchy::zeros(self.layout.clone())
    }

    pub fn poisson(&self, density: &[f64]) -> Result<CorrelationHierarchy> {
        CorrelationHierarchy::poisson(self.layout.clone(), density)
    }

    pub fn hierarchy(&self, values: Vec<f64>) -> Result<CorrelationHierarchy> {
        CorrelationHierarchy::from_values(self.layout.clone(), values)
    }

    pub fn norm(&self) -> HierarchyNorm {
        HierarchyNorm::new(self.layout.clone())
    }

    fn check(&self, k: &CorrelationHierarchy) -> Result<()> {
        if **k.layout() != *self.layout {
            return Err(Error::domain("hierarchy belongs to a different layout"));
        }
        Ok(())
    }

    /// `Phi(t, eta)` for a configuration of distinct 0-based sites.
    pub fn selection_cost(&self, t: f64, sites: &[usize]) -> Result<f64> {
        let mask = self.layout.mask_of(sites)?;
        Ok(operators::selection_cost(&self.rates_at(t), mask))
    }

    pub fn apply_a0(&self, t: f64, k: &CorrelationHierarchy) -> Result<CorrelationHierarchy> {
        self.check(k)?;
        let v = operators::apply_a0(&self.layout, &self.rates_at(t), k.values());
        self.hierarchy(v)
    }

    pub fn apply_a1(&self, t: f64, k: &CorrelationHierarchy) -> Result<CorrelationHierarchy> {
        self.check(k)?;
        let v = operators::apply_a1(&self.layout, &self.rates_at(t), k.values());
        self.hierarchy(v)
    }

    pub fn bdelta(&self, t: f64, k: &CorrelationHierarchy) -> Result<f64> {
        self.check(k)?;
        Ok(operators::bdelta(&self.layout, &self.rates_at(t), k.values()))
    }

    pub fn apply_ldelta(&self, t: f64, k: &CorrelationHierarchy) -> Result<CorrelationHierarchy> {
        self.check(k)?;
        let v = operators::apply_ldelta(&self.layout, &self.rates_at(t), k.values());
        self.hierarchy(v)
    }
}

/// `U(t,s) k` for a concrete evolution; errors if `t < s`.
pub fn evolution_u(
    evolution: &KimuraEvolution,
    t: f64,
    s: f64,
    k: &CorrelationHierarchy,
) -> Result<CorrelationHierarchy> {
    if !(t >= s && s >= 0.0) {
        return Err(Error::domain(format!("need 0 <= s <= t, got s = {s}, t = {t}")));
    }
    evolution.model().check(k)?;
    evolution.model().hierarchy(evolution.propagate(t, s, k.values()))
}

/// `B(k, t) = A1(t) k + B^Delta(t, k) k` with its declared constants.
#[derive(Clone, Debug)]
pub struct KimuraPerturbation {
    model: Arc<KimuraModel>,
    c2: f64,
    c3: f64,
    radius: Radius,
}

impl KimuraPerturbation {
    pub fn new(model: Arc<KimuraModel>, c2: f64, c3: f64, radius: Radius) -> Self {
        KimuraPerturbation {
            model,
            c2,
            c3,
            radius,
        }
    }
}

impl Perturbation for KimuraPerturbation {
    fn apply(&self, v: &[f64], t: f64) -> Vec<f64> {
        operators::apply_perturbation(&self.model.layout, &self.model.rates_at(t), v)
    }

    fn c2(&self) -> f64 {
        self.c2
    }

    fn c3(&self) -> f64 {
        self.c3
    }

    fn radius(&self) -> Radius {
        self.radius
    }
}

/// How the horizon slope `lambda` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Slope {
    /// `lambda = factor * lambda0`.
    Auto(f64),
    Fixed(f64),
}

impl Default for Slope {
    fn default() -> Self {
        Slope::Auto(2.0)
    }
}

/// A hierarchy model wired into the generic solver.
#[derive(Debug)]
pub struct KimuraSetup {
    pub model: Arc<KimuraModel>,
    pub evolution: KimuraEvolution,
    pub constants: KimuraConstants,
    pub lambda0: Lambda0,
    /// Window with the resolved slope.
    pub window: ScaleWindow,
    pub problem: Problem,
}

/// Computes the constants, resolves the slope and builds the solver problem.
///
/// `window.lambda` is ignored for [`Slope::Auto`]. A constants override (for
/// example a deliberately understated `C2`) can be applied by editing
/// `problem.constants` before solving.
pub fn kimura_setup(
    model: Arc<KimuraModel>,
    k0: &CorrelationHierarchy,
    window: &ScaleWindow,
    slope: Slope,
) -> Result<KimuraSetup> {
    model.check(k0)?;
    let constants = model_constants(&model, window, k0)?;
    let l0 = lambda0(window, &constants.certificate, window.radius)?;
    let lambda = match slope {
        Slope::Auto(f) => {
            if !(f > 1.0) {
                return Err(Error::domain(format!("slope factor {f} must exceed 1")));
            }
            f * l0.value
        }
        Slope::Fixed(l) => l,
    };
    let window = window.with_lambda(lambda)?;
    let evolution = KimuraEvolution::new(model.clone(), window.alpha_top);
    let c = constants.certificate;
    let problem = Problem {
        scale: Box::new(model.norm()),
        evolution: Box::new(evolution.clone()),
        perturbation: Box::new(KimuraPerturbation::new(model.clone(), c.c2, c.c3, window.radius)),
        initial: k0.values().to_vec(),
        constants: c,
    };
    Ok(KimuraSetup {
        model,
        evolution,
        constants,
        lambda0: l0,
        window,
        problem,
    })
}

/// Solves the hierarchy equation from `k0` with `lambda` chosen by `slope`.
pub fn solve_kimura(
    model: Arc<KimuraModel>,
    k0: &CorrelationHierarchy,
    window: &ScaleWindow,
    slope: Slope,
    settings: &SolverSettings,
) -> Result<(TriangleSolution, ConvergenceReport)> {
    let level0 = k0.values()[0];
    if (level0 - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!("initial hierarchy must satisfy k(empty) = 1, got {level0}")));
    }
    let setup = kimura_setup(model, k0, window, slope)?;
    picard_solve(&setup.problem, &setup.window, settings)
}
