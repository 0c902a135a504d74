//! Affine test problems `u' = -a u + g u + c` with closed-form solutions.
//!
//! The scale is trivial (max-abs norm for every `alpha`), so the declared
//! constants are exact and the solver can be compared against `exp`.

use crate::error::{Error, Result};
use crate::scale::{OvcyannikovConstants, Radius, ScaleNorm, ScaleWindow, UniformNorm};
use crate::solver::{EvolutionSystem, Perturbation, Problem};

/// `U(t,s) v = exp(-rate (t - s)) v`.
#[derive(Clone, Copy, Debug)]
pub struct ExponentialEvolution {
    pub rate: f64,
}

impl EvolutionSystem for ExponentialEvolution {
    fn propagate(&self, t: f64, s: f64, v: &[f64]) -> Vec<f64> {
        if t == s {
            return v.to_vec();
        }
        let f = (-self.rate * (t - s)).exp();
        v.iter().map(|x| f * x).collect()
    }

    fn generator(&self, _t: f64, v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| -self.rate * x).collect()
    }

    fn c1(&self) -> f64 {
        1.0
    }

    fn beta(&self) -> f64 {
        0.0
    }
}

/// `B(u, t) = gain * u + offset`.
#[derive(Clone, Debug)]
pub struct AffinePerturbation {
    pub gain: f64,
    pub offset: Vec<f64>,
    pub c2: f64,
    pub c3: f64,
    pub radius: Radius,
}

impl Perturbation for AffinePerturbation {
    fn apply(&self, v: &[f64], _t: f64) -> Vec<f64> {
        v.iter()
            .zip(&self.offset)
            .map(|(x, c)| self.gain * x + c)
            .collect()
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

/// Builds the affine problem with its exact constants on `window`.
///
/// `C2 = |gain| (alpha_top - alpha_star)`, `C3 = ||B(x)|| (alpha_top - alpha_star)`,
/// `C(x) = rate ||x||`.
pub fn affine_problem(
    rate: f64,
    gain: f64,
    offset: Vec<f64>,
    x: Vec<f64>,
    window: &ScaleWindow,
) -> Result<Problem> {
    if !(rate >= 0.0 && rate.is_finite() && gain.is_finite()) {
        return Err(Error::domain("rate must be finite and >= 0, gain finite"));
    }
    if offset.len() != x.len() {
        return Err(Error::domain("offset and initial datum differ in length"));
    }
    let span = window.alpha_top - window.alpha_star;
    let x_norm = UniformNorm.norm(&x, window.alpha_star);
    let perturbation = AffinePerturbation {
        gain,
        offset,
        c2: gain.abs() * span,
        c3: 0.0,
        radius: window.radius,
    };
    let bx = UniformNorm.norm(&perturbation.apply(&x, 0.0), window.alpha_star);
    let perturbation = AffinePerturbation {
        c3: bx * span,
        ..perturbation
    };
    let constants = OvcyannikovConstants {
        c1: 1.0,
        beta: 0.0,
        c2: perturbation.c2,
        c3: perturbation.c3,
        cx: rate * x_norm,
        x_norm,
    };
    Ok(Problem {
        scale: Box::new(UniformNorm),
        evolution: Box::new(ExponentialEvolution { rate }),
        perturbation: Box::new(perturbation),
        initial: x,
        constants,
    })
}

/// Exact solution of `u' = (gain - rate) u + c`, `u(0) = x`, componentwise.
pub fn affine_solution(rate: f64, gain: f64, offset: &[f64], x: &[f64], t: f64) -> Vec<f64> {
    let k = gain - rate;
    let e = (k * t).exp();
    // (e^{kt} - 1) / k, continuous at k = 0
    let growth = if k == 0.0 { t } else { (k * t).exp_m1() / k };
    x.iter()
        .zip(offset)
        .map(|(xi, ci)| e * xi + ci * growth)
        .collect()
}
