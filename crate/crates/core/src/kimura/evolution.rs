use std::sync::Arc;

use super::constants::kappa_integral;
use super::operators::apply_a0;
use super::KimuraModel;
use crate::solver::EvolutionSystem;

/// Step-halving error per unit time accepted when calibrating the RK4 step.
pub const STEP_TOLERANCE: f64 = 1e-10;

/// Largest number of halvings tried during calibration.
const MAX_HALVINGS: u32 = 24;

/// Evolution system `U(t,s)` generated by `-A0(t)`, integrated by classical RK4
/// with equal substeps no longer than a calibrated maximum.
#[derive(Clone, Debug)]
pub struct KimuraEvolution {
    model: Arc<KimuraModel>,
    max_step: f64,
    /// Step-halving error per unit time measured at `max_step`.
    calibration_error: f64,
    c1: f64,
}

impl KimuraEvolution {
    /// Calibrates the maximal substep on `[0, T]` so that comparing one run against
    /// a run with halved steps differs by less than `1e-10` per unit time in the
    /// `alpha_top` norm, starting from `k(eta) = e^{alpha_top |eta|}`.
    pub fn new(model: Arc<KimuraModel>, alpha_top: f64) -> Self {
        let layout = model.layout();
        let horizon = model.horizon();
        let probe: Vec<f64> = (0..layout.len())
            .map(|i| (alpha_top * layout.level(i) as f64).exp())
            .collect();
        let norm = |v: &[f64]| {
            (0..v.len())
                .map(|i| v[i].abs() * (-alpha_top * layout.level(i) as f64).exp())
                .fold(0.0, f64::max)
        };
        let mut steps = 1usize;
        let mut coarse = rk4_fixed(&model, horizon, 0.0, &probe, steps);
        let mut error = f64::INFINITY;
        for _ in 0..MAX_HALVINGS {
            let fine = rk4_fixed(&model, horizon, 0.0, &probe, 2 * steps);
            let diff: Vec<f64> = fine.iter().zip(&coarse).map(|(a, b)| a - b).collect();
            error = norm(&diff) / horizon;
            if error < STEP_TOLERANCE && error.is_finite() {
                break;
            }
            steps *= 2;
            coarse = fine;
        }
        let c1 = kappa_integral(&model, alpha_top, 0.0, horizon).exp();
        KimuraEvolution {
            max_step: horizon / steps as f64,
            calibration_error: error,
            model,
            c1,
        }
    }

    pub fn max_step(&self) -> f64 {
        self.max_step
    }

    pub fn calibration_error(&self) -> f64 {
        self.calibration_error
    }

    pub fn model(&self) -> &Arc<KimuraModel> {
        &self.model
    }
}

/// `n` classical RK4 steps for `v' = -A0(tau) v` from `s` to `t`.
pub(crate) fn rk4_fixed(model: &KimuraModel, t: f64, s: f64, v: &[f64], n: usize) -> Vec<f64> {
    let layout = model.layout();
    let w = model.space().weights();
    let h = (t - s) / n as f64;
    let f = |tau: f64, x: &[f64]| -> Vec<f64> {
        let r = model.rates().at(tau, w);
        apply_a0(layout, &r, x).into_iter().map(|y| -y).collect()
    };
    let mut x = v.to_vec();
    for step in 0..n {
        let t0 = s + step as f64 * h;
        x = rk4_step(&f, t0, h, &x);
    }
    x
}

/// One classical RK4 step for `x' = f(t, x)`.
pub(crate) fn rk4_step(f: &impl Fn(f64, &[f64]) -> Vec<f64>, t: f64, h: f64, x: &[f64]) -> Vec<f64> {
    let shift = |a: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect() };
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * h, &shift(0.5 * h, &k1));
    let k3 = f(t + 0.5 * h, &shift(0.5 * h, &k2));
    let k4 = f(t + h, &shift(h, &k3));
    (0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

impl EvolutionSystem for KimuraEvolution {
    fn propagate(&self, t: f64, s: f64, v: &[f64]) -> Vec<f64> {
        assert!(t >= s, "evolution requested backwards in time: t = {t} < s = {s}");
        if t == s {
            return v.to_vec();
        }
        let n = ((t - s) / self.max_step).ceil().max(1.0) as usize;
        rk4_fixed(&self.model, t, s, v, n)
    }

    fn generator(&self, t: f64, v: &[f64]) -> Vec<f64> {
        let r = self.model.rates().at(t, self.model.space().weights());
        apply_a0(self.model.layout(), &r, v)
            .into_iter()
            .map(|y| -y)
            .collect()
    }

    fn c1(&self) -> f64 {
        self.c1
    }

    fn beta(&self) -> f64 {
        0.0
    }
}
