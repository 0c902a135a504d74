use serde::Serialize;

use crate::error::{Error, Result};
use crate::scale::{ScaleNorm, ScaleWindow};

/// Uniform time grid `t_j = j * dt`, `j = 0..=steps`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub times: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(end: f64, steps: usize) -> Result<Self> {
        if !(end > 0.0 && end.is_finite()) || steps == 0 {
            return Err(Error::domain(format!(
                "time grid needs end > 0 and steps >= 1 (got {end}, {steps})"
            )));
        }
        let dt = end / steps as f64;
        let times = (0..=steps)
            .map(|j| if j == steps { end } else { j as f64 * dt })
            .collect();
        Ok(TimeGrid { dt, times })
    }

    /// Grid on `[0, theta * (alpha_top - alpha0) / lambda]`.
    pub fn for_window(window: &ScaleWindow, theta: f64, steps: usize) -> Result<Self> {
        Self::uniform(theta * window.solution_horizon(), steps)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Values of `u` on a time grid, with the diagnostic alpha nodes and the mask of
/// `(t, alpha)` pairs inside the triangle `t < (alpha - alpha0) / lambda`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TriangleSolution {
    times: Vec<f64>,
    dt: f64,
    values: Vec<Vec<f64>>,
    alphas: Vec<f64>,
    mask: Vec<Vec<bool>>,
}

impl TriangleSolution {
    pub fn new(
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
        alphas: Vec<f64>,
        window: &ScaleWindow,
    ) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::domain("empty time grid"));
        }
        if times.len() != values.len() {
            return Err(Error::domain(format!(
                "{} time nodes but {} values",
                times.len(),
                values.len()
            )));
        }
        let dim = values[0].len();
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::domain("state vectors of unequal length"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("time grid must be strictly increasing"));
        }
        let top = window.solution_horizon();
        if times[times.len() - 1] >= top {
            return Err(Error::domain(format!(
                "time node {} reaches the horizon {top}",
                times[times.len() - 1]
            )));
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        let mask = times
            .iter()
            .map(|&t| {
                alphas
                    .iter()
                    .map(|&a| a > window.alpha0 && t < window.alpha_horizon(a))
                    .collect()
            })
            .collect();
        Ok(TriangleSolution {
            times,
            dt,
            values,
            alphas,
            mask,
        })
    }

    pub fn on_grid(
        grid: &TimeGrid,
        values: Vec<Vec<f64>>,
        alphas: Vec<f64>,
        window: &ScaleWindow,
    ) -> Result<Self> {
        Self::new(grid.times.clone(), values, alphas, window)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn value(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn mask(&self) -> &[Vec<bool>] {
        &self.mask
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn into_values(self) -> Vec<Vec<f64>> {
        self.values
    }

    pub(crate) fn with_values(&self, values: Vec<Vec<f64>>) -> Self {
        TriangleSolution {
            values,
            ..self.clone()
        }
    }

    /// Continuity surrogate: `max_j ||u(t_{j+1}) - u(t_j)||_alpha / dt`.
    pub fn lipschitz_estimate(&self, scale: &dyn ScaleNorm, alpha: f64) -> f64 {
        self.values
            .windows(2)
            .map(|w| scale.norm(&super::sub(&w[1], &w[0]), alpha) / self.dt)
            .fold(0.0, f64::max)
    }
}
