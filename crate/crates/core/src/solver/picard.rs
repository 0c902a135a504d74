use serde::Serialize;

use super::integral::{free_evolution, integral_map_on_grid};
use super::monitors::{check_admissible, m_functional};
use super::{InitialIterate, Problem, SolverSettings, TimeGrid, TriangleSolution};
use crate::error::{Error, Result};
use crate::scale::{lambda0, weighted_gamma_distance, weighted_gamma_norm, Lambda0, ScaleWindow};

/// Relative slack allowed on measured contraction ratios.
const RATIO_SLACK: f64 = 1e-9;

/// Per-iterate record of a Picard run.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub lambda0: Lambda0,
    pub lambda: f64,
    /// Contraction factor `lambda0 / lambda`.
    pub rho: f64,
    /// `d_k = ||u^(k+1) - u^(k)||^(gamma)`, `k = 0, 1, ...`.
    pub increments: Vec<f64>,
    /// `d_k / d_{k-1}`; `None` for `k = 0` or a vanishing denominator.
    pub ratios: Vec<Option<f64>>,
    /// `M(u^(k))` for every iterate including the start.
    pub m_values: Vec<f64>,
    /// Bound on `M(u)` defining the admissible set.
    pub apriori_bound: f64,
    /// `sup ||u^(k)(t) - x||_alpha` over the grid, per iterate.
    pub radius_distances: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `d_K rho / (1 - rho)`: certified distance of the returned iterate to the fixed point.
    pub tail_bound: f64,
    /// Floor below which increments are treated as round-off.
    pub noise_floor: f64,
    pub solution_horizon: f64,
    pub grid_end: f64,
    pub dt: f64,
}

impl ConvergenceReport {
    /// `apriori_bound - M(u^(k))` per iterate.
    pub fn apriori_margins(&self) -> Vec<f64> {
        self.m_values.iter().map(|m| self.apriori_bound - m).collect()
    }
}

/// Iterate `u^(k+1) = U(., 0) x + T(u^(k))` until `d_k <= tol` or the iteration budget runs out.
///
/// Fails with [`Error::Infeasible`] if `lambda <= lambda0`, with
/// [`Error::ContractionViolation`] if a measured ratio (above the round-off floor)
/// exceeds `lambda0 / lambda`, and with [`Error::Admissibility`] if an iterate leaves
/// the radius-`r` ball around `x`.
pub fn picard_solve(
    problem: &Problem,
    window: &ScaleWindow,
    settings: &SolverSettings,
) -> Result<(TriangleSolution, ConvergenceReport)> {
    settings.validate()?;
    window.validate()?;
    let l0 = lambda0(window, &problem.constants, window.radius)?;
    if !(window.lambda > l0.value) {
        return Err(Error::Infeasible {
            lambda: window.lambda,
            lambda0: l0.value,
        });
    }
    let rho = l0.value / window.lambda;
    let scale = &*problem.scale;

    let grid = TimeGrid::for_window(window, settings.theta, settings.steps)?;
    let alphas = window.alpha_grid(settings.alpha_intervals);
    let free = free_evolution(&*problem.evolution, &problem.initial, &grid.times);
    let start = match settings.start {
        InitialIterate::Propagated => free.clone(),
        InitialIterate::Constant => vec![problem.initial.clone(); grid.len()],
    };
    let mut u = TriangleSolution::on_grid(&grid, start, alphas, window)?;
    let free_sol = u.with_values(free.clone());
    let noise_floor =
        1024.0 * f64::EPSILON * (1.0 + weighted_gamma_norm(&free_sol, window, scale)?);

    let bound = window.apriori_bound(&problem.constants);
    let mut radius_distances = vec![check_admissible(problem, window, &u)?];
    let mut m_values = vec![m_functional(problem, window, &u, settings.tau_samples)];
    let mut increments: Vec<f64> = Vec::new();
    let mut ratios = Vec::new();
    let mut converged = false;

    for k in 0..settings.max_iterations {
        let next = u.with_values(integral_map_on_grid(problem, &grid.times, u.values(), &free));
        let d = weighted_gamma_distance(&next, &u, window, window.gamma, scale)?;
        let ratio = match increments.last() {
            Some(&prev) if prev > 0.0 => Some(d / prev),
            _ => None,
        };
        if let (Some(r), Some(&prev)) = (ratio, increments.last()) {
            if prev > noise_floor && d > noise_floor && r > rho * (1.0 + RATIO_SLACK) {
                return Err(Error::ContractionViolation {
                    iterate: k,
                    ratio: r,
                    bound: rho,
                });
            }
        }
        increments.push(d);
        ratios.push(ratio);
        radius_distances.push(check_admissible(problem, window, &next)?);
        m_values.push(m_functional(problem, window, &next, settings.tau_samples));
        u = next;
        if d <= settings.tol {
            converged = true;
            break;
        }
    }

    let last = increments.last().copied().unwrap_or(0.0);
    let report = ConvergenceReport {
        lambda0: l0,
        lambda: window.lambda,
        rho,
        iterations: increments.len(),
        increments,
        ratios,
        m_values,
        apriori_bound: bound,
        radius_distances,
        converged,
        tail_bound: last * rho / (1.0 - rho),
        noise_floor,
        solution_horizon: window.solution_horizon(),
        grid_end: grid.times[grid.len() - 1],
        dt: grid.dt,
    };
    Ok((u, report))
}
