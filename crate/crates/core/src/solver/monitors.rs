use rayon::prelude::*;
use serde::Serialize;

use super::integral::{free_evolution, integral_map_on_grid};
use super::{sub, Problem, TriangleSolution};
use crate::error::{Error, Result};
use crate::scale::{lambda0, weighted_gamma_distance, Radius, ScaleWindow};

/// `sup ||u(t) - x||_alpha` over the masked nodes; errors once it exceeds a finite radius.
pub(crate) fn check_admissible(
    problem: &Problem,
    window: &ScaleWindow,
    u: &TriangleSolution,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for (j, (&t, v)) in u.times().iter().zip(u.values()).enumerate() {
        let diff = sub(v, &problem.initial);
        for (&alpha, &inside) in u.alphas().iter().zip(&u.mask()[j]) {
            if !inside {
                continue;
            }
            let d = problem.scale.norm(&diff, alpha);
            if let Radius::Finite(r) = window.radius {
                if d > r {
                    return Err(Error::Admissibility {
                        node: j,
                        t,
                        alpha,
                        distance: d,
                        radius: r,
                    });
                }
            }
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

fn tau_samples(window: &ScaleWindow, count: usize) -> Vec<f64> {
    let h = window.solution_horizon();
    if count == 1 {
        return vec![0.0];
    }
    (0..count)
        .map(|i| h * i as f64 / (count - 1) as f64)
        .collect()
}

/// `M(u) = sup_tau sup_{(t, alpha)} (alpha - alpha0 - lambda t)^gamma ||B(u(t), tau)||_alpha`
/// over the masked grid nodes and `count` equispaced `tau` in `[0, (alpha_top - alpha0) / lambda]`.
pub(crate) fn m_functional(
    problem: &Problem,
    window: &ScaleWindow,
    u: &TriangleSolution,
    count: usize,
) -> f64 {
    sampled_m(problem, window, u, count)
        .into_iter()
        .fold(0.0, |m, (_, _, _, v)| m.max(v))
}

fn sampled_m(
    problem: &Problem,
    window: &ScaleWindow,
    u: &TriangleSolution,
    count: usize,
) -> Vec<(f64, f64, f64, f64)> {
    let taus = tau_samples(window, count);
    let jobs: Vec<(usize, f64)> = (0..u.times().len())
        .flat_map(|j| taus.iter().map(move |&tau| (j, tau)))
        .collect();
    let per_job: Vec<Vec<(f64, f64, f64, f64)>> = jobs
        .par_iter()
        .map(|&(j, tau)| {
            let t = u.times()[j];
            let b = problem.perturbation.apply(u.value(j), tau);
            u.alphas()
                .iter()
                .zip(&u.mask()[j])
                .filter(|(_, &inside)| inside)
                .map(|(&alpha, _)| {
                    let w = window.distance_to_horizon(alpha, t).powf(window.gamma);
                    (t, tau, alpha, w * problem.scale.norm(&b, alpha))
                })
                .collect()
        })
        .collect();
    per_job.into_iter().flatten().collect()
}

/// Worst sampled point of the a-priori estimate on `M(u)`.
#[derive(Clone, Debug, Serialize)]
pub struct AprioriReport {
    pub bound: f64,
    /// Largest sampled `(alpha - alpha0 - lambda t)^gamma ||B(u(t), tau)||_alpha`.
    pub worst_value: f64,
    pub worst_t: f64,
    pub worst_tau: f64,
    pub worst_alpha: f64,
    /// `bound - worst_value`; nonnegative when the estimate holds everywhere.
    pub margin: f64,
    pub samples: usize,
}

pub fn apriori_check(
    problem: &Problem,
    window: &ScaleWindow,
    u: &TriangleSolution,
    tau_count: usize,
) -> Result<AprioriReport> {
    if tau_count == 0 {
        return Err(Error::domain("need at least one tau sample"));
    }
    let bound = window.apriori_bound(&problem.constants);
    let samples = sampled_m(problem, window, u, tau_count);
    let mut worst = (0.0, 0.0, 0.0, 0.0);
    for s in &samples {
        if s.3 > worst.3 {
            worst = *s;
        }
    }
    Ok(AprioriReport {
        bound,
        worst_value: worst.3,
        worst_t: worst.0,
        worst_tau: worst.1,
        worst_alpha: worst.2,
        margin: bound - worst.3,
        samples: samples.len(),
    })
}

/// Measured contraction ratio of the integral map on one pair of trajectories.
#[derive(Clone, Debug, Serialize)]
pub struct ContractionReport {
    pub numerator: f64,
    pub denominator: f64,
    /// `None` when `u = v` on the grid.
    pub ratio: Option<f64>,
    /// `lambda0 / lambda`.
    pub bound: f64,
    pub violated: bool,
}

/// `||T(u) - T(v)||^(gamma) / ||u - v||^(gamma)` against `lambda0 / lambda`.
pub fn contraction_check(
    problem: &Problem,
    window: &ScaleWindow,
    u: &TriangleSolution,
    v: &TriangleSolution,
) -> Result<ContractionReport> {
    if u.times() != v.times() {
        return Err(Error::domain("trajectories live on different grids"));
    }
    check_admissible(problem, window, u)?;
    check_admissible(problem, window, v)?;
    let l0 = lambda0(window, &problem.constants, window.radius)?;
    let bound = l0.value / window.lambda;
    let free = free_evolution(&*problem.evolution, &problem.initial, u.times());
    let tu = u.with_values(integral_map_on_grid(problem, u.times(), u.values(), &free));
    let tv = v.with_values(integral_map_on_grid(problem, v.times(), v.values(), &free));
    let scale = &*problem.scale;
    let numerator = weighted_gamma_distance(&tu, &tv, window, window.gamma, scale)?;
    let denominator = weighted_gamma_distance(u, v, window, window.gamma, scale)?;
    let ratio = (denominator > 0.0).then(|| numerator / denominator);
    let violated = ratio.is_some_and(|r| r > bound * (1.0 + 1e-9));
    Ok(ContractionReport {
        numerator,
        denominator,
        ratio,
        bound,
        violated,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    /// `max_j ||(u_{j+1} - u_{j-1}) / (2 dt) - A(t_j) u_j - B(u_j, t_j)||_{alpha_top}`.
    pub max_residual: f64,
    pub node: usize,
    pub dt: f64,
}

/// Central-difference residual of the differential equation at interior grid nodes.
pub fn residual_check(
    problem: &Problem,
    window: &ScaleWindow,
    u: &TriangleSolution,
) -> Result<ResidualReport> {
    let n = u.times().len();
    if n < 3 {
        return Err(Error::domain(format!(
            "residual check needs at least 3 time nodes, got {n}"
        )));
    }
    let alpha = window.alpha_top;
    let residuals: Vec<f64> = (1..n - 1)
        .into_par_iter()
        .map(|j| {
            let t = u.times()[j];
            let h = u.times()[j + 1] - u.times()[j - 1];
            let a = problem.evolution.generator(t, u.value(j));
            let b = problem.perturbation.apply(u.value(j), t);
            let r: Vec<f64> = (0..a.len())
                .map(|i| (u.value(j + 1)[i] - u.value(j - 1)[i]) / h - a[i] - b[i])
                .collect();
            problem.scale.norm(&r, alpha)
        })
        .collect();
    let (idx, max) = residuals
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, &r)| if r > acc.1 { (i, r) } else { acc });
    Ok(ResidualReport {
        max_residual: max,
        node: idx + 1,
        dt: u.dt(),
    })
}
