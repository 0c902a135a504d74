//! Paired solves of a convergent family of problems against their limit.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scale::{lambda0, OvcyannikovConstants, ScaleWindow};
use crate::solver::{picard_solve, ConvergenceReport, Problem, SolverSettings, TriangleSolution};

/// Problems `(x_n, U_n, B_n)` converging to a limit problem, on one shared window.
#[derive(Debug)]
pub struct PerturbedFamily {
    pub limit: Problem,
    pub members: Vec<Problem>,
    /// Size of the perturbation of member `n` (reported, e.g. `||x_n - x||`).
    pub sizes: Vec<f64>,
}

impl PerturbedFamily {
    pub fn new(limit: Problem, members: Vec<Problem>, sizes: Vec<f64>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::domain("family has no members"));
        }
        if sizes.len() != members.len() {
            return Err(Error::domain("one perturbation size per member is required"));
        }
        let beta = limit.constants.beta;
        if members.iter().any(|p| p.constants.beta != beta) {
            return Err(Error::domain("all members must declare the same beta"));
        }
        if members.iter().any(|p| p.initial.len() != limit.initial.len()) {
            return Err(Error::domain("all members must share the state dimension"));
        }
        Ok(PerturbedFamily {
            limit,
            members,
            sizes,
        })
    }

    fn all(&self) -> impl Iterator<Item = &Problem> {
        std::iter::once(&self.limit).chain(self.members.iter())
    }

    /// Componentwise maximum of the constants over the limit and all members.
    pub fn uniform_constants(&self) -> OvcyannikovConstants {
        let mut c = self.limit.constants;
        for p in &self.members {
            let q = p.constants;
            c.c1 = c.c1.max(q.c1);
            c.c2 = c.c2.max(q.c2);
            c.c3 = c.c3.max(q.c3);
            c.cx = c.cx.max(q.cx);
            c.x_norm = c.x_norm.max(q.x_norm);
        }
        c
    }
}

/// `lambda1 = max(lambda0(limit), max_n lambda0(member n))`.
pub fn lambda1(family: &PerturbedFamily, window: &ScaleWindow) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for p in family.all() {
        best = best.max(lambda0(window, &p.constants, window.radius)?.value);
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityRow {
    /// 1-based position of the member in the family.
    pub n: usize,
    pub perturbation: f64,
    /// `s_n = max_{t_j <= t'} ||u_n(t_j) - u(t_j)||_alpha`.
    pub deviation: f64,
    /// Solver floor `(tail_n + tail + noise_n + noise) (alpha - alpha0 - lambda t')^{-gamma}`:
    /// certified iteration error plus the round-off floor of both runs.
    pub floor: f64,
    pub lambda0: f64,
    pub tail_bound: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub lambda1: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub t_prime: f64,
    pub limit_tail: f64,
    pub uniform_constants: OvcyannikovConstants,
    pub rows: Vec<StabilityRow>,
}

fn sup_deviation(
    scale: &dyn crate::scale::ScaleNorm,
    u: &TriangleSolution,
    v: &TriangleSolution,
    alpha: f64,
    t_prime: f64,
) -> f64 {
    u.times()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t <= t_prime)
        .map(|(j, _)| {
            let d: Vec<f64> = u.value(j).iter().zip(v.value(j)).map(|(a, b)| a - b).collect();
            scale.norm(&d, alpha)
        })
        .fold(0.0, f64::max)
}

/// Solves the limit and every member with the slope of `window` and reports the
/// sup-norm deviations on `[0, t']` in the `alpha` norm.
pub fn stability_experiment(
    family: &PerturbedFamily,
    window: &ScaleWindow,
    alpha: f64,
    t_prime: f64,
    settings: &SolverSettings,
) -> Result<StabilityReport> {
    let l1 = lambda1(family, window)?;
    if !(window.lambda > l1) {
        return Err(Error::Infeasible {
            lambda: window.lambda,
            lambda0: l1,
        });
    }
    if !(alpha > window.alpha0 && alpha <= window.alpha_top) {
        return Err(Error::domain(format!(
            "alpha = {alpha} outside ({}, {}]",
            window.alpha0, window.alpha_top
        )));
    }
    if !(t_prime >= 0.0 && t_prime < window.alpha_horizon(alpha)) {
        return Err(Error::domain(format!(
            "t' = {t_prime} must lie below (alpha - alpha0) / lambda = {}",
            window.alpha_horizon(alpha)
        )));
    }
    let (limit_sol, limit_rep) = picard_solve(&family.limit, window, settings)?;
    let solved: Vec<Result<(TriangleSolution, ConvergenceReport)>> = family
        .members
        .par_iter()
        .map(|p| picard_solve(p, window, settings))
        .collect();
    let weight = window.distance_to_horizon(alpha, t_prime).powf(-window.gamma);
    let mut rows = Vec::with_capacity(solved.len());
    for (i, res) in solved.into_iter().enumerate() {
        let (sol, rep) = res?;
        rows.push(StabilityRow {
            n: i + 1,
            perturbation: family.sizes[i],
            deviation: sup_deviation(&*family.limit.scale, &sol, &limit_sol, alpha, t_prime),
            floor: (rep.tail_bound + limit_rep.tail_bound + rep.noise_floor + limit_rep.noise_floor) * weight,
            lambda0: rep.lambda0.value,
            tail_bound: rep.tail_bound,
            iterations: rep.iterations,
        });
    }
    Ok(StabilityReport {
        lambda1: l1,
        lambda: window.lambda,
        alpha,
        t_prime,
        limit_tail: limit_rep.tail_bound,
        uniform_constants: family.uniform_constants(),
        rows,
    })
}

/// Sampled check of the convergence `U_n(t,s) -> U(t,s)`: for each member, the
/// largest `||U_n(t,s)v - U(t,s)v||_alpha` over the given vectors and time pairs.
pub fn evolution_convergence(
    family: &PerturbedFamily,
    vectors: &[Vec<f64>],
    pairs: &[(f64, f64)],
    alpha: f64,
) -> Vec<f64> {
    let reference: Vec<Vec<f64>> = pairs
        .iter()
        .flat_map(|&(t, s)| vectors.iter().map(move |v| (t, s, v)))
        .map(|(t, s, v)| family.limit.evolution.propagate(t, s, v))
        .collect();
    family
        .members
        .par_iter()
        .map(|p| {
            pairs
                .iter()
                .flat_map(|&(t, s)| vectors.iter().map(move |v| (t, s, v)))
                .zip(&reference)
                .map(|((t, s, v), r)| {
                    let u = p.evolution.propagate(t, s, v);
                    let d: Vec<f64> = u.iter().zip(r).map(|(a, b)| a - b).collect();
                    family.limit.scale.norm(&d, alpha)
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x` over the pairs with both positive.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
