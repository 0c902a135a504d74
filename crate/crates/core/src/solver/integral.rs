use rayon::prelude::*;

use super::monitors::check_admissible;
use super::{axpy, EvolutionSystem, Problem, TriangleSolution};
use crate::error::Result;
use crate::scale::ScaleWindow;

/// `x_j = U(t_j, 0) x`, accumulated step by step through the cocycle.
pub fn free_evolution(evolution: &dyn EvolutionSystem, x: &[f64], times: &[f64]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(times.len());
    let mut cur = x.to_vec();
    let mut prev_t = times.first().copied().unwrap_or(0.0);
    for &t in times {
        if t != prev_t {
            cur = evolution.propagate(t, prev_t, &cur);
        }
        out.push(cur.clone());
        prev_t = t;
    }
    out
}

/// `(T u)(t_j) = x_j + int_0^{t_j} U(t_j, s) B(u(s), s) ds` on the nodes of `times`.
///
/// The integral uses composite Simpson on every step, with `u` interpolated
/// linearly at the midpoint, and is carried forward through
/// `I_j = U(t_j, t_{j-1}) (I_{j-1} + dt/6 b_{j-1}) + 4 dt/6 U(t_j, m_j) b(m_j) + dt/6 b_j`.
pub fn integral_map_on_grid(
    problem: &Problem,
    times: &[f64],
    values: &[Vec<f64>],
    free: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let b = &*problem.perturbation;
    let ev = &*problem.evolution;
    let n = times.len();
    let nodes: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| b.apply(&values[j], times[j]))
        .collect();
    let mids: Vec<Vec<f64>> = (1..n)
        .into_par_iter()
        .map(|j| {
            let tm = 0.5 * (times[j - 1] + times[j]);
            let um: Vec<f64> = values[j - 1]
                .iter()
                .zip(&values[j])
                .map(|(a, c)| 0.5 * (a + c))
                .collect();
            ev.propagate(times[j], tm, &b.apply(&um, tm))
        })
        .collect();

    let dim = values[0].len();
    let mut out = Vec::with_capacity(n);
    out.push(free[0].clone());
    let mut acc = vec![0.0; dim];
    for j in 1..n {
        let dt = times[j] - times[j - 1];
        axpy(&mut acc, dt / 6.0, &nodes[j - 1]);
        let mut next = ev.propagate(times[j], times[j - 1], &acc);
        axpy(&mut next, 4.0 * dt / 6.0, &mids[j - 1]);
        axpy(&mut next, dt / 6.0, &nodes[j]);
        acc = next;
        out.push(free[j].iter().zip(&acc).map(|(x, i)| x + i).collect());
    }
    out
}

/// `int_0^t U(t,s) B(u(s),s) ds` at every node of `u`, without the free part.
///
/// Fails with [`crate::Error::Admissibility`] if `u` leaves the radius ball around `x`.
pub fn integral_map(
    problem: &Problem,
    window: &ScaleWindow,
    u: &TriangleSolution,
) -> Result<TriangleSolution> {
    check_admissible(problem, window, u)?;
    let zero = vec![vec![0.0; u.dim()]; u.times().len()];
    Ok(u.with_values(integral_map_on_grid(problem, u.times(), u.values(), &zero)))
}
