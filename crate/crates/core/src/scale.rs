//! Scale-index bookkeeping shared by every solver component.
//!
//! A scale is a family of nested normed spaces indexed by `alpha` in
//! `[alpha_star, alpha_top]`, with `||.||_alpha` non-increasing in `alpha`.
//! Solutions are built on the triangle `{(t, alpha) : t < (alpha - alpha0) / lambda}`
//! and measured in the weighted norm
//! `sup (alpha - alpha0 - lambda t)^gamma ||u(t)||_alpha`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::TriangleSolution;

/// Radius of the admissible ball around the initial datum; may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Radius {
    Finite(f64),
    Infinite,
}

impl Radius {
    pub fn value(self) -> f64 {
        match self {
            Radius::Finite(r) => r,
            Radius::Infinite => f64::INFINITY,
        }
    }

    /// `1 / r` with `1 / inf := 0`.
    pub fn recip(self) -> f64 {
        match self {
            Radius::Finite(r) => 1.0 / r,
            Radius::Infinite => 0.0,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Radius::Finite(_))
    }
}

/// The alpha-interval and the exponents that define a solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleWindow {
    /// Lower scale endpoint `alpha_*` (where the initial datum lives).
    pub alpha_star: f64,
    /// Working lower endpoint `alpha0`.
    pub alpha0: f64,
    /// Upper endpoint `alpha^*`.
    pub alpha_top: f64,
    /// Singularity exponent of the evolution system.
    pub beta: f64,
    /// Weight exponent of the solution norm.
    pub gamma: f64,
    /// Horizon slope: the solution lives on `t < (alpha - alpha0) / lambda`.
    pub lambda: f64,
    pub radius: Radius,
    /// Global time horizon `T` on which the data are given.
    pub horizon: f64,
}

impl ScaleWindow {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        alpha_star: f64,
        alpha0: f64,
        alpha_top: f64,
        beta: f64,
        gamma: f64,
        lambda: f64,
        radius: Radius,
        horizon: f64,
    ) -> Result<Self> {
        let w = ScaleWindow {
            alpha_star,
            alpha0,
            alpha_top,
            beta,
            gamma,
            lambda,
            radius,
            horizon,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.alpha_star,
            self.alpha0,
            self.alpha_top,
            self.beta,
            self.gamma,
            self.lambda,
            self.horizon,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("window parameters must be finite"));
        }
        if !(self.alpha_star < self.alpha0 && self.alpha0 < self.alpha_top) {
            return Err(Error::domain(format!(
                "need alpha_star < alpha0 < alpha_top, got {} / {} / {}",
                self.alpha_star, self.alpha0, self.alpha_top
            )));
        }
        if !(0.0..0.5).contains(&self.beta) {
            return Err(Error::domain(format!("beta = {} not in [0, 1/2)", self.beta)));
        }
        check_gamma(self.beta, self.gamma)?;
        if self.lambda <= 0.0 {
            return Err(Error::domain(format!("lambda = {} must be positive", self.lambda)));
        }
        if self.horizon <= 0.0 {
            return Err(Error::domain(format!("T = {} must be positive", self.horizon)));
        }
        if let Radius::Finite(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::domain(format!("radius {r} must be positive")));
            }
        }
        Ok(())
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        let w = ScaleWindow { lambda, ..self };
        w.validate()?;
        Ok(w)
    }

    /// `(alpha_top - alpha0) / lambda`: the end of the solution interval.
    pub fn solution_horizon(&self) -> f64 {
        (self.alpha_top - self.alpha0) / self.lambda
    }

    /// `(alpha - alpha0) / lambda`: the time up to which `u` lives in scale `alpha`.
    pub fn alpha_horizon(&self, alpha: f64) -> f64 {
        (alpha - self.alpha0) / self.lambda
    }

    /// `rho(t) = alpha - alpha0 - lambda t`.
    pub fn distance_to_horizon(&self, alpha: f64, t: f64) -> f64 {
        alpha - self.alpha0 - self.lambda * t
    }

    /// `(C3 / (alpha0 - alpha_star) + C(x)) (alpha_top - alpha0)^gamma (1 + ||x||)`,
    /// the bound on `M(u)` defining the admissible set.
    pub fn apriori_bound(&self, consts: &OvcyannikovConstants) -> f64 {
        (consts.c3 / (self.alpha0 - self.alpha_star) + consts.cx)
            * (self.alpha_top - self.alpha0).powf(self.gamma)
            * (1.0 + consts.x_norm)
    }

    /// `M + 1` uniform alpha nodes from `alpha0` to `alpha_top`.
    pub fn alpha_grid(&self, intervals: usize) -> Vec<f64> {
        let m = intervals.max(1);
        (0..=m)
            .map(|i| {
                if i == m {
                    self.alpha_top
                } else {
                    self.alpha0 + (self.alpha_top - self.alpha0) * i as f64 / m as f64
                }
            })
            .collect()
    }
}

fn check_gamma(beta: f64, gamma: f64) -> Result<()> {
    if !(gamma > beta && gamma < 1.0 - beta) {
        return Err(Error::domain(format!(
            "gamma = {gamma} must lie in (beta, 1 - beta) = ({beta}, {})",
            1.0 - beta
        )));
    }
    Ok(())
}

/// Constants entering the threshold `lambda0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OvcyannikovConstants {
    /// Bound `||U(t,s)||_{alpha' -> alpha} <= C1 / (alpha - alpha')^beta`.
    pub c1: f64,
    pub beta: f64,
    /// Ovcyannikov Lipschitz constant of the perturbation.
    pub c2: f64,
    /// `||B(x,t)||_alpha <= C3 / (alpha - alpha_star)`.
    pub c3: f64,
    /// Lipschitz constant of `t -> U(t,0)x` in the `alpha0` norm.
    pub cx: f64,
    /// `||x||_{alpha_star}`.
    pub x_norm: f64,
}

impl OvcyannikovConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("c1", self.c1),
            ("beta", self.beta),
            ("c2", self.c2),
            ("c3", self.c3),
            ("cx", self.cx),
            ("x_norm", self.x_norm),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::domain(format!("constant {name} = {v} must be finite and >= 0")));
            }
        }
        if self.c1 <= 0.0 {
            return Err(Error::domain("constant c1 must be strictly positive"));
        }
        Ok(())
    }
}

/// `lambda0` together with the four terms of its maximum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lambda0 {
    pub terms: [f64; 4],
    pub value: f64,
}

/// `T(alpha, alpha0; t') = (alpha - alpha0) / (alpha_top - alpha0) * t'`.
pub fn time_horizon(alpha: f64, window: &ScaleWindow, t_prime: f64) -> Result<f64> {
    if !(alpha >= window.alpha0 && alpha <= window.alpha_top) {
        return Err(Error::domain(format!(
            "alpha = {alpha} outside [{}, {}]",
            window.alpha0, window.alpha_top
        )));
    }
    if !(t_prime > 0.0 && t_prime <= window.horizon) {
        return Err(Error::domain(format!(
            "t' = {t_prime} outside (0, {}]",
            window.horizon
        )));
    }
    Ok((alpha - window.alpha0) / (window.alpha_top - window.alpha0) * t_prime)
}

/// The threshold `lambda0(x, alpha0, gamma, r', T)`: any slope `lambda > lambda0`
/// makes the integral map a contraction with factor `lambda0 / lambda`.
///
/// The four terms are kept separate for reporting, including
/// the `4^{1-beta}` factor of the third term. `r' = Infinite` zeroes the fourth.
pub fn lambda0(
    window: &ScaleWindow,
    consts: &OvcyannikovConstants,
    r_prime: Radius,
) -> Result<Lambda0> {
    consts.validate()?;
    let beta = window.beta;
    if consts.beta != beta {
        return Err(Error::domain(format!(
            "constants declare beta = {} but window has beta = {beta}",
            consts.beta
        )));
    }
    check_gamma(beta, window.gamma)?;
    if let Radius::Finite(r) = r_prime {
        if !(r > 0.0) || r > window.radius.value() {
            return Err(Error::domain(format!(
                "r' = {r} must lie in (0, {}]",
                window.radius.value()
            )));
        }
    }
    let g = window.gamma;
    let (c1, c2, c3, cx) = (consts.c1, consts.c2, consts.c3, consts.cx);
    let span = window.alpha_top - window.alpha0;
    let x1 = 1.0 + consts.x_norm;

    let t1 = (window.alpha_top - window.alpha_star) / window.horizon;
    let t2 = 2f64.powf(2.0 * g + 1.0 - beta) * c1 * c2 / (g - beta);
    // Open question kept as printed: this term divides by (1 + ||x||) while the
    // admissible-set bound multiplies by it.
    let t3 = 4f64.powf(1.0 - beta) * c2 * span.powf(beta) / (g * x1)
        + 2f64.powf(2.0 + g) * c1 * c2 / g;
    let inv_r = r_prime.recip();
    let t4 = cx * span * inv_r
        + c1 * (c3 / (window.alpha0 - window.alpha_star) + cx) * span * x1 * inv_r / (1.0 - g);

    let terms = [t1, t2, t3, t4];
    let value = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Lambda0 { terms, value })
}

/// A norm family over flat state vectors, indexed by the scale parameter.
pub trait ScaleNorm: Sync {
    fn norm(&self, v: &[f64], alpha: f64) -> f64;
}

/// Max-abs norm that ignores `alpha`; the trivial scale used by scalar test problems.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformNorm;

impl ScaleNorm for UniformNorm {
    fn norm(&self, v: &[f64], _alpha: f64) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Discrete weighted norm `max (alpha - alpha0 - lambda t)^gamma ||u(t)||_alpha`
/// over the grid nodes of `u` lying strictly inside the triangle.
pub fn weighted_gamma_norm(
    u: &TriangleSolution,
    window: &ScaleWindow,
    scale: &dyn ScaleNorm,
) -> Result<f64> {
    weighted_norm_with(u.times(), u.alphas(), window, window.gamma, scale, |j| {
        u.values()[j].as_slice()
    })
}

/// Weighted norm of `u - v` for two solutions on the same grid.
pub fn weighted_gamma_distance(
    u: &TriangleSolution,
    v: &TriangleSolution,
    window: &ScaleWindow,
    gamma: f64,
    scale: &dyn ScaleNorm,
) -> Result<f64> {
    if u.times().len() != v.times().len() {
        return Err(Error::domain("solutions live on different time grids"));
    }
    let diffs: Vec<Vec<f64>> = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    weighted_norm_with(u.times(), u.alphas(), window, gamma, scale, |j| diffs[j].as_slice())
}

pub(crate) fn weighted_norm_with<'a>(
    times: &[f64],
    alphas: &[f64],
    window: &ScaleWindow,
    gamma: f64,
    scale: &dyn ScaleNorm,
    value: impl Fn(usize) -> &'a [f64],
) -> Result<f64> {
    if times.is_empty() || alphas.is_empty() {
        return Err(Error::domain("empty grid"));
    }
    let mut best = 0.0f64;
    let mut any = false;
    for (j, &t) in times.iter().enumerate() {
        let v = value(j);
        for &alpha in alphas {
            let rho = window.distance_to_horizon(alpha, t);
            if alpha <= window.alpha0 || rho <= 0.0 {
                continue;
            }
            any = true;
            let w = if gamma == 0.0 { 1.0 } else { rho.powf(gamma) };
            best = best.max(w * scale.norm(v, alpha));
        }
    }
    if !any {
        return Err(Error::domain("no grid node lies inside the solution triangle"));
    }
    Ok(best)
}
