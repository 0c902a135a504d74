//! Constants of the hierarchy operators, with discrete sums in place of integrals.
//!
//! All suprema over `t in [0, T]` use the analytic upper bound of each rate
//! profile, so they are valid for every time in the window.

use serde::Serialize;

use super::operators::apply_a0;
use super::{CorrelationHierarchy, KimuraModel};
use crate::error::{Error, Result};
use crate::scale::{OvcyannikovConstants, Radius, ScaleWindow};

/// Number of sub-intervals used to bound suprema over `alpha'`.
const ALPHA_CELLS: usize = 1000;

/// Suprema over `[0, T]` of the rate sums entering the operator bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateSums {
    /// `sup_t sum_i w_i h(t,i)`.
    pub h_mass: f64,
    /// `sup_t sum_{i != j} w_i w_j psi(t,i,j)`.
    pub psi_mass: f64,
    /// `sup_{t,i} sum_{j != i} w_j psi(t,i,j)`.
    pub psi_row: f64,
    pub h_sup: f64,
    pub psi_sup: f64,
    pub a_sup: f64,
}

impl RateSums {
    pub fn of(model: &KimuraModel) -> Self {
        let m = model.space().sites();
        let w = model.space().weights();
        let t = model.horizon();
        let rates = model.rates();
        let (ph, pp, pa) = (
            rates.h.profile.sup(t),
            rates.psi.profile.sup(t),
            rates.a.profile.sup(t),
        );
        let h = rates.h.base(m);
        let psi = rates.psi.base(m);
        let a = rates.a.base(m);
        let mut h_mass = 0.0;
        let mut psi_mass = 0.0;
        let mut psi_row = 0.0f64;
        for i in 0..m {
            h_mass += w[i] * h[i];
            let mut row = 0.0;
            for j in 0..m {
                if j != i {
                    psi_mass += w[i] * w[j] * psi[i * m + j];
                    row += w[j] * psi[i * m + j];
                }
            }
            psi_row = psi_row.max(row);
        }
        let max = |v: &[f64]| v.iter().fold(0.0f64, |acc, x| acc.max(*x));
        RateSums {
            h_mass: h_mass * ph,
            psi_mass: psi_mass * pp,
            psi_row: psi_row * pp,
            h_sup: max(&h) * ph,
            psi_sup: max(&psi) * pp,
            a_sup: max(&a) * pa,
        }
    }

    /// `(e^{alpha'} psi_row + e^{-alpha'} a_sup) / e`: the A1 bound with `(alpha - alpha')^{-1}` stripped.
    pub fn c_a1(&self, alpha_prime: f64) -> f64 {
        (alpha_prime.exp() * self.psi_row + (-alpha_prime).exp() * self.a_sup) / std::f64::consts::E
    }

    /// `e^{alpha} h_mass + e^{2 alpha} psi_mass / 2`: bounds `|B^Delta(k)| / ||k||_alpha`
    /// and the raising part of `A0`.
    pub fn c_bdelta(&self, alpha: f64) -> f64 {
        alpha.exp() * self.h_mass + (2.0 * alpha).exp() * self.psi_mass / 2.0
    }

    /// Bound on `max_eta Phi(eta)` over configurations with at most `n` sites.
    pub fn phi_bound(&self, n: usize) -> f64 {
        let n = n as f64;
        n * self.h_sup + 0.5 * n * (n - 1.0) * self.psi_sup
    }
}

/// `kappa(alpha, t) = e^alpha sum_i w_i h(t,i) + e^{2 alpha} / 2 sum_{i != j} w_i w_j psi(t,i,j)`.
pub fn kappa(model: &KimuraModel, alpha: f64, t: f64) -> f64 {
    let (h, psi) = weighted_masses(model);
    let rates = model.rates();
    alpha.exp() * h * rates.h.profile.eval(t)
        + (2.0 * alpha).exp() / 2.0 * psi * rates.psi.profile.eval(t)
}

/// `int_s^t kappa(alpha, r) dr` in closed form.
pub fn kappa_integral(model: &KimuraModel, alpha: f64, s: f64, t: f64) -> f64 {
    let (h, psi) = weighted_masses(model);
    let rates = model.rates();
    alpha.exp() * h * rates.h.profile.integral(s, t)
        + (2.0 * alpha).exp() / 2.0 * psi * rates.psi.profile.integral(s, t)
}

fn weighted_masses(model: &KimuraModel) -> (f64, f64) {
    let m = model.space().sites();
    let w = model.space().weights();
    let h = model.rates().h.base(m);
    let psi = model.rates().psi.base(m);
    let mut hm = 0.0;
    let mut pm = 0.0;
    for i in 0..m {
        hm += w[i] * h[i];
        for j in 0..m {
            if j != i {
                pm += w[i] * w[j] * psi[i * m + j];
            }
        }
    }
    (hm, pm)
}

/// Constants certificate of a hierarchy model on a window, with its ingredients.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KimuraConstants {
    pub sums: RateSums,
    pub k0_norm: f64,
    /// Finite radius `r` of the Lipschitz ball.
    pub radius: f64,
    /// `int_0^T kappa(alpha_top, r) dr`.
    pub kappa_integral: f64,
    /// `sup_tau ||A0(tau) k0||_{alpha0}` or its operator-norm bound for time-dependent rates.
    pub generator_bound: f64,
    pub certificate: OvcyannikovConstants,
}

/// Extracts `C1`, `C2`, `C3` and `C(x)` for the perturbation `B(k) = A1 k + B^Delta(k) k`.
///
/// * `C1 = exp(int_0^T kappa(alpha_top))`, `beta = 0`.
/// * `C2 = sup_{alpha'} [C_A1(alpha') + 2 (alpha_top - alpha') (r + ||k0||) C_B(alpha')]`,
///   the sharp form of the Lipschitz estimate for `B` (both `B^Delta` terms are
///   bounded at `alpha'`).
/// * `C3 = C_A1(alpha_star) ||k0|| + C_B(alpha_top) (alpha_top - alpha_star) ||k0||^2`.
/// * `C(x) = C1 sup_tau ||A0(tau) k0||_{alpha0}` for time-constant rates; otherwise
///   `A0(tau)` need not commute with `U`, and `||A0(tau) k0||` is replaced by the
///   operator bound `(max Phi + C_B(alpha0)) ||k0||_{alpha0}`.
pub fn model_constants(
    model: &KimuraModel,
    window: &ScaleWindow,
    k0: &CorrelationHierarchy,
) -> Result<KimuraConstants> {
    let r = match window.radius {
        Radius::Finite(r) => r,
        Radius::Infinite => {
            return Err(Error::Model(
                "the hierarchy perturbation is quadratic; a finite radius is required".into(),
            ))
        }
    };
    if window.horizon != model.horizon() {
        return Err(Error::Model(format!(
            "window horizon {} differs from the model horizon {}",
            window.horizon,
            model.horizon()
        )));
    }
    let sums = RateSums::of(model);
    let check = [
        sums.h_mass,
        sums.psi_mass,
        sums.psi_row,
        sums.h_sup,
        sums.psi_sup,
        sums.a_sup,
    ];
    if check.iter().any(|v| !v.is_finite()) {
        return Err(Error::Model("rate sums are not finite".into()));
    }
    let (a_lo, a0, a_hi) = (window.alpha_star, window.alpha0, window.alpha_top);
    let k0_norm = k0.norm(a_lo);
    let kint = kappa_integral(model, a_hi, 0.0, model.horizon());
    let c1 = kint.exp();
    let ball = r + k0_norm;

    // Upper bound of the sup over alpha' via monotone pieces on each cell.
    let mut c2 = 0.0f64;
    for cell in 0..ALPHA_CELLS {
        let lo = a_lo + (a_hi - a_lo) * cell as f64 / ALPHA_CELLS as f64;
        let hi = if cell + 1 == ALPHA_CELLS {
            a_hi
        } else {
            a_lo + (a_hi - a_lo) * (cell + 1) as f64 / ALPHA_CELLS as f64
        };
        let a1 = (hi.exp() * sums.psi_row + (-lo).exp() * sums.a_sup) / std::f64::consts::E;
        let bd = 2.0 * (a_hi - lo) * ball * sums.c_bdelta(hi);
        c2 = c2.max(a1 + bd);
    }
    let c3 = sums.c_a1(a_lo) * k0_norm + sums.c_bdelta(a_hi) * (a_hi - a_lo) * k0_norm * k0_norm;

    let generator_bound = if model.rates().is_time_constant() {
        let rates = model.rates().at(0.0, model.space().weights());
        let a0k = apply_a0(model.layout(), &rates, k0.values());
        crate::scale::ScaleNorm::norm(&super::HierarchyNorm::new(model.layout().clone()), &a0k, a0)
    } else {
        let n = model.n_max().min(model.space().sites());
        (sums.phi_bound(n) + sums.c_bdelta(a0)) * k0.norm(a0)
    };
    let certificate = OvcyannikovConstants {
        c1,
        beta: 0.0,
        c2,
        c3,
        cx: c1 * generator_bound,
        x_norm: k0_norm,
    };
    Ok(KimuraConstants {
        sums,
        k0_norm,
        radius: r,
        kappa_integral: kint,
        generator_bound,
        certificate,
    })
}
