//! Rate tables `h(t,i)`, `psi(t,i,j)`, `a(t,i)`.
//!
//! Each table is a set of site (or pair) values multiplied by one time profile.
//! Evaluation order is fixed: the profile is evaluated first, then the value is
//! scaled by it, and quadrature weights are applied afterwards; sums run in
//! ascending site order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time profile `p(t)` multiplying a rate table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    #[default]
    Constant,
    /// `exp(-rate t)`.
    ExpDecay { rate: f64 },
    /// `1 + amplitude sin(frequency t + phase)`, with `|amplitude| <= 1`.
    Sinusoidal {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant => 1.0,
            Profile::ExpDecay { rate } => (-rate * t).exp(),
            Profile::Sinusoidal {
                amplitude,
                frequency,
                phase,
            } => 1.0 + amplitude * (frequency * t + phase).sin(),
        }
    }

    /// Upper bound of `p` on `[0, horizon]`.
    pub fn sup(&self, horizon: f64) -> f64 {
        match *self {
            Profile::Constant => 1.0,
            Profile::ExpDecay { rate } => {
                if rate >= 0.0 {
                    1.0
                } else {
                    (-rate * horizon).exp()
                }
            }
            Profile::Sinusoidal { amplitude, .. } => 1.0 + amplitude.abs(),
        }
    }

    /// `int_s^t p(r) dr`.
    pub fn integral(&self, s: f64, t: f64) -> f64 {
        match *self {
            Profile::Constant => t - s,
            Profile::ExpDecay { rate } => {
                if rate == 0.0 {
                    t - s
                } else {
                    ((-rate * s).exp() - (-rate * t).exp()) / rate
                }
            }
            Profile::Sinusoidal {
                amplitude,
                frequency,
                phase,
            } => {
                if frequency == 0.0 {
                    (1.0 + amplitude * phase.sin()) * (t - s)
                } else {
                    (t - s)
                        + amplitude * ((frequency * s + phase).cos() - (frequency * t + phase).cos())
                            / frequency
                }
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            Profile::Constant => true,
            Profile::ExpDecay { rate } => rate == 0.0,
            Profile::Sinusoidal {
                amplitude,
                frequency,
                ..
            } => amplitude == 0.0 || frequency == 0.0,
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        match *self {
            Profile::Constant => Ok(()),
            Profile::ExpDecay { rate } => {
                if rate.is_finite() {
                    Ok(())
                } else {
                    Err(Error::config(format!("{path}.rate"), "must be finite"))
                }
            }
            Profile::Sinusoidal {
                amplitude,
                frequency,
                phase,
            } => {
                if !(amplitude.is_finite() && amplitude.abs() <= 1.0) {
                    return Err(Error::config(
                        format!("{path}.amplitude"),
                        format!("{amplitude} must satisfy |amplitude| <= 1 to keep rates nonnegative"),
                    ));
                }
                if !(frequency.is_finite() && phase.is_finite()) {
                    return Err(Error::config(path, "frequency and phase must be finite"));
                }
                Ok(())
            }
        }
    }
}

/// Per-site values: one number for every site, or an array of length `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SiteValues {
    Uniform(f64),
    PerSite(Vec<f64>),
}

/// Pair values: one number for every pair, or a symmetric `m x m` matrix whose
/// diagonal is ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairValues {
    Uniform(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteRate {
    pub values: SiteValues,
    #[serde(default)]
    pub profile: Profile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRate {
    pub values: PairValues,
    #[serde(default)]
    pub profile: Profile,
}

impl SiteRate {
    pub fn constant(v: f64) -> Self {
        SiteRate {
            values: SiteValues::Uniform(v),
            profile: Profile::Constant,
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        match &self.values {
            SiteValues::Uniform(v) => *v,
            SiteValues::PerSite(vs) => vs[i],
        }
    }

    /// Time-independent part as a vector of length `m`.
    pub fn base(&self, m: usize) -> Vec<f64> {
        (0..m).map(|i| self.value(i)).collect()
    }

    pub fn at(&self, t: f64, m: usize) -> Vec<f64> {
        let p = self.profile.eval(t);
        (0..m).map(|i| self.value(i) * p).collect()
    }

    fn validate(&self, m: usize, path: &str) -> Result<()> {
        self.profile.validate(&format!("{path}.profile"))?;
        match &self.values {
            SiteValues::Uniform(v) => check_rate(*v, &format!("{path}.values")),
            SiteValues::PerSite(vs) => {
                if vs.len() != m {
                    return Err(Error::config(
                        format!("{path}.values"),
                        format!("expected {m} entries, got {}", vs.len()),
                    ));
                }
                for (i, v) in vs.iter().enumerate() {
                    check_rate(*v, &format!("{path}.values[{i}]"))?;
                }
                Ok(())
            }
        }
    }
}

impl PairRate {
    pub fn constant(v: f64) -> Self {
        PairRate {
            values: PairValues::Uniform(v),
            profile: Profile::Constant,
        }
    }

    /// `psi_ij` without the profile; zero on the diagonal.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match &self.values {
            PairValues::Uniform(v) => *v,
            PairValues::Matrix(rows) => rows[i][j],
        }
    }

    /// Row-major `m x m` base matrix with zero diagonal.
    pub fn base(&self, m: usize) -> Vec<f64> {
        (0..m * m).map(|ij| self.value(ij / m, ij % m)).collect()
    }

    pub fn at(&self, t: f64, m: usize) -> Vec<f64> {
        let p = self.profile.eval(t);
        (0..m * m).map(|ij| self.value(ij / m, ij % m) * p).collect()
    }

    fn validate(&self, m: usize, path: &str) -> Result<()> {
        self.profile.validate(&format!("{path}.profile"))?;
        match &self.values {
            PairValues::Uniform(v) => check_rate(*v, &format!("{path}.values")),
            PairValues::Matrix(rows) => {
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return Err(Error::config(
                        format!("{path}.values"),
                        format!("expected a {m} x {m} matrix"),
                    ));
                }
                for i in 0..m {
                    for j in 0..m {
                        let p = format!("{path}.values[{i}][{j}]");
                        if i == j {
                            if !rows[i][j].is_finite() {
                                return Err(Error::config(p, "must be finite"));
                            }
                            continue;
                        }
                        check_rate(rows[i][j], &p)?;
                        if rows[i][j] != rows[j][i] {
                            return Err(Error::config(
                                p,
                                format!("psi must be symmetric: {} != {}", rows[i][j], rows[j][i]),
                            ));
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

fn check_rate(v: f64, path: &str) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(path, format!("rate {v} must be finite and >= 0")))
    }
}

/// Selection cost `h`, pair interaction `psi`, appearance rate `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateData {
    pub h: SiteRate,
    pub psi: PairRate,
    pub a: SiteRate,
}

impl RateData {
    pub fn constant(h: f64, psi: f64, a: f64) -> Self {
        RateData {
            h: SiteRate::constant(h),
            psi: PairRate::constant(psi),
            a: SiteRate::constant(a),
        }
    }

    /// Checks shapes, nonnegativity and symmetry; errors carry the field path
    /// relative to the rates block.
    pub fn validate(&self, m: usize) -> Result<()> {
        self.h.validate(m, "rates.h")?;
        self.psi.validate(m, "rates.psi")?;
        self.a.validate(m, "rates.a")
    }

    pub fn is_time_constant(&self) -> bool {
        self.h.profile.is_constant() && self.psi.profile.is_constant() && self.a.profile.is_constant()
    }

    /// `psi` vanishes for every pair and every time.
    pub fn psi_vanishes(&self, m: usize) -> bool {
        self.psi.base(m).iter().all(|&v| v == 0.0)
    }

    /// Evaluate every table at time `t` and apply the weights.
    pub fn at(&self, t: f64, weights: &[f64]) -> RatesAt {
        let m = weights.len();
        let h = self.h.at(t, m);
        let psi = self.psi.at(t, m);
        let a = self.a.at(t, m);
        let wh = (0..m).map(|i| weights[i] * h[i]).collect();
        let wpsi = (0..m * m).map(|ij| weights[ij % m] * psi[ij]).collect();
        let wwpsi = (0..m * m)
            .map(|ij| weights[ij / m] * weights[ij % m] * psi[ij])
            .collect();
        RatesAt {
            m,
            h,
            psi,
            a,
            wh,
            wpsi,
            wwpsi,
        }
    }
}

/// All rates at one time, with the weighted combinations the operators use.
#[derive(Clone, Debug, PartialEq)]
pub struct RatesAt {
    pub m: usize,
    pub h: Vec<f64>,
    /// Row-major, zero diagonal.
    pub psi: Vec<f64>,
    pub a: Vec<f64>,
    /// `w_i h_i`.
    pub wh: Vec<f64>,
    /// `w_j psi_ij` at `[i * m + j]`.
    pub wpsi: Vec<f64>,
    /// `w_i w_j psi_ij` at `[i * m + j]`.
    pub wwpsi: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_integrals_match_antiderivatives() {
        let ps = [
            Profile::Constant,
            Profile::ExpDecay { rate: 0.7 },
            Profile::ExpDecay { rate: -0.3 },
            Profile::Sinusoidal {
                amplitude: 0.5,
                frequency: 3.0,
                phase: 0.2,
            },
        ];
        for p in ps {
            // composite Simpson with many nodes as reference
            let (s, t, n) = (0.1, 0.9, 2000);
            let h = (t - s) / n as f64;
            let mut acc = p.eval(s) + p.eval(t);
            for k in 1..n {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * p.eval(s + k as f64 * h);
            }
            let reference = acc * h / 3.0;
            assert!((p.integral(s, t) - reference).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn profile_sup_bounds_values() {
        let p = Profile::ExpDecay { rate: -0.5 };
        assert!(p.sup(2.0) >= p.eval(2.0));
        let q = Profile::Sinusoidal {
            amplitude: -0.4,
            frequency: 1.0,
            phase: 0.0,
        };
        assert!((0..100).all(|k| q.eval(k as f64 * 0.1) <= q.sup(10.0)));
    }

    #[test]
    fn asymmetric_psi_is_rejected_with_path() {
        let r = RateData {
            h: SiteRate::constant(1.0),
            psi: PairRate {
                values: PairValues::Matrix(vec![vec![0.0, 0.2], vec![0.3, 0.0]]),
                profile: Profile::Constant,
            },
            a: SiteRate::constant(0.5),
        };
        match r.validate(2) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "rates.psi.values[0][1]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_rate_and_wrong_length_are_rejected() {
        let mut r = RateData::constant(1.0, 0.0, -0.1);
        assert!(r.validate(3).is_err());
        r.a = SiteRate {
            values: SiteValues::PerSite(vec![0.1, 0.2]),
            profile: Profile::Constant,
        };
        assert!(r.validate(3).is_err());
    }

    #[test]
    fn weights_are_applied_after_evaluation() {
        let r = RateData::constant(2.0, 0.5, 1.0);
        let s = r.at(0.0, &[0.5, 0.25]);
        assert_eq!(s.wh, vec![1.0, 0.5]);
        assert_eq!(s.wwpsi, vec![0.0, 0.0625, 0.0625, 0.0]);
        assert_eq!(s.wpsi, vec![0.0, 0.125, 0.25, 0.0]);
    }

    #[test]
    fn config_shapes_deserialize() {
        let j = r#"{"h":{"values":1.0},"psi":{"values":[[0,0.2],[0.2,0]],"profile":{"kind":"exp_decay","rate":0.5}},"a":{"values":[0.1,0.2]}}"#;
        let r: RateData = serde_json::from_str(j).unwrap();
        r.validate(2).unwrap();
        assert_eq!(r.psi.value(1, 0), 0.2);
    }
}
