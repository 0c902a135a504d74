//! Experiment configuration files.
//!
//! A config is one JSON document with `model`, `initial`, `window`, `solver` and
//! `run` blocks. Parsing reports the dotted path of the offending field, and
//! [`ExperimentConfig::validate`] checks every model and window invariant before
//! anything is computed.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kimura::{
    kimura_setup, CorrelationHierarchy, DiscreteSpace, KimuraModel, KimuraSetup, RateData, SiteValues,
    Slope,
};
use crate::scale::{Radius, ScaleWindow};
use crate::solver::SolverSettings;
use crate::stability::PerturbedFamily;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub sites: usize,
    /// One weight for every site, or one per site.
    pub weights: SiteValues,
    pub n_max: usize,
    pub rates: RateData,
}

/// Initial hierarchy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialBlock {
    /// Product hierarchy `k(eta) = prod_{i in eta} rho_i`.
    Poisson { density: SiteValues },
}

/// `"auto"` (twice `lambda0`), `{"auto": factor}`, or a number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Value(f64),
    Keyword(String),
    Factor { auto: f64 },
}

impl Default for LambdaSpec {
    fn default() -> Self {
        LambdaSpec::Keyword("auto".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowBlock {
    pub alpha_star: f64,
    pub alpha0: f64,
    pub alpha_top: f64,
    pub gamma: f64,
    #[serde(default)]
    pub lambda: LambdaSpec,
    pub radius: f64,
    /// Time horizon `T` on which the rates are declared.
    pub horizon: f64,
}

/// Multiplicative overrides of the computed constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateOverride {
    #[serde(default = "one")]
    pub c2_scale: f64,
    #[serde(default = "one")]
    pub c3_scale: f64,
}

fn one() -> f64 {
    1.0
}

/// Family members `n = 1..=count`, each a perturbation of the base problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// Every member equals the base problem.
    Identical,
    /// `h_n = h (1 + 2^{-n})`.
    HScale,
    /// Initial densities `rho_n = rho (1 + 2^{-n})`.
    InitialScale,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyBlock {
    pub kind: FamilyKind,
    /// Explicit member indices `n`; overrides `count`.
    #[serde(default)]
    pub members: Option<Vec<u32>>,
    #[serde(default)]
    pub count: Option<u32>,
}

impl FamilyBlock {
    pub fn indices(&self) -> Vec<u32> {
        match (&self.members, self.count) {
            (Some(m), _) => m.clone(),
            (None, Some(c)) => (1..=c).collect(),
            (None, None) => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    pub seed: Option<u64>,
    /// Samples per verifier check.
    pub samples: Option<usize>,
    pub certificate: Option<CertificateOverride>,
    pub family: Option<FamilyBlock>,
    /// Diagnostic scale index of the stability run (default `alpha_top`).
    pub alpha: Option<f64>,
    /// Duration `t'` of the stability comparison (default: end of the grid).
    pub t_prime: Option<f64>,
    /// Relative tolerance of the oracle comparison.
    pub oracle_tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    pub initial: InitialBlock,
    pub window: WindowBlock,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub run: RunBlock,
}

/// A parsed config together with the SHA-256 of its bytes.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub sha256: String,
}

fn sites_or(values: &SiteValues, m: usize, path: &str) -> Result<Vec<f64>> {
    match values {
        SiteValues::Uniform(v) => Ok(vec![*v; m]),
        SiteValues::PerSite(vs) if vs.len() == m => Ok(vs.clone()),
        SiteValues::PerSite(vs) => Err(Error::config(path, format!("expected {m} entries, got {}", vs.len()))),
    }
}

fn prefixed(e: Error, prefix: &str) -> Error {
    match e {
        Error::Config { path, message } => Error::config(format!("{prefix}.{path}"), message),
        other => other,
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path.is_empty() { ".".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let bytes = std::fs::read(path)?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| Error::config(".", "config file is not valid UTF-8"))?;
        let config = Self::from_json(&text)?;
        Ok(LoadedConfig {
            config,
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }

    /// Checks every invariant; errors carry the field path.
    pub fn validate(&self) -> Result<()> {
        self.model().map(|_| ())?;
        self.initial_density()?;
        self.base_window()?;
        self.slope()?;
        self.solver
            .validate()
            .map_err(|e| Error::config("solver", e.to_string()))?;
        let run = &self.run;
        if run.samples == Some(0) {
            return Err(Error::config("run.samples", "must be at least 1"));
        }
        if let Some(c) = &run.certificate {
            for (name, v) in [("c2_scale", c.c2_scale), ("c3_scale", c.c3_scale)] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::config(format!("run.certificate.{name}"), "must be finite and >= 0"));
                }
            }
        }
        if let Some(f) = &run.family {
            if f.members.is_some() && f.count.is_some() {
                return Err(Error::config("run.family", "give either `members` or `count`, not both"));
            }
            let idx = f.indices();
            if idx.is_empty() {
                return Err(Error::config("run.family", "family has no members"));
            }
            if idx.contains(&0) {
                return Err(Error::config("run.family.members", "member indices start at 1"));
            }
        }
        if let Some(t) = run.oracle_tolerance {
            if !(t > 0.0) {
                return Err(Error::config("run.oracle_tolerance", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<KimuraModel> {
        let m = &self.model;
        let weights = sites_or(&m.weights, m.sites, "model.weights")?;
        let space = DiscreteSpace::new(weights).map_err(|e| Error::config("model.weights", e.to_string()))?;
        if space.sites() != m.sites {
            return Err(Error::config("model.sites", "does not match the weights"));
        }
        KimuraModel::new(space, m.rates.clone(), m.n_max, self.window.horizon).map_err(|e| match e {
            Error::Config { .. } => prefixed(e, "model"),
            Error::Model(msg) if msg.contains("n_max") => Error::config("model.n_max", msg),
            Error::Model(msg) if msg.contains("horizon") => Error::config("window.horizon", msg),
            Error::Model(msg) => Error::config("model", msg),
            other => other,
        })
    }

    pub fn initial_density(&self) -> Result<Vec<f64>> {
        let InitialBlock::Poisson { density } = &self.initial;
        let d = sites_or(density, self.model.sites, "initial.density")?;
        for (i, v) in d.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::config(format!("initial.density[{i}]"), "must be finite"));
            }
        }
        Ok(d)
    }

    /// The window with a placeholder slope; see [`ExperimentConfig::slope`].
    pub fn base_window(&self) -> Result<ScaleWindow> {
        let w = &self.window;
        if !(w.radius > 0.0 && w.radius.is_finite()) {
            return Err(Error::config("window.radius", "must be positive and finite"));
        }
        let lambda = match self.slope()? {
            Slope::Fixed(l) => l,
            Slope::Auto(_) => 1.0,
        };
        ScaleWindow::new(
            w.alpha_star,
            w.alpha0,
            w.alpha_top,
            0.0,
            w.gamma,
            lambda,
            Radius::Finite(w.radius),
            w.horizon,
        )
        .map_err(|e| Error::config("window", e.to_string()))
    }

    pub fn slope(&self) -> Result<Slope> {
        match &self.window.lambda {
            LambdaSpec::Value(l) if *l > 0.0 && l.is_finite() => Ok(Slope::Fixed(*l)),
            LambdaSpec::Value(l) => Err(Error::config("window.lambda", format!("{l} must be positive"))),
            LambdaSpec::Keyword(k) if k == "auto" => Ok(Slope::default()),
            LambdaSpec::Keyword(k) => Err(Error::config(
                "window.lambda",
                format!("expected a number or \"auto\", got \"{k}\""),
            )),
            LambdaSpec::Factor { auto } if *auto > 1.0 && auto.is_finite() => Ok(Slope::Auto(*auto)),
            LambdaSpec::Factor { auto } => Err(Error::config("window.lambda.auto", format!("{auto} must exceed 1"))),
        }
    }

    /// CLI value first, then `run.seed`, then 42.
    pub fn seed(&self, cli: Option<u64>) -> u64 {
        cli.or(self.run.seed).unwrap_or(DEFAULT_SEED)
    }

    /// Model, initial hierarchy and solver wiring with overrides applied.
    pub fn setup(&self) -> Result<(KimuraSetup, CorrelationHierarchy)> {
        let model = Arc::new(self.model()?);
        let k0 = model.poisson(&self.initial_density()?)?;
        let mut setup = kimura_setup(model, &k0, &self.base_window()?, self.slope()?)?;
        self.apply_override(&mut setup);
        Ok((setup, k0))
    }

    fn apply_override(&self, setup: &mut KimuraSetup) {
        if let Some(c) = &self.run.certificate {
            setup.problem.constants.c2 *= c.c2_scale;
            setup.problem.constants.c3 *= c.c3_scale;
        }
    }

    /// The family of the `run.family` block and the common window with
    /// `lambda = factor * lambda1` (or the fixed value).
    pub fn family(&self) -> Result<(PerturbedFamily, ScaleWindow)> {
        let block = self
            .run
            .family
            .as_ref()
            .ok_or_else(|| Error::config("run.family", "the stability run needs a family block"))?;
        let base = self.model()?;
        let rho = self.initial_density()?;
        let window = self.base_window()?;
        let slope = self.slope()?;
        let build = |model: KimuraModel, rho: &[f64]| -> Result<KimuraSetup> {
            let model = Arc::new(model);
            let k0 = model.poisson(rho)?;
            let mut s = kimura_setup(model, &k0, &window, Slope::Auto(2.0))?;
            self.apply_override(&mut s);
            Ok(s)
        };
        let limit = build(base.clone(), &rho)?;
        let mut members = Vec::new();
        let mut sizes = Vec::new();
        let m = base.space().sites();
        for n in block.indices() {
            let eps = 2f64.powi(-(n as i32));
            let (model, density, size) = match block.kind {
                FamilyKind::Identical => (base.clone(), rho.clone(), 0.0),
                FamilyKind::HScale => {
                    let mut rates = base.rates().clone();
                    let h = rates.h.base(m);
                    rates.h.values = SiteValues::PerSite(h.iter().map(|v| v * (1.0 + eps)).collect());
                    let size = h.iter().fold(0.0f64, |a, v| a.max(v * eps)) * rates.h.profile.sup(base.horizon());
                    (base.with_rates(rates)?, rho.clone(), size)
                }
                FamilyKind::InitialScale => {
                    let d: Vec<f64> = rho.iter().map(|r| r * (1.0 + eps)).collect();
                    let k = base.poisson(&d)?;
                    let k0 = base.poisson(&rho)?;
                    let diff: Vec<f64> = k.values().iter().zip(k0.values()).map(|(a, b)| a - b).collect();
                    let size = crate::scale::ScaleNorm::norm(&base.norm(), &diff, window.alpha_star);
                    (base.clone(), d, size)
                }
            };
            members.push(build(model, &density)?.problem);
            sizes.push(size);
        }
        let family = PerturbedFamily::new(limit.problem, members, sizes)?;
        let lambda = match slope {
            Slope::Auto(f) => f * crate::stability::lambda1(&family, &window)?,
            Slope::Fixed(l) => l,
        };
        Ok((family, window.with_lambda(lambda)?))
    }
}
