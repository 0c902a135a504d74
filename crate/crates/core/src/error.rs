use thiserror::Error;

/// Errors raised by the solver, the model layer and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value failed validation. `path` is the dotted field path.
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    /// An iterate left the admissible ball `||u(t) - x||_alpha <= r`.
    #[error(
        "admissibility violated at time node {node} (t = {t}, alpha = {alpha}): \
         distance {distance} exceeds radius {radius}"
    )]
    Admissibility {
        node: usize,
        t: f64,
        alpha: f64,
        distance: f64,
        radius: f64,
    },

    /// A measured increment ratio exceeded the declared contraction factor.
    #[error("contraction violated at iterate {iterate}: measured ratio {ratio} exceeds lambda0/lambda = {bound}")]
    ContractionViolation { iterate: usize, ratio: f64, bound: f64 },

    /// The horizon slope does not exceed the threshold `lambda0`.
    #[error("infeasible horizon slope: lambda = {lambda} must exceed lambda0 = {lambda0}")]
    Infeasible { lambda: f64, lambda0: f64 },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("malformed configuration: {0}")]
    MalformedConfiguration(String),

    /// The oracle does not apply to the given model.
    #[error("oracle not applicable: {0}")]
    OracleDomain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
