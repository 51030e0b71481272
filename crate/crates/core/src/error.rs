use thiserror::Error;

/// Failures reported by the solvers and closed-form evaluators.
///
/// Values are carried as `f64` so the error type does not depend on the
/// scalar the computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("investment is never optimal (g = {g} <= 0)")]
    NeverInvest { g: f64 },
    #[error("{stage} did not converge: {detail}")]
    Convergence { stage: &'static str, detail: String },
    #[error("degenerate continuation interval: xi_I - xi_E = {width}")]
    DegenerateInterval { width: f64 },
    #[error("comparative statics require a declining stream (mu < 0 and mu + delta < 0), got mu = {mu}, mu + delta = {mu_plus}")]
    NotDeclining { mu: f64, mu_plus: f64 },
    #[error("solver failed at perturbed point {which}: {source}")]
    Perturbed {
        which: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid simulation config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            reason,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
