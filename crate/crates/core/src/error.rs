use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or input lies outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// Total population collapsed to a nonpositive value.
    #[error("singular state: total population N = {n} is not positive")]
    Singular { n: f64 },

    #[error("state component {component} = {value:e} at t = {t} is below tolerance {tolerance:e}")]
    Negativity {
        t: f64,
        component: &'static str,
        value: f64,
        tolerance: f64,
    },

    #[error("non-finite value in {context} at t = {t}")]
    NonFinite { context: &'static str, t: f64 },

    /// Inputs that should share a grid (or length) do not.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("procurement split undefined: no individual was vaccinated")]
    UndefinedSplit,
}

impl Error {
    /// True for failures of the numerical pipeline itself (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::Negativity { .. } | Error::NonFinite { .. }
        )
    }
}
