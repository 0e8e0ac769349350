use thiserror::Error;

/// Errors raised across the library.
///
/// The variants line up with the CLI exit-code contract: `Config` maps to 2,
/// `Solver` to 3, `Ergodicity`/`Diagnostics` to 4 and `Statistics` to 5.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A point sits where the mirror map has no gradient (entropy at the boundary).
    #[error("domain error: {0}")]
    Domain(String),
    /// Malformed numeric input: NaN/Inf, dimension mismatch, invalid probability vector.
    #[error("input error: {0}")]
    Input(String),
    /// Parameters that violate a solver or schedule precondition.
    #[error("config error: {0}")]
    Config(String),
    /// Kernel is reducible or periodic.
    #[error("ergodicity failure: {0}")]
    Ergodicity(String),
    /// Iterative chain diagnostics failed to converge.
    #[error("diagnostics error: {0}")]
    Diagnostics(String),
    /// Iterative solver failed to reach its tolerance.
    #[error("solver error: {0}")]
    Solver(String),
    /// Too few trials or points for a statistical procedure.
    #[error("statistics error: {0}")]
    Statistics(String),
    /// The exact merit function is only available for affine skew operators.
    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Input(format!(
            "{what}: expected dimension {expected}, got {got}"
        )));
    }
    Ok(())
}

pub(crate) fn check_finite(what: &str, v: &[f64]) -> Result<()> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::Input(format!("{what}: non-finite entry at index {i}")));
    }
    Ok(())
}
