use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample of size {n} is too small for degree {degree}")]
    SampleTooSmall { n: usize, degree: usize },

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("unknown kernel id `{0}`")]
    UnknownKernel(String),

    #[error("unsupported kernel degree {0} (supported: 1..=3)")]
    UnsupportedDegree(usize),

    #[error("association constraint violated: {0}")]
    Association(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("function is not nondecreasing on the check grid: {0}")]
    NotMonotone(String),

    #[error("asymptotic variance is not positive (sigma_U^2 = {0})")]
    DegenerateVariance(f64),

    #[error("Monte Carlo standard error {se:.3e} of theta exceeds tolerance {tol:.3e}")]
    MonteCarloTolerance { se: f64, tol: f64 },

    #[error("{0}")]
    Unsupported(String),

    #[error("malformed series line {line}: `{content}`")]
    MalformedLine { line: usize, content: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn ensure_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}
