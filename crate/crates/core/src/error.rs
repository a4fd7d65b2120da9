use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    Dimension {
        what: &'static str,
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("non-finite value in {what} at ({row}, {col})")]
    NonFinite { what: &'static str, row: usize, col: usize },

    #[error(
        "eigenvalue iteration did not converge after {iterations} sweeps \
         (order {order}, max-abs entry {max_abs:e})"
    )]
    EigenNonConvergence {
        iterations: usize,
        order: usize,
        max_abs: f64,
    },

    #[error("singular system at s = {re:e}{im:+e}i (pivot {pivot:e} below {threshold:e})")]
    Singular {
        re: f64,
        im: f64,
        pivot: f64,
        threshold: f64,
    },

    #[error("H-infinity norm undefined: state matrix is not Hurwitz (spectral abscissa {abscissa:e})")]
    NotHurwitz { abscissa: f64 },

    #[error("H-infinity bisection failed: {0}")]
    Bracket(String),

    #[error("invalid threshold bracket: {0}")]
    ThresholdBracket(String),

    #[error("certified predicate is not monotone: kappa2 = {lower:e} certified but kappa2 = {upper:e} is not")]
    NonMonotone { lower: f64, upper: f64 },

    #[error("integration step too large: dt * max|F| = {product:e} exceeds 0.1; try dt <= {suggested:e}")]
    StepSize { product: f64, suggested: f64 },

    #[error("trajectory has no usable samples: {0}")]
    Trajectory(String),

    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;
