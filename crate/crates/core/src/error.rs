use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Height or width is zero, or the value buffer does not match them.
    InvalidShape { height: usize, width: usize, len: usize },
    /// A likelihood outside `[0, 1]` (or NaN) at a row-major pixel index.
    ValueOutOfRange { index: usize, value: f64 },
    /// Two grids that must agree in shape do not.
    DimensionMismatch { left: (usize, usize), right: (usize, usize) },
    EmptyGrid,
    /// The brute-force oracle refuses grids above its pixel budget.
    GridTooLarge { pixels: usize, limit: usize },
    NegativePhi(f64),
    InvalidExponent(f64),
    /// Finite-difference step would reorder pixels.
    StepTooLarge { step: f64, limit: f64 },
    InvalidWindow(usize),
    InvalidConfig(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidShape { height, width, len } => write!(
                f,
                "invalid grid shape {height}x{width} for {len} values"
            ),
            Error::ValueOutOfRange { index, value } => {
                write!(f, "value {value} at pixel {index} is outside [0, 1]")
            }
            Error::DimensionMismatch { left, right } => write!(
                f,
                "dimension mismatch: {}x{} vs {}x{}",
                left.0, left.1, right.0, right.1
            ),
            Error::EmptyGrid => f.write_str("grid is empty"),
            Error::GridTooLarge { pixels, limit } => {
                write!(f, "grid has {pixels} pixels, oracle limit is {limit}")
            }
            Error::NegativePhi(phi) => write!(f, "persistence threshold {phi} is negative"),
            Error::InvalidExponent(p) => write!(f, "exponent {p} must be at least 1"),
            Error::StepTooLarge { step, limit } => write!(
                f,
                "finite-difference step {step} is not below half the minimum value gap ({limit})"
            ),
            Error::InvalidWindow(w) => write!(f, "window size {w} must be positive"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
