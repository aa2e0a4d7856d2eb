use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Domain, grid or suite parameters that cannot be honoured.
    #[error("configuration error: {0}")]
    Config(String),

    /// A time slab contains a breakpoint of the field schedule.
    #[error("schedule error: slab ]{lo}, {hi}[ straddles breakpoint {at}")]
    Schedule { lo: f64, hi: f64, at: f64 },

    /// A surface that the grid cannot resolve.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Time step larger than the CFL limit.
    #[error("CFL violation: dt = {dt} exceeds limit {limit} (cfl {cfl}, h {h}, |b| {speed})")]
    Cfl {
        dt: f64,
        limit: f64,
        cfl: f64,
        h: f64,
        speed: f64,
    },

    /// A test function outside the admissible class for the requested terms.
    #[error("inadmissible test function: {0}")]
    Admissibility(String),

    /// Bad command line or config file.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
