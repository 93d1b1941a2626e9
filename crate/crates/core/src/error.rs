use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("{op}: domain error, Im z must be positive (got z = {z})")]
    Domain { op: &'static str, z: Complex64 },

    #[error("{op}: non-finite integrand value at t = {t}")]
    NonFinite { op: &'static str, t: f64 },

    #[error("select_cone: cone selection failed for alpha = {alpha} (no beta <= {cap} passes the probes)")]
    ConeSelection { alpha: f64, cap: f64 },

    #[error("invert_f: outside invertibility region at w = {w}")]
    OutsideInvertibility { w: Complex64 },

    #[error("prop23_residual: degenerate residual at w = {w} (|w^2 (G(w) - 1/w)| = {denominator:e})")]
    DegenerateResidual { w: Complex64, denominator: f64 },

    #[error("stieltjes_invert: inversion mass defect (recovered mass {mass})")]
    MassDefect { mass: f64 },

    #[error("free_convolve: subordination stall at z = {z}")]
    SubordinationStall { z: Complex64 },

    #[error("materialize_free: continuation stall at z = {z}")]
    ContinuationStall { z: Complex64 },

    #[error("classical_convolve: grid too small (recovered mass {mass})")]
    GridTooSmall { mass: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ConeSelection { .. }
                | Error::OutsideInvertibility { .. }
                | Error::DegenerateResidual { .. }
                | Error::MassDefect { .. }
                | Error::SubordinationStall { .. }
                | Error::ContinuationStall { .. }
                | Error::GridTooSmall { .. }
                | Error::NonFinite { .. }
        )
    }
}
