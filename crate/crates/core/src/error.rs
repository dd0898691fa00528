use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("non-finite input `{0}`")]
    NonFinite(&'static str),

    #[error(
        "membrane solver did not converge at {pressure_kpa} kPa after {iterations} iterations \
         (gradient max-norm {gradient_norm:.3e} N, energy {energy:.6e} N*mm)"
    )]
    NonConvergence {
        pressure_kpa: f64,
        iterations: usize,
        gradient_norm: f64,
        energy: f64,
    },

    #[error(
        "over-inflation at {pressure_kpa} kPa: principal stretch {stretch:.3} exceeds cap {cap}"
    )]
    OverInflation {
        pressure_kpa: f64,
        stretch: f64,
        cap: f64,
    },

    #[error("axial displacement {displacement_mm:.3e} mm is below the numerical floor; stiffness not resolvable")]
    StiffnessNotResolvable { displacement_mm: f64 },

    #[error("pressure sweep failed at {pressure_kpa} kPa: {source}")]
    Sweep {
        pressure_kpa: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("arclength {s_mm} mm outside lumen [0, {length_mm}]")]
    OutOfRange { s_mm: f64, length_mm: f64 },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown lumen fixture `{0}`")]
    UnknownFixture(String),

    #[error("unknown calibration `{0}`")]
    UnknownCalibration(String),

    #[error("scenario: {0}")]
    Scenario(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(value: f64, name: &'static str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
