use thiserror::Error;

/// Errors raised by the simulation, calibration and design layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("slab too thin: {length_um} um is shorter than one layer pitch ({pitch_angstrom} A)")]
    SlabTooThin { length_um: f64, pitch_angstrom: f64 },

    #[error("angle {theta} rad is outside [0, 2pi]")]
    AngleOutOfDomain { theta: f64 },

    #[error("wavelength {wavelength_um} um is outside the transparency window [{min_um}, {max_um}] um")]
    OpaqueWavelength {
        wavelength_um: f64,
        min_um: f64,
        max_um: f64,
    },

    #[error("photon energy {energy_ev:.4} eV is not below the excitation threshold {threshold_ev} eV (resonant)")]
    Resonant { energy_ev: f64, threshold_ev: f64 },

    #[error("stack has no interaction layers")]
    EmptyStack,

    #[error("field {field_v_per_um} V/um exceeds the breakdown limit {limit_v_per_um} V/um")]
    Breakdown {
        field_v_per_um: f64,
        limit_v_per_um: f64,
    },

    #[error("coupling not identifiable: {0}")]
    CouplingNotIdentifiable(String),

    #[error("geometry constraint violated: {0}")]
    Geometry(String),

    #[error("root finder did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
