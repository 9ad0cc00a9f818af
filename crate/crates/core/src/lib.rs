//! Quantum-photonic Monte-Carlo model of the linear electro-optic effect in
//! N-(4-nitrophenyl)-L-prolinol (NPP) crystal.
//!
//! A photon crossing the crystal is delayed once per molecular layer by its
//! interaction with the molecule's pi-electron, modelled as a charge on an
//! elliptical orbit. Summed delays give refractive indices and the phase
//! retardation between x and y polarizations; an applied field changes the
//! orbit's eccentricity and hence the retardation.
//!
//! Alongside the Monte-Carlo model sit the classical transverse Pockels
//! formulas and a design calculator for a 2x2 digital optical switch.

pub mod calibrate;
pub mod crystal;
pub mod device;
pub mod eo_classical;
pub mod error;
pub mod mc;
pub mod nelder_mead;
pub mod orbit;
pub mod transport;
pub mod units;

pub use error::{Error, Result};
