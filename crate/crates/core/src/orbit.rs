//! The elliptical pi-electron orbit.
//!
//! The electron sweeps equal areas in equal times around an effective charge
//! at one focus. `theta = 0` points at the perigee (prolinol side), `theta = pi`
//! at the apogee (nitro side). The fraction of the period spent between 0 and
//! `theta` is the CDF of the electron's angular position, which is what the
//! Monte-Carlo transport samples from.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Eccentricity ceiling applied when a field pushes the orbit towards a line.
pub const MAX_ECCENTRICITY: f64 = 0.999;

const MAX_ROOT_ITERATIONS: usize = 200;
const THETA_TOLERANCE: f64 = 1e-12;

/// Calibrated pi-electron ellipse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitModel {
    /// Dimensionless, in [0, 1).
    pub eccentricity: f64,
    /// Semimajor axis u, angstrom.
    pub semimajor_axis: f64,
    /// Effective focal charge Z, in units of e.
    pub effective_charge: f64,
    /// Orbital period. A pure scale: it cancels out of every density and
    /// never enters a delay.
    pub period: f64,
}

impl Default for OrbitModel {
    fn default() -> Self {
        Self::new(0.26, 1.4, 3.9).expect("shipped model is valid")
    }
}

impl OrbitModel {
    pub fn new(eccentricity: f64, semimajor_axis: f64, effective_charge: f64) -> Result<Self> {
        let model = Self {
            eccentricity,
            semimajor_axis,
            effective_charge,
            period: 1.0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.eccentricity) {
            return Err(invalid(
                "epsilon",
                format!("{} not in [0, 1)", self.eccentricity),
            ));
        }
        if !(self.semimajor_axis.is_finite() && self.semimajor_axis > 0.0) {
            return Err(invalid("u_angstrom", format!("{} must be > 0", self.semimajor_axis)));
        }
        if !(self.effective_charge.is_finite() && self.effective_charge > 0.0) {
            return Err(invalid("z_eff", format!("{} must be > 0", self.effective_charge)));
        }
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(invalid("period", format!("{} must be > 0", self.period)));
        }
        Ok(())
    }

    /// Semiminor axis v = u sqrt(1 - eps^2), angstrom.
    pub fn semiminor_axis(&self) -> f64 {
        self.semimajor_axis * (1.0 - self.eccentricity * self.eccentricity).sqrt()
    }

    pub fn with_eccentricity(&self, eccentricity: f64) -> Self {
        Self {
            eccentricity,
            ..*self
        }
    }
}

/// Applied transverse field and its coupling into the orbit shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldDrive {
    /// E_y, V/um.
    pub field_magnitude: f64,
    /// Angle psi between the field and the charge-transfer axis, degrees.
    pub ct_angle: f64,
    /// Eccentricity change per V/um along the charge-transfer axis.
    pub coupling: f64,
}

impl FieldDrive {
    pub fn new(field_magnitude: f64, ct_angle: f64, coupling: f64) -> Result<Self> {
        let drive = Self {
            field_magnitude,
            ct_angle,
            coupling,
        };
        drive.validate()?;
        Ok(drive)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.field_magnitude.is_finite() && self.field_magnitude >= 0.0) {
            return Err(invalid("field", format!("{} must be >= 0", self.field_magnitude)));
        }
        if !(0.0..=90.0).contains(&self.ct_angle) {
            return Err(invalid("psi_deg", format!("{} not in [0, 90]", self.ct_angle)));
        }
        if !(self.coupling.is_finite() && self.coupling >= 0.0) {
            return Err(invalid("alpha", format!("{} must be >= 0", self.coupling)));
        }
        Ok(())
    }
}

/// cos of an angle in degrees, exact at 0 and 90.
pub fn cos_degrees(deg: f64) -> f64 {
    if deg == 90.0 {
        0.0
    } else if deg == 0.0 {
        1.0
    } else {
        deg.to_radians().cos()
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=TAU).contains(&theta) {
        Ok(())
    } else {
        Err(Error::AngleOutOfDomain { theta })
    }
}

/// Time for the radius vector to sweep from 0 to `theta`.
///
/// `t = T/(2 pi) * { 2 atan( sqrt((1-e)/(1+e)) tan(theta/2) ) - e sqrt(1-e^2) sin(theta) / (1 + e cos(theta)) }`,
/// with the arctangent moved onto its next branch past `theta = pi` so the
/// result is continuous and reaches `T` at `2 pi`.
pub fn sweep_time(theta: f64, model: &OrbitModel) -> Result<f64> {
    check_theta(theta)?;
    let e = model.eccentricity;
    let mut half = (((1.0 - e) / (1.0 + e)).sqrt() * (theta / 2.0).tan()).atan();
    if theta > PI {
        half += PI;
    }
    let area_term = e * (1.0 - e * e).sqrt() * theta.sin() / (1.0 + e * theta.cos());
    Ok(model.period / TAU * (2.0 * half - area_term))
}

/// Focus-to-electron distance at `theta`, angstrom.
pub fn orbit_radius(theta: f64, model: &OrbitModel) -> f64 {
    let e = model.eccentricity;
    (1.0 - e * e) * model.semimajor_axis / (1.0 + e * theta.cos())
}

/// Angular density r^2 / (2 pi u v), the derivative of `sweep_time / T`.
pub fn theta_pdf(theta: f64, model: &OrbitModel) -> f64 {
    let r = orbit_radius(theta, model);
    r * r / (TAU * model.semimajor_axis * model.semiminor_axis())
}

/// Inverts `sweep_time(theta) / T = fraction` for `fraction` in [0, 1).
///
/// The sweep fraction equals `(E - e sin E) / 2 pi` in the eccentric anomaly
/// `E`, so the root is bracketed on [0, 2 pi] in `E` and refined by Newton
/// steps that fall back to bisection whenever they leave the bracket. The
/// stopping tolerance on `E` is scaled so the error in `theta` stays below
/// 1e-12 rad.
pub fn theta_at_fraction(fraction: f64, eccentricity: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(invalid("fraction", format!("{fraction} not in [0, 1)")));
    }
    let e = eccentricity;
    let mean = TAU * fraction;
    if e == 0.0 {
        return Ok(mean);
    }
    // max d(theta)/dE is sqrt((1+e)/(1-e)) at perigee
    let tol = THETA_TOLERANCE * ((1.0 - e) / (1.0 + e)).sqrt();

    let (mut lo, mut hi) = (0.0, TAU);
    let mut ecc = (mean + e * mean.sin()).clamp(lo, hi);
    let mut converged = false;
    for _ in 0..MAX_ROOT_ITERATIONS {
        let f = ecc - e * ecc.sin() - mean;
        if f == 0.0 {
            converged = true;
            break;
        }
        if f > 0.0 {
            hi = ecc;
        } else {
            lo = ecc;
        }
        let mut next = ecc - f / (1.0 - e * ecc.cos());
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - ecc).abs();
        ecc = next;
        if step <= tol || hi - lo <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: MAX_ROOT_ITERATIONS,
        });
    }
    let half = ecc / 2.0;
    Ok(2.0 * ((1.0 + e).sqrt() * half.sin()).atan2((1.0 - e).sqrt() * half.cos()))
}

/// Draws an angular position with density `theta_pdf` by inverse transform.
pub fn sample_theta<R: Rng + ?Sized>(model: &OrbitModel, rng: &mut R) -> Result<f64> {
    theta_at_fraction(rng.gen::<f64>(), model.eccentricity)
}

/// An orbit reshaped by an applied field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbed {
    pub model: OrbitModel,
    /// The linear response left [0, MAX_ECCENTRICITY] and was clamped.
    pub clamped: bool,
}

/// Field-induced eccentricity: `e' = clamp(e + alpha E cos psi, 0, 0.999)`.
/// Only the eccentricity changes.
pub fn perturb_eccentricity(model: &OrbitModel, drive: &FieldDrive) -> Perturbed {
    let raw = model.eccentricity
        + drive.coupling * drive.field_magnitude * cos_degrees(drive.ct_angle);
    let eccentricity = raw.clamp(0.0, MAX_ECCENTRICITY);
    Perturbed {
        model: model.with_eccentricity(eccentricity),
        clamped: eccentricity != raw,
    }
}
