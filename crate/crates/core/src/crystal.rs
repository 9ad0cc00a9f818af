//! NPP unit cell, molecular orientation and the slab-to-layer decomposition.
//!
//! Photons travel along the crystal b axis. Each layer holds one molecule, so
//! the layer pitch is `b / molecules_per_cell`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Monoclinic unit cell. Lengths in angstrom, `beta` in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitCell {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub beta: f64,
    pub molecules_per_cell: u32,
    pub space_group_label: String,
}

impl Default for UnitCell {
    /// N-(4-nitrophenyl)-L-prolinol, space group P2_1.
    fn default() -> Self {
        Self {
            a: 5.261,
            b: 14.908,
            c: 7.185,
            beta: 105.18,
            molecules_per_cell: 2,
            space_group_label: "P2_1".to_owned(),
        }
    }
}

impl UnitCell {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "unit_cell",
                    reason: format!("{name} = {v} must be a positive length"),
                });
            }
        }
        if !(self.beta > 0.0 && self.beta < 180.0) {
            return Err(invalid("beta", format!("{} not in (0, 180) degrees", self.beta)));
        }
        if self.molecules_per_cell == 0 {
            return Err(invalid("molecules_per_cell", "must be at least 1"));
        }
        Ok(())
    }

    /// Distance between successive interaction layers along b, in angstrom.
    pub fn layer_pitch(&self) -> f64 {
        self.b / f64::from(self.molecules_per_cell)
    }
}

/// Orientation of the molecule relative to the crystal axes, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoleculeOrientation {
    /// Angle between the b axis and the N(1)-N(2) charge-transfer axis.
    pub ct_axis_angle: f64,
    /// Angle between the molecular mean plane and the (101) plane.
    pub mean_plane_angle: f64,
}

impl Default for MoleculeOrientation {
    fn default() -> Self {
        Self {
            ct_axis_angle: 58.6,
            mean_plane_angle: 11.0,
        }
    }
}

/// A slab of crystal cut into molecular interaction layers.
///
/// The mean-plane tilt is carried along but does not enter the delays.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalStack {
    /// Slab length along the propagation axis, um.
    pub length: f64,
    pub layer_count: usize,
    /// Angstrom.
    pub layer_pitch: f64,
    pub orientation: MoleculeOrientation,
}

// Lengths that land within this fraction of a layer below a boundary count the
// boundary layer, so that e.g. exactly one pitch yields one layer despite
// the um -> angstrom round trip.
const LAYER_SNAP: f64 = 1e-9;

/// Decomposes a slab of `length` um into layers of one molecule each.
pub fn build_stack(
    length: f64,
    cell: &UnitCell,
    orientation: MoleculeOrientation,
) -> Result<CrystalStack> {
    cell.validate()?;
    if !length.is_finite() {
        return Err(invalid("length", "must be finite"));
    }
    let pitch = cell.layer_pitch();
    let layers = length * 1e4 / pitch + LAYER_SNAP;
    if layers < 1.0 {
        return Err(Error::SlabTooThin {
            length_um: length,
            pitch_angstrom: pitch,
        });
    }
    Ok(CrystalStack {
        length,
        layer_count: layers.floor() as usize,
        layer_pitch: pitch,
        orientation,
    })
}

/// Wavelength range (um) over which the crystal is transparent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransparencyWindow {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Default for TransparencyWindow {
    fn default() -> Self {
        Self {
            lambda_min: 0.5,
            lambda_max: 2.0,
        }
    }
}

impl TransparencyWindow {
    pub fn new(lambda_min: f64, lambda_max: f64) -> Result<Self> {
        if !(lambda_min > 0.0 && lambda_min < lambda_max) {
            return Err(invalid(
                "transparency_window",
                format!("need 0 < min < max, got [{lambda_min}, {lambda_max}]"),
            ));
        }
        Ok(Self {
            lambda_min,
            lambda_max,
        })
    }

    /// Errors unless `lambda` is inside the window or `force` is set.
    pub fn admit(&self, lambda: f64, force: bool) -> Result<()> {
        if force || check_transparency(lambda, self) {
            Ok(())
        } else {
            Err(Error::OpaqueWavelength {
                wavelength_um: lambda,
                min_um: self.lambda_min,
                max_um: self.lambda_max,
            })
        }
    }
}

/// Inclusive window test.
pub fn check_transparency(lambda: f64, window: &TransparencyWindow) -> bool {
    lambda >= window.lambda_min && lambda <= window.lambda_max
}
