//! 2x2 digital optical switch built from an adiabatic coupler on NPP rib
//! waveguides with PTFE cladding.
//!
//! A vertical drive field `V / electrode_spacing` raises the index of one arm
//! by `dn = 1/2 n^3 r E`. Light entering the coupler follows the local
//! fundamental supermode, whose weight in the higher-index arm is
//!
//! ```text
//! bar = 1/2 (1 + X / sqrt(1 + X^2)),   X = d_beta / (2 kappa),   d_beta = 2 pi dn / lambda
//! ```
//!
//! so the output goes from an even split at zero drive to the higher-index arm
//! as the drive grows, and flips port when the drive changes sign. The
//! coupling coefficient defaults to `kappa = pi / (2 L)` for interaction
//! length `L` (a full coupler) and can be replaced by a measured value.

use std::f64::consts::{LN_10, PI};

use serde::{Deserialize, Serialize};

use crate::eo_classical::{BirefringentSlab, EOTensor};
use crate::error::{invalid, Error, Result};
use crate::units::{MICROMETRE, PM_PER_V_TIMES_V_PER_UM};

/// Default extinction that counts as switched, dB. A common switch
/// specification, not a property of the device.
pub const DEFAULT_EXTINCTION_DB: f64 = 15.0;

/// Mode-conversion factor above which a branch behaves digitally.
pub const DIGITAL_MODE_CONVERSION_FACTOR: f64 = 0.43;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchGeometry {
    /// Full angle between the two arms, mrad.
    pub branch_angle: f64,
    /// um.
    pub electrode_spacing: f64,
    /// Electrode / coupler length, um. No default: it is a design input.
    pub interaction_length: f64,
    /// NPP core.
    pub core_index: f64,
    /// PTFE cladding.
    pub clad_index: f64,
    /// um.
    pub rib_width: f64,
    /// Device thickness, um.
    pub rib_height: f64,
    /// Measured coupling coefficient, 1/m, replacing the full-coupler default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_override: Option<f64>,
}

impl SwitchGeometry {
    /// Default cross-section (1 mrad branch, 10 um electrode spacing) with the
    /// given interaction length.
    pub fn with_interaction_length(interaction_length: f64) -> Result<Self> {
        Self {
            branch_angle: 1.0,
            electrode_spacing: 10.0,
            interaction_length,
            core_index: 1.8,
            clad_index: 1.35,
            rib_width: 4.0,
            rib_height: 3.0,
            coupling_override: None,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        let positive = [
            ("branch_angle_mrad", self.branch_angle),
            ("electrode_spacing_um", self.electrode_spacing),
            ("interaction_length_um", self.interaction_length),
            ("rib_width_um", self.rib_width),
            ("rib_height_um", self.rib_height),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Geometry(format!("{name} = {v} must be > 0")));
            }
        }
        if !(self.clad_index >= 1.0 && self.core_index > self.clad_index) {
            return Err(Error::Geometry(format!(
                "core index {} must exceed cladding index {} >= 1",
                self.core_index, self.clad_index
            )));
        }
        if self.electrode_spacing < self.rib_height {
            return Err(Error::Geometry(format!(
                "electrode spacing {} um is less than the device thickness {} um",
                self.electrode_spacing, self.rib_height
            )));
        }
        Ok(self)
    }

    /// Coupling coefficient kappa, 1/m.
    pub fn coupling(&self) -> Result<f64> {
        let kappa = self
            .coupling_override
            .unwrap_or(PI / (2.0 * self.interaction_length * MICROMETRE));
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(invalid("coupling", format!("kappa = {kappa} must be > 0")));
        }
        Ok(kappa)
    }

    /// Lateral field decay constant outside the rib,
    /// `sqrt(k0^2 (n_core^2 - n_clad^2) - (pi / w)^2)`, 1/m. `None` when the
    /// rib is too narrow to guide.
    pub fn lateral_decay(&self, wavelength_um: f64) -> Option<f64> {
        let k0 = 2.0 * PI / (wavelength_um * MICROMETRE);
        let transverse = PI / (self.rib_width * MICROMETRE);
        let g2 = k0 * k0 * (self.core_index.powi(2) - self.clad_index.powi(2)) - transverse * transverse;
        (g2 > 0.0).then(|| g2.sqrt())
    }
}

/// Index asymmetry produced by `voltage` across the electrodes.
pub fn drive_delta_n(
    voltage: f64,
    geometry: &SwitchGeometry,
    tensor: &EOTensor,
    slab: &BirefringentSlab,
    breakdown: f64,
) -> Result<f64> {
    let field = voltage / geometry.electrode_spacing;
    if !field.is_finite() || field.abs() > breakdown {
        return Err(Error::Breakdown {
            field_v_per_um: field,
            limit_v_per_um: breakdown,
        });
    }
    Ok(0.5 * slab.n_x.powi(3) * tensor.r12 * field * PM_PER_V_TIMES_V_PER_UM)
}

/// Asymmetry parameter `X = d_beta / (2 kappa)`.
pub fn asymmetry(delta_n: f64, geometry: &SwitchGeometry, wavelength_um: f64) -> Result<f64> {
    let kappa = geometry.coupling()?;
    let d_beta = 2.0 * PI * delta_n / (wavelength_um * MICROMETRE);
    Ok(d_beta / (2.0 * kappa))
}

/// `(cross, bar)` output powers for input into the coupler.
pub fn adiabatic_transfer(
    delta_n: f64,
    geometry: &SwitchGeometry,
    wavelength_um: f64,
) -> Result<(f64, f64)> {
    if !(wavelength_um.is_finite() && wavelength_um > 0.0) {
        return Err(invalid("wavelength_um", format!("{wavelength_um} must be > 0")));
    }
    let x = asymmetry(delta_n, geometry, wavelength_um)?;
    // minority port, written without cancellation
    let root = (1.0 + x * x).sqrt();
    let minority = 0.5 / (root * (root + x.abs()));
    Ok(if x >= 0.0 {
        (minority, 1.0 - minority)
    } else {
        (1.0 - minority, minority)
    })
}

/// Extinction `10 log10(bar / cross)`, dB.
pub fn extinction_db(cross: f64, bar: f64) -> f64 {
    10.0 * (bar / cross).log10()
}

/// Asymmetry needed for an extinction of `db`; the inverse of
/// `20 log10(X + sqrt(1 + X^2))`.
pub fn asymmetry_for_extinction(db: f64) -> f64 {
    (db * LN_10 / 20.0).sinh()
}

/// Transfer curve of the switch over a voltage grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchReport {
    pub wavelength: f64,
    pub voltage_grid: Vec<f64>,
    pub cross_power: Vec<f64>,
    pub bar_power: Vec<f64>,
    pub extinction_db: Vec<f64>,
    pub threshold_db: f64,
    /// First grid voltage reaching `threshold_db`.
    pub switching_voltage: Option<f64>,
    /// Spread of the bar power at and beyond the switching voltage.
    pub digital_flatness: Option<f64>,
}

pub fn switching_curve(
    geometry: &SwitchGeometry,
    tensor: &EOTensor,
    slab: &BirefringentSlab,
    voltage_grid: &[f64],
    wavelength_um: f64,
    threshold_db: f64,
    breakdown: f64,
) -> Result<SwitchReport> {
    if voltage_grid.is_empty() {
        return Err(invalid("voltage_grid", "must not be empty"));
    }
    if voltage_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("voltage_grid", "must be ascending"));
    }
    let mut cross_power = Vec::with_capacity(voltage_grid.len());
    let mut bar_power = Vec::with_capacity(voltage_grid.len());
    let mut ext = Vec::with_capacity(voltage_grid.len());
    for &v in voltage_grid {
        let dn = drive_delta_n(v, geometry, tensor, slab, breakdown)?;
        let (c, b) = adiabatic_transfer(dn, geometry, wavelength_um)?;
        cross_power.push(c);
        bar_power.push(b);
        ext.push(extinction_db(c, b));
    }
    let first = ext.iter().position(|&e| e >= threshold_db);
    let switching_voltage = first.map(|i| voltage_grid[i]);
    let digital_flatness = first.map(|i| {
        let tail = &bar_power[i..];
        let max = tail.iter().copied().fold(f64::MIN, f64::max);
        let min = tail.iter().copied().fold(f64::MAX, f64::min);
        max - min
    });
    Ok(SwitchReport {
        wavelength: wavelength_um,
        voltage_grid: voltage_grid.to_vec(),
        cross_power,
        bar_power,
        extinction_db: ext,
        threshold_db,
        switching_voltage,
        digital_flatness,
    })
}

/// Drive voltage reaching `db` extinction, or `None` when the tensor gives no
/// index change.
pub fn voltage_for_extinction(
    db: f64,
    geometry: &SwitchGeometry,
    tensor: &EOTensor,
    slab: &BirefringentSlab,
    wavelength_um: f64,
) -> Result<Option<f64>> {
    let per_volt = 0.5 * slab.n_x.powi(3) * tensor.r12 * PM_PER_V_TIMES_V_PER_UM
        / geometry.electrode_spacing;
    if per_volt <= 0.0 {
        return Ok(None);
    }
    let x = asymmetry_for_extinction(db);
    let kappa = geometry.coupling()?;
    let delta_n = x * 2.0 * kappa * wavelength_um * MICROMETRE / (2.0 * PI);
    Ok(Some(delta_n / per_volt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Requirements {
    pub target_extinction_db: f64,
    pub max_voltage: f64,
    /// um.
    pub wavelength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub geometry: SwitchGeometry,
    pub tensor: EOTensor,
    pub core_index_for_drive: f64,
    pub requirements: Requirements,
    pub breakdown: f64,
    pub coupling: f64,
    /// Drive voltage for the target at the configured interaction length.
    pub required_voltage: Option<f64>,
    /// Shortest interaction length meeting the target at `max_voltage`, um.
    pub min_interaction_length: Option<f64>,
    /// Mode-conversion factor `d_beta / (branch_angle * gamma)` at the required voltage.
    pub mode_conversion_factor: Option<f64>,
    pub spacing_ok: bool,
    pub feasible: bool,
    pub notes: Vec<String>,
}

pub fn design_report(
    geometry: &SwitchGeometry,
    tensor: &EOTensor,
    slab: &BirefringentSlab,
    requirements: &Requirements,
    breakdown: f64,
) -> Result<DesignReport> {
    let mut notes = Vec::new();
    let spacing_ok = geometry.electrode_spacing >= geometry.rib_height;
    if !spacing_ok {
        notes.push("electrode spacing is less than the device thickness".to_owned());
    }
    let coupling = geometry.coupling()?;
    let lambda = requirements.wavelength;
    let required_voltage =
        voltage_for_extinction(requirements.target_extinction_db, geometry, tensor, slab, lambda)?;
    if required_voltage.is_none() {
        notes.push("tensor produces no index change for a vertical field".to_owned());
    }

    let x = asymmetry_for_extinction(requirements.target_extinction_db);
    let per_volt = 0.5 * slab.n_x.powi(3) * tensor.r12 * PM_PER_V_TIMES_V_PER_UM
        / geometry.electrode_spacing;
    let min_interaction_length = (per_volt > 0.0 && requirements.max_voltage > 0.0).then(|| {
        let d_beta = 2.0 * PI * per_volt * requirements.max_voltage / (lambda * MICROMETRE);
        // X = d_beta L / pi with the full-coupler kappa
        x * PI / d_beta / MICROMETRE
    });

    let mode_conversion_factor = required_voltage.and_then(|v| {
        let gamma = geometry.lateral_decay(lambda)?;
        let d_beta = 2.0 * PI * per_volt * v / (lambda * MICROMETRE);
        Some(d_beta / (geometry.branch_angle * 1e-3 * gamma))
    });
    if geometry.lateral_decay(lambda).is_none() {
        notes.push("rib is too narrow to guide at this wavelength".to_owned());
    }

    let mut feasible = spacing_ok;
    match required_voltage {
        Some(v) if v <= requirements.max_voltage => {
            if v / geometry.electrode_spacing > breakdown {
                notes.push(format!(
                    "required field {:.3} V/um exceeds breakdown {breakdown} V/um",
                    v / geometry.electrode_spacing
                ));
                feasible = false;
            }
        }
        Some(v) => {
            notes.push(format!(
                "required voltage {v:.4} V exceeds the {} V limit",
                requirements.max_voltage
            ));
            feasible = false;
        }
        None => feasible = false,
    }
    if geometry.coupling_override.is_some() {
        notes.push("coupling coefficient supplied by the user".to_owned());
    }

    Ok(DesignReport {
        geometry: *geometry,
        tensor: *tensor,
        core_index_for_drive: slab.n_x,
        requirements: *requirements,
        breakdown,
        coupling,
        required_voltage,
        min_interaction_length,
        mode_conversion_factor,
        spacing_ok,
        feasible,
        notes,
    })
}

impl DesignReport {
    pub fn to_text(&self) -> String {
        let g = &self.geometry;
        let opt = |v: Option<f64>, unit: &str| match v {
            Some(v) if unit.is_empty() => format!("{v} "),
            Some(v) => format!("{v} {unit}"),
            None => "n/a".to_owned(),
        };
        let mut out = String::new();
        out.push_str("[design]\n");
        out.push_str(&format!("feasible = {}\n", self.feasible));
        out.push_str(&format!("required_voltage = {}\n", opt(self.required_voltage, "V")));
        out.push_str(&format!(
            "min_interaction_length = {}\n",
            opt(self.min_interaction_length, "um")
        ));
        out.push_str(&format!(
            "mode_conversion_factor = {}(digital above {DIGITAL_MODE_CONVERSION_FACTOR})\n",
            opt(self.mode_conversion_factor, "")
        ));
        out.push_str(&format!(
            "electrode_spacing_vs_thickness = {} ({} um >= {} um)\n",
            if self.spacing_ok { "ok" } else { "violated" },
            g.electrode_spacing,
            g.rib_height
        ));
        out.push_str("\n[requirements]\n");
        out.push_str(&format!(
            "target_extinction_db = {}\nmax_voltage = {} V\nwavelength = {} um\n",
            self.requirements.target_extinction_db,
            self.requirements.max_voltage,
            self.requirements.wavelength
        ));
        out.push_str("\n[assumptions]\n");
        out.push_str(&format!(
            "branch_angle = {} mrad\nelectrode_spacing = {} um\ninteraction_length = {} um\n",
            g.branch_angle, g.electrode_spacing, g.interaction_length
        ));
        out.push_str(&format!(
            "core_index = {}\nclad_index = {}\nrib_width = {} um\nrib_height = {} um\n",
            g.core_index, g.clad_index, g.rib_width, g.rib_height
        ));
        out.push_str(&format!(
            "r12 = {} pm/V\nindex_for_drive = {}\nbreakdown = {} V/um\n",
            self.tensor.r12, self.core_index_for_drive, self.breakdown
        ));
        out.push_str(&format!("coupling = {} 1/m\n", self.coupling));
        out.push_str(if g.coupling_override.is_some() {
            "coupling_source = user supplied\n"
        } else {
            "coupling_source = kappa = pi / (2 * interaction_length)\n"
        });
        out.push_str("transfer_model = bar = (1 + X / sqrt(1 + X^2)) / 2, X = 2 pi dn / lambda / (2 kappa)\n");
        out.push_str("drive_model = dn = n^3 r12 (V / electrode_spacing) / 2, vertical field\n");
        out.push_str("extinction_threshold_source = switch specification default, not a material property\n");
        for n in &self.notes {
            out.push_str(&format!("note = {n}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Port {
    Bar,
    Cross,
}

/// One of the four electrode presets: a wavelength routed to a port.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoutingPreset {
    pub wavelength: f64,
    pub port: Port,
    pub voltage: f64,
}

/// Presets routing each of two wavelengths to either output at the given
/// extinction. Positive drive selects the bar port, negative the cross port.
pub fn routing_presets(
    geometry: &SwitchGeometry,
    tensor: &EOTensor,
    slab: &BirefringentSlab,
    wavelengths: [f64; 2],
    db: f64,
) -> Result<Vec<RoutingPreset>> {
    let mut presets = Vec::with_capacity(4);
    for wavelength in wavelengths {
        let v = voltage_for_extinction(db, geometry, tensor, slab, wavelength)?
            .ok_or_else(|| invalid("eo_tensor", "no index change for a vertical field"))?;
        presets.push(RoutingPreset { wavelength, port: Port::Bar, voltage: v });
        presets.push(RoutingPreset { wavelength, port: Port::Cross, voltage: -v });
    }
    Ok(presets)
}
