//! Run configuration, data files and their validation.
//!
//! Precedence: command-line flags override the config file, which overrides
//! built-in defaults. Relative paths inside a config file are resolved
//! against the directory holding that file.

use std::fs;
use std::path::{Path, PathBuf};

use qpm_core::calibrate::{Bounds, CalibrationTarget, ObjectiveNorm};
use qpm_core::crystal::{build_stack, CrystalStack, MoleculeOrientation, TransparencyWindow, UnitCell};
use qpm_core::device::SwitchGeometry;
use qpm_core::mc::{McConfig, DEFAULT_SEED, DEFAULT_TRIALS};
use qpm_core::orbit::{FieldDrive, OrbitModel};
use qpm_core::transport::Polarization;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{at, CliError, CliResult};

pub const OUT_ENV: &str = "EOMC_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub crystal: CrystalSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelFile>,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub photon: PhotonSection,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub eo: EoSection,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub switch: SwitchSection,
    #[serde(default)]
    pub paths: PathsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSection {
    #[serde(default = "d_length")]
    pub length_um: f64,
    #[serde(default = "d_window")]
    pub window_um: [f64; 2],
    #[serde(default = "d_threshold")]
    pub excitation_threshold_ev: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_cell: Option<UnitCellSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitCellSection {
    pub a_angstrom: f64,
    pub b_angstrom: f64,
    pub c_angstrom: f64,
    pub beta_deg: f64,
    pub molecules_per_cell: u32,
}

/// Orbit model plus field coupling, as stored in a model file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub epsilon: f64,
    pub u_angstrom: f64,
    pub z_eff: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub psi_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "d_trials")]
    pub trials: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotonSection {
    #[serde(default = "d_wavelengths")]
    pub wavelength_um: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    #[serde(default = "d_e_grid")]
    pub e_grid_v_per_um: Vec<f64>,
    /// Field orientations for the retardation sweep; the model's `psi_deg` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_deg: Option<Vec<f64>>,
    #[serde(default = "d_angle_grid")]
    pub angle_grid_deg: Vec<f64>,
    #[serde(default = "d_angle_field")]
    pub angle_field_v_per_um: f64,
    #[serde(default = "d_breakdown")]
    pub breakdown_v_per_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EoSection {
    #[serde(default = "d_fom_wavelength")]
    pub wavelength_um: f64,
    #[serde(default = "d_r12")]
    pub r12_pm_per_v: f64,
    /// Back-solved from the figure of merit when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r22_pm_per_v: Option<f64>,
    #[serde(default)]
    pub r61_pm_per_v: f64,
    #[serde(default = "d_fom")]
    pub figure_of_merit_pm_per_v: f64,
    /// Model indices at `wavelength_um` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_y: Option<f64>,
    /// Crystal length when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slab_length_um: Option<f64>,
    #[serde(default)]
    pub ex_v_per_um: f64,
    #[serde(default = "d_ey")]
    pub ey_v_per_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    #[serde(default = "d_initial")]
    pub initial: [f64; 3],
    #[serde(default = "d_eps_bounds")]
    pub epsilon_bounds: [f64; 2],
    #[serde(default = "d_u_bounds")]
    pub u_bounds_angstrom: [f64; 2],
    #[serde(default = "d_z_bounds")]
    pub z_bounds: [f64; 2],
    #[serde(default = "d_tolerance")]
    pub tolerance: f64,
    #[serde(default = "d_max_iterations")]
    pub max_iterations: usize,
    /// Frozen-noise trial count.
    #[serde(default = "d_calibration_trials")]
    pub trials: usize,
    /// Frozen-noise seed; the run seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub norm: ObjectiveNorm,
    #[serde(default = "d_true")]
    pub fit_coupling: bool,
    #[serde(default = "d_probe_field")]
    pub coupling_field_v_per_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchSection {
    #[serde(default = "d_v_start")]
    pub voltage_start_v: f64,
    #[serde(default = "d_v_stop")]
    pub voltage_stop_v: f64,
    #[serde(default = "d_v_points")]
    pub voltage_points: usize,
    #[serde(default = "d_switch_wavelengths")]
    pub wavelengths_um: Vec<f64>,
    #[serde(default = "d_db")]
    pub threshold_db: f64,
    #[serde(default = "d_db")]
    pub target_extinction_db: f64,
    #[serde(default = "d_v_stop")]
    pub max_voltage_v: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn d_length() -> f64 {
    3.0
}
fn d_window() -> [f64; 2] {
    [0.5, 2.0]
}
fn d_threshold() -> f64 {
    qpm_core::transport::DEFAULT_EXCITATION_THRESHOLD_EV
}
fn d_trials() -> usize {
    DEFAULT_TRIALS
}
fn d_seed() -> u64 {
    DEFAULT_SEED
}
fn d_wavelengths() -> Vec<f64> {
    vec![0.63, 0.85]
}
fn d_e_grid() -> Vec<f64> {
    (0..=10).map(f64::from).collect()
}
fn d_angle_grid() -> Vec<f64> {
    vec![0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0]
}
fn d_angle_field() -> f64 {
    10.0
}
fn d_breakdown() -> f64 {
    qpm_core::eo_classical::DEFAULT_BREAKDOWN_V_PER_UM
}
fn d_fom_wavelength() -> f64 {
    qpm_core::eo_classical::FIGURE_OF_MERIT_WAVELENGTH_UM
}
fn d_r12() -> f64 {
    qpm_core::eo_classical::NPP_R12_PM_PER_V
}
fn d_fom() -> f64 {
    qpm_core::eo_classical::NPP_FIGURE_OF_MERIT_PM_PER_V
}
fn d_ey() -> f64 {
    1.0
}
fn d_initial() -> [f64; 3] {
    [0.1, 1.2, 2.0]
}
fn d_eps_bounds() -> [f64; 2] {
    let b = Bounds::default().eccentricity;
    [b.0, b.1]
}
fn d_u_bounds() -> [f64; 2] {
    let b = Bounds::default().semimajor_axis;
    [b.0, b.1]
}
fn d_z_bounds() -> [f64; 2] {
    let b = Bounds::default().effective_charge;
    [b.0, b.1]
}
fn d_tolerance() -> f64 {
    qpm_core::calibrate::DEFAULT_TOLERANCE
}
fn d_max_iterations() -> usize {
    qpm_core::calibrate::DEFAULT_MAX_ITERATIONS
}
fn d_calibration_trials() -> usize {
    qpm_core::calibrate::CALIBRATION_TRIALS
}
fn d_true() -> bool {
    true
}
fn d_probe_field() -> f64 {
    1.0
}
fn d_v_start() -> f64 {
    0.0
}
fn d_v_stop() -> f64 {
    30.0
}
fn d_v_points() -> usize {
    61
}
fn d_switch_wavelengths() -> Vec<f64> {
    vec![0.85, 1.3]
}
fn d_db() -> f64 {
    qpm_core::device::DEFAULT_EXTINCTION_DB
}

macro_rules! default_from_empty {
    ($($t:ty),*) => {$(
        impl Default for $t {
            fn default() -> Self {
                toml::from_str("").expect("every field has a default")
            }
        }
    )*};
}
default_from_empty!(CrystalSection, McSection, PhotonSection, FieldSection, EoSection, CalibrationSection, SwitchSection);

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("every section has a default")
    }
}

/// Geometry file: the switch cross-section. `interaction_length_um` has no
/// default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    #[serde(default = "d_branch")]
    pub branch_angle_mrad: f64,
    #[serde(default = "d_spacing")]
    pub electrode_spacing_um: f64,
    pub interaction_length_um: f64,
    #[serde(default = "d_core")]
    pub core_index: f64,
    #[serde(default = "d_clad")]
    pub clad_index: f64,
    #[serde(default = "d_rib_width")]
    pub rib_width_um: f64,
    #[serde(default = "d_rib_height")]
    pub rib_height_um: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_per_m: Option<f64>,
}

fn d_branch() -> f64 {
    1.0
}
fn d_spacing() -> f64 {
    10.0
}
fn d_core() -> f64 {
    1.8
}
fn d_clad() -> f64 {
    1.35
}
fn d_rib_width() -> f64 {
    4.0
}
fn d_rib_height() -> f64 {
    3.0
}

impl GeometryFile {
    pub fn to_geometry(&self) -> CliResult<SwitchGeometry> {
        SwitchGeometry {
            branch_angle: self.branch_angle_mrad,
            electrode_spacing: self.electrode_spacing_um,
            interaction_length: self.interaction_length_um,
            core_index: self.core_index,
            clad_index: self.clad_index,
            rib_width: self.rib_width_um,
            rib_height: self.rib_height_um,
            coupling_override: self.coupling_per_m,
        }
        .validated()
        .map_err(|e| CliError::Input(format!("geometry: {e}")))
    }
}

/// Overrides taken from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub force_wavelength: bool,
}

/// Validated inputs for one command.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub stack: CrystalStack,
    pub window: TransparencyWindow,
    pub mc: McConfig,
    pub model: Option<ModelFile>,
    pub force_wavelength: bool,
    pub output_dir: PathBuf,
    /// SHA-256 over the effective config and every referenced file.
    pub config_hash: String,
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> CliResult<T> {
    toml::from_str(text).map_err(|e| CliError::Input(format!("{}: {}", path.display(), e.message())))
}

pub fn read_model_file(path: &Path) -> CliResult<ModelFile> {
    parse_toml(path, &read(path)?)
}

pub fn read_geometry_file(path: &Path) -> CliResult<GeometryFile> {
    parse_toml(path, &read(path)?)
}

/// Reads a targets file: CSV with header `wavelength_um,polarization,n_exp`;
/// lines starting with `#` are comments.
pub fn read_targets(path: &Path, window: &TransparencyWindow) -> CliResult<Vec<CalibrationTarget>> {
    #[derive(Deserialize)]
    struct Row {
        wavelength_um: f64,
        polarization: Polarization,
        n_exp: f64,
    }
    let text = read(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let t = CalibrationTarget::new(row.wavelength_um, row.polarization, row.n_exp, window)
            .map_err(|e| CliError::Input(format!("{} record {}: {e}", path.display(), i + 1)))?;
        out.push(t);
    }
    Ok(out)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ModelFile {
    pub fn from_model(model: &OrbitModel, alpha: f64, psi_deg: f64) -> Self {
        Self {
            epsilon: model.eccentricity,
            u_angstrom: model.semimajor_axis,
            z_eff: model.effective_charge,
            alpha,
            psi_deg,
        }
    }

    pub fn orbit(&self) -> CliResult<OrbitModel> {
        at("model", OrbitModel::new(self.epsilon, self.u_angstrom, self.z_eff))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.orbit()?;
        at("model", FieldDrive::new(0.0, self.psi_deg, self.alpha))?;
        Ok(())
    }
}

fn positive(field: &str, v: f64) -> CliResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Input(format!("{field}: {v} must be > 0")))
    }
}

fn nonempty(field: &str, v: &[f64]) -> CliResult<()> {
    if v.is_empty() {
        return Err(CliError::Input(format!("{field}: must not be empty")));
    }
    Ok(())
}

impl RunConfig {
    /// Every numeric check that needs no file access.
    pub fn validate(&self) -> CliResult<()> {
        let c = &self.crystal;
        positive("crystal.excitation_threshold_ev", c.excitation_threshold_ev)?;
        at("crystal.window_um", TransparencyWindow::new(c.window_um[0], c.window_um[1]))?;
        if let Some(m) = &self.model {
            m.validate()?;
        }
        at("mc", McConfig { trials: self.mc.trials, seed: self.mc.seed, threads: self.mc.threads }.validate())?;

        nonempty("photon.wavelength_um", &self.photon.wavelength_um)?;
        for &w in &self.photon.wavelength_um {
            positive("photon.wavelength_um", w)?;
        }

        let f = &self.field;
        positive("field.breakdown_v_per_um", f.breakdown_v_per_um)?;
        nonempty("field.e_grid_v_per_um", &f.e_grid_v_per_um)?;
        for &e in f.e_grid_v_per_um.iter().chain([f.angle_field_v_per_um].iter()) {
            if !(e.is_finite() && e >= 0.0 && e <= f.breakdown_v_per_um) {
                return Err(CliError::Input(format!(
                    "field: {e} V/um must be in [0, breakdown {}]",
                    f.breakdown_v_per_um
                )));
            }
        }
        for &psi in f.psi_deg.iter().flatten().chain(&f.angle_grid_deg) {
            if !(0.0..=90.0).contains(&psi) {
                return Err(CliError::Input(format!("field: psi {psi} not in [0, 90] degrees")));
            }
        }
        if let Some(p) = &f.psi_deg {
            nonempty("field.psi_deg", p)?;
        }
        nonempty("field.angle_grid_deg", &f.angle_grid_deg)?;

        let e = &self.eo;
        positive("eo.wavelength_um", e.wavelength_um)?;
        positive("eo.figure_of_merit_pm_per_v", e.figure_of_merit_pm_per_v)?;
        for (name, v) in [("eo.n_x", e.n_x), ("eo.n_y", e.n_y)] {
            if let Some(n) = v {
                if !(n.is_finite() && n > 1.0) {
                    return Err(CliError::Input(format!("{name}: {n} must be > 1")));
                }
            }
        }
        if let Some(l) = e.slab_length_um {
            positive("eo.slab_length_um", l)?;
        }
        for (name, v) in [
            ("eo.r12_pm_per_v", e.r12_pm_per_v),
            ("eo.r61_pm_per_v", e.r61_pm_per_v),
            ("eo.ex_v_per_um", e.ex_v_per_um),
            ("eo.ey_v_per_um", e.ey_v_per_um),
        ] {
            if !v.is_finite() {
                return Err(CliError::Input(format!("{name}: {v} must be finite")));
            }
        }

        let k = &self.calibration;
        at("calibration.bounds", self.bounds().validate())?;
        positive("calibration.tolerance", k.tolerance)?;
        positive("calibration.coupling_field_v_per_um", k.coupling_field_v_per_um)?;
        if k.trials == 0 {
            return Err(CliError::Input("calibration.trials: must be at least 1".into()));
        }
        if !self.bounds().contains(k.initial) {
            return Err(CliError::Input(format!(
                "calibration.initial: {:?} outside the parameter bounds",
                k.initial
            )));
        }

        let s = &self.switch;
        if s.voltage_points < 1 || !(s.voltage_start_v.is_finite() && s.voltage_stop_v >= s.voltage_start_v) {
            return Err(CliError::Input(
                "switch: need voltage_points >= 1 and voltage_stop_v >= voltage_start_v".into(),
            ));
        }
        nonempty("switch.wavelengths_um", &s.wavelengths_um)?;
        for &w in &s.wavelengths_um {
            positive("switch.wavelengths_um", w)?;
        }
        positive("switch.threshold_db", s.threshold_db)?;
        positive("switch.target_extinction_db", s.target_extinction_db)?;
        positive("switch.max_voltage_v", s.max_voltage_v)?;
        Ok(())
    }

    pub fn bounds(&self) -> Bounds {
        let k = &self.calibration;
        Bounds {
            eccentricity: (k.epsilon_bounds[0], k.epsilon_bounds[1]),
            semimajor_axis: (k.u_bounds_angstrom[0], k.u_bounds_angstrom[1]),
            effective_charge: (k.z_bounds[0], k.z_bounds[1]),
        }
    }

    pub fn unit_cell(&self) -> UnitCell {
        match &self.crystal.unit_cell {
            None => UnitCell::default(),
            Some(u) => UnitCell {
                a: u.a_angstrom,
                b: u.b_angstrom,
                c: u.c_angstrom,
                beta: u.beta_deg,
                molecules_per_cell: u.molecules_per_cell,
                ..UnitCell::default()
            },
        }
    }

    pub fn voltage_grid(&self) -> Vec<f64> {
        let s = &self.switch;
        if s.voltage_points == 1 {
            return vec![s.voltage_start_v];
        }
        let step = (s.voltage_stop_v - s.voltage_start_v) / (s.voltage_points - 1) as f64;
        (0..s.voltage_points)
            .map(|i| s.voltage_start_v + step * i as f64)
            .collect()
    }
}

/// Loads the config (or defaults), applies overrides, reads the referenced
/// model file and validates everything before any computation.
pub fn load(config_path: Option<&Path>, overrides: &Overrides) -> CliResult<Loaded> {
    let (mut config, base) = match config_path {
        Some(p) => {
            let cfg: RunConfig = parse_toml(p, &read(p)?)?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (cfg, base)
        }
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    for p in [
        &mut config.paths.model,
        &mut config.paths.targets,
        &mut config.paths.holdout,
        &mut config.paths.geometry,
        &mut config.paths.output_dir,
    ]
    .into_iter()
    .flatten()
    {
        *p = resolve(&base, p);
    }
    if let Some(seed) = overrides.seed {
        config.mc.seed = seed;
    }
    if let Some(trials) = overrides.trials {
        config.mc.trials = trials;
        config.calibration.trials = trials;
    }
    if overrides.threads.is_some() {
        config.mc.threads = overrides.threads;
    }

    let mut hasher = Sha256::new();
    // Thread count does not change results, so it stays out of the hash.
    let mut hashed = config.clone();
    hashed.mc.threads = None;
    hashed.paths.output_dir = None;
    let text = toml::to_string(&hashed).map_err(|e| CliError::Input(format!("config: {e}")))?;
    hasher.update(text.as_bytes());

    for (field, p) in [
        ("paths.model", &config.paths.model),
        ("paths.targets", &config.paths.targets),
        ("paths.holdout", &config.paths.holdout),
        ("paths.geometry", &config.paths.geometry),
    ] {
        if let Some(p) = p {
            let bytes = fs::read(p).map_err(|e| CliError::Input(format!("{field}: {}: {e}", p.display())))?;
            hasher.update(field.as_bytes());
            hasher.update(&bytes);
        }
    }

    let model = match (&config.model, &config.paths.model) {
        (Some(_), Some(_)) => {
            return Err(CliError::Input(
                "model: give either a [model] section or paths.model, not both".into(),
            ))
        }
        (Some(m), None) => Some(*m),
        (None, Some(p)) => Some(read_model_file(p)?),
        (None, None) => None,
    };
    if let Some(m) = &model {
        m.validate()?;
    }
    config.validate()?;

    let window = at(
        "crystal.window_um",
        TransparencyWindow::new(config.crystal.window_um[0], config.crystal.window_um[1]),
    )?;
    let stack = at(
        "crystal",
        build_stack(config.crystal.length_um, &config.unit_cell(), MoleculeOrientation::default()),
    )?;
    let mc = McConfig {
        trials: config.mc.trials,
        seed: config.mc.seed,
        threads: config.mc.threads,
    };
    let output_dir = overrides
        .out
        .clone()
        .or_else(|| config.paths.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    Ok(Loaded {
        config_hash: hex::encode(hasher.finalize()),
        config,
        stack,
        window,
        mc,
        model,
        force_wavelength: overrides.force_wavelength,
        output_dir,
    })
}

impl Loaded {
    pub fn require_model(&self) -> CliResult<ModelFile> {
        self.model.ok_or_else(|| {
            CliError::Input("model: no [model] section or paths.model in the config".into())
        })
    }

    pub fn require_path(&self, field: &str, p: &Option<PathBuf>) -> CliResult<PathBuf> {
        p.clone()
            .ok_or_else(|| CliError::Input(format!("{field}: not set in the config")))
    }

    pub fn admit(&self, field: &str, wavelength: f64) -> CliResult<()> {
        at(field, self.window.admit(wavelength, self.force_wavelength))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_defaults() {
        let c = RunConfig::default();
        assert_eq!(c.crystal.length_um, 3.0);
        assert_eq!(c.mc.trials, DEFAULT_TRIALS);
        assert_eq!(c.field.e_grid_v_per_um.len(), 11);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn unknown_field_named() {
        let err = toml::from_str::<RunConfig>("[mc]\ntrails = 3\n").unwrap_err();
        assert!(err.message().contains("trails"));
    }

    #[test]
    fn bad_values_name_their_field() {
        let mut c = RunConfig::default();
        c.field.breakdown_v_per_um = -1.0;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("field.breakdown_v_per_um"), "{msg}");

        let mut c = RunConfig::default();
        c.model = Some(ModelFile { epsilon: 1.2, u_angstrom: 1.4, z_eff: 3.9, alpha: 0.0, psi_deg: 0.0 });
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("epsilon"), "{msg}");
    }

    #[test]
    fn voltage_grid_endpoints() {
        let c = RunConfig::default();
        let g = c.voltage_grid();
        assert_eq!(g.len(), 61);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[60], 30.0);
    }

    #[test]
    fn geometry_needs_interaction_length() {
        assert!(toml::from_str::<GeometryFile>("electrode_spacing_um = 10.0\n").is_err());
        let g: GeometryFile = toml::from_str("interaction_length_um = 5000.0\n").unwrap();
        assert!(g.to_geometry().is_ok());
        let g: GeometryFile =
            toml::from_str("interaction_length_um = 5000.0\nelectrode_spacing_um = 5.0\nrib_height_um = 10.0\n").unwrap();
        let msg = g.to_geometry().unwrap_err().to_string();
        assert!(msg.contains("thickness"), "{msg}");
    }
}
