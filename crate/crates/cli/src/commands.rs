use std::path::{Path, PathBuf};

use qpm_core::calibrate::{
    self, CalibrationSetup, CouplingProbe, FitOptions, Residual,
};
use qpm_core::crystal::{build_stack, MoleculeOrientation, UnitCell};
use qpm_core::device::{self, Requirements};
use qpm_core::eo_classical::{self, BirefringentSlab, EOTensor};
use qpm_core::mc::McConfig;
use qpm_core::orbit::{FieldDrive, OrbitModel};
use qpm_core::transport::{self, check_nonresonant, Photon, Polarization};
use qpm_core::units::{delay_units_check, CONSTANTS};
use qpm_core::Error;

use crate::config::{read_geometry_file, read_targets, Loaded, ModelFile};
use crate::error::{at, CliError, CliResult};
use crate::output::{header, num, write, Table, VERSION};

fn photon(loaded: &Loaded, field: &str, wavelength: f64) -> CliResult<Photon> {
    loaded.admit(field, wavelength)?;
    let p = at(field, Photon::new(wavelength))?;
    let threshold = loaded.config.crystal.excitation_threshold_ev;
    if !check_nonresonant(&p, threshold) {
        return Err(CliError::Input(format!(
            "{field}: {}",
            Error::Resonant { energy_ev: p.energy, threshold_ev: threshold }
        )));
    }
    Ok(p)
}

fn head(loaded: &Loaded, command: &str) -> String {
    header(command, loaded.config.mc.seed, &loaded.config_hash)
}

fn calibration_setup(loaded: &Loaded) -> CalibrationSetup {
    let k = &loaded.config.calibration;
    CalibrationSetup {
        mc: McConfig {
            trials: k.trials,
            seed: k.seed.unwrap_or(loaded.config.mc.seed),
            threads: loaded.mc.threads,
        },
        norm: k.norm,
        excitation_threshold_ev: loaded.config.crystal.excitation_threshold_ev,
        ..CalibrationSetup::new(loaded.stack.clone())
    }
}

fn file_label(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

pub fn render_model_file(model: &ModelFile, provenance: &[String]) -> String {
    let mut s = String::new();
    for line in provenance {
        s.push_str("# ");
        s.push_str(line);
        s.push('\n');
    }
    s.push_str(&format!("epsilon = {:?}\n", model.epsilon));
    s.push_str(&format!("u_angstrom = {:?}\n", model.u_angstrom));
    s.push_str(&format!("z_eff = {:?}\n", model.z_eff));
    s.push_str(&format!("alpha = {:?}\n", model.alpha));
    s.push_str(&format!("psi_deg = {:?}\n", model.psi_deg));
    s
}

pub fn cmd_calibrate(loaded: &Loaded) -> CliResult<Vec<PathBuf>> {
    let cfg = &loaded.config;
    let targets_path = loaded.require_path("paths.targets", &cfg.paths.targets)?;
    let targets = read_targets(&targets_path, &loaded.window)?;
    if targets.is_empty() {
        return Err(CliError::Input(format!("{}: no targets", targets_path.display())));
    }
    let holdout = match &cfg.paths.holdout {
        Some(p) => read_targets(p, &loaded.window)?,
        None => Vec::new(),
    };
    let setup = calibration_setup(loaded);
    let k = &cfg.calibration;
    let initial = at("calibration.initial", OrbitModel::new(k.initial[0], k.initial[1], k.initial[2]))?;
    let options = FitOptions {
        tolerance: k.tolerance,
        max_iterations: k.max_iterations,
    };
    let result = at("calibration", calibrate::fit(&targets, &initial, &cfg.bounds(), &setup, &options))?;
    let holdout_residuals = at("paths.holdout", calibrate::validate(&result.model, &holdout, &setup))?;

    let prior = loaded.model;
    let psi_deg = prior.map_or(0.0, |m| m.psi_deg);
    let mut coupling_note = String::from("alpha carried over from the input model");
    let mut coupling_failure = None;
    let alpha = if k.fit_coupling {
        let probe = CouplingProbe {
            field: k.coupling_field_v_per_um,
            wavelength: cfg.eo.wavelength_um,
        };
        match calibrate::fit_field_coupling(&result.model, cfg.eo.figure_of_merit_pm_per_v, &setup, &probe) {
            Ok(c) => {
                coupling_note = format!(
                    "alpha fitted to figure of merit {} pm/V at {} um (model gives {} pm/V)",
                    cfg.eo.figure_of_merit_pm_per_v, cfg.eo.wavelength_um, c.predicted_fom
                );
                c.alpha
            }
            Err(Error::CouplingNotIdentifiable(msg)) => {
                coupling_failure = Some(format!("coupling not identifiable: {msg}"));
                coupling_note = "alpha not identifiable; set to 0".into();
                0.0
            }
            Err(e) => return Err(CliError::Input(format!("calibration.coupling: {e}"))),
        }
    } else {
        prior.map_or(0.0, |m| m.alpha)
    };

    let fitted = ModelFile::from_model(&result.model, alpha, psi_deg);
    let provenance = vec![
        format!("eomc {VERSION} calibrate seed={} config_sha256={}", cfg.mc.seed, loaded.config_hash),
        format!(
            "fitted to {} ({} targets), frozen noise seed={} trials={}",
            file_label(&targets_path),
            targets.len(),
            setup.mc.seed,
            setup.mc.trials
        ),
        format!(
            "objective {:?} = {}, iterations = {}, converged = {}",
            setup.norm, result.objective_value, result.iterations, result.converged
        ),
        coupling_note,
    ];
    let model_path = write(&loaded.output_dir, "model.toml", &render_model_file(&fitted, &provenance))?;

    let mut t = Table::new(&["set", "wavelength_um", "polarization", "n_exp", "n_model", "abs_error"])?;
    let mut push = |set: &str, rows: &[Residual]| -> CliResult<()> {
        for r in rows {
            t.row([
                set.to_owned(),
                num(r.target.wavelength),
                r.target.polarization.to_string(),
                num(r.target.n_exp),
                num(r.n_model),
                num(r.abs_error),
            ])?;
        }
        Ok(())
    };
    push("fit", &result.residuals)?;
    push("holdout", &holdout_residuals)?;
    let csv = format!("{}{}", head(loaded, "calibrate"), t.finish()?);
    let residual_path = write(&loaded.output_dir, "calibration_residuals.csv", &csv)?;

    println!(
        "epsilon = {} u = {} A z_eff = {} alpha = {} objective = {} converged = {}",
        fitted.epsilon, fitted.u_angstrom, fitted.z_eff, fitted.alpha, result.objective_value, result.converged
    );
    if !result.converged {
        return Err(CliError::NoConvergence(format!(
            "calibration did not converge in {} iterations (best objective {})",
            result.iterations, result.objective_value
        )));
    }
    if let Some(msg) = coupling_failure {
        return Err(CliError::NoConvergence(msg));
    }
    Ok(vec![model_path, residual_path])
}

pub fn cmd_dispersion(loaded: &Loaded) -> CliResult<Vec<PathBuf>> {
    let model = loaded.require_model()?.orbit()?;
    let photons = loaded
        .config
        .photon
        .wavelength_um
        .iter()
        .map(|&w| photon(loaded, "photon.wavelength_um", w))
        .collect::<CliResult<Vec<_>>>()?;
    // radius sums do not depend on the wavelength
    let sums = at("dispersion", transport::index_radius_sums(&loaded.stack, &model, &loaded.mc))?;
    let mut t = Table::new(&["wavelength_um", "polarization", "n_mean", "n_stderr"])?;
    for p in &photons {
        for pol in Polarization::BOTH {
            let n = transport::index_from_sums(&sums, pol, &loaded.stack, &model, p, loaded.mc.seed);
            t.row([num(p.wavelength), pol.to_string(), num(n.mean), num(n.std_error)])?;
        }
    }
    let csv = format!("{}{}", head(loaded, "dispersion"), t.finish()?);
    Ok(vec![write(&loaded.output_dir, "dispersion.csv", &csv)?])
}

pub fn cmd_retardation(loaded: &Loaded) -> CliResult<Vec<PathBuf>> {
    let m = loaded.require_model()?;
    let model = m.orbit()?;
    let f = &loaded.config.field;
    let psis = f.psi_deg.clone().unwrap_or_else(|| vec![m.psi_deg]);
    let drives = psis
        .iter()
        .flat_map(|&psi| f.e_grid_v_per_um.iter().map(move |&e| (e, psi)))
        .map(|(e, psi)| at("field", FieldDrive::new(e, psi, m.alpha)))
        .collect::<CliResult<Vec<_>>>()?;

    let mut t = Table::new(&["e_field_v_per_um", "psi_deg", "wavelength_um", "dphi_rad", "dphi_stderr"])?;
    let mut clamped = false;
    for &w in &loaded.config.photon.wavelength_um {
        let p = photon(loaded, "photon.wavelength_um", w)?;
        let rows = at(
            "retardation",
            transport::retardation_vs_field(&loaded.stack, &model, &p, &drives, &loaded.mc),
        )?;
        for r in rows {
            clamped |= r.retardation.clamped_fraction > 0.0;
            t.row([
                num(r.field),
                num(r.psi),
                num(w),
                num(r.retardation.mean),
                num(r.retardation.std_error),
            ])?;
        }
    }
    if clamped {
        eprintln!("warning: some drives pushed the eccentricity outside [0, 0.999] and were clamped");
    }
    let csv = format!("{}{}", head(loaded, "retardation"), t.finish()?);
    Ok(vec![write(&loaded.output_dir, "retardation.csv", &csv)?])
}

pub fn cmd_switch(loaded: &Loaded) -> CliResult<Vec<PathBuf>> {
    let cfg = &loaded.config;
    let geometry_path = loaded.require_path("paths.geometry", &cfg.paths.geometry)?;
    let geometry = read_geometry_file(&geometry_path)?.to_geometry()?;
    let slab = at(
        "geometry",
        BirefringentSlab::new(geometry.core_index, geometry.core_index, geometry.interaction_length),
    )?;
    let tensor = eo_tensor(loaded, &slab)?;
    let breakdown = cfg.field.breakdown_v_per_um;
    let grid = cfg.voltage_grid();
    let s = &cfg.switch;

    let mut t = Table::new(&["wavelength_um", "voltage_v", "cross_power", "bar_power", "extinction_db"])?;
    let mut report = head(loaded, "switch");
    report.push_str("[curves]\n");
    for &w in &s.wavelengths_um {
        loaded.admit("switch.wavelengths_um", w)?;
        let r = at(
            "switch",
            device::switching_curve(&geometry, &tensor, &slab, &grid, w, s.threshold_db, breakdown),
        )?;
        for i in 0..grid.len() {
            t.row([
                num(w),
                num(r.voltage_grid[i]),
                num(r.cross_power[i]),
                num(r.bar_power[i]),
                num(r.extinction_db[i]),
            ])?;
        }
        let show = |v: Option<f64>| v.map_or_else(|| "absent".to_owned(), num);
        report.push_str(&format!(
            "wavelength = {w} um: switching_voltage = {} V, digital_flatness = {}\n",
            show(r.switching_voltage),
            show(r.digital_flatness)
        ));
    }
    report.push_str(&format!(
        "threshold_db = {} (switch specification default, not a material property)\n\n[presets]\n",
        s.threshold_db
    ));
    let pair = [s.wavelengths_um[0], *s.wavelengths_um.get(1).unwrap_or(&s.wavelengths_um[0])];
    let presets = at(
        "switch",
        device::routing_presets(&geometry, &tensor, &slab, pair, s.threshold_db),
    )?;
    for p in presets {
        report.push_str(&format!(
            "wavelength = {} um port = {:?} voltage = {} V\n",
            p.wavelength, p.port, num(p.voltage)
        ));
    }
    report.push('\n');
    let requirements = Requirements {
        target_extinction_db: s.target_extinction_db,
        max_voltage: s.max_voltage_v,
        wavelength: s.wavelengths_um[0],
    };
    let design = at(
        "switch",
        device::design_report(&geometry, &tensor, &slab, &requirements, breakdown),
    )?;
    report.push_str(&design.to_text());

    let csv = format!("{}{}", head(loaded, "switch"), t.finish()?);
    Ok(vec![
        write(&loaded.output_dir, "switch_curve.csv", &csv)?,
        write(&loaded.output_dir, "switch_report.txt", &report)?,
    ])
}

fn eo_tensor(loaded: &Loaded, slab: &BirefringentSlab) -> CliResult<EOTensor> {
    let e = &loaded.config.eo;
    let r22 = match e.r22_pm_per_v {
        Some(r) => r,
        None => at("eo", eo_classical::back_solve_r22(slab, e.r12_pm_per_v, e.figure_of_merit_pm_per_v))?,
    };
    let tensor = EOTensor {
        r12: e.r12_pm_per_v,
        r22,
        r61: e.r61_pm_per_v,
    };
    at("eo", tensor.validate())?;
    Ok(tensor)
}

pub fn cmd_eo(loaded: &Loaded) -> CliResult<Vec<PathBuf>> {
    let cfg = &loaded.config;
    let e = &cfg.eo;
    let breakdown = cfg.field.breakdown_v_per_um;
    let p = photon(loaded, "eo.wavelength_um", e.wavelength_um)?;

    let (n_x, n_y, source) = match (e.n_x, e.n_y) {
        (Some(x), Some(y)) => (x, y, "config"),
        (x, y) => {
            let model = loaded.require_model()?.orbit()?;
            let sums = at("eo", transport::index_radius_sums(&loaded.stack, &model, &loaded.mc))?;
            let n = |pol| transport::index_from_sums(&sums, pol, &loaded.stack, &model, &p, loaded.mc.seed).mean;
            (x.unwrap_or_else(|| n(Polarization::X)), y.unwrap_or_else(|| n(Polarization::Y)), "model")
        }
    };
    let length = e.slab_length_um.unwrap_or(cfg.crystal.length_um);
    let slab = at("eo", BirefringentSlab::new(n_x, n_y, length))?;
    let tensor = eo_tensor(loaded, &slab)?;
    let omega = p.angular_frequency;

    let (px, py) = at("eo.ey_v_per_um", eo_classical::perturbed_indices(&slab, &tensor, e.ey_v_per_um, breakdown))?;
    let split = at("eo.ey_v_per_um", eo_classical::phase_split(&slab, &tensor, e.ey_v_per_um, omega, breakdown))?;
    let principal = at(
        "eo",
        eo_classical::principal_indices(&slab, &tensor, e.ex_v_per_um, e.ey_v_per_um, breakdown),
    )?;

    let mut s = head(loaded, "eo");
    s.push_str("[slab]\n");
    s.push_str(&format!("n_x = {}\nn_y = {}\nindex_source = {source}\n", num(n_x), num(n_y)));
    s.push_str(&format!("length_um = {}\nwavelength_um = {}\n", num(length), num(e.wavelength_um)));
    s.push_str("\n[tensor]\n");
    s.push_str(&format!(
        "r12_pm_per_v = {}\nr22_pm_per_v = {}{}\nr61_pm_per_v = {}\n",
        num(tensor.r12),
        num(tensor.r22),
        if e.r22_pm_per_v.is_none() { " (back-solved from the figure of merit)" } else { "" },
        num(tensor.r61)
    ));
    s.push_str(&format!(
        "figure_of_merit_pm_per_v = {}\n",
        num(eo_classical::figure_of_merit(&slab, &tensor))
    ));
    s.push_str("\n[field]\n");
    s.push_str(&format!("ex_v_per_um = {}\ney_v_per_um = {}\n", num(e.ex_v_per_um), num(e.ey_v_per_um)));
    s.push_str(&format!("n_x_perturbed = {}\nn_y_perturbed = {}\n", num(px), num(py)));
    s.push_str(&format!(
        "delta_n_x = {}\ndelta_n_y = {}\n",
        num(px - slab.n_x),
        num(py - slab.n_y)
    ));
    s.push_str(&format!(
        "gamma_rad = {}\nbirefringent_rad = {}\nelectro_optic_rad = {}\n",
        num(split.total()),
        num(split.birefringent),
        num(split.electro_optic)
    ));
    s.push_str(&format!(
        "principal_n_major = {}\nprincipal_n_minor = {}\nprincipal_rotation_rad = {}\n",
        num(principal.n_major),
        num(principal.n_minor),
        num(principal.rotation)
    ));

    let mut written = Vec::new();
    match loaded.model {
        Some(m) if m.alpha > 0.0 => {
            let model = m.orbit()?;
            let rows = at(
                "eo",
                eo_classical::angle_response(
                    &model,
                    &loaded.stack,
                    &p,
                    cfg.field.angle_field_v_per_um,
                    m.alpha,
                    &cfg.field.angle_grid_deg,
                    &loaded.mc,
                ),
            )?;
            let mut t = Table::new(&["psi_deg", "delta_rad", "delta_stderr"])?;
            for r in &rows {
                t.row([num(r.psi), num(r.delta.mean), num(r.delta.std_error)])?;
            }
            s.push_str(&format!(
                "\n[angle_response]\nfield_v_per_um = {}\nalpha = {}\nfile = angle_response.csv\n",
                num(cfg.field.angle_field_v_per_um),
                num(m.alpha)
            ));
            let csv = format!("{}{}", head(loaded, "eo"), t.finish()?);
            written.push(write(&loaded.output_dir, "angle_response.csv", &csv)?);
        }
        _ => {
            s.push_str("\n[angle_response]\nskipped = model has no positive field coupling alpha\n");
            eprintln!("note: angle response skipped, the model has no positive alpha");
        }
    }
    written.insert(0, write(&loaded.output_dir, "eo_summary.txt", &s)?);
    Ok(written)
}

/// Built-in consistency checks. Prints one line per check.
pub fn cmd_selftest() -> CliResult<Vec<PathBuf>> {
    let mut failed = Vec::new();
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(name.to_owned());
        }
    };

    for (ev, z, r) in [(1.968, 3.9, 1.4), (1.0, 1.0, 1.0), (2.9, 0.6, 2.5)] {
        let u = delay_units_check(ev, z, r);
        check(
            "delay units",
            u.passes(1e-9) && u.si_dim == qpm_core::units::Dim([0, 0, 1, 0]),
            format!("E={ev} eV Z={z} r={r} A: {:e} s, relative difference {:e}", u.si_delay, u.relative_difference),
        );
    }
    let ev = CONSTANTS.photon_energy_ev(1.0);
    check("photon energy", (ev - 1.239_841_98).abs() < 1e-6, format!("1 um -> {ev} eV"));
    match build_stack(3.0, &UnitCell::default(), MoleculeOrientation::default()) {
        Ok(s) => check("layer count", s.layer_count == 4024, format!("3 um -> {} layers", s.layer_count)),
        Err(e) => check("layer count", false, e.to_string()),
    }
    let slab = BirefringentSlab { n_x: 2.0, n_y: 2.0, length: 1.0 };
    let t = EOTensor { r12: 65.0, r22: 0.0, r61: 0.0 };
    match eo_classical::perturbed_indices(&slab, &t, 1.0, 20.0) {
        Ok((nx, _)) => check("pm/V x V/um", ((nx - 2.0) / -2.6e-4 - 1.0).abs() < 1e-12, format!("dn = {:e}", nx - 2.0)),
        Err(e) => check("pm/V x V/um", false, e.to_string()),
    }
    if failed.is_empty() {
        Ok(Vec::new())
    } else {
        Err(CliError::Input(format!("selftest failed: {}", failed.join(", "))))
    }
}
