//! Fitting the orbit model to measured refractive indices.
//!
//! The objective evaluates every target against one frozen set of random
//! draws (fixed seed and trial count), so it is a deterministic function of
//! `(eps, u, Z)` and a simplex search can work on it directly. The search runs
//! in coordinates scaled to the parameter box, and points outside the box
//! score a large finite penalty.
//!
//! Model indices depend on `u` and `Z` only through `u^2 / Z`: the radius
//! scales with `u` and the delay prefactor with `1 / Z`. Targets therefore pin
//! down `eps` (given both polarizations) and `u^2 / Z`, not `u` and `Z` apart.

use serde::{Deserialize, Serialize};

use crate::crystal::{CrystalStack, TransparencyWindow};
use crate::error::{invalid, Error, Result};
use crate::mc::McConfig;
use crate::nelder_mead::NelderMead;
use crate::orbit::OrbitModel;
use crate::transport::{
    check_nonresonant, index_from_sums, index_radius_sums, Photon, Polarization,
    DEFAULT_EXCITATION_THRESHOLD_EV,
};

pub const CALIBRATION_SEED: u64 = 7;
pub const CALIBRATION_TRIALS: usize = 100;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_MAX_ITERATIONS: usize = 500;

const PENALTY: f64 = 1e9;
const INITIAL_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    /// um.
    pub wavelength: f64,
    pub polarization: Polarization,
    pub n_exp: f64,
}

impl CalibrationTarget {
    pub fn new(
        wavelength: f64,
        polarization: Polarization,
        n_exp: f64,
        window: &TransparencyWindow,
    ) -> Result<Self> {
        window.admit(wavelength, false)?;
        if !(n_exp > 1.0 && n_exp < 4.0) {
            return Err(invalid("n_exp", format!("{n_exp} not in (1, 4)")));
        }
        Ok(Self {
            wavelength,
            polarization,
            n_exp,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub target: CalibrationTarget,
    pub n_model: f64,
    pub abs_error: f64,
}

/// Open parameter box `(lo, hi)` for each fitted parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub eccentricity: (f64, f64),
    /// Angstrom; spans the spread of benzene-ring bond lengths with margin.
    pub semimajor_axis: (f64, f64),
    pub effective_charge: (f64, f64),
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            eccentricity: (0.0, 0.95),
            semimajor_axis: (1.0, 1.8),
            effective_charge: (0.5, 10.0),
        }
    }
}

impl Bounds {
    fn boxes(&self) -> [(f64, f64); 3] {
        [self.eccentricity, self.semimajor_axis, self.effective_charge]
    }

    pub fn validate(&self) -> Result<()> {
        for (lo, hi) in self.boxes() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid("bounds", format!("need lo < hi, got ({lo}, {hi})")));
            }
        }
        if self.eccentricity.0 < 0.0 || self.eccentricity.1 >= 1.0 {
            return Err(invalid("bounds", "eccentricity box must lie in [0, 1)"));
        }
        if self.semimajor_axis.0 <= 0.0 || self.effective_charge.0 <= 0.0 {
            return Err(invalid("bounds", "u and Z boxes must be positive"));
        }
        Ok(())
    }

    pub fn contains(&self, params: [f64; 3]) -> bool {
        self.boxes()
            .iter()
            .zip(params)
            .all(|(&(lo, hi), p)| p > lo && p < hi)
    }

    fn to_unit(&self, params: [f64; 3]) -> Vec<f64> {
        self.boxes()
            .iter()
            .zip(params)
            .map(|(&(lo, hi), p)| (p - lo) / (hi - lo))
            .collect()
    }

    fn from_unit(&self, x: &[f64]) -> [f64; 3] {
        let b = self.boxes();
        std::array::from_fn(|i| b[i].0 + x[i] * (b[i].1 - b[i].0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveNorm {
    #[default]
    Rms,
    Max,
}

/// Everything the objective holds fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSetup {
    pub stack: CrystalStack,
    /// Frozen noise: seed and trial count shared by every evaluation.
    pub mc: McConfig,
    pub norm: ObjectiveNorm,
    pub excitation_threshold_ev: f64,
}

impl CalibrationSetup {
    pub fn new(stack: CrystalStack) -> Self {
        Self {
            stack,
            mc: McConfig::new(CALIBRATION_TRIALS, CALIBRATION_SEED),
            norm: ObjectiveNorm::Rms,
            excitation_threshold_ev: DEFAULT_EXCITATION_THRESHOLD_EV,
        }
    }
}

fn model_of(params: [f64; 3], period: f64) -> Result<OrbitModel> {
    let model = OrbitModel {
        eccentricity: params[0],
        semimajor_axis: params[1],
        effective_charge: params[2],
        period,
    };
    model.validate()?;
    Ok(model)
}

/// Mean model index for each `(wavelength, polarization)`, all from one set
/// of draws.
pub fn model_indices(
    model: &OrbitModel,
    points: &[(f64, Polarization)],
    setup: &CalibrationSetup,
) -> Result<Vec<f64>> {
    let photons = points
        .iter()
        .map(|&(wavelength, _)| {
            let photon = Photon::new(wavelength)?;
            if !check_nonresonant(&photon, setup.excitation_threshold_ev) {
                return Err(Error::Resonant {
                    energy_ev: photon.energy,
                    threshold_ev: setup.excitation_threshold_ev,
                });
            }
            Ok(photon)
        })
        .collect::<Result<Vec<_>>>()?;
    let sums = index_radius_sums(&setup.stack, model, &setup.mc)?;
    Ok(points
        .iter()
        .zip(&photons)
        .map(|(&(_, pol), photon)| {
            index_from_sums(&sums, pol, &setup.stack, model, photon, setup.mc.seed).mean
        })
        .collect())
}

/// Residual table for `model` against `targets`. Leaves the model untouched.
pub fn validate(
    model: &OrbitModel,
    targets: &[CalibrationTarget],
    setup: &CalibrationSetup,
) -> Result<Vec<Residual>> {
    if targets.is_empty() {
        return Ok(Vec::new());
    }
    let points: Vec<_> = targets.iter().map(|t| (t.wavelength, t.polarization)).collect();
    let n = model_indices(model, &points, setup)?;
    Ok(targets
        .iter()
        .zip(n)
        .map(|(&target, n_model)| Residual {
            target,
            n_model,
            abs_error: (n_model - target.n_exp).abs(),
        })
        .collect())
}

fn score(residuals: &[Residual], norm: ObjectiveNorm) -> f64 {
    match norm {
        ObjectiveNorm::Rms => {
            let ss: f64 = residuals.iter().map(|r| r.abs_error * r.abs_error).sum();
            (ss / residuals.len() as f64).sqrt()
        }
        ObjectiveNorm::Max => residuals.iter().map(|r| r.abs_error).fold(0.0, f64::max),
    }
}

fn penalty(params: [f64; 3], bounds: &Bounds) -> f64 {
    let excess: f64 = bounds
        .boxes()
        .iter()
        .zip(params)
        .map(|(&(lo, hi), p)| (lo - p).max(p - hi).max(0.0) / (hi - lo))
        .sum();
    if excess.is_finite() {
        PENALTY * (1.0 + excess)
    } else {
        PENALTY * 2.0
    }
}

/// Objective value at `(eps, u, Z)`; a large finite penalty outside `bounds`.
pub fn objective(
    params: [f64; 3],
    targets: &[CalibrationTarget],
    bounds: &Bounds,
    setup: &CalibrationSetup,
) -> Result<f64> {
    if targets.is_empty() {
        return Err(invalid("targets", "must not be empty"));
    }
    if !bounds.contains(params) {
        return Ok(penalty(params, bounds));
    }
    let model = model_of(params, 1.0)?;
    Ok(score(&validate(&model, targets, setup)?, setup.norm))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Simplex diameter in box-scaled coordinates, and objective floor.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub model: OrbitModel,
    pub residuals: Vec<Residual>,
    pub objective_value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

pub fn fit(
    targets: &[CalibrationTarget],
    initial: &OrbitModel,
    bounds: &Bounds,
    setup: &CalibrationSetup,
    options: &FitOptions,
) -> Result<CalibrationResult> {
    bounds.validate()?;
    if targets.is_empty() {
        return Err(invalid("targets", "must not be empty"));
    }
    let start = [initial.eccentricity, initial.semimajor_axis, initial.effective_charge];
    if !bounds.contains(start) {
        return Err(invalid("initial", format!("{start:?} outside the parameter bounds")));
    }
    // Surface target errors (resonance, bad stack) before searching.
    validate(initial, targets, setup)?;

    let nm = NelderMead {
        initial_step: vec![INITIAL_STEP; 3],
        diameter_tolerance: options.tolerance,
        value_tolerance: options.tolerance,
        max_iterations: options.max_iterations,
    };
    let mut x0 = bounds.to_unit(start);
    // keep the first simplex inside the box
    for x in &mut x0 {
        if *x + INITIAL_STEP >= 1.0 {
            *x -= INITIAL_STEP;
        }
    }
    let x0 = if bounds.contains(bounds.from_unit(&x0)) {
        x0
    } else {
        bounds.to_unit(start)
    };
    let mut failure = None;
    let best = nm.minimize(
        |x| {
            let params = bounds.from_unit(x);
            match objective(params, targets, bounds, setup) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    PENALTY * 2.0
                }
            }
        },
        &x0,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let model = model_of(bounds.from_unit(&best.x), initial.period)?;
    let residuals = validate(&model, targets, setup)?;
    Ok(CalibrationResult {
        objective_value: score(&residuals, setup.norm),
        model,
        residuals,
        iterations: best.iterations,
        evaluations: best.evaluations,
        converged: best.converged,
    })
}

/// Where and how strongly the field is applied when fitting the coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingProbe {
    /// V/um.
    pub field: f64,
    /// um.
    pub wavelength: f64,
}

impl Default for CouplingProbe {
    fn default() -> Self {
        Self {
            field: 1.0,
            wavelength: crate::eo_classical::FIGURE_OF_MERIT_WAVELENGTH_UM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingFit {
    /// Eccentricity change per V/um.
    pub alpha: f64,
    /// Figure of merit implied by `alpha`, pm/V.
    pub predicted_fom: f64,
    pub iterations: usize,
}

/// Figure of merit implied by coupling `alpha`: the birefringence change
/// between fields `-E` and `+E` is `FOM * E`.
pub fn predicted_figure_of_merit(
    model: &OrbitModel,
    alpha: f64,
    setup: &CalibrationSetup,
    probe: &CouplingProbe,
) -> Result<f64> {
    let shift = alpha * probe.field;
    let birefringence = |eps: f64| -> Result<f64> {
        let points = [(probe.wavelength, Polarization::X), (probe.wavelength, Polarization::Y)];
        let n = model_indices(&model.with_eccentricity(eps), &points, setup)?;
        Ok(n[0] - n[1])
    };
    let up = birefringence(model.eccentricity + shift)?;
    let down = birefringence(model.eccentricity - shift)?;
    Ok((up - down).abs() / probe.field * 1e6)
}

/// Bisects the field coupling so the model reproduces `measured_fom` (pm/V).
pub fn fit_field_coupling(
    model: &OrbitModel,
    measured_fom: f64,
    setup: &CalibrationSetup,
    probe: &CouplingProbe,
) -> Result<CouplingFit> {
    if !(measured_fom.is_finite() && measured_fom >= 0.0) {
        return Err(invalid("figure_of_merit", format!("{measured_fom} must be >= 0")));
    }
    if !(probe.field.is_finite() && probe.field > 0.0) {
        return Err(invalid("probe_field", format!("{} must be > 0", probe.field)));
    }
    if measured_fom == 0.0 {
        return Ok(CouplingFit {
            alpha: 0.0,
            predicted_fom: 0.0,
            iterations: 0,
        });
    }
    // keep both shifted eccentricities inside [0.1 eps, 0.999)
    let eps = model.eccentricity;
    let hi_shift = (0.9 * eps).min(0.998 - eps);
    if hi_shift <= 0.0 {
        return Err(Error::CouplingNotIdentifiable(format!(
            "eccentricity {eps} leaves no room to shift"
        )));
    }
    let mut lo = 0.0;
    let mut hi = hi_shift / probe.field;
    let at_hi = predicted_figure_of_merit(model, hi, setup, probe)?;
    if at_hi < measured_fom {
        return Err(Error::CouplingNotIdentifiable(format!(
            "largest admissible coupling {hi} per V/um gives {at_hi} pm/V < {measured_fom} pm/V"
        )));
    }
    let mut predicted = at_hi;
    let mut iterations = 0;
    while iterations < 100 && hi - lo > 1e-7 * hi {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let f = predicted_figure_of_merit(model, mid, setup, probe)?;
        if f < measured_fom {
            lo = mid;
        } else {
            hi = mid;
            predicted = f;
        }
    }
    Ok(CouplingFit {
        alpha: hi,
        predicted_fom: predicted,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{build_stack, MoleculeOrientation, UnitCell};

    fn setup(trials: usize) -> CalibrationSetup {
        let stack = build_stack(3.0, &UnitCell::default(), MoleculeOrientation::default()).unwrap();
        CalibrationSetup {
            mc: McConfig::new(trials, CALIBRATION_SEED),
            ..CalibrationSetup::new(stack)
        }
    }

    fn points() -> Vec<(f64, Polarization)> {
        vec![
            (1.5, Polarization::X),
            (2.0, Polarization::X),
            (0.85, Polarization::Y),
            (2.0, Polarization::Y),
        ]
    }

    fn targets_from(model: &OrbitModel, s: &CalibrationSetup) -> Vec<CalibrationTarget> {
        let n = model_indices(model, &points(), s).unwrap();
        points()
            .iter()
            .zip(n)
            .map(|(&(w, p), n)| CalibrationTarget::new(w, p, n, &TransparencyWindow::default()).unwrap())
            .collect()
    }

    fn params(m: &OrbitModel) -> [f64; 3] {
        [m.eccentricity, m.semimajor_axis, m.effective_charge]
    }

    #[test]
    fn target_invariants() {
        let w = TransparencyWindow::default();
        assert!(CalibrationTarget::new(1.0, Polarization::X, 3.0, &w).is_ok());
        assert!(CalibrationTarget::new(1.0, Polarization::X, 4.0, &w).is_err());
        assert!(CalibrationTarget::new(1.0, Polarization::X, 1.0, &w).is_err());
        assert!(CalibrationTarget::new(0.4, Polarization::X, 2.0, &w).is_err());
    }

    #[test]
    fn self_generated_targets_score_zero() {
        let s = setup(8);
        let m = OrbitModel::default();
        let t = targets_from(&m, &s);
        assert_eq!(objective(params(&m), &t, &Bounds::default(), &s).unwrap(), 0.0);
    }

    #[test]
    fn objective_is_bitwise_repeatable() {
        let s = setup(8);
        let t = targets_from(&OrbitModel::default(), &s);
        let p = [0.3, 1.3, 4.2];
        let a = objective(p, &t, &Bounds::default(), &s).unwrap();
        let b = objective(p, &t, &Bounds::default(), &s).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn longer_axis_worsens_fit() {
        let s = setup(8);
        let m = OrbitModel::default();
        let t = targets_from(&m, &s);
        let p = [0.26, 1.54, 3.9];
        assert!(objective(p, &t, &Bounds::default(), &s).unwrap() > 0.0);
    }

    #[test]
    fn index_depends_on_u_and_z_through_ratio() {
        let s = setup(4);
        let a = model_indices(&OrbitModel::new(0.3, 1.2, 3.0).unwrap(), &points(), &s).unwrap();
        let b = model_indices(&OrbitModel::new(0.3, 1.5, 3.0 * 1.5f64.powi(2) / 1.44).unwrap(), &points(), &s)
            .unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12 * x, "{x} vs {y}");
        }
    }

    #[test]
    fn out_of_bounds_is_penalised_not_an_error() {
        let s = setup(4);
        let t = targets_from(&OrbitModel::default(), &s);
        let b = Bounds::default();
        let inside = objective([0.26, 1.4, 3.9], &t, &b, &s).unwrap();
        for p in [[0.97, 1.4, 3.9], [0.26, 0.5, 3.9], [0.26, 1.4, 12.0], [-0.1, 1.4, 3.9]] {
            let v = objective(p, &t, &b, &s).unwrap();
            assert!(v.is_finite() && v > inside + 1e6);
        }
        let near = objective([0.96, 1.4, 3.9], &t, &b, &s).unwrap();
        let far = objective([0.99, 1.4, 3.9], &t, &b, &s).unwrap();
        assert!(far > near);
    }

    #[test]
    fn optimal_start_converges_at_once() {
        let s = setup(8);
        let m = OrbitModel::default();
        let t = targets_from(&m, &s);
        let r = fit(&t, &m, &Bounds::default(), &s, &FitOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 3);
        assert_eq!(r.objective_value, 0.0);
        assert_eq!(r.model, m);
    }

    #[test]
    fn fit_matches_targets_and_stays_in_bounds() {
        let s = setup(8);
        let truth = OrbitModel::default();
        let t = targets_from(&truth, &s);
        let start = OrbitModel::new(0.1, 1.2, 2.0).unwrap();
        let b = Bounds::default();
        let r = fit(&t, &start, &b, &s, &FitOptions::default()).unwrap();
        assert!(b.contains(params(&r.model)));
        assert!(r.objective_value < 1e-3, "{r:?}");
        assert!((r.model.eccentricity - 0.26).abs() < 0.01 * 0.26, "{r:?}");
        let ratio = |m: &OrbitModel| m.semimajor_axis.powi(2) / m.effective_charge;
        assert!((ratio(&r.model) / ratio(&truth) - 1.0).abs() < 0.01);
        assert_eq!(r.residuals.len(), t.len());
    }

    #[test]
    fn iteration_cap_reports_best_so_far() {
        let s = setup(4);
        let t = targets_from(&OrbitModel::default(), &s);
        let start = OrbitModel::new(0.1, 1.2, 2.0).unwrap();
        let opts = FitOptions { tolerance: 1e-12, max_iterations: 3 };
        let r = fit(&t, &start, &Bounds::default(), &s, &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
        assert!(Bounds::default().contains(params(&r.model)));
    }

    #[test]
    fn start_outside_bounds_rejected() {
        let s = setup(4);
        let t = targets_from(&OrbitModel::default(), &s);
        let start = OrbitModel::new(0.97, 1.4, 3.9).unwrap();
        assert!(fit(&t, &start, &Bounds::default(), &s, &FitOptions::default()).is_err());
    }

    #[test]
    fn validate_tables() {
        let s = setup(4);
        let m = OrbitModel::default();
        assert!(validate(&m, &[], &s).unwrap().is_empty());
        let t = targets_from(&m, &s);
        let r = validate(&m, &t, &s).unwrap();
        assert!(r.iter().all(|r| r.abs_error == 0.0));
        let y = [CalibrationTarget::new(1.3, Polarization::Y, 3.0, &TransparencyWindow::default()).unwrap()];
        let r = validate(&m, &y, &s).unwrap();
        assert!(r[0].abs_error.is_finite());
    }

    #[test]
    fn coupling_fit() {
        let s = setup(16);
        let m = OrbitModel::default();
        let probe = CouplingProbe::default();
        assert_eq!(fit_field_coupling(&m, 0.0, &s, &probe).unwrap().alpha, 0.0);
        let one = fit_field_coupling(&m, 340.0, &s, &probe).unwrap();
        assert!(one.alpha > 0.0);
        assert!((one.predicted_fom / 340.0 - 1.0).abs() < 0.02);
        let check = predicted_figure_of_merit(&m, one.alpha, &s, &probe).unwrap();
        assert!((check / 340.0 - 1.0).abs() < 0.02);
        let two = fit_field_coupling(&m, 680.0, &s, &probe).unwrap();
        assert!(two.alpha > one.alpha);
        assert!(matches!(
            fit_field_coupling(&m, 1e12, &s, &probe),
            Err(Error::CouplingNotIdentifiable(_))
        ));
    }
}
