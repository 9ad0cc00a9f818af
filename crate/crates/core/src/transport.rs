//! Monte-Carlo photon transport through the layer stack.
//!
//! Every layer delays the photon by an amount set by where the pi-electron sits
//! on its orbit when the photon arrives. For angular position `theta` and
//! radius `r` the delay scale is `C r^2` with
//! `C = sqrt(2 h nu m_e) / (k_c Z e^2)`.
//!
//! Two projections of that delay are used:
//!
//! * retardation: signed projections `tau_x = C cos(theta) r^2`,
//!   `tau_y = C sin(theta) r^2`, accumulated as `omega * sum(tau_x - tau_y)`;
//! * refractive index: squared projections `C cos^2(theta) r^2` and
//!   `C sin^2(theta) r^2`, which are never negative, turned into
//!   `n = 1 + (c0 / L) * sum(tau)`.
//!
//! Both share the prefactor, the radii and the angle draws, so for a fixed
//! seed the same electron positions feed every estimator. Layers are summed in
//! ascending order with compensated summation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crystal::CrystalStack;
use crate::error::{invalid, Error, Result};
use crate::mc::{trial_rng, CompensatedSum, McConfig, McResult};
use crate::orbit::{self, perturb_eccentricity, FieldDrive, OrbitModel};
use crate::units::{ANGSTROM, CONSTANTS, MICROMETRE};

/// Lowest excitation energy of the pi-electron system, eV.
pub const DEFAULT_EXCITATION_THRESHOLD_EV: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Photon {
    /// um.
    pub wavelength: f64,
    /// rad/s.
    pub angular_frequency: f64,
    /// eV.
    pub energy: f64,
}

impl Photon {
    pub fn new(wavelength_um: f64) -> Result<Self> {
        if !(wavelength_um.is_finite() && wavelength_um > 0.0) {
            return Err(invalid("wavelength_um", format!("{wavelength_um} must be > 0")));
        }
        Ok(Self {
            wavelength: wavelength_um,
            angular_frequency: CONSTANTS.angular_frequency(wavelength_um),
            energy: CONSTANTS.photon_energy_ev(wavelength_um),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    X,
    Y,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::X, Polarization::Y];

    pub fn as_str(&self) -> &'static str {
        match self {
            Polarization::X => "x",
            Polarization::Y => "y",
        }
    }
}

impl std::fmt::Display for Polarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Polarization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Polarization::X),
            "y" => Ok(Polarization::Y),
            other => Err(invalid("polarization", format!("`{other}` is not x or y"))),
        }
    }
}

/// True when the photon is below the excitation threshold. Equality counts
/// as resonant.
pub fn check_nonresonant(photon: &Photon, excitation_threshold_ev: f64) -> bool {
    photon.energy < excitation_threshold_ev
}

/// Delay prefactor C, s/m^2.
pub fn delay_prefactor(model: &OrbitModel, photon: &Photon) -> f64 {
    CONSTANTS.delay_prefactor(photon.energy, model.effective_charge)
}

/// One photon-electron interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerDraw {
    pub theta: f64,
    /// angstrom.
    pub radius: f64,
    /// Signed x projection of the delay, s.
    pub tau_x: f64,
    /// Signed y projection of the delay, s.
    pub tau_y: f64,
}

impl LayerDraw {
    /// This layer's contribution to the phase retardation, rad.
    pub fn retardation(&self, omega: f64) -> f64 {
        omega * (self.tau_x - self.tau_y)
    }
}

fn layer_from_prefactor(theta: f64, model: &OrbitModel, prefactor: f64) -> LayerDraw {
    let radius = orbit::orbit_radius(theta, model);
    let r_m = radius * ANGSTROM;
    let scale = prefactor * r_m * r_m;
    LayerDraw {
        theta,
        radius,
        tau_x: scale * theta.cos(),
        tau_y: scale * theta.sin(),
    }
}

/// Signed delay projections for an electron at `theta`.
pub fn layer_delays(theta: f64, model: &OrbitModel, photon: &Photon) -> LayerDraw {
    layer_from_prefactor(theta, model, delay_prefactor(model, photon))
}

fn check_run(stack: &CrystalStack, model: &OrbitModel, photon: &Photon) -> Result<()> {
    model.validate()?;
    if stack.layer_count == 0 {
        return Err(Error::EmptyStack);
    }
    if !check_nonresonant(photon, DEFAULT_EXCITATION_THRESHOLD_EV) {
        return Err(Error::Resonant {
            energy_ev: photon.energy,
            threshold_ev: DEFAULT_EXCITATION_THRESHOLD_EV,
        });
    }
    Ok(())
}

/// Draws every layer of trial `trial` in order.
pub fn trial_layers(
    stack: &CrystalStack,
    model: &OrbitModel,
    photon: &Photon,
    seed: u64,
    trial: u64,
) -> Result<Vec<LayerDraw>> {
    let prefactor = delay_prefactor(model, photon);
    let mut rng = trial_rng(seed, trial);
    (0..stack.layer_count)
        .map(|_| {
            let theta = orbit::sample_theta(model, &mut rng)?;
            Ok(layer_from_prefactor(theta, model, prefactor))
        })
        .collect()
}

/// Phase retardation of a set of layers, summed in the given order.
pub fn retardation_from_layers(layers: &[LayerDraw], omega: f64) -> f64 {
    layers
        .iter()
        .map(|l| l.retardation(omega))
        .collect::<CompensatedSum>()
        .value()
}

fn trial_retardation<R: Rng>(
    stack: &CrystalStack,
    model: &OrbitModel,
    photon: &Photon,
    prefactor: f64,
    rng: &mut R,
) -> Result<f64> {
    let mut sum = CompensatedSum::default();
    for _ in 0..stack.layer_count {
        let theta = orbit::sample_theta(model, rng)?;
        sum.add(layer_from_prefactor(theta, model, prefactor).retardation(photon.angular_frequency));
    }
    Ok(sum.value())
}

/// Phase retardation `omega * sum_i (tau_x,i - tau_y,i)` over the stack,
/// estimated over `mc.trials` independent photons.
pub fn run_retardation_mc(
    stack: &CrystalStack,
    model: &OrbitModel,
    photon: &Photon,
    mc: &McConfig,
) -> Result<McResult> {
    check_run(stack, model, photon)?;
    let prefactor = delay_prefactor(model, photon);
    let samples = mc.run(|_, rng| trial_retardation(stack, model, photon, prefactor, rng))?;
    Ok(McResult::from_samples(&samples, mc.seed))
}

/// Per-trial squared-projection radius sums `sum cos^2(theta) r^2` and
/// `sum sin^2(theta) r^2` in m^2. Independent of wavelength and charge.
pub fn index_radius_sums(
    stack: &CrystalStack,
    model: &OrbitModel,
    mc: &McConfig,
) -> Result<Vec<(f64, f64)>> {
    model.validate()?;
    if stack.layer_count == 0 {
        return Err(Error::EmptyStack);
    }
    mc.run(|_, rng| {
        let mut sx = CompensatedSum::default();
        let mut sy = CompensatedSum::default();
        for _ in 0..stack.layer_count {
            let theta = orbit::sample_theta(model, rng)?;
            let r = orbit::orbit_radius(theta, model) * ANGSTROM;
            let (s, c) = theta.sin_cos();
            sx.add(c * c * r * r);
            sy.add(s * s * r * r);
        }
        Ok((sx.value(), sy.value()))
    })
}

/// Turns per-trial radius sums into refractive-index statistics,
/// `n = 1 + (c0 / L) * C * sum`.
pub fn index_from_sums(
    sums: &[(f64, f64)],
    polarization: Polarization,
    stack: &CrystalStack,
    model: &OrbitModel,
    photon: &Photon,
    seed: u64,
) -> McResult {
    let scale = CONSTANTS.c0 / (stack.length * MICROMETRE) * delay_prefactor(model, photon);
    let n: Vec<f64> = sums
        .iter()
        .map(|&(sx, sy)| {
            let s = match polarization {
                Polarization::X => sx,
                Polarization::Y => sy,
            };
            1.0 + scale * s
        })
        .collect();
    McResult::from_samples(&n, seed)
}

/// Refractive index for one polarization from the total transit delay
/// `n L / c0 = L / c0 + sum tau_i`.
pub fn run_index_mc(
    stack: &CrystalStack,
    model: &OrbitModel,
    photon: &Photon,
    polarization: Polarization,
    mc: &McConfig,
) -> Result<McResult> {
    check_run(stack, model, photon)?;
    let sums = index_radius_sums(stack, model, mc)?;
    Ok(index_from_sums(&sums, polarization, stack, model, photon, mc.seed))
}

/// Total delay `sum tau_i` implied by an index result, s.
pub fn total_delay(index: &McResult, stack: &CrystalStack) -> f64 {
    (index.mean - 1.0) * stack.length * MICROMETRE / CONSTANTS.c0
}

/// Paired per-trial retardation change `dphi(shifted) - dphi(base)`.
///
/// Both orbits are sampled from the same uniform numbers, so a shift that
/// leaves the eccentricity alone gives exactly zero.
pub fn retardation_shift_mc(
    stack: &CrystalStack,
    base: &OrbitModel,
    shifted: &OrbitModel,
    photon: &Photon,
    mc: &McConfig,
) -> Result<McResult> {
    check_run(stack, base, photon)?;
    check_run(stack, shifted, photon)?;
    let p0 = delay_prefactor(base, photon);
    let p1 = delay_prefactor(shifted, photon);
    let omega = photon.angular_frequency;
    let samples = mc.run(|_, rng| {
        let mut a = CompensatedSum::default();
        let mut b = CompensatedSum::default();
        for _ in 0..stack.layer_count {
            let u: f64 = rng.gen();
            let t0 = orbit::theta_at_fraction(u, base.eccentricity)?;
            let t1 = orbit::theta_at_fraction(u, shifted.eccentricity)?;
            a.add(layer_from_prefactor(t0, base, p0).retardation(omega));
            b.add(layer_from_prefactor(t1, shifted, p1).retardation(omega));
        }
        Ok(b.value() - a.value())
    })?;
    Ok(McResult::from_samples(&samples, mc.seed))
}

/// One row of a retardation-versus-field sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldRow {
    /// V/um.
    pub field: f64,
    /// degrees.
    pub psi: f64,
    pub eccentricity: f64,
    pub retardation: McResult,
}

/// Retardation at each drive, all with the same seed so that the sweep uses
/// common random numbers.
pub fn retardation_vs_field(
    stack: &CrystalStack,
    model: &OrbitModel,
    photon: &Photon,
    drives: &[FieldDrive],
    mc: &McConfig,
) -> Result<Vec<FieldRow>> {
    if drives.is_empty() {
        return Err(invalid("drive_grid", "must not be empty"));
    }
    // Draws depend only on the eccentricity, so equal eccentricities share a run.
    let mut done: Vec<(u64, McResult)> = Vec::new();
    drives
        .iter()
        .map(|drive| {
            drive.validate()?;
            let perturbed = perturb_eccentricity(model, drive);
            let key = perturbed.model.eccentricity.to_bits();
            let mut retardation = match done.iter().find(|(k, _)| *k == key) {
                Some((_, r)) => *r,
                None => {
                    let r = run_retardation_mc(stack, &perturbed.model, photon, mc)?;
                    done.push((key, r));
                    r
                }
            };
            retardation.clamped_fraction = if perturbed.clamped { 1.0 } else { 0.0 };
            Ok(FieldRow {
                field: drive.field_magnitude,
                psi: drive.ct_angle,
                eccentricity: perturbed.model.eccentricity,
                retardation,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{build_stack, MoleculeOrientation, UnitCell};
    use std::f64::consts::FRAC_PI_4;

    fn stack(len: f64) -> CrystalStack {
        build_stack(len, &UnitCell::default(), MoleculeOrientation::default()).unwrap()
    }

    #[test]
    fn nonresonance() {
        let red = Photon::new(0.63).unwrap();
        assert!(check_nonresonant(&red, 3.0));
        let at = |ev: f64| Photon {
            energy: ev,
            ..red
        };
        assert!(!check_nonresonant(&at(3.5), 3.0));
        assert!(!check_nonresonant(&at(3.0), 3.0));
    }

    #[test]
    fn resonant_photon_refused() {
        let uv = Photon::new(0.35).unwrap();
        let r = run_retardation_mc(&stack(0.1), &OrbitModel::default(), &uv, &McConfig::new(2, 1));
        assert!(matches!(r, Err(Error::Resonant { .. })));
        let r = run_index_mc(&stack(0.1), &OrbitModel::default(), &uv, Polarization::X, &McConfig::new(2, 1));
        assert!(matches!(r, Err(Error::Resonant { .. })));
    }

    #[test]
    fn empty_stack_refused() {
        let mut s = stack(0.1);
        s.layer_count = 0;
        let p = Photon::new(0.63).unwrap();
        assert_eq!(
            run_retardation_mc(&s, &OrbitModel::default(), &p, &McConfig::new(2, 1)),
            Err(Error::EmptyStack)
        );
    }

    #[test]
    fn diagonal_layer_has_no_retardation() {
        let d = layer_delays(FRAC_PI_4, &OrbitModel::default(), &Photon::new(0.63).unwrap());
        assert!((d.tau_x - d.tau_y).abs() <= 1e-16 * d.tau_x);
    }

    #[test]
    fn perigee_layer_against_hand_prefactor() {
        // C from the constants written out by hand
        let h: f64 = 6.626_070_15e-34;
        let me = 9.109_383_701_5e-31;
        let e = 1.602_176_634e-19;
        let k = 8.987_551_792_3e9;
        let c = 299_792_458.0;
        let hv = h * c / 0.63e-6;
        let pref = (2.0 * hv * me).sqrt() / (k * 3.9 * e * e);
        let expected = pref * (1.036e-10f64).powi(2);
        let d = layer_delays(0.0, &OrbitModel::default(), &Photon::new(0.63).unwrap());
        assert!(((d.tau_x - expected) / expected).abs() < 1e-9, "{} {}", d.tau_x, expected);
        assert_eq!(d.tau_y, 0.0);
        assert!((d.radius - 1.036).abs() < 1e-12);
    }

    #[test]
    fn delay_inverse_in_charge() {
        let p = Photon::new(0.8).unwrap();
        let m = OrbitModel::default();
        let a = layer_delays(1.0, &m, &p);
        let b = layer_delays(1.0, &OrbitModel { effective_charge: 7.8, ..m }, &p);
        assert!((a.tau_x / b.tau_x - 2.0).abs() < 1e-14);
        assert!((a.tau_y / b.tau_y - 2.0).abs() < 1e-14);
    }

    #[test]
    fn circle_has_no_mean_retardation() {
        let m = OrbitModel::new(0.0, 1.4, 3.9).unwrap();
        let r = run_retardation_mc(&stack(0.3), &m, &Photon::new(0.63).unwrap(), &McConfig::new(400, 3))
            .unwrap();
        assert!(r.mean.abs() < 3.0 * r.std_error, "{r:?}");
    }

    #[test]
    fn layer_sum_equals_trial_value() {
        let s = stack(0.2);
        let m = OrbitModel::default();
        let p = Photon::new(0.63).unwrap();
        let mc = McConfig::new(5, 17);
        let run = mc
            .run(|i, _| {
                let layers = trial_layers(&s, &m, &p, mc.seed, i)?;
                Ok(retardation_from_layers(&layers, p.angular_frequency))
            })
            .unwrap();
        let pref = delay_prefactor(&m, &p);
        let direct = mc
            .run(|_, rng| trial_retardation(&s, &m, &p, pref, rng))
            .unwrap();
        assert_eq!(run, direct);
        let r = run_retardation_mc(&s, &m, &p, &mc).unwrap();
        assert_eq!(r, McResult::from_samples(&direct, 17));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let s = stack(0.3);
        let m = OrbitModel::default();
        let p = Photon::new(0.63).unwrap();
        let one = run_retardation_mc(&s, &m, &p, &McConfig::new(64, 42).with_threads(1)).unwrap();
        let eight = run_retardation_mc(&s, &m, &p, &McConfig::new(64, 42).with_threads(8)).unwrap();
        assert_eq!(one.mean.to_bits(), eight.mean.to_bits());
        assert_eq!(one, eight);
    }

    #[test]
    fn wavelengths_give_distinct_retardation() {
        let s = stack(1.0);
        let m = OrbitModel::default();
        let mc = McConfig::new(200, 5);
        let a = run_retardation_mc(&s, &m, &Photon::new(0.63).unwrap(), &mc).unwrap();
        let b = run_retardation_mc(&s, &m, &Photon::new(0.85).unwrap(), &mc).unwrap();
        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.mean.abs() - b.mean.abs()).abs() > 3.0 * se);
    }

    #[test]
    fn wavelength_ordering_stable_across_seeds() {
        let s = stack(0.5);
        let m = OrbitModel::default();
        for seed in 1..=5 {
            let mc = McConfig::new(100, seed);
            let mut v: Vec<(f64, f64)> = [0.6, 0.8, 1.0]
                .iter()
                .map(|&l| {
                    let r = run_retardation_mc(&s, &m, &Photon::new(l).unwrap(), &mc).unwrap();
                    (l, r.mean.abs())
                })
                .collect();
            v.sort_by(|a, b| b.1.total_cmp(&a.1));
            assert_eq!(v.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0.6, 0.8, 1.0]);
        }
    }

    #[test]
    fn standard_error_scales_with_inverse_root_trials() {
        let s = stack(0.05);
        let m = OrbitModel::default();
        let p = Photon::new(0.63).unwrap();
        let ratios: Vec<f64> = (0..10)
            .map(|k| {
                let small = run_retardation_mc(&s, &m, &p, &McConfig::new(200, 100 + k)).unwrap();
                let large = run_retardation_mc(&s, &m, &p, &McConfig::new(800, 200 + k)).unwrap();
                small.std_error / large.std_error
            })
            .collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((mean - 2.0).abs() < 0.4, "ratio {mean}");
    }

    #[test]
    fn index_at_least_one() {
        let s = stack(0.3);
        let p = Photon::new(0.9).unwrap();
        for e in [0.0, 0.26, 0.8] {
            let m = OrbitModel::new(e, 1.4, 3.9).unwrap();
            for pol in Polarization::BOTH {
                let mc = McConfig::new(20, 4);
                let sums = index_radius_sums(&s, &m, &mc).unwrap();
                assert!(sums.iter().all(|&(x, y)| x >= 0.0 && y >= 0.0));
                let n = run_index_mc(&s, &m, &p, pol, &mc).unwrap();
                assert!(n.mean >= 1.0);
            }
        }
    }

    #[test]
    fn vanishing_orbit_is_vacuum() {
        let s = stack(0.3);
        let m = OrbitModel::new(0.26, 1e-9, 3.9).unwrap();
        let p = Photon::new(0.63).unwrap();
        for pol in Polarization::BOTH {
            let n = run_index_mc(&s, &m, &p, pol, &McConfig::new(10, 1)).unwrap();
            assert!((n.mean - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn index_delay_back_inference() {
        // n = 3 over 3 um
        let s = stack(3.0);
        let r = McResult::from_samples(&[3.0], 0);
        let d = total_delay(&r, &s);
        assert!((d - 2.0 * 3e-6 / 299_792_458.0).abs() < 1e-25);
        assert!(d > 1e-14 && d < 1e-13);
    }

    #[test]
    fn circle_index_is_isotropic_in_expectation() {
        // at e = 0, E[cos^2] = E[sin^2] = 1/2 so both indices agree statistically
        let s = stack(0.3);
        let m = OrbitModel::new(0.0, 1.4, 3.9).unwrap();
        let p = Photon::new(0.63).unwrap();
        let mc = McConfig::new(300, 8);
        let x = run_index_mc(&s, &m, &p, Polarization::X, &mc).unwrap();
        let y = run_index_mc(&s, &m, &p, Polarization::Y, &mc).unwrap();
        // oracle: n = 1 + c0/L * C * m * u^2 / 2
        let expected = 1.0
            + CONSTANTS.c0 / 0.3e-6 * delay_prefactor(&m, &p) * s.layer_count as f64 * (1.4e-10f64).powi(2) / 2.0;
        for r in [x, y] {
            assert!((r.mean - expected).abs() < 4.0 * r.std_error, "{r:?} vs {expected}");
        }
    }

    #[test]
    fn field_sweep() {
        let s = stack(0.3);
        let m = OrbitModel::default();
        let p = Photon::new(0.63).unwrap();
        let mc = McConfig::new(100, 42);
        let base = run_retardation_mc(&s, &m, &p, &mc).unwrap();
        let drives: Vec<FieldDrive> = [0.0, 2.0, 4.0, 6.0]
            .iter()
            .map(|&f| FieldDrive::new(f, 0.0, 0.01).unwrap())
            .collect();
        let rows = retardation_vs_field(&s, &m, &p, &drives, &mc).unwrap();
        assert_eq!(rows[0].retardation, base);
        for w in rows.windows(2) {
            assert!(w[1].retardation.mean.abs() > w[0].retardation.mean.abs());
        }
        let perp: Vec<FieldDrive> = [0.0, 5.0, 10.0]
            .iter()
            .map(|&f| FieldDrive::new(f, 90.0, 0.01).unwrap())
            .collect();
        let rows = retardation_vs_field(&s, &m, &p, &perp, &mc).unwrap();
        for r in &rows {
            assert!((r.retardation.mean - base.mean).abs() <= 1e-12 * base.mean.abs());
        }
        assert!(retardation_vs_field(&s, &m, &p, &[], &mc).is_err());
    }

    #[test]
    fn paired_shift_matches_difference_of_runs() {
        let s = stack(0.3);
        let m = OrbitModel::default();
        let p = Photon::new(0.63).unwrap();
        let mc = McConfig::new(50, 42);
        let shifted = m.with_eccentricity(0.28);
        let d = retardation_shift_mc(&s, &m, &shifted, &p, &mc).unwrap();
        let a = run_retardation_mc(&s, &m, &p, &mc).unwrap();
        let b = run_retardation_mc(&s, &shifted, &p, &mc).unwrap();
        assert!((d.mean - (b.mean - a.mean)).abs() < 1e-9 * a.mean.abs());
        assert!(d.std_error < (a.std_error.powi(2) + b.std_error.powi(2)).sqrt());
        let none = retardation_shift_mc(&s, &m, &m, &p, &mc).unwrap();
        assert_eq!((none.mean, none.std_error), (0.0, 0.0));
    }

    #[test]
    fn retardation_monotone_in_eccentricity_with_common_numbers() {
        let s = stack(0.3);
        let p = Photon::new(0.63).unwrap();
        let mc = McConfig::new(100, 42);
        let mut prev = 0.0;
        for e in [0.1, 0.2, 0.3, 0.4, 0.5] {
            let m = OrbitModel::new(e, 1.4, 3.9).unwrap();
            let r = run_retardation_mc(&s, &m, &p, &mc).unwrap().mean.abs();
            assert!(r > prev, "e={e}");
            prev = r;
        }
    }

    #[test]
    fn polarization_parse() {
        assert_eq!("X".parse::<Polarization>().unwrap(), Polarization::X);
        assert_eq!(" y ".parse::<Polarization>().unwrap(), Polarization::Y);
        assert!("z".parse::<Polarization>().is_err());
    }
}
