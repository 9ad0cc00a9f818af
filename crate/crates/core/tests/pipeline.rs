use qpm_core::crystal::{build_stack, CrystalStack, MoleculeOrientation, UnitCell};
use qpm_core::device::{self, SwitchGeometry};
use qpm_core::eo_classical::{BirefringentSlab, EOTensor};
use qpm_core::mc::McConfig;
use qpm_core::orbit::{FieldDrive, OrbitModel};
use qpm_core::transport::{self, Photon, Polarization};
use qpm_core::units::CONSTANTS;

fn stack(length: f64) -> CrystalStack {
    build_stack(length, &UnitCell::default(), MoleculeOrientation::default()).unwrap()
}

#[test]
fn index_scales_as_inverse_root_wavelength() {
    // same draws, prefactor proportional to sqrt(nu)
    let s = stack(1.0);
    let m = OrbitModel::default();
    let mc = McConfig::new(20, 3);
    for pol in Polarization::BOTH {
        let a = transport::run_index_mc(&s, &m, &Photon::new(0.7).unwrap(), pol, &mc).unwrap();
        let b = transport::run_index_mc(&s, &m, &Photon::new(1.4).unwrap(), pol, &mc).unwrap();
        let ratio = (a.mean - 1.0) / (b.mean - 1.0);
        assert!((ratio - 2f64.sqrt()).abs() < 1e-12, "{pol}: {ratio}");
    }
}

#[test]
fn total_delay_inverts_index() {
    let s = stack(3.0);
    let m = OrbitModel::default();
    let n = transport::run_index_mc(&s, &m, &Photon::new(1.0).unwrap(), Polarization::Y, &McConfig::new(8, 1)).unwrap();
    let tau = transport::total_delay(&n, &s);
    let back = 1.0 + tau * CONSTANTS.c0 / (3.0e-6);
    assert!((back - n.mean).abs() < 1e-12 * n.mean);
}

#[test]
fn thread_count_does_not_change_results() {
    let s = stack(0.5);
    let m = OrbitModel::default();
    let p = Photon::new(0.85).unwrap();
    let one = transport::run_retardation_mc(&s, &m, &p, &McConfig::new(40, 9).with_threads(1)).unwrap();
    let four = transport::run_retardation_mc(&s, &m, &p, &McConfig::new(40, 9).with_threads(4)).unwrap();
    assert_eq!(one, four);
}

#[test]
fn field_sweep_uses_common_random_numbers() {
    let s = stack(0.5);
    let m = OrbitModel::default();
    let p = Photon::new(0.63).unwrap();
    let mc = McConfig::new(30, 5);
    let drives: Vec<FieldDrive> = [0.0, 5.0, 10.0]
        .iter()
        .map(|&e| FieldDrive::new(e, 0.0, 1e-3).unwrap())
        .collect();
    let rows = transport::retardation_vs_field(&s, &m, &p, &drives, &mc).unwrap();
    let zero = transport::run_retardation_mc(&s, &m, &p, &mc).unwrap();
    assert_eq!(rows[0].retardation, zero);
    // paired differences are far tighter than the spread of either run
    let shift = transport::retardation_shift_mc(&s, &m, &m.with_eccentricity(rows[2].eccentricity), &p, &mc).unwrap();
    assert!(shift.std_error < 0.05 * zero.std_error);
    assert!((shift.mean - (rows[2].retardation.mean - zero.mean)).abs() < 1e-9 * zero.mean.abs());
}

#[test]
fn switching_voltage_tracks_coefficient() {
    let g = SwitchGeometry::with_interaction_length(4000.0).unwrap();
    let slab = BirefringentSlab::new(1.8, 1.8, 4000.0).unwrap();
    let full = EOTensor { r12: 65.0, r22: 0.0, r61: 0.0 };
    let half = EOTensor { r12: 32.5, ..full };
    let v = |t: &EOTensor| device::voltage_for_extinction(15.0, &g, t, &slab, 1.3).unwrap().unwrap();
    assert!((v(&half) / v(&full) - 2.0).abs() < 1e-12);
}
