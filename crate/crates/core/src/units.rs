//! Physical constants, unit conversions and the dimensional self-test for the
//! photon-delay prefactor.
//!
//! Constants are the CODATA 2018 values. They are compiled in and never read
//! from configuration.

use std::ops::{Div, Mul};

/// Fixed physical constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Planck constant, J s.
    pub h: f64,
    /// Electron rest mass, kg.
    pub m_e: f64,
    /// Elementary charge, C.
    pub q_e: f64,
    /// Coulomb constant 1/(4 pi eps0), N m^2 C^-2.
    pub k_c: f64,
    /// Speed of light in vacuum, m/s.
    pub c0: f64,
}

const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    h: 6.626_070_15e-34,
    m_e: 9.109_383_701_5e-31,
    q_e: 1.602_176_634e-19,
    k_c: 1.0 / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY),
    c0: 299_792_458.0,
};

pub const ANGSTROM: f64 = 1e-10;
pub const MICROMETRE: f64 = 1e-6;
/// pm/V times V/um, as a dimensionless factor.
pub const PM_PER_V_TIMES_V_PER_UM: f64 = 1e-12 * 1e6;

impl PhysicalConstants {
    /// Photon energy h c0 / lambda in eV.
    pub fn photon_energy_ev(&self, wavelength_um: f64) -> f64 {
        self.h * self.c0 / (wavelength_um * MICROMETRE) / self.q_e
    }

    /// Angular frequency 2 pi c0 / lambda in rad/s.
    pub fn angular_frequency(&self, wavelength_um: f64) -> f64 {
        2.0 * std::f64::consts::PI * self.c0 / (wavelength_um * MICROMETRE)
    }

    /// Delay prefactor sqrt(2 h nu m_e) / (k_c Z e^2), in s/m^2.
    ///
    /// Multiplied by an orbit radius squared (m^2) this is a time.
    pub fn delay_prefactor(&self, photon_energy_ev: f64, effective_charge: f64) -> f64 {
        let energy_j = photon_energy_ev * self.q_e;
        (2.0 * energy_j * self.m_e).sqrt() / (self.k_c * effective_charge * self.q_e * self.q_e)
    }
}

/// Exponents of (kg, m, s, A).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dim(pub [i8; 4]);

impl Dim {
    pub const NONE: Dim = Dim([0, 0, 0, 0]);
    pub const MASS: Dim = Dim([1, 0, 0, 0]);
    pub const LENGTH: Dim = Dim([0, 1, 0, 0]);
    pub const TIME: Dim = Dim([0, 0, 1, 0]);
    pub const CURRENT: Dim = Dim([0, 0, 0, 1]);
}

/// A value tagged with its SI dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub dim: Dim,
}

impl Quantity {
    pub fn new(value: f64, dim: Dim) -> Self {
        Self { value, dim }
    }

    pub fn powi(self, n: i8) -> Self {
        let mut d = self.dim.0;
        d.iter_mut().for_each(|e| *e *= n);
        Self::new(self.value.powi(n as i32), Dim(d))
    }

    /// Square root; `None` when any exponent is odd.
    pub fn sqrt(self) -> Option<Self> {
        if self.dim.0.iter().any(|e| e % 2 != 0) {
            return None;
        }
        let mut d = self.dim.0;
        d.iter_mut().for_each(|e| *e /= 2);
        Some(Self::new(self.value.sqrt(), Dim(d)))
    }
}

impl Mul for Quantity {
    type Output = Quantity;
    fn mul(self, rhs: Quantity) -> Quantity {
        let mut d = self.dim.0;
        d.iter_mut().zip(rhs.dim.0).for_each(|(a, b)| *a += b);
        Quantity::new(self.value * rhs.value, Dim(d))
    }
}

impl Div for Quantity {
    type Output = Quantity;
    fn div(self, rhs: Quantity) -> Quantity {
        let mut d = self.dim.0;
        d.iter_mut().zip(rhs.dim.0).for_each(|(a, b)| *a -= b);
        Quantity::new(self.value / rhs.value, Dim(d))
    }
}

/// Outcome of the delay-prefactor dimensional check.
#[derive(Debug, Clone, Copy)]
pub struct UnitsCheck {
    /// Delay from the dimension-tracked SI reduction, s.
    pub si_delay: f64,
    pub si_dim: Dim,
    /// Same delay reduced through eV, angstrom and c, s.
    pub atomic_delay: f64,
    pub relative_difference: f64,
}

impl UnitsCheck {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.si_dim == Dim::TIME && self.relative_difference <= rel_tol
    }
}

/// Evaluates sqrt(2 h nu m_e) r^2 / (k_c Z e^2) along two independent unit
/// reductions and compares them.
pub fn delay_units_check(
    photon_energy_ev: f64,
    effective_charge: f64,
    radius_angstrom: f64,
) -> UnitsCheck {
    let c = CONSTANTS;
    let joule = Dim([1, 2, -2, 0]);
    let coulomb = Quantity::new(c.q_e, Dim([0, 0, 1, 1]));
    let energy = Quantity::new(photon_energy_ev * c.q_e, joule);
    let mass = Quantity::new(c.m_e, Dim::MASS);
    let two = Quantity::new(2.0, Dim::NONE);
    // N m^2 C^-2 = kg m^3 s^-4 A^-2
    let k_c = Quantity::new(c.k_c, Dim([1, 3, -4, -2]));
    let z = Quantity::new(effective_charge, Dim::NONE);
    let r = Quantity::new(radius_angstrom * ANGSTROM, Dim::LENGTH);

    let momentum = (two * energy * mass)
        .sqrt()
        .expect("energy times mass has even exponents");
    let si = momentum * r.powi(2) / (k_c * z * coulomb.powi(2));

    // eV / angstrom / c route
    let mc2_ev = c.m_e * c.c0 * c.c0 / c.q_e;
    let momentum_ev_over_c = (2.0 * photon_energy_ev * mc2_ev).sqrt();
    let coulomb_ev_angstrom = c.k_c * c.q_e / ANGSTROM;
    let angstrom_over_c = momentum_ev_over_c * radius_angstrom * radius_angstrom
        / (coulomb_ev_angstrom * effective_charge);
    let atomic = angstrom_over_c * ANGSTROM / c.c0;

    UnitsCheck {
        si_delay: si.value,
        si_dim: si.dim,
        atomic_delay: atomic,
        relative_difference: ((si.value - atomic) / si.value).abs(),
    }
}
