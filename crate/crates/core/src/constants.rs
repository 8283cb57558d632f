//! Physical constants (SI 2019 exact values, CODATA 2018 for μ_B).

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// The constant set used by every calculator in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    planck_h: f64,
    bohr_magneton: f64,
    boltzmann_k: f64,
}

impl PhysicalConstants {
    pub const SI: PhysicalConstants = PhysicalConstants {
        planck_h: PLANCK,
        bohr_magneton: BOHR_MAGNETON,
        boltzmann_k: BOLTZMANN,
    };

    pub const fn planck_h(&self) -> f64 {
        self.planck_h
    }

    pub const fn bohr_magneton(&self) -> f64 {
        self.bohr_magneton
    }

    pub const fn boltzmann_k(&self) -> f64 {
        self.boltzmann_k
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::SI
    }
}
