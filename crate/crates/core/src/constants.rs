//! Physical constants (CODATA 2018), SI units throughout.

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Nucleon reference mass (kg).
///
/// The collapse-noise formulas normalise mass density to a nucleon count;
/// we use the atomic mass constant m_u = 1.66053906660e-27 kg. Substituting
/// the proton or neutron mass shifts collapse-rate bounds by under 2%.
pub const NUCLEON_MASS: f64 = 1.660_539_066_60e-27;

/// Boltzmann constant (J/K), exact.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Magnetic flux quantum (Wb).
pub const FLUX_QUANTUM: f64 = 2.067_833_848e-15;

/// Bundle of the constants entering the noise formulas.
///
/// Kept as a struct so alternative conventions (e.g. proton mass for the
/// nucleon reference) can be threaded through explicitly in tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant (J s).
    pub hbar: f64,
    /// Nucleon reference mass (kg).
    pub m0: f64,
    /// Boltzmann constant (J/K).
    pub kb: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: HBAR,
            m0: NUCLEON_MASS,
            kb: BOLTZMANN,
        }
    }
}
