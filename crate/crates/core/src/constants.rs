//! CODATA 2018 exact and recommended values, SI units.

use crate::scalar::{lit, Scalar};

/// Version tag written into run manifests.
pub const CONSTANTS_VERSION: &str = "CODATA-2018";

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s.
pub const C: f64 = 299_792_458.0;
/// Vacuum electric permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Electron mass, kg.
pub const M_E: f64 = 9.109_383_701_5e-31;
/// Elementary charge, C.
pub const Q_E: f64 = 1.602_176_634e-19;

/// Constants table expressed in the working scalar type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants<T> {
    pub hbar: T,
    pub c: T,
    pub epsilon_0: T,
    pub k_b: T,
    pub m_e: T,
    pub q_e: T,
}

impl<T: Scalar> Constants<T> {
    pub fn codata2018() -> Self {
        Self {
            hbar: lit(HBAR),
            c: lit(C),
            epsilon_0: lit(EPSILON_0),
            k_b: lit(K_B),
            m_e: lit(M_E),
            q_e: lit(Q_E),
        }
    }
}
