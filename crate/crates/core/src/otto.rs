//! Thermal Otto cycle of a spin in a z-field, the reference engine.

use crate::params::DerivedParams;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OttoMetrics<T> {
    /// Work yielded by the B0 → B1 stroke, J.
    pub w01: T,
    /// Heat absorbed while depolarizing at B1, J.
    pub q12: T,
    /// Heat released while re-thermalizing at B0, J.
    pub q30: T,
    /// 1 − λ; `None` when nothing is absorbed (Δ = 0).
    pub eta_o: Option<T>,
    pub mean_e0: T,
    pub mean_e1: T,
}

/// Evaluates the ideal cycle with instantaneous adiabatic legs.
pub fn otto_cycle<T: Scalar>(p: &DerivedParams<T>) -> OttoMetrics<T> {
    let b0 = p.lambda * p.b1;
    let mean_e0 = -p.mu * b0 * p.delta;
    let mean_e1 = -p.mu * p.b1 * p.delta;
    let q12 = p.mu * p.b1 * p.delta;
    OttoMetrics {
        w01: p.mu * (p.b1 - b0) * p.delta,
        q12,
        q30: -mean_e0,
        eta_o: (q12 != T::zero()).then(|| T::one() - p.lambda),
        mean_e0,
        mean_e1,
    }
}
