//! Spin-1/2 measurement Otto engine coupled to the electromagnetic vacuum.
//!
//! The library is generic over the float type where the formulas are
//! dimensionless; SI-scale quantities (μ² is of order 1e-53) need `f64`, and
//! the aliases below fix that choice for application code.

pub mod constants;
pub mod cycle;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod modes;
pub mod otto;
pub mod params;
pub mod quadrature;
pub mod record;
pub mod scalar;

pub use cycle::{
    efficiency_c, efficiency_loss, run_cycle, sweep, CycleMetrics, CycleOptions, SweepTable,
};
pub use dynamics::{
    crossing_time, early_time_coeffs, evolve_full, evolve_linearized, matching_point, BlochState,
    Regime, SolverOptions, TrajectoryTrace,
};
pub use error::{Error, Result};
pub use modes::{
    decay_rate_xi, memory_kernel, spectral_density, KernelTable, PoleData, SpectralDensity,
};
pub use otto::{otto_cycle, OttoMetrics};
pub use params::{ConfigMap, CrossingMode, DerivedParams, EngineConfig, NumericsConfig};
pub use record::RadiationRecord;
pub use scalar::Scalar;

pub type Config = EngineConfig<f64>;
pub type Params = DerivedParams<f64>;
pub type Metrics = CycleMetrics<f64>;
pub type State = BlochState<f64>;
pub type Trace = TrajectoryTrace<f64>;
pub type Kernel = KernelTable<f64>;
pub type Density = SpectralDensity<f64>;
