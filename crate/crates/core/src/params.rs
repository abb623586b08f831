//! Physical configuration, numerics settings and every derived scalar.
//!
//! Internally everything is SI with frequencies in rad/s. The plain-text
//! configuration file uses the engine's natural parameterization: mass in
//! electron masses, charge in elementary charges and the trap frequency as a
//! multiple of the work-field Larmor frequency Ω1.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::constants::{Constants, M_E, Q_E};
use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Grid spacing for parameter sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

impl fmt::Display for Spacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spacing::Linear => "linear",
            Spacing::Log => "log",
        })
    }
}

/// One axis of a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub min: T,
    pub max: T,
    pub count: usize,
    pub spacing: Spacing,
}

impl<T: Scalar> GridSpec<T> {
    pub fn linear(min: T, max: T, count: usize) -> Self {
        Self {
            min,
            max,
            count,
            spacing: Spacing::Linear,
        }
    }

    pub fn log(min: T, max: T, count: usize) -> Self {
        Self {
            min,
            max,
            count,
            spacing: Spacing::Log,
        }
    }

    /// Grid points in ascending order, endpoints included.
    pub fn points(&self) -> Vec<T> {
        let n = self.count;
        if n == 1 {
            return vec![self.min];
        }
        let last = T::from_usize(n - 1).unwrap();
        (0..n)
            .map(|i| {
                let f = T::from_usize(i).unwrap() / last;
                match self.spacing {
                    Spacing::Linear => self.min + (self.max - self.min) * f,
                    Spacing::Log => {
                        let (a, b) = (self.min.ln(), self.max.ln());
                        (a + (b - a) * f).exp()
                    }
                }
            })
            .collect()
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.count < 2 {
            return Err(invalid(&format!("{name}_count"), "must be at least 2"));
        }
        if !(self.min > T::zero() && self.max >= self.min && self.max <= T::one()) {
            return Err(invalid(
                &format!("{name}_min"),
                "grid must lie within (0, 1] with min <= max",
            ));
        }
        Ok(())
    }
}

/// How the probe switch-off instant is located.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingMode {
    /// Root of the transcendental crossing condition on the decaying trajectory.
    Exact,
    /// Closed-form arccos(−γ²)/(2Ω).
    Approx,
}

impl fmt::Display for CrossingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CrossingMode::Exact => "exact",
            CrossingMode::Approx => "approx",
        })
    }
}

/// Trajectory generator used by the `dynamics` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsSolver {
    /// Gaussian early branch matched onto the exponential branch.
    Regimes,
    /// Full memory-kernel integration.
    Full,
}

impl fmt::Display for DynamicsSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DynamicsSolver::Regimes => "regimes",
            DynamicsSolver::Full => "full",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericsConfig<T> {
    pub quad_rel_tol: T,
    /// Solver step in seconds; zero selects the kernel-resolving default.
    pub ode_step: T,
    pub history_grid: usize,
    pub root_tol: T,
    pub lambda_grid: GridSpec<T>,
    pub gamma_grid: GridSpec<T>,
    pub crossing_mode: CrossingMode,
    /// Switches the vacuum coupling off (limit checks).
    pub coupling: bool,
    /// Recompute the cycle state at t_c with the full solver.
    pub validate_full: bool,
    pub dynamics_solver: DynamicsSolver,
    /// Length of emitted trajectories and records, in units of t_c.
    pub t_end_over_tc: T,
}

impl<T: Scalar> Default for NumericsConfig<T> {
    fn default() -> Self {
        Self {
            quad_rel_tol: lit(1e-10),
            ode_step: T::zero(),
            history_grid: 400,
            root_tol: lit(1e-12),
            lambda_grid: GridSpec::linear(lit(0.02), lit(0.98), 50),
            gamma_grid: GridSpec::log(lit(1e-12), lit(1e-6), 50),
            crossing_mode: CrossingMode::Exact,
            coupling: true,
            validate_full: false,
            dynamics_solver: DynamicsSolver::Regimes,
            t_end_over_tc: lit(2.0),
        }
    }
}

/// Physical inputs of one engine, SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig<T> {
    /// Work field at the start of the cycle, T.
    pub b0: T,
    /// Work field after the work stroke, T.
    pub b1: T,
    /// Probe field, T.
    pub b2: T,
    /// Bath temperature, K. `+inf` means β = 0.
    pub temperature: T,
    pub mass: T,
    pub charge: T,
    /// Trap angular frequency, rad/s.
    pub omega_trap: T,
    pub numerics: NumericsConfig<T>,
}

/// Whether the operating-regime ordering B2 ≥ B1 > B0 is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeCheck {
    Strict,
    /// Permits B0 ≥ B1 and B2 < B1 for limit tests; positivity is still required.
    AllowDegenerate,
}

/// Every scalar derived from an [`EngineConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams<T> {
    pub constants: Constants<T>,
    /// Magnetic moment qħ/2m, J/T.
    pub mu: T,
    pub b1: T,
    pub omega0: T,
    pub omega1: T,
    pub omega2: T,
    /// Larmor frequency of the total field, √(Ω1² + Ω2²).
    pub omega: T,
    /// Tilt of the total field, tan θ = B1/B2.
    pub theta: T,
    pub sin_theta: T,
    pub cos_theta: T,
    pub lambda: T,
    pub gamma: T,
    /// Trap ground-state width √(ħ/mω_trap), m.
    pub sigma: T,
    pub beta: T,
    pub delta: T,
}

impl<T: Scalar> DerivedParams<T> {
    /// σ/c, the memory time of the vacuum kernel.
    pub fn cutoff_time(&self) -> T {
        self.sigma / self.constants.c
    }

    /// μB1 = ħΩ1, the energy unit of the dimensionless work.
    pub fn energy_unit(&self) -> T {
        self.mu * self.b1
    }
}

fn invalid(key: &str, reason: &str) -> Error {
    Error::InvalidParameter {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

/// Δ = tanh(βħΩ0), the thermal polarization along the work field.
pub fn thermal_polarization<T: Scalar>(beta: T, omega0: T) -> T {
    let hbar: T = Constants::codata2018().hbar;
    (beta * hbar * omega0).tanh()
}

/// Occupations (p+, p−) of the thermal state at energy splitting 2·μB.
pub fn thermal_occupations<T: Scalar>(beta: T, mu_b: T) -> (T, T) {
    let p_plus = T::one() / (T::one() + (lit::<T>(-2.0) * beta * mu_b).exp());
    (p_plus, T::one() - p_plus)
}

impl<T: Scalar> EngineConfig<T> {
    /// Reference operating point: m = 2000 mₑ, q = qₑ, B1 = 0.1 T, ω_trap = 100 Ω1,
    /// with B0 = 0.05 T and the probe tuned near the radiation maximum.
    pub fn reference_defaults() -> Self {
        let mass = lit::<T>(2000.0 * M_E);
        let charge = lit::<T>(Q_E);
        let b1 = lit::<T>(0.1);
        let omega1 = charge * b1 / (lit::<T>(2.0) * mass);
        Self {
            b0: lit(0.05),
            b1,
            b2: lit(3.0e8),
            temperature: lit(1e-5),
            mass,
            charge,
            omega_trap: lit::<T>(100.0) * omega1,
            numerics: NumericsConfig::default(),
        }
    }

    /// Same engine with the work and probe fields set from (λ, γ) at fixed B1.
    pub fn with_ratios(&self, lambda: T, gamma: T) -> Self {
        Self {
            b0: lambda * self.b1,
            b2: self.b1 / gamma,
            ..*self
        }
    }

    pub fn derive(&self) -> Result<DerivedParams<T>> {
        derive_params(self, RegimeCheck::Strict)
    }
}

/// Computes μ, Ω_i, Ω, θ, λ, γ, σ, β and Δ from the configuration.
pub fn derive_params<T: Scalar>(
    config: &EngineConfig<T>,
    check: RegimeCheck,
) -> Result<DerivedParams<T>> {
    let positive = [
        ("B0_tesla", config.b0),
        ("B1_tesla", config.b1),
        ("B2_tesla", config.b2),
        ("T_kelvin", config.temperature),
        ("mass_me", config.mass),
        ("charge_qe", config.charge),
        ("trap_omega_over_omega1", config.omega_trap),
    ];
    for (key, value) in positive {
        if !(value > T::zero()) || value.is_nan() {
            return Err(invalid(key, "must be positive"));
        }
    }
    if check == RegimeCheck::Strict {
        if config.b0 >= config.b1 {
            return Err(Error::NoWorkRegime {
                b0: config.b0.to_f64().unwrap_or(f64::NAN),
                b1: config.b1.to_f64().unwrap_or(f64::NAN),
            });
        }
        if config.b2 < config.b1 {
            return Err(invalid("B2_tesla", "probe field must satisfy B2 >= B1"));
        }
    }
    let n = &config.numerics;
    if !(n.quad_rel_tol > T::zero()) {
        return Err(invalid("quad_rel_tol", "must be positive"));
    }
    if !(n.root_tol > T::zero()) {
        return Err(invalid("root_tol", "must be positive"));
    }
    if n.ode_step < T::zero() {
        return Err(invalid("ode_step", "must be non-negative"));
    }
    if n.history_grid < 2 {
        return Err(invalid("history_grid", "must be at least 2"));
    }
    if !(n.t_end_over_tc > T::zero()) {
        return Err(invalid("t_end_over_tc", "must be positive"));
    }
    n.lambda_grid.validate("lambda")?;
    n.gamma_grid.validate("gamma")?;

    let k = Constants::<T>::codata2018();
    let two = lit::<T>(2.0);
    let mu = config.charge * k.hbar / (two * config.mass);
    let omega0 = mu * config.b0 / k.hbar;
    let omega1 = mu * config.b1 / k.hbar;
    let omega2 = mu * config.b2 / k.hbar;
    let omega = omega1.hypot(omega2);
    let beta = if config.temperature.is_infinite() {
        T::zero()
    } else {
        T::one() / (k.k_b * config.temperature)
    };
    Ok(DerivedParams {
        constants: k,
        mu,
        b1: config.b1,
        omega0,
        omega1,
        omega2,
        omega,
        theta: config.b1.atan2(config.b2),
        sin_theta: omega1 / omega,
        cos_theta: omega2 / omega,
        lambda: config.b0 / config.b1,
        gamma: config.b1 / config.b2,
        sigma: (k.hbar / (config.mass * config.omega_trap)).sqrt(),
        beta,
        delta: (beta * k.hbar * omega0).tanh(),
    })
}

/// Every key understood by the configuration file, in canonical order.
pub const CONFIG_KEYS: &[&str] = &[
    "B0_tesla",
    "B1_tesla",
    "B2_tesla",
    "T_kelvin",
    "mass_me",
    "charge_qe",
    "trap_omega_over_omega1",
    "quad_rel_tol",
    "ode_step",
    "history_grid",
    "root_tol",
    "lambda_min",
    "lambda_max",
    "lambda_count",
    "lambda_spacing",
    "gamma_min",
    "gamma_max",
    "gamma_count",
    "gamma_spacing",
    "crossing_mode",
    "coupling",
    "validate_full",
    "dynamics_solver",
    "t_end_over_tc",
];

/// Raw `key = value` assignments, validated against [`CONFIG_KEYS`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::ConfigSyntax {
                    line: idx + 1,
                    reason: format!("expected `key = value`, found `{line}`"),
                });
            };
            map.set(key.trim(), value.trim())?;
        }
        Ok(map)
    }

    /// Parses a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(Error::ConfigSyntax {
                line: 0,
                reason: format!("override `{assignment}` is not `key=value`"),
            });
        };
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !CONFIG_KEYS.contains(&key) {
            return Err(Error::UnknownKey(key.to_string()));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn value<V: FromStr>(&self, key: &str) -> Result<Option<V>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| Error::MalformedValue {
                key: key.to_string(),
                value: v.to_string(),
            }),
        }
    }

    fn choice<V>(&self, key: &str, options: &[(&str, V)]) -> Result<Option<V>>
    where
        V: Copy,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => options
                .iter()
                .find(|(name, _)| name.eq_ignore_ascii_case(v))
                .map(|(_, value)| Some(*value))
                .ok_or_else(|| Error::MalformedValue {
                    key: key.to_string(),
                    value: v.to_string(),
                }),
        }
    }

    /// Builds a configuration on top of [`EngineConfig::reference_defaults`].
    pub fn to_config(&self) -> Result<EngineConfig<f64>> {
        let mut cfg = EngineConfig::<f64>::reference_defaults();
        let spacing = [("linear", Spacing::Linear), ("log", Spacing::Log)];
        let on_off = [
            ("on", true),
            ("true", true),
            ("1", true),
            ("off", false),
            ("false", false),
            ("0", false),
        ];
        if let Some(v) = self.value("B0_tesla")? {
            cfg.b0 = v;
        }
        if let Some(v) = self.value("B1_tesla")? {
            cfg.b1 = v;
        }
        if let Some(v) = self.value("B2_tesla")? {
            cfg.b2 = v;
        }
        if let Some(v) = self.value("T_kelvin")? {
            cfg.temperature = v;
        }
        let mass_me: f64 = self.value("mass_me")?.unwrap_or(2000.0);
        let charge_qe: f64 = self.value("charge_qe")?.unwrap_or(1.0);
        let trap: f64 = self.value("trap_omega_over_omega1")?.unwrap_or(100.0);
        cfg.mass = mass_me * M_E;
        cfg.charge = charge_qe * Q_E;
        // same operation order as reference_defaults, so defaults round-trip bit for bit
        cfg.omega_trap = trap * (cfg.charge * cfg.b1 / (2.0 * cfg.mass));

        let n = &mut cfg.numerics;
        if let Some(v) = self.value("quad_rel_tol")? {
            n.quad_rel_tol = v;
        }
        if let Some(v) = self.value("ode_step")? {
            n.ode_step = v;
        }
        if let Some(v) = self.value("history_grid")? {
            n.history_grid = v;
        }
        if let Some(v) = self.value("root_tol")? {
            n.root_tol = v;
        }
        for (prefix, grid) in [("lambda", &mut n.lambda_grid), ("gamma", &mut n.gamma_grid)] {
            if let Some(v) = self.value(&format!("{prefix}_min"))? {
                grid.min = v;
            }
            if let Some(v) = self.value(&format!("{prefix}_max"))? {
                grid.max = v;
            }
            if let Some(v) = self.value(&format!("{prefix}_count"))? {
                grid.count = v;
            }
            if let Some(v) = self.choice(&format!("{prefix}_spacing"), &spacing)? {
                grid.spacing = v;
            }
        }
        if let Some(v) = self.choice(
            "crossing_mode",
            &[
                ("exact", CrossingMode::Exact),
                ("approx", CrossingMode::Approx),
            ],
        )? {
            n.crossing_mode = v;
        }
        if let Some(v) = self.choice("coupling", &on_off)? {
            n.coupling = v;
        }
        if let Some(v) = self.choice("validate_full", &on_off)? {
            n.validate_full = v;
        }
        if let Some(v) = self.choice(
            "dynamics_solver",
            &[
                ("regimes", DynamicsSolver::Regimes),
                ("full", DynamicsSolver::Full),
            ],
        )? {
            n.dynamics_solver = v;
        }
        if let Some(v) = self.value("t_end_over_tc")? {
            n.t_end_over_tc = v;
        }
        Ok(cfg)
    }
}

/// Canonical `key = value` snapshot of a configuration, in [`CONFIG_KEYS`] order.
pub fn config_snapshot(cfg: &EngineConfig<f64>) -> Vec<(&'static str, String)> {
    let omega1 = cfg.charge * cfg.b1 / (2.0 * cfg.mass);
    let n = &cfg.numerics;
    let e = crate::io::fmt_sci;
    vec![
        ("B0_tesla", e(cfg.b0)),
        ("B1_tesla", e(cfg.b1)),
        ("B2_tesla", e(cfg.b2)),
        ("T_kelvin", e(cfg.temperature)),
        ("mass_me", e(cfg.mass / M_E)),
        ("charge_qe", e(cfg.charge / Q_E)),
        ("trap_omega_over_omega1", e(cfg.omega_trap / omega1)),
        ("quad_rel_tol", e(n.quad_rel_tol)),
        ("ode_step", e(n.ode_step)),
        ("history_grid", n.history_grid.to_string()),
        ("root_tol", e(n.root_tol)),
        ("lambda_min", e(n.lambda_grid.min)),
        ("lambda_max", e(n.lambda_grid.max)),
        ("lambda_count", n.lambda_grid.count.to_string()),
        ("lambda_spacing", n.lambda_grid.spacing.to_string()),
        ("gamma_min", e(n.gamma_grid.min)),
        ("gamma_max", e(n.gamma_grid.max)),
        ("gamma_count", n.gamma_grid.count.to_string()),
        ("gamma_spacing", n.gamma_grid.spacing.to_string()),
        ("crossing_mode", n.crossing_mode.to_string()),
        (
            "coupling",
            if n.coupling { "on" } else { "off" }.to_string(),
        ),
        (
            "validate_full",
            if n.validate_full { "on" } else { "off" }.to_string(),
        ),
        ("dynamics_solver", n.dynamics_solver.to_string()),
        ("t_end_over_tc", e(n.t_end_over_tc)),
    ]
}
