//! Measurement-engine cycle: work stroke, probe precession until the work-field
//! projection vanishes, switch-off, re-thermalization.

use num_complex::Complex;
use rayon::prelude::*;

use crate::dynamics::{
    crossing_time, early_time_coeffs, evolve_full, evolve_linearized, evolve_regimes, BlochState,
    FullTrajectory, SolverOptions, TrajectoryTrace,
};
use crate::error::{Error, Result};
use crate::io::{fmt_sci, CsvTable};
use crate::modes::{decay_rate_xi, memory_kernel, SpectralDensity};
use crate::params::{
    derive_params, CrossingMode, DerivedParams, DynamicsSolver, EngineConfig, GridSpec, RegimeCheck,
};
use crate::record::{record_distance, record_overlap, FrequencyGrid, History, RadiationRecord};
use crate::scalar::{count, lit, Scalar};

/// Upper bound on the record frequency grid.
pub const RECORD_MAX_NODES: usize = 4_000_000;
/// Upper bound on kernel samples for the full solver.
pub const KERNEL_MAX_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleMetrics<T> {
    pub w1: T,
    pub w2: T,
    pub e_off: T,
    pub q: T,
    pub w: T,
    /// W/E_off; `None` when E_off ≤ 0.
    pub eta: Option<T>,
    pub eta_c: T,
    /// (1 − λ) − η_c without cancellation.
    pub eta_loss: T,
    /// ln of `eta_loss`, finite even where `eta_loss` underflows.
    pub ln_eta_loss: T,
    pub xi: T,
    pub t_c: T,
    pub xi_tc: T,
    pub w_dim: T,
    pub p_dim: T,
    pub delta0_at_tc: T,
    pub state_at_tc: BlochState<T>,
    /// `None` when not requested or not resolvable on a bounded grid.
    pub e_rad_at_tc: Option<T>,
    /// E_off − W2 − Q − E_rad.
    pub first_law_residual: Option<T>,
    /// E_off − W − Q − E_rad, the balance with the work stroke included.
    pub energy_balance: Option<T>,
    /// |Δstate| between full solver and linearized solution at t_c.
    pub full_solver_delta: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleOptions {
    pub crossing_mode: CrossingMode,
    pub regime_check: RegimeCheck,
    pub with_record: bool,
    pub validate_full: bool,
}

impl CycleOptions {
    pub fn from_config<T: Scalar>(cfg: &EngineConfig<T>) -> Self {
        Self {
            crossing_mode: cfg.numerics.crossing_mode,
            regime_check: RegimeCheck::Strict,
            with_record: false,
            validate_full: cfg.numerics.validate_full,
        }
    }
}

fn stable_parts<T: Scalar>(xi_tc: T, delta_sin: T) -> (T, T) {
    let r_n0 = T::one() - delta_sin;
    // r_n0 (1 − e^{−ξt_c})
    let loss = -r_n0 * (-xi_tc).exp_m1();
    (delta_sin, loss)
}

/// η_c = (1 − λ)(1 − r_n(0))/(1 − r_n(0)e^{−ξt_c}) with r_n(0) = 1 − Δ sinθ.
pub fn efficiency_c<T: Scalar>(xi: T, t_c: T, delta: T, theta: T, lambda: T) -> T {
    let (keep, loss) = stable_parts(xi * t_c, delta * theta.sin());
    if loss == T::zero() {
        return T::one() - lambda;
    }
    (T::one() - lambda) * (keep / (keep + loss))
}

/// (1 − λ) − η_c, evaluated so that it stays positive when ξt_c is far below
/// the resolution of η_c itself.
pub fn efficiency_loss<T: Scalar>(xi: T, t_c: T, delta: T, theta: T, lambda: T) -> T {
    let (keep, loss) = stable_parts(xi * t_c, delta * theta.sin());
    if loss == T::zero() {
        return T::zero();
    }
    (T::one() - lambda) * loss / (keep + loss)
}

/// ln((1 − λ) − η_c); −∞ when ξt_c = 0.
pub fn ln_efficiency_loss<T: Scalar>(xi: T, t_c: T, delta: T, theta: T, lambda: T) -> T {
    let x = xi * t_c;
    let (keep, loss) = stable_parts(x, delta * theta.sin());
    let r_n0 = T::one() - delta * theta.sin();
    (T::one() - lambda).ln() + r_n0.ln() + (-(-x).exp_m1()).ln() - (keep + loss).ln()
}

fn decay_rate<T: Scalar>(cfg: &EngineConfig<T>, p: &DerivedParams<T>) -> T {
    if cfg.numerics.coupling {
        decay_rate_xi(p)
    } else {
        T::zero()
    }
}

fn density<T: Scalar>(cfg: &EngineConfig<T>, p: &DerivedParams<T>) -> SpectralDensity<T> {
    if cfg.numerics.coupling {
        SpectralDensity::from_params(p)
    } else {
        SpectralDensity::zero(p.cutoff_time())
    }
}

/// Cycle with the configured crossing mode and no optional diagnostics.
pub fn run_cycle<T: Scalar>(cfg: &EngineConfig<T>, mode: CrossingMode) -> Result<CycleMetrics<T>> {
    let opts = CycleOptions {
        crossing_mode: mode,
        validate_full: false,
        ..CycleOptions::from_config(cfg)
    };
    run_cycle_with(cfg, &opts)
}

pub fn run_cycle_with<T: Scalar>(
    cfg: &EngineConfig<T>,
    opts: &CycleOptions,
) -> Result<CycleMetrics<T>> {
    let p = derive_params(cfg, opts.regime_check)?;
    let xi = decay_rate(cfg, &p);
    let t_c = crossing_time(&p, xi, opts.crossing_mode, cfg.numerics.root_tol)?;
    let init = BlochState::thermal_up(&p);
    let state = evolve_linearized(init, xi, p.omega, t_c);
    let hbar = p.constants.hbar;
    let c = p.cos_theta;
    let w1 = p.delta * hbar * (p.omega1 - p.omega0);
    let e_off = hbar * p.omega2 * c * state.r3 - hbar * p.omega1 * c * state.r_plus.re;
    let delta0 = state.z_projection(&p);
    let w2 = -hbar * (p.omega1 - p.omega0) * delta0;
    let q = hbar * p.omega0 * (p.delta - delta0);
    let w = w1 + w2;
    let unit = p.energy_unit();

    let e_rad = if opts.with_record {
        let j = density(cfg, &p);
        FrequencyGrid::for_times(&j, p.omega, t_c, RECORD_MAX_NODES)
            .ok()
            .map(|grid| {
                let history = History::Exponential {
                    c: init.r_minus(),
                    xi,
                    omega: p.omega,
                };
                RadiationRecord::new(&grid, t_c, &history).radiated_energy(&grid, hbar)
            })
            .transpose()?
    } else {
        None
    };
    let full_solver_delta = if opts.validate_full {
        let sol = full_solution(cfg, &p, init, t_c)?;
        let last = *sol.trace.states.last().unwrap();
        let t_last = *sol.trace.times.last().unwrap();
        let reference = evolve_linearized(init, xi, p.omega, t_last);
        Some(
            ((last.r3 - reference.r3).powi(2) + (last.r_plus - reference.r_plus).norm_sqr()).sqrt(),
        )
    } else {
        None
    };

    Ok(CycleMetrics {
        w1,
        w2,
        e_off,
        q,
        w,
        eta: (e_off > T::zero()).then(|| w / e_off),
        eta_c: efficiency_c(xi, t_c, p.delta, p.theta, p.lambda),
        eta_loss: efficiency_loss(xi, t_c, p.delta, p.theta, p.lambda),
        ln_eta_loss: ln_efficiency_loss(xi, t_c, p.delta, p.theta, p.lambda),
        xi,
        t_c,
        xi_tc: xi * t_c,
        w_dim: w / unit,
        p_dim: w * hbar / (t_c * unit * unit),
        delta0_at_tc: delta0,
        state_at_tc: state,
        e_rad_at_tc: e_rad,
        first_law_residual: e_rad.map(|e| e_off - w2 - q - e),
        energy_balance: e_rad.map(|e| e_off - w - q - e),
        full_solver_delta,
    })
}

/// Runs the memory-kernel solver from `init` to `t_end` on a kernel sampled at
/// the solver step.
pub fn full_solution<T: Scalar>(
    cfg: &EngineConfig<T>,
    p: &DerivedParams<T>,
    init: BlochState<T>,
    t_end: T,
) -> Result<FullTrajectory<T>> {
    let j = density(cfg, p);
    let two = lit::<T>(2.0);
    let limit = j.cutoff_time.min(T::one() / (two * p.omega)) / lit(20.0);
    let step = if cfg.numerics.ode_step > T::zero() {
        cfg.numerics.ode_step
    } else {
        let n = (t_end / limit)
            .ceil()
            .max(count(cfg.numerics.history_grid.max(2) - 1));
        t_end / n
    };
    let points_f = (t_end / step).ceil() + T::one();
    let points = points_f.to_usize().unwrap_or(usize::MAX);
    if points > KERNEL_MAX_POINTS {
        return Err(Error::TooManySteps {
            steps: points,
            limit: KERNEL_MAX_POINTS,
        });
    }
    let tau_max = step * count::<T>(points - 1);
    let kernel = memory_kernel(&j, p.omega, tau_max, points, cfg.numerics.quad_rel_tol)?;
    let opts = SolverOptions {
        max_steps: KERNEL_MAX_POINTS,
        ..SolverOptions::default()
    };
    evolve_full(init, &kernel, p.omega, tau_max, step, opts)
}

fn sample_times<T: Scalar>(t_end: T, n: usize) -> Vec<T> {
    let n = n.max(1);
    (0..=n)
        .map(|i| t_end * count::<T>(i) / count::<T>(n))
        .collect()
}

fn strict_params<T: Scalar>(cfg: &EngineConfig<T>) -> Result<(DerivedParams<T>, T, T)> {
    let p = cfg.derive()?;
    let xi = decay_rate(cfg, &p);
    let t_c = crossing_time(&p, xi, cfg.numerics.crossing_mode, cfg.numerics.root_tol)?;
    Ok((p, xi, t_c))
}

/// Trajectory from the thermal state over [0, t_end_over_tc·t_c].
pub fn simulate_trajectory<T: Scalar>(cfg: &EngineConfig<T>) -> Result<TrajectoryTrace<T>> {
    let (p, xi, t_c) = strict_params(cfg)?;
    let t_end = cfg.numerics.t_end_over_tc * t_c;
    let init = BlochState::thermal_up(&p);
    match cfg.numerics.dynamics_solver {
        DynamicsSolver::Full => Ok(full_solution(cfg, &p, init, t_end)?.trace),
        DynamicsSolver::Regimes => {
            let j = density(cfg, &p);
            let h0 = j.total_weight_closed();
            let h1 = Complex::new(
                T::zero(),
                j.first_moment_closed() - lit::<T>(2.0) * p.omega * h0,
            );
            let times = sample_times(t_end, cfg.numerics.history_grid);
            if h0 == T::zero() {
                let states = times
                    .iter()
                    .map(|&t| evolve_linearized(init, xi, p.omega, t))
                    .collect();
                return Ok(TrajectoryTrace {
                    regimes: vec![crate::dynamics::Regime::Exponential; times.len()],
                    times,
                    states,
                    radiated_energy: None,
                });
            }
            let coeffs = early_time_coeffs(init, h0, h1, p.omega, xi);
            Ok(evolve_regimes(&coeffs, xi, p.omega, &times))
        }
    }
}

pub fn trajectory_csv<T: Scalar>(trace: &TrajectoryTrace<T>) -> CsvTable {
    let mut table = CsvTable::new(&["t", "r3", "re_r_plus", "im_r_plus", "r_n", "regime"]);
    let f = |x: T| fmt_sci(x.to_f64().unwrap_or(f64::NAN));
    for ((&t, s), r) in trace.times.iter().zip(&trace.states).zip(&trace.regimes) {
        table.push(vec![
            f(t),
            f(s.r3),
            f(s.r_plus.re),
            f(s.r_plus.im),
            f(s.r_n()),
            r.to_string(),
        ]);
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordRow<T> {
    pub t: T,
    pub e_rad: T,
    pub norm: T,
    pub fidelity_up_down: T,
    /// ∫DK|z↑ − z↓|², resolved where the fidelity rounds to one.
    pub distance_up_down: T,
}

/// E_rad, N and the up/down record overlap over [0, t_end_over_tc·t_c].
pub fn record_series<T: Scalar>(cfg: &EngineConfig<T>) -> Result<Vec<RecordRow<T>>> {
    let (p, xi, t_c) = strict_params(cfg)?;
    let t_end = cfg.numerics.t_end_over_tc * t_c;
    let j = density(cfg, &p);
    let grid = FrequencyGrid::for_times(&j, p.omega, t_end, RECORD_MAX_NODES)?;
    let hbar = p.constants.hbar;
    let up = BlochState::thermal_up(&p);
    let down = BlochState::thermal_down(&p);
    let rows_from =
        |times: &[T], hu: &History<'_, T>, hd: &History<'_, T>| -> Result<Vec<RecordRow<T>>> {
            times
                .iter()
                .map(|&t| {
                    let a = RadiationRecord::new(&grid, t, hu);
                    let b = RadiationRecord::new(&grid, t, hd);
                    Ok(RecordRow {
                        t,
                        e_rad: a.radiated_energy(&grid, hbar)?,
                        norm: a.norm(&grid)?,
                        fidelity_up_down: record_overlap(&grid, &a, &b)?,
                        distance_up_down: record_distance(&grid, &a, &b)?,
                    })
                })
                .collect()
        };
    match cfg.numerics.dynamics_solver {
        DynamicsSolver::Regimes => {
            let times = sample_times(t_end, cfg.numerics.history_grid);
            let hu = History::Exponential {
                c: up.r_minus(),
                xi,
                omega: p.omega,
            };
            let hd = History::Exponential {
                c: down.r_minus(),
                xi,
                omega: p.omega,
            };
            rows_from(&times, &hu, &hd)
        }
        DynamicsSolver::Full => {
            let su = full_solution(cfg, &p, up, t_end)?.trace;
            let sd = full_solution(cfg, &p, down, t_end)?.trace;
            let vu: Vec<Complex<T>> = su.states.iter().map(|s| s.r_minus()).collect();
            let vd: Vec<Complex<T>> = sd.states.iter().map(|s| s.r_minus()).collect();
            let hu = History::Sampled {
                times: &su.times,
                values: &vu,
            };
            let hd = History::Sampled {
                times: &sd.times,
                values: &vd,
            };
            let times = sample_times(*su.times.last().unwrap(), cfg.numerics.history_grid);
            rows_from(&times, &hu, &hd)
        }
    }
}

pub fn record_csv<T: Scalar>(rows: &[RecordRow<T>]) -> CsvTable {
    let mut table = CsvTable::new(&["t", "E_rad_J", "norm", "fidelity_up_down"]);
    let f = |x: T| fmt_sci(x.to_f64().unwrap_or(f64::NAN));
    for r in rows {
        table.push(vec![f(r.t), f(r.e_rad), f(r.norm), f(r.fidelity_up_down)]);
    }
    table
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T> {
    pub lambda: T,
    pub gamma: T,
    pub outcome: std::result::Result<CycleMetrics<T>, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable<T> {
    pub lambdas: Vec<T>,
    pub gammas: Vec<T>,
    /// λ-major: row i·|γ| + k holds (λ_i, γ_k).
    pub rows: Vec<SweepRow<T>>,
}

impl<T: Scalar> SweepTable<T> {
    pub fn row(&self, i_lambda: usize, i_gamma: usize) -> &SweepRow<T> {
        &self.rows[i_lambda * self.gammas.len() + i_gamma]
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut table = CsvTable::new(&[
            "lambda", "gamma", "xi_per_s", "t_c_s", "xi_tc", "eta_c", "W_dim", "P_dim", "status",
        ]);
        let f = |x: T| fmt_sci(x.to_f64().unwrap_or(f64::NAN));
        for r in &self.rows {
            let mut row = vec![f(r.lambda), f(r.gamma)];
            match &r.outcome {
                Ok(m) => {
                    row.extend([m.xi, m.t_c, m.xi_tc, m.eta_c, m.w_dim, m.p_dim].map(f));
                    row.push("ok".into());
                }
                Err(e) => {
                    row.extend(std::iter::repeat("nan".to_string()).take(6));
                    row.push(e.replace([',', '\n'], ";"));
                }
            }
            table.push(row);
        }
        table
    }
}

/// Parallelism requested through `SPINOTTO_THREADS`; 0 or unset means automatic.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("SPINOTTO_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs one cycle per (λ, γ) with B1 fixed, B0 = λB1, B2 = B1/γ.
pub fn sweep<T: Scalar>(
    cfg: &EngineConfig<T>,
    lambda_grid: &GridSpec<T>,
    gamma_grid: &GridSpec<T>,
    threads: Option<usize>,
) -> Result<SweepTable<T>> {
    lambda_grid.validate("lambda")?;
    gamma_grid.validate("gamma")?;
    let lambdas = lambda_grid.points();
    let gammas = gamma_grid.points();
    let opts = CycleOptions::from_config(cfg);
    let points: Vec<(T, T)> = lambdas
        .iter()
        .flat_map(|&l| gammas.iter().map(move |&g| (l, g)))
        .collect();
    let run = || -> Vec<SweepRow<T>> {
        points
            .par_iter()
            .map(|&(lambda, gamma)| SweepRow {
                lambda,
                gamma,
                outcome: run_cycle_with(&cfg.with_ratios(lambda, gamma), &opts)
                    .map_err(|e| e.to_string()),
            })
            .collect()
    };
    let rows = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter {
                key: "SPINOTTO_THREADS".into(),
                reason: e.to_string(),
            })?
            .install(run),
        None => run(),
    };
    Ok(SweepTable {
        lambdas,
        gammas,
        rows,
    })
}
