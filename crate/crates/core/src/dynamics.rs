//! Reduced spin dynamics under the vacuum memory kernel.
//!
//! The state is the Bloch parameterization along the total-field axis n̂:
//! ρ_S = ½[1 + r3 σ_n + r+ σ+ + r− σ−], with r_n = 1 − r3 and the rotating-frame
//! coherence r̄+ = e^{−2iΩt} r+. Three generators are provided: the full
//! integro-differential equations, the linearized exponential stage and the
//! early-time Gaussian stage.

use std::fmt;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::modes::KernelTable;
use crate::params::{CrossingMode, DerivedParams};
use crate::scalar::{count, lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState<T> {
    /// Projection along n̂.
    pub r3: T,
    /// Lab-frame coherence; r− = r+*.
    pub r_plus: Complex<T>,
}

impl<T: Scalar> BlochState<T> {
    pub fn new(r3: T, r_plus: Complex<T>) -> Self {
        Self { r3, r_plus }
    }

    /// Thermal state polarized along z, seen from the tilted axis n̂.
    pub fn thermal_up(p: &DerivedParams<T>) -> Self {
        Self::new(
            p.delta * p.sin_theta,
            Complex::new(p.delta * p.cos_theta, T::zero()),
        )
    }

    /// Same polarization pointing along −z.
    pub fn thermal_down(p: &DerivedParams<T>) -> Self {
        let up = Self::thermal_up(p);
        Self::new(-up.r3, -up.r_plus)
    }

    pub fn r_n(&self) -> T {
        T::one() - self.r3
    }

    pub fn r_minus(&self) -> Complex<T> {
        self.r_plus.conj()
    }

    /// r̄+ = e^{−2iΩt} r+.
    pub fn rotating(&self, t: T, omega: T) -> Complex<T> {
        self.r_plus * Complex::from_polar(T::one(), -lit::<T>(2.0) * omega * t)
    }

    pub fn norm_sq(&self) -> T {
        self.r3 * self.r3 + self.r_plus.norm_sqr()
    }

    /// Same work-field projection as Δ0 = cosθ Re r+ + sinθ r3.
    pub fn z_projection(&self, p: &DerivedParams<T>) -> T {
        p.cos_theta * self.r_plus.re + p.sin_theta * self.r3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Early,
    Exponential,
    FullSolver,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Early => "early",
            Regime::Exponential => "exponential",
            Regime::FullSolver => "full-solver",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTrace<T> {
    pub times: Vec<T>,
    pub states: Vec<BlochState<T>>,
    pub regimes: Vec<Regime>,
    pub radiated_energy: Option<Vec<T>>,
}

impl<T: Scalar> TrajectoryTrace<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Options for [`evolve_full`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    /// History beyond this lag is dropped; `None` integrates the full history.
    pub memory_cutoff: Option<T>,
    pub max_steps: usize,
    /// Allowed excess of r3² + |r+|² over one.
    pub norm_tol: T,
    pub corrector_passes: usize,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            memory_cutoff: None,
            max_steps: 100_000,
            norm_tol: lit(1e-9),
            corrector_passes: 2,
        }
    }
}

/// Output of the full solver.
///
/// The solver integrates the deviations u = r_n − r_n(0) and v = r̄+ − r̄+(0)
/// so that decay far below the initial magnitude's last digit stays resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct FullTrajectory<T> {
    pub trace: TrajectoryTrace<T>,
    pub step: T,
    pub r_n0: T,
    pub rbar0: Complex<T>,
    pub dev_n: Vec<T>,
    pub dev_rbar: Vec<Complex<T>>,
}

impl<T: Scalar> FullTrajectory<T> {
    /// −ln(r_n(t_k)/r_n(0)) computed from the stored deviation.
    pub fn log_decay_n(&self, k: usize) -> T {
        -(self.dev_n[k] / self.r_n0).ln_1p()
    }

    /// r_n(t_k)/r_n(0) − 1.
    pub fn relative_change_n(&self, k: usize) -> T {
        self.dev_n[k] / self.r_n0
    }

    pub fn rbar(&self, k: usize) -> Complex<T> {
        self.rbar0 + self.dev_rbar[k]
    }
}

fn kernel_samples<T: Scalar>(
    kernel: &KernelTable<T>,
    step: T,
    n: usize,
) -> Result<Vec<Complex<T>>> {
    let ratio = step / kernel.dtau;
    let r = ratio.round();
    let exact = r >= T::one() && (ratio - r).abs() <= lit::<T>(1e-9) * r;
    let stride = r.to_usize().unwrap_or(0);
    (0..n)
        .map(|m| {
            if exact && m * stride < kernel.len() {
                return Ok(kernel.values[m * stride]);
            }
            let tau = step * count::<T>(m);
            kernel.at(tau).ok_or_else(|| Error::KernelTooShort {
                covered: kernel.tau_max().to_f64().unwrap_or(f64::NAN),
                required: tau.to_f64().unwrap_or(f64::NAN),
            })
        })
        .collect()
}

/// Integrates the coupled memory equations for r_n and r̄+,
///
/// ```text
/// ṙ_n = −Re ∫₀ᵗ H(t−t') [ r̄+(t')(r̄−(t) − r̄−(t')) + r_n(t') ] dt'
/// d r̄+/dt = −∫₀ᵗ H(t−t') r̄+(t') [ 1 + r_n(t') e^{−2iΩ(t−t')} − r_n(t) ] dt'
/// ```
///
/// with a trapezoidal history sum and an AB2 predictor followed by trapezoidal
/// corrector passes.
pub fn evolve_full<T: Scalar>(
    init: BlochState<T>,
    kernel: &KernelTable<T>,
    omega: T,
    t_end: T,
    step: T,
    opts: SolverOptions<T>,
) -> Result<FullTrajectory<T>> {
    let bad = |x: T| x.to_f64().unwrap_or(f64::NAN);
    if !(step > T::zero()) || !(t_end > T::zero()) {
        return Err(Error::InvalidParameter {
            key: "ode_step".into(),
            reason: "step and end time must be positive".into(),
        });
    }
    if step > kernel.max_step * (T::one() + lit(1e-9)) {
        return Err(Error::StepTooCoarse {
            step: bad(step),
            limit: bad(kernel.max_step),
        });
    }
    let norm0 = init.norm_sq();
    if norm0 > T::one() + opts.norm_tol {
        return Err(Error::InvariantViolation {
            t: 0.0,
            norm: bad(norm0),
        });
    }
    let steps_f = (t_end / step).ceil();
    let steps = steps_f.to_usize().unwrap_or(usize::MAX);
    if steps > opts.max_steps {
        return Err(Error::TooManySteps {
            steps,
            limit: opts.max_steps,
        });
    }
    let memory = match opts.memory_cutoff {
        Some(cut) => ((cut / step).floor().to_usize().unwrap_or(steps)).min(steps),
        None => steps,
    };
    let h_s = kernel_samples(kernel, step, memory + 1)?;
    let two = lit::<T>(2.0);
    let half = lit::<T>(0.5);
    let phase: Vec<Complex<T>> = (0..=memory)
        .map(|m| Complex::from_polar(T::one(), -two * omega * step * count::<T>(m)))
        .collect();

    let r_n0 = init.r_n();
    let p0 = init.r_plus;
    let zero_c = Complex::new(T::zero(), T::zero());
    let mut u = vec![T::zero(); steps + 1];
    let mut v = vec![zero_c; steps + 1];
    let mut f_n = vec![T::zero(); steps + 1];
    let mut f_p = vec![zero_c; steps + 1];

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(T::zero());
    states.push(init);

    for k in 0..steps {
        let next = k + 1;
        let lo = next.saturating_sub(memory);
        // history sums over j = lo..=k for the point k + 1
        let mut s1 = zero_c;
        let mut s2 = zero_c;
        let mut s3 = zero_c;
        let mut s4 = zero_c;
        for j in lo..=k {
            let w = if j == 0 || (opts.memory_cutoff.is_some() && j == lo) {
                half
            } else {
                T::one()
            };
            let lag = next - j;
            let hk = h_s[lag] * w;
            let p_j = p0 + v[j];
            let n_j = r_n0 + u[j];
            let hp = hk * p_j;
            s1 = s1 + hp;
            s2 = s2 + hp * v[j].conj();
            s3 = s3 + hp * phase[lag] * n_j;
            s4 = s4 + hk * n_j;
        }
        let h00 = h_s[0] * half;
        let derivs = |u1: T, v1: Complex<T>| -> (T, Complex<T>) {
            let n1 = r_n0 + u1;
            let p1 = p0 + v1;
            let fnn = -(v1.conj() * s1 - s2 + s4 + h00 * n1).re * step;
            let fpp = -(s1 * (T::one() - n1) + s3 + h00 * p1) * step;
            (fnn, fpp)
        };
        let (mut u1, mut v1) = if k == 0 {
            (u[k] + f_n[k] * step, v[k] + f_p[k] * step)
        } else {
            (
                u[k] + (f_n[k] * lit::<T>(3.0) - f_n[k - 1]) * (step * half),
                v[k] + (f_p[k] * lit::<T>(3.0) - f_p[k - 1]) * (step * half),
            )
        };
        let mut d = derivs(u1, v1);
        for _ in 0..opts.corrector_passes.max(1) {
            u1 = u[k] + (f_n[k] + d.0) * (step * half);
            v1 = v[k] + (f_p[k] + d.1) * (step * half);
            d = derivs(u1, v1);
        }
        u[next] = u1;
        v[next] = v1;
        f_n[next] = d.0;
        f_p[next] = d.1;

        let t = step * count::<T>(next);
        let rbar = p0 + v1;
        let state = BlochState::new(
            T::one() - (r_n0 + u1),
            rbar * Complex::from_polar(T::one(), two * omega * t),
        );
        let norm = state.norm_sq();
        if !(norm <= T::one() + opts.norm_tol) {
            return Err(Error::InvariantViolation {
                t: bad(t),
                norm: bad(norm),
            });
        }
        times.push(t);
        states.push(state);
    }
    let regimes = vec![Regime::FullSolver; times.len()];
    Ok(FullTrajectory {
        trace: TrajectoryTrace {
            times,
            states,
            regimes,
            radiated_energy: None,
        },
        step,
        r_n0,
        rbar0: p0,
        dev_n: u,
        dev_rbar: v,
    })
}

/// Exponential stage: r̄± and r_n decay as e^{−ξt}, precession at 2Ω in the lab.
pub fn evolve_linearized<T: Scalar>(init: BlochState<T>, xi: T, omega: T, t: T) -> BlochState<T> {
    let decay = (-xi * t).exp();
    let r_n0 = init.r_n();
    // r3 = 1 − r_n0 e^{−ξt}, written without cancellation
    let r3 = init.r3 - r_n0 * (-xi * t).exp_m1();
    let r_plus = init.r_plus * Complex::from_polar(decay, lit::<T>(2.0) * omega * t);
    BlochState::new(r3, r_plus)
}

/// Short-time Taylor data of the ansatz r_z = r_z(0)e^{−f}, r̄+ = r̄+(0)e^{−g}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyTimeCoeffs<T> {
    pub a2: T,
    pub a3: T,
    pub b2: T,
    pub b3: Complex<T>,
    pub t_star: T,
    pub amp_factor: T,
    pub r_z0: T,
    pub rbar0: Complex<T>,
}

impl<T: Scalar> EarlyTimeCoeffs<T> {
    /// Gaussian branch r_z(0) e^{−H0 t²/2}.
    pub fn r_n_at(&self, t: T) -> T {
        self.r_z0 * (-(self.a2 * t * t) / lit(2.0) - self.a3 * t * t * t / lit(6.0)).exp()
    }

    /// r̄+(0) e^{−(b2 t²/2 + b3 t³/6)}.
    pub fn rbar_at(&self, t: T) -> Complex<T> {
        let g =
            Complex::new(self.b2 * t * t / lit(2.0), T::zero()) + self.b3 * (t * t * t / lit(6.0));
        self.rbar0 * (-g).exp()
    }
}

/// Taylor coefficients of f and g.
///
/// With H(τ) ≈ H0 + H1 τ the memory equations give a2 = b2 = H0, a3 = Re H1 and
/// b3 = H1 − 2iΩ H0 r_z(0).
pub fn early_time_coeffs<T: Scalar>(
    init: BlochState<T>,
    h0: T,
    h1: Complex<T>,
    omega: T,
    xi: T,
) -> EarlyTimeCoeffs<T> {
    let r_z0 = init.r_n();
    let two = lit::<T>(2.0);
    let b3 = h1 - Complex::new(T::zero(), two * omega * h0 * r_z0);
    let (t_star, _) = matching_point(xi, h0, r_z0);
    EarlyTimeCoeffs {
        a2: h0,
        a3: (h1 + h1.conj()).re / two,
        b2: h0,
        b3,
        t_star,
        amp_factor: (xi * xi / (two * h0)).exp(),
        r_z0,
        rbar0: init.r_plus,
    }
}

/// Time t* = ξ/H0 where the Gaussian and exponential branches share value and
/// slope, and the exponential amplitude r_z(0) e^{ξ²/2H0}.
pub fn matching_point<T: Scalar>(xi: T, h0: T, r_z0: T) -> (T, T) {
    let t_star = xi / h0;
    (t_star, r_z0 * (xi * xi / (lit::<T>(2.0) * h0)).exp())
}

/// Gaussian branch up to t*, matched exponential branch afterwards.
pub fn evolve_regimes<T: Scalar>(
    coeffs: &EarlyTimeCoeffs<T>,
    xi: T,
    omega: T,
    times: &[T],
) -> TrajectoryTrace<T> {
    let two = lit::<T>(2.0);
    let mut states = Vec::with_capacity(times.len());
    let mut regimes = Vec::with_capacity(times.len());
    for &t in times {
        let frame = Complex::from_polar(T::one(), two * omega * t);
        if t <= coeffs.t_star {
            let r_n = coeffs.r_n_at(t);
            states.push(BlochState::new(T::one() - r_n, coeffs.rbar_at(t) * frame));
            regimes.push(Regime::Early);
        } else {
            let decay = coeffs.amp_factor * (-xi * t).exp();
            let r_n = coeffs.r_z0 * decay;
            states.push(BlochState::new(
                T::one() - r_n,
                coeffs.rbar0 * decay * frame,
            ));
            regimes.push(Regime::Exponential);
        }
    }
    TrajectoryTrace {
        times: times.to_vec(),
        states,
        regimes,
        radiated_energy: None,
    }
}

/// Closed-form switch-off time arccos(−γ²)/(2Ω).
pub fn crossing_time_approx<T: Scalar>(gamma: T, omega: T) -> T {
    (-(gamma * gamma)).acos() / (lit::<T>(2.0) * omega)
}

/// First instant at which the work-field projection Δ0 vanishes on the
/// exponential-stage trajectory started from the tilted thermal state.
pub fn crossing_time<T: Scalar>(
    p: &DerivedParams<T>,
    xi: T,
    mode: CrossingMode,
    root_tol: T,
) -> Result<T> {
    if mode == CrossingMode::Approx {
        return Ok(crossing_time_approx(p.gamma, p.omega));
    }
    let init = BlochState::thermal_up(p);
    let proj = |t: T| evolve_linearized(init, xi, p.omega, t).z_projection(p);
    let two = lit::<T>(2.0);
    let r_n0 = init.r_n();
    // d/dt of the projection along the same trajectory
    let slope = |t: T| {
        let decay = (-xi * t).exp();
        let ph = two * p.omega * t;
        p.cos_theta * init.r_plus.re * decay * (-xi * ph.cos() - two * p.omega * ph.sin())
            + p.sin_theta * r_n0 * xi * decay
    };
    let horizon = lit::<T>(4.0) * T::PI() / p.omega;
    const SCAN: usize = 1024;
    let dt = horizon / count::<T>(SCAN);
    let mut a = T::zero();
    let mut fa = proj(a);
    let mut da = slope(a);
    let mut tangent = None;
    for i in 1..=SCAN {
        let b = dt * count::<T>(i);
        let fb = proj(b);
        let db = slope(b);
        if fa > T::zero() && fb <= T::zero() {
            let root = bisect(proj, a, b, root_tol);
            // rounding can cut a double root into two close simple ones
            let c = b + dt;
            if da < T::zero() && slope(c) >= T::zero() {
                let t_min = bisect(|t| -slope(t), a, c, root_tol);
                if proj(t_min).abs() <= root_tol {
                    return Ok(t_min);
                }
            }
            return Ok(root);
        }
        if tangent.is_none() && da < T::zero() && db >= T::zero() {
            // local minimum: a double root when it touches zero within root_tol
            let t_min = bisect(|t| -slope(t), a, b, root_tol);
            if proj(t_min).abs() <= root_tol {
                tangent = Some(t_min);
            }
        }
        a = b;
        fa = fb;
        da = db;
    }
    tangent.ok_or(Error::CrossingNotFound {
        horizon: horizon.to_f64().unwrap_or(f64::NAN),
    })
}

fn bisect<T: Scalar, F: Fn(T) -> T>(f: F, mut lo: T, mut hi: T, tol: T) -> T {
    let half = lit::<T>(0.5);
    for _ in 0..200 {
        let mid = (lo + hi) * half;
        let fm = f(mid);
        if fm == T::zero() {
            return mid;
        }
        if fm > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        let width = hi - lo;
        if width <= tol * lit::<T>(1e-3) * hi || width <= T::eps() * hi {
            break;
        }
    }
    (lo + hi) * half
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{memory_kernel, SpectralDensity};
    use crate::params::EngineConfig;

    fn toy_kernel(prefactor: f64, omega: f64, tau_max: f64, n: usize) -> KernelTable<f64> {
        memory_kernel(
            &SpectralDensity::new(prefactor, 1.0),
            omega,
            tau_max,
            n,
            1e-10,
        )
        .unwrap()
    }

    #[test]
    fn zero_kernel_keeps_rotating_frame_constant() {
        let kernel = toy_kernel(0.0, 0.5, 10.0, 201);
        let init = BlochState::new(0.3, Complex::new(0.4, 0.2));
        let sol = evolve_full(
            init,
            &kernel,
            0.5,
            10.0,
            kernel.dtau,
            SolverOptions::default(),
        )
        .unwrap();
        for (k, (&t, s)) in sol.trace.times.iter().zip(&sol.trace.states).enumerate() {
            assert_eq!(sol.dev_n[k], 0.0);
            assert!((s.rotating(t, 0.5) - init.r_plus).norm() < 1e-13);
            assert!((s.r3 - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn fixed_point_is_stationary() {
        let kernel = toy_kernel(5e-3, 0.5, 20.0, 401);
        let init = BlochState::new(1.0, Complex::new(0.0, 0.0));
        let sol = evolve_full(
            init,
            &kernel,
            0.5,
            20.0,
            kernel.dtau,
            SolverOptions::default(),
        )
        .unwrap();
        for s in &sol.trace.states {
            assert!(s.r_n().abs() < 1e-12 && s.r_plus.norm() < 1e-12);
        }
        let lin = evolve_linearized(init, 0.3, 0.5, 7.0);
        assert_eq!(lin.r_n(), 0.0);
        assert_eq!(lin.r_plus.norm(), 0.0);
        let coeffs = early_time_coeffs(init, kernel.h0, kernel.h1, 0.5, 0.01);
        assert_eq!(coeffs.r_n_at(0.3), 0.0);
    }

    #[test]
    fn rejects_coarse_steps_and_short_kernels() {
        let kernel = toy_kernel(5e-3, 0.5, 5.0, 101);
        let init = BlochState::new(0.5, Complex::new(0.5, 0.0));
        let too_coarse = kernel.max_step * 2.0;
        assert!(matches!(
            evolve_full(
                init,
                &kernel,
                0.5,
                4.0,
                too_coarse,
                SolverOptions::default()
            ),
            Err(Error::StepTooCoarse { .. })
        ));
        assert!(matches!(
            evolve_full(
                init,
                &kernel,
                0.5,
                8.0,
                kernel.dtau,
                SolverOptions::default()
            ),
            Err(Error::KernelTooShort { .. })
        ));
        let bad = BlochState::new(0.9, Complex::new(0.9, 0.0));
        assert!(matches!(
            evolve_full(
                bad,
                &kernel,
                0.5,
                4.0,
                kernel.dtau,
                SolverOptions::default()
            ),
            Err(Error::InvariantViolation { .. })
        ));
    }

    #[test]
    fn linearized_limits() {
        let init = BlochState::<f64>::new(0.4, Complex::new(0.5, 0.1));
        assert_eq!(evolve_linearized(init, 0.2, 3.0, 0.0), init);
        let free = evolve_linearized(init, 0.0, 3.0, 0.7);
        assert_eq!(free.r3, 0.4);
        assert!((free.r_plus.norm() - init.r_plus.norm()).abs() < 1e-15);
        let expected = init.r_plus * Complex::from_polar(1.0, 2.0 * 3.0 * 0.7);
        assert!((free.r_plus - expected).norm() < 1e-15);
        let xi = 0.25;
        let one_e = evolve_linearized(init, xi, 3.0, 1.0 / xi);
        let e = std::f64::consts::E;
        assert!((one_e.r_n() - init.r_n() / e).abs() < 1e-15);
        assert!((one_e.r_plus.norm() - init.r_plus.norm() / e).abs() < 1e-15);
    }

    #[test]
    fn early_coefficients() {
        let init = BlochState::<f64>::new(0.2, Complex::new(0.6, 0.0));
        let h1 = Complex::new(0.0, -0.3);
        let c = early_time_coeffs(init, 2.0, h1, 1.5, 0.1);
        assert_eq!(c.a2, 2.0);
        assert_eq!(c.b2, 2.0);
        assert_eq!(c.a3, 0.0);
        assert!((c.b3 - Complex::new(0.0, -0.3 - 2.0 * 1.5 * 2.0 * 0.8)).norm() < 1e-15);
        // f'(0) = 0
        let h = 1e-6;
        let slope = (c.r_n_at(h) - c.r_n_at(-h)) / (2.0 * h);
        assert!(slope.abs() < 1e-9);
    }

    #[test]
    fn matching_limits_and_continuity() {
        let (t, f) = matching_point(0.0f64, 3.0, 0.7);
        assert_eq!((t, f), (0.0, 0.7));
        for &(xi, h0) in &[(0.05f64, 2.0f64), (1e-3, 1e2), (0.4, 0.9)] {
            let r_z0 = 0.6;
            let (ts, amp) = matching_point(xi, h0, r_z0);
            let gauss = r_z0 * (-h0 * ts * ts / 2.0).exp();
            let expo = amp * (-xi * ts).exp();
            let gauss_slope = -h0 * ts * gauss;
            let expo_slope = -xi * expo;
            assert!(((gauss - expo) / gauss).abs() < 1e-10);
            assert!(((gauss_slope - expo_slope) / gauss_slope).abs() < 1e-10);
        }
    }

    #[test]
    fn early_cubic_phase_matches_solver() {
        // resolved toy problem: memory time 1, Ω = 0.5
        let omega = 0.5;
        let kernel = toy_kernel(5e-3, omega, 1.0, 2001);
        let init = BlochState::new(0.3, Complex::new(0.5, 0.0));
        let sol = evolve_full(
            init,
            &kernel,
            omega,
            0.2,
            kernel.dtau,
            SolverOptions::default(),
        )
        .unwrap();
        let c = early_time_coeffs(init, kernel.h0, kernel.h1, omega, 0.0);
        let k = 300;
        let t = sol.trace.times[k];
        // −ln(r̄+/r̄+(0)) = b2 t²/2 + b3 t³/6 + O(t⁴)
        let g = -(sol.dev_rbar[k] / sol.rbar0).ln_1p_complex();
        let predicted = Complex::new(c.b2 * t * t / 2.0, 0.0) + c.b3 * (t * t * t / 6.0);
        assert!(
            ((g.im - predicted.im) / predicted.im).abs() < 0.05,
            "{g} vs {predicted}"
        );
        assert!(
            ((g.re - predicted.re) / predicted.re).abs() < 0.05,
            "{g} vs {predicted}"
        );
        // the opposite sign on H1 misses the phase
        let flipped = -(kernel.h1 + Complex::new(0.0, 2.0 * omega * kernel.h0 * init.r_n()));
        assert!(((g.im - flipped.im * t * t * t / 6.0) / g.im).abs() > 0.2);
    }

    trait Ln1p {
        fn ln_1p_complex(self) -> Self;
    }

    impl Ln1p for Complex<f64> {
        fn ln_1p_complex(self) -> Self {
            // accurate for small arguments
            if self.norm() < 1e-4 {
                self - self * self / 2.0 + self * self * self / 3.0
            } else {
                (self + 1.0).ln()
            }
        }
    }

    #[test]
    fn approx_crossing_limits() {
        let omega = 2.0;
        let pi = std::f64::consts::PI;
        assert!((crossing_time_approx(1e-9, omega) / (pi / (4.0 * omega)) - 1.0).abs() < 1e-9);
        assert!((crossing_time_approx(1.0, omega) / (pi / (2.0 * omega)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_crossing_matches_approx_without_decay() {
        let mut cfg = EngineConfig::<f64>::reference_defaults();
        for &b2 in &[0.2, 1.0, 10.0, 3e8] {
            cfg.b2 = b2;
            let p = cfg.derive().unwrap();
            let exact = crossing_time(&p, 0.0, CrossingMode::Exact, 1e-12).unwrap();
            let approx = crossing_time(&p, 0.0, CrossingMode::Approx, 1e-12).unwrap();
            assert!(((exact - approx) / approx).abs() < 1e-10, "b2 = {b2}");
            let z =
                evolve_linearized(BlochState::thermal_up(&p), 0.0, p.omega, exact).z_projection(&p);
            assert!(z.abs() <= 1e-12);
        }
    }

    #[test]
    fn tangent_crossing() {
        let mut cfg = EngineConfig::<f64>::reference_defaults();
        cfg.b2 = cfg.b1;
        let p = cfg.derive().unwrap();
        let t = crossing_time(&p, 0.0, CrossingMode::Exact, 1e-12).unwrap();
        let quarter = std::f64::consts::PI / (2.0 * p.omega);
        assert!((t / quarter - 1.0).abs() < 1e-12, "{t} {quarter}");
        // strong decay lifts the minimum off zero
        assert!(matches!(
            crossing_time(&p, 1e3, CrossingMode::Exact, 1e-12),
            Err(Error::CrossingNotFound { .. })
        ));
    }
}
