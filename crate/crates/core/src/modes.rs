//! Vacuum mode integrals reduced to a scalar spectral density.
//!
//! Summing (k×ε_α)_i (k×ε_α)_j over both polarizations gives k²(δ_ij − k̂_i k̂_j).
//! Keeping only the two components transverse to the quantization axis n̂ and
//! integrating over directions yields the angular factor ∫(1 + cos²ϑ) dΩ = 16π/3,
//! so that
//!
//! ```text
//! J(ω) = μ² ω³ e^{−ω²σ²/c²} / (3π² ħ ε0 c⁵)
//! ```
//!
//! with J(ω)dω = ħ⁻² ∫DK |K_{K+}|² restricted to the shell ω_K ∈ [ω, ω + dω].
//! Every field effect on the spin enters through this density: the decay rate
//! ξ = πJ(2Ω), the self-consistent shift φ, and the memory kernel
//! H(τ) = ∫ J(ω) e^{−i(2Ω−ω)τ} dω.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::DerivedParams;
use crate::quadrature::{integrate_converged, Rule};
use crate::scalar::{count, lit, Scalar};

/// Gaussian form factor of a particle localized to width σ.
pub fn structure_function<T: Scalar>(k: T, sigma: T) -> T {
    let x = k * sigma;
    (-(x * x) / lit(2.0)).exp()
}

const GL_ORDER: usize = 16;

/// Polarization-summed, angle-integrated coupling density J(ω) = A ω³ e^{−(ωs)²}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDensity<T> {
    /// A, in s² (so that J is in 1/s per rad/s).
    pub prefactor: T,
    /// s = σ/c, in s.
    pub cutoff_time: T,
}

impl<T: Scalar> SpectralDensity<T> {
    pub fn new(prefactor: T, cutoff_time: T) -> Self {
        Self {
            prefactor,
            cutoff_time,
        }
    }

    pub fn from_params(p: &DerivedParams<T>) -> Self {
        let k = &p.constants;
        let c5 = k.c.powi(5);
        let prefactor =
            p.mu * p.mu / (lit::<T>(3.0) * T::PI() * T::PI() * k.hbar * k.epsilon_0 * c5);
        Self::new(prefactor, p.cutoff_time())
    }

    /// Coupling switched off.
    pub fn zero(cutoff_time: T) -> Self {
        Self::new(T::zero(), cutoff_time)
    }

    pub fn is_zero(&self) -> bool {
        self.prefactor == T::zero()
    }

    pub fn eval(&self, omega: T) -> T {
        if omega <= T::zero() {
            return T::zero();
        }
        let x = omega * self.cutoff_time;
        self.prefactor * omega * omega * omega * (-(x * x)).exp()
    }

    /// Frequency beyond which J is below 1e-40 of its peak.
    pub fn support_max(&self) -> T {
        lit::<T>(10.0) / self.cutoff_time
    }

    /// Location of the maximum of J, √(3/2)/s.
    pub fn peak_frequency(&self) -> T {
        lit::<T>(1.5).sqrt() / self.cutoff_time
    }

    /// Natural breakpoints of the integrand on [0, support_max].
    fn scale_breaks(&self) -> Vec<T> {
        [0.0, 0.5, 1.0, 2.0, 4.0, 10.0]
            .iter()
            .map(|&f| lit::<T>(f) / self.cutoff_time)
            .collect()
    }

    /// ∫J dω in closed form, A/(2s⁴).
    pub fn total_weight_closed(&self) -> T {
        self.prefactor / (lit::<T>(2.0) * self.cutoff_time.powi(4))
    }

    /// ∫ω J dω in closed form, 3√π A/(8s⁵).
    pub fn first_moment_closed(&self) -> T {
        lit::<T>(3.0) * T::PI().sqrt() * self.prefactor / (lit::<T>(8.0) * self.cutoff_time.powi(5))
    }

    /// On-shell decay rate π J(2Ω).
    pub fn decay_rate(&self, omega: T) -> T {
        T::PI() * self.eval(lit::<T>(2.0) * omega)
    }
}

/// J(ω) for the configured engine.
pub fn spectral_density<T: Scalar>(omega: T, p: &DerivedParams<T>) -> T {
    SpectralDensity::from_params(p).eval(omega)
}

/// ξ = π J(2Ω), the radial δ collapsed exactly on shell.
pub fn decay_rate_xi<T: Scalar>(p: &DerivedParams<T>) -> T {
    SpectralDensity::from_params(p).decay_rate(p.omega)
}

/// Decay rate and shift of the approximate Laplace pole s ≈ −ξ + iφ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleData<T> {
    pub xi: T,
    pub phi: T,
    pub converged: bool,
    /// Panel-doubling error of the final principal-value integral.
    pub phi_error: T,
    pub iterations: usize,
}

/// Principal value ∫₀^∞ J(ω)/(ω − ω₀) dω with the singular part subtracted on
/// the symmetric interval [0, 2ω₀], using a fixed panel count per piece.
pub fn principal_value_fixed<T: Scalar>(j: &SpectralDensity<T>, omega0: T, panels: usize) -> T {
    let (sym, rest) = pv_pieces(j, omega0);
    let j0 = j.eval(omega0);
    let near =
        Rule::piecewise(&sym, panels, GL_ORDER).integrate(|w| (j.eval(w) - j0) / (w - omega0));
    let far = Rule::piecewise(&rest, panels, GL_ORDER).integrate(|w| j.eval(w) / (w - omega0));
    near + far
}

fn pv_pieces<T: Scalar>(j: &SpectralDensity<T>, omega0: T) -> (Vec<T>, Vec<T>) {
    let two = lit::<T>(2.0);
    let top = j.support_max().max(two * omega0);
    let mut sym = vec![T::zero(), omega0, two * omega0];
    let mut rest = vec![two * omega0, top];
    for b in j.scale_breaks() {
        if b > T::zero() && b < two * omega0 && b != omega0 {
            sym.push(b);
            // mirror keeps the pole centred in its own piece
            let m = two * omega0 - b;
            if m > T::zero() && m != omega0 {
                sym.push(m);
            }
        } else if b > two * omega0 && b < top {
            rest.push(b);
        }
    }
    sym.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sym.dedup();
    rest.sort_by(|a, b| a.partial_cmp(b).unwrap());
    rest.dedup();
    (sym, rest)
}

fn principal_value<T: Scalar>(j: &SpectralDensity<T>, omega0: T, rel_tol: T) -> (T, T, bool) {
    let (sym, rest) = pv_pieces(j, omega0);
    let j0 = j.eval(omega0);
    let floor = T::min_positive_value();
    let near = integrate_converged(
        |w| (j.eval(w) - j0) / (w - omega0),
        &sym,
        GL_ORDER,
        rel_tol,
        floor,
    );
    let far = integrate_converged(
        |w| j.eval(w) / (w - omega0),
        &rest,
        GL_ORDER,
        rel_tol,
        floor,
    );
    let value = near.value + far.value;
    let error = near.error + far.error;
    let ok = (near.converged && far.converged) || error <= rel_tol * value.abs();
    (value, error, ok)
}

/// Self-consistent shift φ = P.V.∫ J(ω)/(ω − 2Ω − φ) dω by fixed-point iteration
/// from φ = 0.
pub fn frequency_shift_phi<T: Scalar>(
    j: &SpectralDensity<T>,
    omega: T,
    rel_tol: T,
) -> Result<PoleData<T>> {
    const MAX_ITER: usize = 50;
    let two = lit::<T>(2.0);
    let mut phi = T::zero();
    let mut converged_quad = true;
    for it in 1..=MAX_ITER {
        let (next, err, ok) = principal_value(j, two * omega + phi, rel_tol);
        converged_quad &= ok;
        let step = (next - phi).abs();
        phi = next;
        if step <= rel_tol * phi.abs() || step <= T::min_positive_value() {
            if !ok {
                return Err(Error::Quadrature {
                    what: "principal-value shift",
                    value: phi.to_f64().unwrap_or(f64::NAN),
                    error: err.to_f64().unwrap_or(f64::NAN),
                });
            }
            return Ok(PoleData {
                xi: j.decay_rate(omega),
                phi,
                converged: converged_quad,
                phi_error: err,
                iterations: it,
            });
        }
    }
    Err(Error::FixedPoint {
        what: "frequency shift",
        iterations: MAX_ITER,
    })
}

/// ξ and φ for the configured engine.
pub fn pole_data<T: Scalar>(p: &DerivedParams<T>, rel_tol: T) -> Result<PoleData<T>> {
    let j = SpectralDensity::from_params(p);
    frequency_shift_phi(&j, p.omega, rel_tol)
}

/// Memory kernel sampled on a uniform grid τ_j = j·dτ.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable<T> {
    pub dtau: T,
    pub values: Vec<Complex<T>>,
    /// H(0) = ∫J dω, real.
    pub h0: T,
    /// H'(0) = i∫(ω − 2Ω) J dω, purely imaginary.
    pub h1: Complex<T>,
    /// Larmor frequency Ω the phase factor refers to.
    pub omega: T,
    /// Largest solver step resolving both the envelope and the 2Ω phase.
    pub max_step: T,
    /// Panel-doubling error estimate at the last grid point, relative to H0.
    pub quad_error: T,
}

impl<T: Scalar> KernelTable<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tau_max(&self) -> T {
        self.dtau * count::<T>(self.values.len().saturating_sub(1))
    }

    /// Linear interpolation; negative τ uses H(−τ) = H(τ)*. `None` past the table.
    pub fn at(&self, tau: T) -> Option<Complex<T>> {
        if tau < T::zero() {
            return self.at(-tau).map(|h| h.conj());
        }
        let x = tau / self.dtau;
        let i = x.floor().to_usize()?;
        if i + 1 >= self.values.len() {
            return (i + 1 == self.values.len() && x == x.floor()).then(|| self.values[i]);
        }
        let f = x - count::<T>(i);
        Some(self.values[i] * (T::one() - f) + self.values[i + 1] * f)
    }
}

/// Single-τ kernel value by direct quadrature, any sign of τ.
pub fn evaluate_kernel<T: Scalar>(j: &SpectralDensity<T>, omega: T, tau: T) -> Complex<T> {
    let rule = kernel_rule(j, tau.abs(), 1);
    let two = lit::<T>(2.0);
    rule.integrate_complex(|w| Complex::from_polar(j.eval(w), -(two * omega - w) * tau))
}

fn kernel_rule<T: Scalar>(j: &SpectralDensity<T>, tau_max: T, refine: usize) -> Rule<T> {
    let w = j.support_max();
    // at most two radians of phase per panel at τ_max
    let panels = (w * tau_max / lit(2.0))
        .ceil()
        .to_usize()
        .unwrap_or(usize::MAX)
        .max(32);
    Rule::composite(T::zero(), w, panels * refine, GL_ORDER)
}

fn kernel_sum<T: Scalar>(
    j: &SpectralDensity<T>,
    rule: &Rule<T>,
    omega: T,
    dtau: T,
    n: usize,
) -> Vec<Complex<T>> {
    const CHUNK: usize = 256;
    let weights: Vec<T> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| w * j.eval(x))
        .collect();
    let rotation: Vec<Complex<T>> = rule
        .nodes
        .iter()
        .map(|&x| Complex::from_polar(T::one(), x * dtau))
        .collect();
    let two = lit::<T>(2.0);
    let chunks: Vec<Vec<Complex<T>>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(n);
            let tau0 = dtau * count::<T>(start);
            // phases reseeded exactly at each chunk start
            let mut phase: Vec<Complex<T>> = rule
                .nodes
                .iter()
                .map(|&x| Complex::from_polar(T::one(), x * tau0))
                .collect();
            let mut out = Vec::with_capacity(end - start);
            for idx in start..end {
                let mut acc = Complex::new(T::zero(), T::zero());
                for (ph, &wt) in phase.iter().zip(&weights) {
                    acc = acc + *ph * wt;
                }
                let tau = dtau * count::<T>(idx);
                out.push(acc * Complex::from_polar(T::one(), -two * omega * tau));
                for (ph, rot) in phase.iter_mut().zip(&rotation) {
                    *ph = *ph * *rot;
                }
            }
            out
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

/// Samples H(τ) = ∫ J(ω) e^{−i(2Ω−ω)τ} dω on `n` points spanning [0, τ_max].
pub fn memory_kernel<T: Scalar>(
    j: &SpectralDensity<T>,
    omega: T,
    tau_max: T,
    n: usize,
    rel_tol: T,
) -> Result<KernelTable<T>> {
    if n < 2 || !(tau_max > T::zero()) {
        return Err(Error::InvalidParameter {
            key: "history_grid".into(),
            reason: "kernel needs tau_max > 0 and at least two points".into(),
        });
    }
    let two = lit::<T>(2.0);
    let dtau = tau_max / count::<T>(n - 1);
    let rule = kernel_rule(j, tau_max, 1);
    let values = kernel_sum(j, &rule, omega, dtau, n);

    let floor = T::min_positive_value();
    let breaks = j.scale_breaks();
    let h0 = integrate_converged(|w| j.eval(w), &breaks, GL_ORDER, rel_tol, floor);
    let h1 = integrate_converged(
        |w| (w - two * omega) * j.eval(w),
        &breaks,
        GL_ORDER,
        rel_tol,
        floor,
    );

    // error estimate at the hardest point: the last one
    let fine = kernel_rule(j, tau_max, 2);
    let last = kernel_sum(j, &fine, omega, tau_max, 2)[1];
    let quad_error = if h0.value > T::zero() {
        (last - values[n - 1]).norm() / h0.value
    } else {
        T::zero()
    };
    if !(h0.converged && h1.converged) || quad_error > rel_tol.max(lit(1e-9)) {
        return Err(Error::Quadrature {
            what: "memory kernel",
            value: h0.value.to_f64().unwrap_or(f64::NAN),
            error: quad_error.to_f64().unwrap_or(f64::NAN),
        });
    }
    let s = j.cutoff_time;
    let max_step = s.min(T::one() / (two * omega)) / lit(20.0);
    Ok(KernelTable {
        dtau,
        values,
        h0: h0.value,
        h1: Complex::new(T::zero(), h1.value),
        omega,
        max_step,
        quad_error,
    })
}
