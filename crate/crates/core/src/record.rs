//! Coherent-state record written into the field by the precessing spin.
//!
//! Each mode ends up in a coherent state z_K = K_{K+} A(ω_K, t)/(2ħ) with
//!
//! ```text
//! A(ω, t) = ∫₀ᵗ e^{−iω(t−t')} r−(t') dt'
//! ```
//!
//! and all mode sums over |K_{K+}|² reduce to the same density J(ω) as the
//! kernel: N = ∫J|A|²/4 dω, E_rad = ∫ħωJ|A|²/4 dω.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::modes::SpectralDensity;
use crate::quadrature::Rule;
use crate::scalar::{count, lit, Scalar};

/// Source history of r−(t').
#[derive(Debug, Clone, Copy)]
pub enum History<'a, T> {
    /// r−(t) = c·e^{(−ξ − 2iΩ)t}.
    Exponential { c: Complex<T>, xi: T, omega: T },
    /// Piecewise-linear interpolation between samples; times ascending from 0.
    Sampled {
        times: &'a [T],
        values: &'a [Complex<T>],
    },
}

/// (e^z − 1)/z.
fn phi1<T: Scalar>(z: Complex<T>) -> Complex<T> {
    if z.norm() < lit(0.5) {
        let mut term = Complex::new(T::one(), T::zero());
        let mut sum = term;
        for n in 2..30 {
            term = term * z / count::<T>(n);
            sum = sum + term;
        }
        sum
    } else {
        (z.exp() - T::one()) / z
    }
}

/// ∫₀¹ x e^{zx} dx = (e^z(z − 1) + 1)/z².
fn phi2<T: Scalar>(z: Complex<T>) -> Complex<T> {
    if z.norm() < lit(0.5) {
        // Σ zⁿ/(n!(n + 2))
        let mut fact = Complex::new(T::one(), T::zero());
        let mut sum = fact / lit::<T>(2.0);
        for n in 1..30 {
            fact = fact * z / count::<T>(n);
            sum = sum + fact / count::<T>(n + 2);
        }
        sum
    } else {
        (z.exp() * (z - T::one()) + T::one()) / (z * z)
    }
}

/// A(ω, t) for one frequency.
pub fn coherent_amplitude<T: Scalar>(omega: T, t: T, history: &History<'_, T>) -> Complex<T> {
    let zero = Complex::new(T::zero(), T::zero());
    if t <= T::zero() {
        return zero;
    }
    match *history {
        History::Exponential {
            c,
            xi,
            omega: larmor,
        } => {
            let kappa = Complex::new(-xi, omega - lit::<T>(2.0) * larmor);
            c * Complex::from_polar(T::one(), -omega * t) * phi1(kappa * t) * t
        }
        History::Sampled { times, values } => {
            let a = Complex::new(T::zero(), omega);
            let mut acc = zero;
            for k in 0..times.len().saturating_sub(1) {
                let (t0, t1) = (times[k], times[k + 1]);
                if t0 >= t {
                    break;
                }
                let (v0, v1) = (values[k], values[k + 1]);
                let (end, v_end) = if t1 > t {
                    let f = (t - t0) / (t1 - t0);
                    (t, v0 + (v1 - v0) * f)
                } else {
                    (t1, v1)
                };
                let h = end - t0;
                if h <= T::zero() {
                    continue;
                }
                let z = a * h;
                // ∫ e^{iω(t−t_k)}… with the phase referred to t to keep |·| ≤ 1
                let base = Complex::from_polar(T::one(), omega * (t0 - t));
                acc = acc + base * (phi1(z) * v0 + phi2(z) * (v_end - v0)) * h;
            }
            acc
        }
    }
}

/// Quadrature nodes in ω shared by every record that is to be compared.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    /// J at the nodes.
    pub density: Vec<T>,
}

impl<T: Scalar> FrequencyGrid<T> {
    /// Resolves the e^{−iωt} structure up to `t_max` and the resonance at 2Ω.
    pub fn for_times(
        j: &SpectralDensity<T>,
        larmor: T,
        t_max: T,
        max_nodes: usize,
    ) -> Result<Self> {
        const ORDER: usize = 16;
        let top = j.support_max();
        let two = lit::<T>(2.0);
        let mut breaks = vec![T::zero()];
        for f in [0.5, 1.0, 2.0, 4.0] {
            breaks.push(lit::<T>(f) / j.cutoff_time);
        }
        let res = two * larmor;
        if res > T::zero() && res < top {
            breaks.push(res);
        }
        breaks.push(top);
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();

        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for piece in breaks.windows(2) {
            // one radian of e^{iωt} per panel, at least four panels
            let panels_f = ((piece[1] - piece[0]) * t_max).ceil();
            let panels = panels_f.to_usize().unwrap_or(usize::MAX).max(4);
            if panels.saturating_mul(ORDER).saturating_add(nodes.len()) > max_nodes {
                return Err(Error::Quadrature {
                    what: "record frequency grid",
                    value: (panels_f * count::<T>(ORDER))
                        .to_f64()
                        .unwrap_or(f64::INFINITY),
                    error: max_nodes as f64,
                });
            }
            let rule = Rule::composite(piece[0], piece[1], panels, ORDER);
            nodes.extend(rule.nodes);
            weights.extend(rule.weights);
        }
        let density = nodes.iter().map(|&w| j.eval(w)).collect();
        Ok(Self {
            nodes,
            weights,
            density,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Amplitude profile A(ω, t) on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiationRecord<T> {
    pub t: T,
    pub amplitude: Vec<Complex<T>>,
    grid_id: (usize, T, T),
}

impl<T: Scalar> RadiationRecord<T> {
    pub fn new(grid: &FrequencyGrid<T>, t: T, history: &History<'_, T>) -> Self {
        let amplitude = grid
            .nodes
            .par_iter()
            .map(|&w| coherent_amplitude(w, t, history))
            .collect();
        Self {
            t,
            amplitude,
            grid_id: grid_fingerprint(grid),
        }
    }

    fn check(&self, grid: &FrequencyGrid<T>) -> Result<()> {
        if self.grid_id != grid_fingerprint(grid) || self.amplitude.len() != grid.len() {
            return Err(Error::GridMismatch(
                "record was built on a different frequency grid".into(),
            ));
        }
        Ok(())
    }

    /// N(t) = ∫DK |z_K|².
    pub fn norm(&self, grid: &FrequencyGrid<T>) -> Result<T> {
        self.check(grid)?;
        Ok(weighted_sum(grid, |i, _| self.amplitude[i].norm_sqr()) / lit(4.0))
    }

    /// E_rad(t) = ∫DK ħω_K |z_K|², J.
    pub fn radiated_energy(&self, grid: &FrequencyGrid<T>, hbar: T) -> Result<T> {
        self.check(grid)?;
        Ok(hbar * weighted_sum(grid, |i, w| w * self.amplitude[i].norm_sqr()) / lit(4.0))
    }

    /// Ω_eff = −(i/2)∫J A* dω, rad/s.
    pub fn omega_eff(&self, grid: &FrequencyGrid<T>) -> Result<Complex<T>> {
        self.check(grid)?;
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..grid.len() {
            acc = acc + self.amplitude[i].conj() * (grid.weights[i] * grid.density[i]);
        }
        Ok(acc * Complex::new(T::zero(), -lit::<T>(0.5)))
    }
}

fn grid_fingerprint<T: Scalar>(grid: &FrequencyGrid<T>) -> (usize, T, T) {
    let last = grid.nodes.last().copied().unwrap_or(T::zero());
    let total = grid.weights.iter().copied().sum();
    (grid.len(), last, total)
}

fn weighted_sum<T: Scalar, F: Fn(usize, T) -> T>(grid: &FrequencyGrid<T>, f: F) -> T {
    let mut acc = T::zero();
    for i in 0..grid.len() {
        acc = acc + grid.weights[i] * grid.density[i] * f(i, grid.nodes[i]);
    }
    acc
}

/// ∫DK |z↑ − z↓|², the squared distance between two records.
pub fn record_distance<T: Scalar>(
    grid: &FrequencyGrid<T>,
    up: &RadiationRecord<T>,
    down: &RadiationRecord<T>,
) -> Result<T> {
    up.check(grid)?;
    down.check(grid)?;
    if up.t != down.t {
        return Err(Error::GridMismatch(
            "records taken at different times".into(),
        ));
    }
    Ok(weighted_sum(grid, |i, _| {
        (up.amplitude[i] - down.amplitude[i]).norm_sqr()
    }) / lit(4.0))
}

/// Coherent-state overlap exp(−½∫DK|z↑ − z↓|²) of two records.
pub fn record_overlap<T: Scalar>(
    grid: &FrequencyGrid<T>,
    up: &RadiationRecord<T>,
    down: &RadiationRecord<T>,
) -> Result<T> {
    Ok((-record_distance(grid, up, down)? / lit(2.0)).exp())
}
