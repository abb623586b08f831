//! Independent reference computations used by the integration and acceptance
//! tests. Nothing here calls the library's density or decay-rate code.
#![allow(dead_code)]

use num_complex::Complex64 as C;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const C_LIGHT: f64 = 299_792_458.0;
pub const EPS0: f64 = 8.854_187_812_8e-12;
pub const M_E: f64 = 9.109_383_701_5e-31;
pub const Q_E: f64 = 1.602_176_634e-19;

pub type V3 = [f64; 3];

fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn unit(a: V3) -> V3 {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Two unit vectors spanning the plane perpendicular to `n`.
pub fn transverse_pair(n: V3) -> (V3, V3) {
    let helper = if n[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let e1 = unit(cross(n, helper));
    let e2 = cross(n, e1);
    (e1, e2)
}

/// Gauss–Legendre rule on [-1, 1] via Golub–Welsch-free Newton iteration,
/// kept separate from the library's implementation.
pub fn gl(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (p0 - x * p1) / (1.0 - x * x);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    Linear,
    Circular,
}

/// Physical inputs of the oracle, SI.
#[derive(Debug, Clone, Copy)]
pub struct Particle {
    pub mu: f64,
    pub sigma: f64,
}

impl Particle {
    /// m = 2000 mₑ, q = qₑ, ω_trap = 100 qB1/2m.
    pub fn reference(b1: f64) -> Self {
        let m = 2000.0 * M_E;
        let omega1 = Q_E * b1 / (2.0 * m);
        Self {
            mu: Q_E * HBAR / (2.0 * m),
            sigma: (HBAR / (m * 100.0 * omega1)).sqrt(),
        }
    }
}

/// Σ_α |K_{K+}|² for one wave vector, with K_{K+} = K·e1 − iK·e2 and
/// K = μ√(ħ/ε0c) F[k] (k × ε_α)/√(2k).
pub fn coupling_sq(p: &Particle, k: V3, n: V3, pol: Polarization) -> f64 {
    let kk = dot(k, k).sqrt();
    let khat = [k[0] / kk, k[1] / kk, k[2] / kk];
    let (a1, a2) = transverse_pair(khat);
    let (e1, e2) = transverse_pair(n);
    let f = (-(kk * p.sigma).powi(2) / 2.0).exp();
    let pref = p.mu * (HBAR / (EPS0 * C_LIGHT)).sqrt() * f / (2.0 * kk).sqrt();
    let pols: [[C; 3]; 2] = match pol {
        Polarization::Linear => [a1.map(|x| C::new(x, 0.0)), a2.map(|x| C::new(x, 0.0))],
        Polarization::Circular => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let plus = [0, 1, 2].map(|i| C::new(a1[i] * s, a2[i] * s));
            let minus = [0, 1, 2].map(|i| C::new(a1[i] * s, -a2[i] * s));
            [plus, minus]
        }
    };
    let mut total = 0.0;
    for eps in pols {
        // k × ε with complex ε
        let kx = [
            k[1] * eps[2] - k[2] * eps[1],
            k[2] * eps[0] - k[0] * eps[2],
            k[0] * eps[1] - k[1] * eps[0],
        ];
        let c1 = kx[0] * e1[0] + kx[1] * e1[1] + kx[2] * e1[2];
        let c2 = kx[0] * e2[0] + kx[1] * e2[1] + kx[2] * e2[2];
        let kplus = (c1 - C::new(0.0, 1.0) * c2) * pref;
        total += kplus.norm_sqr();
    }
    total
}

/// ħ⁻² ∫d³k/(2π)³ Σ_α |K_{K+}|² δ_ε(ω − ck) by direct quadrature in k-space,
/// with a Gaussian δ of width `eps` (rad/s).
pub fn mode_density_3d(p: &Particle, omega: f64, n: V3, pol: Polarization, eps: f64) -> f64 {
    let radial = gl(48);
    let cos_rule = gl(24);
    let n_phi = 48;
    let half = 8.0 * eps;
    let (w_lo, w_hi) = ((omega - half).max(0.0), omega + half);
    let mut total = 0.0;
    for &(x, wx) in &radial {
        let w = 0.5 * (w_hi + w_lo) + 0.5 * (w_hi - w_lo) * x;
        let k = w / C_LIGHT;
        let jac = 0.5 * (w_hi - w_lo) / C_LIGHT;
        let delta = (-((omega - w) / eps).powi(2) / 2.0).exp()
            / (eps * (2.0 * std::f64::consts::PI).sqrt());
        let mut ang = 0.0;
        for &(ct, wc) in &cos_rule {
            let st = (1.0 - ct * ct).sqrt();
            for j in 0..n_phi {
                let ph = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n_phi as f64;
                let kv = [k * st * ph.cos(), k * st * ph.sin(), k * ct];
                ang += wc * coupling_sq(p, kv, n, pol);
            }
        }
        ang *= 2.0 * std::f64::consts::PI / n_phi as f64;
        total += wx * jac * k * k * ang * delta;
    }
    total / (HBAR * HBAR * (2.0 * std::f64::consts::PI).powi(3))
}

/// Mode density with the δ width driven to zero by halving and Richardson
/// extrapolation (error ∝ ε²). Returns (value, last correction).
pub fn mode_density_limit(
    p: &Particle,
    omega: f64,
    n: V3,
    pol: Polarization,
    rel_tol: f64,
) -> (f64, f64) {
    let x = omega * p.sigma / C_LIGHT;
    let mut eps = 1e-2 * omega / (1.0 + x * x);
    let mut prev = mode_density_3d(p, omega, n, pol, eps);
    let mut best = f64::NAN;
    let mut change = f64::INFINITY;
    for _ in 0..12 {
        eps /= 2.0;
        let next = mode_density_3d(p, omega, n, pol, eps);
        let extrap = (4.0 * next - prev) / 3.0;
        if best.is_finite() {
            change = ((extrap - best) / extrap).abs();
            if change < rel_tol {
                return (extrap, change);
            }
        }
        best = extrap;
        prev = next;
    }
    (best, change)
}

/// Decay rate π·(ħ⁻²∫DK|K_{K+}|²δ_ε(2Ω − ω_K)) in the ε → 0 limit.
pub fn decay_rate_regularized(p: &Particle, omega_larmor: f64, n: V3, rel_tol: f64) -> (f64, f64) {
    let (j, change) = mode_density_limit(p, 2.0 * omega_larmor, n, Polarization::Linear, rel_tol);
    (std::f64::consts::PI * j, change)
}

/// Reference A(ω, t) by Gauss–Legendre quadrature of the defining integral.
pub fn amplitude_quadrature<F: Fn(f64) -> C>(omega: f64, t: f64, r_minus: F, panels: usize) -> C {
    let rule = gl(20);
    let h = t / panels as f64;
    let mut acc = C::new(0.0, 0.0);
    for p in 0..panels {
        let a = p as f64 * h;
        for &(x, w) in &rule {
            let tp = a + 0.5 * h * (x + 1.0);
            acc += C::from_polar(1.0, -omega * (t - tp)) * r_minus(tp) * (0.5 * h * w);
        }
    }
    acc
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
