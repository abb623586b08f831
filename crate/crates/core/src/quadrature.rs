//! Composite Gauss–Legendre quadrature with panel-doubling error estimates.

use num_complex::Complex;

use crate::scalar::{count, lit, Scalar};

/// Gauss–Legendre nodes and weights on [-1, 1].
///
/// Nodes are found by Newton iteration on the three-term recurrence, seeded with
/// the Tricomi approximation. Returned in ascending order.
pub fn gauss_legendre<T: Scalar>(order: usize) -> (Vec<T>, Vec<T>) {
    assert!(order >= 1, "quadrature order must be positive");
    let n = order;
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let one = T::one();
    let two = lit::<T>(2.0);
    let nf = count::<T>(n);
    for i in 0..(n + 1) / 2 {
        // Seed for the i-th largest root.
        let mut x = (T::PI() * (count::<T>(i) + lit(0.75)) / (nf + lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x = x - dx;
            if dx.abs() <= lit::<T>(4.0) * T::eps() * x.abs().max(one) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != T::zero() {
            dp = d;
        }
        let w = two / ((one - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = T::zero();
    }
    (nodes, weights)
}

fn legendre_with_derivative<T: Scalar>(n: usize, x: T) -> (T, T) {
    let one = T::one();
    let mut p0 = one;
    let mut p1 = x;
    if n == 0 {
        return (one, T::zero());
    }
    for k in 2..=n {
        let kf = count::<T>(k);
        let p2 = ((lit::<T>(2.0) * kf - one) * x * p1 - (kf - one) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = count::<T>(n);
    let d = nf * (x * p1 - p0) / (x * x - one);
    (p1, d)
}

/// A concrete set of abscissae and weights over some interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Scalar> Rule<T> {
    /// Composite rule with `panels` equal panels of `order` points on [a, b].
    pub fn composite(a: T, b: T, panels: usize, order: usize) -> Self {
        Self::piecewise(&[a, b], panels, order)
    }

    /// Composite rule over consecutive pieces delimited by `breaks`, each piece
    /// split into `panels` equal panels. Empty pieces are skipped.
    pub fn piecewise(breaks: &[T], panels: usize, order: usize) -> Self {
        let (x, w) = gauss_legendre::<T>(order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let half = lit::<T>(0.5);
        for piece in breaks.windows(2) {
            let (a, b) = (piece[0], piece[1]);
            if !(b > a) {
                continue;
            }
            let width = (b - a) / count::<T>(panels);
            for p in 0..panels {
                let lo = a + width * count::<T>(p);
                let mid = lo + half * width;
                for (xi, wi) in x.iter().zip(&w) {
                    nodes.push(mid + half * width * *xi);
                    weights.push(half * width * *wi);
                }
            }
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(T) -> T>(&self, f: F) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn integrate_complex<F: Fn(T) -> Complex<T>>(&self, f: F) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(x) * w;
        }
        acc
    }
}

/// Quadrature result with the panel-doubling error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
    pub converged: bool,
}

/// Integrates `f` over the pieces in `breaks`, doubling the panel count until
/// two successive results agree to `rel_tol` (or `abs_floor`).
pub fn integrate_converged<T: Scalar, F: Fn(T) -> T>(
    f: F,
    breaks: &[T],
    order: usize,
    rel_tol: T,
    abs_floor: T,
) -> Estimate<T> {
    let mut panels = 1;
    let mut prev = Rule::piecewise(breaks, panels, order).integrate(&f);
    let mut err = T::infinity();
    for _ in 0..14 {
        panels *= 2;
        let next = Rule::piecewise(breaks, panels, order).integrate(&f);
        err = (next - prev).abs();
        if err <= rel_tol * next.abs() || err <= abs_floor {
            return Estimate {
                value: next,
                error: err,
                converged: true,
            };
        }
        prev = next;
    }
    Estimate {
        value: prev,
        error: err,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre::<f64>(8);
        // degree 15 integrand
        let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((approx - 2.0 / 15.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn odd_order_has_centre_node() {
        let (x, w) = gauss_legendre::<f64>(5);
        assert_eq!(x[2], 0.0);
        assert!((w[2] - 128.0 / 225.0).abs() < 1e-14);
    }

    #[test]
    fn f32_rule_is_usable() {
        let r = Rule::<f32>::composite(0.0, 1.0, 4, 6);
        let v = r.integrate(|x| x.exp());
        assert!((v - (1f32.exp() - 1.0)).abs() < 1e-5);
    }

    #[test]
    fn converged_integration_of_gaussian_moment() {
        let est = integrate_converged(
            |w: f64| w.powi(3) * (-w * w).exp(),
            &[0.0, 2.0, 10.0],
            16,
            1e-13,
            0.0,
        );
        assert!(est.converged);
        assert!((est.value - 0.5).abs() < 1e-13);
    }

    #[test]
    fn empty_pieces_are_skipped() {
        let r = Rule::<f64>::piecewise(&[0.0, 0.0, 1.0, 1.0], 3, 4);
        assert_eq!(r.len(), 12);
    }
}
