//! Gauss-Legendre rules and the tensor-product / composite integrators built on them.

// float methods come from the trait under no_std and are inherent when std is linked
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫_a^b g(x) dx`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut g: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * g(mid + half * x);
        }
        acc * half
    }

    /// Tensor-product rule over the box `[lo, hi]`; `g` receives the node coordinates.
    pub fn integrate_box<F: FnMut(&[f64]) -> f64>(&self, lo: &[f64], hi: &[f64], mut g: F) -> f64 {
        let d = lo.len();
        debug_assert_eq!(d, hi.len());
        let q = self.len();
        let half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
        let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let jacobian: f64 = half.iter().product();
        if jacobian == 0.0 {
            return 0.0;
        }
        let mut idx = vec![0usize; d];
        let mut point = vec![0.0; d];
        let mut acc = 0.0;
        loop {
            let mut w = 1.0;
            for k in 0..d {
                point[k] = mid[k] + half[k] * self.nodes[idx[k]];
                w *= self.weights[idx[k]];
            }
            acc += w * g(&point);
            // odometer
            let mut k = 0;
            loop {
                if k == d {
                    return acc * jacobian;
                }
                idx[k] += 1;
                if idx[k] < q {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates `g` over `[a, b]` split into `panels` equal panels.
pub fn composite<F: FnMut(f64) -> f64>(rule: &GaussLegendre, a: f64, b: f64, panels: usize, mut g: F) -> f64 {
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + width * p as f64;
        let hi = if p + 1 == panels { b } else { lo + width };
        acc += rule.integrate(lo, hi, &mut g);
    }
    acc
}

/// Integrates `g` over `[a, b]`, splitting at every sign change of `g - kink` so that a
/// functional with a kink at `kink` is integrated piecewise smoothly.
pub fn integrate_with_kink<G, P>(rule: &GaussLegendre, a: f64, b: f64, g: &G, phi: &P, kink: Option<f64>) -> f64
where
    G: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    let Some(c) = kink else {
        return rule.integrate(a, b, |x| phi(g(x)));
    };
    const PROBES: usize = 8;
    let mut cuts: Vec<f64> = Vec::new();
    let mut prev_x = a;
    let mut prev_s = g(a) - c;
    for i in 1..=PROBES {
        let x = a + (b - a) * i as f64 / PROBES as f64;
        let s = g(x) - c;
        if (prev_s < 0.0) != (s < 0.0) {
            let (mut lo, mut hi) = (prev_x, x);
            let lo_neg = prev_s < 0.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if ((g(mid) - c) < 0.0) == lo_neg {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            cuts.push(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_s = s;
    }
    let mut acc = 0.0;
    let mut left = a;
    for cut in cuts.into_iter().chain(core::iter::once(b)) {
        if cut > left {
            acc += rule.integrate(left, cut, |x| phi(g(x)));
        }
        left = cut;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 8, 16, 33, 64] {
            let rule = GaussLegendre::new(n);
            let s: f64 = rule.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let rule = GaussLegendre::new(6);
        for deg in 0..12u32 {
            let got = rule.integrate(0.0, 1.0, |x| x.powi(deg as i32));
            let want = 1.0 / (deg as f64 + 1.0);
            assert!((got - want).abs() < 1e-14, "deg {deg}: {got} vs {want}");
        }
    }

    #[test]
    fn tensor_box_of_separable_function() {
        let rule = GaussLegendre::new(10);
        let got = rule.integrate_box(&[0.0, -1.0], &[1.0, 2.0], |p| p[0] * p[1] * p[1]);
        // (1/2) * (8/3 + 1/3) = 1.5
        assert!((got - 1.5).abs() < 1e-13);
    }

    #[test]
    fn kink_splitting_integrates_clamped_line_exactly() {
        let rule = GaussLegendre::new(4);
        let g = |x: f64| x;
        let phi = |v: f64| v.min(0.3);
        let got = integrate_with_kink(&rule, 0.0, 1.0, &g, &phi, Some(0.3));
        // ∫_0^0.3 x dx + 0.3 * 0.7
        let want = 0.045 + 0.21;
        assert!((got - want).abs() < 1e-12);
    }
}
