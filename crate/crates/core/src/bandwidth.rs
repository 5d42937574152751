//! The bandwidth window `[a_n, b_n]`, its rate functions and bandwidth grids.
//!
//! `a(t) = t^{-α} L₁(t)` and `b(t) = t^{-μ} L₂(t)` with `0 < μ < α < 1`;
//! `λ(t) = √(t a(t) |log a(t)|)` and `λₙ(h) = √(n h |log h|)`.

// float methods come from the trait under no_std and are inherent when std is linked
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::E;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when comparing bandwidths built from powers.
const REL_TOL: f64 = 1e-12;

/// Largest `t` on the audit range, `2^60`.
const AUDIT_LOG2_MAX: i32 = 60;

/// `L(t) = c · (ln(e + t))^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowlyVarying {
    pub scale: f64,
    pub log_power: f64,
}

impl SlowlyVarying {
    pub const ONE: SlowlyVarying = SlowlyVarying {
        scale: 1.0,
        log_power: 0.0,
    };

    pub fn new(scale: f64, log_power: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0 && log_power.is_finite()) {
            return Err(Error::InvalidWindow(format!(
                "slowly varying factor needs positive scale and finite power, got ({scale}, {log_power})"
            )));
        }
        Ok(SlowlyVarying { scale, log_power })
    }

    pub fn value(&self, t: f64) -> f64 {
        if self.log_power == 0.0 {
            self.scale
        } else {
            self.scale * (E + t).ln().powf(self.log_power)
        }
    }
}

/// Output of [`BandwidthWindow::window_eval`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowValues {
    pub a_n: f64,
    pub b_n: f64,
    pub lambda_t: f64,
    pub lambda_n_h: Option<f64>,
}

/// The dyadic cover `h_{n,j} = 2ʲ a_n`, `j = 0..=l_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicGrid {
    pub h_list: Vec<f64>,
    pub l_n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthWindow {
    alpha: f64,
    mu: f64,
    l1: SlowlyVarying,
    l2: SlowlyVarying,
    eta: f64,
    region_r: u32,
    n_min: u64,
    degenerate: bool,
}

impl BandwidthWindow {
    /// Validates `0 < μ < α < 1`, strict growth of `λ` on `[1, 2⁶⁰]`, and computes `n_min`.
    pub fn new(alpha: f64, mu: f64, l1: SlowlyVarying, l2: SlowlyVarying) -> Result<Self> {
        if !(0.0 < mu && mu < alpha && alpha < 1.0) {
            return Err(Error::InvalidWindow(format!(
                "need 0 < mu < alpha < 1, got alpha={alpha}, mu={mu}"
            )));
        }
        let mut window = BandwidthWindow {
            alpha,
            mu,
            l1,
            l2,
            eta: (1.0 - alpha) / 2.0,
            region_r: (3.0 / mu - 1e-9).ceil() as u32,
            n_min: 2,
            degenerate: false,
        };
        window.check_lambda_increasing()?;
        window.n_min = window.compute_n_min()?;
        Ok(window)
    }

    /// `a_t = t^{-α}`, `b_t = t^{-μ}`.
    pub fn power_law(alpha: f64, mu: f64) -> Result<Self> {
        BandwidthWindow::new(alpha, mu, SlowlyVarying::ONE, SlowlyVarying::ONE)
    }

    /// Collapses the window onto its lower edge (`b ≡ a`), so every bandwidth grid holds
    /// the single bandwidth `a_n`. This emulates the fixed-bandwidth case `a_n = b_n`.
    pub fn degenerate(mut self) -> Self {
        self.degenerate = true;
        self
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn l1(&self) -> SlowlyVarying {
        self.l1
    }

    pub fn l2(&self) -> SlowlyVarying {
        self.l2
    }

    /// Regular-variation exponent of `λ`, taken as `(1 - α)/2`.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Smallest integer `r` with `r μ ≥ 3`.
    pub fn region_r(&self) -> u32 {
        self.region_r
    }

    pub fn n_min(&self) -> u64 {
        self.n_min
    }

    pub fn a(&self, t: f64) -> f64 {
        (-self.alpha * t.log2()).exp2() * self.l1.value(t)
    }

    pub fn b(&self, t: f64) -> f64 {
        if self.degenerate {
            return self.a(t);
        }
        (-self.mu * t.log2()).exp2() * self.l2.value(t)
    }

    pub fn lambda(&self, t: f64) -> f64 {
        let a = self.a(t);
        (t * a * a.ln().abs()).sqrt()
    }

    /// `λₙ(h) = √(n h |log h|)` for `0 < h < 1`.
    pub fn lambda_n(n: u64, h: f64) -> Result<f64> {
        check_bandwidth(h)?;
        Ok((n as f64 * h * h.ln().abs()).sqrt())
    }

    /// `b_n^{-r}`: the `ψ` threshold defining the region `Aₙ`.
    pub fn region_threshold(&self, n: u64) -> f64 {
        self.b(n as f64).powi(-(self.region_r as i32))
    }

    pub fn window_eval(&self, n: u64, h: Option<f64>) -> Result<WindowValues> {
        if n < 2 {
            return Err(Error::Domain(format!("window evaluation needs n >= 2, got {n}")));
        }
        let t = n as f64;
        let lambda_n_h = match h {
            Some(h) => Some(BandwidthWindow::lambda_n(n, h)?),
            None => None,
        };
        Ok(WindowValues {
            a_n: self.a(t),
            b_n: self.b(t),
            lambda_t: self.lambda(t),
            lambda_n_h,
        })
    }

    /// `h_{n,j} = 2ʲ a_n` for `j ≤ l_n = max{j : h_{n,j} ≤ 2 b_n}`.
    pub fn dyadic_grid(&self, n: u64) -> Result<DyadicGrid> {
        self.ensure_valid(n)?;
        let t = n as f64;
        let (a, b) = (self.a(t), self.b(t));
        let l_n = dyadic_levels(a, b);
        let h_list: Vec<f64> = (0..=l_n).map(|j| a * (j as f64).exp2()).collect();
        if (l_n as f64) > 2.0 * t.ln() {
            return Err(Error::InvariantViolation {
                point: alloc::vec![t],
                reason: format!("l_n = {l_n} exceeds 2 log n = {}", 2.0 * t.ln()),
            });
        }
        Ok(DyadicGrid { h_list, l_n })
    }

    /// Geometric grid from `a_n` to `b_n` with ratio `2^{1/k}`; both endpoints included.
    /// The grid for `k` is a subset of the grid for `2k`.
    pub fn h_subgrid(&self, n: u64, k: u32) -> Result<Vec<f64>> {
        if k == 0 {
            return Err(Error::Usage("subgrid ratio exponent must be at least 1".into()));
        }
        self.ensure_valid(n)?;
        let t = n as f64;
        let (a, b) = (self.a(t), self.b(t));
        let mut grid = Vec::new();
        let mut i = 0u32;
        loop {
            let h = a * (i as f64 / k as f64).exp2();
            if h >= b * (1.0 - REL_TOL) {
                break;
            }
            grid.push(h);
            i += 1;
        }
        grid.push(b);
        Ok(grid)
    }

    /// Clamps `h` into `[a_n, b_n]`.
    pub fn clamp(&self, n: u64, h: f64) -> f64 {
        let t = n as f64;
        let (a, b) = (self.a(t), self.b(t));
        if h.is_nan() {
            return a;
        }
        h.max(a).min(b)
    }

    pub fn ensure_valid(&self, n: u64) -> Result<()> {
        if n < self.n_min {
            return Err(Error::WindowNotYetValid { n, n_min: self.n_min });
        }
        Ok(())
    }

    fn valid_at(&self, t: f64) -> bool {
        let (a, b) = (self.a(t), self.b(t));
        a > 0.0 && a <= b * (1.0 + REL_TOL) && b < 1.0 && (dyadic_levels(a, b) as f64) <= 2.0 * t.ln()
    }

    fn check_lambda_increasing(&self) -> Result<()> {
        let mut prev = self.lambda(1.0);
        for q in 1..=(4 * AUDIT_LOG2_MAX) {
            let t = (q as f64 / 4.0).exp2();
            let cur = self.lambda(t);
            if !(cur > prev) {
                return Err(Error::InvalidWindow(format!(
                    "lambda is not strictly increasing near t = {t} ({prev} -> {cur})"
                )));
            }
            prev = cur;
        }
        Ok(())
    }

    fn compute_n_min(&self) -> Result<u64> {
        // last failing checkpoint on the quarter-octave audit grid
        let mut last_bad: Option<u32> = None;
        for q in 4..=(4 * AUDIT_LOG2_MAX as u32) {
            let t = (q as f64 / 4.0).exp2();
            if !self.valid_at(t.floor()) {
                last_bad = Some(q);
            }
        }
        let Some(q) = last_bad else {
            return Ok(2);
        };
        if q == 4 * AUDIT_LOG2_MAX as u32 {
            return Err(Error::InvalidWindow("window never becomes valid on [2, 2^60]".into()));
        }
        let mut lo = (q as f64 / 4.0).exp2().floor() as u64;
        let mut hi = ((q + 1) as f64 / 4.0).exp2().floor() as u64;
        // smallest valid n in (lo, hi]
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.valid_at(mid as f64) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi.max(2))
    }
}

/// `max{j : 2ʲ a ≤ 2 b}`.
fn dyadic_levels(a: f64, b: f64) -> usize {
    let mut j = 0usize;
    while a * ((j + 1) as f64).exp2() <= 2.0 * b * (1.0 + REL_TOL) {
        j += 1;
    }
    j
}

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain(format!("bandwidth must lie in (0, 1), got {h}")));
    }
    Ok(())
}

/// `√(n h / |log h|)`, the rescaling of the weighted deviation.
pub fn rescaling(n: u64, h: f64) -> f64 {
    (n as f64 * h / h.ln().abs()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_window() -> BandwidthWindow {
        BandwidthWindow::power_law(0.7, 0.3).unwrap()
    }

    #[test]
    fn window_values_at_1024() {
        let w = default_window();
        let v = w.window_eval(1024, Some(1.0 / 64.0)).unwrap();
        assert!((v.a_n - 0.0078125).abs() < 1e-17);
        assert!((v.b_n - 0.125).abs() < 1e-16);
        // √(16 · ln 64)
        let want = (16.0 * 64.0f64.ln()).sqrt();
        assert!((v.lambda_n_h.unwrap() - want).abs() < 1e-12);
        assert!((want - 8.1573).abs() < 1e-4);
        assert!(w.window_eval(1024, Some(1.0)).is_err());
        assert!(w.window_eval(1, None).is_err());
    }

    #[test]
    fn construction_constraints() {
        assert!(BandwidthWindow::power_law(0.5, 0.5).is_err());
        assert!(BandwidthWindow::power_law(0.3, 0.5).is_err());
        assert!(BandwidthWindow::power_law(1.0, 0.5).is_err());
        assert_eq!(default_window().region_r(), 10);
        assert_eq!(BandwidthWindow::power_law(0.9, 0.5).unwrap().region_r(), 6);
        assert_eq!(default_window().n_min(), 2);
    }

    #[test]
    fn extreme_log_power_makes_lambda_non_monotone() {
        let l1 = SlowlyVarying::new(1.0, -40.0).unwrap();
        assert!(matches!(
            BandwidthWindow::new(0.7, 0.3, l1, SlowlyVarying::ONE),
            Err(Error::InvalidWindow(_))
        ));
    }

    #[test]
    fn dyadic_grid_at_1024() {
        let g = default_window().dyadic_grid(1024).unwrap();
        assert_eq!(g.l_n, 5);
        let want: Vec<f64> = (2..=7).rev().map(|e| (-(e as f64)).exp2()).collect();
        assert_eq!(g.h_list, want);
    }

    #[test]
    fn subgrid_counts_and_endpoints() {
        let w = default_window();
        let g1 = w.h_subgrid(1024, 1).unwrap();
        let want: Vec<f64> = (3..=7).rev().map(|e| (-(e as f64)).exp2()).collect();
        assert_eq!(g1, want);
        let g8 = w.h_subgrid(1024, 8).unwrap();
        assert_eq!(g8.len(), 33);
        assert_eq!(g8[0], w.a(1024.0));
        assert_eq!(*g8.last().unwrap(), w.b(1024.0));
        for h in &g1 {
            assert!(g8.contains(h));
        }
        assert!(w.h_subgrid(1024, 0).is_err());
    }

    #[test]
    fn window_not_yet_valid_names_n_min() {
        // a small L₂ keeps b(n) below a(n) until n^{0.4} ≥ 20
        let l2 = SlowlyVarying::new(0.05, 0.0).unwrap();
        let w = BandwidthWindow::new(0.7, 0.3, SlowlyVarying::ONE, l2).unwrap();
        let n_min = w.n_min();
        assert_eq!(n_min, 1789, "20^2.5 = 1788.85");
        match w.dyadic_grid(n_min - 1) {
            Err(Error::WindowNotYetValid { n_min: m, .. }) => assert_eq!(m, n_min),
            other => panic!("unexpected {other:?}"),
        }
        let g = w.dyadic_grid(n_min).unwrap();
        assert!(g.l_n >= 1);
        assert!(g.h_list[g.l_n] >= w.b(n_min as f64));
    }

    #[test]
    fn degenerate_window_has_single_bandwidth() {
        let w = default_window().degenerate();
        assert_eq!(w.h_subgrid(4096, 8).unwrap(), alloc::vec![w.a(4096.0)]);
    }
}
