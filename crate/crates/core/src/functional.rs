//! Plug-in estimation of `∫φ(f)` by `∫φ(f_{n,h})`, and the sample-wise bound
//! `|∫φ(f_{n,h}) - ∫φ(E f_{n,h})| ≤ D c_β sup_t f^{-β}(t)|f_{n,h}(t) - E f_{n,h}(t)|`
//! with `c_β = ∫ f^β`.

// float methods come from the trait under no_std and are inherent when std is linked
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::cmp::Ordering;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{check_bandwidth, BandwidthWindow};
use crate::centering::{window_side, Centering};
use crate::deviation::{build_eval_grid, DeviationEngine, DEFAULT_QUAD_POINTS};
use crate::error::{Error, Result};
use crate::estimator::KdeIndex;
use crate::kernel::Kernel;
use crate::model::{BoxRegion, Density};
use crate::quadrature::{integrate_with_kink, GaussLegendre};
use crate::sample::Sample;
use crate::weight::WeightFunction;

/// Required agreement between the two quadrature resolutions of a functional integral.
pub const FUNCTIONAL_TOL: f64 = 1e-5;

/// Most tensor cells integrated separately in `d ≥ 2` before falling back to a uniform grid.
const CELL_BUDGET: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FunctionalKind {
    Identity,
    /// `min(x, c)`.
    Clamp {
        c: f64,
    },
    /// `-τ log(e^{-x/τ} + e^{-c/τ})`, shifted so that `φ(0) = 0`.
    SmoothMin {
        c: f64,
        tau: f64,
    },
}

/// A Lipschitz map `φ` with its constant `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzFunctional {
    pub kind: FunctionalKind,
    pub lipschitz_d: f64,
    pub name: String,
}

impl LipschitzFunctional {
    pub fn identity() -> Self {
        LipschitzFunctional {
            kind: FunctionalKind::Identity,
            lipschitz_d: 1.0,
            name: "identity".into(),
        }
    }

    pub fn clamp(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Config(format!("clamp level must be positive, got {c}")));
        }
        Ok(LipschitzFunctional {
            kind: FunctionalKind::Clamp { c },
            lipschitz_d: 1.0,
            name: format!("min(x, {c})"),
        })
    }

    pub fn smooth_min(c: f64, tau: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0 && tau.is_finite() && tau > 0.0) {
            return Err(Error::Config(format!(
                "smooth-min needs c > 0 and tau > 0, got c={c}, tau={tau}"
            )));
        }
        Ok(LipschitzFunctional {
            kind: FunctionalKind::SmoothMin { c, tau },
            lipschitz_d: 1.0,
            name: format!("smooth-min(x, {c}; tau={tau})"),
        })
    }

    /// `identity`, `clamp:<c>` or `smooth-min:<c>:<tau>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.trim().split(':').collect();
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("invalid number '{s}' in functional '{spec}'")))
        };
        match parts.as_slice() {
            ["identity"] => Ok(LipschitzFunctional::identity()),
            ["clamp", c] | ["min", c] => LipschitzFunctional::clamp(num(c)?),
            ["smooth-min", c, tau] => LipschitzFunctional::smooth_min(num(c)?, num(tau)?),
            _ => Err(Error::Config(format!(
                "unknown functional '{spec}' (expected identity, clamp:<c> or smooth-min:<c>:<tau>)"
            ))),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            FunctionalKind::Identity => x,
            FunctionalKind::Clamp { c } => x.min(c),
            FunctionalKind::SmoothMin { c, tau } => soft_min(x, c, tau) - soft_min(0.0, c, tau),
        }
    }

    /// The point where `φ` is not differentiable, if any.
    pub fn kink(&self) -> Option<f64> {
        match self.kind {
            FunctionalKind::Clamp { c } => Some(c),
            _ => None,
        }
    }

    /// Largest `|φ(x) - φ(y)| / |x - y|` over `pairs` random pairs in `[0, hi]`; the
    /// Lipschitz claim holds on the sample when this is at most `D` (plus rounding).
    pub fn lipschitz_ratio(&self, hi: f64, pairs: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..pairs {
            let x: f64 = rng.random::<f64>() * hi;
            let y: f64 = rng.random::<f64>() * hi;
            if x != y {
                worst = worst.max((self.eval(x) - self.eval(y)).abs() / (x - y).abs());
            }
        }
        worst
    }
}

/// `-τ log(e^{-x/τ} + e^{-c/τ})`, evaluated without overflow.
fn soft_min(x: f64, c: f64, tau: f64) -> f64 {
    x.min(c) - tau * (-(x - c).abs() / tau).exp().ln_1p()
}

/// Breakpoint-aligned Gauss-Legendre integration of `φ(g)` over one interval list, at `q`
/// and `2q` nodes, returning both resolutions.
fn integrate_panels<G: Fn(f64) -> f64>(
    breaks: &[f64],
    q: usize,
    g: &G,
    functional: &LipschitzFunctional,
) -> (f64, f64) {
    let coarse = GaussLegendre::new(q);
    let fine = GaussLegendre::new(2 * q);
    let phi = |x: f64| functional.eval(x);
    let kink = functional.kink();
    let mut c = 0.0;
    let mut f = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            c += integrate_with_kink(&coarse, w[0], w[1], g, &phi, kink);
            f += integrate_with_kink(&fine, w[0], w[1], g, &phi, kink);
        }
    }
    (c, f)
}

fn agree(coarse: f64, fine: f64) -> Result<f64> {
    if !((coarse - fine).abs() <= FUNCTIONAL_TOL) {
        return Err(Error::Accuracy { coarse, fine });
    }
    Ok(fine)
}

fn sorted_breaks(mut b: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    b.retain(|x| *x > lo && *x < hi);
    b.push(lo);
    b.push(hi);
    b.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    b.dedup();
    b
}

/// `∫_{quad_region} φ(f_{n,h}(t)) dt`, with `quad_points` and `2·quad_points` nodes per
/// panel between the estimator's breakpoints `Xᵢ ± h^{1/d}/2`.
pub fn plugin_functional(
    sample: &Sample,
    kernel: &Kernel,
    h: f64,
    functional: &LipschitzFunctional,
    quad_region: &BoxRegion,
    quad_points: usize,
) -> Result<f64> {
    check_bandwidth(h)?;
    let d = kernel.dim();
    if sample.is_empty() {
        return Err(Error::Usage("sample is empty".into()));
    }
    if sample.dim() != d || quad_region.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            got: if sample.dim() != d {
                sample.dim()
            } else {
                quad_region.dim()
            },
        });
    }
    if quad_points < 2 {
        return Err(Error::Usage(
            "functional quadrature needs at least 2 points per panel".into(),
        ));
    }
    let s = window_side(h, d);
    let index = KdeIndex::new(sample);
    let axis_breaks = |k: usize| -> Vec<f64> {
        let raw: Vec<f64> = sample.iter().flat_map(|x| [x[k] - 0.5 * s, x[k] + 0.5 * s]).collect();
        sorted_breaks(raw, quad_region.lo[k], quad_region.hi[k])
    };
    if d == 1 {
        let breaks = axis_breaks(0);
        let g = |t: f64| index.value_at(kernel, h, &[t]);
        let (c, f) = integrate_panels(&breaks, quad_points, &g, functional);
        return agree(c, f);
    }
    let mut breaks: Vec<Vec<f64>> = (0..d).map(axis_breaks).collect();
    let cells: f64 = breaks.iter().map(|b| (b.len() - 1) as f64).product();
    if cells > CELL_BUDGET as f64 {
        // uniform cells instead of breakpoint cells
        let per_axis = ((CELL_BUDGET as f64).powf(1.0 / d as f64).floor() as usize).max(1);
        for (k, b) in breaks.iter_mut().enumerate() {
            let (lo, hi) = (quad_region.lo[k], quad_region.hi[k]);
            *b = (0..=per_axis)
                .map(|i| lo + (hi - lo) * i as f64 / per_axis as f64)
                .collect();
        }
    }
    let g = |pts: &[f64]| index.values(kernel, h, pts);
    let (c, f) = integrate_cells(&breaks, quad_points, &g, functional);
    agree(c, f)
}

/// Tensor Gauss-Legendre over the cells spanned by per-axis breakpoints. `g` evaluates a batch
/// of row-major points.
fn integrate_cells<G: Fn(&[f64]) -> Vec<f64>>(
    breaks: &[Vec<f64>],
    q: usize,
    g: &G,
    functional: &LipschitzFunctional,
) -> (f64, f64) {
    let d = breaks.len();
    let mut out = [0.0f64; 2];
    for (slot, rule) in [GaussLegendre::new(q), GaussLegendre::new(2 * q)].iter().enumerate() {
        let m = rule.len();
        let nodes_per_cell = m.pow(d as u32);
        let mut points: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        let mut total = 0.0;
        let flush = |points: &mut Vec<f64>, weights: &mut Vec<f64>, total: &mut f64| {
            if weights.is_empty() {
                return;
            }
            let values = g(points);
            for (w, v) in weights.iter().zip(values) {
                *total += w * functional.eval(v);
            }
            points.clear();
            weights.clear();
        };
        let mut cell = vec![0usize; d];
        let mut node = vec![0usize; d];
        'cells: loop {
            let mut jac = 1.0;
            for k in 0..d {
                jac *= 0.5 * (breaks[k][cell[k] + 1] - breaks[k][cell[k]]);
            }
            if jac > 0.0 {
                node.iter_mut().for_each(|x| *x = 0);
                for _ in 0..nodes_per_cell {
                    let mut w = jac;
                    for k in 0..d {
                        let (a, b) = (breaks[k][cell[k]], breaks[k][cell[k] + 1]);
                        points.push(0.5 * (a + b) + 0.5 * (b - a) * rule.nodes()[node[k]]);
                        w *= rule.weights()[node[k]];
                    }
                    weights.push(w);
                    for k in 0..d {
                        node[k] += 1;
                        if node[k] < m {
                            break;
                        }
                        node[k] = 0;
                    }
                }
                if weights.len() >= 1 << 15 {
                    flush(&mut points, &mut weights, &mut total);
                }
            }
            for k in 0..d {
                cell[k] += 1;
                if cell[k] + 1 < breaks[k].len() {
                    continue 'cells;
                }
                cell[k] = 0;
            }
            break;
        }
        flush(&mut points, &mut weights, &mut total);
        out[slot] = total;
    }
    (out[0], out[1])
}

/// `∫_{region} φ(E f_{n,h}(t)) dt` over panels of width `h^{1/d}/2`.
pub fn centered_functional(
    model: &dyn Density,
    kernel: &Kernel,
    h: f64,
    functional: &LipschitzFunctional,
    region: &BoxRegion,
    quad_points: usize,
) -> Result<f64> {
    check_bandwidth(h)?;
    let d = kernel.dim();
    let centering = Centering::new(kernel, DEFAULT_QUAD_POINTS)?;
    let s = window_side(h, d);
    let mut breaks: Vec<Vec<f64>> = Vec::with_capacity(d);
    for k in 0..d {
        let (lo, hi) = (region.lo[k], region.hi[k]);
        let panels = (((hi - lo) / (0.5 * s)).ceil() as usize).max(1);
        let mut b: Vec<f64> = (0..=panels)
            .map(|i| lo + (hi - lo) * i as f64 / panels as f64)
            .collect();
        // the centering has kinks where the window meets the edges of a box support
        if let Some(sb) = model.support_box() {
            b.extend([
                sb.lo[k] - 0.5 * s,
                sb.lo[k] + 0.5 * s,
                sb.hi[k] - 0.5 * s,
                sb.hi[k] + 0.5 * s,
            ]);
        }
        breaks.push(sorted_breaks(b, lo, hi));
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let centred_at = |t: &[f64]| match centering.eval(model, h, t) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let (c, f) = if d == 1 {
        integrate_panels(&breaks[0], quad_points, &|t: f64| centred_at(&[t]), functional)
    } else {
        let g = |pts: &[f64]| -> Vec<f64> { pts.chunks_exact(d).map(centred_at).collect() };
        integrate_cells(&breaks, quad_points, &g, functional)
    };
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    agree(c, f)
}

/// `c_β = ∫ f^β`, integrated over boxes doubling around the bounding box until the
/// increment is negligible. A divergent integral (heavy tails) is a domain error.
pub fn c_beta(model: &dyn Density, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::Domain(format!("beta must lie in (0, 1/2), got {beta}")));
    }
    let d = model.dim();
    let g = |t: &[f64]| {
        if model.in_positivity_set(t) {
            model.pdf(t).powf(beta)
        } else {
            0.0
        }
    };
    let rule = GaussLegendre::new(16);
    let base = model.support_box().unwrap_or_else(|| model.bounding_box());
    // integrate over `box` split into `panels` cells per axis
    let integrate = |lo: &[f64], hi: &[f64], panels: usize| -> f64 {
        let mut acc = 0.0;
        let mut cell = vec![0usize; d];
        let mut clo = vec![0.0; d];
        let mut chi = vec![0.0; d];
        loop {
            for k in 0..d {
                let w = (hi[k] - lo[k]) / panels as f64;
                clo[k] = lo[k] + w * cell[k] as f64;
                chi[k] = clo[k] + w;
            }
            acc += rule.integrate_box(&clo, &chi, g);
            let mut k = 0;
            loop {
                if k == d {
                    return acc;
                }
                cell[k] += 1;
                if cell[k] < panels {
                    break;
                }
                cell[k] = 0;
                k += 1;
            }
        }
    };
    let panels = if d == 1 { 64 } else { 16 };
    let mut total = integrate(&base.lo, &base.hi, panels);
    if model.support_box().is_some() {
        return Ok(total);
    }
    // shells between successive doublings
    let mut inner = base.clone();
    let mut prev_increment = f64::INFINITY;
    for _ in 0..40 {
        let outer = BoxRegion::new(
            inner.lo.iter().map(|x| 2.0 * x).collect(),
            inner.hi.iter().map(|x| 2.0 * x).collect(),
        );
        let increment = integrate(&outer.lo, &outer.hi, panels) - integrate(&inner.lo, &inner.hi, panels);
        total += increment;
        if increment <= 1e-12 * total {
            return Ok(total);
        }
        if increment >= prev_increment {
            return Err(Error::Domain(format!(
                "the integral of f^{beta} diverges for {} (shell contributions do not decrease)",
                model.name()
            )));
        }
        prev_increment = increment;
        inner = outer;
    }
    Err(Error::Domain(format!(
        "the integral of f^{beta} did not settle for {} over 40 doublings",
        model.name()
    )))
}

/// Settings of [`functional_bound_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckSpec {
    pub window: BandwidthWindow,
    /// Regular points of the evaluation grid (the sample is always added).
    pub max_points: usize,
    pub quad_points: usize,
    /// Grid doublings attempted before a failure is reported.
    pub refinements: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalBound {
    pub lhs: f64,
    pub rhs: f64,
    pub c_beta: f64,
    pub holds: bool,
    /// Quadrature and truncation allowance added to the right-hand side.
    pub slack: f64,
    /// `max_points` of the grid used for the reported `rhs`.
    pub grid_points: usize,
}

/// Checks the plug-in error bound for one sample and bandwidth, with `ψ = f^{-β}` and the
/// supremum taken over the deviation grid (unioned with the sample). A failure first
/// doubles the grid resolution, up to `spec.refinements` times.
pub fn functional_bound_check(
    sample: &Sample,
    kernel: &Kernel,
    h: f64,
    functional: &LipschitzFunctional,
    model: &dyn Density,
    beta: f64,
    spec: &BoundCheckSpec,
) -> Result<FunctionalBound> {
    let c_b = c_beta(model, beta)?;
    let weight = WeightFunction::inverse_density(beta)?;
    let n = sample.len() as u64;
    let s = window_side(h, kernel.dim());
    // region covering the bounding box and the dilated sample
    let mut region = model.bounding_box();
    for x in sample.iter() {
        for k in 0..region.dim() {
            region.lo[k] = region.lo[k].min(x[k] - s);
            region.hi[k] = region.hi[k].max(x[k] + s);
        }
    }
    let region = region.dilate(s);
    let plug = plugin_functional(sample, kernel, h, functional, &region, spec.quad_points)?;
    let centered = centered_functional(model, kernel, h, functional, &region, spec.quad_points)?;
    let lhs = (plug - centered).abs();
    // both integrals agree to FUNCTIONAL_TOL across resolutions; the centered one also misses
    // at most the mass outside the bounding box
    let slack = 2.0 * FUNCTIONAL_TOL + functional.lipschitz_d * 1e-6;
    let engine = DeviationEngine::new(kernel, DEFAULT_QUAD_POINTS)?;
    let mut max_points = spec.max_points;
    let mut attempt = 0;
    loop {
        let grid = build_eval_grid(model, &weight, &spec.window, n, max_points, Some(sample))?;
        let sup = engine
            .weighted_deviation(sample, model, &weight, h, &grid)?
            .sup_weighted_dev;
        let rhs = functional.lipschitz_d * c_b * sup;
        let holds = lhs <= rhs * (1.0 + 1e-6) + slack;
        if holds || attempt >= spec.refinements {
            return Ok(FunctionalBound {
                lhs,
                rhs,
                c_beta: c_b,
                holds,
                slack,
                grid_points: max_points,
            });
        }
        attempt += 1;
        max_points *= 2;
    }
}
