//! Evaluation grids restricted to `Aₙ = {t ∈ B_f : ψ(t) ≤ b_n^{-r}}`, the weighted sup-norm
//! deviation `√(nh/|log h|) ‖ψ(f_{n,h} - E f_{n,h})‖∞`, its maximum `Δₙ` over a bandwidth
//! grid, and the diagnostics attached to the region decomposition.
//!
//! Suprema are taken over a finite grid, so every reported value is a lower bound of the
//! continuum supremum. Grids are unioned with the sample because, for compactly supported
//! kernels, the deviation field is piecewise smooth with extrema near the data.

// float methods come from the trait under no_std and are inherent when std is linked
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{check_bandwidth, rescaling, BandwidthWindow};
use crate::centering::{window_side, Centering};
use crate::error::{Error, Result};
use crate::estimator::KdeIndex;
use crate::kernel::Kernel;
use crate::model::Density;
use crate::sample::Sample;
use crate::selector::BandwidthSelector;
use crate::weight::WeightFunction;

/// Gauss-Legendre points per axis used by the deviation engine's centering.
pub const DEFAULT_QUAD_POINTS: usize = 8;

/// Smallest accepted cap on the number of regular grid points.
pub const MIN_GRID_POINTS: usize = 1000;

/// Relative slack on the `A²` threshold, absorbing rounding at the boundary `f = ε r^{1/(1-β)}`
/// where the two defining inequalities meet.
const REGION_REL_TOL: f64 = 1e-12;

/// Evaluation points over the model's bounding region, with cached `f` and `ψ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalGrid {
    pub dim: usize,
    /// Sample size the grid was built for.
    pub n: u64,
    /// Row-major points; every point lies in `B_f`.
    pub points: Vec<f64>,
    /// Largest spacing of the regular part over the axes.
    pub spacing: f64,
    pub per_axis: usize,
    /// Whether `max_points` forced a spacing above `a_n^{1/d}/2`.
    pub capped: bool,
    pub includes_data_points: bool,
    pub region_r_used: f64,
    /// `ψ(t) ≤ b_n^{-r}` per point.
    pub a_n_membership: Vec<bool>,
    /// FNV-1a digest of points, membership and build parameters.
    pub grid_id: u64,
    pub density: Vec<f64>,
    pub psi: Vec<f64>,
    pub model_name: String,
    pub weight: WeightFunction,
}

impl EvalGrid {
    pub fn len(&self) -> usize {
        self.a_n_membership.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a_n_membership.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.a_n_membership
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i)
    }

    pub fn member_count(&self) -> usize {
        self.a_n_membership.iter().filter(|&&m| m).count()
    }

    pub fn grid_id_hex(&self) -> String {
        format!("{:016x}", self.grid_id)
    }

    fn check_matches(&self, sample: &Sample, model: &dyn Density, weight: &WeightFunction) -> Result<()> {
        if sample.dim() != self.dim || model.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: if sample.dim() != self.dim {
                    sample.dim()
                } else {
                    model.dim()
                },
            });
        }
        if sample.len() as u64 != self.n {
            return Err(Error::Usage(format!(
                "grid was built for n = {}, sample has {} points",
                self.n,
                sample.len()
            )));
        }
        if model.name() != self.model_name || *weight != self.weight {
            return Err(Error::Usage("grid was built for a different model or weight".into()));
        }
        Ok(())
    }
}

/// `t ∈ Aₙ`: `t ∈ B_f` and `ψ(t) ≤ b_n^{-r}`.
pub fn in_region(model: &dyn Density, weight: &WeightFunction, window: &BandwidthWindow, n: u64, t: &[f64]) -> bool {
    match weight.eval(model, t) {
        Some(psi) => psi <= window.region_threshold(n),
        None => false,
    }
}

/// Builds the grid for `(model, weight, window, n)`: a regular grid over the bounding box with
/// spacing at most `a_n^{1/d}/2` unless `max_points` caps it, restricted to `B_f`, flagged
/// for `Aₙ`, and optionally unioned with the sample locations.
pub fn build_eval_grid(
    model: &dyn Density,
    weight: &WeightFunction,
    window: &BandwidthWindow,
    n: u64,
    max_points: usize,
    sample: Option<&Sample>,
) -> Result<EvalGrid> {
    if max_points < MIN_GRID_POINTS {
        return Err(Error::Usage(format!(
            "max_points must be at least {MIN_GRID_POINTS}, got {max_points}"
        )));
    }
    window.ensure_valid(n)?;
    let d = model.dim();
    if let Some(s) = sample {
        if s.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                got: s.dim(),
            });
        }
    }
    let region = model.bounding_box();
    let target = 0.5 * window_side(window.a(n as f64), d);
    let widest = region
        .lo
        .iter()
        .zip(&region.hi)
        .map(|(lo, hi)| hi - lo)
        .fold(0.0, f64::max);
    let wanted = ((widest / target).ceil() as usize).saturating_add(1).max(2);
    let cap = integer_root(max_points, d).max(2);
    let per_axis = wanted.min(cap);
    let capped = wanted > cap;
    let spacing = widest / (per_axis - 1) as f64;

    let threshold = window.region_threshold(n);
    let mut grid = EvalGrid {
        dim: d,
        n,
        points: Vec::new(),
        spacing,
        per_axis,
        capped,
        includes_data_points: sample.is_some(),
        region_r_used: window.region_r() as f64,
        a_n_membership: Vec::new(),
        grid_id: 0,
        density: Vec::new(),
        psi: Vec::new(),
        model_name: model.name(),
        weight: *weight,
    };
    let push = |grid: &mut EvalGrid, t: &[f64]| {
        if !model.in_positivity_set(t) {
            return;
        }
        let f = model.pdf(t);
        if f <= 0.0 {
            return;
        }
        let psi = weight.at_density(f);
        grid.points.extend_from_slice(t);
        grid.density.push(f);
        grid.psi.push(psi);
        grid.a_n_membership.push(psi <= threshold);
    };

    let mut idx = vec![0usize; d];
    let mut t = vec![0.0; d];
    'outer: loop {
        for k in 0..d {
            let (lo, hi) = (region.lo[k], region.hi[k]);
            t[k] = if idx[k] + 1 == per_axis {
                hi
            } else {
                lo + (hi - lo) * idx[k] as f64 / (per_axis - 1) as f64
            };
        }
        push(&mut grid, &t);
        for k in 0..d {
            idx[k] += 1;
            if idx[k] < per_axis {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    if let Some(s) = sample {
        for x in s.iter() {
            push(&mut grid, x);
        }
    }
    if !grid.a_n_membership.iter().any(|&m| m) {
        return Err(Error::DegenerateRegion(format!(
            "A_n is empty on the bounding region of {} at n = {n}",
            model.name()
        )));
    }
    grid.grid_id = grid_digest(&grid);
    Ok(grid)
}

fn integer_root(x: usize, d: usize) -> usize {
    let mut r = (x as f64).powf(1.0 / d as f64).floor() as usize;
    while r > 1 && r.checked_pow(d as u32).is_none_or(|p| p > x) {
        r -= 1;
    }
    while (r + 1).checked_pow(d as u32).is_some_and(|p| p <= x) {
        r += 1;
    }
    r
}

fn grid_digest(grid: &EvalGrid) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    feed(&(grid.dim as u64).to_le_bytes());
    feed(&grid.n.to_le_bytes());
    feed(&grid.region_r_used.to_bits().to_le_bytes());
    for x in &grid.points {
        feed(&x.to_bits().to_le_bytes());
    }
    for &m in &grid.a_n_membership {
        feed(&[m as u8]);
    }
    h
}

/// One bandwidth's weighted deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRecord {
    pub n: u64,
    pub h: f64,
    /// `max_t ψ(t)|f_{n,h}(t) - E f_{n,h}(t)|` over the `Aₙ` grid points.
    pub sup_weighted_dev: f64,
    /// `√(nh/|log h|) · sup_weighted_dev`.
    pub rescaled: f64,
    pub argsup: Vec<f64>,
    pub grid_id: u64,
}

/// `Δₙ` and the per-bandwidth profile it maximizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformDeviation {
    pub delta_n: f64,
    /// Index into `profile` of the maximizing bandwidth.
    pub argmax: usize,
    pub profile: Vec<DeviationRecord>,
}

/// Deviation of the estimator with a data-driven bandwidth `h(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDeviation {
    pub n: u64,
    pub sup_weighted_dev: f64,
    /// `sup_weighted_dev / √(|log a_n| / (n a_n))`.
    pub normalized: f64,
    pub argsup: Vec<f64>,
    pub h_at_argsup: f64,
    pub grid_id: u64,
}

/// Estimator value with the bandwidth that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableValue {
    pub value: f64,
    pub h_used: f64,
}

/// Membership of an `Aₙ` point in the two regions of the decomposition at level `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionLabel {
    A1,
    A2,
    Both,
    Neither,
}

/// Summary of the centering bound audit at one bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteringBoundRow {
    pub h: f64,
    /// `max_t (lhs - 2κ√(nh/|log h|) f ψ)` over the grid.
    pub max_excess: f64,
    /// `max_t lhs / (2κ√(nh/|log h|) f ψ)`.
    pub max_ratio: f64,
}

/// The audit of `n ψ(t) E K((X - t)/h^{1/d}) / λₙ(h) ≤ γ + 2κ √(nh/|log h|) f(t) ψ(t)`
/// over the `Aₙ` grid and the dyadic bandwidths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteringBound {
    pub n: u64,
    /// Smallest additive margin making the bound hold at every audited pair.
    pub gamma: f64,
    pub max_ratio: f64,
    pub rows: Vec<CenteringBoundRow>,
}

/// Estimator evaluation and exact centering for one kernel.
#[derive(Debug, Clone)]
pub struct DeviationEngine {
    kernel: Kernel,
    centering: Centering,
}

impl DeviationEngine {
    pub fn new(kernel: &Kernel, quad_points_per_axis: usize) -> Result<Self> {
        Ok(DeviationEngine {
            kernel: kernel.clone(),
            centering: Centering::new(kernel, quad_points_per_axis)?,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn centering(&self) -> &Centering {
        &self.centering
    }

    /// The weighted deviation at bandwidth `h`, using a prepared index of the sample.
    pub fn weighted_deviation_indexed(
        &self,
        index: &KdeIndex<'_>,
        model: &dyn Density,
        h: f64,
        grid: &EvalGrid,
    ) -> Result<DeviationRecord> {
        check_bandwidth(h)?;
        let sample = index.sample();
        let values = index.values(&self.kernel, h, &grid.points);
        let mut best = (f64::NEG_INFINITY, 0usize);
        for i in grid.members() {
            let e = self.centering.eval(model, h, grid.point(i))?;
            let dev = grid.psi[i] * (values[i] - e).abs();
            if dev > best.0 {
                best = (dev, i);
            }
        }
        let n = sample.len() as u64;
        Ok(DeviationRecord {
            n,
            h,
            sup_weighted_dev: best.0,
            rescaled: rescaling(n, h) * best.0,
            argsup: grid.point(best.1).to_vec(),
            grid_id: grid.grid_id,
        })
    }

    pub fn weighted_deviation(
        &self,
        sample: &Sample,
        model: &dyn Density,
        weight: &WeightFunction,
        h: f64,
        grid: &EvalGrid,
    ) -> Result<DeviationRecord> {
        self.check_kernel(sample)?;
        grid.check_matches(sample, model, weight)?;
        self.weighted_deviation_indexed(&KdeIndex::new(sample), model, h, grid)
    }

    /// `Δₙ` over `h_subgrid(n, subgrid_k)`.
    pub fn uniform_deviation(
        &self,
        sample: &Sample,
        model: &dyn Density,
        weight: &WeightFunction,
        window: &BandwidthWindow,
        subgrid_k: u32,
        grid: &EvalGrid,
    ) -> Result<UniformDeviation> {
        self.check_kernel(sample)?;
        grid.check_matches(sample, model, weight)?;
        let hs = window.h_subgrid(sample.len() as u64, subgrid_k)?;
        let index = KdeIndex::new(sample);
        let profile = hs
            .iter()
            .map(|&h| self.weighted_deviation_indexed(&index, model, h, grid))
            .collect::<Result<Vec<_>>>()?;
        let (argmax, delta_n) =
            profile
                .iter()
                .enumerate()
                .map(|(i, r)| (i, r.rescaled))
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
                );
        Ok(UniformDeviation {
            delta_n,
            argmax,
            profile,
        })
    }

    /// `‖ψ(f_{n,h(·)} - E f_{n,h(·)})‖∞` over the `Aₙ` grid points, the centering taken at the
    /// selected bandwidth of each point.
    #[allow(clippy::too_many_arguments)]
    pub fn variable_weighted_deviation(
        &self,
        sample: &Sample,
        model: &dyn Density,
        weight: &WeightFunction,
        selector: &BandwidthSelector,
        window: &BandwidthWindow,
        grid: &EvalGrid,
    ) -> Result<VariableDeviation> {
        self.check_kernel(sample)?;
        grid.check_matches(sample, model, weight)?;
        let index = KdeIndex::new(sample);
        let n = sample.len() as u64;
        let fixed = if selector.is_local() {
            None
        } else {
            Some(selector.select_with_index(&index, None, window)?)
        };
        let mut best = (f64::NEG_INFINITY, 0usize, 0.0);
        for i in grid.members() {
            let t = grid.point(i);
            let h = match fixed {
                Some(h) => h,
                None => selector.select_with_index(&index, Some(t), window)?,
            };
            let v = index.value_at(&self.kernel, h, t);
            let e = self.centering.eval(model, h, t)?;
            let dev = grid.psi[i] * (v - e).abs();
            if dev > best.0 {
                best = (dev, i, h);
            }
        }
        let a = window.a(n as f64);
        let scale = (a.ln().abs() / (n as f64 * a)).sqrt();
        Ok(VariableDeviation {
            n,
            sup_weighted_dev: best.0,
            normalized: best.0 / scale,
            argsup: grid.point(best.1).to_vec(),
            h_at_argsup: best.2,
            grid_id: grid.grid_id,
        })
    }

    /// Audits the centering bound over the `Aₙ` grid points and the dyadic bandwidths.
    pub fn centering_bound(
        &self,
        model: &dyn Density,
        window: &BandwidthWindow,
        n: u64,
        grid: &EvalGrid,
    ) -> Result<CenteringBound> {
        let dyadic = window.dyadic_grid(n)?;
        let kappa = self.kernel.kappa();
        let mut rows = Vec::with_capacity(dyadic.h_list.len());
        for &h in dyadic.h_list.iter().filter(|&&h| h < 1.0) {
            let r = rescaling(n, h);
            let mut max_excess = f64::NEG_INFINITY;
            let mut max_ratio = 0.0f64;
            for i in grid.members() {
                let e = self.centering.eval(model, h, grid.point(i))?;
                let psi = grid.psi[i];
                let lhs = r * psi * e;
                let main = 2.0 * kappa * r * grid.density[i] * psi;
                max_excess = max_excess.max(lhs - main);
                max_ratio = max_ratio.max(lhs / main);
            }
            rows.push(CenteringBoundRow {
                h,
                max_excess,
                max_ratio,
            });
        }
        let gamma = rows.iter().map(|r| r.max_excess).fold(0.0, f64::max);
        let max_ratio = rows.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
        Ok(CenteringBound {
            n,
            gamma,
            max_ratio,
            rows,
        })
    }

    fn check_kernel(&self, sample: &Sample) -> Result<()> {
        if sample.is_empty() {
            return Err(Error::Usage("sample is empty".into()));
        }
        if sample.dim() != self.kernel.dim() {
            return Err(Error::Dimension {
                expected: self.kernel.dim(),
                got: sample.dim(),
            });
        }
        Ok(())
    }
}

/// [`DeviationEngine::weighted_deviation`] with the default centering quadrature.
pub fn weighted_deviation(
    sample: &Sample,
    model: &dyn Density,
    weight: &WeightFunction,
    kernel: &Kernel,
    h: f64,
    grid: &EvalGrid,
) -> Result<DeviationRecord> {
    DeviationEngine::new(kernel, DEFAULT_QUAD_POINTS)?.weighted_deviation(sample, model, weight, h, grid)
}

/// [`DeviationEngine::uniform_deviation`] with the default centering quadrature.
pub fn uniform_deviation(
    sample: &Sample,
    model: &dyn Density,
    weight: &WeightFunction,
    kernel: &Kernel,
    window: &BandwidthWindow,
    subgrid_k: u32,
    grid: &EvalGrid,
) -> Result<UniformDeviation> {
    DeviationEngine::new(kernel, DEFAULT_QUAD_POINTS)?.uniform_deviation(sample, model, weight, window, subgrid_k, grid)
}

/// Estimator values with the selector's bandwidth at each point; every `h_used` lies in
/// `[a_n, b_n]`.
pub fn kde_variable(
    sample: &Sample,
    kernel: &Kernel,
    selector: &BandwidthSelector,
    window: &BandwidthWindow,
    points: &[f64],
) -> Result<Vec<VariableValue>> {
    let d = kernel.dim();
    if sample.is_empty() {
        return Err(Error::Usage("sample is empty".into()));
    }
    if sample.dim() != d || !points.len().is_multiple_of(d) {
        return Err(Error::Dimension {
            expected: d,
            got: if sample.dim() != d {
                sample.dim()
            } else {
                points.len() % d
            },
        });
    }
    if points.is_empty() {
        return Err(Error::Usage("no evaluation points".into()));
    }
    let index = KdeIndex::new(sample);
    let fixed = if selector.is_local() {
        None
    } else {
        Some(selector.select_with_index(&index, None, window)?)
    };
    points
        .chunks_exact(d)
        .map(|t| {
            let h = match fixed {
                Some(h) => h,
                None => selector.select_with_index(&index, Some(t), window)?,
            };
            Ok(VariableValue {
                value: index.value_at(kernel, h, t),
                h_used: h,
            })
        })
        .collect()
}

/// Labels every grid point by membership in `A¹_{n,j}` and `A²_{n,j}`; points outside `Aₙ`
/// get `None`. A point of `Aₙ` in neither region is an invariant violation.
pub fn region_split(
    weight: &WeightFunction,
    window: &BandwidthWindow,
    n: u64,
    j: usize,
    grid: &EvalGrid,
) -> Result<Vec<Option<RegionLabel>>> {
    let labels = region_labels(weight, window, n, j, grid)?;
    if let Some(i) = labels.iter().position(|l| *l == Some(RegionLabel::Neither)) {
        return Err(Error::InvariantViolation {
            point: grid.point(i).to_vec(),
            reason: format!("point of A_n lies in neither region at n = {n}, j = {j}"),
        });
    }
    Ok(labels)
}

/// The labels of [`region_split`] without failing on `Neither`.
pub fn region_labels(
    weight: &WeightFunction,
    window: &BandwidthWindow,
    n: u64,
    j: usize,
    grid: &EvalGrid,
) -> Result<Vec<Option<RegionLabel>>> {
    let dyadic = window.dyadic_grid(n)?;
    if j + 1 > dyadic.l_n {
        return Err(Error::Usage(format!(
            "level j = {j} is outside 0..={} at n = {n}",
            dyadic.l_n.saturating_sub(1)
        )));
    }
    let h = dyadic.h_list[j + 1];
    let nf = n as f64;
    let eps = 1.0 / nf.ln();
    let beta = weight.beta();
    let log_h = h.ln().abs();
    let a1 = eps.powf(1.0 - beta) * (log_h / (nf * h)).sqrt();
    let a2 = eps.powf(-beta) * (nf * h / log_h).powf(beta / (2.0 * (1.0 - beta))) * (1.0 + REGION_REL_TOL);
    Ok(grid
        .a_n_membership
        .iter()
        .enumerate()
        .map(|(i, &member)| {
            if !member {
                return None;
            }
            let psi = grid.psi[i];
            let in1 = grid.density[i] * psi <= a1;
            let in2 = psi <= a2;
            Some(match (in1, in2) {
                (true, true) => RegionLabel::Both,
                (true, false) => RegionLabel::A1,
                (false, true) => RegionLabel::A2,
                (false, false) => RegionLabel::Neither,
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DensityModel;
    use crate::sample::{draw_sample, StreamId};
    use crate::weight::WeightShape;

    fn default_setup(n: usize) -> (DensityModel, WeightFunction, BandwidthWindow, Sample) {
        let m = DensityModel::gaussian(1).unwrap();
        let s = draw_sample(&m, n, StreamId::new(1, 0, 0)).unwrap();
        (
            m,
            WeightFunction::inverse_density(0.25).unwrap(),
            BandwidthWindow::power_law(0.7, 0.3).unwrap(),
            s,
        )
    }

    #[test]
    fn region_contains_twelve_sigma() {
        let (m, w, win, _) = default_setup(2);
        for t in [-12.0, -6.0, 0.0, 6.0, 12.0] {
            assert!(in_region(&m, &w, &win, 1024, &[t]));
        }
        // f = 2^{-120} near |t| = 12.87
        assert!(!in_region(&m, &w, &win, 1024, &[13.0]));
    }

    #[test]
    fn cap_arithmetic() {
        let (m, w, win, s) = default_setup(1024);
        let g = build_eval_grid(&m, &w, &win, 1024, 1000, Some(&s)).unwrap();
        assert!(g.capped);
        assert_eq!(g.per_axis, 1000);
        assert!(g.len() <= 1000 + 1024);
        let plain = build_eval_grid(&m, &w, &win, 1024, 100_000, None).unwrap();
        assert!(!plain.capped);
        assert!(plain.spacing <= 0.5 * win.a(1024.0));
        assert!(build_eval_grid(&m, &w, &win, 1024, 999, None).is_err());
    }

    #[test]
    fn bounded_weight_filters_nothing() {
        let m = DensityModel::gaussian(1).unwrap();
        let w = WeightFunction::new(0.25, WeightShape::Constant { value: 1.0 }).unwrap();
        let win = BandwidthWindow::power_law(0.7, 0.3).unwrap();
        let g = build_eval_grid(&m, &w, &win, 1024, 2000, None).unwrap();
        assert_eq!(g.member_count(), g.len());
    }

    #[test]
    fn degenerate_sample_is_forced() {
        let (m, w, win, _) = default_setup(2);
        let s = Sample::from_points(1, vec![0.3; 1024]).unwrap();
        let k = Kernel::uniform(1).unwrap();
        let g = build_eval_grid(&m, &w, &win, 1024, 1000, Some(&s)).unwrap();
        let h = win.a(1024.0);
        let rec = weighted_deviation(&s, &m, &w, &k, h, &g).unwrap();
        let e = crate::centering::expected_kde(&m, &k, h, &[0.3], 8).unwrap();
        let at = w.eval(&m, &[0.3]).unwrap() * (1.0 / h - e);
        assert!(rec.sup_weighted_dev >= at);
        assert!((rec.sup_weighted_dev - at).abs() <= 1e-12 * at);
        assert_eq!(rec.argsup, vec![0.3]);
    }

    #[test]
    fn rescaled_identity_and_grid_mismatch() {
        let (m, w, win, s) = default_setup(1024);
        let k = Kernel::uniform(1).unwrap();
        let g = build_eval_grid(&m, &w, &win, 1024, 1000, Some(&s)).unwrap();
        let h = 0.05;
        let rec = weighted_deviation(&s, &m, &w, &k, h, &g).unwrap();
        let want = (1024.0 * h / h.ln().abs()).sqrt() * rec.sup_weighted_dev;
        assert!((rec.rescaled - want).abs() <= 1e-12 * want);
        assert!(weighted_deviation(&s.prefix(512), &m, &w, &k, h, &g).is_err());
        assert!(weighted_deviation(&s, &m, &w, &k, 1.0, &g).is_err());
    }

    #[test]
    fn region_split_default_has_no_neither() {
        let (m, w, win, s) = default_setup(1024);
        let g = build_eval_grid(&m, &w, &win, 1024, 4096, Some(&s)).unwrap();
        let l_n = win.dyadic_grid(1024).unwrap().l_n;
        for j in 0..l_n {
            let labels = region_split(&w, &win, 1024, j, &g).unwrap();
            assert_eq!(labels.len(), g.len());
        }
        assert!(region_split(&w, &win, 1024, l_n, &g).is_err());
    }

    #[test]
    fn region_split_reports_witness_when_normalization_breaks() {
        let m = DensityModel::gaussian(1).unwrap();
        // fψ = 50 everywhere: neither region holds near the mode
        let w = WeightFunction::new(0.25, WeightShape::InverseDensityPower { scale: 1e6 }).unwrap();
        let win = BandwidthWindow::power_law(0.7, 0.3).unwrap();
        let g = build_eval_grid(&m, &w, &win, 1024, 1000, None).unwrap();
        match region_split(&w, &win, 1024, 0, &g) {
            Err(Error::InvariantViolation { point, .. }) => assert_eq!(point.len(), 1),
            other => panic!("expected a witness, got {other:?}"),
        }
    }

    #[test]
    fn variable_fixed_a_matches_fixed_bandwidth() {
        let (_, _, win, s) = default_setup(1024);
        let k = Kernel::uniform(1).unwrap();
        let pts: Vec<f64> = (0..50).map(|i| -2.5 + 0.1 * i as f64).collect();
        let var = kde_variable(&s, &k, &BandwidthSelector::FixedA, &win, &pts).unwrap();
        let fixed = crate::estimator::kde_fast(&s, &k, win.a(1024.0), &pts).unwrap();
        for (v, f) in var.iter().zip(&fixed) {
            assert_eq!(v.value, *f);
        }
        let knn = kde_variable(&s, &k, &BandwidthSelector::KnnLocal, &win, &pts).unwrap();
        for v in knn {
            assert!(v.h_used >= win.a(1024.0) && v.h_used <= win.b(1024.0));
        }
    }

    #[test]
    fn centering_bound_has_no_margin_on_default() {
        let (m, w, win, s) = default_setup(512);
        let k = Kernel::uniform(1).unwrap();
        let g = build_eval_grid(&m, &w, &win, 512, 1000, Some(&s)).unwrap();
        let engine = DeviationEngine::new(&k, 8).unwrap();
        let cb = engine.centering_bound(&m, &win, 512, &g).unwrap();
        assert!(cb.gamma >= 0.0);
        assert!(cb.max_ratio > 0.4 && cb.max_ratio < 1.0);
    }

    #[test]
    fn integer_roots() {
        assert_eq!(integer_root(1000, 1), 1000);
        assert_eq!(integer_root(1000, 2), 31);
        assert_eq!(integer_root(1000, 3), 10);
        assert_eq!(integer_root(4096, 2), 64);
    }
}
