//! Grid auditors for the regularity assumptions on `f` and `ψ` and for the tail conditions
//! `t P{ψ(X) > λ(t)} < ∞` and `∫₁^∞ P{ψ(X) > λ(t)} dt < ∞`.
//!
//! The conditions quantify over continua, so every verdict is a certificate for the audited
//! grid only: "no violation found" names the grid it was found on.

// float methods come from the trait under no_std and are inherent when std is linked
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthWindow;
use crate::error::{Error, Result};
use crate::model::Density;
use crate::sample::{draw_sample, StreamId};
use crate::weight::WeightFunction;

/// The `r` values audited for the conditions quantified over every `r > 0`.
pub const R_LIST: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// Two-sided 99% normal quantile used by the Wilson bands.
pub const WILSON_Z: f64 = 2.5758293035489004;

/// Fewest Monte Carlo draws accepted when a model has no closed-form tail.
pub const MIN_MC_SAMPLES: usize = 100_000;

/// Largest accepted ratio between consecutive `t` grid points.
const MAX_T_RATIO: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NoViolationFound,
    Violated,
    /// A Monte Carlo band straddles the decision boundary.
    Indeterminate,
}

/// The point at which a condition was found to fail (or the extremal point when it holds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// One of `D.i`, `D.ii`, `W.ii`, `W.iii`, `WD.i`, `WD.ii`, `tail-1.1`, `tail-1.2`.
    pub condition_id: String,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub audited_grid_spec: String,
    pub numeric_margin: f64,
}

/// The `x` grid of the regularity audit: `points_per_axis` points per axis over the model's
/// bounding box, restricted to `B_f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditGrid {
    pub points_per_axis: usize,
}

impl AuditGrid {
    /// 4097 points per axis, reduced so that the grid holds at most `2^18` points.
    pub fn default_for(dim: usize) -> Self {
        let mut m = 4097usize;
        while m > 2 && (m as f64).powi(dim as i32) > (1u64 << 18) as f64 {
            m -= 1;
        }
        AuditGrid { points_per_axis: m }
    }

    fn describe(&self, model: &dyn Density) -> String {
        let b = model.bounding_box();
        format!(
            "x: {} per axis on {:?}..{:?} within B_f; y: axis points at ±h, ±h/2 and cube corners at ±h",
            self.points_per_axis, b.lo, b.hi
        )
    }
}

/// The `y` stencil of sup-norm radius `h`: `±h` and `±h/2` on each axis plus the `2^d` corners.
fn stencil(d: usize, h: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 0..d {
        for s in [-h, -0.5 * h, 0.5 * h, h] {
            let mut y = vec![0.0; d];
            y[k] = s;
            out.extend_from_slice(&y);
        }
    }
    if d > 1 {
        for mask in 0..(1usize << d) {
            out.extend((0..d).map(|k| if mask >> k & 1 == 1 { h } else { -h }));
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
struct Extremum {
    value: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    h: f64,
}

impl Extremum {
    fn offer(&mut self, value: f64, x: &[f64], y: &[f64], h: f64) {
        if value > self.value || self.x.is_empty() {
            self.value = value;
            self.x = x.to_vec();
            self.y = y.to_vec();
            self.h = h;
        }
    }

    fn witness(&self) -> Option<Witness> {
        if self.x.is_empty() {
            return None;
        }
        Some(Witness {
            x: Some(self.x.clone()),
            y: Some(self.y.clone()),
            h: Some(self.h),
            t: None,
        })
    }
}

/// Audits `D.i`, `W.ii` (per `δ`), `WD.i`, and `D.ii`, `W.iii`, `WD.ii` (per `r` in
/// [`R_LIST`]) over the `(x, y, h)` grid.
///
/// For `D.i` and `W.ii` the smallest constant `c` that works on the grid is reported, with
/// `h₀` the largest bandwidth of the sweep. For the limit conditions the supremum over the
/// grid-restricted `F_r(h)` or `G_r(h)` is computed per `h`; the verdict is a violation when the
/// supremum at the smallest `h` exceeds half the largest supremum, or when the second half of
/// the sweep is not non-increasing.
pub fn check_regularity(
    model: &dyn Density,
    weight: &WeightFunction,
    delta_list: &[f64],
    h_sweep: &[f64],
    grid: &AuditGrid,
) -> Result<Vec<ConditionReport>> {
    if delta_list.is_empty() || delta_list.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
        return Err(Error::Usage(
            "delta_list must be a nonempty list of values in (0, 1)".into(),
        ));
    }
    if h_sweep.is_empty() || h_sweep.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
        return Err(Error::Usage(
            "h_sweep must be a nonempty list of positive bandwidths".into(),
        ));
    }
    if h_sweep.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Usage("h_sweep must be strictly decreasing".into()));
    }
    if grid.points_per_axis < 2 {
        return Err(Error::Usage("audit grid needs at least 2 points per axis".into()));
    }
    let d = model.dim();
    let xs = audit_points(model, grid.points_per_axis);
    let nr = R_LIST.len();
    let nd = delta_list.len();

    let mut c_density = vec![Extremum::default(); nd];
    let mut c_weight = vec![Extremum::default(); nd];
    let mut wd = Extremum::default();
    // [r][h] suprema for D.ii, W.iii, WD.ii
    let mut d2 = vec![vec![Extremum::default(); h_sweep.len()]; nr];
    let mut w3 = d2.clone();
    let mut wd2 = d2.clone();

    let mut xy = vec![0.0; d];
    for x in xs.chunks_exact(d) {
        let fx = checked_pdf(model, x)?;
        let px = weight.at_density(fx);
        wd.offer(weight.weighted_density(fx), x, &[], 0.0);
        for (hi, &h) in h_sweep.iter().enumerate() {
            let ys = stencil(d, h);
            for y in ys.chunks_exact(d) {
                for k in 0..d {
                    xy[k] = x[k] + y[k];
                }
                if !model.in_positivity_set(&xy) {
                    continue;
                }
                let fy = checked_pdf(model, &xy)?;
                let py = weight.at_density(fy);
                for (di, &delta) in delta_list.iter().enumerate() {
                    let cd = (fx.powf(1.0 + delta) / fy).max(fy / fx.powf(1.0 - delta));
                    c_density[di].offer(cd, x, y, h);
                    let cw = (px.powf(1.0 - delta) / py).max(py / px.powf(1.0 + delta));
                    c_weight[di].offer(cw, x, y, h);
                }
                let f_ratio = (fy / fx - 1.0).abs();
                let p_ratio = (py / px - 1.0).abs();
                for (ri, &r) in R_LIST.iter().enumerate() {
                    if fx >= h.powf(r) {
                        d2[ri][hi].offer(f_ratio, x, y, h);
                    }
                    if px <= h.powf(-r) {
                        w3[ri][hi].offer(p_ratio, x, y, h);
                        wd2[ri][hi].offer(f_ratio, x, y, h);
                    }
                }
            }
        }
    }

    let spec = grid.describe(model);
    let sweep = format!("h_sweep {:?}", h_sweep);
    let mut reports = Vec::new();
    for (di, &delta) in delta_list.iter().enumerate() {
        for (id, ext) in [("D.i", &c_density[di]), ("W.ii", &c_weight[di])] {
            let finite = ext.value.is_finite();
            reports.push(ConditionReport {
                condition_id: id.into(),
                verdict: if finite {
                    Verdict::NoViolationFound
                } else {
                    Verdict::Violated
                },
                witness: ext.witness(),
                audited_grid_spec: format!(
                    "{spec}; {sweep}; h0 = {}; delta = {delta}; margin is the smallest c",
                    h_sweep[0]
                ),
                numeric_margin: ext.value,
            });
        }
    }
    reports.push(ConditionReport {
        condition_id: "WD.i".into(),
        verdict: if wd.value.is_finite() {
            Verdict::NoViolationFound
        } else {
            Verdict::Violated
        },
        witness: wd.witness().map(|w| Witness { y: None, h: None, ..w }),
        audited_grid_spec: format!("{spec}; margin is max f^beta psi"),
        numeric_margin: wd.value,
    });
    for (ri, &r) in R_LIST.iter().enumerate() {
        for (id, seq) in [("D.ii", &d2[ri]), ("W.iii", &w3[ri]), ("WD.ii", &wd2[ri])] {
            reports.push(limit_report(id, r, seq, &spec, &sweep));
        }
    }
    Ok(reports)
}

fn limit_report(id: &str, r: f64, seq: &[Extremum], spec: &str, sweep: &str) -> ConditionReport {
    let values: Vec<f64> = seq.iter().map(|e| e.value).collect();
    let last = *values.last().expect("nonempty sweep");
    let peak = values.iter().copied().fold(0.0, f64::max);
    let tail = &values[values.len() / 2..];
    let monotone = tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-15);
    let shrinks = last <= 0.5 * peak || peak == 0.0;
    let ok = monotone && shrinks && last.is_finite();
    ConditionReport {
        condition_id: id.into(),
        verdict: if ok {
            Verdict::NoViolationFound
        } else {
            Verdict::Violated
        },
        witness: seq.last().and_then(Extremum::witness),
        audited_grid_spec: format!("{spec}; {sweep}; r = {r}; sup per h {values:?}"),
        numeric_margin: last,
    }
}

fn checked_pdf(model: &dyn Density, t: &[f64]) -> Result<f64> {
    let f = model.pdf(t);
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::ModelInconsistency {
            point: t.to_vec(),
            reason: format!("pdf = {f} at a point of the positivity set"),
        });
    }
    Ok(f)
}

/// Regular grid over the bounding box, restricted to `B_f`, row-major.
fn audit_points(model: &dyn Density, m: usize) -> Vec<f64> {
    let d = model.dim();
    let b = model.bounding_box();
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    let mut t = vec![0.0; d];
    'outer: loop {
        for k in 0..d {
            t[k] = b.lo[k] + (b.hi[k] - b.lo[k]) * idx[k] as f64 / (m - 1) as f64;
        }
        if model.in_positivity_set(&t) {
            out.extend_from_slice(&t);
        }
        for k in 0..d {
            idx[k] += 1;
            if idx[k] < m {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMode {
    /// `t P{ψ(X) > λ(t)}` stays bounded.
    Limsup,
    /// `∫₁^∞ P{ψ(X) > λ(t)} dt` converges.
    Integral,
}

impl TailMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "limsup" => Ok(TailMode::Limsup),
            "integral" => Ok(TailMode::Integral),
            other => Err(Error::Usage(format!(
                "unknown tail mode '{other}' (expected limsup or integral)"
            ))),
        }
    }

    fn condition_id(self) -> &'static str {
        match self {
            TailMode::Limsup => "tail-1.1",
            TailMode::Integral => "tail-1.2",
        }
    }
}

/// Monte Carlo settings for models without a closed-form tail of `ψ(X)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub samples: usize,
    pub stream: StreamId,
}

/// Geometric grid `10^{i/per_decade}`, `i = 0..=decades·per_decade`.
pub fn geometric_t_grid(decades: u32, per_decade: u32) -> Vec<f64> {
    let steps = decades * per_decade;
    (0..=steps).map(|i| 10f64.powf(i as f64 / per_decade as f64)).collect()
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Audits the tail condition along `t_grid`.
///
/// The exceedance probability is analytic where the model and weight support it, otherwise
/// it is estimated from `mc` draws with 99% Wilson bands. The tracked quantity is `t P(t)`
/// (limsup) or the running trapezoid integral of `P` (integral). There is no violation when,
/// over the top decade of the grid, `t P` is non-increasing or stays below its maximum over
/// the previous decade; for the integral, when the top decade adds strictly less than the
/// previous one. When the two band edges disagree the verdict is indeterminate.
pub fn check_tail_condition(
    model: &dyn Density,
    weight: &WeightFunction,
    window: &BandwidthWindow,
    t_grid: &[f64],
    mode: TailMode,
    mc: Option<MonteCarlo>,
) -> Result<ConditionReport> {
    validate_t_grid(t_grid)?;
    let lambdas: Vec<f64> = t_grid.iter().map(|&t| window.lambda(t)).collect();
    let analytic: Option<Vec<f64>> = lambdas.iter().map(|&l| weight.analytic_exceedance(model, l)).collect();
    let (lower, upper, method) = match analytic {
        Some(p) => (p.clone(), p, String::from("analytic")),
        None => {
            let mc = mc.ok_or_else(|| {
                Error::Usage("model has no analytic tail for this weight; Monte Carlo samples are required".into())
            })?;
            if mc.samples < MIN_MC_SAMPLES {
                return Err(Error::Usage(format!(
                    "Monte Carlo needs at least {MIN_MC_SAMPLES} samples, got {}",
                    mc.samples
                )));
            }
            let sample = draw_sample(model, mc.samples, mc.stream)?;
            let mut psi: Vec<f64> = sample
                .iter()
                .map(|x| weight.eval(model, x).unwrap_or(f64::INFINITY))
                .collect();
            psi.sort_unstable_by(|a, b| a.total_cmp(b));
            let mut lo = Vec::with_capacity(lambdas.len());
            let mut hi = Vec::with_capacity(lambdas.len());
            for &l in &lambdas {
                let k = psi.len() - psi.partition_point(|&p| p <= l);
                let (a, b) = wilson_interval(k, psi.len(), WILSON_Z);
                lo.push(a);
                hi.push(b);
            }
            (lo, hi, format!("monte carlo, {} draws, 99% Wilson bands", mc.samples))
        }
    };

    let evaluate = |p: &[f64]| -> (bool, f64, f64) {
        match mode {
            TailMode::Limsup => limsup_verdict(t_grid, p),
            TailMode::Integral => integral_verdict(t_grid, p),
        }
    };
    let (ok_lo, margin_lo, t_lo) = evaluate(&lower);
    let (ok_hi, margin_hi, t_hi) = evaluate(&upper);
    let (verdict, margin, t_w) = match (ok_lo, ok_hi) {
        (true, true) => (Verdict::NoViolationFound, margin_hi, t_hi),
        (false, false) => (Verdict::Violated, margin_lo, t_lo),
        _ => (Verdict::Indeterminate, margin_hi, t_hi),
    };
    let t_max = *t_grid.last().expect("validated grid");
    let tracked = match mode {
        TailMode::Limsup => "margin is sup of t*P over the upper half of the grid",
        TailMode::Integral => "margin is the trapezoid integral of P over the grid; truncated at the grid end, the tail beyond it is not included",
    };
    Ok(ConditionReport {
        condition_id: mode.condition_id().into(),
        verdict,
        witness: Some(Witness {
            x: None,
            y: None,
            h: None,
            t: Some(t_w),
        }),
        audited_grid_spec: format!(
            "t: {} geometric points on [{}, {t_max}]; {method}; {tracked}",
            t_grid.len(),
            t_grid[0]
        ),
        numeric_margin: margin,
    })
}

fn validate_t_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.len() < 3 || t_grid.iter().any(|&t| !(t >= 1.0 && t.is_finite())) {
        return Err(Error::Usage("t_grid needs at least 3 finite points, all >= 1".into()));
    }
    if t_grid
        .windows(2)
        .any(|w| !(w[1] > w[0] && w[1] <= MAX_T_RATIO * w[0] * (1.0 + 1e-12)))
    {
        return Err(Error::Usage("t_grid must be increasing with ratio at most 2".into()));
    }
    if t_grid[t_grid.len() - 1] < 100.0 * t_grid[0] {
        return Err(Error::Usage("t_grid must span at least two decades".into()));
    }
    Ok(())
}

/// Index of the first grid point of the top decade and of the decade below it.
fn decades(t_grid: &[f64]) -> (usize, usize) {
    let t_max = t_grid[t_grid.len() - 1];
    let top = t_grid.partition_point(|&t| t < t_max / 10.0 * (1.0 - 1e-12));
    let prev = t_grid.partition_point(|&t| t < t_max / 100.0 * (1.0 - 1e-12));
    (top, prev)
}

/// `(no violation, sup of t P over the upper half, t at the top-decade maximum)`.
fn limsup_verdict(t_grid: &[f64], p: &[f64]) -> (bool, f64, f64) {
    let q: Vec<f64> = t_grid.iter().zip(p).map(|(t, p)| t * p).collect();
    let (top, prev) = decades(t_grid);
    let top_q = &q[top..];
    let non_increasing = top_q.windows(2).all(|w| w[1] <= w[0]);
    let max_top = top_q.iter().copied().fold(0.0, f64::max);
    let max_prev = q[prev..top].iter().copied().fold(0.0, f64::max);
    let half = q.len() / 2;
    let margin = q[half..].iter().copied().fold(0.0, f64::max);
    let arg = top
        + top_q
            .iter()
            .enumerate()
            .fold(0, |a, (i, &v)| if v > top_q[a] { i } else { a });
    (non_increasing || max_top <= max_prev, margin, t_grid[arg])
}

/// `(no violation, trapezoid integral, last grid point)`.
fn integral_verdict(t_grid: &[f64], p: &[f64]) -> (bool, f64, f64) {
    let mut cumulative = vec![0.0; t_grid.len()];
    for i in 1..t_grid.len() {
        cumulative[i] = cumulative[i - 1] + 0.5 * (p[i] + p[i - 1]) * (t_grid[i] - t_grid[i - 1]);
    }
    let (top, prev) = decades(t_grid);
    let last = cumulative[t_grid.len() - 1];
    let inc_top = last - cumulative[top];
    let inc_prev = cumulative[top] - cumulative[prev];
    let ok = inc_top < inc_prev || (inc_top == 0.0 && inc_prev == 0.0);
    (ok, last, t_grid[t_grid.len() - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoxRegion, DensityModel};
    use crate::weight::WeightShape;
    use alloc::boxed::Box;
    use rand::RngCore;

    fn sweep() -> Vec<f64> {
        (2..=9).map(|k| (-(k as f64)).exp2()).collect()
    }

    #[test]
    fn gaussian_inverse_density_is_regular() {
        let m = DensityModel::gaussian(1).unwrap();
        let w = WeightFunction::inverse_density(0.25).unwrap();
        let reports = check_regularity(&m, &w, &[0.05, 0.1, 0.2], &sweep(), &AuditGrid::default_for(1)).unwrap();
        for r in &reports {
            assert_eq!(r.verdict, Verdict::NoViolationFound, "{r:?}");
            assert!(r.numeric_margin.is_finite());
        }
        let wd = reports.iter().find(|r| r.condition_id == "WD.i").unwrap();
        assert!((wd.numeric_margin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_box_has_unit_constant() {
        let m = DensityModel::uniform_box(vec![0.0], vec![1.0]).unwrap();
        let w = WeightFunction::new(0.25, WeightShape::Constant { value: 1.0 }).unwrap();
        let reports = check_regularity(&m, &w, &[0.1], &sweep(), &AuditGrid::default_for(1)).unwrap();
        let di = reports.iter().find(|r| r.condition_id == "D.i").unwrap();
        assert_eq!(di.numeric_margin, 1.0);
    }

    /// Density 1/8 on (-2, 0) and 3/8 on [0, 2): a step at 0 inside the positivity set.
    struct Step;

    impl Density for Step {
        fn dim(&self) -> usize {
            1
        }
        fn name(&self) -> String {
            "step".into()
        }
        fn pdf(&self, t: &[f64]) -> f64 {
            if !self.in_positivity_set(t) {
                0.0
            } else if t[0] < 0.0 {
                0.125
            } else {
                0.375
            }
        }
        fn sup_pdf(&self) -> f64 {
            0.375
        }
        fn in_positivity_set(&self, t: &[f64]) -> bool {
            t[0] > -2.0 && t[0] < 2.0
        }
        fn bounding_box(&self) -> BoxRegion {
            BoxRegion::cube(1, 2.0)
        }
        fn sample_point(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
            let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            out[0] = if u < 0.25 { -2.0 + 8.0 * u } else { (u - 0.25) / 0.375 };
        }
    }

    #[test]
    fn step_density_violates_d_ii_with_straddling_witness() {
        let w = WeightFunction::inverse_density(0.25).unwrap();
        let reports = check_regularity(&Step, &w, &[0.1], &sweep(), &AuditGrid::default_for(1)).unwrap();
        let r = reports
            .iter()
            .find(|r| r.condition_id == "D.ii" && r.audited_grid_spec.contains("r = 1;"))
            .unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        let wit = r.witness.as_ref().unwrap();
        let (x, y) = (wit.x.as_ref().unwrap()[0], wit.y.as_ref().unwrap()[0]);
        assert!(x.min(x + y) < 0.0 && x.max(x + y) >= 0.0, "x={x} y={y}");
        // re-evaluating the witness reproduces the margin
        assert_eq!((Step.pdf(&[x + y]) / Step.pdf(&[x]) - 1.0).abs(), r.numeric_margin);
    }

    #[test]
    fn zero_density_inside_positivity_set_is_inconsistent() {
        struct Broken;
        impl Density for Broken {
            fn dim(&self) -> usize {
                1
            }
            fn name(&self) -> String {
                "broken".into()
            }
            fn pdf(&self, t: &[f64]) -> f64 {
                if t[0].abs() < 0.1 {
                    0.0
                } else {
                    0.25
                }
            }
            fn sup_pdf(&self) -> f64 {
                0.25
            }
            fn in_positivity_set(&self, t: &[f64]) -> bool {
                t[0].abs() < 2.0
            }
            fn bounding_box(&self) -> BoxRegion {
                BoxRegion::cube(1, 2.0)
            }
            fn sample_point(&self, _rng: &mut dyn RngCore, out: &mut [f64]) {
                out[0] = 1.0;
            }
        }
        let w = WeightFunction::inverse_density(0.25).unwrap();
        let b: Box<dyn Density> = Box::new(Broken);
        assert!(matches!(
            check_regularity(b.as_ref(), &w, &[0.1], &sweep(), &AuditGrid::default_for(1)),
            Err(Error::ModelInconsistency { .. })
        ));
    }

    #[test]
    fn tail_verdicts() {
        let win = BandwidthWindow::power_law(0.7, 0.3).unwrap();
        let t = geometric_t_grid(12, 8);
        let g = DensityModel::gaussian(1).unwrap();
        // t P grows like t^{1 - (1-α)/(2β)} = t^{0.4} for β = 1/4
        let w = WeightFunction::inverse_density(0.25).unwrap();
        let r = check_tail_condition(&g, &w, &win, &t, TailMode::Limsup, None).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        // β = 0.1 gives exponent 1 - 1.5 < 0
        let w = WeightFunction::inverse_density(0.1).unwrap();
        let r = check_tail_condition(&g, &w, &win, &t, TailMode::Limsup, None).unwrap();
        assert_eq!(r.verdict, Verdict::NoViolationFound);
        let c = DensityModel::cauchy(1.0).unwrap();
        let r = check_tail_condition(&c, &w, &win, &t, TailMode::Limsup, None).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        let r = check_tail_condition(&c, &w, &win, &t, TailMode::Integral, None).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        let bounded = WeightFunction::new(0.25, WeightShape::Constant { value: 1.0 }).unwrap();
        let r = check_tail_condition(&g, &bounded, &win, &t, TailMode::Limsup, None).unwrap();
        assert_eq!(r.verdict, Verdict::NoViolationFound);
        assert_eq!(r.numeric_margin, 0.0);
    }

    #[test]
    fn t_grid_validation() {
        let win = BandwidthWindow::power_law(0.7, 0.3).unwrap();
        let g = DensityModel::gaussian(1).unwrap();
        let w = WeightFunction::inverse_density(0.1).unwrap();
        let coarse: Vec<f64> = (0..10).map(|i| 10f64.powi(i)).collect();
        assert!(check_tail_condition(&g, &w, &win, &coarse, TailMode::Limsup, None).is_err());
    }

    #[test]
    fn wilson_contains_point_estimate() {
        let (lo, hi) = wilson_interval(30, 1000, WILSON_Z);
        assert!(lo < 0.03 && 0.03 < hi);
        let (lo, hi) = wilson_interval(0, 100_000, WILSON_Z);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 1e-4);
    }
}
