//! Monte Carlo experiments. Every replication owns a keyed random stream, tasks run on a
//! rayon pool of the requested size and results are merged in `(n, replication)` order, so
//! the output does not depend on the worker count.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wkde::conditions::{
    check_regularity, check_tail_condition, AuditGrid, ConditionReport, MonteCarlo, TailMode, Verdict,
};
use wkde::deviation::{build_eval_grid, DeviationEngine, UniformDeviation};
use wkde::functional::{functional_bound_check, BoundCheckSpec};
use wkde::sample::{draw_sample, PATH_STREAM};
use wkde::{BandwidthSelector, Sample, StreamId};

use crate::config::{ExperimentConfig, Resolved};
use crate::error::{LabError, Result};

/// Largest slope of `log q50` against `log n` still read as bounded.
pub const BOUNDED_SLOPE: f64 = 0.05;
/// Smallest slope read as growth by the necessity demo.
pub const GROWTH_SLOPE: f64 = 0.1;
/// Largest relative increase of a path's running maximum over the last half of `n_list`.
pub const PATH_STABILITY: f64 = 0.10;
/// Relative slack allowed when checking that the centering margin decreases.
pub const CENTERING_NOISE: f64 = 0.05;
/// Replications below this count give indicative verdicts only.
pub const MIN_REPLICATIONS: u32 = 50;

/// Stream index of the Monte Carlo tail audit.
const CONDITION_STREAM: u64 = PATH_STREAM - 1;
/// Stream index of the bandwidth draws of the functional sweep.
const BANDWIDTH_STREAM: u64 = PATH_STREAM - 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    Fail,
    NotApplicable,
    /// Illustration only; never fails.
    Demo,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Fail => 1,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub n: u64,
    pub count: usize,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub rows: Vec<QuantileRow>,
    /// Least-squares slope of `log q50` on `log n`; `None` with fewer than two rows.
    pub slope: Option<f64>,
}

impl Series {
    fn from_values(name: &str, per_n: &[(u64, Vec<f64>)]) -> Self {
        let rows: Vec<QuantileRow> = per_n
            .iter()
            .map(|(n, v)| QuantileRow {
                n: *n,
                count: v.len(),
                q10: quantile(v, 0.1),
                q50: quantile(v, 0.5),
                q90: quantile(v, 0.9),
            })
            .collect();
        let slope = log_slope(&rows);
        Series {
            name: name.into(),
            rows,
            slope,
        }
    }
}

/// Raw records as a header plus text rows (numbers in shortest round-trip form).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    fn new(header: &[&str]) -> Self {
        RawTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub outcome: Outcome,
    pub series: Vec<Series>,
    /// Named scalar diagnostics (per-path stabilization, counts, ...).
    pub metrics: BTreeMap<String, f64>,
    pub conditions: Vec<ConditionReport>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub raw: RawTable,
}

impl ExperimentResult {
    fn new(experiment: &str) -> Self {
        ExperimentResult {
            experiment: experiment.into(),
            outcome: Outcome::NotApplicable,
            series: Vec::new(),
            metrics: BTreeMap::new(),
            conditions: Vec::new(),
            notes: Vec::new(),
            raw: RawTable::default(),
        }
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }
}

/// Linear-interpolation quantile of unsorted values (`NaN` when empty).
pub fn quantile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Least-squares slope of `log q50` against `log n`.
pub fn log_slope(rows: &[QuantileRow]) -> Option<f64> {
    if rows.len() < 2 || rows.iter().any(|r| r.q50.is_nan() || r.q50 <= 0.0) {
        return None;
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.q50.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub(crate) fn fmt_coords(t: &[f64]) -> String {
    t.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

/// Maps `f` over `items` on a pool of `workers` threads, keeping the input order. The first
/// error in input order is returned, whichever task failed first in time.
fn par_map<T, R, F>(workers: usize, items: Vec<T>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| LabError::Config(format!("cannot start {workers} workers: {e}")))?;
    let out: Vec<Result<R>> = pool.install(|| items.into_par_iter().map(f).collect());
    out.into_iter().collect()
}

fn engine(cfg: &ExperimentConfig, r: &Resolved) -> Result<DeviationEngine> {
    Ok(DeviationEngine::new(&r.kernel, cfg.quad_points)?)
}

fn to_usize(n: u64) -> Result<usize> {
    usize::try_from(n).map_err(|_| LabError::Config(format!("sample size {n} does not fit in memory")))
}

fn delta_n(cfg: &ExperimentConfig, r: &Resolved, e: &DeviationEngine, sample: &Sample) -> Result<UniformDeviation> {
    let n = sample.len() as u64;
    let grid = build_eval_grid(&r.model, &r.weight, &r.window, n, cfg.grid_cap, Some(sample))?;
    Ok(e.uniform_deviation(sample, &r.model, &r.weight, &r.window, cfg.subgrid_k, &grid)?)
}

/// The tail audit of `mode` for the configured model, weight and window.
pub fn tail_report(cfg: &ExperimentConfig, r: &Resolved, mode: TailMode) -> Result<ConditionReport> {
    let mc = MonteCarlo {
        samples: cfg.mc_samples,
        stream: StreamId::new(cfg.seed, 0, CONDITION_STREAM),
    };
    Ok(check_tail_condition(
        &r.model,
        &r.weight,
        &r.window,
        &cfg.t_grid(),
        mode,
        Some(mc),
    )?)
}

fn require_tail(cfg: &ExperimentConfig, r: &Resolved, mode: TailMode, res: &mut ExperimentResult) -> Result<()> {
    let report = tail_report(cfg, r, mode)?;
    let verdict = report.verdict;
    let id = report.condition_id.clone();
    let detail = format!("margin {}, {}", report.numeric_margin, report.audited_grid_spec);
    res.conditions.push(report);
    match verdict {
        Verdict::Violated if !cfg.override_tail => Err(LabError::TailRefused { condition: id, detail }),
        Verdict::Violated => {
            res.notes.push(format!("{id} is violated; run forced by override_tail"));
            Ok(())
        }
        Verdict::Indeterminate => {
            res.notes.push(format!("{id} is indeterminate on the audited grid"));
            Ok(())
        }
        Verdict::NoViolationFound => Ok(()),
    }
}

/// `R` replications of `Δₙ` for every `n`, returned per `n` in order.
fn replicate_delta(cfg: &ExperimentConfig, r: &Resolved, workers: usize) -> Result<Vec<(u64, Vec<UniformDeviation>)>> {
    let e = engine(cfg, r)?;
    let tasks: Vec<(u64, u32)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |rep| (n, rep)))
        .collect();
    let results = par_map(workers, tasks, |(n, rep)| {
        let sample = draw_sample(&r.model, to_usize(n)?, StreamId::new(cfg.seed, rep as u64, n))?;
        delta_n(cfg, r, &e, &sample)
    })?;
    let mut it = results.into_iter();
    Ok(cfg
        .n_list
        .iter()
        .map(|&n| (n, it.by_ref().take(cfg.replications as usize).collect()))
        .collect())
}

fn delta_result(name: &str, cfg: &ExperimentConfig, per_n: &[(u64, Vec<UniformDeviation>)]) -> ExperimentResult {
    let mut res = ExperimentResult::new(name);
    let mut raw = RawTable::new(&["n", "replication", "delta_n", "h_at_max", "argsup_coords", "grid_id"]);
    let mut values = Vec::with_capacity(per_n.len());
    for (n, devs) in per_n {
        for (rep, u) in devs.iter().enumerate() {
            let best = &u.profile[u.argmax];
            raw.push(vec![
                n.to_string(),
                rep.to_string(),
                fmt_f64(u.delta_n),
                fmt_f64(best.h),
                fmt_coords(&best.argsup),
                format!("{:016x}", best.grid_id),
            ]);
        }
        values.push((*n, devs.iter().map(|u| u.delta_n).collect::<Vec<_>>()));
    }
    res.series.push(Series::from_values("delta_n", &values));
    res.raw = raw;
    if cfg.replications < MIN_REPLICATIONS {
        res.notes.push(format!(
            "{} replications per n (fewer than {MIN_REPLICATIONS}); the verdict is indicative only",
            cfg.replications
        ));
    }
    res
}

/// Stochastic boundedness of `Δₙ`: PASS iff the median grows with slope at most
/// [`BOUNDED_SLOPE`] in `log n`. Refuses to run when the tail condition is violated unless
/// `override_tail` is set.
pub fn run_boundedness(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    let r = cfg.resolve()?;
    let mut pre = ExperimentResult::new("boundedness");
    require_tail(cfg, &r, TailMode::Limsup, &mut pre)?;
    let per_n = replicate_delta(cfg, &r, workers)?;
    let mut res = delta_result("boundedness", cfg, &per_n);
    res.conditions = pre.conditions;
    res.notes.splice(0..0, pre.notes);
    let slope = res.series[0].slope;
    res.outcome = match slope {
        None => {
            res.notes.push("a single n: slope not applicable".into());
            Outcome::NotApplicable
        }
        Some(s) if s <= BOUNDED_SLOPE => Outcome::Pass,
        Some(_) => Outcome::Fail,
    };
    Ok(res)
}

/// The boundedness pipeline without the tail refusal, reporting growth of the median.
pub fn run_necessity(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    let r = cfg.resolve()?;
    let report = tail_report(cfg, &r, TailMode::Limsup)?;
    let per_n = replicate_delta(cfg, &r, workers)?;
    let mut res = delta_result("necessity", cfg, &per_n);
    res.conditions.push(report);
    res.outcome = Outcome::Demo;
    res.notes
        .push("illustrative demo of growth when the tail condition fails; not a proof of necessity".into());
    match res.series[0].slope {
        None => res
            .notes
            .push("a single n: raw trajectory only, no slope verdict".into()),
        Some(s) => {
            res.metrics.insert("slope".into(), s);
            res.notes.push(if s >= GROWTH_SLOPE {
                format!("growth observed: slope {s:.4} >= {GROWTH_SLOPE}")
            } else {
                format!("no growth observed: slope {s:.4} < {GROWTH_SLOPE}")
            });
        }
    }
    if cfg.replications == 1 {
        res.notes
            .push("one replication: the slope carries no confidence".into());
    }
    Ok(res)
}

/// Relative increase of a running maximum over the last half of the list.
pub fn stabilization(running_max: &[f64]) -> Option<f64> {
    if running_max.len() < 2 {
        return None;
    }
    let mid = running_max.len() / 2 - 1;
    let last = running_max[running_max.len() - 1];
    Some((last - running_max[mid]) / running_max[mid])
}

/// Nested sample paths grown along `n_list`; PASS iff every path's running maximum of `Δₙ`
/// increases by at most [`PATH_STABILITY`] over the last half of the list.
pub fn run_path(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    let r = cfg.resolve()?;
    let mut res = ExperimentResult::new("path");
    require_tail(cfg, &r, TailMode::Integral, &mut res)?;
    let e = engine(cfg, &r)?;
    let n_max = *cfg.n_list.iter().max().expect("validated non-empty");
    let paths: Vec<u32> = (0..cfg.paths).collect();
    let deltas = par_map(workers, paths, |p| {
        let full = draw_sample(
            &r.model,
            to_usize(n_max)?,
            StreamId::new(cfg.seed, p as u64, PATH_STREAM),
        )?;
        cfg.n_list
            .iter()
            .map(|&n| {
                let prefix = full.prefix(to_usize(n)?);
                if prefix.len() as u64 != n || prefix.lineage() != full.lineage() {
                    return Err(LabError::Config("sampler does not nest prefixes".into()));
                }
                Ok(delta_n(cfg, &r, &e, &prefix)?.delta_n)
            })
            .collect::<Result<Vec<f64>>>()
    })?;

    let mut raw = RawTable::new(&["path", "n", "delta_n", "running_max"]);
    let mut running_all = Vec::new();
    let mut all_stable = true;
    for (p, ds) in deltas.iter().enumerate() {
        let mut m = f64::NEG_INFINITY;
        let running: Vec<f64> = ds
            .iter()
            .map(|&d| {
                m = m.max(d);
                m
            })
            .collect();
        for ((n, d), rm) in cfg.n_list.iter().zip(ds).zip(&running) {
            raw.push(vec![p.to_string(), n.to_string(), fmt_f64(*d), fmt_f64(*rm)]);
        }
        if let Some(s) = stabilization(&running) {
            res.metrics.insert(format!("path_{p}_relative_increase"), s);
            all_stable &= s <= PATH_STABILITY;
        }
        running_all.push(running);
    }
    let column = |data: &[Vec<f64>], i: usize| data.iter().map(|v| v[i]).collect::<Vec<f64>>();
    let per_n = |data: &[Vec<f64>]| -> Vec<(u64, Vec<f64>)> {
        cfg.n_list
            .iter()
            .enumerate()
            .map(|(i, &n)| (n, column(data, i)))
            .collect()
    };
    res.series.push(Series::from_values("delta_n", &per_n(&deltas)));
    res.series
        .push(Series::from_values("running_max", &per_n(&running_all)));
    res.raw = raw;
    res.outcome = if cfg.n_list.len() < 2 {
        res.notes
            .push("a single n: the running maximum is the single value".into());
        Outcome::NotApplicable
    } else if all_stable {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Ok(res)
}

/// Normalized deviation with the configured selector next to the deterministic `h = a_n`;
/// PASS iff both median sequences have slope at most [`BOUNDED_SLOPE`].
pub fn run_rates(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    let r = cfg.resolve()?;
    let selector = cfg.selector(&r.kernel)?;
    let e = engine(cfg, &r)?;
    let tasks: Vec<(u64, u32)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |rep| (n, rep)))
        .collect();
    let rows = par_map(workers, tasks, |(n, rep)| {
        let sample = draw_sample(&r.model, to_usize(n)?, StreamId::new(cfg.seed, rep as u64, n))?;
        let grid = build_eval_grid(&r.model, &r.weight, &r.window, n, cfg.grid_cap, Some(&sample))?;
        let chosen = e.variable_weighted_deviation(&sample, &r.model, &r.weight, &selector, &r.window, &grid)?;
        let fixed = e.variable_weighted_deviation(
            &sample,
            &r.model,
            &r.weight,
            &BandwidthSelector::FixedA,
            &r.window,
            &grid,
        )?;
        let (a, b) = (r.window.a(n as f64), r.window.b(n as f64));
        if !(a <= chosen.h_at_argsup && chosen.h_at_argsup <= b) {
            return Err(wkde::Error::InvariantViolation {
                point: chosen.argsup.clone(),
                reason: format!("selected bandwidth {} outside [{a}, {b}]", chosen.h_at_argsup),
            }
            .into());
        }
        Ok((n, rep, chosen, fixed))
    })?;

    let mut res = ExperimentResult::new("rates");
    let mut raw = RawTable::new(&[
        "n",
        "replication",
        "selector_ratio",
        "h_at_argsup",
        "fixed_a_ratio",
        "argsup_coords",
    ]);
    let mut sel_values: Vec<(u64, Vec<f64>)> = Vec::new();
    let mut fix_values: Vec<(u64, Vec<f64>)> = Vec::new();
    let mut identical = true;
    for (n, rep, chosen, fixed) in &rows {
        raw.push(vec![
            n.to_string(),
            rep.to_string(),
            fmt_f64(chosen.normalized),
            fmt_f64(chosen.h_at_argsup),
            fmt_f64(fixed.normalized),
            fmt_coords(&chosen.argsup),
        ]);
        identical &= chosen.normalized == fixed.normalized;
        match sel_values.last_mut() {
            Some((m, v)) if m == n => v.push(chosen.normalized),
            _ => sel_values.push((*n, vec![chosen.normalized])),
        }
        match fix_values.last_mut() {
            Some((m, v)) if m == n => v.push(fixed.normalized),
            _ => fix_values.push((*n, vec![fixed.normalized])),
        }
    }
    let sel_name = format!("selector:{}", selector.name());
    res.series.push(Series::from_values(&sel_name, &sel_values));
    res.series.push(Series::from_values("fixed-a_n", &fix_values));
    res.raw = raw;
    if identical {
        res.notes.push("the selector and the fixed a_n columns coincide".into());
    }
    res.outcome = match (res.series[0].slope, res.series[1].slope) {
        (Some(s1), Some(s2)) if s1 <= BOUNDED_SLOPE && s2 <= BOUNDED_SLOPE => Outcome::Pass,
        (Some(_), Some(_)) => Outcome::Fail,
        _ => Outcome::NotApplicable,
    };
    Ok(res)
}

/// The plug-in functional bound on `functional_configs` random `(seed, h)` pairs, `h`
/// log-uniform in `[a_n, b_n]`; PASS iff it holds in every configuration.
pub fn run_functional(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    let r = cfg.resolve()?;
    let phi = cfg.functional()?;
    let n = cfg.functional_n;
    r.window.ensure_valid(n)?;
    let spec = BoundCheckSpec {
        window: r.window,
        max_points: cfg.grid_cap,
        quad_points: cfg.quad_points,
        refinements: 2,
    };
    let (a, b) = (r.window.a(n as f64), r.window.b(n as f64));
    let configs: Vec<u32> = (0..cfg.functional_configs).collect();
    let checks = par_map(workers, configs, |i| {
        let u: f64 = StreamId::new(cfg.seed, i as u64, BANDWIDTH_STREAM).rng()?.random();
        let h = a * (b / a).powf(u);
        let sample = draw_sample(&r.model, to_usize(n)?, StreamId::new(cfg.seed, i as u64, n))?;
        let bound = functional_bound_check(&sample, &r.kernel, h, &phi, &r.model, r.weight.beta(), &spec)?;
        Ok((h, bound))
    })?;
    let mut res = ExperimentResult::new("functional");
    let mut raw = RawTable::new(&[
        "config",
        "n",
        "h",
        "lhs",
        "rhs",
        "c_beta",
        "slack",
        "holds",
        "grid_points",
    ]);
    let mut ratios = Vec::with_capacity(checks.len());
    let mut failures = 0usize;
    for (i, (h, b)) in checks.iter().enumerate() {
        raw.push(vec![
            i.to_string(),
            n.to_string(),
            fmt_f64(*h),
            fmt_f64(b.lhs),
            fmt_f64(b.rhs),
            fmt_f64(b.c_beta),
            fmt_f64(b.slack),
            b.holds.to_string(),
            b.grid_points.to_string(),
        ]);
        ratios.push(b.lhs / (b.rhs + b.slack));
        failures += usize::from(!b.holds);
    }
    res.series
        .push(Series::from_values("lhs_over_rhs_plus_slack", &[(n, ratios)]));
    res.metrics.insert("configs".into(), checks.len() as f64);
    res.metrics.insert("failures".into(), failures as f64);
    res.raw = raw;
    res.outcome = if failures == 0 { Outcome::Pass } else { Outcome::Fail };
    Ok(res)
}

/// Regularity and tail audits plus the centering margin along `centering_n_list`. FAIL when a
/// condition is violated or the margin grows by more than [`CENTERING_NOISE`].
pub fn run_conditions(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let r = cfg.resolve()?;
    let mut res = ExperimentResult::new("conditions");
    let h_sweep: Vec<f64> = (2..=12).map(|e| 0.5f64.powi(e)).collect();
    res.conditions.extend(check_regularity(
        &r.model,
        &r.weight,
        &[0.25, 0.5],
        &h_sweep,
        &AuditGrid::default_for(cfg.dim),
    )?);
    for mode in [TailMode::Limsup, TailMode::Integral] {
        res.conditions.push(tail_report(cfg, &r, mode)?);
    }
    let centering = centering_margins(cfg, &r)?;
    let mut raw = RawTable::new(&["n", "gamma", "max_ratio"]);
    for (n, gamma, ratio) in &centering {
        raw.push(vec![n.to_string(), fmt_f64(*gamma), fmt_f64(*ratio)]);
        res.metrics.insert(format!("gamma_n_{n}"), *gamma);
    }
    res.raw = raw;
    let gammas: Vec<f64> = centering.iter().map(|c| c.1).collect();
    let decreasing = centering_decreasing(&gammas);
    if !decreasing {
        res.notes
            .push("centering margin does not decrease along centering_n_list".into());
    }
    let violated = res.conditions.iter().any(|c| c.verdict == Verdict::Violated);
    res.outcome = if violated || !decreasing {
        Outcome::Fail
    } else {
        Outcome::Pass
    };
    Ok(res)
}

/// `(n, γ, max ratio)` of the centering audit for each `n` of `centering_n_list`.
pub fn centering_margins(cfg: &ExperimentConfig, r: &Resolved) -> Result<Vec<(u64, f64, f64)>> {
    let e = engine(cfg, r)?;
    cfg.centering_n_list
        .iter()
        .map(|&n| {
            let grid = build_eval_grid(&r.model, &r.weight, &r.window, n, cfg.grid_cap, None)?;
            let c = e.centering_bound(&r.model, &r.window, n, &grid)?;
            Ok((n, c.gamma, c.max_ratio))
        })
        .collect()
}

/// Each margin is at most the previous one times `1 + CENTERING_NOISE`.
pub fn centering_decreasing(gammas: &[f64]) -> bool {
    gammas.windows(2).all(|w| w[1] <= w[0] * (1.0 + CENTERING_NOISE))
}
