//! Bandwidth selectors. Every selector's output is clamped into `[a_n, b_n]`.

// float methods come from the trait under no_std and are inherent when std is linked
use alloc::format;
use alloc::string::String;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthWindow;
use crate::centering::window_side;
use crate::error::{Error, Result};
use crate::estimator::KdeIndex;
use crate::kernel::Kernel;
use crate::sample::Sample;

/// Ratio exponent of the subgrid searched by the cross-validation selector.
pub const CV_SUBGRID_K: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BandwidthSelector {
    FixedA,
    FixedB,
    /// `√(a_n b_n)`.
    GeometricMidpoint,
    /// Least-squares cross-validation over the `k = 8` subgrid.
    LeastSquaresCv {
        kernel: Kernel,
    },
    /// Window side reaching the `⌈√n⌉`-th nearest neighbour of `t`.
    KnnLocal,
}

impl BandwidthSelector {
    /// Names: `fixed-a_n`, `fixed-b_n`, `geometric-midpoint`, `lscv`, `knn-local`.
    /// The cross-validation selector uses `kernel`.
    pub fn parse(name: &str, kernel: &Kernel) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "fixed-a_n" | "fixed-a" => Ok(BandwidthSelector::FixedA),
            "fixed-b_n" | "fixed-b" => Ok(BandwidthSelector::FixedB),
            "geometric-midpoint" | "midpoint" => Ok(BandwidthSelector::GeometricMidpoint),
            "lscv" | "least-squares-cv" | "cv" => Ok(BandwidthSelector::LeastSquaresCv { kernel: kernel.clone() }),
            "knn-local" | "knn" => Ok(BandwidthSelector::KnnLocal),
            other => Err(Error::Usage(format!(
                "unknown selector '{other}' (expected fixed-a_n, fixed-b_n, geometric-midpoint, lscv or knn-local)"
            ))),
        }
    }

    pub fn name(&self) -> String {
        String::from(match self {
            BandwidthSelector::FixedA => "fixed-a_n",
            BandwidthSelector::FixedB => "fixed-b_n",
            BandwidthSelector::GeometricMidpoint => "geometric-midpoint",
            BandwidthSelector::LeastSquaresCv { .. } => "lscv",
            BandwidthSelector::KnnLocal => "knn-local",
        })
    }

    pub fn is_local(&self) -> bool {
        matches!(self, BandwidthSelector::KnnLocal)
    }

    /// Bandwidth for location `t` using a prepared index.
    pub fn select_with_index(&self, index: &KdeIndex<'_>, t: Option<&[f64]>, window: &BandwidthWindow) -> Result<f64> {
        let sample = index.sample();
        let n = sample.len() as u64;
        window.ensure_valid(n)?;
        let nf = n as f64;
        let (a, b) = (window.a(nf), window.b(nf));
        let raw = match self {
            BandwidthSelector::FixedA => a,
            BandwidthSelector::FixedB => b,
            BandwidthSelector::GeometricMidpoint => (a * b).sqrt(),
            BandwidthSelector::LeastSquaresCv { kernel } => lscv_bandwidth(sample, kernel, window)?,
            BandwidthSelector::KnnLocal => {
                let t = t.ok_or_else(|| Error::Usage("the knn-local selector needs an evaluation point".into()))?;
                if t.len() != sample.dim() {
                    return Err(Error::Dimension {
                        expected: sample.dim(),
                        got: t.len(),
                    });
                }
                let k = (nf.sqrt().ceil() as usize).max(1);
                let dist = index.knn_distance(t, k);
                (2.0 * dist).powi(sample.dim() as i32)
            }
        };
        Ok(window.clamp(n, raw))
    }
}

/// Selects a bandwidth in `[a_n, b_n]` for the sample (and location `t` for local kinds).
pub fn select_bandwidth(
    selector: &BandwidthSelector,
    sample: &Sample,
    t: Option<&[f64]>,
    window: &BandwidthWindow,
) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Usage("sample is empty".into()));
    }
    selector.select_with_index(&KdeIndex::new(sample), t, window)
}

/// Least-squares cross-validation score
/// `∫ f̂_h² - (2/n) Σᵢ f̂_{h,-i}(Xᵢ)`.
pub fn lscv_score(sample: &Sample, kernel: &Kernel, h: f64) -> f64 {
    let n = sample.len();
    let d = sample.dim();
    let s = window_side(h, d);
    let nf = n as f64;
    // pairs with |Xᵢ - Xⱼ|∞ ≤ s feed both terms (the convolution has support [-1, 1]^d)
    let mut conv_sum = 0.0;
    let mut loo_sum = 0.0;
    if d == 1 {
        let index = KdeIndex::new(sample);
        let pts = index.sorted();
        for i in 0..n {
            let mut j = i;
            while j < n && pts[j] - pts[i] <= s {
                let w = (pts[i] - pts[j]) / s;
                let c = kernel.self_convolution(&[w]);
                if i == j {
                    conv_sum += c;
                } else {
                    conv_sum += 2.0 * c;
                    loo_sum += 2.0 * kernel.eval_unchecked(&[w]);
                }
                j += 1;
            }
        }
    } else {
        let mut v = alloc::vec![0.0; d];
        for i in 0..n {
            let xi = sample.point(i);
            for j in 0..n {
                let xj = sample.point(j);
                for k in 0..d {
                    v[k] = (xi[k] - xj[k]) / s;
                }
                conv_sum += kernel.self_convolution(&v);
                if i != j {
                    loo_sum += kernel.eval_unchecked(&v);
                }
            }
        }
    }
    let integral_sq = conv_sum / (nf * nf * h);
    let loo = loo_sum / ((nf - 1.0).max(1.0) * h);
    integral_sq - 2.0 * loo / nf
}

fn lscv_bandwidth(sample: &Sample, kernel: &Kernel, window: &BandwidthWindow) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::Usage("cross-validation needs at least two points".into()));
    }
    let grid = window.h_subgrid(sample.len() as u64, CV_SUBGRID_K)?;
    let mut best = (f64::INFINITY, grid[0]);
    for &h in &grid {
        let score = lscv_score(sample, kernel, h);
        if score < best.0 {
            best = (score, h);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DensityModel;
    use crate::sample::{draw_sample, StreamId};

    fn setup() -> (Sample, BandwidthWindow, Kernel) {
        let m = DensityModel::gaussian(1).unwrap();
        (
            draw_sample(&m, 1024, StreamId::new(3, 0, 0)).unwrap(),
            BandwidthWindow::power_law(0.7, 0.3).unwrap(),
            Kernel::uniform(1).unwrap(),
        )
    }

    #[test]
    fn fixed_and_midpoint() {
        let (s, w, k) = setup();
        assert_eq!(
            select_bandwidth(&BandwidthSelector::FixedA, &s, None, &w).unwrap(),
            0.0078125
        );
        assert_eq!(
            select_bandwidth(&BandwidthSelector::FixedB, &s, None, &w).unwrap(),
            0.125
        );
        let mid = select_bandwidth(&BandwidthSelector::GeometricMidpoint, &s, None, &w).unwrap();
        assert!((mid - 0.03125).abs() < 1e-17);
        let cv = select_bandwidth(&BandwidthSelector::parse("lscv", &k).unwrap(), &s, None, &w).unwrap();
        assert!((0.0078125..=0.125).contains(&cv));
    }

    #[test]
    fn knn_clamps_far_outside() {
        let (s, w, _) = setup();
        let h = select_bandwidth(&BandwidthSelector::KnnLocal, &s, Some(&[1e6]), &w).unwrap();
        assert_eq!(h, 0.125);
        assert!(matches!(
            select_bandwidth(&BandwidthSelector::KnnLocal, &s, None, &w),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn lscv_matches_brute_double_sum() {
        let m = DensityModel::gaussian(1).unwrap();
        let s = draw_sample(&m, 200, StreamId::new(9, 0, 0)).unwrap();
        let k = Kernel::epanechnikov(1).unwrap();
        let h = 0.3;
        let n = s.len() as f64;
        let mut conv = 0.0;
        let mut loo = 0.0;
        for x in s.iter() {
            for y in s.iter() {
                let v = (x[0] - y[0]) / h;
                conv += k.self_convolution(&[v]);
                loo += k.eval_unchecked(&[v]);
            }
        }
        loo -= n * k.eval_unchecked(&[0.0]);
        let want = conv / (n * n * h) - 2.0 * loo / ((n - 1.0) * h) / n;
        assert!((lscv_score(&s, &k, h) - want).abs() < 1e-12);
    }

    #[test]
    fn unknown_name_is_usage_error() {
        let k = Kernel::uniform(1).unwrap();
        assert!(matches!(
            BandwidthSelector::parse("silverman", &k),
            Err(Error::Usage(_))
        ));
    }
}
