//! Kernel density estimators: the brute-force double loop and the fast compact-support
//! paths (sorted window scan in one dimension, uniform spatial bins otherwise).

// float methods come from the trait under no_std and are inherent when std is linked
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
#[allow(unused_imports)]
use num_traits::Float;

use crate::bandwidth::check_bandwidth;
use crate::centering::window_side;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::sample::Sample;

/// Below this many kernel evaluations (`n · m`) the fast path defers to the brute force.
pub const FAST_PATH_THRESHOLD: usize = 10_000;

fn check_inputs(sample: &Sample, kernel: &Kernel, h: f64, points: &[f64]) -> Result<()> {
    check_bandwidth(h)?;
    if sample.is_empty() {
        return Err(Error::Usage("sample is empty".into()));
    }
    let d = kernel.dim();
    if sample.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            got: sample.dim(),
        });
    }
    if !points.len().is_multiple_of(d) {
        return Err(Error::Dimension {
            expected: d,
            got: points.len() % d,
        });
    }
    Ok(())
}

/// `f_{n,h}(t) = (1/(n h)) Σᵢ K((Xᵢ - t)/h^{1/d})` by the exact double loop.
/// `points` is row-major with `kernel.dim()` coordinates per point.
pub fn kde_brute(sample: &Sample, kernel: &Kernel, h: f64, points: &[f64]) -> Result<Vec<f64>> {
    check_inputs(sample, kernel, h, points)?;
    Ok(brute_values(sample, kernel, h, points))
}

fn brute_values(sample: &Sample, kernel: &Kernel, h: f64, points: &[f64]) -> Vec<f64> {
    let d = kernel.dim();
    let s = window_side(h, d);
    let norm = sample.len() as f64 * h;
    let mut u = vec![0.0; d];
    points
        .chunks_exact(d)
        .map(|t| {
            let mut sum = 0.0;
            for x in sample.iter() {
                for k in 0..d {
                    u[k] = (x[k] - t[k]) / s;
                }
                sum += kernel.eval_unchecked(&u);
            }
            sum / norm
        })
        .collect()
}

/// Same values as [`kde_brute`] (within rounding of the summation order) in
/// `O((n + m) log n)` for the sorted one-dimensional scan.
pub fn kde_fast(sample: &Sample, kernel: &Kernel, h: f64, points: &[f64]) -> Result<Vec<f64>> {
    check_inputs(sample, kernel, h, points)?;
    let m = points.len() / kernel.dim();
    if sample.len().saturating_mul(m) <= FAST_PATH_THRESHOLD {
        return Ok(brute_values(sample, kernel, h, points));
    }
    Ok(KdeIndex::new(sample).values(kernel, h, points))
}

/// A sample prepared for repeated estimator evaluations.
#[derive(Debug, Clone)]
pub struct KdeIndex<'a> {
    sample: &'a Sample,
    /// Sorted coordinates (one-dimensional samples only).
    sorted: Vec<f64>,
}

impl<'a> KdeIndex<'a> {
    pub fn new(sample: &'a Sample) -> Self {
        let sorted = if sample.dim() == 1 {
            let mut v = sample.points().to_vec();
            v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            v
        } else {
            Vec::new()
        };
        KdeIndex { sample, sorted }
    }

    pub fn sample(&self) -> &Sample {
        self.sample
    }

    /// Sorted coordinates of a one-dimensional sample.
    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Estimator values at `points`; inputs are assumed validated.
    pub fn values(&self, kernel: &Kernel, h: f64, points: &[f64]) -> Vec<f64> {
        let d = kernel.dim();
        if d == 1 {
            points.iter().map(|&t| self.value_1d(kernel, h, t)).collect()
        } else {
            let bins = SpatialBins::new(self.sample, window_side(h, d));
            let norm = self.sample.len() as f64 * h;
            points
                .chunks_exact(d)
                .map(|t| bins.kernel_sum(kernel, t) / norm)
                .collect()
        }
    }

    /// Estimator value at one point.
    pub fn value_at(&self, kernel: &Kernel, h: f64, t: &[f64]) -> f64 {
        if kernel.dim() == 1 {
            self.value_1d(kernel, h, t[0])
        } else {
            brute_values(self.sample, kernel, h, t)[0]
        }
    }

    #[inline]
    fn value_1d(&self, kernel: &Kernel, h: f64, t: f64) -> f64 {
        let (lo, hi) = self.window_range(h, t);
        let sum = if kernel.is_indicator() {
            (hi - lo) as f64 * kernel.kappa()
        } else {
            let mut acc = 0.0;
            for &x in &self.sorted[lo..hi] {
                acc += kernel.eval_unchecked(&[(x - t) / h]);
            }
            acc
        };
        sum / (self.sample.len() as f64 * h)
    }

    /// Index range of sorted points with `(x - t)/s ∈ [-1/2, 1/2]`, using the same floating
    /// point expression as the kernel argument.
    #[inline]
    pub fn window_range(&self, s: f64, t: f64) -> (usize, usize) {
        let lo = self.sorted.partition_point(|&x| (x - t) / s < -0.5);
        let hi = lo + self.sorted[lo..].partition_point(|&x| (x - t) / s <= 0.5);
        (lo, hi)
    }

    /// Sup-norm distance from `t` to its `k`-th nearest sample point (`1 ≤ k ≤ n`).
    pub fn knn_distance(&self, t: &[f64], k: usize) -> f64 {
        let n = self.sample.len();
        let k = k.clamp(1, n);
        if self.sample.dim() == 1 {
            let t = t[0];
            let p = self.sorted.partition_point(|&x| x < t);
            let (mut left, mut right) = (p, p);
            let mut dist = 0.0;
            for _ in 0..k {
                let dl = if left > 0 {
                    t - self.sorted[left - 1]
                } else {
                    f64::INFINITY
                };
                let dr = if right < n {
                    self.sorted[right] - t
                } else {
                    f64::INFINITY
                };
                if dl <= dr {
                    dist = dl;
                    left -= 1;
                } else {
                    dist = dr;
                    right += 1;
                }
            }
            dist
        } else {
            let mut d: Vec<f64> = self
                .sample
                .iter()
                .map(|x| x.iter().zip(t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .collect();
            let (_, kth, _) = d.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            *kth
        }
    }
}

/// Uniform bins of side `s`; a query at `t` gathers the `3^d` neighbouring bins, which hold
/// every point with `|x - t|∞ ≤ s/2`.
struct SpatialBins<'a> {
    sample: &'a Sample,
    side: f64,
    /// Bin coordinates, `d` per point, for the points in `order`.
    keys: Vec<i64>,
    order: Vec<usize>,
}

impl<'a> SpatialBins<'a> {
    fn new(sample: &'a Sample, side: f64) -> Self {
        let d = sample.dim();
        let raw: Vec<i64> = sample.points().iter().map(|x| (x / side).floor() as i64).collect();
        let mut order: Vec<usize> = (0..sample.len()).collect();
        order.sort_unstable_by(|&i, &j| raw[i * d..(i + 1) * d].cmp(&raw[j * d..(j + 1) * d]));
        let mut keys = Vec::with_capacity(raw.len());
        for &i in &order {
            keys.extend_from_slice(&raw[i * d..(i + 1) * d]);
        }
        SpatialBins {
            sample,
            side,
            keys,
            order,
        }
    }

    fn key(&self, pos: usize) -> &[i64] {
        let d = self.sample.dim();
        &self.keys[pos * d..(pos + 1) * d]
    }

    fn kernel_sum(&self, kernel: &Kernel, t: &[f64]) -> f64 {
        let d = t.len();
        let center: Vec<i64> = t.iter().map(|x| (x / self.side).floor() as i64).collect();
        let mut probe = center.clone();
        let mut offset = vec![-1i64; d];
        let mut u = vec![0.0; d];
        let mut sum = 0.0;
        let n = self.order.len();
        loop {
            for k in 0..d {
                probe[k] = center[k] + offset[k];
            }
            let lo = partition(n, |p| self.key(p) < probe.as_slice());
            let hi = lo + partition(n - lo, |p| self.key(lo + p) <= probe.as_slice());
            for &i in &self.order[lo..hi] {
                let x = self.sample.point(i);
                for k in 0..d {
                    u[k] = (x[k] - t[k]) / self.side;
                }
                sum += kernel.eval_unchecked(&u);
            }
            let mut k = 0;
            loop {
                if k == d {
                    return sum;
                }
                offset[k] += 1;
                if offset[k] <= 1 {
                    break;
                }
                offset[k] = -1;
                k += 1;
            }
        }
    }
}

/// First index in `0..len` where `pred` is false (pred must be monotone).
fn partition<F: Fn(usize) -> bool>(len: usize, pred: F) -> usize {
    let (mut lo, mut hi) = (0usize, len);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_values() {
        let k = Kernel::uniform(1).unwrap();
        let s = Sample::from_points(1, vec![0.0]).unwrap();
        assert_eq!(kde_brute(&s, &k, 0.25, &[0.0]).unwrap(), vec![4.0]);
        let s = Sample::from_points(1, vec![0.0, 0.5]).unwrap();
        assert_eq!(kde_brute(&s, &k, 0.5, &[0.25]).unwrap(), vec![2.0]);
        let s = Sample::from_points(1, vec![0.0, 0.9]).unwrap();
        assert_eq!(kde_brute(&s, &k, 0.5, &[0.25]).unwrap(), vec![1.0]);
    }

    #[test]
    fn fallback_is_bit_identical() {
        let k = Kernel::epanechnikov(1).unwrap();
        let s = Sample::from_points(1, (0..50).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let pts: Vec<f64> = (0..100).map(|i| -1.0 + 0.02 * i as f64).collect();
        assert_eq!(
            kde_fast(&s, &k, 0.2, &pts).unwrap(),
            kde_brute(&s, &k, 0.2, &pts).unwrap()
        );
    }

    #[test]
    fn knn_distance_one_dim() {
        let s = Sample::from_points(1, vec![0.0, 1.0, 3.0, 7.0]).unwrap();
        let idx = KdeIndex::new(&s);
        assert_eq!(idx.knn_distance(&[0.9], 1), 0.09999999999999998);
        assert_eq!(idx.knn_distance(&[0.9], 2), 0.9);
        assert_eq!(idx.knn_distance(&[0.9], 3), 2.1);
        assert_eq!(idx.knn_distance(&[100.0], 1), 93.0);
    }

    #[test]
    fn domain_checks() {
        let k = Kernel::uniform(1).unwrap();
        let s = Sample::from_points(1, vec![0.0]).unwrap();
        assert!(kde_brute(&s, &k, 1.0, &[0.0]).is_err());
        assert!(kde_brute(&s, &k, 0.0, &[0.0]).is_err());
        let k2 = Kernel::uniform(2).unwrap();
        assert!(kde_brute(&s, &k2, 0.5, &[0.0, 0.0]).is_err());
    }
}
